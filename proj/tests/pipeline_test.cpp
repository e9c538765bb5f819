// Copyright 2026 The routekd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>

#include "doctest.h"
#include "routekd/errors.hpp"
#include "routekd/gmm.hpp"
#include "routekd/io_util.hpp"
#include "routekd/pipeline.hpp"

using namespace routekd;
using namespace routekd::pipeline;
namespace fs = std::filesystem;

namespace {

RunConfig fresh_config(const std::string& name) {
  RunConfig c = RunConfig::defaults();
  c.out_dir = fs::temp_directory_path() / ("routekd-pipeline-" + name);
  fs::remove_all(c.out_dir);
  return c;
}

std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config JSON") {
  RunConfig c = RunConfig::defaults();
  c.seed = 17;
  c.gmm.k = 3;
  c.teacher_architecture = "8n-0.5DP";
  c.distillation.temperature = 4.0;
  c.aggregation = eval::Aggregation::mean_prob;
  const RunConfig back = config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.seed == 17);
  CHECK(back.distillation.temperature == 4.0);

  // Defaults are filled in for missing keys; the version is required.
  CHECK(to_json(config_from_json({{"version", 1}})) == to_json(RunConfig::defaults()));
  CHECK_THROWS_AS(config_from_json(nlohmann::json::object()), ParseError);

  nlohmann::json bad = to_json(c);
  bad["learning_rate"] = 0.1;
  CHECK_THROWS_AS(config_from_json(bad), ParseError);
  bad = to_json(c);
  bad["version"] = 2;
  CHECK_THROWS_AS(config_from_json(bad), ParseError);

  const auto seeds = StageSeeds::from(1);
  CHECK(seeds.basic != seeds.vr);
  CHECK(StageSeeds::from(1).teacher == seeds.teacher);
}

TEST_CASE("gen-basic") {
  RunConfig c = fresh_config("gen-basic");
  gen_basic(c);
  const ArtifactPaths paths(c.out_dir);
  const std::string first = sha256_file(paths.basic_csv);
  const auto manifest = parse_json_file(ArtifactPaths::manifest_for(paths.basic_csv));
  CHECK(manifest.at("rows") == 10000);
  CHECK(manifest.at("sha256") == first);
  CHECK(manifest.at("artifact") == "basic.csv");

  gen_basic(c);
  CHECK(sha256_file(paths.basic_csv) == first);

  c.basic_records = 0;
  CHECK_THROWS_AS(gen_basic(c), ValidationError);
}

TEST_CASE("steps name the missing prerequisite") {
  const RunConfig c = fresh_config("missing");
  CHECK(error_message([&] { evaluate(c); }).find("run `distill` first") != std::string::npos);
  CHECK(error_message([&] { augment(c); }).find("run `gen-vr` first") != std::string::npos);
  CHECK(error_message([&] { train_teacher(c); }).find("run `augment` first") != std::string::npos);
  CHECK_THROWS_AS(distill_student(c), MissingArtifactError);
  CHECK_THROWS_AS(load_report(c), MissingArtifactError);
}

TEST_CASE("run-all on defaults") {
  RunConfig c = fresh_config("run-all");
  const auto steps = run_all(c);
  CHECK(steps.size() == 6);
  const ArtifactPaths paths(c.out_dir);

  CHECK(route::load_csv(paths.vr_seed_csv).size() == 410);
  const Dataset augmented = route::load_csv(paths.vr_augmented_csv);
  CHECK(augmented.size() == 10000);
  const auto schema = gmm::OrdinalSchema::driving_records(c.travel_times);
  const Matrix rows = gmm::to_fit_matrix(augmented);
  for (std::size_t r = 0; r < rows.rows(); ++r) REQUIRE(schema.accepts(rows.row(r)));

  const eval::ComparisonReport report = load_report(c);
  for (double a : {report.accuracies.teacher_on_basic, report.accuracies.student_standalone,
                   report.accuracies.distilled}) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
  CHECK_NOTHROW(route::validate_distribution(report.model));
  CHECK(report.reference == route::real_probabilities(c.reference_volumes));

  // Manifests chain each artifact to the checksums of its inputs.
  const auto m = parse_json_file(ArtifactPaths::manifest_for(paths.vr_augmented_csv));
  CHECK(m.at("inputs").at("vr_seed.csv") == sha256_file(paths.vr_seed_csv));
  CHECK(m.at("inputs").at("gmm.json") == sha256_file(paths.gmm_json));
  const auto r = parse_json_file(ArtifactPaths::manifest_for(paths.report_csv));
  CHECK(r.at("inputs").at("student_distilled.json") == sha256_file(paths.distilled_model));

  // Rerunning a single step reproduces its outputs.
  const std::string teacher_sha = sha256_file(paths.teacher_model);
  train_teacher(c);
  CHECK(sha256_file(paths.teacher_model) == teacher_sha);
}
