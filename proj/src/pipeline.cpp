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

#include "routekd/pipeline.hpp"

#include <cmath>
#include <exception>
#include <future>
#include <mutex>
#include <set>

#include "routekd/errors.hpp"
#include "routekd/gmm.hpp"
#include "routekd/io_util.hpp"
#include "routekd/model_io.hpp"
#include "routekd/random.hpp"

namespace routekd::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json training_to_json(const distill::DistillationConfig& c, bool with_distillation_terms) {
  json j = {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum}};
  if (with_distillation_terms) {
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["temperature"] = c.temperature;
  }
  return j;
}

void training_from_json(const json& j, distill::DistillationConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.temperature = j.value("temperature", c.temperature);
}

// Manifest documents carry no timestamps so reruns are byte-identical.
void write_manifest(const fs::path& artifact, const std::string& command, std::uint64_t seed,
                    std::size_t rows, const std::vector<fs::path>& inputs) {
  json in = json::object();
  for (const fs::path& p : inputs) in[p.filename().string()] = sha256_file(p);
  json doc = {{"artifact", artifact.filename().string()},
              {"command", command},
              {"seed", seed},
              {"rows", rows},
              {"sha256", sha256_file(artifact)},
              {"inputs", std::move(in)}};
  write_text_file(ArtifactPaths::manifest_for(artifact), doc.dump(2) + "\n");
}

void require_artifact(const fs::path& path, const std::string& producing_command) {
  if (!fs::exists(path))
    throw MissingArtifactError("'" + path.string() + "' not found; run `" + producing_command + "` first");
}

route::ExitProbabilities baseline(const RunConfig& c) {
  return route::baseline_distribution(c.travel_times, c.alpha_b, c.baseline_transform);
}

std::pair<Dataset, Dataset> basic_split(const RunConfig& c, const ArtifactPaths& paths) {
  const Dataset basic = route::load_csv(paths.basic_csv, Provenance::basic);
  return route::split(basic, c.train_fraction, StageSeeds::from(c.seed).basic_split);
}

nn::Mlp load_eval_model(const fs::path& path) {
  nn::Mlp m = nn::load_model(path);
  m.set_mode(nn::Mode::eval);
  return m;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.teacher_training.epochs = 30;
  c.teacher_training.batch_size = 32;
  c.teacher_training.learning_rate = 0.01;
  c.distillation.epochs = 20;
  c.distillation.batch_size = 32;
  c.distillation.learning_rate = 0.01;
  c.distillation.alpha = 0.5;
  c.distillation.beta = 0.5;
  c.distillation.temperature = 2.0;
  // Synthetic field volumes: the generator's population exit shares scaled
  // to 10,000 vehicles.
  const auto truth = route::expected_exit_distribution(c.vr);
  for (std::size_t e = 0; e < kNumExits; ++e) c.reference_volumes[e] = std::round(truth[e] * 10000.0);
  return c;
}

void RunConfig::validate() const {
  if (out_dir.empty()) throw ValidationError("out_dir must not be empty");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir))
    throw IoError("cannot create output directory '" + out_dir.string() + "'");

  route::baseline_distribution(travel_times, alpha_b, baseline_transform);
  if (basic_records < 1) throw ValidationError("basic_records must be >= 1");
  if (participants < 1) throw ValidationError("participants must be >= 1");
  if (vr.scenarios.empty()) throw ValidationError("scenario list is empty");
  if (gmm.k_max < 1 || gmm.max_iter < 1 || gmm.n_samples < 1)
    throw ValidationError("gmm settings must be positive");
  if (!(gmm.tol >= 0.0)) throw ValidationError("gmm tol must be nonnegative");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must be in (0, 1)");
  nn::parse_architecture(teacher_architecture);
  nn::parse_architecture(student_architecture);
  teacher_training.validate();
  distillation.validate();
  route::real_probabilities(reference_volumes);
}

json to_json(const RunConfig& c) {
  return {{"version", kConfigVersion},
          {"out_dir", c.out_dir.string()},
          {"seed", c.seed},
          {"travel_times", c.travel_times},
          {"alpha_b", c.alpha_b},
          {"baseline_transform", route::to_string(c.baseline_transform)},
          {"basic", {{"records", c.basic_records}}},
          {"vr", {{"participants", c.participants}, {"generator", route::to_json(c.vr)}}},
          {"gmm",
           {{"k", c.gmm.k},
            {"k_max", c.gmm.k_max},
            {"max_iter", c.gmm.max_iter},
            {"tol", c.gmm.tol},
            {"samples", c.gmm.n_samples}}},
          {"train_fraction", c.train_fraction},
          {"teacher", {{"architecture", c.teacher_architecture}, {"training", training_to_json(c.teacher_training, false)}}},
          {"student", {{"architecture", c.student_architecture}}},
          {"distillation", training_to_json(c.distillation, true)},
          {"reference_volumes", c.reference_volumes},
          {"aggregation", eval::to_string(c.aggregation)}};
}

RunConfig config_from_json(const json& doc) {
  static const std::set<std::string> known = {
      "version", "out_dir", "seed", "travel_times", "alpha_b", "baseline_transform", "basic", "vr", "gmm",
      "train_fraction", "teacher", "student", "distillation", "reference_volumes", "aggregation"};
  if (!doc.is_object()) throw ParseError("config must be a JSON object");
  for (const auto& [key, _] : doc.items())
    if (!known.contains(key)) throw ParseError("config: unknown key '" + key + "'");
  if (doc.value("version", 0) != kConfigVersion)
    throw ParseError("config: unsupported version (expected " + std::to_string(kConfigVersion) + ")");

  RunConfig c = RunConfig::defaults();
  try {
    c.out_dir = doc.value("out_dir", c.out_dir.string());
    c.seed = doc.value("seed", c.seed);
    c.travel_times = doc.value("travel_times", c.travel_times);
    c.alpha_b = doc.value("alpha_b", c.alpha_b);
    if (doc.contains("baseline_transform"))
      c.baseline_transform = route::baseline_transform_from_string(doc.at("baseline_transform").get<std::string>());
    if (doc.contains("basic")) c.basic_records = doc.at("basic").value("records", c.basic_records);
    if (doc.contains("vr")) {
      const json& vr = doc.at("vr");
      c.participants = vr.value("participants", c.participants);
      if (vr.contains("generator")) c.vr = route::synthetic_vr_spec_from_json(vr.at("generator"));
    }
    c.vr.travel_times = c.travel_times;
    if (doc.contains("gmm")) {
      const json& g = doc.at("gmm");
      c.gmm.k = g.value("k", c.gmm.k);
      c.gmm.k_max = g.value("k_max", c.gmm.k_max);
      c.gmm.max_iter = g.value("max_iter", c.gmm.max_iter);
      c.gmm.tol = g.value("tol", c.gmm.tol);
      c.gmm.n_samples = g.value("samples", c.gmm.n_samples);
    }
    c.train_fraction = doc.value("train_fraction", c.train_fraction);
    if (doc.contains("teacher")) {
      const json& t = doc.at("teacher");
      c.teacher_architecture = t.value("architecture", c.teacher_architecture);
      if (t.contains("training")) training_from_json(t.at("training"), c.teacher_training);
    }
    if (doc.contains("student")) c.student_architecture = doc.at("student").value("architecture", c.student_architecture);
    if (doc.contains("distillation")) training_from_json(doc.at("distillation"), c.distillation);
    c.reference_volumes = doc.value("reference_volumes", c.reference_volumes);
    if (doc.contains("aggregation"))
      c.aggregation = eval::aggregation_from_string(doc.at("aggregation").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) { return config_from_json(parse_json_file(path)); }

StageSeeds StageSeeds::from(std::uint64_t seed) {
  return {derive_seed(seed, "basic"),      derive_seed(seed, "vr"),
          derive_seed(seed, "gmm-fit"),    derive_seed(seed, "gmm-sample"),
          derive_seed(seed, "vr-split"),   derive_seed(seed, "basic-split"),
          derive_seed(seed, "teacher"),    derive_seed(seed, "student")};
}

ArtifactPaths::ArtifactPaths(const fs::path& out_dir)
    : basic_csv(out_dir / "basic.csv"),
      vr_seed_csv(out_dir / "vr_seed.csv"),
      gmm_json(out_dir / "gmm.json"),
      vr_augmented_csv(out_dir / "vr_augmented.csv"),
      teacher_model(out_dir / "teacher.json"),
      teacher_trace(out_dir / "teacher_trace.csv"),
      distilled_model(out_dir / "student_distilled.json"),
      distilled_trace(out_dir / "distill_trace.csv"),
      standalone_model(out_dir / "student_standalone.json"),
      standalone_trace(out_dir / "standalone_trace.csv"),
      report_csv(out_dir / "report.csv"),
      report_svg(out_dir / "report.svg") {}

fs::path ArtifactPaths::manifest_for(const fs::path& artifact) {
  fs::path m = artifact;
  m += ".manifest.json";
  return m;
}

StepSummary gen_basic(const RunConfig& config) {
  config.validate();
  const ArtifactPaths paths(config.out_dir);
  const auto seeds = StageSeeds::from(config.seed);
  const Dataset basic = route::sample_basic_data(baseline(config), config.basic_records, config.travel_times, seeds.basic);
  route::save_csv(basic, paths.basic_csv);
  write_manifest(paths.basic_csv, "gen-basic", seeds.basic, basic.size(), {});
  return {"gen-basic", {paths.basic_csv}, std::to_string(basic.size()) + " basic records"};
}

StepSummary gen_vr(const RunConfig& config) {
  config.validate();
  const ArtifactPaths paths(config.out_dir);
  const auto seeds = StageSeeds::from(config.seed);
  const Dataset vr = route::generate_synthetic_vr(config.vr, config.participants, seeds.vr);
  route::save_csv(vr, paths.vr_seed_csv);
  write_manifest(paths.vr_seed_csv, "gen-vr", seeds.vr, vr.size(), {});
  return {"gen-vr", {paths.vr_seed_csv}, std::to_string(vr.size()) + " synthetic VR records"};
}

StepSummary augment(const RunConfig& config) {
  config.validate();
  const ArtifactPaths paths(config.out_dir);
  require_artifact(paths.vr_seed_csv, "gen-vr");
  const auto seeds = StageSeeds::from(config.seed);
  const Dataset vr = route::load_csv(paths.vr_seed_csv, Provenance::synthetic_vr);
  const Matrix data = gmm::to_fit_matrix(vr);

  gmm::FitResult fit = config.gmm.k == 0
                           ? gmm::select_by_bic(data, config.gmm.k_max, config.gmm.max_iter, config.gmm.tol, seeds.gmm_fit).best
                           : gmm::fit_em(data, config.gmm.k, config.gmm.max_iter, config.gmm.tol, seeds.gmm_fit);
  gmm::save(fit.model, paths.gmm_json);
  write_manifest(paths.gmm_json, "augment", seeds.gmm_fit, fit.model.k(), {paths.vr_seed_csv});

  Dataset augmented = gmm::sample(fit.model, config.gmm.n_samples,
                                  gmm::OrdinalSchema::driving_records(config.travel_times), seeds.gmm_sample);
  // Each augmented record carries the travel time of the exit it chose.
  route::rekey_travel_times(augmented, config.travel_times);
  route::save_csv(augmented, paths.vr_augmented_csv);
  write_manifest(paths.vr_augmented_csv, "augment", seeds.gmm_sample, augmented.size(),
                 {paths.vr_seed_csv, paths.gmm_json});
  return {"augment",
          {paths.gmm_json, paths.vr_augmented_csv},
          "k = " + std::to_string(fit.model.k()) + ", " + std::to_string(augmented.size()) + " augmented records"};
}

StepSummary train_teacher(const RunConfig& config) {
  config.validate();
  const ArtifactPaths paths(config.out_dir);
  require_artifact(paths.vr_augmented_csv, "augment");
  const auto seeds = StageSeeds::from(config.seed);
  const Dataset vr = route::load_csv(paths.vr_augmented_csv, Provenance::synthetic_vr);
  const auto [train, test] = route::split(vr, config.train_fraction, seeds.vr_split);

  distill::DistillationConfig training = config.teacher_training;
  training.seed = seeds.teacher;
  const auto result = distill::pretrain_teacher(nn::parse_architecture(config.teacher_architecture), train, &test, training);
  nn::save_model(result.best_model, paths.teacher_model);
  write_text_file(paths.teacher_trace, distill::trace_to_csv(result.trace));
  write_manifest(paths.teacher_model, "train-teacher", seeds.teacher, train.size(), {paths.vr_augmented_csv});
  write_manifest(paths.teacher_trace, "train-teacher", seeds.teacher, result.trace.epochs.size(), {paths.vr_augmented_csv});
  return {"train-teacher",
          {paths.teacher_model, paths.teacher_trace},
          "best VR test accuracy " + format_double(result.best_accuracy) + " at epoch " + std::to_string(result.best_epoch)};
}

StepSummary distill_student(const RunConfig& config) {
  config.validate();
  const ArtifactPaths paths(config.out_dir);
  require_artifact(paths.teacher_model, "train-teacher");
  require_artifact(paths.basic_csv, "gen-basic");
  const auto seeds = StageSeeds::from(config.seed);
  const auto [train, test] = basic_split(config, paths);
  const nn::Mlp teacher = load_eval_model(paths.teacher_model);
  const nn::Architecture student_arch = nn::parse_architecture(config.student_architecture);

  distill::DistillationConfig dc = config.distillation;
  dc.seed = seeds.student;
  const auto distilled = distill::distill(teacher, student_arch, train, test, dc);
  const auto standalone = distill::train_standalone(student_arch, train, test, dc);

  nn::save_model(distilled.best_model, paths.distilled_model);
  write_text_file(paths.distilled_trace, distill::trace_to_csv(distilled.trace));
  nn::save_model(standalone.best_model, paths.standalone_model);
  write_text_file(paths.standalone_trace, distill::trace_to_csv(standalone.trace));
  const std::vector<fs::path> inputs{paths.basic_csv, paths.teacher_model};
  write_manifest(paths.distilled_model, "distill", seeds.student, train.size(), inputs);
  write_manifest(paths.distilled_trace, "distill", seeds.student, distilled.trace.epochs.size(), inputs);
  write_manifest(paths.standalone_model, "distill", seeds.student, train.size(), {paths.basic_csv});
  write_manifest(paths.standalone_trace, "distill", seeds.student, standalone.trace.epochs.size(), {paths.basic_csv});
  return {"distill",
          {paths.distilled_model, paths.distilled_trace, paths.standalone_model, paths.standalone_trace},
          "best test accuracy: distilled " + format_double(distilled.best_accuracy) + ", standalone " +
              format_double(standalone.best_accuracy)};
}

StepSummary evaluate(const RunConfig& config) {
  config.validate();
  const ArtifactPaths paths(config.out_dir);
  require_artifact(paths.distilled_model, "distill");
  require_artifact(paths.standalone_model, "distill");
  require_artifact(paths.teacher_model, "train-teacher");
  require_artifact(paths.basic_csv, "gen-basic");
  require_artifact(paths.vr_seed_csv, "gen-vr");

  const auto [train, test] = basic_split(config, paths);
  const nn::Mlp teacher = load_eval_model(paths.teacher_model);
  const nn::Mlp distilled = load_eval_model(paths.distilled_model);
  const nn::Mlp standalone = load_eval_model(paths.standalone_model);
  const Dataset vr = route::load_csv(paths.vr_seed_csv, Provenance::synthetic_vr);

  eval::Accuracies acc;
  acc.teacher_on_basic = eval::accuracy(teacher, test);
  acc.student_standalone = eval::accuracy(standalone, test);
  acc.distilled = eval::accuracy(distilled, test);
  const auto report = eval::build_report(baseline(config),
                                         eval::predicted_exit_distribution(distilled, test, config.aggregation),
                                         route::real_probabilities(config.reference_volumes),
                                         route::label_distribution(vr), acc);
  eval::save_report(report, paths.report_csv, paths.report_svg);
  const std::vector<fs::path> inputs{paths.basic_csv, paths.vr_seed_csv, paths.teacher_model,
                                     paths.distilled_model, paths.standalone_model};
  write_manifest(paths.report_csv, "eval", config.seed, kNumExits, inputs);
  write_manifest(paths.report_svg, "eval", config.seed, kNumExits, inputs);
  return {"eval",
          {paths.report_csv, paths.report_svg},
          "L1 to reference: model " + format_double(report.l1_model) + ", baseline " +
              format_double(report.l1_baseline)};
}

std::vector<StepSummary> run_all(const RunConfig& config) {
  return {gen_basic(config), gen_vr(config), augment(config), train_teacher(config), distill_student(config),
          evaluate(config)};
}

eval::ComparisonReport load_report(const RunConfig& config) {
  const ArtifactPaths paths(config.out_dir);
  require_artifact(paths.report_csv, "eval");
  return eval::report_from_csv(read_text_file(paths.report_csv));
}

std::vector<eval::ComparisonReport> run_seed_sweep(const RunConfig& config,
                                                   const std::vector<std::uint64_t>& seeds) {
  std::vector<std::future<eval::ComparisonReport>> jobs;
  for (std::uint64_t seed : seeds) {
    RunConfig c = config;
    c.seed = seed;
    c.out_dir = config.out_dir / ("seed-" + std::to_string(seed));
    jobs.push_back(std::async(std::launch::async, [c] {
      run_all(c);
      return load_report(c);
    }));
  }
  std::vector<eval::ComparisonReport> reports;
  std::exception_ptr first_error;
  for (auto& job : jobs) {
    try {
      reports.push_back(job.get());
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return reports;
}

}  // namespace routekd::pipeline
