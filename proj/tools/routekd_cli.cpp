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

// routekd: command-line driver for the route-choice distillation pipeline.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "routekd/errors.hpp"
#include "routekd/io_util.hpp"
#include "routekd/pipeline.hpp"

namespace {

using routekd::pipeline::RunConfig;

struct Overrides {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

RunConfig resolve_config(const Overrides& o) {
  RunConfig config = RunConfig::defaults();
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(routekd::pipeline::kConfigEnvVar)) path = env;
  }
  if (!path.empty()) config = routekd::pipeline::load_config(path);
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  if (o.has_seed) config.seed = o.seed;
  return config;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw routekd::ValidationError("bad seed '" + item + "' in --seeds");
    }
  }
  if (seeds.empty()) throw routekd::ValidationError("--seeds needs at least one seed");
  return seeds;
}

void print(const routekd::pipeline::StepSummary& s) {
  std::cout << s.command << ": " << s.message << "\n";
  for (const auto& p : s.outputs) std::cout << "  wrote " << p.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Route-choice knowledge distillation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides overrides;
  app.add_option("-c,--config", overrides.config_path,
                 std::string("JSON run configuration (default: $") + routekd::pipeline::kConfigEnvVar +
                     ", else built-in defaults)");
  app.add_option("-o,--out", overrides.out_dir, "Output directory override");
  app.add_option_function<std::uint64_t>(
      "-s,--seed",
      [&overrides](const std::uint64_t& v) {
        overrides.seed = v;
        overrides.has_seed = true;
      },
      "Master seed override");

  auto* gen_basic = app.add_subcommand("gen-basic", "Sample basic data from the aggregate model");
  auto* gen_vr = app.add_subcommand("gen-vr", "Generate the synthetic VR seed corpus");
  auto* augment = app.add_subcommand("augment", "Fit the GMM and sample the augmented VR corpus");
  auto* train_teacher = app.add_subcommand("train-teacher", "Pretrain the teacher on augmented VR data");
  auto* distill = app.add_subcommand("distill", "Distill the student (and train the standalone student)");
  auto* eval = app.add_subcommand("eval", "Write the comparison report (CSV + SVG)");
  auto* run_all = app.add_subcommand("run-all", "Run every step in order");
  std::string seed_list;
  run_all->add_option("--seeds", seed_list, "Comma-separated seeds; runs one pipeline per seed in parallel");
  auto* print_config = app.add_subcommand("print-config", "Print the effective configuration as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig config = resolve_config(overrides);
    if (print_config->parsed()) {
      std::cout << routekd::pipeline::to_json(config).dump(2) << "\n";
    } else if (gen_basic->parsed()) {
      print(routekd::pipeline::gen_basic(config));
    } else if (gen_vr->parsed()) {
      print(routekd::pipeline::gen_vr(config));
    } else if (augment->parsed()) {
      print(routekd::pipeline::augment(config));
    } else if (train_teacher->parsed()) {
      print(routekd::pipeline::train_teacher(config));
    } else if (distill->parsed()) {
      print(routekd::pipeline::distill_student(config));
    } else if (eval->parsed()) {
      print(routekd::pipeline::evaluate(config));
    } else if (run_all->parsed()) {
      if (seed_list.empty()) {
        for (const auto& step : routekd::pipeline::run_all(config)) print(step);
      } else {
        const auto seeds = parse_seed_list(seed_list);
        const auto reports = routekd::pipeline::run_seed_sweep(config, seeds);
        std::cout << "seed,accuracy_teacher_on_basic,accuracy_student_standalone,accuracy_distilled,"
                     "l1_baseline_to_reference,l1_model_to_reference\n";
        for (std::size_t i = 0; i < seeds.size(); ++i) {
          const auto& r = reports[i];
          std::cout << seeds[i] << ',' << routekd::format_double(r.accuracies.teacher_on_basic) << ','
                    << routekd::format_double(r.accuracies.student_standalone) << ','
                    << routekd::format_double(r.accuracies.distilled) << ','
                    << routekd::format_double(r.l1_baseline) << ',' << routekd::format_double(r.l1_model) << "\n";
        }
      }
    }
  } catch (const routekd::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
