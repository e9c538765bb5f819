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

#include "routekd/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "routekd/errors.hpp"
#include "routekd/io_util.hpp"

namespace routekd::eval {

namespace {

void require_ready(const nn::Mlp& model, const Dataset& dataset) {
  if (dataset.empty()) throw ValidationError("evaluation on an empty dataset");
  if (model.mode() != nn::Mode::eval) throw UsageError("model must be in eval mode for evaluation");
  if (model.output_dim() != kNumExits)
    throw ValidationError("model must have " + std::to_string(kNumExits) + " outputs");
}

}  // namespace

std::vector<int> predict(const nn::Mlp& model, const Dataset& dataset) {
  require_ready(model, dataset);
  const Matrix logits = model.infer(dataset.features);
  std::vector<int> out(dataset.size());
  for (std::size_t r = 0; r < dataset.size(); ++r) out[r] = static_cast<int>(nn::argmax(logits.row(r)));
  return out;
}

double accuracy(const nn::Mlp& model, const Dataset& dataset) {
  const std::vector<int> predicted = predict(model, dataset);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < predicted.size(); ++r) correct += predicted[r] == dataset.labels[r];
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

std::string to_string(Aggregation a) {
  return a == Aggregation::argmax_count ? "argmax_count" : "mean_prob";
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "argmax_count") return Aggregation::argmax_count;
  if (s == "mean_prob") return Aggregation::mean_prob;
  throw ValidationError("unknown aggregation '" + std::string(s) + "'");
}

ExitProbabilities predicted_exit_distribution(const nn::Mlp& model, const Dataset& dataset,
                                              Aggregation mode) {
  require_ready(model, dataset);
  const double n = static_cast<double>(dataset.size());
  ExitProbabilities p{};
  if (mode == Aggregation::argmax_count) {
    // Integer counts first so every entry is an exact multiple of 1/n.
    std::array<std::size_t, kNumExits> counts{};
    for (int e : predict(model, dataset)) ++counts[static_cast<std::size_t>(e)];
    for (std::size_t e = 0; e < kNumExits; ++e) p[e] = static_cast<double>(counts[e]) / n;
    return p;
  }
  const Matrix probs = nn::softmax(model.infer(dataset.features), 1.0);
  for (std::size_t r = 0; r < probs.rows(); ++r)
    for (std::size_t e = 0; e < kNumExits; ++e) p[e] += probs(r, e);
  for (double& v : p) v /= n;
  return p;
}

double l1_distance(const ExitProbabilities& a, const ExitProbabilities& b) {
  double d = 0.0;
  for (std::size_t e = 0; e < kNumExits; ++e) d += std::abs(a[e] - b[e]);
  return d;
}

ComparisonReport build_report(const ExitProbabilities& baseline, const ExitProbabilities& model_dist,
                              const ExitProbabilities& reference,
                              const ExitProbabilities& vr_empirical, const Accuracies& accuracies) {
  route::validate_distribution(baseline, "baseline");
  route::validate_distribution(model_dist, "model");
  route::validate_distribution(reference, "reference");
  route::validate_distribution(vr_empirical, "vr_empirical");
  for (double a : {accuracies.teacher_on_basic, accuracies.student_standalone, accuracies.distilled})
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("accuracy outside [0, 1]");
  ComparisonReport r;
  r.baseline = baseline;
  r.model = model_dist;
  r.reference = reference;
  r.vr_empirical = vr_empirical;
  r.accuracies = accuracies;
  r.l1_baseline = l1_distance(baseline, reference);
  r.l1_model = l1_distance(model_dist, reference);
  r.l1_vr_empirical = l1_distance(vr_empirical, reference);
  return r;
}

std::string report_to_csv(const ComparisonReport& r) {
  std::string out = "exit,baseline,model,reference,vr_empirical\n";
  for (std::size_t e = 0; e < kNumExits; ++e) {
    out += std::to_string(e + 1) + ',' + format_double(r.baseline[e]) + ',' + format_double(r.model[e]) +
           ',' + format_double(r.reference[e]) + ',' + format_double(r.vr_empirical[e]) + '\n';
  }
  out += "\nmetric,value\n";
  auto metric = [&out](const char* name, double v) {
    out += name;
    out += ',';
    out += format_double(v);
    out += '\n';
  };
  metric("accuracy_teacher_on_basic", r.accuracies.teacher_on_basic);
  metric("accuracy_student_standalone", r.accuracies.student_standalone);
  metric("accuracy_distilled", r.accuracies.distilled);
  metric("l1_baseline_to_reference", r.l1_baseline);
  metric("l1_model_to_reference", r.l1_model);
  metric("l1_vr_empirical_to_reference", r.l1_vr_empirical);
  return out;
}

ComparisonReport report_from_csv(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::string current;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(current);
        current.clear();
      } else if (c != '\r') {
        current.push_back(c);
      }
    }
    if (!current.empty()) lines.push_back(current);
  }
  auto cells = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  auto number = [](const std::string& s, std::size_t line_no) {
    double v = 0.0;
    if (!parse_double(s, v)) throw ParseError("report line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
  };

  if (lines.size() < 1 + kNumExits + 2 || lines[0] != "exit,baseline,model,reference,vr_empirical")
    throw ParseError("report: missing probability table");
  ComparisonReport r;
  for (std::size_t e = 0; e < kNumExits; ++e) {
    const auto c = cells(lines[1 + e]);
    if (c.size() != 5 || c[0] != std::to_string(e + 1))
      throw ParseError("report line " + std::to_string(e + 2) + ": malformed exit row");
    r.baseline[e] = number(c[1], e + 2);
    r.model[e] = number(c[2], e + 2);
    r.reference[e] = number(c[3], e + 2);
    r.vr_empirical[e] = number(c[4], e + 2);
  }
  std::size_t i = 1 + kNumExits;
  if (!lines[i].empty() || lines[i + 1] != "metric,value") throw ParseError("report: missing metric table");
  std::size_t seen = 0;
  for (i += 2; i < lines.size(); ++i) {
    const auto c = cells(lines[i]);
    if (c.size() != 2) throw ParseError("report line " + std::to_string(i + 1) + ": malformed metric row");
    const double v = number(c[1], i + 1);
    if (c[0] == "accuracy_teacher_on_basic") r.accuracies.teacher_on_basic = v;
    else if (c[0] == "accuracy_student_standalone") r.accuracies.student_standalone = v;
    else if (c[0] == "accuracy_distilled") r.accuracies.distilled = v;
    else if (c[0] == "l1_baseline_to_reference") r.l1_baseline = v;
    else if (c[0] == "l1_model_to_reference") r.l1_model = v;
    else if (c[0] == "l1_vr_empirical_to_reference") r.l1_vr_empirical = v;
    else throw ParseError("report: unknown metric '" + c[0] + "'");
    ++seen;
  }
  if (seen != 6) throw ParseError("report: expected 6 metrics, found " + std::to_string(seen));
  return r;
}

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string report_to_svg(const ComparisonReport& r) {
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 70;
  constexpr double kPlotW = kWidth - kLeft - kRight;
  constexpr double kPlotH = kHeight - kTop - kBottom;
  const std::array<const ExitProbabilities*, 4> series{&r.baseline, &r.model, &r.reference, &r.vr_empirical};
  const std::array<const char*, 4> names{"Baseline", "Distilled model", "Reference", "VR data"};
  const std::array<const char*, 4> colors{"#4c72b0", "#55a868", "#c44e52", "#8172b2"};

  double y_max = 0.0;
  for (const auto* s : series)
    for (double v : *s) y_max = std::max(y_max, v);
  y_max = std::max(0.1, std::ceil(y_max * 10.0) / 10.0);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << "Probability of leaving at each exit</text>\n";

  for (int tick = 0; tick <= 5; ++tick) {
    const double v = y_max * tick / 5.0;
    const double y = kTop + kPlotH - kPlotH * v / y_max;
    svg << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(y) << "\" x2=\"" << fixed(kLeft + kPlotW)
        << "\" y2=\"" << fixed(y) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">"
        << fixed(v) << "</text>\n";
  }

  const double group_w = kPlotW / kNumExits;
  const double bar_w = group_w * 0.8 / series.size();
  for (std::size_t e = 0; e < kNumExits; ++e) {
    const double gx = kLeft + group_w * e + group_w * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = (*series[s])[e];
      const double h = kPlotH * v / y_max;
      svg << "<rect x=\"" << fixed(gx + bar_w * s) << "\" y=\"" << fixed(kTop + kPlotH - h) << "\" width=\""
          << fixed(bar_w) << "\" height=\"" << fixed(h) << "\" fill=\"" << colors[s] << "\"><title>"
          << names[s] << ", exit " << e + 1 << ": " << fixed(v, 4) << "</title></rect>\n";
    }
    svg << "<text x=\"" << fixed(kLeft + group_w * (e + 0.5)) << "\" y=\"" << fixed(kTop + kPlotH + 18)
        << "\" text-anchor=\"middle\">Exit " << e + 1 << "</text>\n";
  }
  svg << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + kPlotH) << "\" x2=\"" << fixed(kLeft + kPlotW)
      << "\" y2=\"" << fixed(kTop + kPlotH) << "\" stroke=\"black\"/>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const double lx = kLeft + 150.0 * s;
    const double ly = kHeight - 24;
    svg << "<rect x=\"" << fixed(lx) << "\" y=\"" << fixed(ly - 10) << "\" width=\"12\" height=\"12\" fill=\""
        << colors[s] << "\"/>\n";
    svg << "<text x=\"" << fixed(lx + 16) << "\" y=\"" << fixed(ly) << "\">" << names[s] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void save_report(const ComparisonReport& report, const std::filesystem::path& csv_path,
                 const std::filesystem::path& svg_path) {
  write_text_file(csv_path, report_to_csv(report));
  write_text_file(svg_path, report_to_svg(report));
}

}  // namespace routekd::eval
