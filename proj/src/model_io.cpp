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

#include "routekd/model_io.hpp"

#include <fstream>

#include "routekd/errors.hpp"
#include "routekd/io_util.hpp"

namespace routekd::nn {

using nlohmann::json;

namespace {

std::vector<double> doubles(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw ParseError(std::string("model json: missing array '") + key + "'");
  std::vector<double> out;
  out.reserve(j.at(key).size());
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) throw ParseError(std::string("model json: non-numeric entry in '") + key + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

json architecture_to_json(const Architecture& arch) {
  json out = json::array();
  for (const LayerSpec& spec : arch) {
    json entry = {{"kind", layer_kind(spec)}};
    if (const auto* d = std::get_if<DenseSpec>(&spec)) entry["units"] = d->units;
    if (const auto* d = std::get_if<DropoutSpec>(&spec)) entry["rate"] = d->rate;
    out.push_back(std::move(entry));
  }
  return out;
}

Architecture architecture_from_json(const json& doc) {
  if (!doc.is_array()) throw ParseError("architecture must be a JSON array");
  Architecture arch;
  for (const auto& entry : doc) {
    const std::string kind = entry.value("kind", "");
    if (kind == "dense") {
      const auto units = entry.value("units", std::int64_t{0});
      if (units < 1) throw ValidationError("dense layer needs at least 1 unit");
      arch.emplace_back(DenseSpec{static_cast<std::size_t>(units)});
    } else if (kind == "dropout") {
      arch.emplace_back(DropoutSpec{entry.value("rate", 0.0)});
    } else if (kind == "batchnorm") {
      arch.emplace_back(BatchNormSpec{});
    } else if (kind == "relu") {
      arch.emplace_back(ReluSpec{});
    } else {
      throw ParseError("unknown layer kind '" + kind + "'");
    }
  }
  return arch;
}

json model_to_json(const Mlp& model) {
  json layers = json::array();
  for (const Layer& layer : model.layers()) {
    json entry;
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      entry = {{"kind", "dense"},
               {"rows", dense->weight.rows()},
               {"cols", dense->weight.cols()},
               {"weight", dense->weight.data()},
               {"bias", dense->bias}};
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      entry = {{"kind", "batchnorm"},       {"gamma", bn->gamma},
               {"beta", bn->beta},          {"running_mean", bn->running_mean},
               {"running_var", bn->running_var}, {"epsilon", bn->epsilon},
               {"momentum", bn->momentum}};
    } else if (const auto* drop = std::get_if<DropoutLayer>(&layer)) {
      entry = {{"kind", "dropout"}, {"rate", drop->rate}};
    } else {
      entry = {{"kind", "relu"}};
    }
    layers.push_back(std::move(entry));
  }
  return {{"format", "routekd-mlp"},
          {"version", kModelFormatVersion},
          {"input_dim", model.input_dim()},
          {"output_dim", model.output_dim()},
          {"architecture", architecture_to_json(model.architecture())},
          {"input_shift", model.input_shift()},
          {"input_scale", model.input_scale()},
          {"layers", std::move(layers)}};
}

Mlp model_from_json(const json& doc) {
  if (doc.value("format", "") != "routekd-mlp") throw ParseError("not a routekd-mlp document");
  const int version = doc.value("version", 0);
  if (version != kModelFormatVersion)
    throw ParseError("unsupported model format version " + std::to_string(version));

  const auto input_dim = doc.at("input_dim").get<std::size_t>();
  Architecture arch = architecture_from_json(doc.at("architecture"));
  const json& layer_docs = doc.at("layers");
  if (!layer_docs.is_array() || layer_docs.size() != arch.size())
    throw ParseError("model json: layer list does not match architecture");

  std::vector<Layer> layers;
  for (const json& entry : layer_docs) {
    const std::string kind = entry.value("kind", "");
    if (kind == "dense") {
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      DenseLayer l;
      l.weight = Matrix(rows, cols, doubles(entry, "weight"));
      l.bias = doubles(entry, "bias");
      layers.emplace_back(std::move(l));
    } else if (kind == "batchnorm") {
      BatchNormLayer l;
      l.gamma = doubles(entry, "gamma");
      l.beta = doubles(entry, "beta");
      l.running_mean = doubles(entry, "running_mean");
      l.running_var = doubles(entry, "running_var");
      l.epsilon = entry.at("epsilon").get<double>();
      l.momentum = entry.at("momentum").get<double>();
      layers.emplace_back(std::move(l));
    } else if (kind == "dropout") {
      layers.emplace_back(DropoutLayer{entry.at("rate").get<double>(), {}});
    } else if (kind == "relu") {
      layers.emplace_back(ReluLayer{});
    } else {
      throw ParseError("unknown layer kind '" + kind + "'");
    }
  }
  Mlp model = restore_mlp(input_dim, std::move(arch), std::move(layers), doubles(doc, "input_shift"),
                          doubles(doc, "input_scale"));
  if (model.output_dim() != doc.at("output_dim").get<std::size_t>())
    throw ShapeError("model json: output_dim does not match layers");
  return model;
}

void save_model(const Mlp& model, const std::filesystem::path& path) {
  write_text_file(path, model_to_json(model).dump(2) + "\n");
}

Mlp load_model(const std::filesystem::path& path) {
  return model_from_json(parse_json_file(path));
}

}  // namespace routekd::nn
