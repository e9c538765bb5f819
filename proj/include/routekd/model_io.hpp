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

#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "routekd/nn.hpp"

namespace routekd::nn {

/// Current version of the model JSON document.
inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON document: architecture list, flat parameter arrays,
/// batch-norm running statistics and input standardization. Doubles are
/// written in shortest round-trip form, so load(save(m)) is bit-exact.
nlohmann::json model_to_json(const Mlp& model);
Mlp model_from_json(const nlohmann::json& doc);

nlohmann::json architecture_to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& doc);

void save_model(const Mlp& model, const std::filesystem::path& path);
Mlp load_model(const std::filesystem::path& path);

}  // namespace routekd::nn
