// Copyright (c) 2026 The infercal Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <string>
#include <vector>

#include "infercal/toymodel.hpp"
#include "json.hpp"

namespace infercal {

namespace {

constexpr const char* kFormatTag = "infercal-toymodel";
constexpr int kFormatVersion = 1;

// Content tokens only; the three reserved symbols are implicit.
std::vector<std::string> content_tokens(const Vocabulary& v) {
  return {v.id_to_surface.begin() + 3, v.id_to_surface.end()};
}

}  // namespace

void save_checkpoint(const ToyModel& model, const std::string& path,
                     const std::string& manifest_id) {
  const ModelConfig& c = model.config();
  nlohmann::json j;
  j["format"] = kFormatTag;
  j["version"] = kFormatVersion;
  if (!manifest_id.empty()) j["manifest"] = manifest_id;
  j["model"] = {
      {"vocab_size_src", c.vocab_size_src}, {"vocab_size_tgt", c.vocab_size_tgt},
      {"embed_dim", c.embed_dim},           {"hidden_dim", c.hidden_dim},
      {"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers},
      {"attention_heads", c.attention_heads}, {"dropout_rate", c.dropout_rate},
      {"max_len", c.max_len},
  };
  j["source_tokens"] = content_tokens(model.source_vocab());
  j["target_tokens"] = content_tokens(model.target_vocab());
  j["parameters"] = std::vector<double>(
      model.parameters().data(), model.parameters().data() + model.parameters().size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write checkpoint '" + path + "'");
  out << j.dump(1) << '\n';
  if (!out.good()) throw UsageError("failed while writing checkpoint '" + path + "'");
}

ToyModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    if (j.value("format", std::string()) != kFormatTag) {
      throw UsageError("not a model checkpoint (missing format tag)");
    }
    const int version = j.at("version").get<int>();
    if (version != kFormatVersion) {
      throw UsageError("unsupported checkpoint version " + std::to_string(version));
    }
    const nlohmann::json& m = j.at("model");
    ModelConfig cfg;
    cfg.vocab_size_src = m.at("vocab_size_src").get<int>();
    cfg.vocab_size_tgt = m.at("vocab_size_tgt").get<int>();
    cfg.embed_dim = m.at("embed_dim").get<int>();
    cfg.hidden_dim = m.at("hidden_dim").get<int>();
    cfg.encoder_layers = m.at("encoder_layers").get<int>();
    cfg.decoder_layers = m.at("decoder_layers").get<int>();
    cfg.attention_heads = m.at("attention_heads").get<int>();
    cfg.dropout_rate = m.at("dropout_rate").get<double>();
    cfg.max_len = m.at("max_len").get<int>();

    Vocabulary src = Vocabulary::from_tokens(j.at("source_tokens").get<std::vector<std::string>>());
    Vocabulary tgt = Vocabulary::from_tokens(j.at("target_tokens").get<std::vector<std::string>>());
    ToyModel model(cfg, std::move(src), std::move(tgt));

    const std::vector<double> params = j.at("parameters").get<std::vector<double>>();
    if (params.size() != model.parameter_count()) {
      throw UsageError("parameter vector has " + std::to_string(params.size()) +
                       " entries, model needs " + std::to_string(model.parameter_count()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      model.parameters()[static_cast<Eigen::Index>(i)] = params[i];
    }
    return model;
  } catch (const UsageError& e) {
    throw UsageError("checkpoint '" + path + "': " + e.what());
  } catch (const std::exception& e) {
    throw UsageError("checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace infercal
