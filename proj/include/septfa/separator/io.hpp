// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "septfa/nn/checkpoint.hpp"
#include "septfa/separator/model.hpp"

namespace septfa {

inline nlohmann::json to_json(const SeparatorConfig& c) {
  return {{"speakers", c.speakers},
          {"bottleneck", c.bottleneck},
          {"hidden", c.hidden},
          {"repeats", c.repeats},
          {"blocks", c.blocks},
          {"kernel", c.kernel},
          {"bins", c.bins},
          {"attention_reduction", c.attention_reduction},
          {"fusion", c.fusion == AttentionFusion::kProduct ? "product" : "sum"},
          {"variant", to_string(c.variant)},
          {"vad_from_logits", c.vad_from_logits},
          {"vad_filters", c.vad_filters},
          {"vad_kernel", c.vad_kernel},
          {"norm_eps", c.norm_eps}};
}

// Missing keys keep their defaults.
inline SeparatorConfig separator_config_from_json(const nlohmann::json& j) {
  SeparatorConfig c;
  try {
    c.speakers = j.value("speakers", c.speakers);
    c.bottleneck = j.value("bottleneck", c.bottleneck);
    c.hidden = j.value("hidden", c.hidden);
    c.repeats = j.value("repeats", c.repeats);
    c.blocks = j.value("blocks", c.blocks);
    c.kernel = j.value("kernel", c.kernel);
    c.bins = j.value("bins", c.bins);
    c.attention_reduction = j.value("attention_reduction", c.attention_reduction);
    const std::string fusion = j.value("fusion", std::string("product"));
    if (fusion != "product" && fusion != "sum") throw ConfigError("unknown attention fusion: " + fusion);
    c.fusion = fusion == "product" ? AttentionFusion::kProduct : AttentionFusion::kSum;
    c.variant = parse_variant(j.value("variant", std::string("plain")));
    c.vad_from_logits = j.value("vad_from_logits", c.vad_from_logits);
    c.vad_filters = j.value("vad_filters", c.vad_filters);
    c.vad_kernel = j.value("vad_kernel", c.vad_kernel);
    c.norm_eps = j.value("norm_eps", c.norm_eps);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const StftConfig& c) {
  return {{"fft_size", c.fft_size}, {"hop", c.hop}, {"window_length", c.window_length}, {"window", "hamming"}};
}

inline StftConfig stft_config_from_json(const nlohmann::json& j) {
  StftConfig c;
  c.fft_size = j.value("fft_size", c.fft_size);
  c.hop = j.value("hop", c.hop);
  c.window_length = j.value("window_length", c.window_length);
  if (j.value("window", std::string("hamming")) != "hamming") throw ConfigError("only the Hamming window is supported");
  c.validate();
  return c;
}

/// Model config echo stored in checkpoints.
inline nlohmann::json model_config_json(const Separator& m, int sample_rate) {
  return {{"separator", to_json(m.config())}, {"stft", to_json(m.stft_config())}, {"sample_rate", sample_rate}};
}

struct LoadedModel {
  std::unique_ptr<Separator> model;
  int sample_rate = 16000;
  nn::CheckpointData data;
};

inline LoadedModel load_model(const std::string& manifest_path) {
  LoadedModel out;
  out.data = nn::read_checkpoint(manifest_path);
  const auto& cfg = out.data.config;
  SeparatorConfig sc = separator_config_from_json(cfg.at("separator"));
  StftConfig st = stft_config_from_json(cfg.at("stft"));
  out.sample_rate = cfg.value("sample_rate", 16000);
  out.model = std::make_unique<Separator>(sc, 0, st);
  std::size_t model_scalars = 0;
  for (const auto& t : out.data.tensors) {
    if (t.name.find('/') == std::string::npos) model_scalars += t.values.size();
  }
  if (model_scalars != param_census(sc)) {
    throw ConfigError(manifest_path + ": parameter census " + std::to_string(model_scalars) + " does not match config (" +
                      std::to_string(param_census(sc)) + ")");
  }
  nn::load_params(out.data, out.model->params());
  return out;
}

inline void save_model(const std::string& manifest_path, const Separator& m, int sample_rate,
                       nlohmann::json extra = nullptr, std::vector<nn::StoredTensor> more = {}) {
  nn::CheckpointData d;
  d.config = model_config_json(m, sample_rate);
  d.extra = std::move(extra);
  nn::append_params(d, m.params());
  for (auto& t : more) d.tensors.push_back(std::move(t));
  nn::write_checkpoint(manifest_path, d);
}

}  // namespace septfa
