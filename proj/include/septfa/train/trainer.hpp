// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "septfa/core/parallel.hpp"
#include "septfa/core/rng.hpp"
#include "septfa/separator/io.hpp"
#include "septfa/separator/model.hpp"
#include "septfa/train/objectives.hpp"
#include "septfa/train/optimizer.hpp"
#include "septfa/vad/vad.hpp"

namespace septfa {

/// One utterance with everything the objective needs, precomputed.
struct TrainingExample {
  std::string id;
  Waveform mixture;
  std::vector<Waveform> refs;
  VadLabels labels;
  std::shared_ptr<const Spectrogram> spec;
  FeatureGrid log_spec;
  std::vector<std::shared_ptr<const std::vector<Real>>> ref_ptrs;
  std::vector<double> input_si_sdr;  // si_sdr(ref_i, mixture)
};

inline TrainingExample prepare_example(std::string id, Waveform mixture, std::vector<Waveform> refs,
                                       VadLabels labels, const StftConfig& stft_cfg) {
  TrainingExample ex;
  ex.id = std::move(id);
  for (const auto& r : refs) {
    if (r.size() != mixture.size()) throw DimensionError(ex.id + ": reference length differs from mixture");
  }
  ex.spec = std::make_shared<const Spectrogram>(stft(mixture, stft_cfg));
  ex.log_spec = log_spectrum(*ex.spec);
  if (labels.frames != ex.spec->frames || labels.speakers != static_cast<int>(refs.size())) {
    throw DimensionError(ex.id + ": label grid does not match the STFT frames");
  }
  for (const auto& r : refs) {
    ex.ref_ptrs.push_back(std::make_shared<const std::vector<Real>>(r.samples));
    ex.input_si_sdr.push_back(si_sdr(r, mixture));
  }
  ex.mixture = std::move(mixture);
  ex.refs = std::move(refs);
  ex.labels = std::move(labels);
  return ex;
}

/// Hop-aligned crop of `len` samples starting at `start`.
inline TrainingExample crop_example(const TrainingExample& ex, std::size_t start, std::size_t len,
                                    const StftConfig& cfg) {
  auto cut = [&](const Waveform& w) {
    return Waveform(std::vector<Real>(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                      w.samples.begin() + static_cast<std::ptrdiff_t>(start + len)),
                    w.sample_rate);
  };
  const int first = static_cast<int>(start / cfg.hop);
  const int frames = cfg.frames_for(len);
  VadLabels lab(ex.labels.speakers, frames);
  for (int i = 0; i < lab.speakers; ++i) {
    for (int l = 0; l < frames; ++l) lab.at(i, l) = ex.labels.at(i, std::min(first + l, ex.labels.frames - 1));
  }
  std::vector<Waveform> refs;
  for (const auto& r : ex.refs) refs.push_back(cut(r));
  return prepare_example(ex.id, cut(ex.mixture), std::move(refs), std::move(lab), cfg);
}

struct ExampleEval {
  LossReport report;
  std::vector<double> si_sdri;  // per estimate
  bool has_vad = false;
  VadMetrics vad;
};

/// Forward (and, with `sink`, backward scaled by `grad_scale`) for one utterance.
inline ExampleEval evaluate_example(const Separator& model, const TrainingExample& ex, double lambda_vad,
                                    nn::GradBuffer* sink, double grad_scale = 1.0) {
  nn::Tape t;
  const bool with_vad = lambda_vad != 0.0;
  SeparatorGraph g = model.forward(t, ex.log_spec, with_vad);
  std::vector<nn::Var> ests;
  for (int i = 0; i < model.config().speakers; ++i) ests.push_back(nn::masked_istft(g.masks, i, ex.spec));
  JointLoss jl = joint_loss(ests, ex.ref_ptrs, g.vad_probs, &ex.labels, lambda_vad);
  ExampleEval out;
  out.report = jl.report;
  const auto& perm = jl.report.chosen_permutation;
  for (std::size_t i = 0; i < ests.size(); ++i) {
    out.si_sdri.push_back(jl.report.si_sdr_per_speaker[i] - ex.input_si_sdr[perm[i]]);
  }
  if (with_vad) {
    out.has_vad = true;
    out.vad = vad_metrics(hard_decision(vad_probs_from_tensor(g.vad_probs.value())), permute_rows(ex.labels, perm));
  }
  if (sink) t.backward(grad_scale == 1.0 ? jl.total : nn::scale(jl.total, grad_scale), *sink);
  return out;
}

struct TrainSchedule {
  long steps = 1000;
  int batch_size = 16;
  double lambda_vad = 0.1;
  AdamConfig adam;
  std::uint64_t seed = 0;
  double crop_seconds = 0.0;  // 0: whole utterances
  int threads = 0;            // 0: hardware concurrency
};

struct StepLog {
  long step = 0;
  long epoch = 0;
  double loss = 0.0;
  double si_sdri = 0.0;
  double vad_accuracy = std::numeric_limits<double>::quiet_NaN();
  double lambda_vad = 0.0;
  double lr = 0.0;
  double grad_norm_preclip = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"step", step},     {"epoch", epoch},     {"loss", loss},
                     {"si_sdri", si_sdri}, {"lambda_vad", lambda_vad}, {"lr", lr},
                     {"grad_norm_preclip", grad_norm_preclip}};
    j["vad_acc"] = std::isnan(vad_accuracy) ? nlohmann::json(nullptr) : nlohmann::json(vad_accuracy);
    return j;
  }
};

class Trainer {
 public:
  Trainer(Separator& model, std::vector<TrainingExample> data, TrainSchedule schedule)
      : model_(model), data_(std::move(data)), schedule_(schedule), adam_(model.params(), schedule.adam),
        rng_(schedule.seed) {
    if (data_.empty()) throw ConfigError("trainer: empty training set");
    if (schedule_.batch_size < 1) throw ConfigError("trainer: batch size must be >= 1");
    order_.resize(data_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    shuffle(order_, rng_);
  }

  long steps_done() const { return adam_.state().step; }
  long epoch() const { return epoch_; }
  const TrainSchedule& schedule() const { return schedule_; }
  const Adam& optimizer() const { return adam_; }

  StepLog step() {
    std::vector<TrainingExample> cropped;
    std::vector<const TrainingExample*> batch;
    const std::size_t crop = static_cast<std::size_t>(schedule_.crop_seconds * data_[0].mixture.sample_rate);
    for (int b = 0; b < schedule_.batch_size; ++b) {
      if (cursor_ >= order_.size()) {
        cursor_ = 0;
        ++epoch_;
        shuffle(order_, rng_);
      }
      batch.push_back(&data_[order_[cursor_++]]);
    }
    if (crop > 0) {
      cropped.reserve(batch.size());
      const StftConfig& cfg = model_.stft_config();
      for (auto*& ex : batch) {
        if (ex->mixture.size() <= crop) continue;
        const std::size_t slots = (ex->mixture.size() - crop) / cfg.hop + 1;
        const std::size_t start = rng_.index(slots) * cfg.hop;
        cropped.push_back(crop_example(*ex, start, crop, cfg));
        ex = &cropped.back();
      }
    }
    const std::size_t n = batch.size();
    std::vector<nn::GradBuffer> grads(n);
    std::vector<ExampleEval> evals(n);
    const double scale = 1.0 / static_cast<double>(n);
    auto work = [&](std::size_t i) {
      grads[i] = model_.params().zero_grads();
      evals[i] = evaluate_example(model_, *batch[i], schedule_.lambda_vad, &grads[i], scale);
    };
    parallel_for(n, schedule_.threads, work);
    nn::GradBuffer total = model_.params().zero_grads();
    for (const auto& g : grads) nn::accumulate(total, g);  // fixed order: thread-count independent

    StepLog log;
    log.grad_norm_preclip = clip_gradients(total, schedule_.adam.clip_norm, &model_.params());
    adam_.step(model_.params(), total);
    log.step = adam_.state().step;
    log.epoch = epoch_;
    log.lambda_vad = schedule_.lambda_vad;
    log.lr = schedule_.adam.learning_rate;
    double vad_correct = 0.0, vad_total = 0.0;
    for (const auto& e : evals) {
      log.loss += e.report.total * scale;
      for (double d : e.si_sdri) log.si_sdri += d * scale / static_cast<double>(e.si_sdri.size());
      if (e.has_vad) {
        vad_correct += static_cast<double>(e.vad.tp + e.vad.tn);
        vad_total += static_cast<double>(e.vad.tp + e.vad.tn + e.vad.fp + e.vad.fn);
      }
    }
    if (vad_total > 0) log.vad_accuracy = vad_correct / vad_total;
    return log;
  }

  /// Model weights plus exact optimizer/sampler state.
  void save_checkpoint(const std::string& path, int sample_rate) const {
    std::ostringstream rng_state;
    rng_state << rng_.engine();
    nlohmann::json extra{{"step", adam_.state().step},
                         {"epoch", epoch_},
                         {"cursor", cursor_},
                         {"order", order_},
                         {"rng", rng_state.str()},
                         {"lambda_vad", schedule_.lambda_vad},
                         {"learning_rate", schedule_.adam.learning_rate}};
    std::vector<nn::StoredTensor> more;
    const auto& ps = model_.params();
    for (std::size_t i = 0; i < ps.count(); ++i) {
      const auto& e = ps.entry(static_cast<int>(i));
      more.push_back({"master/" + e.name, e.shape, "float64", e.values});
      more.push_back({"adam.m/" + e.name, e.shape, "float64", adam_.state().m[i]});
      more.push_back({"adam.v/" + e.name, e.shape, "float64", adam_.state().v[i]});
    }
    save_model(path, model_, sample_rate, extra, std::move(more));
  }

  void resume(const nn::CheckpointData& data) {
    if (!data.extra.contains("step")) throw ConfigError("checkpoint carries no training state");
    auto& ps = model_.params();
    nn::load_params(data, ps, "master/");
    auto& st = adam_.state();
    for (std::size_t i = 0; i < ps.count(); ++i) {
      const auto& name = ps.entry(static_cast<int>(i)).name;
      const auto* m = data.find("adam.m/" + name);
      const auto* v = data.find("adam.v/" + name);
      if (!m || !v) throw ConfigError("checkpoint is missing optimizer state for " + name);
      st.m[i] = m->values;
      st.v[i] = v->values;
    }
    st.step = data.extra.at("step");
    epoch_ = data.extra.at("epoch");
    cursor_ = data.extra.at("cursor");
    order_ = data.extra.at("order").get<std::vector<int>>();
    if (order_.size() != data_.size()) throw ConfigError("checkpoint was trained on a different dataset size");
    std::istringstream is(data.extra.at("rng").get<std::string>());
    is >> rng_.engine();
  }

 private:
  Separator& model_;
  std::vector<TrainingExample> data_;
  TrainSchedule schedule_;
  Adam adam_;
  Rng rng_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  long epoch_ = 0;
};

}  // namespace septfa
