// Copyright 2026 The PerceptLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Joint optimization of encoder and decoder parameters.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "perceptlab/checkpoint.hpp"
#include "perceptlab/config.hpp"
#include "perceptlab/corpus.hpp"
#include "perceptlab/distortions.hpp"
#include "perceptlab/model.hpp"
#include "perceptlab/objectives.hpp"
#include "perceptlab/optimizer.hpp"
#include "perceptlab/util.hpp"

namespace perceptlab {

/// Corrupted inputs paired with their clean targets.
struct Batch {
  std::vector<ActivationMap> inputs;
  std::vector<ActivationMap> targets;
};

/// Corrupts clean patches per the config. Noise for sample i of step s is
/// drawn from a stream keyed on (seed, s, i).
inline Batch make_batch(std::vector<ActivationMap> clean, const TrainConfig& cfg, long long step) {
  Batch b;
  b.inputs.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    b.inputs.push_back(apply_distortion(clean[i], cfg.distortion,
                                        derive_seed(cfg.seed, static_cast<std::uint64_t>(step), i)));
  }
  b.targets = std::move(clean);
  return b;
}

/// Deterministic source of clean training batches: either fresh crops from
/// the corpus stream, or draws from a fixed pool of num_patches crops.
class BatchSource {
 public:
  explicit BatchSource(const TrainConfig& cfg)
      : stream_(cfg.corpus_path, cfg.patch_size, derive_seed(cfg.seed, 0xc0)),
        pick_rng_(derive_seed(cfg.seed, 0xba)),
        batch_size_(cfg.batch_size) {
    if (cfg.num_patches > 0) pool_ = stream_.take(static_cast<std::size_t>(cfg.num_patches));
  }

  std::vector<ActivationMap> next() {
    if (pool_.empty()) return stream_.take(static_cast<std::size_t>(batch_size_));
    std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
    std::vector<ActivationMap> out;
    for (int i = 0; i < batch_size_; ++i) out.push_back(pool_[pick(pick_rng_)]);
    return out;
  }

  const std::vector<ActivationMap>& pool() const noexcept { return pool_; }

 private:
  PatchStream stream_;
  std::mt19937_64 pick_rng_;
  int batch_size_;
  std::vector<ActivationMap> pool_;
};

/// Owns the model and optimizer state for one training run.
class Trainer {
 public:
  Trainer(Model model, const TrainConfig& cfg)
      : model_(std::move(model)), cfg_(cfg), adam_(cfg.learning_rate) {
    cfg_.objective.validate();
    grad_ = model_.zero_gradient();
  }

  const Model& model() const noexcept { return model_; }
  Model& model() noexcept { return model_; }

  /// One gradient step on the batch. Returns the batch-mean loss measured
  /// before the update. Constraint projection follows every update.
  double step(const Batch& batch) {
    if (batch.inputs.empty() || batch.inputs.size() != batch.targets.size()) {
      throw ArgumentError("batch must hold matching, non-empty inputs and targets");
    }
    grad_.zero();
    const double scale = 1.0 / static_cast<double>(batch.inputs.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
      ForwardPass pass;
      try {
        pass = model_.forward(batch.inputs[i]);
      } catch (const InputError& e) {
        throw TrainingError(std::string("forward pass failed: ") + e.what() + "\n" +
                            layer_norms(batch.inputs[i]));
      }
      const double li = total_loss(pass.output, batch.targets[i], pass.latent, cfg_.objective);
      if (!std::isfinite(li)) {
        throw TrainingError("non-finite loss\n" + layer_norms(batch.inputs[i]));
      }
      loss += scale * li;
      const ActivationMap d_out = mse_gradient(pass.output, batch.targets[i], scale);
      if (cfg_.objective.objective == Objective::sparsity && cfg_.objective.lambda > 0.0) {
        const ActivationMap d_lat = sparsity_gradient(pass.latent, scale * cfg_.objective.lambda);
        model_.backward(pass, d_out, &d_lat, grad_);
      } else {
        model_.backward(pass, d_out, nullptr, grad_);
      }
    }
    auto params = model_.parameters();
    auto slots = grad_.slots();
    for (std::size_t k = 0; k < slots.size(); ++k) {
      for (double g : slots[k]) {
        if (!std::isfinite(g)) throw TrainingError(params[k].name + ": non-finite gradient");
      }
    }
    adam_.step(params, slots);
    model_.project_constraints();
    return loss;
  }

  /// Per-layer activation norms for diagnostics.
  std::string layer_norms(const ActivationMap& input) const {
    std::ostringstream os;
    os << "layer norms:";
    try {
      const LayerTrace t = model_.trace(input);
      for (const auto& [id, a] : t.entries) os << "\n  " << id << ": " << a.l2_norm();
    } catch (const Error& e) {
      os << "\n  (trace failed: " << e.what() << ")";
    }
    return os.str();
  }

 private:
  Model model_;
  TrainConfig cfg_;
  Adam adam_;
  ModelGradient grad_;
};

/// Exponential moving average with span `window` (alpha = 2/(window+1)),
/// seeded with the first value.
inline std::vector<double> smoothed_losses(const std::vector<LossEntry>& history, int window) {
  std::vector<double> out;
  out.reserve(history.size());
  const double a = 2.0 / (window + 1.0);
  for (const auto& e : history) {
    out.push_back(out.empty() ? e.loss : a * e.loss + (1.0 - a) * out.back());
  }
  return out;
}

inline void write_loss_csv(const std::vector<LossEntry>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "step,loss\n";
  for (const auto& e : history) out << e.step << ',' << format_number(e.loss) << '\n';
}

struct TrainOptions {
  /// When set: model.ckpt every checkpoint_every steps and at the end, plus loss.csv.
  std::optional<std::filesystem::path> out_dir;
  /// Called after each step with (step, loss).
  std::function<void(long long, double)> on_step;
};

inline Checkpoint train(const TrainConfig& cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  Checkpoint ckpt;
  ckpt.config = cfg;
  BatchSource source(cfg);
  Trainer trainer(Model::build(cfg.architecture, derive_seed(cfg.seed, 0x1417), cfg.gamma_init),
                  cfg);

  const double ema_a = 2.0 / (cfg.smoothing_window + 1.0);
  std::vector<double> ema;
  auto snapshot = [&](long long step) {
    ckpt.model = trainer.model();
    ckpt.step = step;
    if (opts.out_dir) {
      save_checkpoint(ckpt, *opts.out_dir / "model.ckpt");
      write_loss_csv(ckpt.loss_history, *opts.out_dir / "loss.csv");
    }
  };

  for (long long s = 0; s < cfg.steps; ++s) {
    const Batch batch = make_batch(source.next(), cfg, s);
    const double loss = trainer.step(batch);
    ckpt.loss_history.push_back({s, loss});
    ema.push_back(ema.empty() ? loss : ema_a * loss + (1.0 - ema_a) * ema.back());
    if (opts.on_step) opts.on_step(s, loss);

    const long long done = s + 1;
    if (opts.out_dir && cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 &&
        done < cfg.steps) {
      snapshot(done);
    }
    const auto w = static_cast<std::size_t>(cfg.early_stop_window);
    if (w > 0 && ema.size() > w) {
      const double before = ema[ema.size() - 1 - w];
      if ((before - ema.back()) / before < cfg.early_stop_tolerance) break;
    }
  }
  snapshot(static_cast<long long>(ckpt.loss_history.size()));
  return ckpt;
}

}  // namespace perceptlab
