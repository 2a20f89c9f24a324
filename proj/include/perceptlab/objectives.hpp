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

#pragma once

#include <cmath>
#include <string>

#include "perceptlab/activation_map.hpp"
#include "perceptlab/distortions.hpp"
#include "perceptlab/error.hpp"

namespace perceptlab {

enum class Objective { reconstruction, denoising, deblurring, sparsity };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::reconstruction: return "reconstruction";
    case Objective::denoising: return "denoising";
    case Objective::deblurring: return "deblurring";
    case Objective::sparsity: return "sparsity";
  }
  return "?";
}

inline Objective objective_from_string(const std::string& s) {
  if (s == "reconstruction") return Objective::reconstruction;
  if (s == "denoising") return Objective::denoising;
  if (s == "deblurring") return Objective::deblurring;
  if (s == "sparsity") return Objective::sparsity;
  throw ArgumentError("unknown objective '" + s +
                      "' (expected reconstruction, denoising, deblurring or sparsity)");
}

/// Corruption an objective trains against.
inline DistortionKind implied_distortion(Objective o) {
  switch (o) {
    case Objective::denoising: return DistortionKind::noise;
    case Objective::deblurring: return DistortionKind::blur;
    default: return DistortionKind::none;
  }
}

struct LossSpec {
  Objective objective = Objective::reconstruction;
  double lambda = 0.0;

  bool operator==(const LossSpec&) const = default;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be >= 0");
    if (lambda > 0.0 && objective != Objective::sparsity) {
      throw ArgumentError("lambda is only meaningful for the sparsity objective");
    }
  }
};

/// Mean over all elements of (pred - target)^2.
inline double mse_loss(const ActivationMap& pred, const ActivationMap& target) {
  require_same_shape(pred, target, "mse_loss");
  auto p = pred.data();
  auto t = target.data();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return s / static_cast<double>(p.size());
}

inline ActivationMap mse_gradient(const ActivationMap& pred, const ActivationMap& target,
                                  double scale = 1.0) {
  require_same_shape(pred, target, "mse_gradient");
  ActivationMap g(pred.shape());
  auto p = pred.data();
  auto t = target.data();
  auto d = g.data();
  const double k = 2.0 * scale / static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) d[i] = k * (p[i] - t[i]);
  return g;
}

/// Mean absolute activation.
inline double sparsity_penalty(const ActivationMap& latent) {
  double s = 0.0;
  for (double v : latent.data()) s += std::abs(v);
  return s / static_cast<double>(latent.size());
}

/// Subgradient of scale * mean|latent|, sign(0) taken as 0.
inline ActivationMap sparsity_gradient(const ActivationMap& latent, double scale = 1.0) {
  ActivationMap g(latent.shape());
  auto l = latent.data();
  auto d = g.data();
  const double k = scale / static_cast<double>(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) d[i] = l[i] > 0.0 ? k : (l[i] < 0.0 ? -k : 0.0);
  return g;
}

/// MSE against the clean target, plus lambda * mean|latent| for sparsity.
inline double total_loss(const ActivationMap& pred, const ActivationMap& clean_target,
                         const ActivationMap& latent, const LossSpec& spec) {
  spec.validate();
  const double mse = mse_loss(pred, clean_target);
  if (spec.objective == Objective::sparsity) return mse + spec.lambda * sparsity_penalty(latent);
  return mse;
}

}  // namespace perceptlab
