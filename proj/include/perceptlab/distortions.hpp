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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "perceptlab/activation_map.hpp"
#include "perceptlab/error.hpp"

namespace perceptlab {

enum class DistortionKind { none, noise, blur };

inline const char* to_string(DistortionKind k) {
  switch (k) {
    case DistortionKind::none: return "none";
    case DistortionKind::noise: return "noise";
    case DistortionKind::blur: return "blur";
  }
  return "?";
}

inline DistortionKind distortion_kind_from_string(const std::string& s) {
  if (s == "none") return DistortionKind::none;
  if (s == "noise") return DistortionKind::noise;
  if (s == "blur") return DistortionKind::blur;
  throw ArgumentError("unknown distortion kind '" + s + "' (expected none, noise or blur)");
}

/// Corruption applied to training inputs. sigma is the noise standard
/// deviation in [0,1] image units, or the blur kernel standard deviation in
/// pixels.
struct DistortionSpec {
  DistortionKind kind = DistortionKind::none;
  double sigma = 0.0;

  bool operator==(const DistortionSpec&) const = default;

  void validate() const {
    if (kind == DistortionKind::none) return;
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ArgumentError("sigma must be >= 0");
    if (kind == DistortionKind::blur && !(sigma > 0.0)) {
      throw ArgumentError("blur sigma must be > 0");
    }
  }
};

/// clip(img + n, 0, 1) with n ~ N(0, sigma^2) i.i.d.; fully determined by seed.
inline ActivationMap add_gaussian_noise(const ActivationMap& img, double sigma,
                                        std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ArgumentError("noise sigma must be >= 0");
  if (sigma == 0.0) return img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  ActivationMap out = img;
  for (double& v : out.data()) v = std::clamp(v + normal(rng), 0.0, 1.0);
  return out;
}

/// Square Gaussian kernel of side 2*ceil(3 sigma)+1, normalized to sum 1.
struct GaussianKernel {
  int radius = 0;
  std::vector<double> values;  // row-major, side x side

  int side() const noexcept { return 2 * radius + 1; }
  double at(int dy, int dx) const {
    return values[static_cast<std::size_t>(dy + radius) * side() + (dx + radius)];
  }
};

namespace detail {

inline int kernel_radius(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("blur sigma must be > 0");
  return static_cast<int>(std::ceil(3.0 * sigma));
}

/// Normalized 1-D profile; the 2-D kernel is its outer product.
inline std::vector<double> gaussian_profile(double sigma) {
  const int r = kernel_radius(sigma);
  std::vector<double> g(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    g[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += g[i + r];
  }
  for (double& v : g) v /= sum;
  return g;
}

}  // namespace detail

inline GaussianKernel gaussian_kernel(double sigma) {
  const int r = detail::kernel_radius(sigma);
  GaussianKernel k;
  k.radius = r;
  const int side = k.side();
  k.values.resize(static_cast<std::size_t>(side) * side);
  double sum = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k.values[static_cast<std::size_t>(dy + r) * side + (dx + r)] = v;
      sum += v;
    }
  }
  for (double& v : k.values) v /= sum;
  return k;
}

/// Channel-wise Gaussian blur with replicate borders, evaluated as two 1-D
/// passes.
inline ActivationMap gaussian_blur(const ActivationMap& img, double sigma) {
  const std::vector<double> g = detail::gaussian_profile(sigma);
  const int r = static_cast<int>(g.size() / 2);
  const int h = img.height();
  const int w = img.width();
  ActivationMap tmp(img.shape());
  ActivationMap out(img.shape());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += g[k + r] * img(c, y, std::clamp(x + k, 0, w - 1));
        tmp(c, y, x) = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += g[k + r] * tmp(c, std::clamp(y + k, 0, h - 1), x);
        out(c, y, x) = acc;
      }
    }
  }
  return out;
}

/// Applies the corruption; the seed is only consumed by noise.
inline ActivationMap apply_distortion(const ActivationMap& img, const DistortionSpec& spec,
                                      std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case DistortionKind::none: return img;
    case DistortionKind::noise: return add_gaussian_noise(img, spec.sigma, seed);
    case DistortionKind::blur: return gaussian_blur(img, spec.sigma);
  }
  return img;
}

}  // namespace perceptlab
