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
#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "perceptlab/error.hpp"

namespace perceptlab {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels) * height * width;
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  auto operator<=>(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

/// Dense channels x height x width array of activations, channel-major.
/// Each channel plane is stored row-major, so the whole buffer can be viewed
/// as a (channels, height*width) row-major matrix.
class ActivationMap {
 public:
  ActivationMap() = default;
  ActivationMap(int channels, int height, int width, double fill = 0.0)
      : ActivationMap(Shape{channels, height, width}, fill) {}
  explicit ActivationMap(Shape shape, double fill = 0.0) : shape_(shape) {
    if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) {
      throw ConfigError("activation map dimensions must be positive, got " +
                        perceptlab::to_string(shape));
    }
    data_.assign(shape.size(), fill);
  }

  const Shape& shape() const noexcept { return shape_; }
  int channels() const noexcept { return shape_.channels; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }
  double operator()(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> channel(int c) noexcept {
    return std::span<double>(data_).subspan(c * shape_.plane(), shape_.plane());
  }
  std::span<const double> channel(int c) const noexcept {
    return std::span<const double>(data_).subspan(c * shape_.plane(), shape_.plane());
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double l2_norm() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  friend bool operator==(const ActivationMap&, const ActivationMap&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const ActivationMap& a, const ActivationMap& b,
                               const char* what) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(what) + ": shape mismatch " + to_string(a.shape()) +
                      " vs " + to_string(b.shape()));
  }
}

inline double max_abs_diff(const ActivationMap& a, const ActivationMap& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) m = std::max(m, std::abs(da[i] - db[i]));
  return m;
}

}  // namespace perceptlab
