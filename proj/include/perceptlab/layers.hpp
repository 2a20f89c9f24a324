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

// Differentiable building blocks: 2-D convolution, (inverse) generalized
// divisive normalization, 2x2 max pooling and nearest-neighbour upsampling.
// Every layer exposes a pure forward function and a backward function that
// accumulates parameter gradients into a caller-owned buffer.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "perceptlab/activation_map.hpp"
#include "perceptlab/error.hpp"

namespace perceptlab {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

/// View of an activation map as a (channels, height*width) matrix.
inline MatrixView as_matrix(ActivationMap& a) {
  return MatrixView(a.data().data(), a.channels(), static_cast<Eigen::Index>(a.shape().plane()));
}
inline ConstMatrixView as_matrix(const ActivationMap& a) {
  return ConstMatrixView(a.data().data(), a.channels(),
                         static_cast<Eigen::Index>(a.shape().plane()));
}

// ---------------------------------------------------------------------------
// Generalized divisive normalization
// ---------------------------------------------------------------------------

/// Lower bound on beta and on the normalization pool before exponentiation.
inline constexpr double kBetaMin = 1e-6;

/// Parameters of y_i = x_i * (beta_i + sum_j gamma_ij |x_j|^alpha)^(-epsilon)
/// and of its multiplicative inverse. The coupling is across channels only,
/// pointwise in space. gamma is stored row-major (gamma[i * C + j]).
struct GDNParams {
  std::vector<double> beta;
  std::vector<double> gamma;
  double alpha = 2.0;
  double epsilon = 0.5;

  int channels() const noexcept { return static_cast<int>(beta.size()); }
  double& coupling(int i, int j) { return gamma[static_cast<std::size_t>(i) * beta.size() + j]; }
  double coupling(int i, int j) const {
    return gamma[static_cast<std::size_t>(i) * beta.size() + j];
  }

  /// beta = 1, gamma = gamma0 everywhere.
  static GDNParams uniform(int channels, double gamma0 = 0.0, double alpha = 2.0,
                           double epsilon = 0.5) {
    GDNParams p;
    p.beta.assign(static_cast<std::size_t>(channels), 1.0);
    p.gamma.assign(static_cast<std::size_t>(channels) * channels, gamma0);
    p.alpha = alpha;
    p.epsilon = epsilon;
    return p;
  }

  void validate() const {
    if (beta.empty()) throw ConfigError("GDN: beta must be non-empty");
    if (gamma.size() != beta.size() * beta.size()) {
      throw ConfigError("GDN: gamma must be " + std::to_string(beta.size()) + "x" +
                        std::to_string(beta.size()));
    }
    for (double b : beta) {
      if (!(b >= kBetaMin)) throw ConfigError("GDN: beta below 1e-6 or not finite");
    }
    for (double g : gamma) {
      if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("GDN: gamma must be >= 0");
    }
    if (!(alpha > 0.0) || !(epsilon > 0.0)) {
      throw ConfigError("GDN: alpha and epsilon must be positive");
    }
  }

  /// Clamp beta >= 1e-6 and gamma >= 0 in place.
  void project() noexcept {
    for (double& b : beta) b = std::max(b, kBetaMin);
    for (double& g : gamma) g = std::max(g, 0.0);
  }
};

struct GDNGradient {
  std::vector<double> beta;
  std::vector<double> gamma;

  explicit GDNGradient(int channels = 0)
      : beta(static_cast<std::size_t>(channels), 0.0),
        gamma(static_cast<std::size_t>(channels) * channels, 0.0) {}
};

namespace detail {

inline void check_gdn_inputs(const ActivationMap& x, const GDNParams& p) {
  p.validate();
  if (x.channels() != p.channels()) {
    throw ConfigError("GDN: input has " + std::to_string(x.channels()) +
                      " channels, parameters expect " + std::to_string(p.channels()));
  }
  if (!x.all_finite()) throw InputError("GDN: non-finite input");
}

/// Normalization pool D = max(beta + gamma |x|^alpha, floor) as (C, P).
inline RowMatrix gdn_pool(const ActivationMap& x, const GDNParams& p) {
  const int c = p.channels();
  ConstMatrixView xm = as_matrix(x);
  ConstMatrixView gamma(p.gamma.data(), c, c);
  Eigen::Map<const Eigen::VectorXd> beta(p.beta.data(), c);
  RowMatrix powered = p.alpha == 2.0 ? RowMatrix(xm.array().square())
                                     : RowMatrix(xm.array().abs().pow(p.alpha));
  RowMatrix pool = gamma * powered;
  pool.colwise() += beta;
  return pool.cwiseMax(kBetaMin);
}

/// Shared forward for GDN (exponent = -epsilon) and inverse GDN (+epsilon).
inline ActivationMap gdn_apply(const ActivationMap& x, const GDNParams& p, double exponent) {
  check_gdn_inputs(x, p);
  RowMatrix pool = gdn_pool(x, p);
  ActivationMap y(x.shape());
  MatrixView ym = as_matrix(y);
  if (exponent == -0.5) {
    ym = as_matrix(x).array() * pool.array().rsqrt();
  } else if (exponent == 0.5) {
    ym = as_matrix(x).array() * pool.array().sqrt();
  } else {
    ym = as_matrix(x).array() * pool.array().pow(exponent);
  }
  return y;
}

inline ActivationMap gdn_apply_backward(const ActivationMap& x, const GDNParams& p,
                                        double exponent, const ActivationMap& dy,
                                        GDNGradient& grad) {
  require_same_shape(x, dy, "GDN backward");
  const int c = p.channels();
  const auto plane = static_cast<Eigen::Index>(x.shape().plane());
  ConstMatrixView xm = as_matrix(x);
  ConstMatrixView dym = as_matrix(dy);
  ConstMatrixView gamma(p.gamma.data(), c, c);

  RowMatrix powered = p.alpha == 2.0 ? RowMatrix(xm.array().square())
                                     : RowMatrix(xm.array().abs().pow(p.alpha));
  RowMatrix raw = gamma * powered;
  raw.colwise() += Eigen::Map<const Eigen::VectorXd>(p.beta.data(), c);
  RowMatrix pool = raw.cwiseMax(kBetaMin);

  // y = x * D^e  =>  dy/dD = e * x * D^(e-1); zero where the floor is active.
  RowMatrix scale = pool.array().pow(exponent);
  RowMatrix u = dym.array() * exponent * xm.array() * pool.array().pow(exponent - 1.0);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index k = 0; k < plane; ++k) {
      if (raw(i, k) < kBetaMin) u(i, k) = 0.0;
    }
  }

  // d|x|^alpha / dx = alpha |x|^(alpha-1) sign(x), taken as 0 at x = 0.
  RowMatrix dpow(c, plane);
  if (p.alpha == 2.0) {
    dpow = 2.0 * xm;
  } else {
    for (Eigen::Index i = 0; i < c; ++i) {
      for (Eigen::Index k = 0; k < plane; ++k) {
        const double v = xm(i, k);
        dpow(i, k) = v == 0.0 ? 0.0
                              : p.alpha * std::pow(std::abs(v), p.alpha - 1.0) *
                                    (v > 0.0 ? 1.0 : -1.0);
      }
    }
  }

  ActivationMap dx(x.shape());
  as_matrix(dx) = dym.array() * scale.array() +
                  (gamma.transpose() * u).array() * dpow.array();

  Eigen::Map<Eigen::VectorXd>(grad.beta.data(), c) += u.rowwise().sum();
  MatrixView(grad.gamma.data(), c, c) += u * powered.transpose();
  return dx;
}

}  // namespace detail

/// y_i = x_i / (beta_i + sum_j gamma_ij |x_j|^alpha)^epsilon, pointwise in space.
inline ActivationMap gdn_forward(const ActivationMap& x, const GDNParams& p) {
  return detail::gdn_apply(x, p, -p.epsilon);
}

/// y_i = x_i * (beta_i + sum_j gamma_ij |x_j|^alpha)^epsilon.
inline ActivationMap igdn_forward(const ActivationMap& x, const GDNParams& p) {
  return detail::gdn_apply(x, p, p.epsilon);
}

/// Returns dL/dx and accumulates dL/dbeta, dL/dgamma into grad.
inline ActivationMap gdn_backward(const ActivationMap& x, const GDNParams& p,
                                  const ActivationMap& dy, GDNGradient& grad) {
  return detail::gdn_apply_backward(x, p, -p.epsilon, dy, grad);
}

inline ActivationMap igdn_backward(const ActivationMap& x, const GDNParams& p,
                                   const ActivationMap& dy, GDNGradient& grad) {
  return detail::gdn_apply_backward(x, p, p.epsilon, dy, grad);
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Dense 2-D cross-correlation with zero padding. Weights are laid out
/// (out, in, k, k) row-major.
struct ConvLayerSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 1;
  int stride = 1;
  int padding = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_size * kernel_size;
  }
  double& weight(int o, int i, int ky, int kx) {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel_size + ky) *
                       kernel_size +
                   kx];
  }
  double weight(int o, int i, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel_size + ky) *
                       kernel_size +
                   kx];
  }

  int output_extent(int in) const noexcept {
    return (in + 2 * padding - kernel_size) / stride + 1;
  }

  /// Zero-initialized spec with "same" padding.
  static ConvLayerSpec make(int in, int out, int kernel, int stride = 1) {
    ConvLayerSpec s;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel_size = kernel;
    s.stride = stride;
    s.padding = kernel / 2;
    s.weights.assign(s.weight_count(), 0.0);
    s.bias.assign(static_cast<std::size_t>(out), 0.0);
    return s;
  }

  void validate() const {
    if (in_channels <= 0 || out_channels <= 0) throw ConfigError("conv: channel counts must be positive");
    if (kernel_size <= 0 || kernel_size % 2 == 0) throw ConfigError("conv: kernel size must be positive and odd");
    if (stride <= 0) throw ConfigError("conv: stride must be positive");
    if (padding < 0) throw ConfigError("conv: padding must be nonnegative");
    if (weights.size() != weight_count()) throw ConfigError("conv: weight tensor has wrong size");
    if (bias.size() != static_cast<std::size_t>(out_channels)) throw ConfigError("conv: bias has wrong size");
  }
};

struct ConvGradient {
  std::vector<double> weights;
  std::vector<double> bias;

  ConvGradient() = default;
  explicit ConvGradient(const ConvLayerSpec& s)
      : weights(s.weight_count(), 0.0), bias(static_cast<std::size_t>(s.out_channels), 0.0) {}
};

namespace detail {

inline Shape conv_output_shape(const Shape& in, const ConvLayerSpec& s) {
  Shape out{s.out_channels, s.output_extent(in.height), s.output_extent(in.width)};
  if (out.height <= 0 || out.width <= 0) {
    throw ConfigError("conv: input " + to_string(in) + " too small for kernel " +
                      std::to_string(s.kernel_size));
  }
  return out;
}

/// Unfold receptive fields into a (in*k*k, out_h*out_w) matrix.
inline RowMatrix im2col(const ActivationMap& x, const ConvLayerSpec& s, const Shape& out) {
  const int k = s.kernel_size;
  RowMatrix cols(static_cast<Eigen::Index>(s.in_channels) * k * k,
                 static_cast<Eigen::Index>(out.plane()));
  for (int c = 0; c < s.in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.row((c * k + ky) * k + kx).data();
        for (int oy = 0; oy < out.height; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          for (int ox = 0; ox < out.width; ++ox) {
            const int ix = ox * s.stride - s.padding + kx;
            row[oy * out.width + ox] =
                (iy >= 0 && iy < x.height() && ix >= 0 && ix < x.width()) ? x(c, iy, ix) : 0.0;
          }
        }
      }
    }
  }
  return cols;
}

inline void col2im(const RowMatrix& cols, const ConvLayerSpec& s, const Shape& out,
                   ActivationMap& dx) {
  const int k = s.kernel_size;
  for (int c = 0; c < s.in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols.row((c * k + ky) * k + kx).data();
        for (int oy = 0; oy < out.height; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          if (iy < 0 || iy >= dx.height()) continue;
          for (int ox = 0; ox < out.width; ++ox) {
            const int ix = ox * s.stride - s.padding + kx;
            if (ix >= 0 && ix < dx.width()) dx(c, iy, ix) += row[oy * out.width + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

inline ActivationMap conv2d(const ActivationMap& x, const ConvLayerSpec& spec) {
  spec.validate();
  if (x.channels() != spec.in_channels) {
    throw ConfigError("conv: input has " + std::to_string(x.channels()) +
                      " channels, layer expects " + std::to_string(spec.in_channels));
  }
  const Shape out_shape = detail::conv_output_shape(x.shape(), spec);
  const RowMatrix cols = detail::im2col(x, spec, out_shape);
  ConstMatrixView w(spec.weights.data(), spec.out_channels, cols.rows());
  ActivationMap y(out_shape);
  MatrixView ym = as_matrix(y);
  ym.noalias() = w * cols;
  ym.colwise() += Eigen::Map<const Eigen::VectorXd>(spec.bias.data(), spec.out_channels);
  return y;
}

inline ActivationMap conv2d_backward(const ActivationMap& x, const ConvLayerSpec& spec,
                                     const ActivationMap& dy, ConvGradient& grad) {
  const Shape out_shape = detail::conv_output_shape(x.shape(), spec);
  if (dy.shape() != out_shape) throw ConfigError("conv backward: gradient shape mismatch");
  const RowMatrix cols = detail::im2col(x, spec, out_shape);
  ConstMatrixView w(spec.weights.data(), spec.out_channels, cols.rows());
  ConstMatrixView dym = as_matrix(dy);
  MatrixView(grad.weights.data(), spec.out_channels, cols.rows()).noalias() +=
      dym * cols.transpose();
  Eigen::Map<Eigen::VectorXd>(grad.bias.data(), spec.out_channels) += dym.rowwise().sum();
  const RowMatrix dcols = w.transpose() * dym;
  ActivationMap dx(x.shape());
  detail::col2im(dcols, spec, out_shape, dx);
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling and upsampling
// ---------------------------------------------------------------------------

/// 2x2 max pooling, stride 2. Odd extents are replicate-padded to even, so
/// the output is ceil(h/2) x ceil(w/2).
inline ActivationMap maxpool2(const ActivationMap& x) {
  const int h = x.height();
  const int w = x.width();
  ActivationMap y(x.channels(), (h + 1) / 2, (w + 1) / 2);
  for (int c = 0; c < x.channels(); ++c) {
    for (int oy = 0; oy < y.height(); ++oy) {
      const int y0 = 2 * oy;
      const int y1 = std::min(2 * oy + 1, h - 1);
      for (int ox = 0; ox < y.width(); ++ox) {
        const int x0 = 2 * ox;
        const int x1 = std::min(2 * ox + 1, w - 1);
        y(c, oy, ox) = std::max(std::max(x(c, y0, x0), x(c, y0, x1)),
                                std::max(x(c, y1, x0), x(c, y1, x1)));
      }
    }
  }
  return y;
}

/// Routes each output gradient to the first maximal input of its window.
inline ActivationMap maxpool2_backward(const ActivationMap& x, const ActivationMap& dy) {
  const int h = x.height();
  const int w = x.width();
  if (dy.shape() != Shape{x.channels(), (h + 1) / 2, (w + 1) / 2}) {
    throw ConfigError("maxpool2 backward: gradient shape mismatch");
  }
  ActivationMap dx(x.shape());
  for (int c = 0; c < x.channels(); ++c) {
    for (int oy = 0; oy < dy.height(); ++oy) {
      const int ys[2] = {2 * oy, std::min(2 * oy + 1, h - 1)};
      for (int ox = 0; ox < dy.width(); ++ox) {
        const int xs[2] = {2 * ox, std::min(2 * ox + 1, w - 1)};
        int by = ys[0];
        int bx = xs[0];
        for (int a : ys) {
          for (int b : xs) {
            if (x(c, a, b) > x(c, by, bx)) {
              by = a;
              bx = b;
            }
          }
        }
        dx(c, by, bx) += dy(c, oy, ox);
      }
    }
  }
  return dx;
}

/// Nearest-neighbour 2x upsampling.
inline ActivationMap upsample2(const ActivationMap& x) {
  ActivationMap y(x.channels(), 2 * x.height(), 2 * x.width());
  for (int c = 0; c < y.channels(); ++c) {
    for (int oy = 0; oy < y.height(); ++oy) {
      for (int ox = 0; ox < y.width(); ++ox) y(c, oy, ox) = x(c, oy / 2, ox / 2);
    }
  }
  return y;
}

inline ActivationMap upsample2_backward(const ActivationMap& x, const ActivationMap& dy) {
  if (dy.shape() != Shape{x.channels(), 2 * x.height(), 2 * x.width()}) {
    throw ConfigError("upsample2 backward: gradient shape mismatch");
  }
  ActivationMap dx(x.shape());
  for (int c = 0; c < dy.channels(); ++c) {
    for (int oy = 0; oy < dy.height(); ++oy) {
      for (int ox = 0; ox < dy.width(); ++ox) dx(c, oy / 2, ox / 2) += dy(c, oy, ox);
    }
  }
  return dx;
}

}  // namespace perceptlab
