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

// Sequential encoder stack and its structural mirror used as decoder.
//
// An architecture is a list of stage descriptors for the encoder only; the
// decoder is derived by reversing the list, swapping each convolution's
// channel direction, replacing GDN with inverse GDN and max pooling with
// upsampling. Both halves carry their own parameters.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "perceptlab/activation_map.hpp"
#include "perceptlab/error.hpp"
#include "perceptlab/layers.hpp"

namespace perceptlab {

enum class StageKind { conv, gdn, igdn, maxpool2, upsample2 };

inline const char* to_string(StageKind k) {
  switch (k) {
    case StageKind::conv: return "conv";
    case StageKind::gdn: return "gdn";
    case StageKind::igdn: return "igdn";
    case StageKind::maxpool2: return "maxpool2";
    case StageKind::upsample2: return "upsample2";
  }
  return "?";
}

inline StageKind stage_kind_from_string(const std::string& s) {
  if (s == "conv") return StageKind::conv;
  if (s == "gdn") return StageKind::gdn;
  if (s == "igdn") return StageKind::igdn;
  if (s == "maxpool2") return StageKind::maxpool2;
  if (s == "upsample2") return StageKind::upsample2;
  throw ConfigError("unknown stage type '" + s + "'");
}

/// Parameter-free description of one stage.
struct StageDescriptor {
  StageKind kind = StageKind::conv;
  std::string name;
  int in_channels = 0;   // conv
  int out_channels = 0;  // conv
  int kernel_size = 1;   // conv
  int channels = 0;      // gdn / igdn

  bool operator==(const StageDescriptor&) const = default;
};

struct Architecture {
  std::vector<StageDescriptor> encoder;
  double alpha = 2.0;
  double epsilon = 0.5;

  bool operator==(const Architecture&) const = default;

  int pooling_stages() const {
    int n = 0;
    for (const auto& s : encoder) n += s.kind == StageKind::maxpool2;
    return n;
  }
};

/// Retina-to-V1 staging: luminance GDN, 1x1 opponent conv, pool, GDN,
/// 5x5 conv, pool, GDN, 5x5 conv to 128 V1-like channels, final GDN.
inline Architecture perceptnet_architecture() {
  Architecture a;
  a.encoder = {
      {StageKind::gdn, "gdn1", 0, 0, 1, 3},
      {StageKind::conv, "conv1", 3, 3, 1, 0},
      {StageKind::maxpool2, "pool1"},
      {StageKind::gdn, "gdn2", 0, 0, 1, 3},
      {StageKind::conv, "conv2", 3, 6, 5, 0},
      {StageKind::maxpool2, "pool2"},
      {StageKind::gdn, "gdn3", 0, 0, 1, 6},
      {StageKind::conv, "conv3", 6, 128, 5, 0},
      {StageKind::gdn, "gdn4", 0, 0, 1, 128},
  };
  return a;
}

/// Decoder staging: reversed encoder with maxpool2 -> upsample2,
/// gdn -> igdn and conv channel directions swapped.
inline std::vector<StageDescriptor> mirror(const std::vector<StageDescriptor>& encoder) {
  std::vector<StageDescriptor> out;
  out.reserve(encoder.size());
  for (auto it = encoder.rbegin(); it != encoder.rend(); ++it) {
    StageDescriptor d = *it;
    switch (d.kind) {
      case StageKind::conv:
        std::swap(d.in_channels, d.out_channels);
        break;
      case StageKind::gdn:
        d.kind = StageKind::igdn;
        d.name = "i" + d.name;
        break;
      case StageKind::maxpool2:
        d.kind = StageKind::upsample2;
        d.name = d.name.starts_with("pool") ? "up" + d.name.substr(4) : "up_" + d.name;
        break;
      default:
        throw ConfigError("encoder may only contain conv, gdn and maxpool2 stages");
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline void validate_architecture(const Architecture& a) {
  if (a.encoder.empty()) throw ConfigError("architecture has no stages");
  if (!(a.alpha > 0.0) || !(a.epsilon > 0.0)) throw ConfigError("alpha and epsilon must be positive");
  int channels = 3;
  std::vector<std::string> names;
  for (const auto& s : a.encoder) {
    if (s.name.empty()) throw ConfigError("stage without a name");
    for (const auto& n : names) {
      if (n == s.name) throw ConfigError("duplicate stage name '" + s.name + "'");
    }
    names.push_back(s.name);
    switch (s.kind) {
      case StageKind::conv:
        if (s.in_channels != channels) {
          throw ConfigError(s.name + ": expects " + std::to_string(s.in_channels) +
                            " input channels, previous stage yields " + std::to_string(channels));
        }
        if (s.out_channels <= 0 || s.kernel_size <= 0 || s.kernel_size % 2 == 0) {
          throw ConfigError(s.name + ": invalid conv geometry");
        }
        channels = s.out_channels;
        break;
      case StageKind::gdn:
        if (s.channels != channels) {
          throw ConfigError(s.name + ": expects " + std::to_string(s.channels) +
                            " channels, previous stage yields " + std::to_string(channels));
        }
        break;
      case StageKind::maxpool2:
        break;
      default:
        throw ConfigError(s.name + ": encoder may only contain conv, gdn and maxpool2 stages");
    }
  }
}

// ---------------------------------------------------------------------------
// Parameterized stacks
// ---------------------------------------------------------------------------

struct Gdn {
  GDNParams params;
};
struct InverseGdn {
  GDNParams params;
};
struct MaxPool2 {};
struct Upsample2 {};

using Layer = std::variant<ConvLayerSpec, Gdn, InverseGdn, MaxPool2, Upsample2>;

struct Stage {
  std::string id;
  Layer layer;
};

/// Ordered stages plus the ids whose outputs are recorded.
struct StackConfig {
  std::vector<Stage> stages;
  std::vector<std::string> tap_names;

  /// Taps every stage.
  void tap_all() {
    tap_names.clear();
    for (const auto& s : stages) tap_names.push_back(s.id);
  }
};

using EncoderConfig = StackConfig;
using DecoderConfig = StackConfig;

/// Ordered layer_id -> activation map.
struct LayerTrace {
  std::vector<std::pair<std::string, ActivationMap>> entries;

  std::size_t size() const noexcept { return entries.size(); }
  const ActivationMap& at(const std::string& id) const {
    for (const auto& [k, v] : entries) {
      if (k == id) return v;
    }
    throw ConfigError("no tap named '" + id + "'");
  }
  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.first);
    return out;
  }
};

/// Per-stage gradient buffers, parallel to StackConfig::stages.
using LayerGradient = std::variant<std::monostate, ConvGradient, GDNGradient>;
using StackGradient = std::vector<LayerGradient>;

inline StackGradient zero_gradient(const StackConfig& cfg) {
  StackGradient g;
  g.reserve(cfg.stages.size());
  for (const auto& s : cfg.stages) {
    if (const auto* c = std::get_if<ConvLayerSpec>(&s.layer)) {
      g.emplace_back(ConvGradient(*c));
    } else if (const auto* n = std::get_if<Gdn>(&s.layer)) {
      g.emplace_back(GDNGradient(n->params.channels()));
    } else if (const auto* n = std::get_if<InverseGdn>(&s.layer)) {
      g.emplace_back(GDNGradient(n->params.channels()));
    } else {
      g.emplace_back(std::monostate{});
    }
  }
  return g;
}

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

/// Re-throws a library error with the stage id prepended, keeping its type.
template <class F>
decltype(auto) with_stage_context(const std::string& id, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(id + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(id + ": " + e.what());
  } catch (const TrainingError& e) {
    throw TrainingError(id + ": " + e.what());
  }
}

inline ActivationMap apply_stage(const Stage& s, const ActivationMap& x) {
  return with_stage_context(s.id, [&] {
    return std::visit(overloaded{
                          [&](const ConvLayerSpec& c) { return conv2d(x, c); },
                          [&](const Gdn& g) { return gdn_forward(x, g.params); },
                          [&](const InverseGdn& g) { return igdn_forward(x, g.params); },
                          [&](const MaxPool2&) { return maxpool2(x); },
                          [&](const Upsample2&) { return upsample2(x); },
                      },
                      s.layer);
  });
}

inline ActivationMap backprop_stage(const Stage& s, const ActivationMap& x,
                                    const ActivationMap& dy, LayerGradient& grad) {
  return std::visit(overloaded{
                        [&](const ConvLayerSpec& c) {
                          return conv2d_backward(x, c, dy, std::get<ConvGradient>(grad));
                        },
                        [&](const Gdn& g) {
                          return gdn_backward(x, g.params, dy, std::get<GDNGradient>(grad));
                        },
                        [&](const InverseGdn& g) {
                          return igdn_backward(x, g.params, dy, std::get<GDNGradient>(grad));
                        },
                        [&](const MaxPool2&) { return maxpool2_backward(x, dy); },
                        [&](const Upsample2&) { return upsample2_backward(x, dy); },
                    },
                    s.layer);
}

inline void check_taps(const StackConfig& cfg) {
  std::size_t next = 0;
  for (const auto& tap : cfg.tap_names) {
    while (next < cfg.stages.size() && cfg.stages[next].id != tap) ++next;
    if (next == cfg.stages.size()) {
      throw ConfigError("tap '" + tap + "' does not name a stage (or is out of order)");
    }
    ++next;
  }
}

}  // namespace detail

/// Runs every stage in order. Records tapped outputs in `trace` and stage
/// inputs in `tape` (for backward) when those are provided.
inline ActivationMap stack_forward(const StackConfig& cfg, const ActivationMap& x,
                                   LayerTrace* trace = nullptr,
                                   std::vector<ActivationMap>* tape = nullptr) {
  detail::check_taps(cfg);
  if (tape) tape->clear();
  std::size_t next_tap = 0;
  ActivationMap cur = x;
  for (const auto& s : cfg.stages) {
    ActivationMap out = detail::apply_stage(s, cur);
    if (!out.all_finite()) throw InputError(s.id + ": non-finite activation");
    if (tape) tape->push_back(std::move(cur));
    if (trace && next_tap < cfg.tap_names.size() && cfg.tap_names[next_tap] == s.id) {
      trace->entries.emplace_back(s.id, out);
      ++next_tap;
    }
    cur = std::move(out);
  }
  return cur;
}

/// Back-propagates dy through the stack using the recorded stage inputs.
/// Accumulates parameter gradients into `grad` and returns dL/dx.
inline ActivationMap stack_backward(const StackConfig& cfg, const std::vector<ActivationMap>& tape,
                                    ActivationMap dy, StackGradient& grad) {
  if (tape.size() != cfg.stages.size() || grad.size() != cfg.stages.size()) {
    throw ConfigError("backward: tape or gradient does not match stage list");
  }
  for (std::size_t i = cfg.stages.size(); i-- > 0;) {
    const Stage& s = cfg.stages[i];
    dy = detail::with_stage_context(s.id,
                                    [&] { return detail::backprop_stage(s, tape[i], dy, grad[i]); });
    if (!dy.all_finite()) throw TrainingError(s.id + ": non-finite gradient");
  }
  return dy;
}

struct EncoderOutput {
  ActivationMap latent;
  LayerTrace trace;
};

inline void check_image(const ActivationMap& img) {
  if (img.channels() != 3) {
    throw InputError("encoder input must have 3 channels, got " + std::to_string(img.channels()));
  }
  for (double v : img.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("encoder input values must lie in [0,1]");
  }
}

inline EncoderOutput encoder_forward(const ActivationMap& img, const EncoderConfig& cfg) {
  check_image(img);
  if (cfg.tap_names.empty() || cfg.stages.empty() ||
      cfg.tap_names.back() != cfg.stages.back().id) {
    throw ConfigError("encoder must tap its final stage");
  }
  EncoderOutput out;
  out.latent = stack_forward(cfg, img, &out.trace);
  return out;
}

/// Decodes a latent. When `output_shape` is given the result is cropped to
/// it (pooling of odd extents makes the raw output slightly larger).
inline ActivationMap decoder_forward(const ActivationMap& latent, const DecoderConfig& cfg,
                                     std::optional<Shape> output_shape = std::nullopt,
                                     LayerTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Named view of one learnable tensor.
struct ParamRef {
  std::string name;
  std::span<double> values;
};

struct ModelGradient {
  StackGradient encoder;
  StackGradient decoder;

  void zero() {
    for (auto* stack : {&encoder, &decoder}) {
      for (auto& g : *stack) {
        std::visit(detail::overloaded{
                       [](std::monostate&) {},
                       [](ConvGradient& c) {
                         std::fill(c.weights.begin(), c.weights.end(), 0.0);
                         std::fill(c.bias.begin(), c.bias.end(), 0.0);
                       },
                       [](GDNGradient& n) {
                         std::fill(n.beta.begin(), n.beta.end(), 0.0);
                         std::fill(n.gamma.begin(), n.gamma.end(), 0.0);
                       },
                   },
                   g);
      }
    }
  }

  /// Spans in the same order as Model::parameters().
  std::vector<std::span<double>> slots() {
    std::vector<std::span<double>> out;
    for (auto* stack : {&encoder, &decoder}) {
      for (auto& g : *stack) {
        if (auto* c = std::get_if<ConvGradient>(&g)) {
          out.emplace_back(c->weights);
          out.emplace_back(c->bias);
        } else if (auto* n = std::get_if<GDNGradient>(&g)) {
          out.emplace_back(n->beta);
          out.emplace_back(n->gamma);
        }
      }
    }
    return out;
  }
};

/// Everything recorded by one forward pass through the autoencoder.
struct ForwardPass {
  ActivationMap input;
  ActivationMap latent;
  ActivationMap output;  // cropped to input shape
  Shape raw_output_shape;
  std::vector<ActivationMap> encoder_tape;
  std::vector<ActivationMap> decoder_tape;
};

class Model {
 public:
  Model() = default;

  /// Builds encoder and mirrored decoder with the default initialization:
  /// conv weights ~ U(+-1/sqrt(fan_in)), zero bias, beta = 1, gamma = gamma0.
  static Model build(const Architecture& arch, std::uint64_t seed, double gamma0 = 1e-3) {
    validate_architecture(arch);
    Model m;
    m.arch_ = arch;
    std::mt19937_64 rng(seed);
    auto make_stack = [&](const std::vector<StageDescriptor>& descs, const char* prefix) {
      StackConfig cfg;
      for (const auto& d : descs) {
        Stage s{std::string(prefix) + d.name, MaxPool2{}};
        switch (d.kind) {
          case StageKind::conv: {
            ConvLayerSpec c = ConvLayerSpec::make(d.in_channels, d.out_channels, d.kernel_size);
            const double bound = 1.0 / std::sqrt(static_cast<double>(d.in_channels) *
                                                 d.kernel_size * d.kernel_size);
            std::uniform_real_distribution<double> u(-bound, bound);
            for (double& w : c.weights) w = u(rng);
            s.layer = std::move(c);
            break;
          }
          case StageKind::gdn:
            s.layer = Gdn{GDNParams::uniform(d.channels, gamma0, arch.alpha, arch.epsilon)};
            break;
          case StageKind::igdn:
            s.layer = InverseGdn{GDNParams::uniform(d.channels, gamma0, arch.alpha, arch.epsilon)};
            break;
          case StageKind::maxpool2:
            s.layer = MaxPool2{};
            break;
          case StageKind::upsample2:
            s.layer = Upsample2{};
            break;
        }
        cfg.stages.push_back(std::move(s));
      }
      cfg.tap_all();
      return cfg;
    };
    m.encoder_ = make_stack(arch.encoder, "enc.");
    m.decoder_ = make_stack(mirror(arch.encoder), "dec.");
    return m;
  }

  const Architecture& architecture() const noexcept { return arch_; }
  const EncoderConfig& encoder() const noexcept { return encoder_; }
  const DecoderConfig& decoder() const noexcept { return decoder_; }
  EncoderConfig& encoder() noexcept { return encoder_; }
  DecoderConfig& decoder() noexcept { return decoder_; }

  /// Full forward pass with tapes for backward.
  ForwardPass forward(const ActivationMap& img) const {
    check_image(img);
    ForwardPass pass;
    pass.input = img;
    pass.latent = stack_forward(encoder_, img, nullptr, &pass.encoder_tape);
    ActivationMap raw = stack_forward(decoder_, pass.latent, nullptr, &pass.decoder_tape);
    pass.raw_output_shape = raw.shape();
    pass.output = crop(raw, img.shape());
    return pass;
  }

  /// Reconstruction only.
  ActivationMap reconstruct(const ActivationMap& img) const {
    return decoder_forward(encoder_forward(img, encoder_).latent, decoder_, img.shape());
  }

  /// Encoder taps followed by decoder taps, in forward order.
  LayerTrace trace(const ActivationMap& img) const {
    EncoderOutput enc = encoder_forward(img, encoder_);
    LayerTrace dec;
    decoder_forward(enc.latent, decoder_, std::nullopt, &dec);
    for (auto& e : dec.entries) enc.trace.entries.push_back(std::move(e));
    return std::move(enc.trace);
  }

  std::vector<std::string> layer_ids() const {
    std::vector<std::string> ids = encoder_.tap_names;
    ids.insert(ids.end(), decoder_.tap_names.begin(), decoder_.tap_names.end());
    return ids;
  }

  ModelGradient zero_gradient() const {
    return {perceptlab::zero_gradient(encoder_), perceptlab::zero_gradient(decoder_)};
  }

  /// Accumulates parameter gradients of a loss with dL/d(output) = d_output
  /// and optional dL/d(latent) = d_latent. Returns dL/d(input).
  ActivationMap backward(const ForwardPass& pass, const ActivationMap& d_output,
                         const ActivationMap* d_latent, ModelGradient& grad) const {
    require_same_shape(d_output, pass.output, "model backward");
    ActivationMap d_raw = uncrop(d_output, pass.raw_output_shape);
    ActivationMap dz = stack_backward(decoder_, pass.decoder_tape, std::move(d_raw), grad.decoder);
    if (d_latent) {
      require_same_shape(*d_latent, dz, "latent gradient");
      auto a = dz.data();
      auto b = d_latent->data();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
    return stack_backward(encoder_, pass.encoder_tape, std::move(dz), grad.encoder);
  }

  /// Learnable tensors: per conv stage weights then bias, per (i)GDN stage
  /// beta then gamma; encoder first.
  std::vector<ParamRef> parameters() {
    std::vector<ParamRef> out;
    for (auto* stack : {&encoder_, &decoder_}) {
      for (auto& s : stack->stages) {
        if (auto* c = std::get_if<ConvLayerSpec>(&s.layer)) {
          out.push_back({s.id + ".weights", c->weights});
          out.push_back({s.id + ".bias", c->bias});
        } else if (auto* g = std::get_if<Gdn>(&s.layer)) {
          out.push_back({s.id + ".beta", g->params.beta});
          out.push_back({s.id + ".gamma", g->params.gamma});
        } else if (auto* g = std::get_if<InverseGdn>(&s.layer)) {
          out.push_back({s.id + ".beta", g->params.beta});
          out.push_back({s.id + ".gamma", g->params.gamma});
        }
      }
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.values.size();
    return n;
  }

  /// beta >= 1e-6, gamma >= 0 on every (i)GDN stage.
  void project_constraints() {
    for (auto* stack : {&encoder_, &decoder_}) {
      for (auto& s : stack->stages) {
        if (auto* g = std::get_if<Gdn>(&s.layer)) g->params.project();
        if (auto* g = std::get_if<InverseGdn>(&s.layer)) g->params.project();
      }
    }
  }

  bool constraints_hold() const {
    for (const auto* stack : {&encoder_, &decoder_}) {
      for (const auto& s : stack->stages) {
        const GDNParams* p = nullptr;
        if (const auto* g = std::get_if<Gdn>(&s.layer)) p = &g->params;
        if (const auto* g = std::get_if<InverseGdn>(&s.layer)) p = &g->params;
        if (!p) continue;
        for (double b : p->beta) {
          if (!(b >= kBetaMin)) return false;
        }
        for (double v : p->gamma) {
          if (!(v >= 0.0)) return false;
        }
      }
    }
    return true;
  }

  static ActivationMap crop(const ActivationMap& x, const Shape& to) {
    if (x.shape() == to) return x;
    if (x.channels() != to.channels || x.height() < to.height || x.width() < to.width) {
      throw ConfigError("decoder output " + to_string(x.shape()) + " cannot be cropped to " +
                        to_string(to));
    }
    ActivationMap y(to);
    for (int c = 0; c < to.channels; ++c) {
      for (int r = 0; r < to.height; ++r) {
        for (int q = 0; q < to.width; ++q) y(c, r, q) = x(c, r, q);
      }
    }
    return y;
  }

  static ActivationMap uncrop(const ActivationMap& dy, const Shape& to) {
    if (dy.shape() == to) return dy;
    ActivationMap y(to);
    for (int c = 0; c < dy.channels(); ++c) {
      for (int r = 0; r < dy.height(); ++r) {
        for (int q = 0; q < dy.width(); ++q) y(c, r, q) = dy(c, r, q);
      }
    }
    return y;
  }

 private:
  Architecture arch_;
  EncoderConfig encoder_;
  DecoderConfig decoder_;
};

inline ActivationMap decoder_forward(const ActivationMap& latent, const DecoderConfig& cfg,
                                     std::optional<Shape> output_shape, LayerTrace* trace) {
  ActivationMap out = stack_forward(cfg, latent, trace);
  if (output_shape) return Model::crop(out, *output_shape);
  return out;
}

}  // namespace perceptlab
