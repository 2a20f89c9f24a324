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

#include <gtest/gtest.h>

#include <Eigen/QR>

#include <random>
#include <string>

#include "perceptlab/model.hpp"
#include "perceptlab/objectives.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace pl = perceptlab;
using pl::testing::identity_model;
using pl::testing::random_map;

namespace {

pl::ActivationMap random_image(int h, int w, std::mt19937_64& rng) {
  return random_map({3, h, w}, rng, 0.0, 1.0);
}

}  // namespace

TEST(Architecture, DefaultStagingAndMirror) {
  const auto arch = pl::perceptnet_architecture();
  const auto m = pl::Model::build(arch, 1);
  EXPECT_EQ(m.encoder().stages.size(), 9u);
  EXPECT_EQ(m.encoder().tap_names.size(), m.encoder().stages.size());
  EXPECT_EQ(arch.pooling_stages(), 2);

  const auto dec = pl::mirror(arch.encoder);
  ASSERT_EQ(dec.size(), arch.encoder.size());
  for (std::size_t i = 0; i < dec.size(); ++i) {
    const auto& e = arch.encoder[arch.encoder.size() - 1 - i];
    switch (e.kind) {
      case pl::StageKind::gdn:
        EXPECT_EQ(dec[i].kind, pl::StageKind::igdn);
        EXPECT_EQ(dec[i].channels, e.channels);
        break;
      case pl::StageKind::maxpool2:
        EXPECT_EQ(dec[i].kind, pl::StageKind::upsample2);
        break;
      case pl::StageKind::conv:
        EXPECT_EQ(dec[i].kind, pl::StageKind::conv);
        EXPECT_EQ(dec[i].in_channels, e.out_channels);
        EXPECT_EQ(dec[i].out_channels, e.in_channels);
        EXPECT_EQ(dec[i].kernel_size, e.kernel_size);
        break;
      default:
        FAIL();
    }
  }
  EXPECT_EQ(m.layer_ids().front(), "enc.gdn1");
  EXPECT_EQ(m.encoder().tap_names.back(), "enc.gdn4");
  EXPECT_EQ(m.layer_ids().back(), "dec.igdn1");
}

TEST(Architecture, InitializationFollowsDefaults) {
  auto m = pl::Model::build(pl::perceptnet_architecture(), 3);
  for (const auto& s : m.encoder().stages) {
    if (const auto* c = std::get_if<pl::ConvLayerSpec>(&s.layer)) {
      const double bound = 1.0 / std::sqrt(double(c->in_channels * c->kernel_size * c->kernel_size));
      for (double w : c->weights) EXPECT_LE(std::abs(w), bound);
      for (double b : c->bias) EXPECT_EQ(b, 0.0);
    } else if (const auto* g = std::get_if<pl::Gdn>(&s.layer)) {
      for (double b : g->params.beta) EXPECT_EQ(b, 1.0);
      for (double v : g->params.gamma) EXPECT_EQ(v, 1e-3);
    }
  }
  EXPECT_TRUE(m.constraints_hold());
}

TEST(Architecture, RejectsInconsistentStaging) {
  auto a = pl::perceptnet_architecture();
  a.encoder[3].channels = 4;
  EXPECT_THROW(pl::validate_architecture(a), pl::ConfigError);
  a = pl::perceptnet_architecture();
  a.encoder[1].name = "gdn1";
  EXPECT_THROW(pl::validate_architecture(a), pl::ConfigError);
}

TEST(Encoder, IdentityConfigurationReturnsImage) {
  std::mt19937_64 rng(1);
  const auto img = random_image(12, 10, rng);
  const auto m = identity_model();
  const auto out = pl::encoder_forward(img, m.encoder());
  EXPECT_EQ(out.latent, img);
  EXPECT_EQ(out.trace.keys(), m.encoder().tap_names);
  EXPECT_EQ(out.trace.entries.back().second, out.latent);
  EXPECT_EQ(pl::decoder_forward(out.latent, m.decoder()), out.latent);
}

TEST(Encoder, DeterministicAcrossRuns) {
  std::mt19937_64 rng(2);
  const auto img = random_image(32, 32, rng);
  const auto a = pl::Model::build(pl::perceptnet_architecture(), 42);
  const auto b = pl::Model::build(pl::perceptnet_architecture(), 42);
  const auto la = pl::encoder_forward(img, a.encoder());
  const auto lb = pl::encoder_forward(img, b.encoder());
  EXPECT_EQ(la.latent, lb.latent);
  EXPECT_EQ(la.trace.size(), 9u);
  EXPECT_EQ(la.latent.shape(), (pl::Shape{128, 8, 8}));
}

TEST(Encoder, ValidatesImage) {
  const auto m = pl::Model::build(pl::perceptnet_architecture(), 1);
  EXPECT_THROW(pl::encoder_forward(pl::ActivationMap(1, 16, 16, 0.5), m.encoder()), pl::InputError);
  EXPECT_THROW(pl::encoder_forward(pl::ActivationMap(3, 16, 16, 1.5), m.encoder()), pl::InputError);
}

TEST(Encoder, ErrorsCarryStageId) {
  pl::StackConfig cfg;
  cfg.stages.push_back({"enc.bad", pl::ConvLayerSpec::make(4, 2, 1)});
  cfg.tap_all();
  try {
    pl::encoder_forward(pl::ActivationMap(3, 4, 4, 0.5), cfg);
    FAIL() << "expected ConfigError";
  } catch (const pl::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("enc.bad"), std::string::npos);
  }
}

TEST(Autoencoder, ShapeClosure) {
  std::mt19937_64 rng(3);
  const auto m = pl::Model::build(pl::perceptnet_architecture(), 5);
  for (int side : {16, 32, 64, 96}) {
    const auto img = random_image(side, side, rng);
    EXPECT_EQ(m.reconstruct(img).shape(), img.shape()) << side;
  }
  // Odd extents are padded by pooling and cropped back.
  const auto odd = random_image(30, 21, rng);
  EXPECT_EQ(m.reconstruct(odd).shape(), odd.shape());
  EXPECT_EQ(m.forward(odd).output.shape(), odd.shape());
}

TEST(Autoencoder, OrthogonalPairsRoundTrip) {
  std::mt19937_64 rng(4);
  pl::Architecture a;
  a.encoder = {{pl::StageKind::gdn, "gdn1", 0, 0, 1, 3},
               {pl::StageKind::conv, "conv1", 3, 3, 1, 0},
               {pl::StageKind::gdn, "gdn2", 0, 0, 1, 3},
               {pl::StageKind::conv, "conv2", 3, 3, 1, 0},
               {pl::StageKind::gdn, "gdn3", 0, 0, 1, 3}};
  pl::Model m = pl::Model::build(a, 9, 0.0);
  std::uniform_real_distribution<double> beta(0.5, 3.0);
  // Orthogonal Q for each encoder conv; the mirrored decoder conv gets Q^T.
  std::map<std::string, Eigen::Matrix3d> q;
  for (auto& s : m.encoder().stages) {
    if (auto* c = std::get_if<pl::ConvLayerSpec>(&s.layer)) {
      Eigen::Matrix3d r;
      std::normal_distribution<double> n;
      for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = n(rng);
      const Eigen::Matrix3d Q = Eigen::HouseholderQR<Eigen::Matrix3d>(r).householderQ();
      q[s.id.substr(4)] = Q;
      for (int o = 0; o < 3; ++o) {
        for (int i = 0; i < 3; ++i) c->weight(o, i, 0, 0) = Q(o, i);
      }
    } else if (auto* g = std::get_if<pl::Gdn>(&s.layer)) {
      for (double& b : g->params.beta) b = beta(rng);
      const auto name = "i" + s.id.substr(4);
      for (auto& d : m.decoder().stages) {
        if (d.id == "dec." + name) std::get<pl::InverseGdn>(d.layer).params.beta = g->params.beta;
      }
    }
  }
  for (auto& s : m.decoder().stages) {
    if (auto* c = std::get_if<pl::ConvLayerSpec>(&s.layer)) {
      const Eigen::Matrix3d& Q = q.at(s.id.substr(4));
      for (int o = 0; o < 3; ++o) {
        for (int i = 0; i < 3; ++i) c->weight(o, i, 0, 0) = Q(i, o);
      }
    }
  }
  const auto img = random_image(16, 16, rng);
  EXPECT_LT(pl::max_abs_diff(m.reconstruct(img), img), 1e-5);
}

TEST(Backward, MatchesFiniteDifferencesThroughWholeModel) {
  std::mt19937_64 rng(5);
  pl::Architecture a;
  a.encoder = {{pl::StageKind::gdn, "gdn1", 0, 0, 1, 3},
               {pl::StageKind::conv, "conv1", 3, 4, 3, 0},
               {pl::StageKind::maxpool2, "pool1"},
               {pl::StageKind::gdn, "gdn2", 0, 0, 1, 4},
               {pl::StageKind::conv, "conv2", 4, 5, 3, 0},
               {pl::StageKind::gdn, "gdn3", 0, 0, 1, 5}};
  pl::Model m = pl::Model::build(a, 11, 0.2);
  const auto img = random_image(8, 8, rng);
  const auto target = random_image(8, 8, rng);
  const pl::LossSpec spec{pl::Objective::sparsity, 0.3};

  auto loss = [&] {
    const auto pass = m.forward(img);
    return pl::total_loss(pass.output, target, pass.latent, spec);
  };
  const auto pass = m.forward(img);
  auto grad = m.zero_gradient();
  const auto d_lat = pl::sparsity_gradient(pass.latent, spec.lambda);
  m.backward(pass, pl::mse_gradient(pass.output, target), &d_lat, grad);

  auto params = m.parameters();
  auto slots = grad.slots();
  ASSERT_EQ(params.size(), slots.size());
  std::size_t checked = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto r = pl::testing::check_slot(loss, params[k].values, slots[k], 10, rng);
    EXPECT_LT(r.worst, 1e-4) << params[k].name;
    checked += r.checked;
  }
  EXPECT_GE(checked, 100u);
}

TEST(Backward, ZeroLossGivesZeroGradient) {
  std::mt19937_64 rng(6);
  const auto m = pl::Model::build(pl::perceptnet_architecture(), 2);
  const auto img = random_image(16, 16, rng);
  const auto pass = m.forward(img);
  auto grad = m.zero_gradient();
  m.backward(pass, pl::mse_gradient(pass.output, pass.output), nullptr, grad);
  for (auto s : grad.slots()) {
    for (double v : s) EXPECT_EQ(v, 0.0);
  }
}

TEST(Backward, NonFiniteGradientNamesLayer) {
  std::mt19937_64 rng(7);
  const auto m = pl::Model::build(pl::perceptnet_architecture(), 2);
  const auto pass = m.forward(random_image(16, 16, rng));
  pl::ActivationMap bad(pass.output.shape(), 0.0);
  bad(0, 0, 0) = std::numeric_limits<double>::infinity();
  auto grad = m.zero_gradient();
  try {
    m.backward(pass, bad, nullptr, grad);
    FAIL() << "expected TrainingError";
  } catch (const pl::TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("dec."), std::string::npos) << e.what();
  }
}

TEST(Model, ProjectionAfterArbitraryUpdate) {
  auto m = pl::Model::build(pl::perceptnet_architecture(), 1);
  for (auto& p : m.parameters()) {
    for (double& v : p.values) v = -1.0;
  }
  EXPECT_FALSE(m.constraints_hold());
  m.project_constraints();
  EXPECT_TRUE(m.constraints_hold());
}
