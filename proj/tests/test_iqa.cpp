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

#include <fstream>
#include <random>
#include <sstream>

#include "perceptlab/iqa.hpp"
#include "perceptlab/spearman.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace pl = perceptlab;
using pl::testing::TempDir;

TEST(MosParse, DocumentedExampleLine) {
  const auto recs = pl::parse_mos_text("5.51429 i01_01_1.bmp\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].ref_id, "i01");
  EXPECT_EQ(recs[0].distortion_type, 1);
  EXPECT_EQ(recs[0].level, 1);
  EXPECT_EQ(recs[0].mos, 5.51429);
  EXPECT_EQ(recs[0].name, "i01_01_1.bmp");
}

TEST(MosParse, CaseAndWhitespaceTolerance) {
  const auto recs = pl::parse_mos_text("  4.0\tI25_24_5.BMP \r\n\n3 i02_10_3.Bmp\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].ref_id, "i25");
  EXPECT_EQ(recs[0].distortion_type, 24);
  EXPECT_EQ(recs[0].level, 5);
  EXPECT_EQ(recs[1].mos, 3.0);
}

TEST(MosParse, EmptyInputIsEmptyList) {
  EXPECT_TRUE(pl::parse_mos_text("").empty());
  EXPECT_TRUE(pl::parse_mos_text("\n\n  \n").empty());
}

TEST(MosParse, MalformedLinesNameTheLine) {
  auto expect_line = [](const std::string& text, std::size_t line) {
    try {
      pl::parse_mos_text(text);
      FAIL() << "expected ParseError for: " << text;
    } catch (const pl::ParseError& e) {
      EXPECT_EQ(e.line(), line);
      EXPECT_NE(std::string(e.what()).find("line " + std::to_string(line)), std::string::npos)
          << e.what();
    }
  };
  expect_line("5.1 i01_01_1.bmp\n5.2 i01_01_2.bmp extra\n", 2);
  expect_line("abc i01_01_1.bmp\n", 1);
  expect_line("1.0 i01_01_1.bmp\n\n1.0 img.bmp\n", 3);
  expect_line("nan i01_01_1.bmp\n", 1);
  expect_line("5.51429\n", 1);
}

TEST(MosFile, ResolvesMiniFixture) {
  const auto recs = pl::parse_mos_file(pl::mos_file_in(pl::testing::mini_iqa()));
  EXPECT_EQ(recs.size(), 54u);
  for (const auto& r : recs) {
    EXPECT_TRUE(std::filesystem::exists(r.reference_path)) << r.name;
    EXPECT_TRUE(std::filesystem::exists(r.distorted_path)) << r.name;
    EXPECT_EQ(r.reference_path.filename().string().substr(1, 2), r.ref_id.substr(1, 2));
  }
}

TEST(MosFile, MissingReferenceIsIngestionError) {
  TempDir dir("iqa_missing");
  std::filesystem::create_directories(dir / "reference_images");
  std::ofstream(dir / "mos_with_names.txt") << "5.0 i07_01_1.bmp\n";
  try {
    pl::parse_mos_file(dir / "mos_with_names.txt");
    FAIL() << "expected IngestionError";
  } catch (const pl::IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("i07"), std::string::npos) << e.what();
  }
  EXPECT_THROW(pl::mos_file_in(dir / "nothing"), pl::IngestionError);
}

TEST(Spearman, DocumentedExamples) {
  const std::vector<double> x = {1, 2, 3};
  EXPECT_DOUBLE_EQ(pl::spearman(x, std::vector<double>{10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(pl::spearman(x, std::vector<double>{3, 2, 1}), -1.0);
  const std::vector<double> a = {1, 2, 2, 3}, b = {1, 3, 2, 4};
  EXPECT_NEAR(pl::spearman(a, b), pl::testing::spearman_oracle(a, b), 1e-12);
  // Ranks (1, 2.5, 2.5, 4) vs (1, 3, 2, 4): cov 4.5, var 4.5 and 5.
  EXPECT_NEAR(pl::spearman(a, b), 4.5 / std::sqrt(4.5 * 5.0), 1e-15);
}

TEST(Spearman, AverageRanks) {
  const std::vector<double> v = {3.0, 1.0, 3.0, 2.0, 3.0};
  EXPECT_EQ(pl::average_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto x = pl::testing::vector_with_ties(50, rng);
    EXPECT_EQ(pl::average_ranks(x), pl::testing::brute_force_ranks(x));
  }
}

TEST(Spearman, MatchesBruteForceOracleWithTies) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> len(3, 500);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = len(rng);
    const auto x = pl::testing::vector_with_ties(n, rng);
    const auto y = pl::testing::vector_with_ties(n, rng);
    EXPECT_NEAR(pl::spearman(x, y), pl::testing::spearman_oracle(x, y), 1e-12) << n;
  }
}

TEST(Spearman, InvarianceAndSymmetry) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto x = pl::testing::vector_with_ties(80, rng);
    const auto y = pl::testing::vector_with_ties(80, rng);
    std::vector<double> ex(x.size()), cube(y.size()), neg(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      ex[i] = std::exp(x[i]);
      cube[i] = y[i] * y[i] * y[i] + 2.0 * y[i];
      neg[i] = -y[i];
    }
    EXPECT_EQ(pl::average_ranks(ex), pl::average_ranks(x));
    EXPECT_EQ(pl::average_ranks(cube), pl::average_ranks(y));
    EXPECT_EQ(pl::spearman(ex, cube), pl::spearman(x, y));
    EXPECT_EQ(pl::spearman(x, y), pl::spearman(y, x));
    EXPECT_NEAR(pl::spearman(x, neg), -pl::spearman(x, y), 1e-15);
    const double r = pl::spearman(x, y);
    EXPECT_LE(std::abs(r), 1.0);
  }
}

TEST(Spearman, UndefinedCasesRaise) {
  const std::vector<double> one = {1.0};
  EXPECT_THROW(pl::spearman(one, one), pl::UndefinedCorrelation);
  const std::vector<double> c = {2, 2, 2}, v = {1, 2, 3};
  EXPECT_THROW(pl::spearman(c, v), pl::UndefinedCorrelation);
  EXPECT_THROW(pl::spearman(v, std::vector<double>{1, 2}), pl::ArgumentError);
  EXPECT_THROW(pl::spearman(v, std::vector<double>{1, NAN, 2}), pl::InputError);
}

TEST(LayerDistance, PseudometricAndLoopOracle) {
  std::mt19937_64 rng(4);
  const auto m = pl::Model::build(pl::perceptnet_architecture(), 3);
  const auto a = pl::testing::random_map({3, 16, 16}, rng, 0, 1);
  const auto b = pl::testing::random_map({3, 16, 16}, rng, 0, 1);
  const auto same = pl::layer_distances(m, a, a);
  ASSERT_EQ(same.size(), m.layer_ids().size());
  for (const auto& [id, d] : same) EXPECT_EQ(d, 0.0) << id;

  const auto ab = pl::layer_distances(m, a, b);
  const auto ba = pl::layer_distances(m, b, a);
  const auto ta = m.trace(a);
  const auto tb = m.trace(b);
  for (std::size_t i = 0; i < ab.size(); ++i) {
    EXPECT_GT(ab[i].second, 0.0);
    EXPECT_EQ(ab[i].second, ba[i].second);
    const auto& x = ta.entries[i].second;
    const auto& y = tb.entries[i].second;
    double l2 = 0.0, l1 = 0.0;
    for (int c = 0; c < x.channels(); ++c) {
      for (int r = 0; r < x.height(); ++r) {
        for (int k = 0; k < x.width(); ++k) {
          const double d = x(c, r, k) - y(c, r, k);
          l2 += d * d;
          l1 += std::abs(d);
        }
      }
    }
    EXPECT_NEAR(ab[i].second, std::sqrt(l2), 1e-10 * std::max(1.0, std::sqrt(l2)));
    EXPECT_NEAR(pl::layer_distances(m, a, b, pl::DistanceKind::l1)[i].second, l1,
                1e-10 * std::max(1.0, l1));
  }
  EXPECT_THROW(pl::layer_distances(m, a, pl::ActivationMap(3, 16, 12, 0.5)), pl::EvaluationError);
}

TEST(LayerDistance, IdentityEncoderIsPixelMetric) {
  std::mt19937_64 rng(5);
  const auto m = pl::testing::identity_model();
  const auto a = pl::testing::random_map({3, 9, 7}, rng, 0, 1);
  const auto b = pl::testing::random_map({3, 9, 7}, rng, 0, 1);
  for (const auto& [id, d] : pl::layer_distances(m, a, b)) {
    EXPECT_NEAR(d, pl::testing::pixel_l2(a, b), 1e-12) << id;
  }
}

TEST(Evaluate, PixelMosGivesPerfectAlignment) {
  TempDir dir("iqa_pixel");
  pl::testing::write_pixel_dataset(dir.path(), 4, 10, 12, 1);
  const auto report = pl::evaluate_alignment(pl::testing::identity_model(), dir.path());
  ASSERT_EQ(report.layers.size(), 4u);
  EXPECT_EQ(report.encoder_layer, "enc.conv1");
  for (const auto& l : report.layers) {
    EXPECT_NEAR(l.abs_rho, 1.0, 1e-9) << l.layer_id;
    EXPECT_NEAR(l.rho, -1.0, 1e-9);
    EXPECT_EQ(l.n_pairs, 40u);
  }
  EXPECT_EQ(report.excluded, 0u);
}

TEST(Evaluate, ShuffledMosIsUncorrelated) {
  TempDir dir("iqa_shuffle");
  ASSERT_EQ(pl::testing::write_pixel_dataset(dir.path(), 10, 30, 6, 2, true), 300u);
  const auto report = pl::evaluate_alignment(pl::testing::identity_model(), dir.path());
  for (const auto& l : report.layers) {
    EXPECT_LT(l.abs_rho, 0.1) << l.layer_id;
    EXPECT_EQ(l.n_pairs, 300u);
  }
}

TEST(Evaluate, MiniFixtureReportContract) {
  const auto m = pl::Model::build(pl::perceptnet_architecture(), 8);
  const auto a = pl::evaluate_alignment(m, pl::testing::mini_iqa());
  const auto b = pl::evaluate_alignment(m, pl::testing::mini_iqa());
  EXPECT_EQ(a.layers.size(), 18u);
  EXPECT_EQ(a.encoder_layer, "enc.gdn4");
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    EXPECT_EQ(a.layers[i].layer_id, m.layer_ids()[i]);
    EXPECT_EQ(a.layers[i].abs_rho, std::abs(a.layers[i].rho));
    EXPECT_EQ(a.layers[i].n_pairs, 54u);
    EXPECT_EQ(a.layers[i].rho, b.layers[i].rho);
  }
  EXPECT_EQ(a.at("enc.gdn4").layer_id, "enc.gdn4");
}

TEST(Evaluate, ExclusionsWarnThenFail) {
  TempDir dir("iqa_excl");
  pl::testing::write_pixel_dataset(dir.path(), 5, 10, 6, 3);
  std::ofstream(dir / "distorted_images" / "i01_01_1.bmp", std::ios::trunc) << "garbage";
  std::ostringstream log;
  pl::EvalOptions opts;
  opts.log = &log;
  const auto r = pl::evaluate_alignment(pl::testing::identity_model(), dir.path(), opts);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.layers[0].n_pairs, 49u);
  EXPECT_NE(log.str().find("excluded 1 of 50"), std::string::npos) << log.str();

  for (const char* name : {"i01_01_2.bmp", "i01_01_3.bmp"}) {
    std::filesystem::remove(dir / "distorted_images" / name);
  }
  try {
    pl::evaluate_alignment(pl::testing::identity_model(), dir.path());
    FAIL() << "expected EvaluationError";
  } catch (const pl::EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("i01_01_2.bmp"), std::string::npos) << e.what();
  }
}

TEST(Evaluate, UndefinedCorrelationNamesLayer) {
  TempDir dir("iqa_const");
  pl::testing::write_pixel_dataset(dir.path(), 1, 3, 6, 4);
  std::ofstream(dir / "mos_with_names.txt", std::ios::trunc)
      << "1 i01_01_1.bmp\n2 i01_01_2.bmp\n3 i01_01_3.bmp\n";
  // Zero weights: every layer after the conv is constant.
  auto m = pl::testing::identity_model();
  for (auto& s : m.encoder().stages) {
    if (auto* c = std::get_if<pl::ConvLayerSpec>(&s.layer)) std::fill(c->weights.begin(), c->weights.end(), 0.0);
  }
  try {
    pl::evaluate_alignment(m, dir.path());
    FAIL() << "expected UndefinedCorrelation";
  } catch (const pl::UndefinedCorrelation& e) {
    EXPECT_NE(std::string(e.what()).find("enc.conv1"), std::string::npos) << e.what();
  }
}

TEST(Report, JsonAndCsvRoundTrip) {
  TempDir dir("report");
  const auto m = pl::Model::build(pl::perceptnet_architecture(), 8);
  const auto r = pl::evaluate_alignment(m, pl::testing::mini_iqa());
  pl::save_report(r, dir / "r.json", dir / "r.csv");
  const auto back = pl::load_report(dir / "r.json");
  ASSERT_EQ(back.layers.size(), r.layers.size());
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    EXPECT_EQ(back.layers[i].rho, r.layers[i].rho);
    EXPECT_EQ(back.layers[i].layer_id, r.layers[i].layer_id);
  }
  EXPECT_EQ(back.peak().layer_id, r.peak().layer_id);
  std::ifstream csv(dir / "r.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "layer_id,rho,abs_rho,n_pairs");
  std::size_t i = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string id, rho, abs_rho, n;
    std::getline(ss, id, ',');
    std::getline(ss, rho, ',');
    std::getline(ss, abs_rho, ',');
    std::getline(ss, n, ',');
    ASSERT_LT(i, r.layers.size());
    EXPECT_EQ(id, r.layers[i].layer_id);
    EXPECT_EQ(std::stod(rho), r.layers[i].rho);
    EXPECT_EQ(std::stod(abs_rho), r.layers[i].abs_rho);
    EXPECT_EQ(std::stoul(n), r.layers[i].n_pairs);
    ++i;
  }
  EXPECT_EQ(i, r.layers.size());
}
