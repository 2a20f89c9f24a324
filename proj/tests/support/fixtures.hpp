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
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "perceptlab/config.hpp"
#include "perceptlab/image_io.hpp"
#include "perceptlab/model.hpp"
#include "perceptlab/util.hpp"

namespace perceptlab::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("perceptlab_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path source_dir() { return PERCEPTLAB_SOURCE_DIR; }
inline std::filesystem::path bundled_corpus() { return source_dir() / "data" / "corpus"; }

/// Small reconstruction config on the bundled corpus.
inline TrainConfig toy_config(int steps = 20) {
  TrainConfig c;
  c.corpus_path = bundled_corpus().string();
  c.patch_size = 32;
  c.batch_size = 4;
  c.steps = steps;
  c.seed = 7;
  c.early_stop_window = 0;
  return c;
}

inline std::filesystem::path mini_iqa() { return source_dir() / "tests" / "data" / "tid_mini"; }

/// gdn -> 1x1 conv with gamma = 0, beta = 1 and identity weights, so every
/// tapped layer reproduces the input image.
inline Model identity_model() {
  Architecture a;
  a.encoder = {{StageKind::gdn, "gdn1", 0, 0, 1, 3}, {StageKind::conv, "conv1", 3, 3, 1, 0}};
  Model m = Model::build(a, 0, 0.0);
  for (auto* stack : {&m.encoder(), &m.decoder()}) {
    for (auto& s : stack->stages) {
      if (auto* c = std::get_if<ConvLayerSpec>(&s.layer)) {
        std::fill(c->weights.begin(), c->weights.end(), 0.0);
        for (int i = 0; i < 3; ++i) c->weight(i, i, 0, 0) = 1.0;
      }
    }
  }
  return m;
}

inline double pixel_l2(const ActivationMap& a, const ActivationMap& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Writes a dataset in the TID2013 layout whose MOS is minus the pixel l2
/// distance of the decoded 8-bit images. With `shuffle` the MOS column is
/// permuted. Returns the number of records.
inline std::size_t write_pixel_dataset(const std::filesystem::path& root, int refs, int per_ref,
                                       int side, std::uint64_t seed, bool shuffle = false) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "reference_images");
  fs::create_directories(root / "distorted_images");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> mos;
  std::vector<std::string> names;
  auto two = [](int v) { return (v < 10 ? "0" : "") + std::to_string(v); };
  for (int r = 1; r <= refs; ++r) {
    ActivationMap ref(3, side, side);
    for (double& v : ref.data()) v = u(rng);
    ref = from_mat(to_mat(ref));
    save_image(root / "reference_images" / ("I" + two(r) + ".BMP"), ref);
    for (int k = 1; k <= per_ref; ++k) {
      const double amp = u(rng);
      ActivationMap d = ref;
      for (double& v : d.data()) v = std::clamp(v + amp * (u(rng) - 0.5), 0.0, 1.0);
      d = from_mat(to_mat(d));
      const std::string name =
          "i" + two(r) + "_" + two(1 + (k - 1) / 5) + "_" + std::to_string(1 + (k - 1) % 5) + ".bmp";
      save_image(root / "distorted_images" / name, d);
      mos.push_back(-pixel_l2(ref, d));
      names.push_back(name);
    }
  }
  if (shuffle) std::shuffle(mos.begin(), mos.end(), rng);
  std::ofstream out(root / "mos_with_names.txt");
  for (std::size_t i = 0; i < names.size(); ++i) out << format_number(mos[i]) << ' ' << names[i] << '\n';
  return names.size();
}

}  // namespace perceptlab::testing
