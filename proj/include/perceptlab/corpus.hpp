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
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "perceptlab/activation_map.hpp"
#include "perceptlab/error.hpp"
#include "perceptlab/image_io.hpp"

namespace perceptlab {

/// Endless, seed-determined stream of random square crops from a folder of
/// images. Files are visited in sorted order so the stream does not depend
/// on directory iteration order.
class PatchStream {
 public:
  PatchStream(const fs::path& path, int patch_size, std::uint64_t seed)
      : patch_size_(patch_size), rng_(seed) {
    if (patch_size <= 0) throw ArgumentError("patch size must be positive");
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) {
      files_.push_back(path);
    } else if (fs::is_directory(path, ec)) {
      for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) {
          files_.push_back(entry.path());
        }
      }
      std::sort(files_.begin(), files_.end());
    } else {
      throw IngestionError("corpus path does not exist: " + path.string());
    }
    if (files_.empty()) throw IngestionError("no image files found in " + path.string());

    std::string bad;
    for (const auto& f : files_) {
      try {
        ActivationMap img = load_image(f);
        if (img.height() < patch_size || img.width() < patch_size) {
          bad += "\n  " + f.string() + " (smaller than patch size " + std::to_string(patch_size) + ")";
          continue;
        }
        images_.push_back(std::move(img));
      } catch (const IngestionError&) {
        bad += "\n  " + f.string() + " (undecodable)";
      }
    }
    if (!bad.empty()) throw IngestionError("unusable corpus files:" + bad);
  }

  const std::vector<fs::path>& files() const noexcept { return files_; }
  int patch_size() const noexcept { return patch_size_; }

  ActivationMap next() {
    std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
    const ActivationMap& img = images_[pick(rng_)];
    std::uniform_int_distribution<int> oy(0, img.height() - patch_size_);
    std::uniform_int_distribution<int> ox(0, img.width() - patch_size_);
    const int y0 = oy(rng_);
    const int x0 = ox(rng_);
    ActivationMap patch(3, patch_size_, patch_size_);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < patch_size_; ++y) {
        for (int x = 0; x < patch_size_; ++x) patch(c, y, x) = img(c, y0 + y, x0 + x);
      }
    }
    return patch;
  }

  std::vector<ActivationMap> take(std::size_t n) {
    std::vector<ActivationMap> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(next());
    return out;
  }

 private:
  int patch_size_;
  std::mt19937_64 rng_;
  std::vector<fs::path> files_;
  std::vector<ActivationMap> images_;
};

inline PatchStream load_corpus(const fs::path& path, int patch_size, std::uint64_t seed) {
  return PatchStream(path, patch_size, seed);
}

}  // namespace perceptlab
