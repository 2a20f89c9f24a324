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

// Synthetic datasets in TID2013 layout, for tests and desk-scale runs.
//
// Reference images are seeded crops of natural photographs. Each is
// distorted with a subset of TID2013's distortion families at increasing
// levels, and the stand-in MOS is 9 * max(0, SSIM) between reference and
// distorted luminance, so higher still means better quality. These scores
// are not human judgements; they only give the evaluation pipeline a
// monotone, perceptually motivated target.

#pragma once

#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "perceptlab/activation_map.hpp"
#include "perceptlab/corpus.hpp"
#include "perceptlab/distortions.hpp"
#include "perceptlab/image_io.hpp"
#include "perceptlab/util.hpp"

namespace perceptlab::synthetic {

/// TID2013 distortion type numbers supported by the generator.
enum DistortionType : int {
  kAdditiveNoise = 1,
  kImpulseNoise = 6,
  kGaussianBlur = 8,
  kJpeg = 10,
  kMeanShift = 16,
  kContrastChange = 17,
};

struct FixtureSpec {
  fs::path corpus;
  fs::path root;
  int references = 6;
  int size = 64;
  int levels = 5;
  std::vector<int> types = {kAdditiveNoise, kImpulseNoise, kGaussianBlur, kJpeg, kMeanShift,
                            kContrastChange};
  std::uint64_t seed = 1;
};

/// Mean SSIM of BT.601 luminance (11x11 Gaussian window, sigma 1.5).
inline double ssim(const ActivationMap& a, const ActivationMap& b) {
  require_same_shape(a, b, "ssim");
  auto luma = [](const ActivationMap& x) {
    ActivationMap y(1, x.height(), x.width());
    for (int r = 0; r < x.height(); ++r) {
      for (int c = 0; c < x.width(); ++c) {
        y(0, r, c) = 0.299 * x(0, r, c) + 0.587 * x(1, r, c) + 0.114 * x(2, r, c);
      }
    }
    return y;
  };
  const ActivationMap ya = luma(a), yb = luma(b);
  ActivationMap aa(ya.shape()), bb(ya.shape()), ab(ya.shape());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa.data()[i] = ya.data()[i] * ya.data()[i];
    bb.data()[i] = yb.data()[i] * yb.data()[i];
    ab.data()[i] = ya.data()[i] * yb.data()[i];
  }
  const double s = 1.5;
  const ActivationMap ma = gaussian_blur(ya, s), mb = gaussian_blur(yb, s);
  const ActivationMap saa = gaussian_blur(aa, s), sbb = gaussian_blur(bb, s), sab = gaussian_blur(ab, s);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) {
    const double mu_a = ma.data()[i], mu_b = mb.data()[i];
    const double va = saa.data()[i] - mu_a * mu_a;
    const double vb = sbb.data()[i] - mu_b * mu_b;
    const double cov = sab.data()[i] - mu_a * mu_b;
    total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
             ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(ya.size());
}

/// Distorts `ref` with TID2013 type `type` at level 1..5 (clamped).
inline ActivationMap distort(const ActivationMap& ref, int type, int level, std::uint64_t seed) {
  const int l = std::clamp(level, 1, 5) - 1;
  ActivationMap out = ref;
  switch (type) {
    case kAdditiveNoise: {
      static constexpr double sigma[] = {0.02, 0.04, 0.07, 0.1, 0.15};
      return add_gaussian_noise(ref, sigma[l], seed);
    }
    case kImpulseNoise: {
      static constexpr double p[] = {0.01, 0.025, 0.05, 0.09, 0.15};
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int y = 0; y < ref.height(); ++y) {
        for (int x = 0; x < ref.width(); ++x) {
          if (u(rng) < p[l]) {
            const double v = u(rng) < 0.5 ? 0.0 : 1.0;
            for (int c = 0; c < 3; ++c) out(c, y, x) = v;
          }
        }
      }
      return out;
    }
    case kGaussianBlur: {
      static constexpr double sigma[] = {0.5, 1.0, 1.5, 2.2, 3.0};
      return gaussian_blur(ref, sigma[l]);
    }
    case kJpeg: {
      static constexpr int quality[] = {60, 35, 20, 10, 4};
      std::vector<unsigned char> buf;
      cv::imencode(".jpg", to_mat(ref), buf, {cv::IMWRITE_JPEG_QUALITY, quality[l]});
      return from_mat(cv::imdecode(buf, cv::IMREAD_COLOR));
    }
    case kMeanShift: {
      static constexpr double shift[] = {0.02, -0.05, 0.08, -0.12, 0.18};
      for (double& v : out.data()) v = std::clamp(v + shift[l], 0.0, 1.0);
      return out;
    }
    case kContrastChange: {
      static constexpr double gain[] = {0.9, 1.2, 0.7, 1.45, 0.45};
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (double v : out.channel(c)) mean += v;
        mean /= static_cast<double>(out.shape().plane());
        for (double& v : out.channel(c)) v = std::clamp(mean + gain[l] * (v - mean), 0.0, 1.0);
      }
      return out;
    }
    default:
      throw ArgumentError("unsupported synthetic distortion type " + std::to_string(type));
  }
}

inline std::string two_digits(int v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

/// Writes reference_images/, distorted_images/ and mos_with_names.txt under
/// spec.root. Returns the number of distorted images.
inline std::size_t make_fixture(const FixtureSpec& spec) {
  if (spec.references < 1 || spec.levels < 1 || spec.levels > 5 || spec.types.empty()) {
    throw ArgumentError("fixture needs >= 1 reference, 1..5 levels and >= 1 distortion type");
  }
  PatchStream crops(spec.corpus, spec.size, spec.seed);
  fs::create_directories(spec.root / "reference_images");
  fs::create_directories(spec.root / "distorted_images");
  std::ofstream mos(spec.root / "mos_with_names.txt");
  if (!mos) throw Error("cannot write " + (spec.root / "mos_with_names.txt").string());
  std::size_t count = 0;
  for (int r = 1; r <= spec.references; ++r) {
    const std::string id = "i" + two_digits(r);
    // Store and score the 8-bit round trip so MOS matches what gets decoded.
    const ActivationMap ref = from_mat(to_mat(crops.next()));
    save_image(spec.root / "reference_images" / ("I" + two_digits(r) + ".BMP"), ref);
    for (int t : spec.types) {
      for (int l = 1; l <= spec.levels; ++l) {
        const std::string name = id + "_" + two_digits(t) + "_" + std::to_string(l) + ".bmp";
        const ActivationMap d = from_mat(to_mat(
            distort(ref, t, l, derive_seed(spec.seed, static_cast<std::uint64_t>(r), t * 10 + l))));
        save_image(spec.root / "distorted_images" / name, d);
        char line[64];
        std::snprintf(line, sizeof line, "%.5f %s\n", 9.0 * std::max(0.0, ssim(ref, d)), name.c_str());
        mos << line;
        ++count;
      }
    }
  }
  return count;
}

}  // namespace perceptlab::synthetic
