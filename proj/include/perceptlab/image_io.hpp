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

// Image file <-> ActivationMap conversion. Decoding and encoding are
// delegated to OpenCV's imgcodecs; everything in memory is RGB in [0,1].

#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <string>

#include "perceptlab/activation_map.hpp"
#include "perceptlab/error.hpp"

namespace perceptlab {

namespace fs = std::filesystem;

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool has_image_extension(const fs::path& p) {
  const std::string ext = lowercase(p.extension().string());
  return ext == ".png" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" ||
         ext == ".pgm" || ext == ".tif" || ext == ".tiff";
}

/// 8-bit BGR (or gray) matrix to RGB [0,1].
inline ActivationMap from_mat(const cv::Mat& m) {
  if (m.empty() || m.depth() != CV_8U || (m.channels() != 3 && m.channels() != 1)) {
    throw InputError("expected a non-empty 8-bit gray or BGR image");
  }
  ActivationMap img(3, m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const unsigned char* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < m.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        const unsigned char v = m.channels() == 3 ? row[3 * x + (2 - c)] : row[x];
        img(c, y, x) = v / 255.0;
      }
    }
  }
  return img;
}

/// RGB [0,1] to 8-bit BGR with rounding and clamping.
inline cv::Mat to_mat(const ActivationMap& img) {
  if (img.channels() != 3) throw InputError("only 3-channel images can be encoded");
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    unsigned char* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img(c, y, x), 0.0, 1.0);
        row[3 * x + (2 - c)] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  return m;
}

inline ActivationMap load_image(const fs::path& path) {
  cv::Mat m;
  try {
    m = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
    m.release();
  }
  if (m.empty()) throw IngestionError("cannot decode image " + path.string());
  return from_mat(m);
}

inline void save_image(const fs::path& path, const ActivationMap& img) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), to_mat(img));
  } catch (const cv::Exception& e) {
    throw Error("cannot write image " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error("cannot write image " + path.string());
}

}  // namespace perceptlab
