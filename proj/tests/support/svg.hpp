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

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace perceptlab::testing {

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SvgPoint {
  std::string x;
  std::string y;
};

/// data-x / data-y attributes of every plotted marker, in document order.
inline std::vector<SvgPoint> svg_points(const std::string& svg) {
  static const std::regex re(R"re(<circle class="point"[^>]*data-x="([^"]*)" data-y="([^"]*)")re");
  std::vector<SvgPoint> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back({(*it)[1].str(), (*it)[2].str()});
  }
  return out;
}

inline std::string svg_attr(const std::string& svg, const std::string& name) {
  const std::regex re(name + R"re(="([^"]*)")re");
  std::smatch m;
  return std::regex_search(svg, m, re) ? m[1].str() : std::string();
}

/// CSV rows split on commas, header dropped.
inline std::vector<std::vector<std::string>> csv_rows(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace perceptlab::testing
