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

// TID2013-layout datasets and layer-wise alignment with mean opinion scores.
//
// Layout:
//   <root>/mos_with_names.txt          "<mos> <name>" per line
//   <root>/reference_images/iXX.BMP
//   <root>/distorted_images/iXX_TT_L.bmp

#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "perceptlab/checkpoint.hpp"
#include "perceptlab/error.hpp"
#include "perceptlab/image_io.hpp"
#include "perceptlab/model.hpp"
#include "perceptlab/spearman.hpp"
#include "perceptlab/util.hpp"

namespace perceptlab {

struct IQARecord {
  std::string name;     // distorted image file name as listed
  std::string ref_id;   // "i01"
  int distortion_type = 0;
  int level = 0;
  double mos = 0.0;     // higher = better perceived quality
  fs::path distorted_path;
  fs::path reference_path;
};

/// Parses "<mos> <iXX_TT_L.ext>" lines. Blank lines are skipped; paths are
/// left empty.
inline std::vector<IQARecord> parse_mos_text(std::string_view text) {
  static const std::regex name_re(R"(^(i\d+)_(\d+)_(\d+)\.[a-z0-9]+$)", std::regex::icase);
  std::vector<IQARecord> out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    std::vector<std::string> parts;
    for (std::string t; tokens >> t;) parts.push_back(t);
    if (parts.empty()) continue;
    if (parts.size() != 2) {
      throw ParseError("expected '<mos> <image_name>', got " + std::to_string(parts.size()) +
                           " tokens",
                       line_no);
    }
    IQARecord r;
    const std::string& m = parts[0];
    auto [ptr, ec] = std::from_chars(m.data(), m.data() + m.size(), r.mos);
    if (ec != std::errc() || ptr != m.data() + m.size() || !std::isfinite(r.mos)) {
      throw ParseError("invalid MOS value '" + m + "'", line_no);
    }
    std::smatch match;
    if (!std::regex_match(parts[1], match, name_re)) {
      throw ParseError("image name '" + parts[1] + "' does not follow iXX_TT_L.ext", line_no);
    }
    r.name = parts[1];
    r.ref_id = lowercase(match[1].str());
    r.distortion_type = std::stoi(match[2].str());
    r.level = std::stoi(match[3].str());
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

/// Case-insensitive lookup of `name` (or of any image whose stem is `stem`)
/// inside `dir`.
inline std::optional<fs::path> find_file_icase(const fs::path& dir, const std::string& name,
                                               bool match_stem) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return std::nullopt;
  const std::string want = lowercase(name);
  std::optional<fs::path> best;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string cand = lowercase(match_stem ? e.path().stem().string()
                                                  : e.path().filename().string());
    if (cand == want && (!match_stem || has_image_extension(e.path()))) {
      if (!best || e.path() < *best) best = e.path();
    }
  }
  return best;
}

}  // namespace detail

/// Parses a TID2013-format MOS file and resolves image paths relative to its
/// directory. Every referenced reference image must exist.
inline std::vector<IQARecord> parse_mos_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open MOS file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::vector<IQARecord> records = parse_mos_text(ss.str());

  const fs::path root = path.parent_path();
  std::map<std::string, fs::path> refs;
  std::string missing;
  for (auto& r : records) {
    auto it = refs.find(r.ref_id);
    if (it == refs.end()) {
      auto found = detail::find_file_icase(root / "reference_images", r.ref_id, true);
      if (!found) {
        missing += "\n  " + (root / "reference_images" / (r.ref_id + ".bmp")).string();
        found = fs::path();
      }
      it = refs.emplace(r.ref_id, *found).first;
    }
    r.reference_path = it->second;
    auto dist = detail::find_file_icase(root / "distorted_images", r.name, false);
    r.distorted_path = dist ? *dist : root / "distorted_images" / r.name;
  }
  if (!missing.empty()) throw IngestionError("missing reference images:" + missing);
  return records;
}

/// Locates the MOS file inside a dataset root.
inline fs::path mos_file_in(const fs::path& root) {
  for (const char* n : {"mos_with_names.txt", "MOS_with_names.txt", "mos_with_names.TXT"}) {
    if (fs::exists(root / n)) return root / n;
  }
  if (auto f = detail::find_file_icase(root, "mos_with_names.txt", false)) return *f;
  throw IngestionError("no mos_with_names.txt in " + root.string());
}

enum class DistanceKind { l2, l1 };

inline DistanceKind distance_kind_from_string(const std::string& s) {
  if (s == "l2") return DistanceKind::l2;
  if (s == "l1") return DistanceKind::l1;
  throw ArgumentError("unknown distance '" + s + "' (expected l2 or l1)");
}

inline const char* to_string(DistanceKind k) { return k == DistanceKind::l2 ? "l2" : "l1"; }

inline double activation_distance(const ActivationMap& a, const ActivationMap& b,
                                  DistanceKind kind) {
  require_same_shape(a, b, "activation distance");
  auto x = a.data();
  auto y = b.data();
  double s = 0.0;
  if (kind == DistanceKind::l2) {
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
  }
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s;
}

using LayerDistances = std::vector<std::pair<std::string, double>>;

inline LayerDistances trace_distances(const LayerTrace& ref, const LayerTrace& dist,
                                      DistanceKind kind) {
  if (ref.keys() != dist.keys()) throw EvaluationError("traces have different layers");
  LayerDistances out;
  for (std::size_t i = 0; i < ref.entries.size(); ++i) {
    out.emplace_back(ref.entries[i].first,
                     activation_distance(ref.entries[i].second, dist.entries[i].second, kind));
  }
  return out;
}

/// Distance between the activations of two images at every tapped layer.
inline LayerDistances layer_distances(const Model& model, const ActivationMap& ref,
                                      const ActivationMap& dist,
                                      DistanceKind kind = DistanceKind::l2) {
  if (ref.shape() != dist.shape()) {
    throw EvaluationError("reference " + to_string(ref.shape()) + " and distorted " +
                          to_string(dist.shape()) + " images differ in shape");
  }
  return trace_distances(model.trace(ref), model.trace(dist), kind);
}

struct LayerCorrelation {
  std::string layer_id;
  double rho = 0.0;
  double abs_rho = 0.0;
  std::size_t n_pairs = 0;
};

struct CorrelationReport {
  std::vector<LayerCorrelation> layers;
  std::string encoder_layer;  // final encoder tap
  std::string distance = "l2";
  std::size_t excluded = 0;
  std::vector<std::string> excluded_files;

  const LayerCorrelation& at(const std::string& id) const {
    for (const auto& l : layers) {
      if (l.layer_id == id) return l;
    }
    throw EvaluationError("report has no layer '" + id + "'");
  }

  /// Layer with the largest abs_rho (first on ties).
  const LayerCorrelation& peak() const {
    if (layers.empty()) throw EvaluationError("empty report");
    const LayerCorrelation* best = &layers.front();
    for (const auto& l : layers) {
      if (l.abs_rho > best->abs_rho) best = &l;
    }
    return *best;
  }
};

inline nlohmann::json to_json(const CorrelationReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    const auto& l = r.layers[i];
    layers.push_back({{"index", i},
                      {"layer_id", l.layer_id},
                      {"rho", l.rho},
                      {"abs_rho", l.abs_rho},
                      {"n_pairs", l.n_pairs}});
  }
  return {{"layers", layers},
          {"encoder_layer", r.encoder_layer},
          {"peak_layer", r.layers.empty() ? std::string() : r.peak().layer_id},
          {"distance", r.distance},
          {"excluded", r.excluded},
          {"excluded_files", r.excluded_files}};
}

inline CorrelationReport report_from_json(const nlohmann::json& j) {
  try {
    CorrelationReport r;
    for (const auto& l : j.at("layers")) {
      r.layers.push_back({l.at("layer_id").get<std::string>(), l.at("rho").get<double>(),
                          l.at("abs_rho").get<double>(), l.at("n_pairs").get<std::size_t>()});
    }
    r.encoder_layer = j.value("encoder_layer", std::string());
    r.distance = j.value("distance", std::string("l2"));
    r.excluded = j.value("excluded", std::size_t{0});
    r.excluded_files = j.value("excluded_files", std::vector<std::string>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid report: ") + e.what());
  }
}

inline void write_report_csv(const CorrelationReport& r, std::ostream& out) {
  out << "layer_id,rho,abs_rho,n_pairs\n";
  for (const auto& l : r.layers) {
    out << l.layer_id << ',' << format_number(l.rho) << ',' << format_number(l.abs_rho) << ','
        << l.n_pairs << '\n';
  }
}

inline void save_report(const CorrelationReport& r, const fs::path& json_path,
                        std::optional<fs::path> csv_path = std::nullopt) {
  if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
  {
    std::ofstream out(json_path);
    if (!out) throw Error("cannot write " + json_path.string());
    out << to_json(r).dump(2) << '\n';
  }
  if (csv_path) {
    std::ofstream out(*csv_path);
    if (!out) throw Error("cannot write " + csv_path->string());
    write_report_csv(r, out);
  }
}

inline CorrelationReport load_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open report " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

struct EvalOptions {
  DistanceKind distance = DistanceKind::l2;
  /// Exclusion share above which evaluation fails.
  double max_excluded_fraction = 0.05;
  std::ostream* log = nullptr;
};

/// Spearman correlation between per-layer activation distances and MOS,
/// pooled over all records. Undecodable images are excluded and counted.
inline CorrelationReport evaluate_alignment(const Model& model, const std::vector<IQARecord>& records,
                                            const EvalOptions& opts = {}) {
  CorrelationReport report;
  report.distance = to_string(opts.distance);
  report.encoder_layer = model.encoder().tap_names.back();

  const std::vector<std::string> ids = model.layer_ids();
  std::vector<std::vector<double>> dists(ids.size());
  std::vector<double> mos;

  std::string cached_ref;
  std::optional<LayerTrace> ref_trace;
  std::optional<Shape> ref_shape;
  bool ref_ok = false;
  for (const auto& r : records) {
    if (r.reference_path.string() != cached_ref) {
      cached_ref = r.reference_path.string();
      ref_trace.reset();
      try {
        const ActivationMap ref = load_image(r.reference_path);
        ref_shape = ref.shape();
        ref_trace = model.trace(ref);
        ref_ok = true;
      } catch (const IngestionError&) {
        ref_ok = false;
      }
    }
    if (!ref_ok) {
      ++report.excluded;
      report.excluded_files.push_back(r.name + " (reference " + cached_ref + " undecodable)");
      continue;
    }
    ActivationMap img;
    try {
      img = load_image(r.distorted_path);
    } catch (const IngestionError&) {
      ++report.excluded;
      report.excluded_files.push_back(r.distorted_path.string());
      continue;
    }
    if (img.shape() != *ref_shape) {
      throw EvaluationError(r.name + ": shape " + to_string(img.shape()) +
                            " differs from its reference " + to_string(*ref_shape));
    }
    const LayerDistances d = trace_distances(*ref_trace, model.trace(img), opts.distance);
    for (std::size_t i = 0; i < d.size(); ++i) dists[i].push_back(d[i].second);
    mos.push_back(r.mos);
  }

  if (report.excluded > 0 && opts.log) {
    *opts.log << "warning: excluded " << report.excluded << " of " << records.size()
              << " records with undecodable images\n";
  }
  if (!records.empty() &&
      static_cast<double>(report.excluded) > opts.max_excluded_fraction * records.size()) {
    std::string list;
    for (const auto& f : report.excluded_files) list += "\n  " + f;
    throw EvaluationError("too many undecodable images (" + std::to_string(report.excluded) +
                          " of " + std::to_string(records.size()) + "):" + list);
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    LayerCorrelation lc;
    lc.layer_id = ids[i];
    try {
      lc.rho = spearman(dists[i], mos);
    } catch (const UndefinedCorrelation& e) {
      throw UndefinedCorrelation(ids[i] + ": " + e.what());
    }
    lc.abs_rho = std::abs(lc.rho);
    lc.n_pairs = mos.size();
    report.layers.push_back(std::move(lc));
  }
  return report;
}

inline CorrelationReport evaluate_alignment(const Model& model, const fs::path& iqa_root,
                                            const EvalOptions& opts = {}) {
  return evaluate_alignment(model, parse_mos_file(mos_file_in(iqa_root)), opts);
}

inline CorrelationReport evaluate_alignment(const fs::path& checkpoint, const fs::path& iqa_root,
                                            const EvalOptions& opts = {}) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  return evaluate_alignment(ckpt.model, iqa_root, opts);
}

}  // namespace perceptlab
