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

// Parameter sweeps: one model per grid value, trained with identical seeds,
// evaluated against the IQA dataset and tabulated.
//
// Output layout:
//   <out>/<objective>/<param>/model.ckpt, loss.csv, report.json, report.csv,
//                             layers.svg, layers.csv, point.json
//   (with seeds > 1 the run files live in <param>/seed_<k>/)
//   <out>/sweep.csv, <out>/sweep.json, <out>/encoder_curve.svg, <out>/encoder_curve.csv
//
// point.json is written last and records the hash of the point's training
// config; a point whose point.json, model.ckpt and report.json exist with a
// matching hash is reused on rerun.

#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "perceptlab/config.hpp"
#include "perceptlab/iqa.hpp"
#include "perceptlab/plot.hpp"
#include "perceptlab/train.hpp"
#include "perceptlab/util.hpp"

namespace perceptlab {

/// Fig.-1-style brackets per objective.
inline std::vector<double> default_grid(Objective o) {
  switch (o) {
    case Objective::denoising: return {0.01, 0.05, 0.1, 0.2, 0.4};
    case Objective::deblurring: return {0.5, 1.0, 2.0, 4.0};
    case Objective::sparsity: return {0.001, 0.01, 0.1, 1.0};
    case Objective::reconstruction: return {0.0};
  }
  return {};
}

inline const char* parameter_name(Objective o) {
  switch (o) {
    case Objective::denoising: return "noise sigma";
    case Objective::deblurring: return "blur sigma";
    case Objective::sparsity: return "lambda";
    default: return "param";
  }
}

struct SweepSpec {
  Objective objective = Objective::denoising;
  std::vector<double> grid;
  TrainConfig base;
  fs::path iqa_root;
  fs::path out_dir;
  int seeds = 1;
  DistanceKind distance = DistanceKind::l2;

  void validate() const {
    if (grid.empty()) throw ArgumentError("sweep grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) throw ArgumentError("grid values must be >= 0");
      if (i > 0 && !(grid[i] > grid[i - 1])) throw ArgumentError("grid must be strictly increasing");
    }
    if (seeds < 1) throw ArgumentError("seeds must be >= 1");
  }
};

struct SweepRow {
  double param = 0.0;
  std::vector<LayerCorrelation> layers;  // averaged over seeds
  double encoder_abs_rho = 0.0;
  fs::path checkpoint;
  double final_loss = 0.0;
  bool reused = false;  // every seed was taken from a previous run
  std::optional<std::string> error;
};

struct SweepResult {
  Objective objective = Objective::denoising;
  std::string encoder_layer;
  std::vector<SweepRow> rows;

  bool any_failed() const {
    for (const auto& r : rows) {
      if (r.error) return true;
    }
    return false;
  }
};

/// Training config of one (grid value, seed index) point.
inline TrainConfig point_config(const SweepSpec& spec, double param, int seed_index) {
  TrainConfig c = spec.base;
  c.objective.objective = spec.objective;
  c.objective.lambda = 0.0;
  c.distortion = {implied_distortion(spec.objective), 0.0};
  switch (spec.objective) {
    case Objective::denoising:
    case Objective::deblurring: c.distortion.sigma = param; break;
    case Objective::sparsity: c.objective.lambda = param; break;
    case Objective::reconstruction: break;
  }
  c.seed = spec.base.seed + static_cast<std::uint64_t>(seed_index);
  return c;
}

inline fs::path point_dir(const SweepSpec& spec, double param) {
  return spec.out_dir / to_string(spec.objective) / format_number(param);
}

namespace detail {

struct PointRun {
  CorrelationReport report;
  double final_loss = 0.0;
  bool reused = false;
};

inline std::string point_hash(const TrainConfig& cfg, const SweepSpec& spec) {
  const std::string key = to_json(cfg).dump() + "|" + fs::absolute(spec.iqa_root).string() + "|" +
                          to_string(spec.distance);
  return to_hex(fnv1a(key));
}

inline PointRun run_point(const TrainConfig& cfg, const SweepSpec& spec, const fs::path& dir,
                          std::ostream* log) {
  const std::string hash = point_hash(cfg, spec);
  const fs::path marker = dir / "point.json";
  if (fs::exists(marker) && fs::exists(dir / "model.ckpt") && fs::exists(dir / "report.json")) {
    try {
      const json m = read_json_file(marker);
      if (m.at("config_hash").get<std::string>() == hash) {
        return {load_report(dir / "report.json"), m.at("final_loss").get<double>(), true};
      }
    } catch (const std::exception&) {
      // stale or unreadable marker: retrain
    }
  }
  fs::create_directories(dir);
  fs::remove(marker);
  if (log) *log << "training " << dir.string() << '\n';
  Checkpoint ckpt = train(cfg, TrainOptions{dir, {}});
  const double final_loss = ckpt.loss_history.back().loss;
  EvalOptions eo;
  eo.distance = spec.distance;
  eo.log = log;
  CorrelationReport report = evaluate_alignment(ckpt.model, spec.iqa_root, eo);
  save_report(report, dir / "report.json", dir / "report.csv");
  emit_layer_plot(report, dir / "layers.svg");
  std::ofstream(marker) << json{{"config_hash", hash}, {"final_loss", final_loss}}.dump(2) << '\n';
  return {std::move(report), final_loss, false};
}

}  // namespace detail

inline void write_sweep_csv(const SweepResult& r, std::ostream& out) {
  out << "objective,param,layer_id,rho,abs_rho,n_pairs,final_loss\n";
  for (const auto& row : r.rows) {
    if (row.error) continue;
    for (const auto& l : row.layers) {
      out << to_string(r.objective) << ',' << format_number(row.param) << ',' << l.layer_id << ','
          << format_number(l.rho) << ',' << format_number(l.abs_rho) << ',' << l.n_pairs << ','
          << format_number(row.final_loss) << '\n';
    }
  }
}

/// Rebuilds a result from sweep.csv. The encoder layer is the last "enc."
/// layer of the first row.
inline SweepResult read_sweep_csv(std::istream& in) {
  SweepResult r;
  std::string line;
  if (!std::getline(in, line) || line.rfind("objective,param,layer_id", 0) != 0) {
    throw FormatError("not a sweep.csv file");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw ParseError("expected 7 columns", line_no);
    try {
      r.objective = objective_from_string(f[0]);
      const double param = std::stod(f[1]);
      if (r.rows.empty() || r.rows.back().param != param) {
        r.rows.push_back({});
        r.rows.back().param = param;
        r.rows.back().final_loss = std::stod(f[6]);
      }
      r.rows.back().layers.push_back({f[2], std::stod(f[3]), std::stod(f[4]),
                                      static_cast<std::size_t>(std::stoull(f[5]))});
    } catch (const std::logic_error&) {
      throw ParseError("invalid number", line_no);
    }
  }
  if (r.rows.empty()) throw FormatError("sweep.csv has no rows");
  for (const auto& l : r.rows.front().layers) {
    if (l.layer_id.rfind("enc.", 0) == 0) r.encoder_layer = l.layer_id;
  }
  for (auto& row : r.rows) {
    for (const auto& l : row.layers) {
      if (l.layer_id == r.encoder_layer) row.encoder_abs_rho = l.abs_rho;
    }
  }
  return r;
}

inline void emit_sweep_plot(const SweepResult& r, const fs::path& svg_path) {
  std::vector<std::pair<double, double>> curve;
  for (const auto& row : r.rows) {
    if (!row.error) curve.emplace_back(row.param, row.encoder_abs_rho);
  }
  emit_param_plot(curve, parameter_name(r.objective),
                  std::string(to_string(r.objective)) + ": |rho| at " + r.encoder_layer,
                  svg_path);
}

inline json to_json(const SweepResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j{{"param", row.param},
           {"checkpoint", row.checkpoint.string()},
           {"reused", row.reused}};
    if (row.error) {
      j["error"] = *row.error;
    } else {
      j["encoder_abs_rho"] = row.encoder_abs_rho;
      j["final_loss"] = row.final_loss;
      json layers = json::array();
      for (const auto& l : row.layers) {
        layers.push_back({{"layer_id", l.layer_id}, {"rho", l.rho}, {"abs_rho", l.abs_rho},
                          {"n_pairs", l.n_pairs}});
      }
      j["layers"] = std::move(layers);
    }
    rows.push_back(std::move(j));
  }
  return {{"objective", to_string(r.objective)}, {"encoder_layer", r.encoder_layer}, {"rows", rows}};
}

inline void write_sweep_outputs(const SweepResult& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "sweep.csv");
    if (!out) throw Error("cannot write sweep.csv");
    write_sweep_csv(r, out);
  }
  std::ofstream(out_dir / "sweep.json") << to_json(r).dump(2) << '\n';
}

/// Trains and evaluates every grid point in order. A failing point is
/// recorded with its error and the sweep continues.
inline SweepResult run_sweep(const SweepSpec& spec, std::ostream* log = nullptr) {
  spec.validate();
  SweepResult result;
  result.objective = spec.objective;

  for (double param : spec.grid) {
    SweepRow row;
    row.param = param;
    const fs::path dir = point_dir(spec, param);
    try {
      std::vector<detail::PointRun> runs;
      for (int k = 0; k < spec.seeds; ++k) {
        const TrainConfig cfg = point_config(spec, param, k);
        cfg.validate();
        const fs::path run_dir = spec.seeds == 1 ? dir : dir / ("seed_" + std::to_string(k));
        runs.push_back(detail::run_point(cfg, spec, run_dir, log));
        if (k == 0) row.checkpoint = run_dir / "model.ckpt";
      }
      row.reused = true;
      row.layers = runs.front().report.layers;
      for (auto& l : row.layers) {
        l.rho = 0.0;
        l.abs_rho = 0.0;
      }
      for (const auto& run : runs) {
        row.reused = row.reused && run.reused;
        row.final_loss += run.final_loss / spec.seeds;
        for (std::size_t i = 0; i < row.layers.size(); ++i) {
          row.layers[i].rho += run.report.layers.at(i).rho / spec.seeds;
          row.layers[i].abs_rho += run.report.layers.at(i).abs_rho / spec.seeds;
        }
      }
      result.encoder_layer = runs.front().report.encoder_layer;
      for (const auto& l : row.layers) {
        if (l.layer_id == result.encoder_layer) row.encoder_abs_rho = l.abs_rho;
      }
      if (spec.seeds > 1) {
        CorrelationReport avg = runs.front().report;
        avg.layers = row.layers;
        save_report(avg, dir / "report.json", dir / "report.csv");
      }
    } catch (const std::exception& e) {
      row.error = e.what();
      if (log) *log << "grid point " << format_number(param) << " failed: " << e.what() << '\n';
    }
    result.rows.push_back(std::move(row));
    write_sweep_outputs(result, spec.out_dir);
  }
  bool any_ok = false;
  for (const auto& r : result.rows) any_ok = any_ok || !r.error;
  if (any_ok) emit_sweep_plot(result, spec.out_dir / "encoder_curve.svg");
  return result;
}

/// Sweep spec from the shared config file: the flat training config plus
/// optional "grid" and "seeds".
inline SweepSpec sweep_spec_from_json(const json& j) {
  SweepSpec s;
  json train_part = j;
  std::vector<double> grid;
  try {
    if (j.contains("grid")) grid = j.at("grid").get<std::vector<double>>();
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid sweep config: ") + e.what());
  }
  train_part.erase("grid");
  train_part.erase("seeds");
  // The sweep sets lambda / sigma per grid point.
  train_part.erase("lambda");
  train_part.erase("sigma");
  train_part.erase("distortion");
  try {
    s.objective = objective_from_string(j.value("objective", std::string("reconstruction")));
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  train_part["objective"] = "reconstruction";
  s.base = train_config_from_json(train_part);
  s.base.objective.objective = s.objective;
  s.base.distortion.kind = implied_distortion(s.objective);
  s.grid = grid.empty() ? default_grid(s.objective) : grid;
  return s;
}

}  // namespace perceptlab
