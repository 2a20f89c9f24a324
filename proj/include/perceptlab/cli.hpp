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

// `perceptlab` command line: train, eval, sweep, plot, distort.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "perceptlab/checkpoint.hpp"
#include "perceptlab/config.hpp"
#include "perceptlab/distortions.hpp"
#include "perceptlab/image_io.hpp"
#include "perceptlab/iqa.hpp"
#include "perceptlab/plot.hpp"
#include "perceptlab/sweep.hpp"
#include "perceptlab/train.hpp"

namespace perceptlab {

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::optional<std::string> closest(const std::string& word,
                                          const std::vector<std::string>& candidates) {
  std::optional<std::string> best;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (const auto& c : candidates) {
    const std::size_t d = edit_distance(word, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best && best_d <= std::max<std::size_t>(2, word.size() / 3)) return best;
  return std::nullopt;
}

/// Suggestions for unknown flags / subcommands in argv.
inline std::string suggest(const CLI::App& app, const std::vector<std::string>& args) {
  std::vector<std::string> subs;
  for (const auto* s : app.get_subcommands({})) subs.push_back(s->get_name());
  std::ostringstream hint;
  const CLI::App* scope = &app;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (i == 0 && !a.empty() && a[0] != '-') {
      if (std::find(subs.begin(), subs.end(), a) == subs.end()) {
        if (auto s = closest(a, subs)) hint << "unknown subcommand '" << a << "'; did you mean '" << *s << "'?\n";
        return hint.str();
      }
      scope = app.get_subcommand(a);
      continue;
    }
    if (a.rfind("--", 0) != 0) continue;
    const std::string name = a.substr(0, a.find('='));
    std::vector<std::string> known;
    for (const auto* o : scope->get_options()) {
      for (const auto& ln : o->get_lnames()) known.push_back("--" + ln);
    }
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      if (auto s = closest(name, known)) hint << "unknown option '" << name << "'; did you mean '" << *s << "'?\n";
    }
  }
  return hint.str();
}

inline fs::path resolve_checkpoint(const fs::path& p) {
  if (fs::is_directory(p)) return p / "model.ckpt";
  return p;
}

inline std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw ArgumentError("invalid grid value '" + tok + "'");
    }
  }
  return out;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"perceptlab: self-supervised retina-to-V1 autoencoders and their alignment "
               "with human image-quality judgements"};
  app.name("perceptlab");
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an autoencoder from a JSON config");
  std::string train_config, train_out;
  bool quiet = false;
  train_cmd->add_option("--config", train_config, "Flat JSON training config")->required();
  train_cmd->add_option("--out", train_out, "Output directory for model.ckpt and loss.csv")->required();
  train_cmd->add_flag("--quiet", quiet, "Suppress progress output");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Layer-wise Spearman correlation with MOS");
  std::string eval_ckpt, eval_iqa, eval_out = "report.json", eval_csv, eval_plot, eval_distance = "l2";
  eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint file or training output directory")->required();
  eval_cmd->add_option("--iqa", eval_iqa, "TID2013-layout dataset root")->required();
  eval_cmd->add_option("--out", eval_out, "Report JSON path")->capture_default_str();
  eval_cmd->add_option("--csv", eval_csv, "Report CSV path (default: next to the JSON)");
  eval_cmd->add_option("--plot", eval_plot, "Also write a layer-by-layer SVG plot");
  eval_cmd->add_option("--distance", eval_distance, "Activation distance")
      ->check(CLI::IsMember({"l2", "l1"}))
      ->capture_default_str();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate one model per grid value");
  std::string sweep_config, sweep_iqa, sweep_out, sweep_grid;
  int sweep_seeds = 0;
  sweep_cmd->add_option("--config", sweep_config, "Training config plus optional grid/seeds")->required();
  sweep_cmd->add_option("--iqa", sweep_iqa, "TID2013-layout dataset root")->required();
  sweep_cmd->add_option("--out", sweep_out, "Results directory")->required();
  sweep_cmd->add_option("--grid", sweep_grid, "Comma-separated grid overriding the config");
  sweep_cmd->add_option("--seeds", sweep_seeds, "Seeds per grid value; abs_rho is averaged")
      ->check(CLI::PositiveNumber);

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Render a report or sweep as SVG (+ CSV)");
  std::string plot_report, plot_sweep, plot_out;
  auto* opt_report = plot_cmd->add_option("--report", plot_report, "report.json from eval");
  auto* opt_sweep = plot_cmd->add_option("--sweep", plot_sweep, "sweep.csv from sweep");
  opt_report->excludes(opt_sweep);
  plot_cmd->add_option("--out", plot_out, "Output SVG path")->required();

  // distort
  auto* distort_cmd = app.add_subcommand("distort", "Apply a training corruption to an image");
  std::string distort_kind = "noise", distort_in, distort_out;
  double distort_sigma = 0.0;
  std::uint64_t distort_seed = 0;
  distort_cmd->add_option("--kind", distort_kind, "Corruption kind")
      ->check(CLI::IsMember({"none", "noise", "blur"}))
      ->capture_default_str();
  distort_cmd->add_option("--sigma", distort_sigma, "Noise std ([0,1] units) or blur std (pixels)")
      ->capture_default_str();
  distort_cmd->add_option("--seed", distort_seed, "Noise seed")->capture_default_str();
  distort_cmd->add_option("input", distort_in, "Input image")->required();
  distort_cmd->add_option("output", distort_out, "Output image")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return 0;
    }
    std::vector<std::string> args(argv + 1, argv + argc);
    err << "perceptlab: " << e.what() << '\n' << detail::suggest(app, args)
        << "Run with --help for usage.\n";
    return 2;
  }

  try {
    if (*train_cmd) {
      const TrainConfig cfg = train_config_from_json(read_json_file(train_config));
      const long long every = std::max(1, cfg.steps / 20);
      TrainOptions opts;
      opts.out_dir = train_out;
      if (!quiet) {
        opts.on_step = [&](long long s, double loss) {
          if ((s + 1) % every == 0) out << "step " << s + 1 << " loss " << loss << '\n';
        };
      }
      const Checkpoint ckpt = train(cfg, opts);
      out << "trained " << ckpt.step << " steps; final loss "
          << format_number(ckpt.loss_history.back().loss) << "; wrote "
          << (fs::path(train_out) / "model.ckpt").string() << '\n';
    } else if (*eval_cmd) {
      EvalOptions opts;
      opts.distance = distance_kind_from_string(eval_distance);
      opts.log = &err;
      const CorrelationReport r =
          evaluate_alignment(detail::resolve_checkpoint(eval_ckpt), eval_iqa, opts);
      const fs::path json_path = eval_out;
      save_report(r, json_path, eval_csv.empty() ? companion_csv(json_path) : fs::path(eval_csv));
      if (!eval_plot.empty()) emit_layer_plot(r, eval_plot);
      out << "encoder layer " << r.encoder_layer << ": |rho| = "
          << format_number(r.at(r.encoder_layer).abs_rho) << "; peak " << r.peak().layer_id
          << " |rho| = " << format_number(r.peak().abs_rho) << "; wrote " << json_path.string()
          << '\n';
    } else if (*sweep_cmd) {
      SweepSpec spec = sweep_spec_from_json(read_json_file(sweep_config));
      if (!sweep_grid.empty()) spec.grid = detail::parse_grid(sweep_grid);
      if (sweep_seeds > 0) spec.seeds = sweep_seeds;
      spec.iqa_root = sweep_iqa;
      spec.out_dir = sweep_out;
      const SweepResult r = run_sweep(spec, &err);
      for (const auto& row : r.rows) {
        out << to_string(r.objective) << ' ' << format_number(row.param) << ": ";
        if (row.error) {
          out << "FAILED (" << *row.error << ")\n";
        } else {
          out << "encoder |rho| " << format_number(row.encoder_abs_rho)
              << (row.reused ? " (reused)" : "") << '\n';
        }
      }
      return r.any_failed() ? 1 : 0;
    } else if (*plot_cmd) {
      const fs::path input = plot_report.empty() ? plot_sweep : plot_report;
      if (!input.empty() && fs::weakly_canonical(companion_csv(plot_out)) == fs::weakly_canonical(input)) {
        throw ArgumentError("--out would overwrite the input with the companion CSV; choose another name");
      }
      if (!plot_report.empty()) {
        emit_layer_plot(load_report(plot_report), plot_out);
      } else if (!plot_sweep.empty()) {
        std::ifstream in(plot_sweep);
        if (!in) throw FormatError("cannot open " + plot_sweep);
        emit_sweep_plot(read_sweep_csv(in), plot_out);
      } else {
        err << "perceptlab plot: one of --report or --sweep is required\n";
        return 2;
      }
      out << "wrote " << plot_out << " and " << companion_csv(plot_out).string() << '\n';
    } else if (*distort_cmd) {
      const DistortionSpec spec{distortion_kind_from_string(distort_kind), distort_sigma};
      save_image(distort_out, apply_distortion(load_image(distort_in), spec, distort_seed));
    }
  } catch (const std::exception& e) {
    err << "perceptlab: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace perceptlab
