#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ppgmm/config.hpp"
#include "ppgmm/data.hpp"
#include "ppgmm/em.hpp"
#include "ppgmm/ga.hpp"
#include "ppgmm/metrics.hpp"
#include "ppgmm/projection.hpp"
#include "ppgmm/serialize.hpp"
#include "ppgmm/svg.hpp"

namespace ppgmm {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

namespace cli_detail {

inline std::string dashed(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

/// Setting flags registered on one subcommand, plus an optional --config file.
struct SettingFlags {
  std::string config_path;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value settings file; flags override it");
    for (const auto& [key, help] : setting_keys()) {
      auto* opt = app->add_option("--" + dashed(key) + (key.find('_') != std::string::npos ? ",--" + key : ""),
                                  values[key], help);
      options.emplace_back(key, opt);
    }
  }

  RunConfig resolve() const {
    Settings s = config_path.empty() ? Settings{} : load_settings(config_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) s[key] = values.at(key);
    }
    return make_run_config(s);
  }
};

/// Loads a CSV; when no label column is named, a header column called "class"
/// is taken as the labels.
inline Dataset load_input(const std::string& path, bool has_header, std::optional<std::string> label,
                          Eigen::Index min_columns = 2) {
  if (path.empty()) throw UsageError("no input file given (set 'input' or pass --input)");
  if (!std::filesystem::exists(path)) throw DataError("input file '" + path + "' does not exist");
  if (!label && has_header) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (!first.empty() && first.back() == '\r') first.pop_back();
    for (const auto& cell : detail::split_csv_line(first)) {
      if (trim(cell) == "class") label = "class";
    }
  }
  return load_csv(path, has_header, label, min_columns);
}

inline void require_seed(const RunConfig& cfg) {
  if (!cfg.seed_given) throw UsageError("a seed is required (set 'seed' or pass --seed)");
}

inline std::filesystem::path prepare_out_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string str(const std::filesystem::path& p) { return p.string(); }

inline ModelDocument load_model(const std::string& path) {
  if (path.empty()) throw UsageError("no model file given (pass --model)");
  return model_from_json(read_json_file(path));
}

/// Input data preprocessed the way the model was fitted, or per config when the
/// model carries no preprocessing block.
inline Dataset preprocessed_input(const RunConfig& cfg, const ModelDocument& doc) {
  const Dataset raw = load_input(cfg.input, cfg.has_header, cfg.label_column);
  if (raw.p() != doc.model.dimension()) {
    throw DataError("input has " + std::to_string(raw.p()) + " features but the model has dimension " +
                    std::to_string(doc.model.dimension()));
  }
  const Preprocessor pre = doc.preprocessing ? *doc.preprocessing : fit_preprocessor(raw, cfg.preprocess);
  return apply_preprocessor(pre, raw);
}

inline void check_d(const RunConfig& cfg, Eigen::Index p) {
  if (cfg.d >= p) throw UsageError("d = " + std::to_string(cfg.d) + " must be smaller than p = " + std::to_string(p));
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Commands

struct SimulateArgs {
  std::string kind;
  long long n = 0;
  long long p = 10;
  std::uint64_t seed = 0;
  std::string out;
  bool no_noise = false;
};

inline void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  Dataset data;
  if (a.kind == "triangle") {
    data = simulate_triangle(a.n > 0 ? a.n : 500, a.p, a.seed);
  } else if (a.kind == "waveform") {
    WaveformOptions opt;
    opt.noise = !a.no_noise;
    data = simulate_waveform(a.n > 0 ? a.n : 400, a.seed, opt);
  } else {
    throw UsageError("unknown simulation '" + a.kind + "' (expected triangle or waveform)");
  }
  save_csv(a.out, data);
  out << "wrote " << a.out << " (" << data.n() << " rows, " << data.p() << " features)\n";
}

inline void cmd_fit(const RunConfig& cfg, std::ostream& out) {
  using namespace cli_detail;
  require_seed(cfg);
  const Dataset raw = load_input(cfg.input, cfg.has_header, cfg.label_column);
  const Preprocessor pre = fit_preprocessor(raw, cfg.preprocess);
  const Dataset x = apply_preprocessor(pre, raw);
  const auto sel = select_model(x, cfg.g_min, cfg.g_max, cfg.models, cfg.seed, SelectOptions{cfg.em, cfg.threads});
  const auto dir = prepare_out_dir(cfg);
  json model = model_to_json(sel.best.model, pre, raw.feature_names);
  model["provenance"] = provenance_json(cfg.hash, cfg.seed);
  json report = fit_report_to_json(sel, x.n());
  report["provenance"] = provenance_json(cfg.hash, cfg.seed);
  write_json_file(str(dir / "model.json"), model);
  write_json_file(str(dir / "fit_report.json"), report);
  out << "best model: G=" << sel.best.model.components() << " " << to_string(sel.best.model.model())
      << " bic=" << fmt(sel.best.bic) << "\n";
}

inline void cmd_pursue(const RunConfig& cfg, const std::string& model_path, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  require_seed(cfg);
  const ModelDocument doc = load_model(model_path);
  const Dataset x = preprocessed_input(cfg, doc);
  check_d(cfg, x.p());
  GAConfig ga = cfg.ga;
  if (cfg.pca_start) ga.initial_genomes.push_back(encode(pca_basis(x, cfg.d)).angles);
  PPResult res = run_ppgmmga(doc.model, cfg.d, cfg.estimator, ga);
  if (doc.model.components() == 1 || std::abs(res.best_fitness) < 1e-8) {
    res.warnings.push_back("negentropy is approximately zero: no non-Gaussian structure was found");
  }
  const Dataset z = project_data(x, res.best_basis);
  const auto dir = prepare_out_dir(cfg);
  json report = pp_result_to_json(res);
  report["provenance"] = provenance_json(cfg.hash, cfg.seed);
  write_json_file(str(dir / "pp_result.json"), report);
  write_text_file(str(dir / "basis.csv"), basis_to_csv(res.best_basis));
  write_text_file(str(dir / "genome.csv"), genome_to_csv(res.best_genome));
  write_text_file(str(dir / "trace.csv"), trace_to_csv(res.fitness_trace));
  save_csv(str(dir / "projected.csv"), z);
  for (const auto& w : res.warnings) err << "warning: " << w << "\n";
  out << to_string(cfg.estimator.kind) << " negentropy " << fmt(res.best_fitness) << " after " << res.generations_run
      << " generations\n";
}

inline void cmd_compare(const RunConfig& cfg, const std::string& model_path, std::ostream& out) {
  using namespace cli_detail;
  require_seed(cfg);
  const ModelDocument doc = load_model(model_path);
  const Dataset x = preprocessed_input(cfg, doc);
  check_d(cfg, x.p());
  CompareOptions opt;
  opt.ga = cfg.ga;
  opt.mc_samples = cfg.estimator.mc_samples;
  opt.mc_seed = cfg.estimator.mc_seed;
  opt.threads = cfg.threads;
  const auto report = compare_estimators(doc.model, x, cfg.d, opt);
  json j = comparison_to_json(report);
  j["provenance"] = provenance_json(cfg.hash, cfg.seed);
  const auto dir = prepare_out_dir(cfg);
  write_json_file(str(dir / "comparison.json"), j);
  out << "estimator  negentropy  mc_negentropy  relative\n";
  for (const auto& col : report.columns) {
    auto show = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); };
    out << col.label << "  " << show(col.negentropy) << "  " << show(col.mc_negentropy) << "  " << show(col.relative);
    if (!col.error.empty()) out << "  (" << col.error << ")";
    out << "\n";
  }
}

inline void cmd_project(const RunConfig& cfg, const std::string& model_path, const std::string& basis_path,
                        const std::string& out_path, std::ostream& out) {
  using namespace cli_detail;
  const ModelDocument doc = load_model(model_path);
  const Dataset x = preprocessed_input(cfg, doc);
  if (basis_path.empty()) throw UsageError("no basis file given (pass --basis)");
  const Basis b = load_basis_csv(basis_path);
  const Dataset z = project_data(x, b);
  const std::string target = out_path.empty() ? str(prepare_out_dir(cfg) / "projected.csv") : out_path;
  save_csv(target, z);
  out << "wrote " << target << "\n";
}

struct PlotArgs {
  std::string input;
  std::string out;
  std::string basis;
  std::string model;
  std::string label_column;
  std::string title;
  int bins = 0;
};

inline void cmd_plot(const PlotArgs& a, std::ostream& out) {
  using namespace cli_detail;
  const auto label = a.label_column.empty() ? std::nullopt : std::optional<std::string>(a.label_column);
  const Dataset z = load_input(a.input, true, label, 1);
  PlotOptions opt;
  opt.bins = a.bins;
  opt.title = a.title;
  std::string svg;
  if (z.p() == 1) {
    svg = histogram_svg(z, opt);
  } else if (z.p() == 2) {
    if (!a.basis.empty()) {
      opt.biplot = load_basis_csv(a.basis);
      if (!a.model.empty()) opt.arrow_names = load_model(a.model).feature_names;
    }
    svg = scatter_svg(z, opt);
  } else {
    throw UsageError("cannot plot d = " + std::to_string(z.p()) +
                     " directly; project onto pairs of columns and plot them pairwise");
  }
  write_text_file(a.out, svg);
  out << "wrote " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Projection pursuit based on Gaussian mixtures and genetic algorithms", "ppgmmga"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "write a simulated data set as CSV");
  simulate->add_option("kind", sim.kind, "triangle or waveform")->required();
  simulate->add_option("--n", sim.n, "number of rows (default 500 triangle, 400 waveform)");
  simulate->add_option("--p", sim.p, "number of features for triangle data")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "random seed")->required();
  simulate->add_option("--out", sim.out, "output CSV path")->required();
  simulate->add_flag("--no-noise", sim.no_noise, "waveform without additive noise");

  cli_detail::SettingFlags fit_flags, pursue_flags, compare_flags, project_flags;
  auto* fit = app.add_subcommand("fit", "select a Gaussian mixture by BIC and write model.json");
  fit_flags.attach(fit);

  std::string model_path;
  auto* pursue = app.add_subcommand("pursue", "search for the maximum-negentropy projection");
  pursue_flags.attach(pursue);
  pursue->add_option("--model", model_path, "model JSON from 'fit'")->required();

  auto* compare = app.add_subcommand("compare", "compare UT, VAR, SOTE and PCA projections");
  compare_flags.attach(compare);
  compare->add_option("--model", model_path, "model JSON from 'fit'")->required();

  std::string basis_path, project_out;
  auto* project = app.add_subcommand("project", "project data onto a stored basis");
  project_flags.attach(project);
  project->add_option("--model", model_path, "model JSON supplying the preprocessing")->required();
  project->add_option("--basis", basis_path, "basis CSV")->required();
  project->add_option("--out", project_out, "output CSV (default <out_dir>/projected.csv)");

  PlotArgs plot_args;
  auto* plot = app.add_subcommand("plot", "render projected data as SVG");
  plot->add_option("projected", plot_args.input, "projected CSV")->required();
  plot->add_option("--out", plot_args.out, "output SVG path")->required();
  plot->add_option("--basis", plot_args.basis, "basis CSV for biplot arrows");
  plot->add_option("--model", plot_args.model, "model JSON supplying arrow names");
  plot->add_option("--label-column", plot_args.label_column, "label column (default: 'class' if present)");
  plot->add_option("--bins", plot_args.bins, "histogram bins for 1-D data");
  plot->add_option("--title", plot_args.title, "plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) cmd_simulate(sim, out);
    if (fit->parsed()) cmd_fit(fit_flags.resolve(), out);
    if (pursue->parsed()) cmd_pursue(pursue_flags.resolve(), model_path, out, err);
    if (compare->parsed()) cmd_compare(compare_flags.resolve(), model_path, out);
    if (project->parsed()) cmd_project(project_flags.resolve(), model_path, basis_path, project_out, out);
    if (plot->parsed()) cmd_plot(plot_args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace ppgmm
