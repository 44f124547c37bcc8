// Command-line front end for the residual feature integration lab.
//
//   run       execute every (task, n, seed, estimator) cell of a config
//   rates     run with rate-study preconditions and print fitted slopes
//   gap       print the negative-transfer gap report of a finished run
//   plot      emit plot-ready CSV or SVG from a finished run
//   validate  check a config without running anything
//
// Exit codes: 0 success, 1 validation error, 2 run finished but some cells
// failed, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "refine/experiment.hpp"
#include "refine/serialize.hpp"

namespace fs = std::filesystem;
using namespace refine;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int workers = 1;
  std::uint64_t seed_offset = 0;
  std::string format = "csv";
};

fs::path resolve_out_dir(const ExperimentConfig& cfg,
                         const std::string& override_dir) {
  fs::path out = override_dir.empty() ? fs::path(cfg.out_dir)
                                      : fs::path(override_dir);
  if (out.empty())
    throw ConfigError("no output directory (set out_dir or pass --out)");
  return out;
}

ResultsFile read_results(const fs::path& out_dir) {
  const fs::path path = out_dir / "results.json";
  if (!fs::exists(path))
    throw IoError("no results file at " + path.string() +
                  " (run the experiment first)");
  try {
    return nlohmann::json::parse(read_text_file(path)).get<ResultsFile>();
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError("cannot read " + path.string() + ": " + e.what());
  }
}

void print_run_summary(const ResultsFile& results, const RunStats& stats,
                       const fs::path& out_dir) {
  std::printf("experiment: %s\n", results.experiment.c_str());
  std::printf("cells: %ld total, %ld ok, %ld failed (executed %ld, cached %ld)\n",
              results.cells_total, results.cells_total - results.cells_failed,
              results.cells_failed, stats.executed, stats.skipped);
  for (const auto& cell : results.cells)
    if (cell.status != "ok")
      std::printf("  failed %s/%s n=%ld seed=%llu: %s\n", cell.task.c_str(),
                  cell.estimator.c_str(), cell.n,
                  static_cast<unsigned long long>(cell.seed),
                  cell.error.c_str());
  std::printf("results: %s\n", (out_dir / "results.json").string().c_str());
  std::printf("wall: %.1fs\n", stats.wall_seconds);
}

void print_rate_summaries(const ResultsFile& results) {
  for (const auto& rs : results.rates) {
    if (rs.has_fit)
      std::printf("rate %s/%s: slope=%.3f intercept=%.3f residual=%.3f\n",
                  rs.task.c_str(), rs.estimator.c_str(), rs.fit.slope,
                  rs.fit.intercept, rs.fit.residual_std);
    else
      std::printf("rate %s/%s: no fit (%zu usable points)\n", rs.task.c_str(),
                  rs.estimator.c_str(), rs.table.size());
  }
}

void print_gap_reports(const ResultsFile& results) {
  if (results.gaps.empty()) {
    std::printf(
        "no gap summaries: the config needs refine, scratch and probe "
        "estimators with all cells finished\n");
    return;
  }
  for (const auto& [n, report] : results.gaps) {
    std::printf(
        "n=%ld: mean_gap=%.6g max_gap=%.6g frac_above_tolerance=%.3f "
        "worst=%s seed=%llu\n",
        n, report.mean_gap, report.max_gap, report.frac_above_tolerance,
        report.worst_task.c_str(),
        static_cast<unsigned long long>(report.worst_seed));
    for (const auto& task : report.per_task)
      std::printf(
          "  %s: refine=%.6g scratch=%.6g probe=%.6g gap=%.6g\n",
          task.task.c_str(), task.mean_refine, task.mean_scratch,
          task.mean_probe, task.gap);
  }
}

int cmd_run(const CommonArgs& args, bool rates_mode) {
  ExperimentConfig cfg = load_config(args.config_path);
  RunOptions options;
  options.workers = args.workers;
  options.seed_offset = args.seed_offset;
  options.out_dir_override = args.out_dir;
  RunStats stats;
  ResultsFile results = rates_mode ? run_rates(cfg, options, &stats)
                                   : run_experiment(cfg, options, &stats);
  const fs::path out_dir = resolve_out_dir(cfg, args.out_dir);
  print_run_summary(results, stats, out_dir);
  if (rates_mode) print_rate_summaries(results);
  if (!results.gaps.empty()) print_gap_reports(results);
  return results.cells_failed > 0 ? 2 : 0;
}

int cmd_gap(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  cfg.validate();
  ResultsFile results = read_results(resolve_out_dir(cfg, args.out_dir));
  print_gap_reports(results);
  return results.cells_failed > 0 ? 2 : 0;
}

int cmd_plot(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  cfg.validate();
  const fs::path base = resolve_out_dir(cfg, std::string{});
  const fs::path plot_dir =
      args.out_dir.empty() ? base / "plots" : fs::path(args.out_dir);
  ResultsFile results = read_results(base);
  emit_plot_data(results, args.format, plot_dir);
  std::printf("wrote %s plot data to %s\n", args.format.c_str(),
              plot_dir.string().c_str());
  return 0;
}

int cmd_validate(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  cfg.validate();
  const std::size_t cells = cfg.tasks.size() * cfg.n_grid.size() *
                            cfg.seeds.size() * cfg.estimators.size();
  std::printf("config ok: %zu task(s) x %zu n value(s) x %zu seed(s) x %zu "
              "estimator(s) = %zu cells\n",
              cfg.tasks.size(), cfg.n_grid.size(), cfg.seeds.size(),
              cfg.estimators.size(), cells);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"residual feature integration lab"};
  app.set_version_flag("--version", "0.1.0");
  app.require_subcommand(1);

  CommonArgs args;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "experiment config (JSON)")
        ->required();
  };
  auto add_out = [&](CLI::App* sub, const char* help) {
    sub->add_option("--out", args.out_dir, help);
  };
  auto add_exec = [&](CLI::App* sub) {
    sub->add_option("--workers", args.workers, "worker threads (default 1)");
    sub->add_option("--seed-offset", args.seed_offset,
                    "added to every configured seed");
  };

  auto* run = app.add_subcommand("run", "execute the full cell grid");
  add_config(run);
  add_out(run, "override the config's output directory");
  add_exec(run);

  auto* rates = app.add_subcommand(
      "rates", "run a rate study (needs >= 3 sample sizes and >= 3 seeds)");
  add_config(rates);
  add_out(rates, "override the config's output directory");
  add_exec(rates);

  auto* gap = app.add_subcommand(
      "gap", "print the negative-transfer gap report of a finished run");
  add_config(gap);
  add_out(gap, "directory holding results.json");

  auto* plot =
      app.add_subcommand("plot", "emit plot data from a finished run");
  add_config(plot);
  add_out(plot, "plot output directory (default <out_dir>/plots)");
  plot->add_option("--format", args.format, "csv or svg (default csv)");

  auto* validate =
      app.add_subcommand("validate", "check a config without running");
  add_config(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return cmd_run(args, false);
    if (*rates) return cmd_run(args, true);
    if (*gap) return cmd_gap(args);
    if (*plot) return cmd_plot(args);
    return cmd_validate(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
