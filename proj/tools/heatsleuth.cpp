#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "heatsleuth/config.hpp"
#include "heatsleuth/errors.hpp"
#include "heatsleuth/experiment.hpp"
#include "heatsleuth/plots.hpp"
#include "heatsleuth/spectral.hpp"

namespace fs = std::filesystem;
using namespace heatsleuth;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

// Splits trailing `--key=value` arguments off before CLI11 sees them.
std::vector<std::pair<std::string, std::string>> take_overrides(int& argc, char** argv,
                                                                const std::set<std::string>& known) {
  std::vector<std::pair<std::string, std::string>> overrides;
  int out = 1;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    const std::size_t eq = arg.find('=');
    if (arg.rfind("--", 0) == 0 && eq != std::string::npos) {
      const std::string key = arg.substr(2, eq - 2);
      if (!known.count(key)) {
        overrides.emplace_back(key, arg.substr(eq + 1));
        continue;
      }
    }
    argv[out++] = argv[i];
  }
  argc = out;
  return overrides;
}

void print_warnings(const std::vector<std::string>& warnings, const std::string& prefix = "") {
  for (const std::string& w : warnings) std::cerr << prefix << "warning: " << w << "\n";
}

void run_one(const ExperimentConfig& config, const fs::path& dir, std::mutex& io) {
  const RunResult result = run_experiment(config);
  const RunArtifacts art = write_artifacts(result, dir);
  std::lock_guard<std::mutex> lock(io);
  print_warnings(result.warnings, "[seed " + std::to_string(config.seed) + "] ");
  std::printf("seed %llu: %zu windows, stop=%s, final sensor %.6f rad -> %s\n",
              static_cast<unsigned long long>(config.seed), result.path.windows.size(),
              std::string(to_string(result.path.stop)).c_str(), result.path.final_theta,
              art.directory.string().c_str());
  const ChainSummary& last = result.summaries.back();
  std::printf("  final posterior mean xi:");
  for (Eigen::Index i = 0; i < last.xi_mean.size(); ++i) std::printf(" %.6f", last.xi_mean[i]);
  std::printf("  (terminal acceptance %.3f)\n", last.terminal_acceptance);
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out, int jobs, bool allow_inverse_crime,
            std::vector<std::pair<std::string, std::string>> overrides) {
  if (allow_inverse_crime) overrides.emplace_back("allow_inverse_crime", "true");
  if (seed) overrides.emplace_back("seed", std::to_string(*seed));
  if (out) overrides.emplace_back("out", *out);
  const ExperimentConfig base = load_config(config_path, overrides);
  if (jobs < 1) throw ValidationError("--jobs must be >= 1");
  std::mutex io;
  if (jobs == 1) {
    run_one(base, base.out_dir, io);
    return 0;
  }
  // independent seeds, one subdirectory each
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int j = 0; j < jobs; ++j) {
    ExperimentConfig c = base;
    c.seed = base.seed + static_cast<std::uint64_t>(j);
    if (!c.sampler_seed_set) c.sampler_seed = c.seed;
    const fs::path dir = fs::path(base.out_dir) / ("seed_" + std::to_string(c.seed));
    workers.emplace_back([c, dir, &io, &errors, j] {
      try {
        run_one(c, dir, io);
      } catch (...) {
        errors[static_cast<std::size_t>(j)] = std::current_exception();
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return 0;
}

int cmd_plot(const std::string& run_dir) {
  const std::vector<fs::path> files = emit_plots(run_dir);
  std::printf("wrote %zu SVG files to %s\n", files.size(), run_dir.c_str());
  return 0;
}

int cmd_oracle(const std::string& config_path, std::optional<std::string> out,
               std::vector<std::pair<std::string, std::string>> overrides) {
  if (out) overrides.emplace_back("out", *out);
  overrides.emplace_back("allow_inverse_crime", "true");  // only the fine grid is used here
  const ExperimentConfig c = load_config(config_path, overrides);
  const std::vector<double> times = {0.05, 0.1, 0.2};
  const OracleReport r =
      oracle_compare(c.truth, c.strength, c.fine, c.dt, times, 10, c.basis_size, c.load_points);
  fs::create_directories(c.out_dir);
  {
    std::ofstream os(fs::path(c.out_dir) / "oracle_compare.csv");
    if (!os) throw std::runtime_error("cannot write oracle_compare.csv");
    write_oracle_csv(os, r);
  }
  {
    std::ofstream os(fs::path(c.out_dir) / "basis.csv");
    if (!os) throw std::runtime_error("cannot write basis.csv");
    write_basis_csv(os, build_basis(c.basis_size));
  }
  std::printf("FEM (%d x %d elements, dt=%g) vs eigenfunction series (%d terms)\n", c.fine.n_r,
              c.fine.n_theta, c.dt, c.basis_size);
  std::printf("%8s %8s %12s %12s %12s %9s\n", "t", "theta", "fem", "series", "partial", "rel");
  for (const OracleRow& row : r.rows) {
    std::printf("%8.4f %8.4f %12.6f %12.6f %12.6f %9.4f\n", row.t, row.theta, row.fem, row.series,
                row.partial_sum, std::abs(row.fem - row.series) / std::abs(row.series));
  }
  std::printf("max relative %.4f, L2 relative %.4f, max relative to peak %.4f\n", r.max_relative,
              r.l2_relative, r.max_relative_to_peak);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::set<std::string> own = {"seed", "out", "jobs", "allow-inverse-crime"};
  const std::vector<std::pair<std::string, std::string>> overrides = take_overrides(argc, argv, own);

  CLI::App app{"Moving-sensor source identification for the heat equation on the unit disc"};
  app.require_subcommand(1);
  app.footer("Any other --key=value is applied as a config override.");

  std::string config_path, run_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int jobs = 1;
  bool allow_inverse_crime = false;

  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out, "output directory");
  run->add_option("--jobs", jobs, "run seeds S..S+J-1 in separate subdirectories");
  run->add_flag("--allow-inverse-crime", allow_inverse_crime,
                "allow the truth grid to be no finer than the inversion grid");

  CLI::App* plot = app.add_subcommand("plot", "render SVG plots of a run directory");
  plot->add_option("run_dir", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  CLI::App* oracle = app.add_subcommand("oracle-compare", "FEM vs eigenfunction series report");
  oracle->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  oracle->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run) return cmd_run(config_path, seed, out, jobs, allow_inverse_crime, overrides);
    if (*oracle) return cmd_oracle(config_path, out, overrides);
    if (!overrides.empty()) throw ValidationError("plot takes no config overrides");
    return cmd_plot(run_dir);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
