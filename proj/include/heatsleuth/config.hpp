#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "heatsleuth/sampler.hpp"
#include "heatsleuth/shape.hpp"
#include "heatsleuth/strategy.hpp"

namespace heatsleuth {

// Element counts of a polar mesh (see build_mesh).
struct GridSpec {
  int n_r = 0;
  int n_theta = 0;
};

// Nodes per dimension -> elements: N nodes gives N/2 elements (integer
// division), so 23 -> 11, 20 -> 10, 15 -> 7.
GridSpec grid_from_nodes(int nodes);

// Where window k > 0 starts its chain: the prior start point, the previous
// posterior mean, or the previous chain state (thinned, plus the mean) that
// fits the enlarged data set best.
enum class WarmStart { Prior, Mean, Best };

struct ExperimentConfig {
  std::string name;
  ShapeParams truth;
  double strength = 50.0;  // b
  double sigma = 0.05;

  GridSpec fine{11, 11};
  GridSpec coarse{10, 10};
  double dt = 1.0 / 400.0;  // base time step; windows are counted in it
  int time_refine = 0;      // 0: smallest factor making every travel time whole
  int load_points = 5;

  SamplerConfig sampler;
  StrategyParams strategy;  // window_steps and dt on the base grid
  bool delta_theta_auto = true;
  double theta0 = 0.0;

  WarmStart warm_start = WarmStart::Best;
  int start_draws = 1024;        // prior draws scored alongside the warm start candidates
  int polish_evals = 1000;       // simplex evaluations spent on each chain start; 0: off
  std::vector<double> xi_start;  // empty: prior mean (or the unit-half circle for Fourier)

  std::uint64_t seed = 1;
  std::uint64_t sampler_seed = 0;  // 0: use seed
  bool sampler_seed_set = false;
  std::string out_dir = "run";
  bool allow_inverse_crime = false;
  int basis_size = 200;

  std::vector<std::string> warnings;
};

// Paper settings for one example. Circle, Kite and FourLeaf use the
// three-parameter setup; FourierStar is the peanut example.
ExperimentConfig default_config(ShapeKind kind);

// Parses the flat `key = value` format. Values may be comma-separated lists
// of arithmetic expressions in numbers and `pi`. Later keys override earlier
// ones; `overrides` (from --key=value) are applied last. Throws
// ValidationError naming the line and key on any problem.
ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Checks invariants that span several keys (inverse-crime guard, sigma >= 0,
// travel times on the grid, ...) and fills in the derived fields.
void finalize(ExperimentConfig& config);

// Evaluates an arithmetic expression such as `26*pi/40` or `1/400`.
double evaluate_expression(std::string_view text);

// Smallest r >= 1 such that every travel time the movement rule can produce
// is a whole number of steps of dt / r. Throws if none up to 1000.
int auto_time_refine(const StrategyParams& params, double dt);

// The strategy parameters on the refined grid actually used by the run.
StrategyParams refined_strategy(const ExperimentConfig& config);
int effective_refine(const ExperimentConfig& config);

// Canonical `key = value` dump of every setting (re-parseable).
std::string to_text(const ExperimentConfig& config);

}  // namespace heatsleuth
