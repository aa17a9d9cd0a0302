#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "heatsleuth/config.hpp"
#include "heatsleuth/flux_response.hpp"
#include "heatsleuth/polar_fem.hpp"
#include "heatsleuth/strategy.hpp"

namespace heatsleuth {

// Independent generator for a named purpose, derived from the master seed
// and a fixed label ("truth-noise", "sampler").
Rng make_stream(std::uint64_t seed, std::string_view label);

// Noise-free flux of the true source on the fine grid. Backward Euler states
// are computed on demand and kept, so queries may come in any order.
class TruthSolution : public FluxSource {
 public:
  TruthSolution(const PolarMesh& mesh, const ShapeParams& shape, double strength, double dt,
                int load_points = LoadAssembler::kPointsPerDirection);

  double flux(double theta, int step) override;
  const PolarMesh& mesh() const { return mesh_; }
  const FieldState& state(int step);

 private:
  PolarMesh mesh_;
  std::unique_ptr<HeatStepper> stepper_;
  Eigen::VectorXd load_;
  std::vector<FieldState> states_;
};

// Coarse-grid forward model for one shape family. Each likelihood
// evaluation assembles the load of the proposed shape and applies the
// precomputed flux-response rows.
class InversionModel {
 public:
  InversionModel(const PolarMesh& mesh, double dt, ShapeKind kind, int fourier_order,
                 double strength, int load_points = LoadAssembler::kPointsPerDirection);

  // Predictions at every record of `data`; the probe holds the flux at
  // theta - dtheta, theta, theta + dtheta at the request's end step.
  ForwardMap forward(const MeasurementSet& data, const InferenceRequest& request);
  // Flux of shape `z` (unconstrained coordinates) at the given probes, or
  // nullopt when z maps to an inadmissible shape.
  std::optional<Eigen::VectorXd> predict(const Eigen::VectorXd& z, std::span<const FluxProbe> probes);

  ShapeKind kind() const { return kind_; }
  int fourier_order() const { return order_; }
  FluxResponse& response() { return response_; }

 private:
  std::optional<Eigen::VectorXd> free_load(const Eigen::VectorXd& z) const;

  PolarMesh mesh_;
  ShapeKind kind_;
  int order_;
  double strength_;
  LoadAssembler loads_;
  FluxResponse response_;
};

// Per-component mean and standard deviation over the retained samples
// (iterations after N1) of z and of the physical parameters xi.
struct ChainSummary {
  int retained = 0;
  Eigen::VectorXd z_mean, z_std, xi_mean, xi_std;
  double acceptance_rate = 0.0;
  double terminal_acceptance = 0.0;
};

ChainSummary summarize_chain(const ChainResult& chain, ShapeKind kind, int fourier_order,
                             int burn_in);

struct RunResult {
  ExperimentConfig config;
  StrategyParams strategy;  // on the refined grid
  StrategyResult path;
  std::vector<Measurement> truth_flux;  // noise-free values at the data points
  std::vector<ChainSummary> summaries;  // one per window
  std::vector<std::string> warnings;
};

// Inference callback for the strategy loop: adaptive pCN on all data so far,
// carrying the tuned step sizes across windows. The chain start is the best
// (misfit plus prior term) of the warm start candidates, per warm_start, and
// `start_draws` prior draws; the best warm candidate and the four best draws
// are each polished by the simplex and the lowest result wins.
InferenceFn make_inference(const ExperimentConfig& config, InversionModel& model, Rng& sampler_rng);

// Truth on the fine grid, strategy with coarse-grid inversion.
RunResult run_experiment(const ExperimentConfig& config);

// Same data budget with the sensor held at theta0 (see run_fixed_sensor).
RunResult run_fixed_baseline(const ExperimentConfig& config, const RunResult& moving);

// Euclidean distance in xi with the angle component (index 1 for the
// three-parameter kinds) compared on the circle.
double parameter_error(ShapeKind kind, const Eigen::VectorXd& xi, std::span<const double> truth);

struct RunArtifacts {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;
};

// Writes chain_window_k.csv, reconstruction_window_k.csv, truth_boundary.csv,
// movement.csv, data.csv, truth_flux.csv, config.cfg and summary.json.
RunArtifacts write_artifacts(const RunResult& result, const std::filesystem::path& dir);

// Writes `iter,accepted,phi,z_1..z_p,xi_1..xi_p` rows.
void write_chain_csv(std::ostream& os, const ChainResult& chain, ShapeKind kind, int fourier_order);

// Boundary polyline `x,y` of a shape, closed (first point repeated).
void write_boundary_csv(std::ostream& os, const ShapeParams& shape, int samples = 360);

// FEM boundary flux against the eigenfunction series at `angles` uniform
// angles and the given times (whole multiples of dt). `series` is the
// steady part in closed form plus the transient series; `partial_sum` is the
// plain N-term partial sum, kept for reference.
struct OracleRow {
  double t = 0.0;
  double theta = 0.0;
  double fem = 0.0;
  double series = 0.0;
  double partial_sum = 0.0;
};

struct OracleReport {
  GridSpec grid;
  std::vector<OracleRow> rows;
  double max_relative = 0.0;          // max |fem - series| / |series|
  double l2_relative = 0.0;           // ||fem - series|| / ||series|| over all rows
  double max_relative_to_peak = 0.0;  // max |fem - series| / max |series| at the same t
  double max_relative_partial = 0.0;  // max |fem - partial_sum| / |partial_sum|
};

OracleReport oracle_compare(const ShapeParams& shape, double strength, GridSpec grid, double dt,
                            const std::vector<double>& times, int angles, int basis_size,
                            int load_points = LoadAssembler::kPointsPerDirection);

void write_oracle_csv(std::ostream& os, const OracleReport& report);

}  // namespace heatsleuth
