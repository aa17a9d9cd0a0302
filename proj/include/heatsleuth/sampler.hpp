#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace heatsleuth {

using Rng = std::mt19937_64;

// Forward-model output for one parameter vector: predictions at the data
// points plus optional extra probes (e.g. flux at the end of the window).
struct Prediction {
  Eigen::VectorXd data;
  Eigen::VectorXd probe;
};

// Maps unconstrained parameters z to predictions; nullopt marks an
// inadmissible parameter (certain rejection).
using ForwardMap = std::function<std::optional<Prediction>(const Eigen::VectorXd& z)>;

struct LikelihoodSpec {
  double sigma = 1.0;
  Eigen::VectorXd data;
  ForwardMap forward;
};

void validate(const LikelihoodSpec& lik);

// Phi = |d - g|^2 / (2 sigma^2); +inf for inadmissible parameters.
double misfit(const Eigen::VectorXd& residual, double sigma);
double misfit(const Eigen::VectorXd& z, const LikelihoodSpec& lik);

Eigen::VectorXd standard_normal(Eigen::Index dim, Rng& rng);

// z* = sqrt(1 - beta^2) z + beta w, w ~ N(0, diag(prior_diag)), with the
// standard normal draw supplied by the caller.
Eigen::VectorXd pcn_propose(const Eigen::VectorXd& z, double beta,
                            std::span<const double> prior_diag, const Eigen::VectorXd& normal);
Eigen::VectorXd pcn_propose(const Eigen::VectorXd& z, double beta,
                            std::span<const double> prior_diag, Rng& rng);

// z* = (I - beta^2 C B^{-1})^{1/2} z + beta w, w ~ N(0, C).
//
// The square root is taken in the B^{-1/2}-symmetrised frame, where
// B^{-1/2} (beta^2 C) B^{-1/2} is symmetric; eigenvalues of I minus that
// matrix below zero are clamped to zero. Build once per (beta, C).
class AdaptiveProposal {
 public:
  AdaptiveProposal(double beta, std::span<const double> prior_diag, const Eigen::MatrixXd& cov);

  Eigen::VectorXd propose(const Eigen::VectorXd& z, const Eigen::VectorXd& normal) const;
  Eigen::VectorXd propose(const Eigen::VectorXd& z, Rng& rng) const;

  const Eigen::MatrixXd& contraction() const { return contraction_; }
  // eigenvalues that had to be clamped
  int clamped() const { return clamped_; }

 private:
  double beta_;
  Eigen::MatrixXd contraction_;
  Eigen::MatrixXd cov_factor_;
  int clamped_ = 0;
};

// Largest beta with beta^2 C B^{-1} <= I, i.e. no clamping and an exactly
// prior-reversible adaptive proposal. Tuning caps beta2 here.
double reversible_beta_limit(std::span<const double> prior_diag, const Eigen::MatrixXd& cov);

// min{1, exp(phi_current - phi_proposed)}.
double accept_prob(double phi_current, double phi_proposed);

struct EmpiricalCov {
  Eigen::MatrixXd C;
  std::size_t sample_count = 0;
};

// Unbiased sample covariance of the rows of `samples` plus jitter * I.
EmpiricalCov update_empirical_cov(const Eigen::MatrixXd& samples, double jitter = 1e-8);

struct SamplerConfig {
  double beta1 = 0.1;
  double beta2 = 0.5;
  int burn_in = 0;        // plain pCN iterations before the first covariance (N1)
  int total = 10000;      // N
  int cov_period = 2500;  // k0
  double jitter = 1e-8;

  bool tune = true;
  int tune_window = 100;
  double tune_fraction = 0.6;
  double tune_rate = 1.0;
  double target_acceptance = 0.30;
  double beta_min = 1e-4;
  double beta_max = 1.0;
};

void validate(const SamplerConfig& config);

// beta * exp(eta (rate - target) / target) clipped to [beta_min, beta_max],
// with eta = tune_rate / sqrt(window_index).
double tune_beta(double beta, double pilot_acceptance, int window_index,
                 const SamplerConfig& config);

struct ChainRecord {
  int iter = 0;
  bool accepted = false;
  double phi = 0.0;
  Eigen::VectorXd z;
};

struct ChainResult {
  std::vector<ChainRecord> records;
  std::vector<Eigen::VectorXd> probes;  // forward probes of each retained state
  double acceptance_rate = 0.0;
  // acceptance over the iterations after the last beta update
  double terminal_acceptance = 0.0;
  int terminal_start = 1;
  double beta1 = 0.0;
  double beta2 = 0.0;
  Eigen::MatrixXd covariance;  // last empirical covariance (empty if never built)
  int clamped_eigenvalues = 0;

  Eigen::MatrixXd z_matrix() const;  // records x dim
};

// Adaptive pCN Metropolis-Hastings.
//
// Iterations 1..N1 use plain pCN; the empirical covariance is then built from
// them and refreshed whenever k mod (k0 + 1) == 0. With N1 = 0 the chain runs
// plain pCN until the first refresh at k = k0 + 1. Step sizes are tuned in
// 100-iteration pilot windows over the first tune_fraction of every stretch
// between covariance builds, and held fixed for the rest of the stretch.
ChainResult run_chain(const SamplerConfig& config, const LikelihoodSpec& lik,
                      std::span<const double> prior_diag, const Eigen::VectorXd& z0, Rng& rng);

// Local minimisation of Phi(z) + |z|^2_B / 2 from z0 by the Nelder-Mead
// simplex, initial edge 0.25 prior standard deviations, stopped after
// `max_evals` evaluations or when the simplex size drops below 1e-4.
// Returns z0 unchanged when it already beats every simplex vertex.
Eigen::VectorXd polish_start(const Eigen::VectorXd& z0, const LikelihoodSpec& lik,
                             std::span<const double> prior_diag, int max_evals);

}  // namespace heatsleuth
