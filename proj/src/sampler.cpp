#include "heatsleuth/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "heatsleuth/errors.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace heatsleuth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluation {
  double phi = kInf;
  Eigen::VectorXd probe;
};

Evaluation evaluate(const Eigen::VectorXd& z, const LikelihoodSpec& lik) {
  std::optional<Prediction> p = lik.forward(z);
  if (!p) return {};
  if (p->data.size() != lik.data.size()) {
    throw ValidationError("forward map returned " + std::to_string(p->data.size()) +
                          " predictions for " + std::to_string(lik.data.size()) + " data");
  }
  return {misfit(lik.data - p->data, lik.sigma), std::move(p->probe)};
}

void check_prior(std::span<const double> prior_diag, Eigen::Index dim) {
  if (static_cast<Eigen::Index>(prior_diag.size()) != dim) {
    throw ValidationError("prior dimension does not match the parameter vector");
  }
  for (double b : prior_diag) {
    if (!(b > 0.0)) throw ValidationError("prior covariance diagonal must be positive");
  }
}

}  // namespace

void validate(const LikelihoodSpec& lik) {
  if (!(lik.sigma > 0.0)) throw ValidationError("likelihood sigma must be positive");
  if (lik.data.size() == 0) throw ValidationError("likelihood needs at least one datum");
  if (!lik.forward) throw ValidationError("likelihood needs a forward map");
}

double misfit(const Eigen::VectorXd& residual, double sigma) {
  return residual.squaredNorm() / (2.0 * sigma * sigma);
}

double misfit(const Eigen::VectorXd& z, const LikelihoodSpec& lik) {
  validate(lik);
  return evaluate(z, lik).phi;
}

Eigen::VectorXd standard_normal(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd w(dim);
  for (Eigen::Index i = 0; i < dim; ++i) w[i] = normal(rng);
  return w;
}

Eigen::VectorXd pcn_propose(const Eigen::VectorXd& z, double beta,
                            std::span<const double> prior_diag, const Eigen::VectorXd& normal) {
  check_prior(prior_diag, z.size());
  const double keep = std::sqrt(1.0 - beta * beta);
  Eigen::VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    out[i] = keep * z[i] + beta * std::sqrt(prior_diag[i]) * normal[i];
  }
  return out;
}

Eigen::VectorXd pcn_propose(const Eigen::VectorXd& z, double beta,
                            std::span<const double> prior_diag, Rng& rng) {
  return pcn_propose(z, beta, prior_diag, standard_normal(z.size(), rng));
}

AdaptiveProposal::AdaptiveProposal(double beta, std::span<const double> prior_diag,
                                   const Eigen::MatrixXd& cov)
    : beta_(beta) {
  const Eigen::Index d = cov.rows();
  if (cov.cols() != d) throw ValidationError("proposal covariance must be square");
  check_prior(prior_diag, d);

  Eigen::VectorXd b_sqrt(d), b_inv_sqrt(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    b_sqrt[i] = std::sqrt(prior_diag[i]);
    b_inv_sqrt[i] = 1.0 / b_sqrt[i];
  }
  Eigen::MatrixXd scaled = b_inv_sqrt.asDiagonal() * (beta * beta * cov) * b_inv_sqrt.asDiagonal();
  scaled = 0.5 * (scaled + scaled.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of beta^2 C failed");
  Eigen::VectorXd root(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double v = 1.0 - eig.eigenvalues()[i];
    if (v < 0.0) {
      v = 0.0;
      ++clamped_;
    }
    root[i] = std::sqrt(v);
  }
  const Eigen::MatrixXd sym_root =
      eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  contraction_ = b_sqrt.asDiagonal() * sym_root * b_inv_sqrt.asDiagonal();

  if (cov.isZero(0.0)) {
    cov_factor_ = Eigen::MatrixXd::Zero(d, d);
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("proposal covariance is not positive definite");
    }
    cov_factor_ = llt.matrixL();
  }
}

Eigen::VectorXd AdaptiveProposal::propose(const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& normal) const {
  return contraction_ * z + beta_ * (cov_factor_ * normal);
}

Eigen::VectorXd AdaptiveProposal::propose(const Eigen::VectorXd& z, Rng& rng) const {
  return propose(z, standard_normal(z.size(), rng));
}

double reversible_beta_limit(std::span<const double> prior_diag, const Eigen::MatrixXd& cov) {
  const Eigen::Index d = cov.rows();
  check_prior(prior_diag, d);
  Eigen::VectorXd b_inv_sqrt(d);
  for (Eigen::Index i = 0; i < d; ++i) b_inv_sqrt[i] = 1.0 / std::sqrt(prior_diag[i]);
  Eigen::MatrixXd scaled = b_inv_sqrt.asDiagonal() * cov * b_inv_sqrt.asDiagonal();
  scaled = 0.5 * (scaled + scaled.transpose());
  const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(scaled, Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .maxCoeff();
  return top > 0.0 ? 1.0 / std::sqrt(top) : std::numeric_limits<double>::infinity();
}

double accept_prob(double phi_current, double phi_proposed) {
  if (std::isinf(phi_proposed) && phi_proposed > 0.0) return 0.0;
  if (std::isinf(phi_current) && phi_current > 0.0) return 1.0;
  return std::min(1.0, std::exp(phi_current - phi_proposed));
}

EmpiricalCov update_empirical_cov(const Eigen::MatrixXd& samples, double jitter) {
  if (samples.rows() < 2) throw ValidationError("empirical covariance needs at least 2 samples");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  Eigen::MatrixXd c = centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
  c = 0.5 * (c + c.transpose());
  c.diagonal().array() += jitter;
  return {c, static_cast<std::size_t>(samples.rows())};
}

void validate(const SamplerConfig& c) {
  auto fail = [](const std::string& msg) { throw ValidationError("sampler config: " + msg); };
  if (!(c.beta1 > 0.0 && c.beta1 <= 1.0)) fail("beta1 must lie in (0,1]");
  if (!(c.beta2 > 0.0 && c.beta2 <= 1.0)) fail("beta2 must lie in (0,1]");
  if (c.total < 1) fail("N must be >= 1");
  if (c.burn_in < 0 || c.burn_in >= c.total) fail("N1 must satisfy 0 <= N1 < N");
  if (c.burn_in == 1) fail("N1 = 1 leaves too few samples for a covariance");
  if (c.cov_period < 1) fail("k0 must be >= 1");
  if (!(c.jitter >= 0.0)) fail("jitter must be >= 0");
  if (c.tune_window < 100) fail("tuning pilot window must be >= 100 iterations");
  if (!(c.tune_fraction >= 0.0 && c.tune_fraction <= 1.0)) fail("tune_fraction must lie in [0,1]");
  if (!(c.tune_rate > 0.0)) fail("tune_rate must be positive");
  if (!(c.target_acceptance > 0.0 && c.target_acceptance < 1.0)) {
    fail("target_acceptance must lie in (0,1)");
  }
  if (!(c.beta_min > 0.0 && c.beta_min < c.beta_max && c.beta_max <= 1.0)) {
    fail("need 0 < beta_min < beta_max <= 1");
  }
}

double tune_beta(double beta, double pilot_acceptance, int window_index,
                 const SamplerConfig& config) {
  const double eta = config.tune_rate / std::sqrt(static_cast<double>(std::max(1, window_index)));
  const double relative = (pilot_acceptance - config.target_acceptance) / config.target_acceptance;
  const double updated = beta * std::exp(eta * relative);
  return std::clamp(updated, config.beta_min, config.beta_max);
}

Eigen::MatrixXd ChainResult::z_matrix() const {
  if (records.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(records.size()), records.front().z.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = records[i].z.transpose();
  }
  return out;
}

ChainResult run_chain(const SamplerConfig& config, const LikelihoodSpec& lik,
                      std::span<const double> prior_diag, const Eigen::VectorXd& z0, Rng& rng) {
  validate(config);
  validate(lik);
  check_prior(prior_diag, z0.size());

  const int n_total = config.total;
  const int k0 = config.cov_period;

  // The chain splits into segments at every covariance (re)build; beta is
  // tuned over the first tune_fraction of each segment, so a fresh C always
  // gets a fresh step size.
  std::vector<int> seg_start = {1};
  for (int k = 1; k <= n_total; ++k) {
    const bool first_build = config.burn_in > 0 && k == config.burn_in + 1;
    if (first_build || (k > config.burn_in && k % (k0 + 1) == 0)) seg_start.push_back(k);
  }
  seg_start.push_back(n_total + 1);
  auto pilot_windows = [&](std::size_t seg) {
    if (!config.tune) return 0;
    const int len = seg_start[seg + 1] - seg_start[seg];
    return static_cast<int>(config.tune_fraction * len) / config.tune_window;
  };

  ChainResult out;
  out.records.reserve(n_total);
  out.probes.reserve(n_total);
  double beta1 = config.beta1;
  double beta2 = config.beta2;

  Eigen::VectorXd z = z0;
  Evaluation current = evaluate(z, lik);

  std::optional<AdaptiveProposal> adaptive;
  Eigen::MatrixXd cov;
  double beta2_cap = config.beta_max;
  auto rebuild_cov = [&](int upto) {
    Eigen::MatrixXd samples(upto, z.size());
    for (int i = 0; i < upto; ++i) samples.row(i) = out.records[i].z.transpose();
    cov = update_empirical_cov(samples, config.jitter).C;
    beta2_cap = std::min(config.beta_max, reversible_beta_limit(prior_diag, cov));
    adaptive.emplace(beta2, prior_diag, cov);
    out.clamped_eigenvalues += adaptive->clamped();
  };

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  int accepted_total = 0;
  int window_accepts = 0;
  int last_tune = 0;
  std::size_t seg = 0;

  for (int k = 1; k <= n_total; ++k) {
    const bool first_build = config.burn_in > 0 && k == config.burn_in + 1;
    if (first_build || (k > config.burn_in && k % (k0 + 1) == 0)) rebuild_cov(k - 1);

    const Eigen::VectorXd proposal =
        adaptive ? adaptive->propose(z, rng) : pcn_propose(z, beta1, prior_diag, rng);
    Evaluation trial = evaluate(proposal, lik);
    const double alpha = accept_prob(current.phi, trial.phi);
    const bool accept = uniform(rng) < alpha;
    if (accept) {
      z = proposal;
      current = std::move(trial);
      ++accepted_total;
      ++window_accepts;
    }
    out.records.push_back({k, accept, current.phi, z});
    out.probes.push_back(current.probe);

    while (k >= seg_start[seg + 1]) ++seg;
    const int seg_k = k - seg_start[seg] + 1;
    if (seg_k == 1) window_accepts = accept ? 1 : 0;
    if (seg_k % config.tune_window == 0) {
      const int w = seg_k / config.tune_window;
      if (w <= pilot_windows(seg)) {
        const double rate = static_cast<double>(window_accepts) / config.tune_window;
        if (adaptive) {
          // tuning never pushes past the point where the clamp would be needed
          beta2 = std::min(tune_beta(beta2, rate, w, config), beta2_cap);
          adaptive.emplace(beta2, prior_diag, cov);
          out.clamped_eigenvalues += adaptive->clamped();
        } else {
          beta1 = tune_beta(beta1, rate, w, config);
        }
        last_tune = k;
      }
      window_accepts = 0;
    }
  }

  out.acceptance_rate = static_cast<double>(accepted_total) / n_total;
  out.terminal_start = last_tune + 1;
  int terminal_accepts = 0;
  for (int k = out.terminal_start; k <= n_total; ++k) terminal_accepts += out.records[k - 1].accepted;
  const int terminal_len = n_total - last_tune;
  out.terminal_acceptance =
      terminal_len > 0 ? static_cast<double>(terminal_accepts) / terminal_len : out.acceptance_rate;
  out.beta1 = beta1;
  out.beta2 = beta2;
  out.covariance = cov;
  return out;
}

namespace {

struct PolishTarget {
  const LikelihoodSpec* lik;
  std::span<const double> prior;
  int evals = 0;
};

double neg_log_posterior(const gsl_vector* v, void* params) {
  auto* t = static_cast<PolishTarget*>(params);
  ++t->evals;
  const Eigen::Index d = static_cast<Eigen::Index>(v->size);
  Eigen::VectorXd z(d);
  double reg = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    z[i] = gsl_vector_get(v, static_cast<std::size_t>(i));
    reg += 0.5 * z[i] * z[i] / t->prior[static_cast<std::size_t>(i)];
  }
  const double phi = evaluate(z, *t->lik).phi;
  // GSL's simplex cannot take inf
  return std::isfinite(phi) ? phi + reg : 1e300;
}

}  // namespace

Eigen::VectorXd polish_start(const Eigen::VectorXd& z0, const LikelihoodSpec& lik,
                             std::span<const double> prior_diag, int max_evals) {
  validate(lik);
  check_prior(prior_diag, z0.size());
  if (max_evals <= 0) return z0;
  const std::size_t d = static_cast<std::size_t>(z0.size());
  PolishTarget target{&lik, prior_diag};
  gsl_multimin_function fn{&neg_log_posterior, d, &target};

  gsl_vector* x = gsl_vector_alloc(d);
  gsl_vector* step = gsl_vector_alloc(d);
  for (std::size_t i = 0; i < d; ++i) {
    gsl_vector_set(x, i, z0[static_cast<Eigen::Index>(i)]);
    gsl_vector_set(step, i, 0.25 * std::sqrt(prior_diag[i]));
  }
  gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, d);
  gsl_multimin_fminimizer_set(m, &fn, x, step);
  while (target.evals < max_evals) {
    if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-4) == GSL_SUCCESS) break;
  }
  Eigen::VectorXd best = z0;
  const double start_value = neg_log_posterior(x, &target);
  if (gsl_multimin_fminimizer_minimum(m) < start_value) {
    const gsl_vector* xm = gsl_multimin_fminimizer_x(m);
    for (std::size_t i = 0; i < d; ++i) best[static_cast<Eigen::Index>(i)] = gsl_vector_get(xm, i);
  }
  gsl_multimin_fminimizer_free(m);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return best;
}

}  // namespace heatsleuth
