#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "heatsleuth/errors.hpp"
#include "heatsleuth/sampler.hpp"

using namespace heatsleuth;
using doctest::Approx;

namespace {

const std::vector<double> kIdentity3 = {1.0, 1.0, 1.0};

LikelihoodSpec identity_model(const Eigen::VectorXd& data, double sigma) {
  LikelihoodSpec lik;
  lik.sigma = sigma;
  lik.data = data;
  lik.forward = [](const Eigen::VectorXd& z) -> std::optional<Prediction> { return Prediction{z, {}}; };
  return lik;
}

// mean and its standard error from non-overlapping batch means
struct BatchEstimate {
  double mean = 0.0;
  double se = 0.0;
};

BatchEstimate batch_means(const std::vector<double>& x, int batches = 50) {
  const std::size_t len = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> means(static_cast<std::size_t>(batches), 0.0);
  for (int b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < len; ++i) means[b] += x[b * len + i] / static_cast<double>(len);
  }
  BatchEstimate e;
  for (double m : means) e.mean += m / batches;
  double var = 0.0;
  for (double m : means) var += (m - e.mean) * (m - e.mean) / (batches - 1);
  e.se = std::sqrt(var / batches);
  return e;
}

}  // namespace

TEST_CASE("misfit examples") {
  CHECK(misfit(Eigen::VectorXd::Zero(4), 0.05) == 0.0);
  CHECK(misfit(Eigen::VectorXd::Constant(1, 0.1), 0.05) == Approx(2.0).epsilon(1e-12));

  const LikelihoodSpec lik = identity_model(Eigen::Vector3d(0.1, -0.2, 0.3), 0.5);
  CHECK(misfit(Eigen::Vector3d(0.1, -0.2, 0.3), lik) == 0.0);
  CHECK(misfit(Eigen::Vector3d(0.2, -0.2, 0.3), lik) == Approx(0.01 / 0.5));

  LikelihoodSpec invalid = lik;
  invalid.forward = [](const Eigen::VectorXd&) -> std::optional<Prediction> { return std::nullopt; };
  CHECK(misfit(Eigen::Vector3d::Zero(), invalid) == std::numeric_limits<double>::infinity());

  LikelihoodSpec bad = lik;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = lik;
  bad.data.resize(0);
  CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("acceptance probability") {
  CHECK(accept_prob(2.0, 2.0) == 1.0);
  CHECK(accept_prob(1.0, 3.0) == Approx(std::exp(-2.0)));
  CHECK(accept_prob(3.0, 1.0) == 1.0);
  CHECK(accept_prob(1.0, std::numeric_limits<double>::infinity()) == 0.0);
  // depends only on the difference
  for (double c : {-5.0, 0.0, 1e3}) {
    for (auto [a, b] : {std::pair{0.25, 1.75}, std::pair{1.0, 3.0}, std::pair{4.0, 2.0}}) {
      CHECK(accept_prob(a + c, b + c) == Approx(accept_prob(a, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("pCN proposal limits") {
  const std::vector<double> B = {1.0, 4.0};
  const Eigen::Vector2d z(3.0, -2.0);
  const Eigen::Vector2d w(0.5, -1.5);
  const Eigen::VectorXd fresh = pcn_propose(z, 1.0, B, w);
  CHECK(fresh[0] == Approx(0.5));
  CHECK(fresh[1] == Approx(-3.0));  // sqrt(4) * -1.5, no memory of z
  const Eigen::VectorXd tiny = pcn_propose(z, 1e-9, B, w);
  CHECK((tiny - z).norm() < 1e-8);

  Rng a(5), b(5);
  CHECK(pcn_propose(z, 1e-12, B, a).isApprox(pcn_propose(z, 1e-12, B, b)));
}

TEST_CASE("pCN proposal moments") {
  const std::vector<double> B = {1.0, 0.25, 2.0};
  const Eigen::Vector3d z(1.0, -2.0, 0.5);
  const double beta = 0.3;
  const int n = 100000;
  Rng rng(17);
  Eigen::MatrixXd draws(n, 3);
  for (int i = 0; i < n; ++i) draws.row(i) = pcn_propose(z, beta, B, rng).transpose();
  const Eigen::RowVector3d mean = draws.colwise().mean();
  const Eigen::MatrixXd centred = draws.rowwise() - mean;
  const Eigen::Matrix3d cov = centred.transpose() * centred / (n - 1);
  for (int i = 0; i < 3; ++i) {
    const double var = beta * beta * B[i];
    CHECK(std::abs(mean[i] - std::sqrt(1 - beta * beta) * z[i]) <= 3 * std::sqrt(var / n));
    CHECK(std::abs(cov(i, i) - var) <= 3 * var * std::sqrt(2.0 / n));
    for (int j = 0; j < i; ++j) {
      CHECK(std::abs(cov(i, j)) <= 3 * beta * beta * std::sqrt(B[i] * B[j] / n));
    }
  }
}

TEST_CASE("adaptive proposal") {
  SUBCASE("C = B reduces to pCN for identical draws") {
    const std::vector<double> B = {1.0, 0.25, 4.0};
    const Eigen::Matrix3d C = Eigen::Vector3d(1.0, 0.25, 4.0).asDiagonal();
    Rng rng(3);
    for (double beta : {0.1, 0.5, 0.9}) {
      const AdaptiveProposal prop(beta, B, C);
      for (int i = 0; i < 20; ++i) {
        const Eigen::VectorXd z = standard_normal(3, rng), w = standard_normal(3, rng);
        CHECK((prop.propose(z, w) - pcn_propose(z, beta, B, w)).cwiseAbs().maxCoeff() <= 1e-14);
      }
    }
  }
  SUBCASE("degenerate C leaves z fixed") {
    const std::vector<double> B = {1.0, 1.0};
    const AdaptiveProposal prop(0.7, B, Eigen::Matrix2d::Zero());
    const Eigen::Vector2d z(0.3, -1.1);
    CHECK((prop.propose(z, Eigen::Vector2d(2.0, -3.0)) - z).norm() <= 1e-15);
    CHECK(prop.contraction().isApprox(Eigen::Matrix2d::Identity()));
  }
  SUBCASE("diagonal closed form") {
    const std::vector<double> B = {1.0, 1.0};
    const Eigen::Matrix2d C = Eigen::Vector2d(0.25, 1.0).asDiagonal();
    const AdaptiveProposal prop(0.8, B, C);
    CHECK(prop.contraction()(0, 0) == Approx(std::sqrt(1 - 0.16)));
    CHECK(prop.contraction()(1, 1) == Approx(0.6));
    CHECK(std::abs(prop.contraction()(0, 1)) <= 1e-15);
    CHECK(prop.clamped() == 0);
  }
  SUBCASE("oversized C is clamped") {
    const std::vector<double> B = {1.0, 1.0};
    const AdaptiveProposal prop(0.9, B, Eigen::Matrix2d::Identity() * 4.0);
    CHECK(prop.clamped() == 2);
    CHECK(prop.contraction().norm() <= 1e-12);
  }
  SUBCASE("non-diagonal C: S^2 equals I - beta^2 C B^-1 in the symmetrised frame") {
    const std::vector<double> B = {2.0, 0.5};
    Eigen::Matrix2d C;
    C << 0.4, 0.1, 0.1, 0.2;
    const double beta = 0.6;
    const AdaptiveProposal prop(beta, B, C);
    const Eigen::Matrix2d S = prop.contraction();
    const Eigen::Matrix2d Binv = Eigen::Vector2d(0.5, 2.0).asDiagonal();
    CHECK((S * S - (Eigen::Matrix2d::Identity() - beta * beta * C * Binv)).norm() <= 1e-12);
  }
  CHECK_THROWS_AS(AdaptiveProposal(0.5, std::vector<double>{1.0, 1.0},
                                   (Eigen::Matrix2d() << 1.0, 0.0, 0.0, -1.0).finished()),
                  NumericalError);
}

TEST_CASE("empirical covariance") {
  Eigen::MatrixXd same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  const EmpiricalCov c0 = update_empirical_cov(same);
  CHECK((c0.C - 1e-8 * Eigen::Matrix3d::Identity()).norm() <= 1e-20);
  CHECK(c0.sample_count == 2);

  Eigen::MatrixXd line(50, 3);
  for (int i = 0; i < 50; ++i) line.row(i) = Eigen::RowVector3d(1.0, -2.0, 0.5) * (0.1 * i - 2.0);
  const EmpiricalCov c1 = update_empirical_cov(line);
  const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(c1.C).eigenvalues();
  CHECK(ev[0] == Approx(1e-8).epsilon(1e-6));
  CHECK(ev[1] == Approx(1e-8).epsilon(1e-6));
  CHECK(ev[2] > 1.0);
  CHECK((c1.C - c1.C.transpose()).norm() <= 1e-14);

  const int n = 100000;
  Rng rng(9);
  Eigen::MatrixXd iid(n, 3);
  for (int i = 0; i < n; ++i) iid.row(i) = standard_normal(3, rng).transpose();
  const EmpiricalCov c2 = update_empirical_cov(iid);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(c2.C(i, i) - 1.0) <= 3 * std::sqrt(2.0 / n));
    for (int j = 0; j < i; ++j) CHECK(std::abs(c2.C(i, j)) <= 3 * std::sqrt(1.0 / n));
  }
  CHECK_THROWS_AS(update_empirical_cov(Eigen::MatrixXd::Ones(1, 3)), ValidationError);
}

TEST_CASE("tune_beta") {
  const SamplerConfig c;
  CHECK(tune_beta(0.4, 0.30, 1, c) == 0.4);
  CHECK(tune_beta(0.4, 1.0, 1, c) > 0.4);
  CHECK(tune_beta(0.4, 0.0, 1, c) < 0.4);
  // the gain decays with the window index
  CHECK(tune_beta(0.1, 0.5, 4, c) < tune_beta(0.1, 0.5, 1, c));
  CHECK(tune_beta(0.1, 0.5, 4, c) > 0.1);
  CHECK(tune_beta(0.9, 1.0, 1, c) == 1.0);
  CHECK(tune_beta(2e-4, 0.0, 1, c) == c.beta_min);
}

TEST_CASE("sampler config validation") {
  SamplerConfig c;
  CHECK_NOTHROW(validate(c));
  c.beta1 = 0.0;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = {};
  c.beta2 = 1.5;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = {};
  c.burn_in = c.total;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = {};
  c.cov_period = 0;
  CHECK_THROWS_AS(validate(c), ValidationError);
}

TEST_CASE("conjugate Gaussian toy posterior") {
  // prior N(0, I), data y = z + noise: posterior N(y / (1 + s^2), s^2 / (1 + s^2) I)
  const Eigen::Vector3d y(0.8, -0.4, 1.5);
  const double sigma = 0.1, s2 = sigma * sigma;
  const LikelihoodSpec lik = identity_model(y, sigma);
  SamplerConfig config;
  config.total = 50000;
  config.cov_period = 2500;
  Rng rng(2024);
  const ChainResult chain = run_chain(config, lik, kIdentity3, Eigen::Vector3d::Zero(), rng);
  REQUIRE(chain.records.size() == 50000);

  const std::size_t skip = 10000;  // past the last tuning stretch of the first segment
  for (int i = 0; i < 3; ++i) {
    std::vector<double> x, sq;
    for (std::size_t k = skip; k < chain.records.size(); ++k) x.push_back(chain.records[k].z[i]);
    const BatchEstimate m = batch_means(x);
    CAPTURE(i);
    CHECK(std::abs(m.mean - y[i] / (1 + s2)) <= 3 * m.se);
    for (double v : x) sq.push_back((v - y[i] / (1 + s2)) * (v - y[i] / (1 + s2)));
    const BatchEstimate var = batch_means(sq);
    CHECK(std::abs(var.mean - s2 / (1 + s2)) <= 3 * var.se);
  }
  CHECK(chain.covariance.rows() == 3);
  // with C close to a Gaussian posterior even beta2 = 1 is a one-sd step, so
  // the tuner runs to the upper clip
  CHECK(chain.beta2 == 1.0);
}

TEST_CASE("step tuning reaches the acceptance band on the toy") {
  const LikelihoodSpec lik = identity_model(Eigen::Vector3d(0.8, -0.4, 1.5), 0.1);
  SamplerConfig config;
  config.total = 20000;
  config.cov_period = config.total;  // plain pCN throughout
  config.beta1 = 0.9;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    const ChainResult chain = run_chain(config, lik, kIdentity3, Eigen::Vector3d::Zero(), rng);
    CAPTURE(seed);
    CHECK(chain.beta1 < 0.9);
    CHECK(chain.terminal_acceptance >= 0.25);
    CHECK(chain.terminal_acceptance <= 0.35);
  }
}

TEST_CASE("huge noise recovers the prior") {
  const std::vector<double> B = {1.0, 0.25, 4.0};
  const LikelihoodSpec lik = identity_model(Eigen::Vector3d(5.0, 5.0, 5.0), 1e6);
  SamplerConfig config;
  config.total = 40000;
  Rng rng(8);
  const ChainResult chain = run_chain(config, lik, B, Eigen::Vector3d::Zero(), rng);
  for (int i = 0; i < 3; ++i) {
    std::vector<double> sq;
    for (const ChainRecord& r : chain.records) sq.push_back(r.z[i] * r.z[i]);
    const BatchEstimate var = batch_means(sq);
    CAPTURE(i);
    CHECK(std::abs(var.mean - B[i]) <= 3 * var.se);
  }
}

TEST_CASE("two-level detailed balance with an invalid region") {
  // Phi = 0 for z < 0, dphi for 0 <= z < 1.5, inadmissible beyond |z| = 1.5.
  // The prior is symmetric, so occupation of z >= 0 over z < 0 is exp(-dphi).
  const double dphi = 0.7, sigma = 1.0;
  LikelihoodSpec lik;
  lik.sigma = sigma;
  lik.data = Eigen::VectorXd::Zero(1);
  lik.forward = [&](const Eigen::VectorXd& z) -> std::optional<Prediction> {
    if (std::abs(z[0]) >= 1.5) return std::nullopt;
    return Prediction{Eigen::VectorXd::Constant(1, z[0] < 0 ? 0.0 : std::sqrt(2 * dphi) * sigma), {}};
  };
  SamplerConfig config;
  config.tune = false;
  config.beta1 = config.beta2 = 0.6;
  config.total = 200000;
  config.cov_period = config.total;  // never adapt
  Rng rng(77);
  const std::vector<double> B = {1.0};
  const ChainResult chain = run_chain(config, lik, B, Eigen::VectorXd::Constant(1, -0.2), rng);
  std::vector<double> upper;
  for (const ChainRecord& r : chain.records) {
    CHECK_MESSAGE(std::abs(r.z[0]) < 1.5, "left the admissible region");
    upper.push_back(r.z[0] >= 0 ? 1.0 : 0.0);
  }
  const BatchEstimate p = batch_means(upper, 100);
  const double expected = std::exp(-dphi) / (1 + std::exp(-dphi));
  CHECK(std::abs(p.mean - expected) <= 3 * p.se);
}

TEST_CASE("cached misfits match recomputation") {
  const LikelihoodSpec lik = identity_model(Eigen::Vector3d(0.2, 0.1, -0.3), 0.2);
  SamplerConfig config;
  config.total = 3000;
  config.cov_period = 1000;
  Rng rng(4);
  const ChainResult chain = run_chain(config, lik, kIdentity3, Eigen::Vector3d::Zero(), rng);
  std::uniform_int_distribution<std::size_t> pick(0, chain.records.size() - 1);
  Rng audit(5);
  for (int i = 0; i < 100; ++i) {
    const ChainRecord& r = chain.records[pick(audit)];
    CHECK(std::abs(misfit(r.z, lik) - r.phi) <= 1e-12);
  }
  int accepted = 0;
  for (const ChainRecord& r : chain.records) accepted += r.accepted;
  CHECK(chain.acceptance_rate == Approx(static_cast<double>(accepted) / chain.records.size()));
}

TEST_CASE("chains are reproducible from the seed") {
  const LikelihoodSpec lik = identity_model(Eigen::Vector3d(0.2, 0.1, -0.3), 0.2);
  SamplerConfig config;
  config.total = 2000;
  config.cov_period = 500;
  Rng a(99), b(99);
  const ChainResult x = run_chain(config, lik, kIdentity3, Eigen::Vector3d::Zero(), a);
  const ChainResult y = run_chain(config, lik, kIdentity3, Eigen::Vector3d::Zero(), b);
  REQUIRE(x.records.size() == y.records.size());
  for (std::size_t k = 0; k < x.records.size(); ++k) {
    CHECK(x.records[k].z == y.records[k].z);
    CHECK(x.records[k].phi == y.records[k].phi);
  }
}

TEST_CASE("reversible beta limit") {
  const std::vector<double> B = {1.0, 4.0};
  const Eigen::Matrix2d C = Eigen::Vector2d(0.25, 16.0).asDiagonal();
  const double cap = reversible_beta_limit(B, C);
  CHECK(cap == Approx(0.5));
  CHECK(AdaptiveProposal(cap, B, C).clamped() == 0);
  CHECK(AdaptiveProposal(cap * 1.01, B, C).clamped() == 1);
}

TEST_CASE("polish_start finds the mode of a Gaussian posterior") {
  // Phi + |z|^2 / 2 with g(z) = z and sigma = 1 is minimised at y / 2
  const Eigen::Vector3d y(1.2, -0.6, 0.4);
  const LikelihoodSpec lik = identity_model(y, 1.0);
  const Eigen::VectorXd z = polish_start(Eigen::Vector3d(-1.0, 1.0, 2.0), lik, kIdentity3, 2000);
  CHECK((z - y / 2).norm() <= 1e-3);
  // already optimal: returned unchanged
  const Eigen::VectorXd same = polish_start(y / 2, lik, kIdentity3, 2000);
  CHECK((same - y / 2).norm() <= 1e-3);
  // zero budget is a no-op
  CHECK(polish_start(Eigen::Vector3d(-1.0, 1.0, 2.0), lik, kIdentity3, 0) == Eigen::Vector3d(-1.0, 1.0, 2.0));
}
