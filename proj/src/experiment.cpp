#include "heatsleuth/experiment.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <fstream>
#include <numbers>
#include <random>

#include "heatsleuth/errors.hpp"
#include "heatsleuth/spectral.hpp"

namespace heatsleuth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kWarmCandidates = 200;
constexpr std::size_t kPolishStarts = 4;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  return os;
}

Eigen::VectorXd chain_start(const ExperimentConfig& c) {
  const ShapeKind kind = c.truth.kind;
  const int order = c.truth.fourier_order;
  if (!c.xi_start.empty()) return to_eigen(to_unconstrained(ShapeParams{kind, c.xi_start, order}));
  if (kind == ShapeKind::FourierStar) {
    // the prior mean (q = 0) is not a shape; start from the circle q = 1/2
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * order + 1));
    z[0] = 1.0;
    return z;
  }
  return Eigen::VectorXd::Zero(3);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::string_view label) {
  const std::uint64_t h = fnv1a(label);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

TruthSolution::TruthSolution(const PolarMesh& mesh, const ShapeParams& shape, double strength,
                             double dt, int load_points)
    : mesh_(mesh) {
  stepper_ = std::make_unique<HeatStepper>(assemble(mesh_), dt);
  load_ = free_part(mesh_, assemble_load(mesh_, shape, strength, load_points));
  states_.push_back(stepper_->initial_state());
}

const FieldState& TruthSolution::state(int step) {
  if (step < 0) throw ValidationError("truth solution: negative step");
  while (static_cast<int>(states_.size()) <= step) {
    states_.push_back(stepper_->step(states_.back(), load_));
  }
  return states_[static_cast<std::size_t>(step)];
}

double TruthSolution::flux(double theta, int step) { return boundary_flux(state(step), mesh_, theta); }

InversionModel::InversionModel(const PolarMesh& mesh, double dt, ShapeKind kind, int fourier_order,
                               double strength, int load_points)
    : mesh_(mesh),
      kind_(kind),
      order_(fourier_order),
      strength_(strength),
      loads_(mesh, load_points),
      response_(std::make_shared<const HeatStepper>(assemble(mesh), dt), mesh) {}

std::optional<Eigen::VectorXd> InversionModel::free_load(const Eigen::VectorXd& z) const {
  const ShapeParams shape = to_physical(std::span<const double>(z.data(), z.size()), kind_, order_);
  if (!is_valid(shape)) return std::nullopt;
  return free_part(mesh_, loads_.assemble(Region(shape), strength_));
}

std::optional<Eigen::VectorXd> InversionModel::predict(const Eigen::VectorXd& z,
                                                       std::span<const FluxProbe> probes) {
  const Eigen::MatrixXd w = response_.matrix(probes);
  std::optional<Eigen::VectorXd> f = free_load(z);
  if (!f) return std::nullopt;
  return Eigen::VectorXd(w * *f);
}

ForwardMap InversionModel::forward(const MeasurementSet& data, const InferenceRequest& request) {
  std::vector<FluxProbe> probes;
  probes.reserve(data.records.size());
  for (const Measurement& m : data.records) probes.push_back({m.theta, m.step});
  auto w_data = std::make_shared<const Eigen::MatrixXd>(response_.matrix(probes));

  const double t = request.sensor_theta, d = request.delta_theta;
  auto wrap = [](double a) {
    double r = std::fmod(a, kTwoPi);
    return r < 0.0 ? r + kTwoPi : r;
  };
  const std::vector<FluxProbe> triple = {{wrap(t - d), request.end_step},
                                         {t, request.end_step},
                                         {wrap(t + d), request.end_step}};
  auto w_probe = std::make_shared<const Eigen::MatrixXd>(response_.matrix(triple));

  return [this, w_data, w_probe](const Eigen::VectorXd& z) -> std::optional<Prediction> {
    std::optional<Eigen::VectorXd> f = free_load(z);
    if (!f) return std::nullopt;
    return Prediction{*w_data * *f, *w_probe * *f};
  };
}

ChainSummary summarize_chain(const ChainResult& chain, ShapeKind kind, int fourier_order,
                             int burn_in) {
  ChainSummary s;
  s.acceptance_rate = chain.acceptance_rate;
  s.terminal_acceptance = chain.terminal_acceptance;
  if (chain.records.empty()) throw ValidationError("cannot summarize an empty chain");
  const Eigen::Index p = chain.records.front().z.size();
  Eigen::VectorXd zs = Eigen::VectorXd::Zero(p), zq = zs, xs = zs, xq = zs;
  for (const ChainRecord& r : chain.records) {
    if (r.iter <= burn_in) continue;
    const ShapeParams shape = to_physical(std::span<const double>(r.z.data(), r.z.size()), kind,
                                          fourier_order);
    const Eigen::VectorXd xi = to_eigen(shape.xi);
    zs += r.z;
    xs += xi;
    ++s.retained;
  }
  if (s.retained == 0) throw ValidationError("no samples left after burn-in");
  s.z_mean = zs / s.retained;
  s.xi_mean = xs / s.retained;
  for (const ChainRecord& r : chain.records) {
    if (r.iter <= burn_in) continue;
    const ShapeParams shape = to_physical(std::span<const double>(r.z.data(), r.z.size()), kind,
                                          fourier_order);
    zq += (r.z - s.z_mean).cwiseAbs2();
    xq += (to_eigen(shape.xi) - s.xi_mean).cwiseAbs2();
  }
  const double denom = s.retained > 1 ? s.retained - 1 : 1;
  s.z_std = (zq / denom).cwiseSqrt();
  s.xi_std = (xq / denom).cwiseSqrt();
  return s;
}

InferenceFn make_inference(const ExperimentConfig& config, InversionModel& model,
                           Rng& sampler_rng) {
  struct Carry {
    SamplerConfig sampler;
    Eigen::VectorXd start;
    std::vector<Eigen::VectorXd> candidates;  // previous chain, thinned
  };
  const PriorSpec prior = prior_covariance(config.truth.kind, config.truth.fourier_order);
  auto state = std::make_shared<Carry>(Carry{config.sampler, chain_start(config), {}});
  const WarmStart warm = config.warm_start;
  const double sigma = config.sigma;
  const int burn_in = config.sampler.burn_in;
  const int polish = config.polish_evals;
  const int draws = config.start_draws;
  auto start_rng = std::make_shared<Rng>(make_stream(config.sampler_seed, "start-search"));
  return [&model, &sampler_rng, prior, state, warm, sigma, burn_in, polish, draws, start_rng](
             const MeasurementSet& data, const InferenceRequest& request) {
    LikelihoodSpec lik;
    lik.sigma = sigma;
    lik.data.resize(static_cast<Eigen::Index>(data.records.size()));
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      lik.data[static_cast<Eigen::Index>(i)] = data.records[i].value;
    }
    lik.forward = model.forward(data, request);

    // candidates are ranked by misfit plus the prior term
    const std::vector<double>& b = prior.covariance_diagonal;
    auto score = [&](const Eigen::VectorXd& z) {
      double reg = 0.0;
      for (Eigen::Index i = 0; i < z.size(); ++i) reg += 0.5 * z[i] * z[i] / b[static_cast<std::size_t>(i)];
      return misfit(z, lik) + reg;
    };
    // warm candidates and prior draws are ranked separately so the draws
    // still get polished when the warm start sits in a local mode
    using Scored = std::pair<double, Eigen::VectorXd>;
    auto by_score = [](const Scored& x, const Scored& y) { return x.first < y.first; };
    std::vector<Scored> warm_pool, draw_pool;
    warm_pool.emplace_back(score(state->start), state->start);
    for (const Eigen::VectorXd& z : state->candidates) warm_pool.emplace_back(score(z), z);
    for (int i = 0; i < draws; ++i) {
      Eigen::VectorXd z = standard_normal(state->start.size(), *start_rng);
      for (Eigen::Index j = 0; j < z.size(); ++j) z[j] *= std::sqrt(b[static_cast<std::size_t>(j)]);
      draw_pool.emplace_back(score(z), std::move(z));
    }
    // stable: ties keep the warm start first
    std::stable_sort(warm_pool.begin(), warm_pool.end(), by_score);
    std::stable_sort(draw_pool.begin(), draw_pool.end(), by_score);
    std::vector<Scored> seeds = {warm_pool.front()};
    for (std::size_t i = 0; i < std::min(draw_pool.size(), kPolishStarts); ++i) {
      seeds.push_back(draw_pool[i]);
    }
    Eigen::VectorXd start = seeds.front().second;
    double best = seeds.front().first;
    for (const Scored& c : seeds) {
      Eigen::VectorXd z = polish > 0 ? polish_start(c.second, lik, b, polish) : c.second;
      const double v = score(z);
      if (v < best) best = v, start = std::move(z);
    }

    WindowPosterior post;
    post.chain = run_chain(state->sampler, lik, prior.covariance_diagonal, start, sampler_rng);
    post.z_mean = summarize_chain(post.chain, model.kind(), model.fourier_order(), burn_in).z_mean;
    if (warm != WarmStart::Prior) {
      state->sampler.beta1 = post.chain.beta1;
      state->sampler.beta2 = post.chain.beta2;
      state->start = post.z_mean;
    }
    if (warm == WarmStart::Best) {
      state->candidates.clear();
      const std::size_t n = post.chain.records.size();
      const std::size_t first = static_cast<std::size_t>(burn_in);
      const std::size_t stride = std::max<std::size_t>(1, (n - first) / kWarmCandidates);
      for (std::size_t i = first; i < n; i += stride) state->candidates.push_back(post.chain.records[i].z);
    }
    return post;
  };
}

namespace {

RunResult finish(const ExperimentConfig& config, const StrategyParams& strategy,
                 StrategyResult path, TruthSolution& truth) {
  RunResult out;
  out.config = config;
  out.strategy = strategy;
  out.path = std::move(path);
  out.warnings = config.warnings;
  for (const Measurement& m : out.path.data.records) {
    Measurement clean = m;
    clean.value = truth.flux(m.theta, m.step);
    out.truth_flux.push_back(clean);
  }
  for (const WindowLog& w : out.path.windows) {
    out.summaries.push_back(summarize_chain(w.posterior.chain, config.truth.kind,
                                            config.truth.fourier_order, config.sampler.burn_in));
  }
  for (std::size_t k = 1; k < out.path.windows.size(); ++k) {
    const double a = out.path.windows[k - 1].theta, b = out.path.windows[k].theta;
    if (a != b && !check_uniqueness_condition(a, b)) {
      out.warnings.push_back("dwell angles " + num(a) + " and " + num(b) +
                             " (windows " + std::to_string(k - 1) + ", " + std::to_string(k) +
                             ") differ by a rational multiple of pi");
    }
  }
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  const StrategyParams strategy = refined_strategy(config);
  TruthSolution truth(build_mesh(config.fine.n_r, config.fine.n_theta), config.truth,
                      config.strength, strategy.dt, config.load_points);
  InversionModel model(build_mesh(config.coarse.n_r, config.coarse.n_theta), strategy.dt,
                       config.truth.kind, config.truth.fourier_order, config.strength,
                       config.load_points);
  Rng noise = make_stream(config.seed, "truth-noise");
  Rng sampler = make_stream(config.sampler_seed, "sampler");
  const InferenceFn infer = make_inference(config, model, sampler);
  StrategyResult path = run_strategy(strategy, truth, infer, config.theta0, config.sigma, noise);
  return finish(config, strategy, std::move(path), truth);
}

RunResult run_fixed_baseline(const ExperimentConfig& config, const RunResult& moving) {
  const StrategyParams strategy = refined_strategy(config);
  TruthSolution truth(build_mesh(config.fine.n_r, config.fine.n_theta), config.truth,
                      config.strength, strategy.dt, config.load_points);
  InversionModel model(build_mesh(config.coarse.n_r, config.coarse.n_theta), strategy.dt,
                       config.truth.kind, config.truth.fourier_order, config.strength,
                       config.load_points);
  Rng noise = make_stream(config.seed, "truth-noise");
  Rng sampler = make_stream(config.sampler_seed, "sampler");
  const InferenceFn infer = make_inference(config, model, sampler);
  StrategyResult path = run_fixed_sensor(strategy, moving.path, truth, infer, config.theta0,
                                         config.sigma, noise);
  return finish(config, strategy, std::move(path), truth);
}

double parameter_error(ShapeKind kind, const Eigen::VectorXd& xi, std::span<const double> truth) {
  if (static_cast<std::size_t>(xi.size()) != truth.size()) {
    throw ValidationError("parameter_error: length mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    double d = xi[i] - truth[static_cast<std::size_t>(i)];
    if (kind != ShapeKind::FourierStar && i == 1) {
      d = std::remainder(d, kTwoPi);
    }
    sum += d * d;
  }
  return std::sqrt(sum);
}

void write_chain_csv(std::ostream& os, const ChainResult& chain, ShapeKind kind, int fourier_order) {
  const std::size_t p = parameter_count(kind, fourier_order);
  os << "iter,accepted,phi";
  for (std::size_t i = 1; i <= p; ++i) os << ",z_" << i;
  for (std::size_t i = 1; i <= p; ++i) os << ",xi_" << i;
  os << "\n";
  std::string line;
  for (const ChainRecord& r : chain.records) {
    line = std::to_string(r.iter) + (r.accepted ? ",1," : ",0,") + num(r.phi);
    for (Eigen::Index i = 0; i < r.z.size(); ++i) line += "," + num(r.z[i]);
    const ShapeParams shape =
        to_physical(std::span<const double>(r.z.data(), r.z.size()), kind, fourier_order);
    for (double x : shape.xi) line += "," + num(x);
    os << line << "\n";
  }
}

void write_boundary_csv(std::ostream& os, const ShapeParams& shape, int samples) {
  os << "x,y\n";
  for (int k = 0; k <= samples; ++k) {
    const Point p = boundary_point(shape, kTwoPi * (k % samples) / samples);
    os << num(p.x) << "," << num(p.y) << "\n";
  }
}

RunArtifacts write_artifacts(const RunResult& result, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  RunArtifacts art;
  art.directory = dir;
  const ExperimentConfig& c = result.config;
  const ShapeKind kind = c.truth.kind;
  const int order = c.truth.fourier_order;
  const double dt = result.strategy.dt;

  auto add = [&](const std::string& name) {
    art.files.push_back(dir / name);
    return open_out(dir / name);
  };
  {
    auto os = add("config.cfg");
    os << to_text(c);
  }
  {
    auto os = add("movement.csv");
    write_movement_log(os, result.path, dt);
  }
  {
    auto os = add("data.csv");
    write_flux_csv(os, result.path.data.records);
  }
  {
    auto os = add("truth_flux.csv");
    write_flux_csv(os, result.truth_flux);
  }
  {
    auto os = add("truth_boundary.csv");
    write_boundary_csv(os, c.truth);
  }

  nlohmann::json summary;
  summary["name"] = c.name;
  summary["shape"] = std::string(to_string(kind));
  summary["fourier_order"] = order;
  summary["xi_true"] = c.truth.xi;
  summary["b"] = c.strength;
  summary["sigma"] = c.sigma;
  summary["seed"] = c.seed;
  summary["sampler_seed"] = c.sampler_seed;
  summary["dt"] = dt;
  summary["time_refine"] = effective_refine(c);
  summary["burn_in"] = c.sampler.burn_in;
  summary["fine_grid"] = {c.fine.n_r, c.fine.n_theta};
  summary["coarse_grid"] = {c.coarse.n_r, c.coarse.n_theta};
  summary["stop"] = std::string(to_string(result.path.stop));
  summary["final_theta"] = result.path.final_theta;
  summary["warnings"] = result.warnings;
  nlohmann::json windows = nlohmann::json::array();
  for (std::size_t k = 0; k < result.path.windows.size(); ++k) {
    const WindowLog& w = result.path.windows[k];
    const ChainSummary& s = result.summaries[k];
    const std::string chain_name = "chain_window_" + std::to_string(w.k) + ".csv";
    const std::string recon_name = "reconstruction_window_" + std::to_string(w.k) + ".csv";
    {
      auto os = add(chain_name);
      write_chain_csv(os, w.posterior.chain, kind, order);
    }
    {
      auto os = add(recon_name);
      write_boundary_csv(os, make_shape(kind, to_std(s.xi_mean), order));
    }
    nlohmann::json j;
    j["k"] = w.k;
    j["theta"] = w.theta;
    j["T_start"] = w.start_step * dt;
    j["T_end"] = w.end_step * dt;
    j["dir"] = std::string(to_string(w.dir));
    j["stop"] = std::string(to_string(w.stop));
    j["phi_theta"] = w.phi_theta;
    j["chain_file"] = chain_name;
    j["reconstruction_file"] = recon_name;
    j["iterations"] = w.posterior.chain.records.size();
    j["retained"] = s.retained;
    j["acceptance_rate"] = s.acceptance_rate;
    j["terminal_acceptance"] = s.terminal_acceptance;
    j["terminal_start"] = w.posterior.chain.terminal_start;
    j["beta1"] = w.posterior.chain.beta1;
    j["beta2"] = w.posterior.chain.beta2;
    j["z_mean"] = to_std(s.z_mean);
    j["z_std"] = to_std(s.z_std);
    j["xi_mean"] = to_std(s.xi_mean);
    j["xi_std"] = to_std(s.xi_std);
    nlohmann::json cov = nlohmann::json::array();
    const Eigen::MatrixXd& C = w.posterior.chain.covariance;
    for (Eigen::Index r = 0; r < C.rows(); ++r) cov.push_back(to_std(C.row(r).transpose()));
    j["covariance"] = cov;
    j["clamped_eigenvalues"] = w.posterior.chain.clamped_eigenvalues;
    windows.push_back(j);
  }
  summary["windows"] = windows;
  {
    auto os = add("summary.json");
    os << summary.dump(2) << "\n";
  }
  return art;
}

OracleReport oracle_compare(const ShapeParams& shape, double strength, GridSpec grid, double dt,
                            const std::vector<double>& times, int angles, int basis_size,
                            int load_points) {
  if (angles < 1) throw ValidationError("oracle_compare needs at least one angle");
  std::vector<int> steps;
  for (double t : times) {
    const double s = t / dt;
    if (!(t > 0.0) || std::abs(s - std::round(s)) > 1e-9) {
      throw ValidationError("oracle time " + num(t) + " is not a positive multiple of dt");
    }
    steps.push_back(static_cast<int>(std::llround(s)));
  }
  const EigenBasis basis = build_basis(basis_size);
  const FourierCoeffs coeffs = fourier_coeff(shape, basis, strength);
  std::vector<double> steady(static_cast<std::size_t>(angles));
  for (int a = 0; a < angles; ++a) steady[a] = steady_flux(shape, strength, kTwoPi * a / angles);

  TruthSolution fem(build_mesh(grid.n_r, grid.n_theta), shape, strength, dt, load_points);
  OracleReport report;
  report.grid = grid;
  double err2 = 0.0, ref2 = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::size_t first = report.rows.size();
    double peak = 0.0;
    for (int a = 0; a < angles; ++a) {
      const double theta = kTwoPi * a / angles;
      OracleRow row{steps[i] * dt, theta, fem.flux(theta, steps[i]),
                    steady[a] + flux_series_transient(theta, steps[i] * dt, coeffs, basis),
                    flux_series(theta, steps[i] * dt, coeffs, basis)};
      peak = std::max(peak, std::abs(row.series));
      report.rows.push_back(row);
    }
    for (std::size_t r = first; r < report.rows.size(); ++r) {
      const OracleRow& row = report.rows[r];
      const double e = std::abs(row.fem - row.series);
      report.max_relative = std::max(report.max_relative, e / std::abs(row.series));
      report.max_relative_to_peak = std::max(report.max_relative_to_peak, e / peak);
      report.max_relative_partial = std::max(
          report.max_relative_partial, std::abs(row.fem - row.partial_sum) / std::abs(row.partial_sum));
      err2 += e * e;
      ref2 += row.series * row.series;
    }
  }
  report.l2_relative = std::sqrt(err2 / ref2);
  return report;
}

void write_oracle_csv(std::ostream& os, const OracleReport& report) {
  os << "t,theta,fem,series,partial_sum,rel_error\n";
  for (const OracleRow& r : report.rows) {
    os << num(r.t) << "," << num(r.theta) << "," << num(r.fem) << "," << num(r.series) << ","
       << num(r.partial_sum) << "," << num(std::abs(r.fem - r.series) / std::abs(r.series)) << "\n";
  }
}

}  // namespace heatsleuth
