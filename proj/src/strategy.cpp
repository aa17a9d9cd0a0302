#include "heatsleuth/strategy.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>

#include "heatsleuth/errors.hpp"

namespace heatsleuth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double reduce_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

}  // namespace

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::None: return "none";
    case Direction::CW: return "cw";
    case Direction::CCW: return "ccw";
  }
  return "none";
}

std::string_view to_string(StopFlag s) {
  switch (s) {
    case StopFlag::Continue: return "continue";
    case StopFlag::LocalMax: return "local_max";
    case StopFlag::Reversal: return "reversal";
    case StopFlag::Final: return "final";
    case StopFlag::WindowLimit: return "window_limit";
  }
  return "continue";
}

void validate(const StrategyParams& p) {
  auto fail = [](const std::string& msg) { throw ValidationError("strategy: " + msg); };
  if (p.m < 1) fail("m must be >= 1");
  if (!(p.c1 > 0.0)) fail("c1 must be positive");
  if (!(p.speed > 0.0)) fail("sensor speed c must be positive");
  if (p.samples_per_window < 1) fail("N_t must be >= 1");
  if (!(p.delta_theta > 0.0)) fail("delta_theta must be positive");
  if (p.window_steps < 1) fail("window_steps must be >= 1");
  if (p.window_steps % p.samples_per_window != 0) {
    fail("N_t must divide the number of steps per window");
  }
  if (!(p.dt > 0.0)) fail("dt must be positive");
  if (p.max_windows < 1) fail("max_windows must be >= 1");
}

int travel_steps(double travel_time, double dt) {
  const double ratio = travel_time / dt;
  const long long steps = std::llround(ratio);
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-6) {
    throw ValidationError("travel time " + std::to_string(travel_time) +
                          " is not a whole number of time steps (dt = " + std::to_string(dt) +
                          "); refine the time grid");
  }
  return static_cast<int>(steps);
}

double angular_derivative(const EndTriple& t, double delta_theta) {
  return (std::abs(t.plus) - std::abs(t.minus)) / (2.0 * delta_theta);
}

Direction decide_direction(double phi_theta) {
  return phi_theta > 0.0 ? Direction::CCW : Direction::CW;
}

TravelBudget step_size(Direction dir, Direction prev_dir, const StrategyParams& p) {
  const bool full = prev_dir == Direction::None || dir == prev_dir;
  const int multiplier = full ? p.m : p.m / 2;
  const double d = multiplier * p.c1 * std::numbers::pi;
  return {d, d / p.speed};
}

SensorState move_sensor(SensorState sensor, Direction dir, double distance) {
  if (distance < 0.0) throw ValidationError("move distance must be >= 0");
  if (dir == Direction::CCW) sensor.theta = reduce_angle(sensor.theta + distance);
  if (dir == Direction::CW) sensor.theta = reduce_angle(sensor.theta - distance);
  sensor.prev_dir = dir;
  ++sensor.window;
  return sensor;
}

StopFlag check_stop(const EndTriple& t, Direction dir, Direction prev_dir) {
  const double c = std::abs(t.center);
  if (c > std::abs(t.minus) && c > std::abs(t.plus)) return StopFlag::LocalMax;
  if (prev_dir != Direction::None && dir != prev_dir) return StopFlag::Reversal;
  return StopFlag::Continue;
}

void write_flux_csv(std::ostream& os, const std::vector<Measurement>& records) {
  os << "t,theta,flux\n";
  char line[128];
  for (const Measurement& m : records) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", m.t, m.theta, m.value);
    os << line;
  }
}

std::vector<Measurement> sample_window(int window, int start_step, int travel, int end_step,
                                       double theta, int samples, FluxSource& truth, double sigma,
                                       double dt, Rng& rng) {
  const int first = start_step + travel;
  const int span = end_step - first;
  if (travel < 0 || span <= 0) {
    throw ValidationError("sensor cannot arrive before the window closes (window " +
                          std::to_string(window) + ")");
  }
  if (samples < 1 || span % samples != 0) {
    throw ValidationError("N_t must divide the measuring span of window " + std::to_string(window));
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  const int stride = span / samples;
  std::vector<Measurement> out;
  out.reserve(samples);
  for (int j = 1; j <= samples; ++j) {
    const int step = first + j * stride;
    const double eps = noise(rng);
    out.push_back({window, step, step * dt, theta, truth.flux(theta, step) + sigma * eps});
  }
  return out;
}

EndTriple measure_triple(FluxSource& truth, double theta, double delta_theta, int step,
                         double sigma, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  EndTriple t;
  t.minus = truth.flux(reduce_angle(theta - delta_theta), step) + sigma * noise(rng);
  t.center = truth.flux(theta, step) + sigma * noise(rng);
  t.plus = truth.flux(reduce_angle(theta + delta_theta), step) + sigma * noise(rng);
  return t;
}

namespace {

WindowLog measure_and_infer(const StrategyParams& p, FluxSource& truth, const InferenceFn& infer,
                            MeasurementSet& data, int k, int start, int travel, double theta,
                            double sigma, Rng& noise_rng) {
  WindowLog log;
  log.k = k;
  log.start_step = start + travel;
  log.end_step = start + travel + p.window_steps;
  log.theta = theta;
  log.travel_steps = travel;
  log.travel_time = travel * p.dt;
  std::vector<Measurement> window = sample_window(k, start, travel, log.end_step, theta,
                                                  p.samples_per_window, truth, sigma, p.dt,
                                                  noise_rng);
  data.records.insert(data.records.end(), window.begin(), window.end());
  log.posterior = infer(data, {k, theta, log.end_step, p.delta_theta});
  return log;
}

}  // namespace

StrategyResult run_strategy(const StrategyParams& p, FluxSource& truth, const InferenceFn& infer,
                            double theta0, double sigma, Rng& noise_rng) {
  validate(p);
  StrategyResult result;
  SensorState sensor{reduce_angle(theta0), Direction::None, 0};
  int start = 0;   // T_k
  int travel = 0;  // b_k in steps
  std::optional<EndTriple> previous_triple;

  for (int k = 0;; ++k) {
    WindowLog log = measure_and_infer(p, truth, infer, result.data, k, start, travel,
                                      sensor.theta, sigma, noise_rng);
    const EndTriple triple =
        measure_triple(truth, sensor.theta, p.delta_theta, log.end_step, sigma, noise_rng);
    result.data.triples.push_back({k, log.end_step, sensor.theta, triple});

    const EndTriple& steering =
        p.direction_source == DirectionSource::PreviousWindow && previous_triple
            ? *previous_triple
            : triple;
    log.phi_theta = angular_derivative(steering, p.delta_theta);
    const Direction dir = decide_direction(log.phi_theta);
    const Direction prev = sensor.prev_dir;
    const TravelBudget budget = step_size(dir, prev, p);
    const SensorState next = move_sensor(sensor, dir, budget.distance);
    log.dir = dir;
    log.distance = budget.distance;
    log.stop = check_stop(triple, dir, prev);
    if (log.stop == StopFlag::Continue && k + 1 >= p.max_windows) log.stop = StopFlag::WindowLimit;
    const int end = log.end_step;
    const StopFlag stop = log.stop;
    result.windows.push_back(std::move(log));
    previous_triple = triple;

    if (stop == StopFlag::LocalMax || stop == StopFlag::WindowLimit) {
      result.final_theta = sensor.theta;
      result.stop = stop;
      return result;
    }
    const int next_travel = travel_steps(budget.travel_time, p.dt);
    if (stop == StopFlag::Reversal) {
      WindowLog last = measure_and_infer(p, truth, infer, result.data, k + 1, end, next_travel,
                                         next.theta, sigma, noise_rng);
      last.stop = StopFlag::Final;
      result.windows.push_back(std::move(last));
      result.final_theta = next.theta;
      result.stop = StopFlag::Reversal;
      return result;
    }
    sensor = next;
    start = end;
    travel = next_travel;
  }
}

StrategyResult run_fixed_sensor(const StrategyParams& p, const StrategyResult& reference,
                                FluxSource& truth, const InferenceFn& infer, double theta0,
                                double sigma, Rng& noise_rng) {
  validate(p);
  StrategyResult result;
  const double theta = reduce_angle(theta0);
  int start = 0;
  for (const WindowLog& ref : reference.windows) {
    WindowLog log = measure_and_infer(p, truth, infer, result.data, ref.k, start,
                                      ref.travel_steps, theta, sigma, noise_rng);
    log.stop = StopFlag::Continue;
    start = log.end_step;
    result.windows.push_back(std::move(log));
  }
  if (!result.windows.empty()) result.windows.back().stop = StopFlag::Final;
  result.final_theta = theta;
  result.stop = StopFlag::Final;
  return result;
}

void write_movement_log(std::ostream& os, const StrategyResult& result, double dt) {
  os << "k,T_start,T_end,theta,dir,d_k,b_k,stop_flag\n";
  char line[256];
  for (const WindowLog& w : result.windows) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%s,%.17g,%.17g,%s\n", w.k,
                  w.start_step * dt, w.end_step * dt, w.theta, std::string(to_string(w.dir)).c_str(),
                  w.distance, w.travel_time, std::string(to_string(w.stop)).c_str());
    os << line;
  }
}

}  // namespace heatsleuth
