#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "heatsleuth/errors.hpp"
#include "heatsleuth/experiment.hpp"
#include "heatsleuth/spectral.hpp"
#include "heatsleuth/strategy.hpp"

using namespace heatsleuth;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

double circle_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 2 * kPi);
  return std::min(d, 2 * kPi - d);
}

// |flux| = g(t) (1.5 + cos(theta - peak)): one strict maximum at `peak`
class BumpProfile : public FluxSource {
 public:
  explicit BumpProfile(double peak) : peak_(peak) {}
  double flux(double theta, int step) override {
    ++calls;
    return -(1.0 - std::exp(-0.05 * step)) * (1.5 + std::cos(theta - peak_));
  }
  int calls = 0;

 private:
  double peak_;
};

WindowPosterior no_inference(const MeasurementSet&, const InferenceRequest&) { return {}; }

StrategyParams quarter_steps() {
  StrategyParams p;
  p.m = 10;
  p.c1 = 1.0 / 40;
  p.speed = 10 * kPi;  // pi/4 in 1/40, pi/8 in 1/80
  return p;
}

}  // namespace

TEST_CASE("direction rule") {
  CHECK(decide_direction(0.5) == Direction::CCW);
  CHECK(decide_direction(-0.5) == Direction::CW);
  CHECK(decide_direction(0.0) == Direction::CW);
  CHECK(decide_direction(-0.0) == Direction::CW);
  for (double x : {1e-300, 1e-8, 0.3, 7.0, 1e200}) {
    CHECK(decide_direction(x) == Direction::CCW);
    CHECK(decide_direction(-x) == Direction::CW);
  }
}

TEST_CASE("angular derivative") {
  CHECK(angular_derivative({0.2, 0.5, 0.2}, 0.1) == 0.0);
  CHECK(angular_derivative({0.1, 0.0, 0.3}, kPi / 40) == Approx(4 / kPi));
  // absolute values: sign of the flux does not matter
  CHECK(angular_derivative({-0.1, 0.0, -0.3}, kPi / 40) == Approx(4 / kPi));
}

TEST_CASE("step sizes") {
  StrategyParams p;
  p.m = 10;
  p.c1 = 1.0 / 20;
  p.speed = 20 * kPi;
  TravelBudget b = step_size(Direction::CW, Direction::None, p);
  CHECK(b.distance == Approx(kPi / 2));
  CHECK(b.travel_time == Approx(1.0 / 40));
  b = step_size(Direction::CW, Direction::CCW, p);
  CHECK(b.distance == Approx(kPi / 4));
  CHECK(b.travel_time == Approx(1.0 / 80));
  p.m = 15;
  p.speed = 30 * kPi;
  b = step_size(Direction::CCW, Direction::CCW, p);
  CHECK(b.distance == Approx(3 * kPi / 4));
  CHECK(b.travel_time == Approx(1.0 / 40));
  // floor(m / 2) on a reversal
  b = step_size(Direction::CW, Direction::CCW, p);
  CHECK(b.distance == Approx(7 * kPi / 20));
}

TEST_CASE("sensor moves") {
  SensorState s{26 * kPi / 40, Direction::None, 0};
  s = move_sensor(s, Direction::CW, kPi / 4);
  CHECK(s.theta == Approx(16 * kPi / 40));
  CHECK(s.prev_dir == Direction::CW);
  CHECK(s.window == 1);
  CHECK(move_sensor({6 * kPi / 40, Direction::CW, 2}, Direction::CCW, kPi / 8).theta ==
        Approx(11 * kPi / 40));
  CHECK(move_sensor({0.0, Direction::None, 0}, Direction::CW, kPi / 4).theta == Approx(7 * kPi / 4));
  const double wrapped = move_sensor({6.0, Direction::None, 0}, Direction::CCW, 1.0).theta;
  CHECK(wrapped >= 0.0);
  CHECK(wrapped < 2 * kPi);
  CHECK_THROWS_AS(move_sensor({}, Direction::CW, -0.1), ValidationError);
}

TEST_CASE("stop rule branch table") {
  const EndTriple peak{0.1, 0.3, 0.1};
  const EndTriple rising{0.1, 0.2, 0.3};
  const EndTriple tie{0.3, 0.3, 0.1};  // not strict
  const EndTriple negative_peak{-0.1, -0.3, -0.1};
  const Direction dirs[] = {Direction::CW, Direction::CCW};
  const Direction prevs[] = {Direction::None, Direction::CW, Direction::CCW};
  for (Direction d : dirs) {
    for (Direction p : prevs) {
      CAPTURE(to_string(d));
      CAPTURE(to_string(p));
      CHECK(check_stop(peak, d, p) == StopFlag::LocalMax);
      CHECK(check_stop(negative_peak, d, p) == StopFlag::LocalMax);
      const StopFlag other = (p != Direction::None && d != p) ? StopFlag::Reversal : StopFlag::Continue;
      CHECK(check_stop(rising, d, p) == other);
      CHECK(check_stop(tie, d, p) == other);
    }
  }
  CHECK(check_stop(rising, Direction::CW, Direction::CCW) == StopFlag::Reversal);
  CHECK(check_stop(rising, Direction::CCW, Direction::CCW) == StopFlag::Continue);
}

TEST_CASE("travel steps") {
  CHECK(travel_steps(1.0 / 40, 1.0 / 400) == 10);
  CHECK(travel_steps(0.0, 1.0 / 400) == 0);
  CHECK_THROWS_AS(travel_steps(0.013, 1.0 / 400), ValidationError);
}

TEST_CASE("window sampling") {
  BumpProfile truth(1.0);
  Rng rng(1);
  SUBCASE("first window times") {
    const auto w = sample_window(0, 0, 0, 80, 0.5, 80, truth, 0.0, 1.0 / 400, rng);
    REQUIRE(w.size() == 80);
    CHECK(w.front().t == Approx(1.0 / 400));
    CHECK(w.back().t == Approx(80.0 / 400));
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w[i].step == static_cast<int>(i) + 1);
      CHECK(w[i].value == truth.flux(0.5, w[i].step));  // sigma = 0 is exact
    }
  }
  SUBCASE("arrival delay and stride") {
    const auto w = sample_window(1, 80, 10, 170, 0.5, 40, truth, 0.0, 1.0 / 400, rng);
    REQUIRE(w.size() == 40);
    CHECK(w.front().step == 92);
    CHECK(w.back().step == 170);
    for (const Measurement& m : w) CHECK(m.window == 1);
  }
  SUBCASE("noise statistics") {
    const double sigma = 0.05;
    double sum = 0.0, sum2 = 0.0;
    const int reps = 125, per = 80;
    for (int r = 0; r < reps; ++r) {
      for (const Measurement& m : sample_window(0, 0, 0, 80, 2.0, per, truth, sigma, 1.0 / 400, rng)) {
        const double e = m.value - truth.flux(2.0, m.step);
        sum += e;
        sum2 += e * e;
      }
    }
    const double n = reps * per;
    const double sd = std::sqrt((sum2 - sum * sum / n) / (n - 1));
    CHECK(std::abs(sum / n) <= 3 * sigma / std::sqrt(n));
    CHECK(std::abs(sd - sigma) <= 3 * sigma / std::sqrt(2 * n));
  }
  CHECK_THROWS_AS(sample_window(0, 0, 80, 80, 0.5, 80, truth, 0.0, 1.0 / 400, rng), ValidationError);
  CHECK_THROWS_AS(sample_window(0, 0, 0, 80, 0.5, 30, truth, 0.0, 1.0 / 400, rng), ValidationError);
}

TEST_CASE("finite-difference direction agrees with the series derivative") {
  const ShapeParams circle = make_shape(ShapeKind::Circle, {0.7, kPi / 2, 0.2});
  TruthSolution truth(build_mesh(11, 11), circle, 50.0, 1.0 / 400);
  const EigenBasis basis = build_basis(200);
  const FourierCoeffs coeffs = fourier_coeff(circle, basis, 50.0);
  Rng rng(0);
  for (double theta : {26 * kPi / 40, 16 * kPi / 40, 6 * kPi / 40}) {
    const EndTriple t = measure_triple(truth, theta, kPi / 11, 80, 0.0, rng);
    // flux is non-positive, so d|flux|/dtheta = -d(flux)/dtheta
    const double analytic = -flux_series_dtheta(theta, 0.2, coeffs, basis);
    CAPTURE(theta);
    CHECK(std::signbit(angular_derivative(t, kPi / 11)) == std::signbit(analytic));
  }
}

TEST_CASE("noiseless approach to a single maximum") {
  const double peak = kPi;
  BumpProfile truth(peak);
  Rng rng(2);
  const StrategyParams p = quarter_steps();
  const StrategyResult r = run_strategy(p, truth, no_inference, 0.3, 0.0, rng);
  REQUIRE(r.windows.size() >= 2);
  CHECK(r.stop == StopFlag::Reversal);
  // closer at every move until the stop fires
  for (std::size_t k = 1; k < r.windows.size(); ++k) {
    CAPTURE(k);
    CHECK(circle_distance(r.windows[k].theta, peak) < circle_distance(r.windows[k - 1].theta, peak));
  }
  CHECK(r.windows.back().stop == StopFlag::Final);
}

TEST_CASE("maximum at the start stops immediately") {
  BumpProfile truth(2.0);
  Rng rng(3);
  const StrategyResult r = run_strategy(quarter_steps(), truth, no_inference, 2.0, 0.0, rng);
  CHECK(r.windows.size() == 1);
  CHECK(r.stop == StopFlag::LocalMax);
  CHECK(r.final_theta == 2.0);
}

TEST_CASE("data growth and movement replay") {
  BumpProfile truth(4.0);
  Rng rng(4);
  StrategyParams p = quarter_steps();
  p.samples_per_window = 40;
  int seen_records = 0;
  auto counting = [&](const MeasurementSet& d, const InferenceRequest& req) {
    CHECK(static_cast<int>(d.records.size()) == 40 * (req.window + 1));
    seen_records = static_cast<int>(d.records.size());
    return WindowPosterior{};
  };
  const StrategyResult r = run_strategy(p, truth, counting, 0.5, 0.02, rng);
  CHECK(r.data.records.size() == 40 * r.windows.size());
  CHECK(seen_records == static_cast<int>(r.data.records.size()));
  // one end-of-window triple per window that made a decision
  const std::size_t decided = r.stop == StopFlag::Reversal ? r.windows.size() - 1 : r.windows.size();
  CHECK(r.data.triples.size() == decided);

  double theta = r.windows.front().theta;
  for (std::size_t k = 0; k + 1 < r.windows.size(); ++k) {
    const WindowLog& w = r.windows[k];
    theta = move_sensor({theta, Direction::None, 0}, w.dir, w.distance).theta;
    CHECK(theta == r.windows[k + 1].theta);  // bit-exact
    CHECK(r.windows[k + 1].travel_steps == travel_steps(w.distance / p.speed, p.dt));
    CHECK(r.windows[k + 1].start_step == w.end_step + r.windows[k + 1].travel_steps);
  }
  CHECK(theta == r.final_theta);

  std::ostringstream log;
  write_movement_log(log, r, p.dt);
  CHECK(log.str().rfind("k,T_start,T_end,theta,dir,d_k,b_k,stop_flag\n", 0) == 0);
  std::ostringstream flux;
  write_flux_csv(flux, r.data.records);
  CHECK(flux.str().rfind("t,theta,flux\n", 0) == 0);
}

TEST_CASE("direction taken from the previous window's triple") {
  for (DirectionSource source : {DirectionSource::Current, DirectionSource::PreviousWindow}) {
    BumpProfile truth(kPi);
    Rng rng(5);
    StrategyParams p = quarter_steps();
    p.direction_source = source;
    const StrategyResult r = run_strategy(p, truth, no_inference, 0.3, 0.0, rng);
    for (std::size_t k = 0; k < r.data.triples.size(); ++k) {
      const std::size_t from = (source == DirectionSource::PreviousWindow && k > 0) ? k - 1 : k;
      CHECK(r.windows[k].phi_theta == angular_derivative(r.data.triples[from].values, p.delta_theta));
    }
  }
}

TEST_CASE("fixed sensor baseline mirrors the window schedule") {
  BumpProfile truth(kPi);
  Rng rng(6);
  const StrategyParams p = quarter_steps();
  const StrategyResult moving = run_strategy(p, truth, no_inference, 0.3, 0.0, rng);
  const StrategyResult fixed = run_fixed_sensor(p, moving, truth, no_inference, 0.3, 0.0, rng);
  REQUIRE(fixed.windows.size() == moving.windows.size());
  for (std::size_t k = 0; k < fixed.windows.size(); ++k) {
    CHECK(fixed.windows[k].theta == 0.3);
    CHECK(fixed.windows[k].start_step == moving.windows[k].start_step);
    CHECK(fixed.windows[k].end_step == moving.windows[k].end_step);
  }
  CHECK(fixed.data.records.size() == moving.data.records.size());
}

TEST_CASE("strategy parameter validation") {
  StrategyParams p;
  CHECK_NOTHROW(validate(p));
  p.m = 0;
  CHECK_THROWS_AS(validate(p), ValidationError);
  p = {};
  p.samples_per_window = 30;
  CHECK_THROWS_AS(validate(p), ValidationError);
  p = {};
  p.speed = 0.0;
  CHECK_THROWS_AS(validate(p), ValidationError);
}
