#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "heatsleuth/sampler.hpp"

namespace heatsleuth {

enum class Direction { None, CW, CCW };
enum class StopFlag { Continue, LocalMax, Reversal, Final, WindowLimit };

std::string_view to_string(Direction d);
std::string_view to_string(StopFlag s);

// Where the direction decision takes its angular derivative from. Current is
// the literal listing; PreviousWindow uses the end-of-window triple of the
// window before (the first decision uses the current one).
enum class DirectionSource { Current, PreviousWindow };

struct SensorState {
  double theta = 0.0;  // in [0, 2pi)
  Direction prev_dir = Direction::None;
  int window = 0;
};

// Movement and sampling parameters. Times are counted in steps of the
// shared time grid (dt); a window spans window_steps steps after arrival.
struct StrategyParams {
  int m = 10;
  double c1 = 1.0 / 20.0;
  double speed = 20.0 * 3.14159265358979323846;  // c, arc length per unit time
  int samples_per_window = 80;                   // N_t
  double delta_theta = 3.14159265358979323846 / 10.0;
  int window_steps = 80;
  double dt = 1.0 / 400.0;
  int max_windows = 12;
  DirectionSource direction_source = DirectionSource::Current;
};

void validate(const StrategyParams& params);

// arc distance d_k and travel time b_{k+1} = d_k / c
struct TravelBudget {
  double distance = 0.0;
  double travel_time = 0.0;
};

// Whole number of grid steps in a travel time; throws ValidationError when
// the travel time is not a multiple of dt.
int travel_steps(double travel_time, double dt);

// Noisy flux at theta - dtheta, theta, theta + dtheta at the end of a window.
struct EndTriple {
  double minus = 0.0;
  double center = 0.0;
  double plus = 0.0;
};

// (|plus| - |minus|) / (2 dtheta)
double angular_derivative(const EndTriple& triple, double delta_theta);
Direction decide_direction(double phi_theta);
TravelBudget step_size(Direction dir, Direction prev_dir, const StrategyParams& params);
SensorState move_sensor(SensorState sensor, Direction dir, double distance);
StopFlag check_stop(const EndTriple& triple, Direction dir, Direction prev_dir);

// Noise-free boundary flux of the true source on the step grid.
class FluxSource {
 public:
  virtual ~FluxSource() = default;
  virtual double flux(double theta, int step) = 0;
};

struct Measurement {
  int window = 0;
  int step = 0;
  double t = 0.0;
  double theta = 0.0;
  double value = 0.0;
};

struct WindowTriple {
  int window = 0;
  int step = 0;
  double theta = 0.0;
  EndTriple values;
};

// Accumulated data: window samples (used for inference) and end-of-window
// triples (used only for steering).
struct MeasurementSet {
  std::vector<Measurement> records;
  std::vector<WindowTriple> triples;
};

// Writes `t,theta,flux` rows.
void write_flux_csv(std::ostream& os, const std::vector<Measurement>& records);

// N_t equally spaced steps in (start_step + travel_steps, end_step], right end
// included, flux plus N(0, sigma^2) noise. Throws ValidationError when the
// travel time eats the window or N_t does not divide the measuring span.
std::vector<Measurement> sample_window(int window, int start_step, int travel, int end_step,
                                       double theta, int samples, FluxSource& truth, double sigma,
                                       double dt, Rng& rng);

EndTriple measure_triple(FluxSource& truth, double theta, double delta_theta, int step,
                         double sigma, Rng& rng);

struct InferenceRequest {
  int window = 0;
  double sensor_theta = 0.0;
  int end_step = 0;  // observation time t-bar of the window
  double delta_theta = 0.0;
};

struct WindowPosterior {
  ChainResult chain;
  Eigen::VectorXd z_mean;
};

using InferenceFn = std::function<WindowPosterior(const MeasurementSet&, const InferenceRequest&)>;

struct WindowLog {
  int k = 0;
  int start_step = 0;  // first admissible step T_k + b_k
  int end_step = 0;    // T_{k+1}
  double theta = 0.0;
  Direction dir = Direction::None;  // decision taken after this window
  double distance = 0.0;            // d_k decided after this window
  int travel_steps = 0;             // b_k consumed before this window
  double travel_time = 0.0;
  StopFlag stop = StopFlag::Continue;
  double phi_theta = 0.0;
  WindowPosterior posterior;
};

struct StrategyResult {
  std::vector<WindowLog> windows;
  MeasurementSet data;
  double final_theta = 0.0;
  StopFlag stop = StopFlag::Continue;

  const WindowPosterior& final_posterior() const { return windows.back().posterior; }
};

// Measure -> Infer -> Move until a strict local maximum (stop) or a direction
// reversal (one more window, then stop), capped at params.max_windows.
StrategyResult run_strategy(const StrategyParams& params, FluxSource& truth,
                            const InferenceFn& infer, double theta0, double sigma, Rng& noise_rng);

// Same data budget as `reference` with the sensor frozen at theta0: one
// window per reference window, at the same times.
StrategyResult run_fixed_sensor(const StrategyParams& params, const StrategyResult& reference,
                                FluxSource& truth, const InferenceFn& infer, double theta0,
                                double sigma, Rng& noise_rng);

// Writes `k,T_start,T_end,theta,dir,d_k,b_k,stop_flag` rows.
void write_movement_log(std::ostream& os, const StrategyResult& result, double dt);

}  // namespace heatsleuth
