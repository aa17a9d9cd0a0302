#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "heatsleuth/polar_fem.hpp"

namespace heatsleuth {

// A boundary-flux observation on a time grid: angle and step index n (time n dt).
struct FluxProbe {
  double theta = 0.0;
  int step = 0;
};

// Linear response of boundary flux to a time-constant load with zero initial
// data: flux(theta, n dt) = w(theta, n) . F_free, identical (up to rounding)
// to running the backward Euler stepper for n steps.
//
// With A = M + dt K and U^n = A^{-1}(M U^{n-1} + dt F), the row is
// w(theta, n) = dt * sum_{j<n} y_j where y_j = A^{-1} v_j, v_0 = l_theta and
// v_{j+1} = M y_j (l_theta is the flux functional). Each angle costs one
// solve per step and the sweep is cached and extended on demand.
class FluxResponse {
 public:
  FluxResponse(std::shared_ptr<const HeatStepper> stepper, PolarMesh mesh);

  Eigen::RowVectorXd row(double theta, int step);
  Eigen::MatrixXd matrix(std::span<const FluxProbe> probes);

  const PolarMesh& mesh() const { return mesh_; }
  const HeatStepper& stepper() const { return *stepper_; }

 private:
  struct Sweep {
    Eigen::VectorXd v;
    Eigen::VectorXd acc;
    std::vector<Eigen::RowVectorXd> rows;  // rows[n] for n = 0..computed
  };
  Sweep& sweep_to(double theta, int step);

  std::shared_ptr<const HeatStepper> stepper_;
  PolarMesh mesh_;
  std::map<double, Sweep> sweeps_;
};

}  // namespace heatsleuth
