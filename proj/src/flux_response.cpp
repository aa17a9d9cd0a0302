#include "heatsleuth/flux_response.hpp"

#include "heatsleuth/errors.hpp"

namespace heatsleuth {

FluxResponse::FluxResponse(std::shared_ptr<const HeatStepper> stepper, PolarMesh mesh)
    : stepper_(std::move(stepper)), mesh_(std::move(mesh)) {
  if (!stepper_) throw ValidationError("FluxResponse needs a stepper");
  if (stepper_->dof_count() != mesh_.dof_count()) {
    throw ValidationError("FluxResponse: stepper and mesh disagree on the DOF count");
  }
}

FluxResponse::Sweep& FluxResponse::sweep_to(double theta, int step) {
  if (step < 0) throw ValidationError("FluxResponse: negative step index");
  auto [it, fresh] = sweeps_.try_emplace(theta);
  Sweep& s = it->second;
  const int n = stepper_->dof_count();
  if (fresh) {
    s.v = Eigen::VectorXd::Zero(n);
    for (const auto& [dof, w] : flux_functional(mesh_, theta)) s.v[dof] += w;
    s.acc = Eigen::VectorXd::Zero(n);
    s.rows.emplace_back(Eigen::RowVectorXd::Zero(n));
  }
  const double dt = stepper_->dt();
  while (static_cast<int>(s.rows.size()) <= step) {
    const Eigen::VectorXd y = stepper_->solve(s.v);
    s.acc += y;
    s.rows.emplace_back(dt * s.acc.transpose());
    s.v = stepper_->free_mass() * y;
  }
  return s;
}

Eigen::RowVectorXd FluxResponse::row(double theta, int step) { return sweep_to(theta, step).rows[step]; }

Eigen::MatrixXd FluxResponse::matrix(std::span<const FluxProbe> probes) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(probes.size()), stepper_->dof_count());
  for (std::size_t k = 0; k < probes.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = sweep_to(probes[k].theta, probes[k].step).rows[probes[k].step];
  }
  return out;
}

}  // namespace heatsleuth
