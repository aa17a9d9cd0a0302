#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "heatsleuth/shape.hpp"

namespace heatsleuth {

// Tensor-product mesh of biquadratic (9-node) elements on
// [r_min, 1] x [0, 2pi) with periodic wrap in theta.
//
// Node (i, j), i in [0, 2 n_r], j in [0, 2 n_theta), has radius r_nodes[i] and
// angle j * pi / n_theta. The innermost ring sits at r_min = 1/(4 n_r + 1),
// half a node spacing off the origin. Nodes are numbered ring by ring so the
// Dirichlet ring r = 1 occupies the trailing 2 n_theta indices.
struct PolarMesh {
  int n_r = 0;
  int n_theta = 0;
  std::vector<double> r_nodes;
  std::vector<double> theta_nodes;

  int radial_nodes() const { return 2 * n_r + 1; }
  int angular_nodes() const { return 2 * n_theta; }
  int node_count() const { return radial_nodes() * angular_nodes(); }
  // unknowns left after pinning the outer ring
  int dof_count() const { return 2 * n_r * angular_nodes(); }
  int node_index(int i, int j) const {
    const int a = angular_nodes();
    return i * a + ((j % a) + a) % a;
  }
  double r_min() const { return r_nodes.front(); }
  double element_dr(int e) const { return r_nodes[2 * e + 2] - r_nodes[2 * e]; }
  double element_dtheta() const;
};

PolarMesh build_mesh(int n_r, int n_theta);

// Mass and stiffness over all nodes (boundary ring included); the free block
// is the leading dof_count() x dof_count() corner.
struct FemMatrices {
  Eigen::SparseMatrix<double> mass;
  Eigen::SparseMatrix<double> stiffness;
  int dof_count = 0;

  Eigen::SparseMatrix<double> free_mass() const;
  Eigen::SparseMatrix<double> free_stiffness() const;
};

FemMatrices assemble(const PolarMesh& mesh);

using Indicator = std::function<bool(const Point&)>;

// Load vector F_i = b * integral of chi_D phi_i r dr dtheta over all nodes,
// with chi_D sampled at a fixed p x p Gauss grid per element (p = 5 unless
// set). Basis values at
// the sample points are tabulated once, so reuse one assembler across many
// shapes.
class LoadAssembler {
 public:
  explicit LoadAssembler(const PolarMesh& mesh, int points_per_direction = kPointsPerDirection);

  Eigen::VectorXd assemble(const Indicator& inside, double strength) const;
  Eigen::VectorXd assemble(const Region& region, double strength) const;

  static constexpr int kPointsPerDirection = 5;

 private:
  struct Sample {
    Point position;
    double weight;  // Gauss weight times Jacobian times r
  };
  PolarMesh mesh_;
  int points_;
  std::vector<Sample> samples_;                  // element-major, points_^2 per element
  std::vector<std::array<double, 9>> basis_;     // basis values per sample
  std::vector<std::array<int, 9>> element_nodes_;
};

Eigen::VectorXd assemble_load(const PolarMesh& mesh, const ShapeParams& shape, double strength,
                              int points_per_direction = LoadAssembler::kPointsPerDirection);

struct FieldState {
  Eigen::VectorXd U;  // free DOFs only; the r = 1 ring is identically zero
  double t = 0.0;
};

// Backward Euler stepper (M + dt K) U^n = M U^{n-1} + dt F on the free block.
// The factorization is built once and is read-only afterwards.
class HeatStepper {
 public:
  HeatStepper(const FemMatrices& matrices, double dt);

  FieldState step(const FieldState& state, const Eigen::VectorXd& load_free) const;
  FieldState initial_state() const;

  // x = (M + dt K)^{-1} b on the free block.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  double dt() const { return dt_; }
  int dof_count() const { return dof_count_; }
  const Eigen::SparseMatrix<double>& free_mass() const { return mass_; }

 private:
  double dt_;
  int dof_count_;
  Eigen::SparseMatrix<double> mass_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
};

// Restricts a full-node vector to the free DOFs.
Eigen::VectorXd free_part(const PolarMesh& mesh, const Eigen::VectorXd& full);

// du/dr at (r = 1, theta) written as sparse weights on the free DOFs: the
// radial derivative of the outer element row at r = 1, interpolated with the
// quadratic angular basis of the element containing theta.
std::vector<std::pair<int, double>> flux_functional(const PolarMesh& mesh, double theta);

double boundary_flux(const FieldState& state, const PolarMesh& mesh, double theta);

}  // namespace heatsleuth
