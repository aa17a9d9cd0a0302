#include "heatsleuth/polar_fem.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "heatsleuth/errors.hpp"
#include "heatsleuth/quadrature.hpp"

namespace heatsleuth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Quadratic Lagrange basis on [-1, 1] with nodes -1, 0, 1.
std::array<double, 3> lagrange(double s) {
  return {0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)};
}

std::array<double, 3> lagrange_prime(double s) { return {s - 0.5, -2.0 * s, s + 0.5}; }

std::array<int, 9> element_nodes(const PolarMesh& mesh, int er, int et) {
  std::array<int, 9> nodes{};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) nodes[3 * a + b] = mesh.node_index(2 * er + a, 2 * et + b);
  }
  return nodes;
}

Eigen::SparseMatrix<double> leading_block(const Eigen::SparseMatrix<double>& m, int n) {
  Eigen::SparseMatrix<double> out = m.topLeftCorner(n, n);
  out.makeCompressed();
  return out;
}

}  // namespace

double PolarMesh::element_dtheta() const { return kTwoPi / n_theta; }

PolarMesh build_mesh(int n_r, int n_theta) {
  if (n_r < 4 || n_theta < 4) {
    throw ValidationError("build_mesh needs at least 4 elements per direction (got " +
                          std::to_string(n_r) + " x " + std::to_string(n_theta) + ")");
  }
  PolarMesh mesh;
  mesh.n_r = n_r;
  mesh.n_theta = n_theta;
  const double r_min = 1.0 / (4.0 * n_r + 1.0);
  const double half = 0.5 * (1.0 - r_min) / n_r;
  mesh.r_nodes.resize(2 * n_r + 1);
  for (int i = 0; i <= 2 * n_r; ++i) mesh.r_nodes[i] = r_min + i * half;
  mesh.r_nodes.back() = 1.0;
  mesh.theta_nodes.resize(2 * n_theta);
  for (int j = 0; j < 2 * n_theta; ++j) mesh.theta_nodes[j] = std::numbers::pi * j / n_theta;
  return mesh;
}

Eigen::SparseMatrix<double> FemMatrices::free_mass() const { return leading_block(mass, dof_count); }

Eigen::SparseMatrix<double> FemMatrices::free_stiffness() const {
  return leading_block(stiffness, dof_count);
}

FemMatrices assemble(const PolarMesh& mesh) {
  const QuadratureRule gauss = gauss_legendre(3);
  const double dtheta = mesh.element_dtheta();

  std::vector<Eigen::Triplet<double>> m_entries, k_entries;
  m_entries.reserve(81 * mesh.n_r * mesh.n_theta);
  k_entries.reserve(81 * mesh.n_r * mesh.n_theta);

  for (int er = 0; er < mesh.n_r; ++er) {
    const double r0 = mesh.r_nodes[2 * er];
    const double dr = mesh.element_dr(er);
    for (int et = 0; et < mesh.n_theta; ++et) {
      const std::array<int, 9> nodes = element_nodes(mesh, er, et);
      double me[9][9] = {};
      double ke[9][9] = {};
      for (int qa = 0; qa < 3; ++qa) {
        const double s = gauss.nodes[qa];
        const double r = r0 + 0.5 * dr * (s + 1.0);
        const auto lr = lagrange(s);
        const auto dlr = lagrange_prime(s);
        for (int qb = 0; qb < 3; ++qb) {
          const double u = gauss.nodes[qb];
          const auto lt = lagrange(u);
          const auto dlt = lagrange_prime(u);
          const double jac = gauss.weights[qa] * gauss.weights[qb] * 0.25 * dr * dtheta;
          double phi[9], phi_r[9], phi_t[9];
          for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
              phi[3 * a + b] = lr[a] * lt[b];
              phi_r[3 * a + b] = dlr[a] * (2.0 / dr) * lt[b];
              phi_t[3 * a + b] = lr[a] * dlt[b] * (2.0 / dtheta);
            }
          }
          for (int p = 0; p < 9; ++p) {
            for (int q = 0; q < 9; ++q) {
              me[p][q] += jac * r * phi[p] * phi[q];
              ke[p][q] += jac * (r * phi_r[p] * phi_r[q] + phi_t[p] * phi_t[q] / r);
            }
          }
        }
      }
      for (int p = 0; p < 9; ++p) {
        for (int q = 0; q < 9; ++q) {
          m_entries.emplace_back(nodes[p], nodes[q], me[p][q]);
          k_entries.emplace_back(nodes[p], nodes[q], ke[p][q]);
        }
      }
    }
  }

  FemMatrices out;
  out.dof_count = mesh.dof_count();
  out.mass.resize(mesh.node_count(), mesh.node_count());
  out.stiffness.resize(mesh.node_count(), mesh.node_count());
  out.mass.setFromTriplets(m_entries.begin(), m_entries.end());
  out.stiffness.setFromTriplets(k_entries.begin(), k_entries.end());
  return out;
}

LoadAssembler::LoadAssembler(const PolarMesh& mesh, int points_per_direction)
    : mesh_(mesh), points_(points_per_direction) {
  if (points_ < 1) throw ValidationError("load quadrature needs at least one point per direction");
  const QuadratureRule gauss = gauss_legendre(points_);
  const double dtheta = mesh.element_dtheta();
  const int per_element = points_ * points_;
  samples_.reserve(static_cast<std::size_t>(per_element) * mesh.n_r * mesh.n_theta);
  basis_.reserve(samples_.capacity());
  for (int er = 0; er < mesh.n_r; ++er) {
    const double r0 = mesh.r_nodes[2 * er];
    const double dr = mesh.element_dr(er);
    for (int et = 0; et < mesh.n_theta; ++et) {
      element_nodes_.push_back(element_nodes(mesh, er, et));
      const double t0 = et * dtheta;
      for (int qa = 0; qa < points_; ++qa) {
        const double s = gauss.nodes[qa];
        const double r = r0 + 0.5 * dr * (s + 1.0);
        const auto lr = lagrange(s);
        for (int qb = 0; qb < points_; ++qb) {
          const double u = gauss.nodes[qb];
          const double theta = t0 + 0.5 * dtheta * (u + 1.0);
          const auto lt = lagrange(u);
          const double w = gauss.weights[qa] * gauss.weights[qb] * 0.25 * dr * dtheta * r;
          samples_.push_back({{r * std::cos(theta), r * std::sin(theta)}, w});
          std::array<double, 9> values{};
          for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) values[3 * a + b] = lr[a] * lt[b];
          }
          basis_.push_back(values);
        }
      }
    }
  }
}

Eigen::VectorXd LoadAssembler::assemble(const Indicator& inside, double strength) const {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(mesh_.node_count());
  const int per_element = points_ * points_;
  for (std::size_t e = 0; e < element_nodes_.size(); ++e) {
    const std::array<int, 9>& nodes = element_nodes_[e];
    for (int k = 0; k < per_element; ++k) {
      const std::size_t s = e * per_element + k;
      if (!inside(samples_[s].position)) continue;
      const double w = strength * samples_[s].weight;
      for (int p = 0; p < 9; ++p) load[nodes[p]] += w * basis_[s][p];
    }
  }
  return load;
}

Eigen::VectorXd LoadAssembler::assemble(const Region& region, double strength) const {
  return assemble([&region](const Point& p) { return region.contains(p); }, strength);
}

Eigen::VectorXd assemble_load(const PolarMesh& mesh, const ShapeParams& shape, double strength,
                              int points_per_direction) {
  const Region region(shape);
  return LoadAssembler(mesh, points_per_direction).assemble(region, strength);
}

HeatStepper::HeatStepper(const FemMatrices& matrices, double dt)
    : dt_(dt), dof_count_(matrices.dof_count), mass_(matrices.free_mass()) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  Eigen::SparseMatrix<double> system = mass_ + dt * matrices.free_stiffness();
  factor_.compute(system);
  if (factor_.info() != Eigen::Success) {
    throw NumericalError("factorization of M + dt K failed");
  }
}

FieldState HeatStepper::initial_state() const { return {Eigen::VectorXd::Zero(dof_count_), 0.0}; }

Eigen::VectorXd HeatStepper::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = factor_.solve(rhs);
  if (factor_.info() != Eigen::Success) throw NumericalError("backward Euler solve failed");
  return x;
}

FieldState HeatStepper::step(const FieldState& state, const Eigen::VectorXd& load_free) const {
  const Eigen::VectorXd rhs = mass_ * state.U + dt_ * load_free;
  return {solve(rhs), state.t + dt_};
}

Eigen::VectorXd free_part(const PolarMesh& mesh, const Eigen::VectorXd& full) {
  return full.head(mesh.dof_count());
}

std::vector<std::pair<int, double>> flux_functional(const PolarMesh& mesh, double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  const double dtheta = mesh.element_dtheta();
  int et = static_cast<int>(t / dtheta);
  if (et >= mesh.n_theta) et = mesh.n_theta - 1;
  const double u = 2.0 * (t - et * dtheta) / dtheta - 1.0;
  const auto lt = lagrange(u);
  const int er = mesh.n_r - 1;
  const double dr = mesh.element_dr(er);
  const auto dlr = lagrange_prime(1.0);

  std::vector<std::pair<int, double>> weights;
  weights.reserve(6);
  // the third radial node row is the Dirichlet ring and carries zero
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 3; ++b) {
      weights.emplace_back(mesh.node_index(2 * er + a, 2 * et + b), dlr[a] * (2.0 / dr) * lt[b]);
    }
  }
  return weights;
}

double boundary_flux(const FieldState& state, const PolarMesh& mesh, double theta) {
  double value = 0.0;
  for (const auto& [dof, w] : flux_functional(mesh, theta)) value += w * state.U[dof];
  return value;
}

}  // namespace heatsleuth
