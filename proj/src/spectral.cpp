#include "heatsleuth/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "heatsleuth/bessel.hpp"
#include "heatsleuth/errors.hpp"
#include "heatsleuth/quadrature.hpp"

namespace heatsleuth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Largest zero we can list completely: every order whose first zero is below
// it must be tabulated, and j_{61,1} > 66.
constexpr double kZeroCutoffLimit = 66.0;

struct Root {
  double value;
  int order;
  int index;
};

double normalisation_by_quadrature(int order, double root, double omega) {
  static const QuadratureRule rule = gauss_legendre(160);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const double r = 0.5 * (rule.nodes[q] + 1.0);
    const double v = omega * bessel::j(order, root * r);
    sum += 0.5 * rule.weights[q] * v * v * r;
  }
  return kTwoPi * sum;
}

// Index ranges of basis entries sharing (lambda, |m|): one entry for m = 0,
// two adjacent entries (+m, -m) otherwise.
struct ModeGroup {
  std::size_t first;
  std::size_t count;
  int abs_order;
  double root;
  double omega;
};

std::vector<ModeGroup> group_modes(const EigenBasis& basis) {
  std::vector<ModeGroup> groups;
  for (std::size_t n = 0; n < basis.pairs.size();) {
    const EigenPair& p = basis.pairs[n];
    std::size_t count = 1;
    if (p.order != 0 && n + 1 < basis.pairs.size() && basis.pairs[n + 1].order == -p.order &&
        basis.pairs[n + 1].zero_index == p.zero_index) {
      count = 2;
    }
    groups.push_back({n, count, std::abs(p.order), std::sqrt(p.lambda), p.omega});
    n += count;
  }
  return groups;
}

// Calls fn(point, weight) over a quadrature of D intersected with the unit
// disc. Shapes given by a radius about a center use Gauss in the radius and
// the periodic trapezoid rule in the angle; the kite uses a masked midpoint
// grid over its bounding box.
template <class Fn>
void integrate_over_source(const ShapeParams& shape, int grid, Fn&& fn) {
  if (shape.kind != ShapeKind::Kite) {
    static const QuadratureRule radial = gauss_legendre(48);
    const Point c = shape.kind == ShapeKind::FourierStar
                        ? Point{0.0, 0.0}
                        : Point{shape.xi[0] * std::cos(shape.xi[1]), shape.xi[0] * std::sin(shape.xi[1])};
    const int n_theta = 4 * grid;
    for (int a = 0; a < n_theta; ++a) {
      const double phi = kTwoPi * a / n_theta;
      const Point edge = boundary_point(shape, phi);
      const double rho = std::hypot(edge.x - c.x, edge.y - c.y);
      for (std::size_t k = 0; k < radial.nodes.size(); ++k) {
        const double s = 0.5 * rho * (radial.nodes[k] + 1.0);
        const Point p{c.x + s * std::cos(phi), c.y + s * std::sin(phi)};
        if (std::hypot(p.x, p.y) >= 1.0) continue;
        fn(p, (kTwoPi / n_theta) * 0.5 * rho * radial.weights[k] * s);
      }
    }
    return;
  }
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (int k = 0; k < 720; ++k) {
    const Point p = boundary_point(shape, kTwoPi * k / 720);
    x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
  }
  const double pad = 0.01 * std::max(x1 - x0, y1 - y0);
  x0 = std::max(x0 - pad, -1.0), x1 = std::min(x1 + pad, 1.0);
  y0 = std::max(y0 - pad, -1.0), y1 = std::min(y1 + pad, 1.0);
  const double hx = (x1 - x0) / grid, hy = (y1 - y0) / grid;
  const Region region(shape);
  for (int a = 0; a < grid; ++a) {
    for (int c = 0; c < grid; ++c) {
      const Point p{x0 + (a + 0.5) * hx, y0 + (c + 0.5) * hy};
      if (std::hypot(p.x, p.y) >= 1.0 || !region.contains(p)) continue;
      fn(p, hx * hy);
    }
  }
}

}  // namespace

EigenBasis build_basis(int count) {
  if (count < 1) throw ValidationError("build_basis needs at least one eigenpair");
  double cutoff = std::sqrt(4.0 * count) + 10.0;
  std::vector<Root> roots;
  for (;;) {
    if (cutoff > kZeroCutoffLimit) cutoff = kZeroCutoffLimit;
    roots.clear();
    std::size_t with_multiplicity = 0;
    for (int m = 0; m <= bessel::kMaxOrder && m < cutoff; ++m) {
      const int k_max =
          std::min(bessel::kMaxZeroCount, static_cast<int>((cutoff - m) / kPi) + 3);
      const std::vector<double> z = bessel::zeros(m, k_max);
      for (int k = 0; k < k_max; ++k) {
        if (z[k] >= cutoff) break;
        roots.push_back({z[k], m, k + 1});
        with_multiplicity += m == 0 ? 1 : 2;
      }
    }
    if (with_multiplicity >= static_cast<std::size_t>(count) + 1) break;
    if (cutoff >= kZeroCutoffLimit) {
      throw ValidationError("build_basis: " + std::to_string(count) +
                            " eigenpairs exceed the tabulated Bessel range");
    }
    cutoff += 10.0;
  }
  std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) {
    return a.value < b.value || (a.value == b.value && a.order < b.order);
  });

  EigenBasis basis;
  for (const Root& root : roots) {
    if (basis.pairs.size() >= static_cast<std::size_t>(count)) break;
    const double jm1 = bessel::j(root.order + 1, root.value);
    const double omega = 1.0 / (std::sqrt(kPi) * std::abs(jm1));
    const double check = normalisation_by_quadrature(root.order, root.value, omega);
    if (std::abs(check - 1.0) > 1e-8) {
      throw NumericalError("eigenfunction normalisation check failed for m=" +
                           std::to_string(root.order) + ", k=" + std::to_string(root.index));
    }
    EigenPair pair{root.value * root.value, root.order, omega, root.index, jm1 > 0.0 ? 1 : -1};
    basis.pairs.push_back(pair);
    if (root.order != 0) {
      pair.order = -root.order;
      basis.pairs.push_back(pair);
    }
  }
  return basis;
}

void write_basis_csv(std::ostream& os, const EigenBasis& basis) {
  os << "n,lambda,m,omega\n";
  char line[160];
  for (std::size_t n = 0; n < basis.pairs.size(); ++n) {
    const EigenPair& p = basis.pairs[n];
    std::snprintf(line, sizeof line, "%zu,%.17g,%d,%.17g\n", n + 1, p.lambda, p.order, p.omega);
    os << line;
  }
}

FourierCoeffs fourier_coeff(const ShapeParams& shape, const EigenBasis& basis, double strength,
                            int grid) {
  validate(shape);
  if (grid < 2) throw ValidationError("fourier_coeff grid must be >= 2");
  const std::vector<ModeGroup> groups = group_modes(basis);
  int max_order = 0;
  for (const ModeGroup& g : groups) max_order = std::max(max_order, g.abs_order);

  std::vector<std::complex<double>> sums(groups.size());
  std::vector<std::complex<double>> rotor(max_order + 1);

  // accumulates weight * J_|m| * exp(-i |m| theta) at (r, theta) into every group
  auto accumulate = [&](double r, double theta, double weight) {
    const std::complex<double> step = std::polar(1.0, -theta);
    rotor[0] = 1.0;
    for (int m = 1; m <= max_order; ++m) rotor[m] = rotor[m - 1] * step;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double jv = bessel::j(groups[g].abs_order, groups[g].root * r);
      sums[g] += weight * groups[g].omega * jv * rotor[groups[g].abs_order];
    }
  };

  if (shape.kind == ShapeKind::FourierStar) {
    // star-shaped about the origin: periodic trapezoid in theta, Gauss in r
    static const QuadratureRule radial = gauss_legendre(48);
    const int n_theta = 4 * grid;
    for (int a = 0; a < n_theta; ++a) {
      const double theta = kTwoPi * a / n_theta;
      const double q = radial_function(shape, theta);
      for (std::size_t k = 0; k < radial.nodes.size(); ++k) {
        const double r = 0.5 * q * (radial.nodes[k] + 1.0);
        accumulate(r, theta, (kTwoPi / n_theta) * 0.5 * q * radial.weights[k] * r);
      }
    }
  } else {
    // masked midpoint rule over the bounding box of D
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (int k = 0; k < 720; ++k) {
      const Point p = boundary_point(shape, kTwoPi * k / 720);
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    const double pad = 0.01 * std::max(x1 - x0, y1 - y0);
    x0 = std::max(x0 - pad, -1.0), x1 = std::min(x1 + pad, 1.0);
    y0 = std::max(y0 - pad, -1.0), y1 = std::min(y1 + pad, 1.0);
    const double hx = (x1 - x0) / grid, hy = (y1 - y0) / grid;
    const Region region(shape);
    for (int a = 0; a < grid; ++a) {
      for (int c = 0; c < grid; ++c) {
        const Point p{x0 + (a + 0.5) * hx, y0 + (c + 0.5) * hy};
        const double r = std::hypot(p.x, p.y);
        if (r >= 1.0 || !region.contains(p)) continue;
        accumulate(r, std::atan2(p.y, p.x), hx * hy);
      }
    }
  }

  FourierCoeffs out;
  out.d.resize(basis.pairs.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::complex<double> d = strength * sums[g];
    const std::size_t n = groups[g].first;
    // sums[] was taken with exp(-i|m|theta): that is conj(phi) for m >= 0
    if (basis.pairs[n].order >= 0) {
      out.d[n] = d;
      if (groups[g].count == 2) out.d[n + 1] = std::conj(d);
    } else {
      out.d[n] = std::conj(d);
      if (groups[g].count == 2) out.d[n + 1] = d;
    }
  }
  return out;
}

FourierCoeffs full_disc_coeff(const EigenBasis& basis) {
  FourierCoeffs out;
  out.d.resize(basis.pairs.size());
  for (std::size_t n = 0; n < basis.pairs.size(); ++n) {
    const EigenPair& p = basis.pairs[n];
    if (p.order != 0) continue;
    const double root = std::sqrt(p.lambda);
    out.d[n] = kTwoPi * p.omega * bessel::j(1, root) / root;
  }
  return out;
}

namespace {

// Sum of -pi^{-1/2} lambda^{-1/2} s_n d_n e^{i m theta} * factor(pair).
template <class Factor>
double flux_sum(double theta, const FourierCoeffs& coeffs, const EigenBasis& basis,
                Factor factor) {
  if (coeffs.d.size() != basis.pairs.size()) {
    throw ValidationError("flux_series: coefficient count does not match basis");
  }
  std::complex<double> total = 0.0;
  double magnitude = 0.0;
  for (std::size_t n = 0; n < basis.pairs.size(); ++n) {
    const EigenPair& p = basis.pairs[n];
    // d(phi_n)/dr at r = 1 is -omega sqrt(lambda) J_{|m|+1}(sqrt(lambda)) e^{i m theta}
    // and omega |J_{|m|+1}| = pi^{-1/2}
    const double c = p.derivative_sign / (std::sqrt(kPi) * std::sqrt(p.lambda));
    const std::complex<double> term =
        -c * coeffs.d[n] * std::polar(1.0, p.order * theta) * factor(p);
    total += term;
    magnitude += std::abs(term);
  }
  if (std::abs(total.imag()) > 1e-10 * std::abs(total.real()) + 1e-13 * magnitude) {
    throw NumericalError("flux_series: +m/-m pairing left an imaginary residue");
  }
  return total.real();
}

}  // namespace

double flux_series(double theta, double t, const FourierCoeffs& coeffs, const EigenBasis& basis) {
  if (t < 0.0) throw ValidationError("flux_series needs t >= 0");
  return flux_sum(theta, coeffs, basis, [t](const EigenPair& p) {
    return std::complex<double>(-std::expm1(-p.lambda * t));
  });
}

double flux_series_transient(double theta, double t, const FourierCoeffs& coeffs,
                             const EigenBasis& basis) {
  if (t < 0.0) throw ValidationError("flux_series_transient needs t >= 0");
  return flux_sum(theta, coeffs, basis, [t](const EigenPair& p) {
    return std::complex<double>(-std::exp(-p.lambda * t));
  });
}

double steady_flux(const ShapeParams& shape, double strength, double theta, int grid) {
  validate(shape);
  if (grid < 2) throw ValidationError("steady_flux grid must be >= 2");
  const Point x{std::cos(theta), std::sin(theta)};
  double sum = 0.0;
  integrate_over_source(shape, grid, [&](const Point& y, double w) {
    const double dx = x.x - y.x, dy = x.y - y.y;
    sum += w * (1.0 - y.x * y.x - y.y * y.y) / (dx * dx + dy * dy);
  });
  return -strength * sum / kTwoPi;
}

double flux_series_dtheta(double theta, double t, const FourierCoeffs& coeffs,
                          const EigenBasis& basis) {
  if (t < 0.0) throw ValidationError("flux_series_dtheta needs t >= 0");
  return flux_sum(theta, coeffs, basis, [t](const EigenPair& p) {
    return std::complex<double>(0.0, p.order) * -std::expm1(-p.lambda * t);
  });
}

bool check_uniqueness_condition(double theta1, double theta2) {
  const double x = (theta1 - theta2) / kPi;
  const double tol = 1e-13 * std::max(1.0, std::abs(x));
  // continued-fraction convergents h/k of x
  double h_prev = 1.0, h_prev2 = 0.0, k_prev = 0.0, k_prev2 = 1.0;
  double y = x;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(y);
    const double h = a * h_prev + h_prev2;
    const double k = a * k_prev + k_prev2;
    if (k > 1e6) break;
    if (std::abs(x - h / k) <= tol) return false;
    const double frac = y - a;
    if (frac <= 0.0) return false;
    y = 1.0 / frac;
    h_prev2 = h_prev, h_prev = h;
    k_prev2 = k_prev, k_prev = k;
  }
  return true;
}

}  // namespace heatsleuth
