#include "heatsleuth/shape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace heatsleuth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double reduce_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a value just below 0 can round up to exactly 2pi
  if (r >= kTwoPi) r = 0.0;
  return r;
}

Point center_of(const ShapeParams& s) {
  if (s.kind == ShapeKind::FourierStar) return {0.0, 0.0};
  return {s.xi[0] * std::cos(s.xi[1]), s.xi[0] * std::sin(s.xi[1])};
}

double fourier_q(std::span<const double> xi, int order, double theta) {
  double q = 0.5 * xi[0];
  for (int i = 1; i <= order; ++i) {
    q += xi[2 * i - 1] * std::cos(i * theta) + xi[2 * i] * std::sin(i * theta);
  }
  return q;
}

bool fourier_valid(std::span<const double> xi, int order) {
  for (int k = 0; k < kFourierValidationGrid; ++k) {
    const double q = fourier_q(xi, order, kTwoPi * k / kFourierValidationGrid);
    if (!(q > 0.0 && q < 1.0)) return false;
  }
  return true;
}

void check_length(std::size_t got, ShapeKind kind, int order) {
  if (kind == ShapeKind::FourierStar && order < 0) {
    throw ValidationError("fourier_order must be >= 0");
  }
  const std::size_t want = parameter_count(kind, order);
  if (got != want) {
    throw ValidationError("shape '" + std::string(to_string(kind)) + "' expects " +
                          std::to_string(want) + " parameters, got " + std::to_string(got));
  }
}

}  // namespace

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Kite: return "kite";
    case ShapeKind::FourLeaf: return "fourleaf";
    case ShapeKind::FourierStar: return "fourier";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "circle") return ShapeKind::Circle;
  if (name == "kite") return ShapeKind::Kite;
  if (name == "fourleaf" || name == "four-leaf" || name == "four_leaf") return ShapeKind::FourLeaf;
  if (name == "fourier" || name == "peanut" || name == "fourier_star") return ShapeKind::FourierStar;
  throw ValidationError("unknown shape kind '" + std::string(name) + "'");
}

std::size_t parameter_count(ShapeKind kind, int fourier_order) {
  if (kind == ShapeKind::FourierStar) return static_cast<std::size_t>(2 * fourier_order + 1);
  return 3;
}

ShapeParams make_shape(ShapeKind kind, std::vector<double> xi, int fourier_order) {
  check_length(xi.size(), kind, fourier_order);
  ShapeParams s{kind, std::move(xi), kind == ShapeKind::FourierStar ? fourier_order : 0};
  if (kind != ShapeKind::FourierStar) s.xi[1] = reduce_angle(s.xi[1]);
  validate(s);
  return s;
}

bool is_valid(const ShapeParams& s) {
  if (s.xi.size() != parameter_count(s.kind, s.fourier_order)) return false;
  for (double v : s.xi) {
    if (!std::isfinite(v)) return false;
  }
  if (s.kind == ShapeKind::FourierStar) return fourier_valid(s.xi, s.fourier_order);
  return s.xi[0] > 0.0 && s.xi[0] < 1.0 && s.xi[1] >= 0.0 && s.xi[1] < kTwoPi && s.xi[2] > 0.0 &&
         s.xi[2] < 1.0;
}

void validate(const ShapeParams& s) {
  check_length(s.xi.size(), s.kind, s.fourier_order);
  if (is_valid(s)) return;
  if (s.kind == ShapeKind::FourierStar) {
    throw ValidationError("fourier shape: q(theta) leaves (0,1) on the validation grid");
  }
  throw ValidationError("shape '" + std::string(to_string(s.kind)) +
                        "': need xi_1 in (0,1), xi_2 in [0,2pi), xi_3 in (0,1)");
}

double max_boundary_radius(const ShapeParams& shape, int samples) {
  double best = 0.0;
  for (int k = 0; k < samples; ++k) {
    const Point p = boundary_point(shape, kTwoPi * k / samples);
    best = std::max(best, std::hypot(p.x, p.y));
  }
  return best;
}

ShapeParams to_physical(std::span<const double> z, ShapeKind kind, int fourier_order) {
  check_length(z.size(), kind, fourier_order);
  if (kind == ShapeKind::FourierStar) {
    return ShapeParams{kind, std::vector<double>(z.begin(), z.end()), fourier_order};
  }
  return ShapeParams{kind,
                     {std::atan(z[0]) / kPi + 0.5, 2.0 * std::atan(z[1]) + kPi,
                      std::atan(z[2]) / kPi + 0.5},
                     0};
}

std::vector<double> to_unconstrained(const ShapeParams& s) {
  validate(s);
  if (s.kind == ShapeKind::FourierStar) return s.xi;
  return {std::tan(kPi * (s.xi[0] - 0.5)), std::tan(0.5 * (s.xi[1] - kPi)),
          std::tan(kPi * (s.xi[2] - 0.5))};
}

double radial_function(const ShapeParams& s, double theta) {
  if (s.kind != ShapeKind::FourierStar) {
    throw ValidationError("radial_function is defined for fourier shapes only");
  }
  check_length(s.xi.size(), s.kind, s.fourier_order);
  return fourier_q(s.xi, s.fourier_order, theta);
}

Point boundary_point(const ShapeParams& s, double theta) {
  validate(s);
  const Point c = center_of(s);
  const double r3 = s.kind == ShapeKind::FourierStar ? 0.0 : s.xi[2];
  switch (s.kind) {
    case ShapeKind::Circle:
      return {c.x + r3 * std::cos(theta), c.y + r3 * std::sin(theta)};
    case ShapeKind::Kite:
      return {c.x + r3 * (std::cos(theta) + 0.65 * std::cos(2.0 * theta) - 0.65),
              c.y + 1.5 * r3 * std::sin(theta)};
    case ShapeKind::FourLeaf: {
      const double r = r3 * (1.0 + 0.2 * std::cos(4.0 * theta));
      return {c.x + r * std::cos(theta), c.y + r * std::sin(theta)};
    }
    case ShapeKind::FourierStar: {
      const double q = fourier_q(s.xi, s.fourier_order, theta);
      return {q * std::cos(theta), q * std::sin(theta)};
    }
  }
  return c;
}

Region::Region(ShapeParams shape) : shape_(std::move(shape)) {
  validate(shape_);
  center_ = center_of(shape_);
  if (shape_.kind == ShapeKind::Kite) {
    polygon_.reserve(kKiteSegments);
    box_min_x_ = box_min_y_ = 1e300;
    box_max_x_ = box_max_y_ = -1e300;
    for (int k = 0; k < kKiteSegments; ++k) {
      const Point p = boundary_point(shape_, kTwoPi * k / kKiteSegments);
      polygon_.push_back(p);
      box_min_x_ = std::min(box_min_x_, p.x);
      box_max_x_ = std::max(box_max_x_, p.x);
      box_min_y_ = std::min(box_min_y_, p.y);
      box_max_y_ = std::max(box_max_y_, p.y);
    }
  }
}

bool Region::contains(Point p) const {
  const double dx = p.x - center_.x;
  const double dy = p.y - center_.y;
  switch (shape_.kind) {
    case ShapeKind::Circle:
      return dx * dx + dy * dy < shape_.xi[2] * shape_.xi[2];
    case ShapeKind::FourLeaf: {
      const double r = std::hypot(dx, dy);
      if (r == 0.0) return true;
      const double phi = std::atan2(dy, dx);
      return r < shape_.xi[2] * (1.0 + 0.2 * std::cos(4.0 * phi));
    }
    case ShapeKind::FourierStar: {
      const double r = std::hypot(dx, dy);
      if (r == 0.0) return true;
      return r < fourier_q(shape_.xi, shape_.fourier_order, std::atan2(dy, dx));
    }
    case ShapeKind::Kite:
      return kite_contains(p);
  }
  return false;
}

// Winding number of the closed polygon around p; nonzero means inside.
bool Region::kite_contains(Point p) const {
  if (p.x < box_min_x_ || p.x > box_max_x_ || p.y < box_min_y_ || p.y > box_max_y_) return false;
  int winding = 0;
  const std::size_t n = polygon_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = polygon_[i];
    const Point& b = polygon_[(i + 1) % n];
    const double cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
    if (a.y <= p.y) {
      if (b.y > p.y && cross > 0.0) ++winding;
    } else {
      if (b.y <= p.y && cross < 0.0) --winding;
    }
  }
  return winding != 0;
}

bool contains(const ShapeParams& shape, Point p) { return Region(shape).contains(p); }

PriorSpec prior_covariance(ShapeKind kind, int fourier_order) {
  if (kind != ShapeKind::FourierStar) return {{1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}};
  if (fourier_order < 1) throw ValidationError("fourier prior needs fourier_order >= 1");
  PriorSpec prior;
  prior.covariance_diagonal.push_back(1.0);
  for (int i = 1; i <= fourier_order; ++i) {
    const double v = 1.0 / (static_cast<double>(i) * i);
    prior.covariance_diagonal.push_back(v);
    prior.covariance_diagonal.push_back(v);
  }
  prior.mean.assign(prior.covariance_diagonal.size(), 0.0);
  return prior;
}

}  // namespace heatsleuth
