#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heatsleuth/errors.hpp"

namespace heatsleuth {

enum class ShapeKind { Circle, Kite, FourLeaf, FourierStar };

std::string_view to_string(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view name);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Physical parameters of a source domain D.
//
// Circle, Kite and FourLeaf carry (distance of the center from the origin,
// polar angle of the center, size). FourierStar carries the 2M+1 Fourier
// coefficients of the radial function q(theta) about the origin.
struct ShapeParams {
  ShapeKind kind = ShapeKind::Circle;
  std::vector<double> xi;
  int fourier_order = 0;
};

// Number of entries of xi for a kind (2M+1 for FourierStar).
std::size_t parameter_count(ShapeKind kind, int fourier_order);

// Number of uniform theta samples used to check q(theta) in (0,1).
inline constexpr int kFourierValidationGrid = 720;

// Builds a shape and reduces the center angle into [0, 2pi). Throws
// ValidationError on a length mismatch or when the parameters leave their
// admissible ranges.
ShapeParams make_shape(ShapeKind kind, std::vector<double> xi, int fourier_order = 0);

bool is_valid(const ShapeParams& shape);
void validate(const ShapeParams& shape);

// Largest distance of a boundary point from the origin. Values >= 1 mean D
// pokes out of the unit disc; the source is then D intersected with the disc.
double max_boundary_radius(const ShapeParams& shape, int samples = 720);

// Unconstrained sampling coordinates -> physical parameters. The three
// parameter kinds go through the arctan maps onto (0,1) x (0,2pi) x (0,1);
// FourierStar is the identity and may return an invalid shape.
ShapeParams to_physical(std::span<const double> z, ShapeKind kind, int fourier_order = 0);

// Inverse of to_physical for a valid shape.
std::vector<double> to_unconstrained(const ShapeParams& shape);

// q(theta) = xi_1/2 + sum_i xi_{2i} cos(i theta) + xi_{2i+1} sin(i theta).
// Throws ValidationError for kinds other than FourierStar.
double radial_function(const ShapeParams& shape, double theta);

Point boundary_point(const ShapeParams& shape, double theta);

// Membership test with the per-shape setup (kite polygon, Fourier data)
// done once. Safe to share between threads.
class Region {
 public:
  explicit Region(ShapeParams shape);

  bool contains(Point p) const;
  const ShapeParams& shape() const { return shape_; }

  static constexpr int kKiteSegments = 512;

 private:
  bool kite_contains(Point p) const;

  ShapeParams shape_;
  Point center_;
  std::vector<Point> polygon_;
  double box_min_x_ = 0.0, box_max_x_ = 0.0, box_min_y_ = 0.0, box_max_y_ = 0.0;
};

bool contains(const ShapeParams& shape, Point p);

// Diagonal of the zero-mean Gaussian prior covariance on the sampled
// coordinates: identity for the three-parameter kinds, 1/i^2 decay for the
// Fourier coefficients.
struct PriorSpec {
  std::vector<double> covariance_diagonal;
  std::vector<double> mean;
};

PriorSpec prior_covariance(ShapeKind kind, int fourier_order = 0);

}  // namespace heatsleuth
