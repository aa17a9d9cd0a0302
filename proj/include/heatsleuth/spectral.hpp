#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include "heatsleuth/shape.hpp"

namespace heatsleuth {

// Dirichlet eigenpair of -Laplace on the unit disc,
// phi(r, theta) = omega * J_|m|(sqrt(lambda) r) * exp(i m theta).
struct EigenPair {
  double lambda = 0.0;
  int order = 0;       // signed m
  double omega = 0.0;  // > 0
  int zero_index = 0;  // sqrt(lambda) is the zero_index-th zero of J_|m|
  // sign of J_{|m|+1}(sqrt(lambda)); enters the normal derivative at r = 1
  int derivative_sign = 1;
};

// Eigenpairs sorted by ascending lambda, with each +m/-m pair adjacent
// (+m first). A requested size that would split a pair is rounded up.
struct EigenBasis {
  std::vector<EigenPair> pairs;
  std::size_t size() const { return pairs.size(); }
};

EigenBasis build_basis(int count);

// Writes `n,lambda,m,omega` rows (1-based n).
void write_basis_csv(std::ostream& os, const EigenBasis& basis);

// d_n = strength * integral over D of conj(phi_n).
struct FourierCoeffs {
  std::vector<std::complex<double>> d;
};

FourierCoeffs fourier_coeff(const ShapeParams& shape, const EigenBasis& basis,
                            double strength = 1.0, int grid = 200);

// Coefficients of the whole unit disc (unit strength), closed form per mode.
FourierCoeffs full_disc_coeff(const EigenBasis& basis);

// Normal derivative du/dn(theta, t) at the boundary of the solution driven by
// the source with coefficients `coeffs` and zero initial/boundary data.
// Throws NumericalError if the +m/-m pairing leaves an imaginary residue.
double flux_series(double theta, double t, const FourierCoeffs& coeffs, const EigenBasis& basis);

// Time-dependent part of flux_series alone: the terms carrying e^{-lambda t}.
// It converges exponentially for t > 0, unlike the full partial sum, whose
// steady part decays only algebraically in n.
double flux_series_transient(double theta, double t, const FourierCoeffs& coeffs,
                             const EigenBasis& basis);

// Steady-state flux -b/(2 pi) * integral over D of (1 - |y|^2) / |x - y|^2,
// x = (cos theta, sin theta): the Poisson-kernel form of the t -> infinity
// limit. Together with flux_series_transient it gives the series solution
// without truncating the steady part.
double steady_flux(const ShapeParams& shape, double strength, double theta, int grid = 200);

// d/dtheta of flux_series.
double flux_series_dtheta(double theta, double t, const FourierCoeffs& coeffs,
                          const EigenBasis& basis);

// False when (theta1 - theta2)/pi is a rational number with denominator at
// most 1e6 (up to double-precision rounding), i.e. when the two dwell angles
// do not meet the irrationality condition of the uniqueness result.
bool check_uniqueness_condition(double theta1, double theta2);

}  // namespace heatsleuth
