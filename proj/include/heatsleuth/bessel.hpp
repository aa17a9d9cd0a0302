#pragma once

#include <vector>

namespace heatsleuth::bessel {

inline constexpr int kMaxOrder = 60;
inline constexpr int kMaxZeroCount = 100;

// Bessel function of the first kind J_m(x) for integer m >= 0 and x >= 0.
// Ascending series below kSeriesLimit, Miller's backward recurrence above.
double j(int order, double x);

// dJ_m/dx.
double j_prime(int order, double x);

inline constexpr double kSeriesLimit = 5.0;

// First `count` positive zeros of J_m, absolute accuracy ~1e-14.
// Throws ValidationError outside the tabulation bounds and NumericalError
// if a bracket cannot be closed.
std::vector<double> zeros(int order, int count);

}  // namespace heatsleuth::bessel
