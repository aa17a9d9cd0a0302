#include "heatsleuth/bessel.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "heatsleuth/errors.hpp"

namespace heatsleuth::bessel {

namespace {

double series(int m, double x) {
  const double half = 0.5 * x;
  double term = 1.0;
  for (int i = 1; i <= m; ++i) term *= half / i;
  const double q = -half * half;
  double sum = term;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * (k + m));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

// Backward recurrence J_{k-1} = (2k/x) J_k - J_{k+1} from a start index well
// above max(m, x), normalised with J_0 + 2 sum_k J_{2k} = 1.
double miller(int m, double x) {
  const double top = std::max(static_cast<double>(m), x);
  int start = static_cast<int>(top + 30.0 + 10.0 * std::sqrt(top));
  if (start % 2) ++start;

  double next = 0.0;  // J_{k+1}
  double cur = 1e-300;  // J_k
  double norm = 0.0;
  double wanted = 0.0;
  for (int k = start; k >= 1; --k) {
    const double prev = (2.0 * k / x) * cur - next;  // J_{k-1}
    next = cur;
    cur = prev;
    if (k - 1 == m) wanted = cur;
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * cur;
    if (std::abs(cur) > 1e250) {
      cur *= 1e-250;
      next *= 1e-250;
      norm *= 1e-250;
      wanted *= 1e-250;
    }
  }
  norm += cur;  // J_0
  return wanted / norm;
}

}  // namespace

double j(int order, double x) {
  if (order < 0) throw ValidationError("bessel::j needs order >= 0");
  if (x < 0.0) throw ValidationError("bessel::j needs x >= 0");
  if (x == 0.0) return order == 0 ? 1.0 : 0.0;
  if (x < kSeriesLimit) return series(order, x);
  return miller(order, x);
}

double j_prime(int order, double x) {
  if (order == 0) return -j(1, x);
  return 0.5 * (j(order - 1, x) - j(order + 1, x));
}

std::vector<double> zeros(int order, int count) {
  if (order < 0 || order > kMaxOrder) {
    throw ValidationError("bessel::zeros order must be in [0, " + std::to_string(kMaxOrder) + "]");
  }
  if (count < 0 || count > kMaxZeroCount) {
    throw ValidationError("bessel::zeros count must be in [0, " + std::to_string(kMaxZeroCount) +
                          "]");
  }
  std::vector<double> out;
  out.reserve(count);
  // Consecutive zeros are at least ~pi/2 apart for every order in range, so a
  // quarter-unit scan cannot step over a pair. All zeros of J_m exceed m.
  constexpr double step = 0.25;
  double a = std::max(0.5, static_cast<double>(order));
  double fa = j(order, a);
  while (static_cast<int>(out.size()) < count) {
    const double b = a + step;
    const double fb = j(order, b);
    if (fa == 0.0) {
      out.push_back(a);
    } else if (fa * fb < 0.0) {
      double lo = a, hi = b, flo = fa;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = j(order, mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      double root = 0.5 * (lo + hi);
      // one Newton polish, kept only if it stays inside the bracket
      const double d = j_prime(order, root);
      if (d != 0.0) {
        const double polished = root - j(order, root) / d;
        if (polished >= a && polished <= b) root = polished;
      }
      if (!(root > a - 1e-12 && root < b + 1e-12)) {
        throw NumericalError("bessel::zeros lost the bracket for order " + std::to_string(order));
      }
      out.push_back(root);
    }
    a = b;
    fa = fb;
    if (a > 1e4) throw NumericalError("bessel::zeros scan ran away");
  }
  return out;
}

}  // namespace heatsleuth::bessel
