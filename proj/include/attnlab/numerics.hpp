#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace attnlab {

// Double-double accumulator (error-free transformations). Sums that cancel
// nearly to zero keep roughly 32 significant digits instead of 16, which is
// what makes tiny Boltzmann gaps measurable against O(1) summands.
struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;

  void add(double x) {
    // two_sum(hi, x)
    double s = hi + x;
    double bb = s - hi;
    double err = (hi - (s - bb)) + (x - bb);
    hi = s;
    // fold the error into lo with another two_sum
    double t = lo + err;
    double bb2 = t - lo;
    double err2 = (lo - (t - bb2)) + (err - bb2);
    lo = t + err2;
    // renormalize
    s = hi + lo;
    lo = lo - (s - hi);
    hi = s;
  }

  double value() const { return hi + lo; }
};

// Product with exact error term via FMA: a*b = p + e.
inline void two_prod(double a, double b, double& p, double& e) {
  p = a * b;
  e = std::fma(a, b, -p);
}

// log(sum exp(a_i)) with max shift; tolerates -inf entries (they contribute 0).
inline double log_sum_exp(const Eigen::VectorXd& a) {
  const double m = a.maxCoeff();
  if (!(m > -std::numeric_limits<double>::infinity())) {
    throw std::invalid_argument("log_sum_exp: all entries are -inf");
  }
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double x = a[i] - m;
    s += (x == -std::numeric_limits<double>::infinity()) ? 0.0 : std::exp(x);
  }
  return m + std::log(s);
}

inline bool nearly_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace attnlab
