#pragma once

#include <vector>

#include <Eigen/Dense>

namespace attnlab {

using Vec = Eigen::VectorXd;

struct BoltzReport {
  double value = 0.0;          // sum_i a_i softmax(a)_i
  double log_partition = 0.0;  // log sum_i exp(a_i)
  double entropy = 0.0;        // of softmax(a)
  Vec probs;
};

// Max-shifted softmax; tolerates -inf entries (zero weight), never NaN for
// finite inputs of any spread.
Vec softmax_stable(const Vec& a);

BoltzReport boltz(const Vec& a);
double boltz_value(const Vec& a);

// Boltzmann value of the sub-vector selected by keep; agrees with boltz on
// the gathered dense sub-vector.
double boltz_masked(const Vec& a, const std::vector<bool>& keep);

// d/da_i = p_i (1 + a_i - Boltz(a)). Entries sum to 1 (shift covariance).
Vec boltz_grad(const Vec& a);

// d^2/da_i^2 = p_i ((1 - 2 p_i)(1 + a_i - Boltz(a)) + 1).
double boltz_curvature(const Vec& a, int i);

// Boltz(a) - Boltz(b) evaluated as sum_{ij} (a_i - b_j) e^{a_i + b_j} over
// (sum e^a)(sum e^b), max-shifted and accumulated in double-double. The naive
// subtraction of the two values loses the gap entirely once it falls under
// the last bits of the values themselves; this form keeps ~32 digits.
struct GapResult {
  double value = 0.0;
  int sign = 0;            // sign of Boltz(a) - Boltz(b)
  double log_abs = 0.0;    // log |Boltz(a) - Boltz(b)|, -inf when zero
};
GapResult boltz_gap(const Vec& a, const Vec& b);

// Checks |Boltz(a) - Boltz(b)| > (log n)^2 exp(-2r) for a pair of vectors
// whose union of entries is pairwise either bitwise equal or more than delta
// apart, with |entries| < r. Throws std::invalid_argument when the inputs
// violate those preconditions or are equal as multisets.
struct BoltzSepReport {
  bool passes = false;
  double gap_log_abs = 0.0;  // log of the measured |gap|
  double bound_log = 0.0;    // log of (log n)^2 exp(-2r)
  double gap_value = 0.0;    // measured gap, sign of Boltz(a)-Boltz(b)
};
BoltzSepReport check_boltz_separation(const Vec& a, const Vec& b, double r, double delta);

}  // namespace attnlab
