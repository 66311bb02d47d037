#include "attnlab/boltzmann.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "attnlab/numerics.hpp"

namespace attnlab {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Vec softmax_stable(const Vec& a) {
  if (a.size() == 0) throw std::invalid_argument("softmax_stable: empty input");
  const double m = a.maxCoeff();
  if (m == kNegInf) throw std::invalid_argument("softmax_stable: all entries are -inf");
  Vec p(a.size());
  double z = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double x = a[i] - m;
    p[i] = (x == kNegInf) ? 0.0 : std::exp(x);
    z += p[i];
  }
  p /= z;
  return p;
}

BoltzReport boltz(const Vec& a) {
  if (a.size() == 0) throw std::invalid_argument("boltz: empty input");
  BoltzReport rep;
  rep.log_partition = log_sum_exp(a);
  rep.probs = softmax_stable(a);
  double v = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    if (rep.probs[i] > 0.0) v += a[i] * rep.probs[i];  // skip p=0 so -inf logits do not poison
  }
  rep.value = v;
  rep.entropy = rep.log_partition - rep.value;
  return rep;
}

double boltz_value(const Vec& a) { return boltz(a).value; }

double boltz_masked(const Vec& a, const std::vector<bool>& keep) {
  if (static_cast<int>(keep.size()) != a.size()) {
    throw std::invalid_argument("boltz_masked: mask length mismatch");
  }
  int count = 0;
  for (bool k : keep) count += k ? 1 : 0;
  if (count == 0) throw std::invalid_argument("boltz_masked: empty mask");
  Vec sub(count);
  int j = 0;
  for (int i = 0; i < a.size(); ++i) {
    if (keep[i]) sub[j++] = a[i];
  }
  return boltz(sub).value;
}

Vec boltz_grad(const Vec& a) {
  const BoltzReport rep = boltz(a);
  Vec g(a.size());
  for (int i = 0; i < a.size(); ++i) g[i] = rep.probs[i] * (1.0 + a[i] - rep.value);
  return g;
}

double boltz_curvature(const Vec& a, int i) {
  if (i < 0 || i >= a.size()) throw std::invalid_argument("boltz_curvature: index out of range");
  const BoltzReport rep = boltz(a);
  const double p = rep.probs[i];
  // log p_i + entropy + 1 simplifies to a_i - value + 1, which stays finite
  // and accurate even when p_i underflows.
  return p * ((1.0 - 2.0 * p) * (a[i] - rep.value + 1.0) + 1.0);
}

GapResult boltz_gap(const Vec& a, const Vec& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("boltz_gap: empty input");
  const double shift = std::max(a.maxCoeff(), b.maxCoeff());

  // Numerator sum_{ij} (a_i - b_j) e^{(a_i - shift) + (b_j - shift)} and the
  // two partition factors, accumulated in double-double: the pair terms are
  // O(1) but can cancel down to ~1e-30 of their size.
  DoubleDouble num;
  for (int i = 0; i < a.size(); ++i) {
    const double ea = a[i] - shift;
    for (int j = 0; j < b.size(); ++j) {
      const double w = std::exp(ea + (b[j] - shift));
      double p, e;
      two_prod(a[i] - b[j], w, p, e);
      num.add(p);
      num.add(e);
    }
  }
  DoubleDouble za, zb;
  for (int i = 0; i < a.size(); ++i) za.add(std::exp(a[i] - shift));
  for (int j = 0; j < b.size(); ++j) zb.add(std::exp(b[j] - shift));

  GapResult r;
  const double numerator = num.value();
  const double denom = za.value() * zb.value();
  r.value = numerator / denom;
  r.sign = (numerator > 0.0) ? 1 : (numerator < 0.0 ? -1 : 0);
  r.log_abs = (r.sign == 0) ? kNegInf : std::log(std::abs(numerator)) - std::log(denom);
  return r;
}

BoltzSepReport check_boltz_separation(const Vec& a, const Vec& b, double r, double delta) {
  const int n = static_cast<int>(a.size());
  if (n < 2 || b.size() != n) {
    throw std::invalid_argument("check_boltz_separation: need two vectors of equal length >= 2");
  }
  std::vector<double> pool;
  pool.reserve(2 * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (!(std::abs(a[i]) < r) || !(std::abs(b[i]) < r)) {
      throw std::invalid_argument("check_boltz_separation: entries must satisfy |x| < r");
    }
    pool.push_back(a[i]);
    pool.push_back(b[i]);
  }
  std::sort(pool.begin(), pool.end());
  for (std::size_t i = 0; i + 1 < pool.size(); ++i) {
    const double gap = pool[i + 1] - pool[i];
    if (gap != 0.0 && !(gap > delta)) {
      throw std::invalid_argument(
          "check_boltz_separation: union entries must be equal or more than delta apart");
    }
  }
  std::vector<double> sa(a.data(), a.data() + n), sb(b.data(), b.data() + n);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  for (int i = 0; i < n; ++i) {
    if (i + 1 < n && sa[i] == sa[i + 1]) {
      throw std::invalid_argument("check_boltz_separation: duplicate entries within a vector");
    }
    if (i + 1 < n && sb[i] == sb[i + 1]) {
      throw std::invalid_argument("check_boltz_separation: duplicate entries within a vector");
    }
  }
  if (sa == sb) {
    throw std::invalid_argument("check_boltz_separation: vectors are equal as multisets");
  }

  BoltzSepReport rep;
  const GapResult gap = boltz_gap(a, b);
  rep.gap_value = gap.value;
  rep.gap_log_abs = gap.log_abs;
  rep.bound_log = 2.0 * std::log(std::log(static_cast<double>(n))) - 2.0 * r;
  rep.passes = gap.sign != 0 && rep.gap_log_abs > rep.bound_log;
  return rep;
}

}  // namespace attnlab
