#include "attnlab/projection.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "attnlab/errors.hpp"
#include "attnlab/rng.hpp"

namespace attnlab {

namespace {

std::vector<Vec> dedupe_and_augment(const std::vector<Vec>& points, int d) {
  std::vector<Vec> out;
  std::unordered_set<std::string> seen;
  Vec zero = Vec::Zero(d);
  out.push_back(zero);
  seen.insert(std::string(reinterpret_cast<const char*>(zero.data()), d * sizeof(double)));
  for (const auto& x : points) {
    if (x.size() != d) throw std::invalid_argument("projection: inconsistent dimensions");
    std::string key(reinterpret_cast<const char*>(x.data()), d * sizeof(double));
    if (seen.insert(key).second) out.push_back(x);
  }
  return out;
}

}  // namespace

ProjectionCertificate find_distance_preserving_direction(const std::vector<Vec>& points,
                                                         int max_tries, std::uint64_t seed,
                                                         bool require_nonneg) {
  if (points.empty()) throw std::invalid_argument("projection: empty point set");
  const int d = static_cast<int>(points[0].size());
  const std::vector<Vec> X = dedupe_and_augment(points, d);
  const double m = static_cast<double>(X.size());
  const double c_lower = (1.0 / (m * m)) * std::sqrt(8.0 / (M_PI * d));

  Rng rng(seed);
  for (int attempt = 1; attempt <= max_tries; ++attempt) {
    Vec v = rng.unit_vector(d);
    if (require_nonneg) {
      v = v.cwiseAbs();
      v.normalize();
    }
    double worst_lo = std::numeric_limits<double>::infinity();
    double worst_hi = 0.0;
    bool ok = true;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < X.size() && ok; ++i) {
      for (std::size_t j = i + 1; j < X.size(); ++j) {
        ++pairs;
        const double dist = (X[i] - X[j]).norm();
        const double proj = std::abs(v.dot(X[i] - X[j]));
        const double ratio = proj / dist;
        worst_lo = std::min(worst_lo, ratio);
        worst_hi = std::max(worst_hi, ratio);
        if (!(proj >= c_lower * dist)) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      ProjectionCertificate cert;
      cert.v = v;
      cert.c_lower = c_lower;
      cert.worst_ratio_lower = worst_lo;
      cert.worst_ratio_upper = worst_hi;
      cert.tries_used = attempt;
      cert.pairs_checked = pairs;
      return cert;
    }
  }
  throw BudgetExhaustedError("find_distance_preserving_direction: no certified direction within " +
                             std::to_string(max_tries) + " tries");
}

KQWeights build_kq_weights(const Vocabulary& vocab, const SeparationParams& p, double delta,
                           int s, std::uint64_t seed) {
  if (vocab.count() == 0) throw std::invalid_argument("build_kq_weights: empty vocabulary");
  if (s < 1) throw std::invalid_argument("build_kq_weights: head width s must be >= 1");
  if (!(delta > 0)) throw std::invalid_argument("build_kq_weights: delta must be positive");

  const int d = static_cast<int>(vocab.tokens[0].size());
  ProjectionCertificate cert = find_distance_preserving_direction(vocab.tokens, 10000, seed);

  const double V1 = static_cast<double>(vocab.count()) + 1.0;
  const double scale = V1 * V1 * V1 * V1 * (M_PI * d / 8.0) * delta / (p.eps * p.r_min);

  KQWeights kq;
  kq.v = cert.v;
  kq.s = s;
  kq.scale = scale;
  kq.u = Vec::Zero(s);
  kq.u_prime = Vec::Zero(s);
  kq.u[0] = std::sqrt(scale);
  kq.u_prime[0] = std::sqrt(scale);

  // Exhaustive certification of the logit-gap property the scale was chosen
  // for: distinct keys stay > delta apart against every query.
  std::vector<double> proj(vocab.count());
  for (int i = 0; i < vocab.count(); ++i) proj[i] = cert.v.dot(vocab.tokens[i]);
  for (int aa = 0; aa < vocab.count(); ++aa) {
    for (int bb = aa + 1; bb < vocab.count(); ++bb) {
      for (int cc = 0; cc < vocab.count(); ++cc) {
        const double gap = std::abs(scale * (proj[aa] - proj[bb]) * proj[cc]);
        if (!(gap > delta)) {
          throw InfeasibleError("build_kq_weights: logit gap certification failed");
        }
      }
    }
  }
  return kq;
}

}  // namespace attnlab
