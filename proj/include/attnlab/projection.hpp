#pragma once

#include <cstdint>
#include <vector>

#include "attnlab/sequences.hpp"

namespace attnlab {

// Certificate that a unit direction v compresses pairwise distances of a
// finite point set (augmented with the origin) by at most the stated factor:
// c_lower * |x - x'| <= |v.(x - x')| <= |x - x'| for all pairs, with
// c_lower = (1 / |X|^2) sqrt(8 / (pi d)). Verified exhaustively, not assumed.
struct ProjectionCertificate {
  Vec v;
  double c_lower = 0.0;
  double worst_ratio_lower = 0.0;  // measured min |v.(x-x')| / |x-x'|
  double worst_ratio_upper = 0.0;  // measured max, <= 1 up to roundoff
  int tries_used = 0;
  std::int64_t pairs_checked = 0;
};

// Samples random unit directions until one certifies, up to max_tries; throws
// BudgetExhaustedError past the budget. With require_nonneg the candidates
// are componentwise absolute values, so v >= 0 entrywise.
ProjectionCertificate find_distance_preserving_direction(const std::vector<Vec>& points,
                                                         int max_tries, std::uint64_t seed,
                                                         bool require_nonneg = false);

// Rank-1 key/query factors: W_K = u v^T and W_Q = u_prime v^T (s x d), chosen
// so every pair of distinct tokens induces a logit gap > delta against every
// query token. The magnitude lives in scale = |u . u_prime|.
struct KQWeights {
  Vec u;        // s
  Vec u_prime;  // s
  Vec v;        // d, unit
  double scale = 0.0;
  int s = 1;

  Mat W_K() const { return u * v.transpose(); }
  Mat W_Q() const { return u_prime * v.transpose(); }
};

// Builds the factors with scale = (|V|+1)^4 (pi d / 8) delta / (eps r_min)
// and verifies the logit-gap property over all (a, b, c) token triples.
KQWeights build_kq_weights(const Vocabulary& vocab, const SeparationParams& p, double delta,
                           int s, std::uint64_t seed);

}  // namespace attnlab
