#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "attnlab/errors.hpp"
#include "attnlab/projection.hpp"
#include "attnlab/rng.hpp"
#include "attnlab/sequences.hpp"

using namespace attnlab;

namespace {

std::vector<Vec> random_points(int count, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> pts;
  for (int i = 0; i < count; ++i) pts.push_back(rng.unit_vector(d) * rng.uniform(0.5, 1.5));
  return pts;
}

}  // namespace

TEST_CASE("certified direction preserves every pairwise distance") {
  const auto pts = random_points(20, 5, 5);
  const ProjectionCertificate cert = find_distance_preserving_direction(pts, 100000, 1);

  CHECK(std::abs(cert.v.norm() - 1.0) < 1e-12);
  CHECK(cert.worst_ratio_lower >= cert.c_lower);
  CHECK(cert.worst_ratio_upper <= 1.0 + 1e-12);

  // re-verify independently, origin included
  std::vector<Vec> aug = pts;
  aug.push_back(Vec::Zero(5));
  const int m = static_cast<int>(aug.size());
  CHECK(std::abs(cert.c_lower - std::sqrt(8.0 / (M_PI * 5)) / (double(m) * m)) < 1e-15);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double dist = (aug[i] - aug[j]).norm();
      const double proj = std::abs(cert.v.dot(aug[i] - aug[j]));
      CHECK(proj >= cert.c_lower * dist);
      CHECK(proj <= dist * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("direction search is deterministic in the seed") {
  const auto pts = random_points(12, 4, 6);
  const ProjectionCertificate a = find_distance_preserving_direction(pts, 100000, 9);
  const ProjectionCertificate b = find_distance_preserving_direction(pts, 100000, 9);
  CHECK((a.v - b.v).norm() == 0.0);
  CHECK(a.tries_used == b.tries_used);
}

TEST_CASE("nonnegative mode certifies with componentwise nonnegative directions") {
  const auto pts = random_points(10, 4, 8);
  const ProjectionCertificate cert = find_distance_preserving_direction(pts, 1000000, 2, true);
  for (int i = 0; i < 4; ++i) CHECK(cert.v[i] >= 0.0);
  CHECK(cert.worst_ratio_lower >= cert.c_lower);
}

TEST_CASE("duplicate points are deduplicated before certification") {
  auto pts = random_points(6, 3, 12);
  pts.push_back(pts[0]);
  pts.push_back(pts[2]);
  const ProjectionCertificate cert = find_distance_preserving_direction(pts, 100000, 3);
  // 6 distinct + origin = 7 points, 21 pairs
  CHECK(cert.pairs_checked == 21);
}

TEST_CASE("key/query factors give every distinct token pair a certified logit gap") {
  const SeparationParams p{0.9, 1.1, 0.3};
  const LabeledDataset ds = gen_separated_dataset(2, 2, 3, p, true, 4);
  const Vocabulary vocab = extract_vocab(ds);
  const double delta = 2.0 * std::log(2.0) + 3.0;
  const KQWeights kq = build_kq_weights(vocab, p, delta, 1, 15);

  CHECK(kq.s == 1);
  CHECK(kq.scale > 0.0);
  // frozen closed form for |V| = 4, d = 3, eps = 0.3, r_min = 0.9
  CHECK(std::abs(kq.scale - 11961.762275500506924) / 11961.762275500506924 < 1e-12);

  const Mat WK = kq.W_K();
  const Mat WQ = kq.W_Q();
  CHECK(WK.rows() == 1);
  CHECK(WK.cols() == 3);
  for (int a = 0; a < vocab.count(); ++a) {
    for (int b = 0; b < vocab.count(); ++b) {
      if (a == b) continue;
      for (int c = 0; c < vocab.count(); ++c) {
        const double la = (WK * vocab.tokens[a]).value() * (WQ * vocab.tokens[c]).value();
        const double lb = (WK * vocab.tokens[b]).value() * (WQ * vocab.tokens[c]).value();
        CHECK(std::abs(la - lb) > delta);
      }
    }
  }
}

TEST_CASE("impossible budgets throw instead of looping") {
  // two points at distance ~2 in d = 2 cannot be compressed below ratio that
  // a tiny try budget will find with probability ~0 when c_lower is huge;
  // instead exercise the budget with max_tries = 0
  const auto pts = random_points(5, 3, 30);
  CHECK_THROWS_AS(find_distance_preserving_direction(pts, 0, 1), BudgetExhaustedError);
}
