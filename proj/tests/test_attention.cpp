#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "attnlab/attention.hpp"
#include "attnlab/errors.hpp"
#include "attnlab/rng.hpp"
#include "attnlab/sequences.hpp"

using namespace attnlab;

namespace {

bool mats_equal(const Mat& A, const Mat& B) {
  return A.rows() == B.rows() && A.cols() == B.cols() &&
         std::memcmp(A.data(), B.data(), sizeof(double) * A.size()) == 0;
}

ContextualMap small_map(const LabeledDataset& ds, const SeparationParams& p) {
  return build_contextual_map(ds, p, CMMode::scaled, 0.0, 1, 99);
}

}  // namespace

TEST_CASE("column permutations permute the output bitwise") {
  const SeparationParams p;
  const LabeledDataset ds = gen_separated_dataset(1, 6, 4, p, true, 17);
  const ContextualMap cm = small_map(ds, p);

  const Mat Z = ds.sequences[0];
  const Mat out = self_attention_softmax(Z, cm.w);

  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  Mat Zp(Z.rows(), Z.cols());
  for (int k = 0; k < 6; ++k) Zp.col(k) = Z.col(perm[k]);
  const Mat outp = self_attention_softmax(Zp, cm.w);
  for (int k = 0; k < 6; ++k) {
    CHECK(std::memcmp(outp.col(k).data(), out.col(perm[k]).data(),
                      sizeof(double) * Z.rows()) == 0);
  }
}

TEST_CASE("trivial mask agrees bitwise with the unmasked kernel") {
  const SeparationParams p;
  const LabeledDataset ds = gen_separated_dataset(1, 5, 3, p, true, 23);
  const ContextualMap cm = small_map(ds, p);
  const Mat Z = ds.sequences[0];
  CHECK(mats_equal(self_attention_softmax(Z, cm.w),
                   self_attention_softmax_masked(Z, cm.w, MaskMatrix::none(5))));
}

TEST_CASE("prefix mask equals attention over the truncated sequence") {
  const SeparationParams p;
  const LabeledDataset ds = gen_separated_dataset(1, 5, 3, p, true, 29);
  const ContextualMap cm = small_map(ds, p);
  const Mat Z = ds.sequences[0];

  const Mat masked = self_attention_softmax_masked(Z, cm.w, MaskMatrix::prefix(5, 3));
  const Mat trunc = self_attention_softmax(Z.leftCols(3), cm.w);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::memcmp(masked.col(k).data(), trunc.col(k).data(), sizeof(double) * 3) == 0);
  }
}

TEST_CASE("causal first column sees only itself") {
  const SeparationParams p;
  const LabeledDataset ds = gen_separated_dataset(1, 4, 3, p, true, 31);
  const ContextualMap cm = small_map(ds, p);
  const Mat Z = ds.sequences[0];
  const Mat causal = self_attention_softmax_masked(Z, cm.w, MaskMatrix::causal(4));
  const Mat solo = self_attention_softmax(Z.leftCols(1), cm.w);
  CHECK(std::memcmp(causal.col(0).data(), solo.col(0).data(), sizeof(double) * 3) == 0);
}

TEST_CASE("generic dense kernel matches the rank-1 kernel numerically") {
  const SeparationParams p;
  const LabeledDataset ds = gen_separated_dataset(1, 5, 4, p, true, 37);
  const ContextualMap cm = small_map(ds, p);
  const Mat Z = ds.sequences[0];

  HeadWeights head;
  head.W_K = cm.w.kq.W_K();
  head.W_Q = cm.w.kq.W_Q();
  head.W_V = cm.w.W_V();
  head.W_O = cm.w.W_O();
  const Mat general = self_attention_softmax_general(Z, {head});
  const Mat rank1 = self_attention_softmax(Z, cm.w);
  CHECK((general - rank1).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("hardmax splits exact ties uniformly") {
  // two keys tie on every query; value vectors differ
  Mat Z(2, 3);
  Z << 1.0, 1.0, 0.5, 0.5, -0.5, 0.0;
  HeadWeights head;
  head.W_K = Mat::Zero(2, 2);
  head.W_K(0, 0) = 1.0;  // key score depends only on the first coordinate
  head.W_Q = Mat::Identity(2, 2);
  head.W_V = Mat::Identity(2, 2);
  head.W_O = Mat::Identity(2, 2);
  const Mat out = self_attention_hardmax(Z, {head});
  // columns 0 and 1 tie as keys (same first coordinate 1.0 > 0.5) so the
  // attended value is their average, added to each token
  const Vec avg = 0.5 * (Z.col(0) + Z.col(1));
  for (int k = 0; k < 3; ++k) {
    CHECK((out.col(k) - (Z.col(k) + avg)).norm() < 1e-14);
  }
}

TEST_CASE("closed-form scale and gap target match frozen values") {
  const SeparationParams p{0.9, 1.1, 0.3};
  const LabeledDataset ds = gen_separated_dataset(2, 2, 3, p, true, 41);
  const ContextualMap cm = build_contextual_map(ds, p, CMMode::closed_form, 0.0, 1, 7);
  CHECK(std::abs(cm.w.kq.scale - 11961.762275500506924) / 11961.762275500506924 < 1e-12);

  CHECK(std::abs(contextual_gap_log(4, 2, 3, p) - (-28960.36809044154449)) < 1e-6);

  const CMReport rep = verify_contextual_map(cm.w, ds, p);
  CHECK(rep.r_bound == doctest::Approx(1.175).epsilon(1e-12));
  CHECK(rep.passes_cond1);
  CHECK(rep.passes_cond2);
  CHECK(rep.max_displacement_ratio < p.eps / (4.0 * p.r_max));
}

TEST_CASE("automatic scale tuning lands near the target logit") {
  const SeparationParams p;
  const LabeledDataset ds = gen_shared_vocab_dataset(6, 4, 4, 10, p, 51);
  const ContextualMap cm = small_map(ds, p);
  const CMReport rep = verify_contextual_map(cm.w, ds, p);
  CHECK(rep.max_abs_logit > 1.0);
  CHECK(rep.max_abs_logit < 12.5);
  CHECK(rep.passes_cond1);
  CHECK(rep.min_distinct_gap > 0.0);
}

TEST_CASE("duplicate tokens inside a sequence are refused") {
  const SeparationParams p;
  LabeledDataset ds = gen_separated_dataset(1, 3, 3, p, true, 61);
  ds.sequences[0].col(2) = ds.sequences[0].col(0);
  CHECK_THROWS_AS(build_contextual_map(ds, p, CMMode::scaled, 0.0, 1, 1), InfeasibleError);
}

TEST_CASE("identical contexts in different column orders collapse bitwise") {
  const SeparationParams p;
  LabeledDataset ds = gen_separated_dataset(1, 4, 3, p, true, 67);
  Mat rev(3, 4);
  for (int k = 0; k < 4; ++k) rev.col(k) = ds.sequences[0].col(3 - k);
  ds.sequences.push_back(rev);

  const ContextualMap cm = small_map(ds, p);
  const Mat a = self_attention_softmax(ds.sequences[0], cm.w);
  const Mat b = self_attention_softmax(ds.sequences[1], cm.w);
  for (int k = 0; k < 4; ++k) {
    CHECK(std::memcmp(a.col(k).data(), b.col(3 - k).data(), sizeof(double) * 3) == 0);
  }

  // the verifier sees no distinct-context pair gap below the bound either
  const CMReport rep = verify_contextual_map(cm.w, ds, p);
  CHECK(rep.passes_cond2);
}

TEST_CASE("hardmax demo collides at every head count while softmax separates") {
  const HardmaxDemoReport rep = hardmax_collision_demo(3, 5, 20);
  REQUIRE(rep.head_counts.size() == 3);
  CHECK(rep.trials == 20);
  for (double r : rep.collision_rates) CHECK(r == 1.0);
  CHECK(rep.softmax_distinct_rate == 1.0);
}
