#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "attnlab/errors.hpp"
#include "attnlab/memorizer.hpp"
#include "attnlab/rng.hpp"
#include "attnlab/sequences.hpp"

using namespace attnlab;

namespace {

std::vector<Vec> random_keys(int count, int d, double min_gap, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> keys;
  while (static_cast<int>(keys.size()) < count) {
    Vec cand = rng.gaussian_vector(d);
    bool ok = true;
    for (const auto& k : keys) ok = ok && (k - cand).norm() > min_gap;
    if (ok) keys.push_back(cand);
  }
  return keys;
}

}  // namespace

TEST_CASE("feed-forward columns evaluate independently") {
  Rng rng(3);
  FFNet ff;
  ff.W1 = Mat::NullaryExpr(5, 3, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  ff.b1 = rng.gaussian_vector(5);
  ff.W2 = Mat::NullaryExpr(3, 5, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  ff.b2 = rng.gaussian_vector(3);
  ff.uses_skip = true;

  Mat H = Mat::NullaryExpr(3, 4, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  const Mat out = ff_forward(ff, H);
  for (int k = 0; k < 4; ++k) {
    CHECK((out.col(k) - ff_forward_col(ff, H.col(k))).norm() == 0.0);
  }

  FFNet noskip = ff;
  noskip.uses_skip = false;
  CHECK(((ff_forward(ff, H) - ff_forward(noskip, H)) - H).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("ramp memorizer interpolates exactly and vanishes below the keys") {
  const auto keys = random_keys(10, 4, 0.3, 11);
  Rng rng(13);
  std::vector<Vec> targets;
  for (int i = 0; i < 10; ++i) targets.push_back(rng.gaussian_vector(3));

  const FFNet ff = build_ff_memorizer(keys, targets, 0.3, 17);
  CHECK_FALSE(ff.uses_skip);
  for (int i = 0; i < 10; ++i) {
    CHECK((ff_forward_col(ff, keys[i]) - targets[i]).cwiseAbs().maxCoeff() < 1e-9);
  }

  // far below every key along -v all ramps are closed
  Vec v(4);
  v = ff.W1.row(0).transpose();
  v.normalize();
  const Vec low = -1e3 * v;
  CHECK(ff_forward_col(ff, low).norm() == 0.0);
}

TEST_CASE("bitwise duplicate keys require equal targets") {
  auto keys = random_keys(5, 3, 0.3, 19);
  Rng rng(23);
  std::vector<Vec> targets;
  for (int i = 0; i < 5; ++i) targets.push_back(rng.gaussian_vector(2));

  auto dup_keys = keys;
  dup_keys.push_back(keys[2]);
  auto ok_targets = targets;
  ok_targets.push_back(targets[2]);
  const FFNet ff = build_ff_memorizer(dup_keys, ok_targets, 0.3, 29);
  CHECK((ff_forward_col(ff, keys[2]) - targets[2]).cwiseAbs().maxCoeff() < 1e-9);

  auto bad_targets = targets;
  bad_targets.push_back(targets[2] + Vec::Constant(2, 0.5));
  CHECK_THROWS_AS(build_ff_memorizer(dup_keys, bad_targets, 0.3, 29), InconsistentLabelsError);
}

TEST_CASE("keys closer than the declared gap are refused") {
  auto keys = random_keys(4, 3, 0.5, 31);
  keys.push_back(keys[0] + Vec::Constant(3, 1e-6));
  std::vector<Vec> targets(5, Vec::Zero(2));
  CHECK_THROWS_AS(build_ff_memorizer(keys, targets, 0.5, 37), InfeasibleError);
}

TEST_CASE("positional encoding spaces the columns along the diagonal") {
  const Mat E = build_positional_encoding(4, 3, 1.0);
  CHECK(E.rows() == 3);
  CHECK(E.cols() == 4);
  for (int k = 0; k < 4; ++k) {
    for (int t = 0; t < 3; ++t) CHECK(E(t, k) == 2.0 * (k + 1) * 1.0);
  }
}

TEST_CASE("labels encode on the first coordinate and decode with margin") {
  const Vec e = encode_label(3, 5);
  CHECK(e[0] == 3.0);
  CHECK(e.tail(4).norm() == 0.0);
  Vec noisy = e;
  noisy[0] += 0.49;
  noisy[2] = 7.0;  // other coordinates are ignored
  CHECK(decode_label(noisy, 6) == 3);
  CHECK(decode_label(Vec::Constant(2, -5.0), 4) == 1);   // clamped up
  CHECK(decode_label(Vec::Constant(2, 99.0), 4) == 4);   // clamped down
}

TEST_CASE("parameter budget closed form") {
  CHECK(memorization_param_bound(1, 8, 8, 50) == 4 * (1 + 8) + 8 * (2 * 8 * 50 + 8));
}

TEST_CASE("one-layer model memorizes a fresh-token dataset exactly") {
  const SeparationParams p;
  LabeledDataset ds = gen_separated_dataset(6, 3, 4, p, true, 43);
  assign_consistent_random_labels(ds, 3, 44);
  const TransformerModel model =
      build_one_layer_memorizer(ds, p, CMMode::scaled, 0.0, false, 45);
  CHECK_FALSE(model.has_pos_enc);

  const MemorizationReport rep = eval_memorization(model, ds);
  CHECK(rep.exact_match_rate == 1.0);
  CHECK(rep.total_tokens == 18);
  CHECK(rep.max_residual < 0.5);
  CHECK(rep.param_count <= rep.param_bound);
}

TEST_CASE("duplicate tokens need the positional encoding") {
  const SeparationParams p;
  LabeledDataset ds = gen_separated_dataset(3, 3, 3, p, true, 47);
  ds.sequences[0].col(2) = ds.sequences[0].col(0);
  ds.num_classes = 4;
  Rng rng(48);
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXi lab(3);
    for (int k = 0; k < 3; ++k) lab[k] = rng.uniform_int(1, 4);
    ds.labels.push_back(lab);
  }
  // force the duplicate positions onto different labels
  ds.labels[0][0] = 1;
  ds.labels[0][2] = 2;

  CHECK_THROWS_AS(build_one_layer_memorizer(ds, p, CMMode::scaled, 0.0, false, 49),
                  InfeasibleError);

  const TransformerModel model =
      build_one_layer_memorizer(ds, p, CMMode::scaled, 0.0, true, 49);
  CHECK(model.has_pos_enc);
  const MemorizationReport rep = eval_memorization(model, ds);
  CHECK(rep.exact_match_rate == 1.0);
}

TEST_CASE("conflicting labels for one context are refused") {
  const SeparationParams p;
  LabeledDataset ds = gen_separated_dataset(1, 3, 4, p, true, 53);
  Mat rev(4, 3);
  for (int k = 0; k < 3; ++k) rev.col(k) = ds.sequences[0].col(2 - k);
  ds.sequences.push_back(rev);
  ds.num_classes = 3;
  Eigen::VectorXi la(3), lb(3);
  la << 1, 2, 3;
  lb << 1, 2, 3;  // reversed sequence: same contexts, clashing labels
  ds.labels = {la, lb};
  CHECK_THROWS_AS(build_one_layer_memorizer(ds, p, CMMode::scaled, 0.0, false, 54),
                  InconsistentLabelsError);
}
