#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <stdexcept>

#include "attnlab/attention.hpp"
#include "attnlab/memorizer.hpp"
#include "attnlab/sequences.hpp"
#include "attnlab/serialize.hpp"

#include "support.hpp"

using namespace attnlab;

namespace {

LabeledDataset tricky_dataset() {
  LabeledDataset ds;
  ds.d = 2;
  ds.n = 3;
  ds.num_classes = 2;
  ds.seed = 77;
  Mat A(2, 3);
  A << 0.1, 1e-300, -0.0, 2.0 / 3.0, -5.5e-14, 0.75;
  Mat B(2, 3);
  B << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  ds.sequences = {A, B};
  Eigen::VectorXi la(3), lb(3);
  la << 1, 2, 1;
  lb << 2, 2, 1;
  ds.labels = {la, lb};
  ds.lengths = {3, 2};
  return ds;
}

bool datasets_identical(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.d != b.d || a.n != b.n || a.num_classes != b.num_classes || a.seed != b.seed ||
      a.size() != b.size() || a.lengths != b.lengths || a.labels.size() != b.labels.size()) {
    return false;
  }
  for (int i = 0; i < a.size(); ++i) {
    if (std::memcmp(a.sequences[i].data(), b.sequences[i].data(),
                    sizeof(double) * a.d * a.n) != 0) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    for (int k = 0; k < a.n; ++k) {
      if (a.labels[i][k] != b.labels[i][k]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("dataset json round trip is bitwise") {
  const LabeledDataset ds = tricky_dataset();
  const std::string path = testsupport::tmp_path("ds.json");
  save_dataset_json(ds, path);
  CHECK(datasets_identical(ds, load_dataset_json(path)));
}

TEST_CASE("dataset text round trip is bitwise") {
  const LabeledDataset ds = tricky_dataset();
  const std::string path = testsupport::tmp_path("ds.txt");
  save_dataset_text(ds, path);
  CHECK(datasets_identical(ds, load_dataset_text(path)));
}

TEST_CASE("unlabeled dataset without lengths round trips") {
  LabeledDataset ds = tricky_dataset();
  ds.labels.clear();
  ds.lengths.clear();
  ds.num_classes = 0;
  const std::string path = testsupport::tmp_path("ds2.json");
  save_dataset_json(ds, path);
  const LabeledDataset back = load_dataset_json(path);
  CHECK_FALSE(back.labeled());
  CHECK(back.lengths.empty());
  CHECK(datasets_identical(ds, back));
}

TEST_CASE("attention weights round trip preserves forward bitwise") {
  const SeparationParams p;
  const LabeledDataset ds = gen_separated_dataset(2, 4, 3, p, true, 5);
  const ContextualMap cm = build_contextual_map(ds, p, CMMode::scaled, 0.0, 1, 6);

  const AttentionWeights back = attention_from_json(attention_to_json(cm.w));
  CHECK((back.kq.W_K() - cm.w.kq.W_K()).norm() == 0.0);
  CHECK(back.kq.scale == cm.w.kq.scale);

  const Mat a = self_attention_softmax(ds.sequences[0], cm.w);
  const Mat b = self_attention_softmax(ds.sequences[0], back);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("feed-forward and model round trips") {
  const SeparationParams p;
  LabeledDataset ds = gen_separated_dataset(4, 3, 4, p, true, 7);
  assign_consistent_random_labels(ds, 3, 8);
  const TransformerModel model =
      build_one_layer_memorizer(ds, p, CMMode::scaled, 0.0, false, 9);

  const FFNet ff_back = ffnet_from_json(ffnet_to_json(model.ff));
  CHECK((ff_back.W1 - model.ff.W1).norm() == 0.0);
  CHECK(ff_back.uses_skip == model.ff.uses_skip);

  int n_back = 0;
  const TransformerModel back = model_from_json(model_to_json(model, ds.n), &n_back);
  CHECK(n_back == ds.n);
  CHECK(back.has_pos_enc == model.has_pos_enc);
  CHECK(back.param_count == model.param_count);

  const Mat a = memorizer_forward(model, ds.sequences[0]);
  const Mat b = memorizer_forward(back, ds.sequences[0]);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("format tags are validated") {
  const LabeledDataset ds = tricky_dataset();
  nlohmann::ordered_json j = dataset_to_json(ds);
  j["format"] = "something-else";
  CHECK_THROWS_AS(dataset_from_json(j), std::invalid_argument);

  const std::string path = testsupport::tmp_path("bad.txt");
  testsupport::write_text(path, "not-a-dataset 9\n");
  CHECK_THROWS_AS(load_dataset_text(path), std::invalid_argument);

  const std::string missing = testsupport::tmp_path("missing.json");
  CHECK_THROWS(load_dataset_json(missing));
}

TEST_CASE("json files end with a newline and parse back") {
  nlohmann::ordered_json j = {{"a", 1}, {"b", 0.1}};
  const std::string path = testsupport::tmp_path("j.json");
  write_json_file(j, path);
  const std::string raw = testsupport::read_text(path);
  REQUIRE_FALSE(raw.empty());
  CHECK(raw.back() == '\n');
  CHECK(read_json_file(path) == j);
}
