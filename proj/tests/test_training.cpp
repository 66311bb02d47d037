#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "attnlab/rng.hpp"
#include "attnlab/training.hpp"

#include "support.hpp"

using namespace attnlab;

namespace {

Mat random_input(int d, int n, std::uint64_t seed) {
  Rng rng(seed);
  return Mat::NullaryExpr(d, n, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
}

}  // namespace

TEST_CASE("initialization is shaped and seeded deterministically") {
  const Rank1Model m = init_rank1_model(5, 2, 7, 3, 100);
  REQUIRE(m.blocks.size() == 2);
  CHECK(m.blocks[0].v1.size() == 5);
  CHECK(m.blocks[0].ff.W1.rows() == 7);
  CHECK(m.blocks[0].ff.W1.cols() == 5);
  CHECK(m.blocks[0].ff.W2.rows() == 5);
  CHECK(m.W_read.rows() == 3);
  CHECK(m.b_read.norm() == 0.0);

  const Rank1Model same = init_rank1_model(5, 2, 7, 3, 100);
  CHECK((m.blocks[1].ff.W1 - same.blocks[1].ff.W1).norm() == 0.0);
  const Rank1Model other = init_rank1_model(5, 2, 7, 3, 101);
  CHECK((m.blocks[0].v1 - other.blocks[0].v1).norm() != 0.0);
}

TEST_CASE("forward restricts to the valid prefix") {
  const Rank1Model m = init_rank1_model(4, 1, 6, 3, 7);
  const Mat Z = random_input(4, 5, 8);
  const Mat full = rank1_forward(m, Z, 5);
  const Mat part = rank1_forward(m, Z, 3);
  CHECK(full.cols() == 5);
  CHECK(part.cols() == 3);
  // attention pools over the whole visible prefix, so the shared columns differ
  CHECK((full.leftCols(3) - part).cwiseAbs().maxCoeff() > 0.0);
  CHECK_THROWS_AS(rank1_forward(m, Z, 0), std::invalid_argument);
  CHECK_THROWS_AS(rank1_forward(m, Z, 6), std::invalid_argument);
}

TEST_CASE("padded columns are invisible to the loss") {
  const Rank1Model m = init_rank1_model(3, 2, 5, 2, 9);
  Mat Z = random_input(3, 4, 10);
  Eigen::VectorXi y(4);
  y << 1, 2, 1, 2;
  const std::vector<const Mat*> batch = {&Z};
  const std::vector<const Eigen::VectorXi*> labels = {&y};
  const std::vector<int> lens = {3};

  const double before = loss_and_gradients(m, batch, labels, lens, nullptr);
  Z.col(3) = Vec::Constant(3, 123.0);
  const double after = loss_and_gradients(m, batch, labels, lens, nullptr);
  CHECK(before == after);
}

TEST_CASE("analytic gradients match central differences on a small model") {
  Rank1Model m = init_rank1_model(3, 2, 4, 3, 11);
  const Mat Z = random_input(3, 3, 12);
  Eigen::VectorXi y(3);
  y << 1, 3, 2;
  const std::vector<const Mat*> batch = {&Z};
  const std::vector<const Eigen::VectorXi*> labels = {&y};
  const std::vector<int> lens = {3};

  Gradients grads;
  loss_and_gradients(m, batch, labels, lens, &grads);

  const double h = 1e-5;
  auto fd_at = [&](double& param) {
    const double saved = param;
    param = saved + h;
    const double lp = loss_and_gradients(m, batch, labels, lens, nullptr);
    param = saved - h;
    const double lm = loss_and_gradients(m, batch, labels, lens, nullptr);
    param = saved;
    return (lp - lm) / (2.0 * h);
  };

  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(grads.blocks[0].v1[i] - fd_at(m.blocks[0].v1[i])) < 1e-7);
    CHECK(std::abs(grads.blocks[1].v2[i] - fd_at(m.blocks[1].v2[i])) < 1e-7);
    CHECK(std::abs(grads.blocks[0].w_o[i] - fd_at(m.blocks[0].w_o[i])) < 1e-7);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(grads.W_read(i, j) - fd_at(m.W_read(i, j))) < 1e-7);
    }
  }
  CHECK(std::abs(grads.blocks[1].ff.W2(1, 2) - fd_at(m.blocks[1].ff.W2(1, 2))) < 1e-7);
  CHECK(std::abs(grads.blocks[0].ff.b1[0] - fd_at(m.blocks[0].ff.b1[0])) < 1e-7);
}

TEST_CASE("synthetic task labels split on a sequence-level threshold") {
  const int C = 4, half = 2;
  const LabeledDataset ds = gen_synthetic_task(64, 6, 24, C, 8, 13);
  REQUIRE(ds.size() == 64);
  REQUIRE(ds.labeled());

  double max_low = -1e300, min_high = 1e300;
  for (int i = 0; i < ds.size(); ++i) {
    const double mean_first = ds.sequences[i].row(0).mean();
    const int g = (ds.labels[i][0] - 1) / half;  // bit is shared by the whole sequence
    for (int k = 0; k < ds.n; ++k) {
      CHECK((ds.labels[i][k] - 1) / half == g);
      CHECK(ds.labels[i][k] >= 1);
      CHECK(ds.labels[i][k] <= C);
    }
    if (g == 0) {
      max_low = std::max(max_low, mean_first);
    } else {
      min_high = std::min(min_high, mean_first);
    }
  }
  // the margin rejection leaves a visible gap between the two groups
  CHECK(max_low < min_high);
}

TEST_CASE("training on a tiny task reduces loss and logs csv") {
  const LabeledDataset ds = gen_synthetic_task(32, 4, 8, 2, 6, 14);
  Rank1Model m = init_rank1_model(6, 1, 8, 2, 15);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.seed = 16;
  cfg.csv_path = testsupport::tmp_path("train.csv");

  const TrainMetrics metrics = train(m, ds, cfg);
  REQUIRE(metrics.epochs_run == 30);
  CHECK(metrics.loss.back() < metrics.loss.front());
  CHECK(metrics.accuracy.back() > 0.5);

  std::ifstream csv(cfg.csv_path);
  REQUIRE(csv.good());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "epoch,loss,accuracy");
  int rows = 0;
  while (std::getline(csv, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 30);
}

TEST_CASE("early stopping honors the accuracy bar") {
  const LabeledDataset ds = gen_synthetic_task(32, 4, 8, 2, 6, 17);
  Rank1Model m = init_rank1_model(6, 1, 16, 2, 18);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.seed = 19;
  cfg.stop_accuracy = 0.9;
  const TrainMetrics metrics = train(m, ds, cfg);
  if (metrics.accuracy.back() >= 0.9) {
    CHECK(metrics.epochs_run == metrics.epochs_to(0.9));
  }
}

TEST_CASE("epoch metrics lookup") {
  TrainMetrics m;
  m.accuracy = {0.3, 0.6, 0.95, 0.97};
  CHECK(m.epochs_to(0.5) == 2);
  CHECK(m.epochs_to(0.95) == 3);
  CHECK(m.epochs_to(0.99) == -1);
}
