#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnlab/memorizer.hpp"
#include "attnlab/sequences.hpp"

namespace attnlab {

// Trainable block: rank-1 single-head softmax attention with tied key/value
// direction v1, followed by a skip feed-forward:
//   alpha = v1^T Z, q = v2^T Z, A_ij = alpha_i q_j,
//   Z' = Z + w_o (alpha . softmax_col(A)), out = Z' + FF(Z').
struct Rank1Block {
  Vec v1, v2, w_o;  // d each
  FFNet ff;         // uses_skip = true
};

struct Rank1Model {
  std::vector<Rank1Block> blocks;
  Mat W_read;  // C x d
  Vec b_read;  // C
  int d = 0;
  int n_classes = 0;
};

struct TrainConfig {
  int epochs = 400;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  double stop_accuracy = -1.0;  // stop early once training accuracy reaches this; <= 0 disables
  std::string csv_path;         // per-epoch "epoch,loss,accuracy" when non-empty
};

struct TrainMetrics {
  std::vector<double> loss;      // mean training loss per epoch
  std::vector<double> accuracy;  // full-dataset accuracy after each epoch
  int epochs_run = 0;

  // First 1-based epoch whose accuracy reached acc; -1 if never.
  int epochs_to(double acc) const;
};

Rank1Model init_rank1_model(int d, int depth, int ff_width, int n_classes, std::uint64_t seed);

// Per-column class logits (C x n). Only the first valid_len columns are
// attended over and scored; padded columns receive zero gradient.
Mat rank1_forward(const Rank1Model& m, const Mat& Z, int valid_len);

struct Gradients {
  std::vector<Rank1Block> blocks;  // same shapes, gradient values
  Mat W_read;
  Vec b_read;
};

// Mean cross-entropy over the valid tokens of the batch, with hand-written
// reverse-mode gradients for every parameter.
double loss_and_gradients(const Rank1Model& m, const std::vector<const Mat*>& batch,
                          const std::vector<const Eigen::VectorXi*>& batch_labels,
                          const std::vector<int>& valid_lens, Gradients* grads);

TrainMetrics train(Rank1Model& m, const LabeledDataset& ds, const TrainConfig& cfg);

// Context-sensitive classification task: the label of a token combines its
// identity with a bit computed from the whole sequence (whether the mean
// first coordinate clears a population threshold). Sequences too close to
// the threshold are resampled, so the bit is always well determined, but no
// per-token rule can predict it.
LabeledDataset gen_synthetic_task(int N, int n, int vocab_size, int C, int d,
                                  std::uint64_t seed);

double dataset_accuracy(const Rank1Model& m, const LabeledDataset& ds);

}  // namespace attnlab
