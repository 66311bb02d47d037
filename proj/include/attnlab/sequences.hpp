#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace attnlab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Shell and spacing constraints on token embeddings: every token norm lies
// strictly inside (r_min, r_max) and distinct tokens are more than eps apart.
struct SeparationParams {
  double r_min = 0.5;
  double r_max = 1.0;
  double eps = 0.1;
};

struct LabeledDataset {
  std::vector<Mat> sequences;           // each d x n, tokens are columns
  std::vector<Eigen::VectorXi> labels;  // per sequence, length n, classes 1..num_classes; empty = unlabeled
  int d = 0;
  int n = 0;
  int num_classes = 0;
  std::uint64_t seed = 0;
  std::vector<int> lengths;  // valid prefix length per sequence; empty = all columns valid

  int size() const { return static_cast<int>(sequences.size()); }
  bool labeled() const { return !labels.empty(); }
  int length(int i) const { return lengths.empty() ? n : lengths[i]; }
};

// De-duplicated token inventory. Tokens are compared bitwise: only exact
// copies count as the same vocabulary entry.
struct Vocabulary {
  std::vector<Vec> tokens;
  std::vector<std::vector<int>> sequence_ids;  // token index per (sequence, position)

  int count() const { return static_cast<int>(tokens.size()); }
};

struct SeparationReport {
  struct Violation {
    std::string kind;  // "norm_low", "norm_high", "pair_close"
    int seq_a = 0, pos_a = 0;
    int seq_b = -1, pos_b = -1;
    double value = 0.0;
  };

  bool passes = false;
  double min_norm = 0.0;
  double max_norm = 0.0;
  double min_pair_dist = 0.0;  // over non-identical token pairs; +inf if none
  std::vector<Violation> violations;
};

// Strict checks at native double precision; the report carries the measured
// extremes so callers can see the margins.
SeparationReport check_separated(const LabeledDataset& ds, const SeparationParams& p);

// Rejection-samples N sequences of n tokens in the (r_min, r_max) shell with
// pairwise spacing > eps. With no_dup_tokens, every token is fresh (hence all
// distinct); otherwise each token is, with fixed probability, a bitwise copy
// of an already placed one, producing duplicate and shared tokens.
LabeledDataset gen_separated_dataset(int N, int n, int d, const SeparationParams& p,
                                     bool no_dup_tokens, std::uint64_t seed);

// Draws a pool of vocab_size separated tokens, then fills each sequence by
// sampling n distinct pool entries: duplicate free within a sequence but with
// heavy token sharing across sequences.
LabeledDataset gen_shared_vocab_dataset(int N, int n, int d, int vocab_size,
                                        const SeparationParams& p, std::uint64_t seed);

Vocabulary extract_vocab(const LabeledDataset& ds);

// Attaches labels drawn uniformly from 1..num_classes. Positions holding the
// same token in sequences with the same token set receive the same label so
// the dataset stays consistently labeled.
void assign_consistent_random_labels(LabeledDataset& ds, int num_classes, std::uint64_t seed);

// Reads whitespace separated CoNLL-style columns: one token per line, blank
// line between sentences, '#' lines skipped. Words are embedded by hashing
// the surface form into a Gaussian direction, rescaled into the (0.5, 1.0)
// shell. Shorter sentences are zero padded to the longest one and recorded in
// lengths. When lines carry a final tag column it is mapped to class ids.
LabeledDataset load_conll_columns(const std::string& path, int d, std::uint64_t seed);

}  // namespace attnlab
