#pragma once

#include <cstdint>
#include <vector>

#include "attnlab/attention.hpp"
#include "attnlab/sequences.hpp"

namespace attnlab {

// Two-layer feed-forward block applied column-wise:
//   out = [H +] W2 relu(W1 H + b1 1^T) + b2 1^T, skip term iff uses_skip.
struct FFNet {
  Mat W1;  // q x d
  Vec b1;  // q
  Mat W2;  // d_out x q
  Vec b2;  // d_out
  bool uses_skip = false;
};

Mat ff_forward(const FFNet& ff, const Mat& H);
Vec ff_forward_col(const FFNet& ff, const Vec& h);

// Exact interpolator: all keys project onto one certified direction, one ramp
// unit opens between consecutive projected keys, and a triangular solve pins
// the value at every key. Output is 0 below the first threshold. Keys must be
// bitwise equal (with equal targets) or more than gap apart.
FFNet build_ff_memorizer(const std::vector<Vec>& keys, const std::vector<Vec>& targets,
                         double gap, std::uint64_t seed);

// Column k (1-based) is shifted by 2 k r_max in every coordinate, pushing
// repeated tokens at different positions onto distinct, widely spaced rays.
Mat build_positional_encoding(int n, int d, double r_max);

struct TransformerModel {
  AttentionWeights attn;
  FFNet ff;  // uses_skip = true
  bool has_pos_enc = false;
  double pos_r_max = 0.0;  // E is reconstructed from (n, d, pos_r_max)
  int param_count = 0;     // factored storage: shared directions + thresholds + readout
};

// Contextual map + ramp memorizer mapping every (sequence, position) to the
// encoding of its label. Datasets with repeated tokens inside a sequence
// require use_pos_enc; the effective shell/spacing parameters are then
// measured from the shifted data rather than taken from p.
TransformerModel build_one_layer_memorizer(const LabeledDataset& ds, const SeparationParams& p,
                                           CMMode mode, double beta, bool use_pos_enc,
                                           std::uint64_t seed);

struct MemorizationReport {
  double exact_match_rate = 0.0;
  int total_tokens = 0;
  int matched_tokens = 0;
  int param_count = 0;
  std::int64_t param_bound = 0;  // 4 (s + d) + d (2 n N + d)
  double max_residual = 0.0;     // worst |first coordinate - label| before rounding
};

// Labels ride on the first coordinate: class c encodes to c * e1 and decodes
// by rounding coordinate one, so any residual below 0.5 still matches.
Vec encode_label(int label, int d);
int decode_label(const Vec& out, int num_classes);

Mat memorizer_forward(const TransformerModel& m, const Mat& Z);
MemorizationReport eval_memorization(const TransformerModel& m, const LabeledDataset& ds);

std::int64_t memorization_param_bound(int s, int d, int n, int N);

}  // namespace attnlab
