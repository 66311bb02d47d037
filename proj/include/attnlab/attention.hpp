#pragma once

#include <cstdint>
#include <vector>

#include "attnlab/projection.hpp"
#include "attnlab/sequences.hpp"

namespace attnlab {

// Full rank-1 single-head weight set. Key/query side in kq; value/output side
// factored as W_V = u_pp v^T (s x d) and W_O = u_ppp u_pp^T (d x s), sharing
// the same token direction v. Matrices are reconstructed on demand and never
// stored dense.
struct AttentionWeights {
  KQWeights kq;
  Vec u_pp;   // s
  Vec u_ppp;  // d

  Mat W_V() const { return u_pp * kq.v.transpose(); }
  Mat W_O() const { return u_ppp * u_pp.transpose(); }
};

// Dense per-head weights for the generic kernels (used by the hardmax
// experiments, where nothing is rank-1).
struct HeadWeights {
  Mat W_K, W_Q, W_V, W_O;
};

// n x n additive logit mask: entry (i, j) is added to the logit of key i for
// query j; valid values are 0 and -inf.
struct MaskMatrix {
  Mat m;
  static MaskMatrix none(int n);
  static MaskMatrix causal(int n);          // key i attends to query j only when i <= j
  static MaskMatrix prefix(int n, int len); // only the first len keys are visible
};

// Single-head rank-1 softmax self-attention, F(Z) = Z + W_O W_V Z sm(...).
// Key-side accumulation is sorted by the key projection so that permuting the
// columns of Z permutes the output columns bitwise; downstream constructions
// rely on that exact invariance.
Mat self_attention_softmax(const Mat& Z, const AttentionWeights& w);
Mat self_attention_softmax_masked(const Mat& Z, const AttentionWeights& w, const MaskMatrix& mask);

// Generic multi-head kernels. Hardmax puts all weight on the maximal logit,
// splitting uniformly across exact ties.
Mat self_attention_softmax_general(const Mat& Z, const std::vector<HeadWeights>& heads);
Mat self_attention_hardmax(const Mat& Z, const std::vector<HeadWeights>& heads);

enum class CMMode {
  closed_form,  // scale from the closed-form construction
  scaled,       // scale = beta (auto-tuned when beta <= 0)
};

struct CMReport {
  double r_bound = 0.0;            // r_max + eps / 4
  double delta_theory_log = 0.0;   // log of the closed-form distinct-context gap target
  double max_out_norm = 0.0;
  double min_distinct_gap = 0.0;   // min over pairs differing in token set or token
  double max_abs_logit = 0.0;
  double max_displacement_ratio = 0.0;  // max_k |F(X)_k - X_k| / max_k' |X_k'|
  bool passes_cond1 = false;       // all outputs inside the r_bound ball
  bool passes_cond2 = false;       // log(min_distinct_gap) > delta_theory_log
  std::int64_t pairs_checked = 0;
};

struct ContextualMap {
  AttentionWeights w;
  ProjectionCertificate cert;
  double beta_used = 0.0;  // |u . u_prime| actually installed
};

// Builds the rank-1 contextual map for a separated, per-sequence
// duplicate-free dataset. closed_form installs the closed-form scale; scaled
// installs beta (or, for beta <= 0, tunes it so the largest |logit| is ~12,
// keeping distinct-context gaps representable in doubles).
ContextualMap build_contextual_map(const LabeledDataset& ds, const SeparationParams& p,
                                   CMMode mode, double beta, int s, std::uint64_t seed);

// Same construction for an explicit token inventory (vocabulary known ahead
// of the sequences, e.g. a quantization grid). skip_separation_check admits
// inventories that sit exactly on the shell boundaries.
ContextualMap build_contextual_map_for_tokens(const std::vector<Vec>& tokens,
                                              const SeparationParams& p, int n, CMMode mode,
                                              double beta, int s, std::uint64_t seed,
                                              bool skip_separation_check);

// Measures both contextual-mapping conditions over every token of every
// sequence: outputs stay in the r_bound ball, and any two positions that
// differ in token or in surrounding token set map more than the gap target
// apart (compared in log space; the closed-form target underflows doubles).
CMReport verify_contextual_map(const AttentionWeights& w, const LabeledDataset& ds,
                               const SeparationParams& p);

// log of the closed-form distinct-context gap
//   2 (log n)^2 eps^2 r_min / (r_max^2 (|V|+1)^4 (2 log n + 3) pi d)
//     * exp(-(|V|+1)^4 (2 log n + 3) pi d r_max^2 / (4 eps r_min)).
double contextual_gap_log(int vocab_count, int n, int d, const SeparationParams& p);

// Largest |key-query logit| the scale would produce over a token inventory.
double max_abs_logit_for_scale(const std::vector<Vec>& tokens, const Vec& v, double scale);

// Two length-3 sequences over the collinear vocabulary {a1 v, .., a4 v},
// a = (1, 2, 3, 4), that differ only in their middle token. Hardmax attention
// of any head count maps the shared final token to bitwise identical outputs
// (the argmax always lands on a shared token), while softmax attention with
// the rank-1 construction separates them.
struct HardmaxDemoReport {
  std::vector<int> head_counts;
  std::vector<double> collision_rates;  // fraction of trials with bitwise equal outputs
  double softmax_distinct_rate = 0.0;   // fraction of trials where softmax separates
  int trials = 0;
};
HardmaxDemoReport hardmax_collision_demo(int d, std::uint64_t seed, int trials);

}  // namespace attnlab
