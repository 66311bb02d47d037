#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "attnlab/attention.hpp"
#include "attnlab/memorizer.hpp"
#include "attnlab/sequences.hpp"

namespace attnlab {

// Piecewise-constant quantizer resolution: D cells per coordinate on [0, 1],
// each step rising over a ramp of width step_delta (default 1 / (10 D)).
struct QuantizerSpec {
  int D = 4;
  double step_delta = 0.0;

  double delta() const { return step_delta > 0 ? step_delta : 1.0 / (10.0 * D); }
};

// Column-wise net mapping each coordinate to its cell's right endpoint in
// {1/D, ..., 1}. Off [0, 1]^d (by more than the ramp width) a penalty of -1
// per out-of-range side is added to every coordinate of the column, pushing
// some entry of the column at or below 0. Inputs already on the grid are
// reproduced bitwise when D is a power of two. include_penalty = false gives
// the bare step stack.
FFNet build_quantizer(const QuantizerSpec& spec, int d, int n, bool include_penalty = true);

// All d x n matrices with distinct columns drawn from the grid {1/D, .., 1}^d,
// in lexicographic order. Refuses (InfeasibleError) when the full grid D^(d n)
// exceeds 1e7 matrices.
std::vector<Mat> enumerate_subgrid(int D, int d, int n);

struct GridFunction {
  int D = 0, d = 0, n = 0;
  std::vector<Mat> keys;
  std::vector<double> values;
};

GridFunction tabulate_on_subgrid(const std::function<double(const Mat&)>& f, int D, int d, int n);

// Sum of one-column bump units: each stored center contributes a tent on a
// certified nonnegative projection direction, with width min(1/R, half the
// gap to the nearest other center) so neighboring tents never overlap a
// center. Exact (within 2/R) at every center, identically zero when every
// input coordinate is below 1/(4D), bounded by the largest |target|.
FFNet build_bump_readout(const GridFunction& gf, double R);
FFNet build_bump_readout_at(const std::vector<Vec>& centers, const std::vector<double>& targets,
                            double R, double zero_below, std::uint64_t seed);

struct ApproxPipeline {
  FFNet quant;
  AttentionWeights attn;
  FFNet readout;
  int D = 0;
  double R = 0.0;
  double beta_used = 0.0;
  double max_key_error = 0.0;  // worst |readout - target| over stored centers
};

// quantize -> contextual attention -> bump readout. Targets are tabulated on
// the duplicate-free sub-grid and keyed by the attention image of each grid
// matrix, computed through the identical arithmetic the pipeline uses, so
// lookups at grid points are bitwise. The target must be invariant under
// column permutations (checked during key assembly).
ApproxPipeline build_two_layer_approximator(const std::function<double(const Mat&)>& target,
                                            int D, double R, const SeparationParams& p,
                                            int d, int n, std::uint64_t seed);

// Full pipeline evaluation; output is d x n with the readout value of each
// column broadcast across its entries.
Mat approx_eval(const ApproxPipeline& ap, const Mat& Z);

struct ApproxReport {
  double dist_estimate = 0.0;   // Monte Carlo estimate of dist_p
  double standard_error = 0.0;  // of the mean of the p-th power integrand
  int mc_samples = 0;
};

// Monte Carlo estimate of (integral over [0,1]^{d x n} of |f - g|_p^p)^{1/p}
// with entrywise matrix p-norms.
ApproxReport estimate_dist_p(const std::function<Mat(const Mat&)>& f,
                             const std::function<Mat(const Mat&)>& g, double p, int d, int n,
                             int samples, std::uint64_t seed);

}  // namespace attnlab
