#include "attnlab/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <stdexcept>

#include "attnlab/errors.hpp"
#include "attnlab/rng.hpp"

namespace attnlab {

namespace {

std::string vec_bytes(const Vec& v) {
  return std::string(reinterpret_cast<const char*>(v.data()),
                     static_cast<std::size_t>(v.size()) * sizeof(double));
}

std::vector<Vec> grid_columns(int D, int d) {
  const double cells = std::pow(static_cast<double>(D), d);
  if (cells > 1e6) throw InfeasibleError("grid_columns: D^d too large");
  const int total = static_cast<int>(cells);
  std::vector<Vec> cols;
  cols.reserve(total);
  Vec col(d);
  std::vector<int> idx(d, 0);
  for (int c = 0; c < total; ++c) {
    for (int t = 0; t < d; ++t) col[t] = static_cast<double>(idx[t] + 1) / D;
    cols.push_back(col);
    for (int t = d - 1; t >= 0; --t) {
      if (++idx[t] < D) break;
      idx[t] = 0;
    }
  }
  return cols;
}

SeparationParams grid_params(int D, int d, const SeparationParams& p) {
  SeparationParams g;
  g.r_min = p.r_min > 0 ? p.r_min : 1.0 / D;
  g.r_max = p.r_max > 0 ? p.r_max : std::sqrt(static_cast<double>(d));
  g.eps = p.eps > 0 ? p.eps : 1.0 / D;
  return g;
}

ContextualMap grid_attention(int D, int d, int n, const SeparationParams& p,
                             std::uint64_t seed) {
  // Grid columns sit exactly on the shell boundaries, so the separation check
  // is skipped and the stated parameters are taken as given.
  return build_contextual_map_for_tokens(grid_columns(D, d), grid_params(D, d, p), n,
                                         CMMode::scaled, 0.0, 1, seed, true);
}

FFNet readout_for_keys(const GridFunction& gf, const FFNet& quant, const AttentionWeights& attn,
                       double R, std::uint64_t seed, double* max_key_error) {
  std::vector<Vec> centers;
  std::vector<double> targets;
  std::map<std::string, double> seen;
  for (std::size_t i = 0; i < gf.keys.size(); ++i) {
    // Keys go through the very arithmetic the pipeline applies at run time,
    // so lookups at grid points are bitwise matches.
    const Mat mapped = self_attention_softmax(ff_forward(quant, gf.keys[i]), attn);
    for (int k = 0; k < mapped.cols(); ++k) {
      const Vec center = mapped.col(k);
      auto [it, fresh] = seen.emplace(vec_bytes(center), gf.values[i]);
      if (fresh) {
        centers.push_back(center);
        targets.push_back(gf.values[i]);
      } else if (it->second != gf.values[i]) {
        throw InconsistentLabelsError(
            "bump readout: one attention key assigned two targets (target function is not "
            "permutation invariant)");
      }
    }
  }
  FFNet readout = build_bump_readout_at(centers, targets, R, 1.0 / (4.0 * gf.D), seed);
  double worst = 0.0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double got = ff_forward_col(readout, centers[c])[0];
    worst = std::max(worst, std::abs(got - targets[c]));
  }
  if (max_key_error) *max_key_error = worst;
  if (!(worst < 2.0 / R)) {
    throw InfeasibleError("bump readout: stored key reproduced outside the 2/R tolerance");
  }
  return readout;
}

}  // namespace

FFNet build_quantizer(const QuantizerSpec& spec, int d, int n, bool include_penalty) {
  if (spec.D < 1 || d < 1 || n < 1) throw std::invalid_argument("build_quantizer: bad arguments");
  const int D = spec.D;
  const double inv = 1.0 / spec.delta();  // 10 D by default, exactly representable
  const int steps = 2 * D;
  const int per_coord = steps + (include_penalty ? 4 : 0);
  const int q = d * per_coord;

  FFNet ff;
  ff.W1 = Mat::Zero(q, d);
  ff.b1 = Vec::Zero(q);
  ff.W2 = Mat::Zero(d, q);
  ff.b2 = include_penalty ? Vec::Constant(d, -2.0 * d) : Vec::Zero(d);
  ff.uses_skip = false;

  for (int t = 0; t < d; ++t) {
    int u = t * per_coord;
    for (int j = 0; j < D; ++j) {
      // step j: relu(z/delta - j/(delta D)) - relu(z/delta - j/(delta D) - 1),
      // weighted 1/D into coordinate t only
      ff.W1(u, t) = inv;
      ff.b1[u] = -static_cast<double>(j) * inv / D;
      ff.W2(t, u) = 1.0 / D;
      ++u;
      ff.W1(u, t) = inv;
      ff.b1[u] = -static_cast<double>(j) * inv / D - 1.0;
      ff.W2(t, u) = -1.0 / D;
      ++u;
    }
    if (include_penalty) {
      // out-of-range penalty, added to every coordinate of the column:
      // relu(z/delta + 1) - relu(z/delta) + relu((1-z)/delta + 1) - relu((1-z)/delta) - 2
      ff.W1(u, t) = inv;
      ff.b1[u] = 1.0;
      ff.W2.col(u).setConstant(1.0);
      ++u;
      ff.W1(u, t) = inv;
      ff.b1[u] = 0.0;
      ff.W2.col(u).setConstant(-1.0);
      ++u;
      ff.W1(u, t) = -inv;
      ff.b1[u] = inv + 1.0;
      ff.W2.col(u).setConstant(1.0);
      ++u;
      ff.W1(u, t) = -inv;
      ff.b1[u] = inv;
      ff.W2.col(u).setConstant(-1.0);
      ++u;
    }
  }
  return ff;
}

std::vector<Mat> enumerate_subgrid(int D, int d, int n) {
  const double full = std::pow(static_cast<double>(D), static_cast<double>(d) * n);
  if (full > 1e7) {
    throw InfeasibleError("enumerate_subgrid: full grid exceeds the 1e7 budget");
  }
  const std::vector<Vec> cols = grid_columns(D, d);
  const int G = static_cast<int>(cols.size());
  if (G < n) return {};

  std::vector<Mat> out;
  std::vector<int> pick(n, -1);
  std::vector<bool> used(G, false);

  // ordered n-tuples of distinct columns, lexicographic
  int depth = 0;
  int next = 0;
  while (depth >= 0) {
    if (depth == n) {
      Mat L(d, n);
      for (int k = 0; k < n; ++k) L.col(k) = cols[pick[k]];
      out.push_back(std::move(L));
      --depth;
      if (depth >= 0) {
        used[pick[depth]] = false;
        next = pick[depth] + 1;
      }
      continue;
    }
    while (next < G && used[next]) ++next;
    if (next >= G) {
      --depth;
      if (depth >= 0) {
        used[pick[depth]] = false;
        next = pick[depth] + 1;
      }
      continue;
    }
    pick[depth] = next;
    used[next] = true;
    ++depth;
    next = 0;
  }
  return out;
}

GridFunction tabulate_on_subgrid(const std::function<double(const Mat&)>& f, int D, int d, int n) {
  GridFunction gf;
  gf.D = D;
  gf.d = d;
  gf.n = n;
  gf.keys = enumerate_subgrid(D, d, n);
  gf.values.reserve(gf.keys.size());
  for (const auto& L : gf.keys) gf.values.push_back(f(L));
  return gf;
}

FFNet build_bump_readout_at(const std::vector<Vec>& centers, const std::vector<double>& targets,
                            double R, double zero_below, std::uint64_t seed) {
  if (centers.empty() || centers.size() != targets.size()) {
    throw std::invalid_argument("build_bump_readout_at: need matching non-empty inputs");
  }
  if (!(R > 0)) throw std::invalid_argument("build_bump_readout_at: R must be positive");
  const int d = static_cast<int>(centers[0].size());

  std::vector<Vec> ucenters;
  std::vector<double> utargets;
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    auto [it, fresh] = seen.emplace(vec_bytes(centers[i]), static_cast<int>(ucenters.size()));
    if (fresh) {
      ucenters.push_back(centers[i]);
      utargets.push_back(targets[i]);
    } else if (utargets[it->second] != targets[i]) {
      throw InconsistentLabelsError("build_bump_readout_at: equal centers, different targets");
    }
  }

  ProjectionCertificate cert =
      find_distance_preserving_direction(ucenters, 10000, seed, /*require_nonneg=*/true);
  const int K = static_cast<int>(ucenters.size());
  std::vector<int> order(K);
  for (int i = 0; i < K; ++i) order[i] = i;
  std::vector<double> proj(K);
  for (int i = 0; i < K; ++i) proj[i] = cert.v.dot(ucenters[i]);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return proj[a] < proj[b]; });

  std::vector<double> x(K), y(K), w(K);
  for (int i = 0; i < K; ++i) {
    x[i] = proj[order[i]];
    y[i] = utargets[order[i]];
  }
  for (int i = 0; i < K; ++i) {
    double half_gap = std::numeric_limits<double>::infinity();
    if (i > 0) half_gap = std::min(half_gap, 0.5 * (x[i] - x[i - 1]));
    if (i + 1 < K) half_gap = std::min(half_gap, 0.5 * (x[i + 1] - x[i]));
    w[i] = std::min(1.0 / R, half_gap);
    if (!(w[i] > 0)) {
      throw InfeasibleError("build_bump_readout_at: two centers project to the same point");
    }
  }

  // Everything below zero_below in every coordinate must map to exactly 0, so
  // the leftmost tent may not reach into v . x < zero_below * |v|_1.
  const double zero_edge = zero_below * cert.v.lpNorm<1>();
  if (zero_below > 0 && K > 0) {
    if (!(x[0] - w[0] >= zero_edge)) {
      const double shrunk = x[0] - zero_edge;
      if (!(shrunk > 0)) {
        throw InfeasibleError("build_bump_readout_at: a center sits inside the zero region");
      }
      w[0] = std::min(w[0], shrunk);
    }
  }

  FFNet ff;
  ff.W1 = Mat(3 * K, d);
  ff.b1 = Vec(3 * K);
  ff.W2 = Mat::Zero(d, 3 * K);
  ff.b2 = Vec::Zero(d);
  ff.uses_skip = false;
  for (int i = 0; i < K; ++i) {
    const double coeff = y[i] / w[i];
    for (int part = 0; part < 3; ++part) {
      const int u = 3 * i + part;
      ff.W1.row(u) = cert.v.transpose();
      ff.b1[u] = -(x[i] + (part - 1) * w[i]);
      ff.W2.col(u).setConstant(part == 1 ? -2.0 * coeff : coeff);
    }
  }
  return ff;
}

FFNet build_bump_readout(const GridFunction& gf, double R) {
  FFNet quant = build_quantizer(QuantizerSpec{gf.D, 0.0}, gf.d, gf.n);
  ContextualMap cm = grid_attention(gf.D, gf.d, gf.n, SeparationParams{0, 0, 0}, 1);
  return readout_for_keys(gf, quant, cm.w, R, 1, nullptr);
}

ApproxPipeline build_two_layer_approximator(const std::function<double(const Mat&)>& target,
                                            int D, double R, const SeparationParams& p,
                                            int d, int n, std::uint64_t seed) {
  ApproxPipeline ap;
  ap.D = D;
  ap.R = R;
  ap.quant = build_quantizer(QuantizerSpec{D, 0.0}, d, n);
  ContextualMap cm = grid_attention(D, d, n, p, seed);
  ap.attn = cm.w;
  ap.beta_used = cm.beta_used;
  const GridFunction gf = tabulate_on_subgrid(target, D, d, n);
  ap.readout = readout_for_keys(gf, ap.quant, ap.attn, R, seed ^ 0xb0b0ull, &ap.max_key_error);
  return ap;
}

Mat approx_eval(const ApproxPipeline& ap, const Mat& Z) {
  return ff_forward(ap.readout, self_attention_softmax(ff_forward(ap.quant, Z), ap.attn));
}

ApproxReport estimate_dist_p(const std::function<Mat(const Mat&)>& f,
                             const std::function<Mat(const Mat&)>& g, double p, int d, int n,
                             int samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("estimate_dist_p: need at least 2 samples");
  if (!(p >= 1)) throw std::invalid_argument("estimate_dist_p: need p >= 1");
  Rng rng(seed);
  double mean = 0.0, m2 = 0.0;
  for (int s = 0; s < samples; ++s) {
    Mat Z(d, n);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < d; ++r) Z(r, c) = rng.uniform01();
    }
    const Mat diff = f(Z) - g(Z);
    double integrand = 0.0;
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < d; ++r) integrand += std::pow(std::abs(diff(r, c)), p);
    }
    const double delta = integrand - mean;
    mean += delta / (s + 1);
    m2 += delta * (integrand - mean);
  }
  ApproxReport rep;
  rep.mc_samples = samples;
  rep.dist_estimate = std::pow(mean, 1.0 / p);
  rep.standard_error = std::sqrt(m2 / (static_cast<double>(samples) - 1.0) / samples);
  return rep;
}

}  // namespace attnlab
