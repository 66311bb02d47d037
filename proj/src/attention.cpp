#include "attnlab/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "attnlab/errors.hpp"
#include "attnlab/rng.hpp"

namespace attnlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Auto-tuned scales aim the largest |logit| here: softmax stays far from
// one-hot saturation, so distinct-context output gaps survive in doubles.
constexpr double kTargetMaxAbsLogit = 12.0;

// Attention mix for one query: keys carry projections alpha_i, the query
// carries alpha_q, logits are scale * alpha_i * alpha_q. Accumulation runs
// over keys sorted by alpha so that column permutations of Z change nothing
// bitwise. Returns sum_i softmax(logits)_i * alpha_i.
double mixed_key_projection(std::vector<double>& alphas_sorted, double scale, double alpha_q) {
  std::sort(alphas_sorted.begin(), alphas_sorted.end());
  const double factor = scale * alpha_q;
  double max_logit = -kInf;
  for (double a : alphas_sorted) max_logit = std::max(max_logit, factor * a);
  double z = 0.0, s = 0.0;
  for (double a : alphas_sorted) {
    const double w = std::exp(factor * a - max_logit);
    z += w;
    s += w * a;
  }
  return s / z;
}

}  // namespace

MaskMatrix MaskMatrix::none(int n) {
  MaskMatrix mm;
  mm.m = Mat::Zero(n, n);
  return mm;
}

MaskMatrix MaskMatrix::causal(int n) {
  MaskMatrix mm;
  mm.m = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = j + 1; i < n; ++i) mm.m(i, j) = -kInf;
  }
  return mm;
}

MaskMatrix MaskMatrix::prefix(int n, int len) {
  MaskMatrix mm;
  mm.m = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = len; i < n; ++i) mm.m(i, j) = -kInf;
  }
  return mm;
}

Mat self_attention_softmax(const Mat& Z, const AttentionWeights& w) {
  const int n = static_cast<int>(Z.cols());
  if (n == 0) throw std::invalid_argument("self_attention_softmax: empty sequence");
  const double gain = w.u_pp.squaredNorm();
  Vec alpha = Z.transpose() * w.kq.v;
  Mat out = Z;
  std::vector<double> keys(alpha.data(), alpha.data() + n);
  for (int j = 0; j < n; ++j) {
    std::vector<double> sorted = keys;
    const double mix = mixed_key_projection(sorted, w.kq.scale, alpha[j]);
    out.col(j) += (gain * mix) * w.u_ppp;
  }
  return out;
}

Mat self_attention_softmax_masked(const Mat& Z, const AttentionWeights& w,
                                  const MaskMatrix& mask) {
  const int n = static_cast<int>(Z.cols());
  if (mask.m.rows() != n || mask.m.cols() != n) {
    throw std::invalid_argument("self_attention_softmax_masked: mask shape mismatch");
  }
  const double gain = w.u_pp.squaredNorm();
  Vec alpha = Z.transpose() * w.kq.v;
  Mat out = Z;
  for (int j = 0; j < n; ++j) {
    std::vector<double> kept;
    kept.reserve(n);
    for (int i = 0; i < n; ++i) {
      if (mask.m(i, j) == 0.0) kept.push_back(alpha[i]);
    }
    if (kept.empty()) {
      throw std::invalid_argument("self_attention_softmax_masked: query with no visible keys");
    }
    const double mix = mixed_key_projection(kept, w.kq.scale, alpha[j]);
    out.col(j) += (gain * mix) * w.u_ppp;
  }
  return out;
}

Mat self_attention_softmax_general(const Mat& Z, const std::vector<HeadWeights>& heads) {
  const int n = static_cast<int>(Z.cols());
  Mat out = Z;
  for (const auto& h : heads) {
    const Mat K = h.W_K * Z;
    const Mat Q = h.W_Q * Z;
    const Mat V = h.W_V * Z;
    Mat L = K.transpose() * Q;  // (i, j): key i against query j
    Mat P(n, n);
    for (int j = 0; j < n; ++j) {
      Vec col = L.col(j);
      const double m = col.maxCoeff();
      double z = 0.0;
      for (int i = 0; i < n; ++i) {
        col[i] = std::exp(col[i] - m);
        z += col[i];
      }
      P.col(j) = col / z;
    }
    out += h.W_O * (V * P);
  }
  return out;
}

Mat self_attention_hardmax(const Mat& Z, const std::vector<HeadWeights>& heads) {
  const int n = static_cast<int>(Z.cols());
  Mat out = Z;
  for (const auto& h : heads) {
    const Mat K = h.W_K * Z;
    const Mat Q = h.W_Q * Z;
    const Mat V = h.W_V * Z;
    Mat L = K.transpose() * Q;
    Mat P = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j) {
      const double m = L.col(j).maxCoeff();
      int ties = 0;
      for (int i = 0; i < n; ++i) {
        if (L(i, j) == m) ++ties;  // exact ties split uniformly
      }
      for (int i = 0; i < n; ++i) {
        if (L(i, j) == m) P(i, j) = 1.0 / ties;
      }
    }
    out += h.W_O * (V * P);
  }
  return out;
}

double contextual_gap_log(int vocab_count, int n, int d, const SeparationParams& p) {
  if (n < 2) throw std::invalid_argument("contextual_gap_log: need n >= 2");
  const double V1 = static_cast<double>(vocab_count) + 1.0;
  const double logn = std::log(static_cast<double>(n));
  const double dint = 2.0 * logn + 3.0;
  const double log_prefactor = std::log(2.0) + 2.0 * std::log(logn) + 2.0 * std::log(p.eps) +
                               std::log(p.r_min) - 2.0 * std::log(p.r_max) -
                               4.0 * std::log(V1) - std::log(dint) - std::log(M_PI) -
                               std::log(static_cast<double>(d));
  const double exponent =
      -V1 * V1 * V1 * V1 * dint * M_PI * static_cast<double>(d) * p.r_max * p.r_max /
      (4.0 * p.eps * p.r_min);
  return log_prefactor + exponent;
}

double max_abs_logit_for_scale(const std::vector<Vec>& tokens, const Vec& v, double scale) {
  double max_abs = 0.0;
  for (const auto& x : tokens) max_abs = std::max(max_abs, std::abs(v.dot(x)));
  return std::abs(scale) * max_abs * max_abs;
}

ContextualMap build_contextual_map_for_tokens(const std::vector<Vec>& tokens,
                                              const SeparationParams& p, int n, CMMode mode,
                                              double beta, int s, std::uint64_t seed,
                                              bool skip_separation_check) {
  if (tokens.empty()) throw std::invalid_argument("build_contextual_map: no tokens");
  if (s < 1) throw std::invalid_argument("build_contextual_map: head width s must be >= 1");
  const int d = static_cast<int>(tokens[0].size());

  if (!skip_separation_check) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const double norm = tokens[i].norm();
      if (!(norm > p.r_min && norm < p.r_max)) {
        throw InfeasibleError("build_contextual_map: token norm outside the (r_min, r_max) shell");
      }
      for (std::size_t j = i + 1; j < tokens.size(); ++j) {
        if (!((tokens[i] - tokens[j]).norm() > p.eps)) {
          throw InfeasibleError("build_contextual_map: token pair closer than eps");
        }
      }
    }
  }

  ProjectionCertificate cert = find_distance_preserving_direction(tokens, 10000, seed);
  const double logn = std::log(static_cast<double>(std::max(n, 2)));
  const double delta_internal = 2.0 * logn + 3.0;

  double scale = 0.0;
  if (mode == CMMode::closed_form) {
    const double V1 = static_cast<double>(tokens.size()) + 1.0;
    scale = V1 * V1 * V1 * V1 * (M_PI * d / 8.0) * delta_internal / (p.eps * p.r_min);
    // Certify the pairwise logit-gap property the scale buys.
    const std::size_t V = tokens.size();
    if (static_cast<double>(V) * V * V <= 1e8) {
      std::vector<double> proj(V);
      for (std::size_t i = 0; i < V; ++i) proj[i] = cert.v.dot(tokens[i]);
      for (std::size_t a = 0; a < V; ++a) {
        for (std::size_t b = a + 1; b < V; ++b) {
          for (std::size_t c = 0; c < V; ++c) {
            if (!(std::abs(scale * (proj[a] - proj[b]) * proj[c]) > delta_internal)) {
              throw InfeasibleError("build_contextual_map: logit gap certification failed");
            }
          }
        }
      }
    }
  } else {
    if (beta > 0.0) {
      scale = beta;
    } else {
      const double worst = max_abs_logit_for_scale(tokens, cert.v, 1.0);
      if (!(worst > 0.0)) throw InfeasibleError("build_contextual_map: degenerate projections");
      scale = kTargetMaxAbsLogit / worst;
    }
  }

  ContextualMap cm;
  cm.cert = cert;
  cm.beta_used = scale;
  cm.w.kq.v = cert.v;
  cm.w.kq.s = s;
  cm.w.kq.scale = scale;
  cm.w.kq.u = Vec::Zero(s);
  cm.w.kq.u_prime = Vec::Zero(s);
  cm.w.kq.u[0] = std::sqrt(scale);
  cm.w.kq.u_prime[0] = std::sqrt(scale);
  cm.w.u_pp = Vec::Zero(s);
  cm.w.u_pp[0] = 1.0;
  cm.w.u_ppp = Vec::Zero(d);
  cm.w.u_ppp[0] = p.eps / (4.0 * p.r_max);
  return cm;
}

ContextualMap build_contextual_map(const LabeledDataset& ds, const SeparationParams& p,
                                   CMMode mode, double beta, int s, std::uint64_t seed) {
  if (ds.size() == 0) throw std::invalid_argument("build_contextual_map: empty dataset");
  const SeparationReport sep = check_separated(ds, p);
  if (!sep.passes) {
    throw InfeasibleError("build_contextual_map: dataset is not (r_min, r_max, eps)-separated (" +
                          sep.violations.front().kind + ")");
  }
  Vocabulary vocab = extract_vocab(ds);
  for (int i = 0; i < ds.size(); ++i) {
    std::set<int> distinct(vocab.sequence_ids[i].begin(), vocab.sequence_ids[i].end());
    if (static_cast<int>(distinct.size()) != ds.length(i)) {
      throw InfeasibleError(
          "build_contextual_map: sequence " + std::to_string(i) +
          " repeats a token; repeated tokens need a positional encoding first");
    }
  }
  return build_contextual_map_for_tokens(vocab.tokens, p, ds.n, mode, beta, s, seed, true);
}

CMReport verify_contextual_map(const AttentionWeights& w, const LabeledDataset& ds,
                               const SeparationParams& p) {
  CMReport rep;
  rep.r_bound = p.r_max + p.eps / 4.0;

  Vocabulary vocab = extract_vocab(ds);
  rep.delta_theory_log = contextual_gap_log(vocab.count(), std::max(ds.n, 2), ds.d, p);

  std::vector<Mat> outs(ds.size());
  rep.max_out_norm = 0.0;
  rep.max_abs_logit = 0.0;
  rep.max_displacement_ratio = 0.0;
  for (int i = 0; i < ds.size(); ++i) {
    const int len = ds.length(i);
    const Mat Z = ds.sequences[i].leftCols(len);
    outs[i] = self_attention_softmax(Z, w);
    double max_col_norm = 0.0;
    for (int k = 0; k < len; ++k) max_col_norm = std::max(max_col_norm, Z.col(k).norm());
    for (int k = 0; k < len; ++k) {
      rep.max_out_norm = std::max(rep.max_out_norm, outs[i].col(k).norm());
      const double disp = (outs[i].col(k) - Z.col(k)).norm();
      if (max_col_norm > 0.0) {
        rep.max_displacement_ratio = std::max(rep.max_displacement_ratio, disp / max_col_norm);
      }
      const double alpha_k = std::abs(w.kq.v.dot(Z.col(k)));
      for (int l = 0; l < len; ++l) {
        const double alpha_l = std::abs(w.kq.v.dot(Z.col(l)));
        rep.max_abs_logit = std::max(rep.max_abs_logit, std::abs(w.kq.scale) * alpha_k * alpha_l);
      }
    }
  }

  // Sorted token-id sets decide whether two positions share a context.
  std::vector<std::vector<int>> token_sets(ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    token_sets[i] = vocab.sequence_ids[i];
    std::sort(token_sets[i].begin(), token_sets[i].end());
    token_sets[i].erase(std::unique(token_sets[i].begin(), token_sets[i].end()),
                        token_sets[i].end());
  }

  std::int64_t total_tokens = 0;
  for (int i = 0; i < ds.size(); ++i) total_tokens += ds.length(i);
  if (total_tokens * total_tokens > 200000000) {
    throw BudgetExhaustedError("verify_contextual_map: too many token pairs");
  }

  double min_gap = kInf;
  std::int64_t pairs = 0;
  for (int i = 0; i < ds.size(); ++i) {
    for (int k = 0; k < ds.length(i); ++k) {
      for (int j = i; j < ds.size(); ++j) {
        const int l0 = (j == i) ? k + 1 : 0;
        for (int l = l0; l < ds.length(j); ++l) {
          const bool same_set = token_sets[i] == token_sets[j];
          const bool same_token = vocab.sequence_ids[i][k] == vocab.sequence_ids[j][l];
          if (same_set && same_token) continue;
          ++pairs;
          const double gap = (outs[i].col(k) - outs[j].col(l)).norm();
          min_gap = std::min(min_gap, gap);
        }
      }
    }
  }
  rep.pairs_checked = pairs;
  rep.min_distinct_gap = min_gap;
  rep.passes_cond1 = rep.max_out_norm < rep.r_bound;
  rep.passes_cond2 =
      (pairs == 0) || (min_gap > 0.0 && std::log(min_gap) > rep.delta_theory_log);
  return rep;
}

HardmaxDemoReport hardmax_collision_demo(int d, std::uint64_t seed, int trials) {
  if (d < 1 || trials < 1) throw std::invalid_argument("hardmax_collision_demo: bad arguments");
  HardmaxDemoReport rep;
  rep.trials = trials;
  rep.head_counts = {1, 2, 4};

  Rng rng(seed);
  const double alphas[4] = {1.0, 2.0, 3.0, 4.0};
  int softmax_distinct = 0;
  int softmax_total = 0;

  for (int h_count : rep.head_counts) {
    int collisions = 0;
    for (int t = 0; t < trials; ++t) {
      const Vec v = rng.unit_vector(d);
      Mat A(d, 3), B(d, 3);
      A.col(0) = alphas[0] * v;
      A.col(1) = alphas[1] * v;
      A.col(2) = alphas[3] * v;
      B.col(0) = alphas[0] * v;
      B.col(1) = alphas[2] * v;
      B.col(2) = alphas[3] * v;

      std::vector<HeadWeights> heads(h_count);
      const double s = 1.0 / std::sqrt(static_cast<double>(d));
      for (auto& hw : heads) {
        hw.W_K = Mat::NullaryExpr(d, d, [&](Eigen::Index, Eigen::Index) { return s * rng.normal(); });
        hw.W_Q = Mat::NullaryExpr(d, d, [&](Eigen::Index, Eigen::Index) { return s * rng.normal(); });
        hw.W_V = Mat::NullaryExpr(d, d, [&](Eigen::Index, Eigen::Index) { return s * rng.normal(); });
        hw.W_O = Mat::NullaryExpr(d, d, [&](Eigen::Index, Eigen::Index) { return s * rng.normal(); });
      }

      const Mat hard_a = self_attention_hardmax(A, heads);
      const Mat hard_b = self_attention_hardmax(B, heads);
      // The two sequences differ only in the middle token, so any separation
      // must show up at the shared final position.
      const bool identical = std::memcmp(hard_a.col(2).data(), hard_b.col(2).data(),
                                         static_cast<std::size_t>(d) * sizeof(double)) == 0;
      if (identical) ++collisions;

      const Mat soft_a = self_attention_softmax_general(A, heads);
      const Mat soft_b = self_attention_softmax_general(B, heads);
      ++softmax_total;
      if (std::memcmp(soft_a.col(2).data(), soft_b.col(2).data(),
                      static_cast<std::size_t>(d) * sizeof(double)) != 0) {
        ++softmax_distinct;
      }
    }
    rep.collision_rates.push_back(static_cast<double>(collisions) / trials);
  }
  rep.softmax_distinct_rate = static_cast<double>(softmax_distinct) / softmax_total;
  return rep;
}

}  // namespace attnlab
