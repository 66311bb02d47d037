#include "attnlab/memorizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "attnlab/errors.hpp"
#include "attnlab/projection.hpp"

namespace attnlab {

namespace {

std::string vec_bytes(const Vec& v) {
  return std::string(reinterpret_cast<const char*>(v.data()),
                     static_cast<std::size_t>(v.size()) * sizeof(double));
}

}  // namespace

Mat ff_forward(const FFNet& ff, const Mat& H) {
  const int n = static_cast<int>(H.cols());
  Mat out = ff.uses_skip ? H : Mat::Zero(ff.b2.size(), n);
  if (ff.W1.rows() > 0) {
    Mat U = (ff.W1 * H).colwise() + ff.b1;
    out.noalias() += ff.W2 * U.cwiseMax(0.0);
  }
  out.colwise() += ff.b2;
  return out;
}

Vec ff_forward_col(const FFNet& ff, const Vec& h) { return ff_forward(ff, h).col(0); }

FFNet build_ff_memorizer(const std::vector<Vec>& keys, const std::vector<Vec>& targets,
                         double gap, std::uint64_t seed) {
  if (keys.empty() || keys.size() != targets.size()) {
    throw std::invalid_argument("build_ff_memorizer: need matching non-empty keys and targets");
  }
  const int d = static_cast<int>(keys[0].size());
  const int d_out = static_cast<int>(targets[0].size());

  // Bitwise-equal keys collapse to one entry and must agree on the target.
  std::vector<Vec> ukeys;
  std::vector<Vec> utargets;
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto [it, fresh] = index.emplace(vec_bytes(keys[i]), static_cast<int>(ukeys.size()));
    if (fresh) {
      ukeys.push_back(keys[i]);
      utargets.push_back(targets[i]);
    } else if (vec_bytes(utargets[it->second]) != vec_bytes(targets[i])) {
      throw InconsistentLabelsError("build_ff_memorizer: equal keys with different targets");
    }
  }
  for (std::size_t i = 0; i < ukeys.size(); ++i) {
    for (std::size_t j = i + 1; j < ukeys.size(); ++j) {
      if (!((ukeys[i] - ukeys[j]).norm() > gap)) {
        throw InfeasibleError("build_ff_memorizer: distinct keys closer than gap");
      }
    }
  }

  ProjectionCertificate cert = find_distance_preserving_direction(ukeys, 10000, seed);
  const int K = static_cast<int>(ukeys.size());

  std::vector<int> order(K);
  for (int i = 0; i < K; ++i) order[i] = i;
  std::vector<double> proj(K);
  for (int i = 0; i < K; ++i) proj[i] = cert.v.dot(ukeys[i]);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return proj[a] < proj[b]; });

  std::vector<double> x(K);
  for (int i = 0; i < K; ++i) x[i] = proj[order[i]];

  // One ramp opens just below each projected key; a forward substitution pins
  // the exact value at every key in turn.
  std::vector<double> t(K);
  if (K == 1) {
    t[0] = x[0] - 1.0;
  } else {
    t[0] = x[0] - 0.5 * (x[1] - x[0]);
    for (int j = 1; j < K; ++j) t[j] = 0.5 * (x[j - 1] + x[j]);
  }

  Mat W2(d_out, K);
  for (int j = 0; j < K; ++j) {
    Vec partial = Vec::Zero(d_out);
    for (int m = 0; m < j; ++m) partial += W2.col(m) * (x[j] - t[m]);
    W2.col(j) = (utargets[order[j]] - partial) / (x[j] - t[j]);
  }

  FFNet ff;
  ff.W1 = Mat(K, d);
  for (int j = 0; j < K; ++j) ff.W1.row(j) = cert.v.transpose();
  ff.b1 = Vec(K);
  for (int j = 0; j < K; ++j) ff.b1[j] = -t[j];
  ff.W2 = W2;
  ff.b2 = Vec::Zero(d_out);
  ff.uses_skip = false;
  return ff;
}

Mat build_positional_encoding(int n, int d, double r_max) {
  if (n < 1 || d < 1 || !(r_max > 0)) {
    throw std::invalid_argument("build_positional_encoding: bad arguments");
  }
  Mat E(d, n);
  for (int k = 0; k < n; ++k) E.col(k).setConstant(2.0 * (k + 1) * r_max);
  return E;
}

Vec encode_label(int label, int d) {
  Vec y = Vec::Zero(d);
  y[0] = static_cast<double>(label);
  return y;
}

int decode_label(const Vec& out, int num_classes) {
  const long rounded = std::lround(out[0]);
  return static_cast<int>(std::clamp<long>(rounded, 1, num_classes));
}

std::int64_t memorization_param_bound(int s, int d, int n, int N) {
  return 4ll * (s + d) +
         static_cast<std::int64_t>(d) * (2ll * n * N + d);
}

TransformerModel build_one_layer_memorizer(const LabeledDataset& ds, const SeparationParams& p,
                                           CMMode mode, double beta, bool use_pos_enc,
                                           std::uint64_t seed) {
  if (!ds.labeled()) throw std::invalid_argument("build_one_layer_memorizer: dataset is unlabeled");
  const int s = 1;

  LabeledDataset work = ds;
  SeparationParams p_eff = p;
  if (use_pos_enc) {
    const Mat E = build_positional_encoding(ds.n, ds.d, p.r_max);
    for (auto& Z : work.sequences) Z += E.leftCols(Z.cols());
    // After the shift every position rides its own ray, so the shell/spacing
    // parameters come from the data itself rather than from p.
    SeparationReport meas = check_separated(work, SeparationParams{0.0, 1e300, 0.0});
    if (!(meas.min_pair_dist > 0) || !std::isfinite(meas.min_pair_dist)) {
      throw InfeasibleError("build_one_layer_memorizer: shifted data has no usable spacing");
    }
    p_eff.r_min = meas.min_norm * (1.0 - 1e-9);
    p_eff.r_max = meas.max_norm * (1.0 + 1e-9);
    p_eff.eps = meas.min_pair_dist * (1.0 - 1e-9);
  } else {
    const SeparationReport sep = check_separated(work, p);
    if (!sep.passes) {
      throw InfeasibleError("build_one_layer_memorizer: dataset is not separated for p");
    }
  }

  Vocabulary vocab = extract_vocab(work);
  for (int i = 0; i < work.size(); ++i) {
    std::set<int> distinct(vocab.sequence_ids[i].begin(), vocab.sequence_ids[i].end());
    if (static_cast<int>(distinct.size()) != work.length(i)) {
      throw InfeasibleError(
          "build_one_layer_memorizer: repeated token inside a sequence; enable the positional "
          "encoding");
    }
  }

  // Equal contexts must carry equal labels, or no function can memorize.
  std::map<std::pair<std::vector<int>, int>, int> context_label;
  for (int i = 0; i < work.size(); ++i) {
    std::vector<int> token_set = vocab.sequence_ids[i];
    std::sort(token_set.begin(), token_set.end());
    for (int k = 0; k < work.length(i); ++k) {
      const auto key = std::make_pair(token_set, vocab.sequence_ids[i][k]);
      const int label = work.labels[i][k];
      auto [it, fresh] = context_label.emplace(key, label);
      if (!fresh && it->second != label) {
        throw InconsistentLabelsError(
            "build_one_layer_memorizer: same context labeled differently");
      }
    }
  }

  ContextualMap cm = build_contextual_map(work, p_eff, mode, beta, s, seed);

  std::vector<Vec> keys;
  std::vector<Vec> deltas;
  for (int i = 0; i < work.size(); ++i) {
    const int len = work.length(i);
    const Mat out = self_attention_softmax(work.sequences[i].leftCols(len), cm.w);
    for (int k = 0; k < len; ++k) {
      keys.push_back(out.col(k));
      deltas.push_back(encode_label(work.labels[i][k], work.d) - out.col(k));
    }
  }

  double min_key_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = i + 1; j < keys.size(); ++j) {
      const double dist = (keys[i] - keys[j]).norm();
      if (dist > 0) min_key_dist = std::min(min_key_dist, dist);
    }
  }
  if (!std::isfinite(min_key_dist)) min_key_dist = 1.0;

  TransformerModel model;
  model.attn = cm.w;
  model.ff = build_ff_memorizer(keys, deltas, min_key_dist * 0.999, seed ^ 0xabcdef12ull);
  model.ff.uses_skip = true;
  model.has_pos_enc = use_pos_enc;
  model.pos_r_max = p.r_max;

  const int K = static_cast<int>(model.ff.b1.size());
  model.param_count = 2 * work.d + 3 * s              // attention factors v, u_ppp, u, u', u''
                      + work.d + K + work.d * K       // ramp direction, thresholds, readout
                      + (use_pos_enc ? work.n : 0);   // one shift per position
  return model;
}

Mat memorizer_forward(const TransformerModel& m, const Mat& Z) {
  Mat X = Z;
  if (m.has_pos_enc) {
    const Mat E = build_positional_encoding(static_cast<int>(Z.cols()),
                                            static_cast<int>(Z.rows()), m.pos_r_max);
    X += E;
  }
  const Mat attended = self_attention_softmax(X, m.attn);
  return ff_forward(m.ff, attended);
}

MemorizationReport eval_memorization(const TransformerModel& m, const LabeledDataset& ds) {
  if (!ds.labeled()) throw std::invalid_argument("eval_memorization: dataset is unlabeled");
  MemorizationReport rep;
  rep.param_count = m.param_count;
  rep.param_bound = memorization_param_bound(static_cast<int>(m.attn.u_pp.size()), ds.d, ds.n,
                                             ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    const int len = ds.length(i);
    const Mat out = memorizer_forward(m, ds.sequences[i].leftCols(len));
    for (int k = 0; k < len; ++k) {
      ++rep.total_tokens;
      const int label = ds.labels[i][k];
      const int decoded = decode_label(out.col(k), ds.num_classes);
      if (decoded == label) ++rep.matched_tokens;
      rep.max_residual = std::max(rep.max_residual, std::abs(out(0, k) - label));
    }
  }
  rep.exact_match_rate =
      rep.total_tokens > 0 ? static_cast<double>(rep.matched_tokens) / rep.total_tokens : 0.0;
  return rep;
}

}  // namespace attnlab
