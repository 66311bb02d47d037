#include "attnlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "attnlab/errors.hpp"
#include "attnlab/rng.hpp"

namespace attnlab {

namespace {

struct BlockCache {
  Mat Zin;
  Vec alpha, q;
  Mat P;
  Vec srow;
  Mat Zsa, U, H, Zff;
};

Mat block_forward(const Rank1Block& blk, const Mat& Z, BlockCache* cache) {
  const int L = static_cast<int>(Z.cols());
  Vec alpha = Z.transpose() * blk.v1;
  Vec q = Z.transpose() * blk.v2;
  Mat P(L, L);
  for (int j = 0; j < L; ++j) {
    Vec col = alpha * q[j];
    const double m = col.maxCoeff();
    double z = 0.0;
    for (int i = 0; i < L; ++i) {
      col[i] = std::exp(col[i] - m);
      z += col[i];
    }
    P.col(j) = col / z;
  }
  Vec srow = P.transpose() * alpha;
  Mat Zsa = Z + blk.w_o * srow.transpose();
  Mat U = (blk.ff.W1 * Zsa).colwise() + blk.ff.b1;
  Mat H = U.cwiseMax(0.0);
  Mat Zff = Zsa + blk.ff.W2 * H;
  Zff.colwise() += blk.ff.b2;
  if (cache) {
    cache->Zin = Z;
    cache->alpha = alpha;
    cache->q = q;
    cache->P = P;
    cache->srow = srow;
    cache->Zsa = Zsa;
    cache->U = U;
    cache->H = H;
    cache->Zff = Zff;
  }
  return Zff;
}

// Returns the gradient with respect to the block input.
Mat block_backward(const Rank1Block& blk, const BlockCache& c, const Mat& dZff,
                   Rank1Block* g) {
  g->ff.b2 += dZff.rowwise().sum();
  g->ff.W2.noalias() += dZff * c.H.transpose();
  Mat dU = (blk.ff.W2.transpose() * dZff).cwiseProduct((c.U.array() > 0.0).cast<double>().matrix());
  g->ff.W1.noalias() += dU * c.Zsa.transpose();
  g->ff.b1 += dU.rowwise().sum();
  Mat dZsa = dZff + blk.ff.W1.transpose() * dU;

  g->w_o += dZsa * c.srow;
  Vec dsrow = dZsa.transpose() * blk.w_o;
  Mat dZ = dZsa;

  // srow = P^T alpha
  Mat dP = c.alpha * dsrow.transpose();
  Vec dalpha = c.P * dsrow;

  // column softmax
  const int L = static_cast<int>(c.P.cols());
  Mat dA(L, L);
  for (int j = 0; j < L; ++j) {
    const double dot = c.P.col(j).dot(dP.col(j));
    dA.col(j) = c.P.col(j).cwiseProduct(dP.col(j) - Vec::Constant(L, dot));
  }

  // A_ij = alpha_i q_j
  dalpha.noalias() += dA * c.q;
  Vec dq = dA.transpose() * c.alpha;

  g->v1.noalias() += c.Zin * dalpha;
  g->v2.noalias() += c.Zin * dq;
  dZ.noalias() += blk.v1 * dalpha.transpose();
  dZ.noalias() += blk.v2 * dq.transpose();
  return dZ;
}

Rank1Block zero_like(const Rank1Block& b) {
  Rank1Block z;
  z.v1 = Vec::Zero(b.v1.size());
  z.v2 = Vec::Zero(b.v2.size());
  z.w_o = Vec::Zero(b.w_o.size());
  z.ff.W1 = Mat::Zero(b.ff.W1.rows(), b.ff.W1.cols());
  z.ff.b1 = Vec::Zero(b.ff.b1.size());
  z.ff.W2 = Mat::Zero(b.ff.W2.rows(), b.ff.W2.cols());
  z.ff.b2 = Vec::Zero(b.ff.b2.size());
  z.ff.uses_skip = true;
  return z;
}

}  // namespace

int TrainMetrics::epochs_to(double acc) const {
  for (std::size_t e = 0; e < accuracy.size(); ++e) {
    if (accuracy[e] >= acc) return static_cast<int>(e) + 1;
  }
  return -1;
}

Rank1Model init_rank1_model(int d, int depth, int ff_width, int n_classes, std::uint64_t seed) {
  if (d < 1 || depth < 1 || ff_width < 1 || n_classes < 2) {
    throw std::invalid_argument("init_rank1_model: bad arguments");
  }
  Rng rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sw = std::sqrt(2.0 / ff_width);
  Rank1Model m;
  m.d = d;
  m.n_classes = n_classes;
  for (int b = 0; b < depth; ++b) {
    Rank1Block blk;
    blk.v1 = sd * rng.gaussian_vector(d);
    blk.v2 = sd * rng.gaussian_vector(d);
    blk.w_o = sd * rng.gaussian_vector(d);
    blk.ff.W1 = Mat::NullaryExpr(ff_width, d,
                                 [&](Eigen::Index, Eigen::Index) { return sd * rng.normal(); });
    blk.ff.b1 = Vec::Constant(ff_width, 0.01);
    blk.ff.W2 = Mat::NullaryExpr(d, ff_width,
                                 [&](Eigen::Index, Eigen::Index) { return sw * rng.normal(); });
    blk.ff.b2 = Vec::Zero(d);
    blk.ff.uses_skip = true;
    m.blocks.push_back(std::move(blk));
  }
  m.W_read = Mat::NullaryExpr(n_classes, d,
                              [&](Eigen::Index, Eigen::Index) { return sd * rng.normal(); });
  m.b_read = Vec::Zero(n_classes);
  return m;
}

Mat rank1_forward(const Rank1Model& m, const Mat& Z, int valid_len) {
  if (valid_len < 1 || valid_len > Z.cols()) {
    throw std::invalid_argument("rank1_forward: bad valid_len");
  }
  Mat X = Z.leftCols(valid_len);
  for (const auto& blk : m.blocks) X = block_forward(blk, X, nullptr);
  Mat logits = (m.W_read * X).colwise() + m.b_read;
  return logits;
}

double loss_and_gradients(const Rank1Model& m, const std::vector<const Mat*>& batch,
                          const std::vector<const Eigen::VectorXi*>& batch_labels,
                          const std::vector<int>& valid_lens, Gradients* grads) {
  if (batch.empty() || batch.size() != batch_labels.size() || batch.size() != valid_lens.size()) {
    throw std::invalid_argument("loss_and_gradients: batch shape mismatch");
  }
  if (grads) {
    grads->blocks.clear();
    for (const auto& b : m.blocks) grads->blocks.push_back(zero_like(b));
    grads->W_read = Mat::Zero(m.W_read.rows(), m.W_read.cols());
    grads->b_read = Vec::Zero(m.b_read.size());
  }

  long total_tokens = 0;
  for (int len : valid_lens) total_tokens += len;
  if (total_tokens == 0) throw std::invalid_argument("loss_and_gradients: empty batch");
  const double inv_count = 1.0 / static_cast<double>(total_tokens);

  double loss = 0.0;
  const int depth = static_cast<int>(m.blocks.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const int L = valid_lens[s];
    std::vector<BlockCache> caches(depth);
    Mat X = batch[s]->leftCols(L);
    for (int b = 0; b < depth; ++b) X = block_forward(m.blocks[b], X, &caches[b]);
    Mat logits = (m.W_read * X).colwise() + m.b_read;

    Mat dlogits(m.n_classes, L);
    for (int j = 0; j < L; ++j) {
      const int y = (*batch_labels[s])[j];
      if (y < 1 || y > m.n_classes) throw std::invalid_argument("loss_and_gradients: bad label");
      Vec col = logits.col(j);
      const double mx = col.maxCoeff();
      double z = 0.0;
      for (int cix = 0; cix < m.n_classes; ++cix) {
        col[cix] = std::exp(col[cix] - mx);
        z += col[cix];
      }
      col /= z;
      loss += -std::log(std::max(col[y - 1], 1e-300)) * inv_count;
      col[y - 1] -= 1.0;
      dlogits.col(j) = col * inv_count;
    }

    if (grads) {
      grads->W_read.noalias() += dlogits * X.transpose();
      grads->b_read += dlogits.rowwise().sum();
      Mat dX = m.W_read.transpose() * dlogits;
      for (int b = depth - 1; b >= 0; --b) {
        dX = block_backward(m.blocks[b], caches[b], dX, &grads->blocks[b]);
      }
    }
  }
  return loss;
}

double dataset_accuracy(const Rank1Model& m, const LabeledDataset& ds) {
  long correct = 0, total = 0;
  for (int i = 0; i < ds.size(); ++i) {
    const int len = ds.length(i);
    const Mat logits = rank1_forward(m, ds.sequences[i], len);
    for (int j = 0; j < len; ++j) {
      int arg = 0;
      logits.col(j).maxCoeff(&arg);
      ++total;
      if (arg + 1 == ds.labels[i][j]) ++correct;
    }
  }
  return total > 0 ? static_cast<double>(correct) / total : 0.0;
}

TrainMetrics train(Rank1Model& m, const LabeledDataset& ds, const TrainConfig& cfg) {
  if (!ds.labeled()) throw std::invalid_argument("train: dataset is unlabeled");
  Rng rng(cfg.seed);

  Gradients vel;
  for (const auto& b : m.blocks) vel.blocks.push_back(zero_like(b));
  vel.W_read = Mat::Zero(m.W_read.rows(), m.W_read.cols());
  vel.b_read = Vec::Zero(m.b_read.size());

  std::ofstream csv;
  if (!cfg.csv_path.empty()) {
    csv.open(cfg.csv_path);
    if (!csv) throw std::invalid_argument("train: cannot open csv path " + cfg.csv_path);
    csv << "epoch,loss,accuracy\n";
    csv.precision(17);
  }

  TrainMetrics metrics;
  std::vector<int> idx(ds.size());
  for (int i = 0; i < ds.size(); ++i) idx[i] = i;

  Gradients grads;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(idx);
    double epoch_loss = 0.0;
    long epoch_tokens = 0;
    for (int start = 0; start < ds.size(); start += cfg.batch_size) {
      const int end = std::min(ds.size(), start + cfg.batch_size);
      std::vector<const Mat*> batch;
      std::vector<const Eigen::VectorXi*> labels;
      std::vector<int> lens;
      long batch_tokens = 0;
      for (int b = start; b < end; ++b) {
        batch.push_back(&ds.sequences[idx[b]]);
        labels.push_back(&ds.labels[idx[b]]);
        lens.push_back(ds.length(idx[b]));
        batch_tokens += ds.length(idx[b]);
      }
      const double loss = loss_and_gradients(m, batch, labels, lens, &grads);
      epoch_loss += loss * static_cast<double>(batch_tokens);
      epoch_tokens += batch_tokens;

      const double mu = cfg.momentum;
      const double lr = cfg.learning_rate;
      for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        auto& gb = grads.blocks[b];
        auto& vb = vel.blocks[b];
        auto& mb = m.blocks[b];
        vb.v1 = mu * vb.v1 - lr * gb.v1;
        mb.v1 += vb.v1;
        vb.v2 = mu * vb.v2 - lr * gb.v2;
        mb.v2 += vb.v2;
        vb.w_o = mu * vb.w_o - lr * gb.w_o;
        mb.w_o += vb.w_o;
        vb.ff.W1 = mu * vb.ff.W1 - lr * gb.ff.W1;
        mb.ff.W1 += vb.ff.W1;
        vb.ff.b1 = mu * vb.ff.b1 - lr * gb.ff.b1;
        mb.ff.b1 += vb.ff.b1;
        vb.ff.W2 = mu * vb.ff.W2 - lr * gb.ff.W2;
        mb.ff.W2 += vb.ff.W2;
        vb.ff.b2 = mu * vb.ff.b2 - lr * gb.ff.b2;
        mb.ff.b2 += vb.ff.b2;
      }
      vel.W_read = mu * vel.W_read - lr * grads.W_read;
      m.W_read += vel.W_read;
      vel.b_read = mu * vel.b_read - lr * grads.b_read;
      m.b_read += vel.b_read;
    }

    metrics.loss.push_back(epoch_loss / static_cast<double>(epoch_tokens));
    metrics.accuracy.push_back(dataset_accuracy(m, ds));
    metrics.epochs_run = epoch;
    if (csv.is_open()) {
      csv << epoch << ',' << metrics.loss.back() << ',' << metrics.accuracy.back() << '\n';
    }
    if (cfg.stop_accuracy > 0 && metrics.accuracy.back() >= cfg.stop_accuracy) break;
  }
  return metrics;
}

LabeledDataset gen_synthetic_task(int N, int n, int vocab_size, int C, int d,
                                  std::uint64_t seed) {
  if (vocab_size < n) throw std::invalid_argument("gen_synthetic_task: vocab_size must be >= n");
  if (C < 2) throw std::invalid_argument("gen_synthetic_task: need at least 2 classes");
  Rng rng(seed);

  std::vector<Vec> tokens(vocab_size);
  for (int v = 0; v < vocab_size; ++v) {
    tokens[v] = rng.unit_vector(d) * rng.uniform(0.55, 0.95);
  }

  std::vector<int> ids(vocab_size);
  for (int v = 0; v < vocab_size; ++v) ids[v] = v;
  auto draw_sequence = [&](std::vector<int>& out) {
    for (int k = 0; k < n; ++k) {
      const int j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - k)));
      std::swap(ids[k], ids[j]);
      out[k] = ids[k];
    }
  };
  auto mean_first = [&](const std::vector<int>& seq) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += tokens[seq[k]][0];
    return s / n;
  };

  // Population threshold for the context bit, then a margin so every kept
  // sequence decides the bit comfortably.
  std::vector<int> probe(n);
  std::vector<double> means;
  for (int t = 0; t < 512; ++t) {
    draw_sequence(probe);
    means.push_back(mean_first(probe));
  }
  std::sort(means.begin(), means.end());
  const double theta = means[means.size() / 2];
  double var = 0.0, mu = 0.0;
  for (double v : means) mu += v;
  mu /= means.size();
  for (double v : means) var += (v - mu) * (v - mu);
  const double sigma = std::sqrt(var / means.size());
  const double margin = 0.3 * sigma;

  LabeledDataset ds;
  ds.d = d;
  ds.n = n;
  ds.num_classes = C;
  ds.seed = seed;
  const int half = C / 2;
  for (int i = 0; i < N; ++i) {
    std::vector<int> seq(n);
    double mval = 0.0;
    bool placed = false;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      draw_sequence(seq);
      mval = mean_first(seq);
      if (std::abs(mval - theta) > margin) {
        placed = true;
        break;
      }
    }
    if (!placed) throw BudgetExhaustedError("gen_synthetic_task: margin rejection exhausted");
    const int g = mval > theta ? 1 : 0;
    Mat Z(d, n);
    Eigen::VectorXi lab(n);
    for (int k = 0; k < n; ++k) {
      Z.col(k) = tokens[seq[k]];
      if (C % 2 == 0) {
        lab[k] = 1 + (seq[k] % half) + half * g;
      } else {
        lab[k] = 1 + (seq[k] + g * ((C + 1) / 2)) % C;
      }
    }
    ds.sequences.push_back(std::move(Z));
    ds.labels.push_back(std::move(lab));
  }
  return ds;
}

}  // namespace attnlab
