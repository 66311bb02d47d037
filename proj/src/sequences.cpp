#include "attnlab/sequences.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "attnlab/errors.hpp"
#include "attnlab/rng.hpp"

namespace attnlab {

namespace {

std::string column_key(const Mat& m, int col) {
  return std::string(reinterpret_cast<const char*>(m.col(col).data()),
                     static_cast<std::size_t>(m.rows()) * sizeof(double));
}

std::string vec_key(const Vec& v) {
  return std::string(reinterpret_cast<const char*>(v.data()),
                     static_cast<std::size_t>(v.size()) * sizeof(double));
}

// FNV-1a, the usual 64-bit offset/prime pair.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Vec sample_shell_token(Rng& rng, int d, const SeparationParams& p) {
  for (;;) {
    Vec dir = rng.unit_vector(d);
    const double radius = rng.uniform(p.r_min, p.r_max);
    Vec x = radius * dir;
    const double norm = x.norm();
    if (norm > p.r_min && norm < p.r_max) return x;
  }
}

}  // namespace

SeparationReport check_separated(const LabeledDataset& ds, const SeparationParams& p) {
  SeparationReport rep;
  rep.min_norm = std::numeric_limits<double>::infinity();
  rep.max_norm = 0.0;
  rep.min_pair_dist = std::numeric_limits<double>::infinity();

  struct TokenRef {
    int seq, pos;
  };
  std::vector<TokenRef> refs;
  for (int i = 0; i < ds.size(); ++i) {
    for (int k = 0; k < ds.length(i); ++k) refs.push_back({i, k});
  }

  for (const auto& t : refs) {
    const double norm = ds.sequences[t.seq].col(t.pos).norm();
    rep.min_norm = std::min(rep.min_norm, norm);
    rep.max_norm = std::max(rep.max_norm, norm);
    if (!(norm > p.r_min)) rep.violations.push_back({"norm_low", t.seq, t.pos, -1, -1, norm});
    if (!(norm < p.r_max)) rep.violations.push_back({"norm_high", t.seq, t.pos, -1, -1, norm});
  }

  const std::int64_t total = static_cast<std::int64_t>(refs.size());
  if (total * total > 100000000) {
    throw BudgetExhaustedError("check_separated: too many token pairs to enumerate");
  }
  for (std::size_t a = 0; a < refs.size(); ++a) {
    const auto& ta = refs[a];
    const auto col_a = ds.sequences[ta.seq].col(ta.pos);
    for (std::size_t b = a + 1; b < refs.size(); ++b) {
      const auto& tb = refs[b];
      const auto col_b = ds.sequences[tb.seq].col(tb.pos);
      if (std::memcmp(col_a.data(), col_b.data(),
                      static_cast<std::size_t>(ds.d) * sizeof(double)) == 0) {
        continue;  // bitwise-identical tokens are the same vocabulary entry
      }
      const double dist = (col_a - col_b).norm();
      rep.min_pair_dist = std::min(rep.min_pair_dist, dist);
      if (!(dist > p.eps)) {
        rep.violations.push_back({"pair_close", ta.seq, ta.pos, tb.seq, tb.pos, dist});
      }
    }
  }

  rep.passes = rep.violations.empty();
  return rep;
}

LabeledDataset gen_separated_dataset(int N, int n, int d, const SeparationParams& p,
                                     bool no_dup_tokens, std::uint64_t seed) {
  if (N <= 0 || n <= 0 || d <= 0) throw std::invalid_argument("gen_separated_dataset: bad shape");
  if (!(p.r_min > 0 && p.r_max > p.r_min && p.eps > 0)) {
    throw std::invalid_argument("gen_separated_dataset: bad separation params");
  }

  Rng rng(seed);
  LabeledDataset ds;
  ds.d = d;
  ds.n = n;
  ds.seed = seed;

  std::vector<Vec> placed;
  const int budget_per_token = 10000;
  const double reuse_prob = 0.3;

  for (int i = 0; i < N; ++i) {
    Mat Z(d, n);
    for (int k = 0; k < n; ++k) {
      if (!no_dup_tokens && !placed.empty() && rng.uniform01() < reuse_prob) {
        Z.col(k) = placed[rng.below(placed.size())];
        continue;
      }
      bool ok = false;
      for (int attempt = 0; attempt < budget_per_token; ++attempt) {
        Vec x = sample_shell_token(rng, d, p);
        bool clear = true;
        for (const auto& y : placed) {
          if ((x - y).norm() <= p.eps) {
            clear = false;
            break;
          }
        }
        if (clear) {
          Z.col(k) = x;
          placed.push_back(x);
          ok = true;
          break;
        }
      }
      if (!ok) {
        throw BudgetExhaustedError(
            "gen_separated_dataset: could not place a token after 10000 attempts; the shell is "
            "too crowded for eps");
      }
    }
    ds.sequences.push_back(std::move(Z));
  }
  return ds;
}

LabeledDataset gen_shared_vocab_dataset(int N, int n, int d, int vocab_size,
                                        const SeparationParams& p, std::uint64_t seed) {
  if (vocab_size < n) {
    throw std::invalid_argument("gen_shared_vocab_dataset: vocab_size must be >= n");
  }
  LabeledDataset pool = gen_separated_dataset(1, vocab_size, d, p, true, seed);
  const Mat& tokens = pool.sequences[0];

  Rng rng(seed ^ 0x5eedf00dull);
  LabeledDataset ds;
  ds.d = d;
  ds.n = n;
  ds.seed = seed;
  std::vector<int> ids(vocab_size);
  for (int v = 0; v < vocab_size; ++v) ids[v] = v;
  for (int i = 0; i < N; ++i) {
    // partial Fisher-Yates: first n entries become a distinct sample
    for (int k = 0; k < n; ++k) {
      const int j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - k)));
      std::swap(ids[k], ids[j]);
    }
    Mat Z(d, n);
    for (int k = 0; k < n; ++k) Z.col(k) = tokens.col(ids[k]);
    ds.sequences.push_back(std::move(Z));
  }
  return ds;
}

Vocabulary extract_vocab(const LabeledDataset& ds) {
  Vocabulary vocab;
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < ds.size(); ++i) {
    std::vector<int> ids;
    for (int k = 0; k < ds.length(i); ++k) {
      const std::string key = column_key(ds.sequences[i], k);
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, vocab.count()).first;
        vocab.tokens.push_back(ds.sequences[i].col(k));
      }
      ids.push_back(it->second);
    }
    vocab.sequence_ids.push_back(std::move(ids));
  }
  return vocab;
}

void assign_consistent_random_labels(LabeledDataset& ds, int num_classes, std::uint64_t seed) {
  if (num_classes < 1) throw std::invalid_argument("assign_consistent_random_labels: bad classes");
  Vocabulary vocab = extract_vocab(ds);
  Rng rng(seed);
  std::map<std::pair<std::vector<int>, int>, int> context_label;
  ds.labels.clear();
  ds.num_classes = num_classes;
  for (int i = 0; i < ds.size(); ++i) {
    std::vector<int> token_set = vocab.sequence_ids[i];
    std::sort(token_set.begin(), token_set.end());
    token_set.erase(std::unique(token_set.begin(), token_set.end()), token_set.end());
    Eigen::VectorXi lab = Eigen::VectorXi::Zero(ds.n);
    for (int k = 0; k < ds.length(i); ++k) {
      const auto key = std::make_pair(token_set, vocab.sequence_ids[i][k]);
      auto it = context_label.find(key);
      if (it == context_label.end()) {
        it = context_label.emplace(key, rng.uniform_int(1, num_classes)).first;
      }
      lab[k] = it->second;
    }
    ds.labels.push_back(std::move(lab));
  }
}

LabeledDataset load_conll_columns(const std::string& path, int d, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_conll_columns: cannot open " + path);

  std::vector<std::vector<std::string>> sentences_words;
  std::vector<std::vector<std::string>> sentences_tags;
  std::vector<std::string> words, tags;
  bool any_tags = true;

  auto flush = [&]() {
    if (words.empty()) return;
    if (!(words.size() == 1 && words[0] == "-DOCSTART-")) {
      sentences_words.push_back(words);
      sentences_tags.push_back(tags);
    }
    words.clear();
    tags.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> cols;
    std::string col;
    while (ss >> col) cols.push_back(col);
    if (cols.empty()) {
      flush();
      continue;
    }
    words.push_back(cols.front());
    if (cols.size() >= 2) {
      tags.push_back(cols.back());
    } else {
      any_tags = false;
      tags.push_back("");
    }
  }
  flush();

  LabeledDataset ds;
  ds.d = d;
  ds.seed = seed;
  if (sentences_words.empty()) {
    ds.n = 0;
    return ds;
  }

  std::size_t max_len = 0;
  for (const auto& s : sentences_words) max_len = std::max(max_len, s.size());
  ds.n = static_cast<int>(max_len);

  // One embedding per word type, derived from the word's hash so reloads and
  // different files agree on shared vocabulary.
  std::unordered_map<std::string, Vec> embedding;
  auto embed = [&](const std::string& w) -> const Vec& {
    auto it = embedding.find(w);
    if (it == embedding.end()) {
      Rng wrng(seed ^ fnv1a(w));
      Vec x = wrng.unit_vector(d) * wrng.uniform(0.55, 0.95);
      it = embedding.emplace(w, std::move(x)).first;
    }
    return it->second;
  };

  std::map<std::string, int> tag_ids;
  if (any_tags) {
    for (const auto& s : sentences_tags) {
      for (const auto& t : s) {
        if (!tag_ids.count(t)) tag_ids.emplace(t, static_cast<int>(tag_ids.size()) + 1);
      }
    }
    ds.num_classes = static_cast<int>(tag_ids.size());
  }

  for (std::size_t i = 0; i < sentences_words.size(); ++i) {
    const auto& sw = sentences_words[i];
    Mat Z = Mat::Zero(d, ds.n);
    Eigen::VectorXi lab = Eigen::VectorXi::Zero(ds.n);
    for (std::size_t k = 0; k < sw.size(); ++k) {
      Z.col(static_cast<int>(k)) = embed(sw[k]);
      if (any_tags) lab[static_cast<int>(k)] = tag_ids.at(sentences_tags[i][k]);
    }
    ds.sequences.push_back(std::move(Z));
    if (any_tags) ds.labels.push_back(std::move(lab));
    ds.lengths.push_back(static_cast<int>(sw.size()));
  }
  return ds;
}

}  // namespace attnlab
