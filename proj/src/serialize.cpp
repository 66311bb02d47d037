#include "attnlab/serialize.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace attnlab {

namespace {

std::vector<double> mat_rowmajor(const Mat& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.rows()) * m.cols());
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

Mat mat_from_rowmajor(const std::vector<double>& data, int rows, int cols) {
  if (static_cast<int>(data.size()) != rows * cols) {
    throw std::invalid_argument("serialize: matrix payload size mismatch");
  }
  Mat m(rows, cols);
  std::size_t i = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = data[i++];
  }
  return m;
}

std::vector<double> vec_data(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const std::vector<double>& data) {
  Vec v(static_cast<int>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) v[static_cast<int>(i)] = data[i];
  return v;
}

}  // namespace

ordered_json dataset_to_json(const LabeledDataset& ds) {
  ordered_json j;
  j["format"] = "attnlab-dataset";
  j["d"] = ds.d;
  j["n"] = ds.n;
  j["N"] = ds.size();
  j["num_classes"] = ds.num_classes;
  j["seed"] = ds.seed;
  j["lengths"] = ds.lengths;
  ordered_json seqs = ordered_json::array();
  for (const auto& Z : ds.sequences) seqs.push_back(mat_rowmajor(Z));
  j["sequences"] = std::move(seqs);
  ordered_json labs = ordered_json::array();
  for (const auto& l : ds.labels) {
    labs.push_back(std::vector<int>(l.data(), l.data() + l.size()));
  }
  j["labels"] = std::move(labs);
  return j;
}

LabeledDataset dataset_from_json(const ordered_json& j) {
  if (j.value("format", "") != "attnlab-dataset") {
    throw std::invalid_argument("dataset_from_json: not an attnlab dataset");
  }
  LabeledDataset ds;
  ds.d = j.at("d").get<int>();
  ds.n = j.at("n").get<int>();
  ds.num_classes = j.value("num_classes", 0);
  ds.seed = j.value("seed", 0ull);
  ds.lengths = j.value("lengths", std::vector<int>{});
  for (const auto& s : j.at("sequences")) {
    ds.sequences.push_back(mat_from_rowmajor(s.get<std::vector<double>>(), ds.d, ds.n));
  }
  for (const auto& l : j.at("labels")) {
    const auto vals = l.get<std::vector<int>>();
    Eigen::VectorXi lab(static_cast<int>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) lab[static_cast<int>(i)] = vals[i];
    ds.labels.push_back(std::move(lab));
  }
  if (!ds.labels.empty() && ds.labels.size() != ds.sequences.size()) {
    throw std::invalid_argument("dataset_from_json: label/sequence count mismatch");
  }
  return ds;
}

void save_dataset_text(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("save_dataset_text: cannot open " + path);
  out << std::setprecision(17);
  out << "attnlab-dataset 1\n";
  out << "d " << ds.d << "\nn " << ds.n << "\nN " << ds.size() << "\nclasses " << ds.num_classes
      << "\nseed " << ds.seed << "\n";
  if (!ds.lengths.empty()) {
    out << "lengths";
    for (int l : ds.lengths) out << ' ' << l;
    out << "\n";
  }
  for (int i = 0; i < ds.size(); ++i) {
    out << "seq\n";
    for (int r = 0; r < ds.d; ++r) {
      for (int c = 0; c < ds.n; ++c) out << (c ? " " : "") << ds.sequences[i](r, c);
      out << "\n";
    }
    if (ds.labeled()) {
      out << "labels";
      for (int c = 0; c < ds.labels[i].size(); ++c) out << ' ' << ds.labels[i][c];
      out << "\n";
    }
  }
}

LabeledDataset load_dataset_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_dataset_text: cannot open " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "attnlab-dataset" || version != 1) {
    throw std::invalid_argument("load_dataset_text: bad header");
  }
  LabeledDataset ds;
  int N = 0;
  std::string tag;
  while (in >> tag) {
    if (tag == "d") {
      in >> ds.d;
    } else if (tag == "n") {
      in >> ds.n;
    } else if (tag == "N") {
      in >> N;
    } else if (tag == "classes") {
      in >> ds.num_classes;
    } else if (tag == "seed") {
      in >> ds.seed;
    } else if (tag == "lengths") {
      ds.lengths.resize(N);
      for (int i = 0; i < N; ++i) in >> ds.lengths[i];
    } else if (tag == "seq") {
      Mat Z(ds.d, ds.n);
      for (int r = 0; r < ds.d; ++r) {
        for (int c = 0; c < ds.n; ++c) in >> Z(r, c);
      }
      ds.sequences.push_back(std::move(Z));
    } else if (tag == "labels") {
      Eigen::VectorXi lab(ds.n);
      for (int c = 0; c < ds.n; ++c) in >> lab[c];
      ds.labels.push_back(std::move(lab));
    } else {
      throw std::invalid_argument("load_dataset_text: unknown tag " + tag);
    }
  }
  if (ds.size() != N) throw std::invalid_argument("load_dataset_text: sequence count mismatch");
  return ds;
}

void save_dataset_json(const LabeledDataset& ds, const std::string& path) {
  write_json_file(dataset_to_json(ds), path);
}

LabeledDataset load_dataset_json(const std::string& path) {
  return dataset_from_json(read_json_file(path));
}

ordered_json attention_to_json(const AttentionWeights& w) {
  ordered_json j;
  j["format"] = "attnlab-attention";
  j["s"] = w.kq.s;
  j["d"] = static_cast<int>(w.kq.v.size());
  j["scale"] = w.kq.scale;
  j["v"] = vec_data(w.kq.v);
  j["u"] = vec_data(w.kq.u);
  j["u_prime"] = vec_data(w.kq.u_prime);
  j["u_pp"] = vec_data(w.u_pp);
  j["u_ppp"] = vec_data(w.u_ppp);
  return j;
}

AttentionWeights attention_from_json(const ordered_json& j) {
  if (j.value("format", "") != "attnlab-attention") {
    throw std::invalid_argument("attention_from_json: not attention weights");
  }
  AttentionWeights w;
  w.kq.s = j.at("s").get<int>();
  w.kq.scale = j.at("scale").get<double>();
  w.kq.v = vec_from(j.at("v").get<std::vector<double>>());
  w.kq.u = vec_from(j.at("u").get<std::vector<double>>());
  w.kq.u_prime = vec_from(j.at("u_prime").get<std::vector<double>>());
  w.u_pp = vec_from(j.at("u_pp").get<std::vector<double>>());
  w.u_ppp = vec_from(j.at("u_ppp").get<std::vector<double>>());
  return w;
}

ordered_json ffnet_to_json(const FFNet& ff) {
  ordered_json j;
  j["format"] = "attnlab-ffnet";
  j["hidden"] = static_cast<int>(ff.W1.rows());
  j["d_in"] = static_cast<int>(ff.W1.cols());
  j["d_out"] = static_cast<int>(ff.W2.rows());
  j["uses_skip"] = ff.uses_skip;
  j["W1"] = mat_rowmajor(ff.W1);
  j["b1"] = vec_data(ff.b1);
  j["W2"] = mat_rowmajor(ff.W2);
  j["b2"] = vec_data(ff.b2);
  return j;
}

FFNet ffnet_from_json(const ordered_json& j) {
  if (j.value("format", "") != "attnlab-ffnet") {
    throw std::invalid_argument("ffnet_from_json: not a feed-forward net");
  }
  FFNet ff;
  const int hidden = j.at("hidden").get<int>();
  const int d_in = j.at("d_in").get<int>();
  const int d_out = j.at("d_out").get<int>();
  ff.W1 = mat_from_rowmajor(j.at("W1").get<std::vector<double>>(), hidden, d_in);
  ff.b1 = vec_from(j.at("b1").get<std::vector<double>>());
  ff.W2 = mat_from_rowmajor(j.at("W2").get<std::vector<double>>(), d_out, hidden);
  ff.b2 = vec_from(j.at("b2").get<std::vector<double>>());
  ff.uses_skip = j.at("uses_skip").get<bool>();
  return ff;
}

ordered_json model_to_json(const TransformerModel& m, int n) {
  ordered_json j;
  j["format"] = "attnlab-model";
  j["n"] = n;
  j["attention"] = attention_to_json(m.attn);
  j["ff"] = ffnet_to_json(m.ff);
  j["has_pos_enc"] = m.has_pos_enc;
  j["pos_r_max"] = m.pos_r_max;
  j["param_count"] = m.param_count;
  return j;
}

TransformerModel model_from_json(const ordered_json& j, int* n_out) {
  if (j.value("format", "") != "attnlab-model") {
    throw std::invalid_argument("model_from_json: not a model");
  }
  TransformerModel m;
  m.attn = attention_from_json(j.at("attention"));
  m.ff = ffnet_from_json(j.at("ff"));
  m.has_pos_enc = j.at("has_pos_enc").get<bool>();
  m.pos_r_max = j.at("pos_r_max").get<double>();
  m.param_count = j.at("param_count").get<int>();
  if (n_out) *n_out = j.at("n").get<int>();
  return m;
}

void write_json_file(const ordered_json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("write_json_file: cannot open " + path);
  out << j.dump(2) << "\n";
}

ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("read_json_file: cannot open " + path);
  ordered_json j;
  in >> j;
  return j;
}

}  // namespace attnlab
