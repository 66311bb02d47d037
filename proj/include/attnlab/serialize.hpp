#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "attnlab/attention.hpp"
#include "attnlab/memorizer.hpp"
#include "attnlab/sequences.hpp"

namespace attnlab {

using ordered_json = nlohmann::ordered_json;

// Datasets round-trip through JSON (row-major sequences) and a line-oriented
// text format; both preserve doubles exactly via shortest round-trip
// formatting.
ordered_json dataset_to_json(const LabeledDataset& ds);
LabeledDataset dataset_from_json(const ordered_json& j);
void save_dataset_text(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset_text(const std::string& path);
void save_dataset_json(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset_json(const std::string& path);

// Attention weights serialize as their factor vectors only; the dense
// matrices are reconstructed on load.
ordered_json attention_to_json(const AttentionWeights& w);
AttentionWeights attention_from_json(const ordered_json& j);

ordered_json ffnet_to_json(const FFNet& ff);
FFNet ffnet_from_json(const ordered_json& j);

ordered_json model_to_json(const TransformerModel& m, int n);
TransformerModel model_from_json(const ordered_json& j, int* n_out);

void write_json_file(const ordered_json& j, const std::string& path);
ordered_json read_json_file(const std::string& path);

}  // namespace attnlab
