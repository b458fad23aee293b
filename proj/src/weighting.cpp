#include "secreq/weighting.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "secreq/errors.hpp"

namespace secreq {

using nlohmann::json;

double TfIdfTable::entry(const std::string& token,
                         const std::string& vr_id) const {
  auto it = entries.find(token);
  if (it == entries.end()) return 0.0;
  auto jt = it->second.find(vr_id);
  return jt == it->second.end() ? 0.0 : jt->second;
}

TfIdfTable compute_tf_idf(const VrCorpus& corpus) {
  if (corpus.records.empty())
    throw ValidationError("compute_tf_idf: corpus is empty");
  TfIdfTable table;
  table.corpus_size = corpus.records.size();

  // term counts per document
  std::map<std::string, std::map<std::string, int>> counts;  // token -> doc
  std::map<std::string, std::size_t> doc_len;
  for (const auto& rec : corpus.records) {
    auto seq = tokenize(rec.composed_text);
    doc_len[rec.id] = seq.size();
    for (const auto& token : seq.tokens) ++counts[token][rec.id];
  }
  double d = static_cast<double>(table.corpus_size);
  for (const auto& [token, per_doc] : counts) {
    table.doc_freq[token] = static_cast<int>(per_doc.size());
    double idf = std::log(d / static_cast<double>(per_doc.size()));
    for (const auto& [vr_id, count] : per_doc) {
      double tf = static_cast<double>(count) /
                  static_cast<double>(doc_len.at(vr_id));
      table.entries[token][vr_id] = tf * idf;
    }
  }
  return table;
}

double TokenWeightTable::lookup(const std::string& token) const {
  auto it = weights.find(token);
  return it == weights.end() ? default_weight : it->second;
}

TokenWeightTable init_weight_table(const TfIdfTable& tfidf,
                                   WeightAggregation aggregation) {
  if (tfidf.entries.empty())
    throw ValidationError("init_weight_table: empty TF-IDF table");

  std::map<std::string, double> raw;
  for (const auto& [token, per_doc] : tfidf.entries) {
    double value = 0.0;
    switch (aggregation) {
      case WeightAggregation::kMean: {
        for (const auto& [_, v] : per_doc) value += v;
        value /= static_cast<double>(per_doc.size());
        break;
      }
      case WeightAggregation::kMax: {
        for (const auto& [_, v] : per_doc) value = std::max(value, v);
        break;
      }
      case WeightAggregation::kIdfOnly: {
        value = std::log(static_cast<double>(tfidf.corpus_size) /
                         static_cast<double>(tfidf.doc_freq.at(token)));
        break;
      }
    }
    raw[token] = value;
  }

  double sum = 0.0;
  for (const auto& [_, v] : raw) sum += v;
  if (sum <= 0.0)
    throw ValidationError(
        "init_weight_table: degenerate corpus, all raw weights zero");
  double scale = static_cast<double>(raw.size()) / sum;  // vocabulary mean 1

  TokenWeightTable table;
  table.default_weight = 1.0;
  table.version = 1;
  for (const auto& [token, v] : raw)
    table.weights[token] = std::clamp(v * scale, kWeightFloor, kWeightCeil);
  return table;
}

TokenWeightTable uniform_weight_table() {
  TokenWeightTable table;
  table.default_weight = 1.0;
  table.version = 0;
  return table;
}

std::vector<double> lookup_weights(const TokenWeightTable& table,
                                   const TokenSequence& seq) {
  std::vector<double> out;
  out.reserve(seq.size());
  for (const auto& token : seq.tokens) out.push_back(table.lookup(token));
  return out;
}

std::string weight_table_to_json(const TokenWeightTable& table) {
  json doc;
  doc["version"] = table.version;
  doc["default_weight"] = table.default_weight;
  doc["trained"] = table.trained;
  doc["weights"] = json::object();
  for (const auto& [token, v] : table.weights) doc["weights"][token] = v;
  return doc.dump(1);
}

TokenWeightTable weight_table_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad weight table JSON: ") + e.what());
  }
  TokenWeightTable table;
  table.version = doc.at("version").get<int>();
  table.default_weight = doc.at("default_weight").get<double>();
  table.trained = doc.value("trained", false);
  for (const auto& [token, v] : doc.at("weights").items()) {
    double w = v.get<double>();
    if (w <= 0.0)
      throw ValidationError("weight table: non-positive weight for '" +
                            token + "'");
    table.weights[token] = w;
  }
  return table;
}

}  // namespace secreq
