#pragma once

#include <map>
#include <string>
#include <vector>

#include "secreq/corpus.hpp"
#include "secreq/text.hpp"

namespace secreq {

/// TF-IDF over the VR corpus: tf(t,d) = count/len(d), idf(t) = ln(D/df(t)).
struct TfIdfTable {
  // token -> (vr_id -> tf-idf); entries only for tokens occurring in that VR
  std::map<std::string, std::map<std::string, double>> entries;
  std::map<std::string, int> doc_freq;
  std::size_t corpus_size = 0;

  double entry(const std::string& token, const std::string& vr_id) const;
};

TfIdfTable compute_tf_idf(const VrCorpus& corpus);

/// How per-(token, document) TF-IDF folds into one weight per token.
enum class WeightAggregation { kMean, kMax, kIdfOnly };

inline constexpr double kWeightFloor = 0.05;
inline constexpr double kWeightCeil = 20.0;

/// Vocabulary-token -> positive scalar weight; the trainable layer that
/// multiplies document-token similarities before the max.
struct TokenWeightTable {
  std::map<std::string, double> weights;
  double default_weight = 1.0;
  int version = 0;
  bool trained = false;

  double lookup(const std::string& token) const;
};

/// Initialize from TF-IDF: aggregate per token, rescale so the
/// vocabulary mean is 1, clamp to [0.05, 20].
TokenWeightTable init_weight_table(
    const TfIdfTable& tfidf,
    WeightAggregation aggregation = WeightAggregation::kMean);

/// Uniform table (all lookups 1.0); the zero-shot configuration.
TokenWeightTable uniform_weight_table();

/// Per-position weights for a token sequence.
std::vector<double> lookup_weights(const TokenWeightTable& table,
                                   const TokenSequence& seq);

/// JSON round-trip: {version, default_weight, trained, weights: {...}}.
std::string weight_table_to_json(const TokenWeightTable& table);
TokenWeightTable weight_table_from_json(const std::string& json_text);

}  // namespace secreq
