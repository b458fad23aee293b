#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "secreq/llm.hpp"
#include "secreq/stats.hpp"

namespace secreq {

/// Self-information in bits: -(sum of natural-log token probabilities)
/// / ln 2, scored unconditionally. Out-of-scope texts score 0.
double self_information(const std::string& sr_text, const LmScorer& scorer,
                        bool in_scope);

/// Mean self-information over a set of SRs with their scope flags.
double mean_self_information(const std::vector<std::string>& sr_texts,
                             const std::vector<bool>& in_scope,
                             const LmScorer& scorer);

/// BLEU with modified n-gram precisions up to max_n (uniform weights),
/// brevity penalty, zero precisions floored at smoothing_epsilon.
/// Orders with no candidate n-grams are excluded from the mean.
double bleu(const std::string& candidate,
            const std::vector<std::string>& references, int max_n = 4,
            double smoothing_epsilon = 1e-9);

struct SelfBleuItem {
  std::string fr_key;
  std::string selected_sr;
  bool in_scope = true;
  double value = 0.0;  // 1 for out-of-scope items
};

struct SelfBleuReport {
  std::vector<SelfBleuItem> items;
  double mean = 0.0;
  std::vector<std::string> warnings;  // FRs excluded for having no SRs
};

/// One seeded random representative SR per FR; each item is BLEU
/// against all other selected SRs (1 when out of scope).
SelfBleuReport self_bleu(
    const std::map<std::string, std::vector<std::string>>& per_fr_srs,
    const std::map<std::string, bool>& in_scope, std::uint64_t seed);

/// Unique tokens across in-scope SRs; out-of-scope vocabulary omitted.
std::size_t vocabulary_size(const std::vector<std::string>& sr_texts,
                            const std::vector<bool>& in_scope);

struct LabeledPair {
  std::string project;
  bool relevant = false;
};

struct AccuracyReport {
  std::map<std::string, double> per_project;
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  double micro_average = 0.0;
};

/// accuracy = relevant / total per project; micro-average overall.
AccuracyReport retrieval_accuracy(const std::vector<LabeledPair>& decisions);

}  // namespace secreq
