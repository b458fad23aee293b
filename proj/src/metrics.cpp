#include "secreq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "secreq/errors.hpp"
#include "secreq/text.hpp"

namespace secreq {

namespace {

std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i,
                                      tokens.begin() + i + n)];
  return counts;
}

}  // namespace

double self_information(const std::string& sr_text, const LmScorer& scorer,
                        bool in_scope) {
  if (!in_scope) return 0.0;
  double sum_ln = 0.0;
  for (const auto& [token, lp] : scorer.token_logprobs(sr_text)) {
    if (lp > 0.0)
      throw ValidationError("self_information: positive log-probability for '" +
                            token + "'");
    sum_ln += lp;
  }
  return -sum_ln / std::log(2.0);
}

double mean_self_information(const std::vector<std::string>& sr_texts,
                             const std::vector<bool>& in_scope,
                             const LmScorer& scorer) {
  if (sr_texts.size() != in_scope.size())
    throw ValidationError("mean_self_information: size mismatch");
  if (sr_texts.empty())
    throw ValidationError("mean_self_information: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < sr_texts.size(); ++i)
    sum += self_information(sr_texts[i], scorer, in_scope[i]);
  return sum / static_cast<double>(sr_texts.size());
}

double bleu(const std::string& candidate,
            const std::vector<std::string>& references, int max_n,
            double smoothing_epsilon) {
  if (max_n < 1) throw ValidationError("bleu: max_n must be >= 1");
  if (references.empty()) throw ValidationError("bleu: no references");

  auto cand = tokenize(candidate).tokens;
  std::vector<std::vector<std::string>> refs;
  refs.reserve(references.size());
  for (const auto& ref : references) refs.push_back(tokenize(ref).tokens);
  if (cand.empty()) return 0.0;

  double log_precision_sum = 0.0;
  int orders_used = 0;
  for (int n = 1; n <= max_n; ++n) {
    auto cand_counts = ngram_counts(cand, n);
    if (cand_counts.empty()) continue;  // order excluded from the mean
    std::map<std::vector<std::string>, int> max_ref;
    for (const auto& ref : refs)
      for (const auto& [gram, count] : ngram_counts(ref, n))
        max_ref[gram] = std::max(max_ref[gram], count);
    long long clipped = 0, total = 0;
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(count, it->second);
    }
    double precision =
        static_cast<double>(clipped) / static_cast<double>(total);
    if (precision <= 0.0) precision = smoothing_epsilon;
    log_precision_sum += std::log(precision);
    ++orders_used;
  }
  if (orders_used == 0) return 0.0;

  // brevity penalty against the closest reference length (ties -> shorter)
  std::size_t c = cand.size();
  std::size_t best_r = refs[0].size();
  for (const auto& ref : refs) {
    auto r = ref.size();
    auto diff = r > c ? r - c : c - r;
    auto best_diff = best_r > c ? best_r - c : c - best_r;
    if (diff < best_diff || (diff == best_diff && r < best_r)) best_r = r;
  }
  double bp = c >= best_r
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(best_r) /
                                       static_cast<double>(c));
  return bp * std::exp(log_precision_sum / orders_used);
}

SelfBleuReport self_bleu(
    const std::map<std::string, std::vector<std::string>>& per_fr_srs,
    const std::map<std::string, bool>& in_scope, std::uint64_t seed) {
  SelfBleuReport report;

  // one seeded representative per FR, keyed deterministically by the
  // FR key so map order does not depend on insertion history
  std::vector<std::pair<std::string, std::string>> selected;  // fr -> sr
  for (const auto& [fr_key, srs] : per_fr_srs) {
    if (srs.empty()) {
      report.warnings.push_back("FR " + fr_key + " has no SRs; excluded");
      continue;
    }
    std::uint64_t state = fnv1a64(fr_key) ^ seed;
    std::size_t pick = splitmix64(state) % srs.size();
    selected.emplace_back(fr_key, srs[pick]);
  }
  if (selected.size() < 2)
    throw ValidationError("self_bleu: need at least 2 FRs with SRs");

  for (std::size_t i = 0; i < selected.size(); ++i) {
    SelfBleuItem item;
    item.fr_key = selected[i].first;
    item.selected_sr = selected[i].second;
    auto it = in_scope.find(item.fr_key);
    item.in_scope = it == in_scope.end() ? true : it->second;
    if (!item.in_scope) {
      item.value = 1.0;
    } else {
      std::vector<std::string> others;
      for (std::size_t j = 0; j < selected.size(); ++j)
        if (j != i) others.push_back(selected[j].second);
      item.value = bleu(item.selected_sr, others);
    }
    report.mean += item.value;
    report.items.push_back(std::move(item));
  }
  report.mean /= static_cast<double>(report.items.size());
  return report;
}

std::size_t vocabulary_size(const std::vector<std::string>& sr_texts,
                            const std::vector<bool>& in_scope) {
  if (sr_texts.size() != in_scope.size())
    throw ValidationError("vocabulary_size: size mismatch");
  std::set<std::string> vocab;
  for (std::size_t i = 0; i < sr_texts.size(); ++i) {
    if (!in_scope[i]) continue;
    auto seq = tokenize(sr_texts[i]);
    vocab.insert(seq.tokens.begin(), seq.tokens.end());
  }
  return vocab.size();
}

AccuracyReport retrieval_accuracy(const std::vector<LabeledPair>& decisions) {
  if (decisions.empty())
    throw ValidationError("retrieval_accuracy: no labeled pairs");
  AccuracyReport report;
  std::size_t relevant_total = 0;
  for (const auto& pair : decisions) {
    auto& [relevant, total] = report.counts[pair.project];
    ++total;
    if (pair.relevant) {
      ++relevant;
      ++relevant_total;
    }
  }
  for (const auto& [project, counts] : report.counts)
    report.per_project[project] = static_cast<double>(counts.first) /
                                  static_cast<double>(counts.second);
  report.micro_average = static_cast<double>(relevant_total) /
                         static_cast<double>(decisions.size());
  return report;
}

}  // namespace secreq
