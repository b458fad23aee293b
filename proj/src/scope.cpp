#include "secreq/scope.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "secreq/errors.hpp"
#include "secreq/text.hpp"

namespace secreq {

using nlohmann::json;

std::vector<ProjectKeywordSet> load_keyword_config(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open keyword config: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad keyword config: ") + e.what());
  }
  if (!doc.is_object() || doc.empty())
    throw ConfigError("keyword config: expected non-empty object");

  std::vector<ProjectKeywordSet> sets;
  for (const auto& [project, value] : doc.items()) {
    ProjectKeywordSet set;
    set.project = project;
    std::set<std::string> seen;
    for (const auto& kw : value) {
      std::string keyword = kw.get<std::string>();
      std::transform(keyword.begin(), keyword.end(), keyword.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (keyword.empty())
        throw ConfigError("keyword config: empty keyword for " + project);
      if (seen.insert(keyword).second) set.keywords.push_back(keyword);
    }
    if (set.keywords.empty())
      throw ConfigError("keyword config: no keywords for " + project);
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<ScopeDecision> filter_out_of_scope(
    const std::vector<std::string>& sr_texts, const std::string& target,
    const std::vector<ProjectKeywordSet>& keyword_sets) {
  bool target_known = false;
  for (const auto& set : keyword_sets)
    if (set.project == target) target_known = true;
  if (!target_known)
    throw ConfigError("scope filter: unknown target project '" + target + "'");

  std::vector<ScopeDecision> decisions;
  decisions.reserve(sr_texts.size());
  for (std::size_t i = 0; i < sr_texts.size(); ++i) {
    ScopeDecision decision;
    decision.sr_index = i;
    auto seq = tokenize(sr_texts[i]);
    std::set<std::string> tokens(seq.tokens.begin(), seq.tokens.end());
    for (const auto& set : keyword_sets) {
      if (set.project == target) continue;
      for (const auto& keyword : set.keywords) {
        if (tokens.count(keyword)) {
          decision.in_scope = false;
          decision.matched_keyword = keyword;
          decision.matched_foreign_project = set.project;
          break;
        }
      }
      if (!decision.in_scope) break;
    }
    decisions.push_back(std::move(decision));
  }
  return decisions;
}

std::vector<ProperNounFlags> proper_noun_review_flags(
    const std::vector<std::string>& sr_texts,
    const std::set<std::string>& known_vocabulary) {
  std::vector<ProperNounFlags> out;
  for (std::size_t i = 0; i < sr_texts.size(); ++i) {
    const std::string& text = sr_texts[i];
    ProperNounFlags flags;
    flags.sr_index = i;
    std::set<std::string> seen;

    // walk raw words so original case and sentence position are visible
    std::size_t pos = 0;
    bool sentence_start = true;
    while (pos < text.size()) {
      if (!std::isalnum(static_cast<unsigned char>(text[pos]))) {
        if (text[pos] == '.' || text[pos] == '!' || text[pos] == '?')
          sentence_start = true;
        ++pos;
        continue;
      }
      std::size_t end = pos;
      while (end < text.size() &&
             std::isalnum(static_cast<unsigned char>(text[end])))
        ++end;
      std::string word = text.substr(pos, end - pos);
      bool capitalized = std::isupper(static_cast<unsigned char>(word[0]));
      if (capitalized && !sentence_start) {
        std::string lower = word;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (!known_vocabulary.count(lower) && seen.insert(word).second)
          flags.flagged.push_back(word);
      }
      sentence_start = false;
      pos = end;
    }
    if (!flags.flagged.empty()) out.push_back(std::move(flags));
  }
  return out;
}

}  // namespace secreq
