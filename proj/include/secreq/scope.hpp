#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace secreq {

struct ProjectKeywordSet {
  std::string project;
  std::vector<std::string> keywords;  // lowercase, unique
};

/// Keyword config JSON: {project: [keywords]}.
std::vector<ProjectKeywordSet> load_keyword_config(
    const std::filesystem::path& path);

struct ScopeDecision {
  std::size_t sr_index = 0;
  bool in_scope = true;
  std::optional<std::string> matched_keyword;
  std::optional<std::string> matched_foreign_project;
};

/// An SR is out of scope iff it contains (word-boundary, via the
/// unified tokenizer) a keyword of any non-target project. The target
/// project's own keywords never disqualify.
std::vector<ScopeDecision> filter_out_of_scope(
    const std::vector<std::string>& sr_texts, const std::string& target,
    const std::vector<ProjectKeywordSet>& keyword_sets);

struct ProperNounFlags {
  std::size_t sr_index = 0;
  std::vector<std::string> flagged;  // original-case tokens
};

/// Advisory review report: capitalized mid-sentence tokens absent from
/// the known vocabulary. Never changes in_scope.
std::vector<ProperNounFlags> proper_noun_review_flags(
    const std::vector<std::string>& sr_texts,
    const std::set<std::string>& known_vocabulary);

}  // namespace secreq
