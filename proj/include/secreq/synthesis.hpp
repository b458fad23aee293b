#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "secreq/corpus.hpp"
#include "secreq/llm.hpp"
#include "secreq/retriever.hpp"

namespace secreq {

struct PromptExemplar {
  std::string vr;
  std::string fr;
  std::string reason;
};

/// Template asset for synthesizing FRs from a VR: an instruction, one
/// good exemplar and exactly three bad exemplars covering the known
/// failure categories.
struct SynthesisTemplate {
  std::string template_id;
  std::string instruction;  // "{count}" slot
  PromptExemplar good_example;
  std::vector<PromptExemplar> bad_examples;  // exactly 3

  static SynthesisTemplate from_file(const std::filesystem::path& path);
  void validate() const;
};

struct SynthesisPrompt {
  std::string template_id;
  std::string vr_id;
  int requested_count = 0;
  std::string text;  // fully rendered user message
};

SynthesisPrompt build_synthesis_prompt(const VrRecord& vr,
                                       const SynthesisTemplate& tmpl,
                                       int count);

struct CandidatePair {
  std::string fr_text;
  std::string vr_id;
  std::string provenance = "synthetic";  // synthetic | manual
  std::string batch_id;
};

/// Parse a model response as a numbered, dashed, or one-per-line list.
/// Throws ParseError (raw text in the message) when no list structure
/// is recognizable.
std::vector<std::string> parse_requirement_list(const std::string& response);

struct SynthesisOutcome {
  std::vector<CandidatePair> pairs;
  std::vector<std::string> warnings;  // e.g. shortfall vs requested count
};

SynthesisOutcome synthesize_frs(const VrRecord& vr, int count,
                                ChatClient& gateway,
                                const SynthesisTemplate& tmpl,
                                const std::string& model_id = "chat-default");

struct FilterDecision {
  std::string fr_text;
  std::string vr_id;
  int rank = 0;           // 0 when the FR tokenized empty
  int threshold_rank = 0;
  bool accepted = false;
  std::string reason;  // set when rejected without a rank
};

/// Rank every pair's FR against the full zero-shot index; accept iff
/// the pair's VR ranks within ceil(fraction * N).
std::vector<FilterDecision> rank_filter(
    const std::vector<CandidatePair>& pairs, const VrIndex& zero_shot_index,
    const EmbeddingProvider& provider, double fraction);

/// Seeded shuffle then split; validation size = floor(val_fraction * n).
/// Refuses fewer than 10 pairs.
std::pair<std::vector<CandidatePair>, std::vector<CandidatePair>>
split_train_val(const std::vector<CandidatePair>& pairs, double train_fraction,
                double val_fraction, std::uint64_t seed);

/// JSON-lines persistence of decisions:
/// {fr_text, vr_id, provenance, accepted, rank, threshold_rank}.
void save_filter_decisions(const std::vector<FilterDecision>& decisions,
                           const std::vector<CandidatePair>& pairs,
                           const std::filesystem::path& path);

}  // namespace secreq
