#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "secreq/corpus.hpp"
#include "secreq/llm.hpp"
#include "secreq/retriever.hpp"

namespace secreq {

/// Template asset for gated SR generation: instruction, the sentinel
/// line, one relevant exemplar (with its SR) and one irrelevant
/// exemplar (answered by the sentinel).
struct GenerationTemplate {
  std::string template_id;
  std::string instruction;  // "{sentinel}" slot
  std::string sentinel = "NOT_APPLICABLE";
  struct Relevant {
    std::string fr, vr, sr;
  } relevant_example;
  struct Irrelevant {
    std::string fr, vr;
  } irrelevant_example;

  static GenerationTemplate from_file(const std::filesystem::path& path);
  void validate() const;
};

struct GenerationPrompt {
  std::string template_id;
  std::string fr_id;
  std::string vr_id;
  std::string text;  // fully rendered user message
};

GenerationPrompt build_generation_prompt(const FrRecord& fr,
                                         const VrRecord& vr,
                                         const GenerationTemplate& tmpl);

struct SrRecord {
  std::string text;  // empty iff gated
  std::string fr_id;
  std::string vr_id;
  std::string project;
  bool gated = false;
  std::string raw_response;
};

struct SrRunManifest {
  std::string model_id;
  std::int64_t seed = 0;
  std::string index_corpus_hash;
  int weight_table_version = 0;
  int k = 0;
};

struct SrSet {
  std::string project;
  std::vector<SrRecord> records;
  SrRunManifest manifest;
  std::size_t attempted = 0;
  std::size_t generated = 0;
  std::size_t gated = 0;
  std::vector<std::string> failures;  // "<fr_id>/<vr_id>: <error>"
};

/// Gate on the exact sentinel line (trimmed, case-sensitive); anything
/// else becomes the SR text. An empty response is a generation error,
/// distinct from gating.
SrRecord generate_sr(const FrRecord& fr, const VrRecord& vr,
                     ChatClient& gateway, const GenerationTemplate& tmpl,
                     const std::string& model_id = "chat-default");

/// For each FR retrieve top-k VRs and attempt one SR per pair.
/// Per-pair gateway failures land in the failure ledger; the run
/// completes. attempted = generated + gated + failures, exactly.
SrSet derive_srs(const FrSet& frs, const VrIndex& index,
                 const EmbeddingProvider& provider, const VrCorpus& corpus,
                 std::size_t k, ChatClient& gateway,
                 const GenerationTemplate& tmpl,
                 const std::string& model_id = "chat-default",
                 std::int64_t seed = 0);

struct DuplicateGroup {
  std::vector<std::size_t> members;  // indices into SrSet.records
  std::size_t representative = 0;
  double min_similarity = 1.0;  // lowest member-vs-representative Jaccard
};

/// Group non-gated SRs whose token-set Jaccard similarity with a group
/// representative meets the threshold. Representative = lowest
/// (fr_id, vr_id). Advisory report; records are never deleted.
std::vector<DuplicateGroup> consolidate_duplicates(const SrSet& set,
                                                   double threshold = 0.8);

/// JSON-lines {project, fr_id, vr_id, gated, text, raw_response} plus a
/// manifest JSON alongside (<path>.manifest.json).
void save_sr_set(const SrSet& set, const std::filesystem::path& path);
SrSet load_sr_set(const std::filesystem::path& path);

}  // namespace secreq
