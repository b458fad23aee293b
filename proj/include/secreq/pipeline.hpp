#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "secreq/corpus.hpp"
#include "secreq/llm.hpp"
#include "secreq/retriever.hpp"

namespace secreq {

/// Chat backend selection for a run. "http" reads credential fields
/// with ${ENV_VAR} interpolation; mock backends are deterministic.
struct GatewaySpec {
  std::string mode = "mock-synthetic";  // http | mock-script | mock-synthetic | echo
  std::string endpoint;
  std::string credential;
  std::string chat_model_id = "chat-default";
  std::filesystem::path script_path;  // for mock-script
  std::uint64_t mock_seed = 7;
  std::uint64_t gate_modulus = 5;
  int max_in_flight = 4;
};

struct ScorerSpec {
  std::string mode = "uniform";  // uniform | unigram-file
  std::size_t uniform_vocab_size = 65536;
  std::filesystem::path unigram_path;
};

struct RunConfig {
  std::filesystem::path asvs_path;
  std::filesystem::path exclusion_config_path;
  std::map<std::string, std::filesystem::path> fr_datasets;  // project -> file
  std::filesystem::path synthesis_template_path;
  std::filesystem::path generation_template_path;
  std::filesystem::path keyword_config_path;
  std::filesystem::path output_dir;

  std::size_t retrieval_k = 5;
  double filter_fraction = 0.3;
  int synth_count_per_vr = 10;
  TrainConfig train;
  GatewaySpec gateway;
  ScorerSpec scorer;

  std::size_t embed_dim = 64;
  std::uint64_t embed_seed = 0x5ec7e9u;
  std::uint64_t split_seed = 11;
  std::uint64_t self_bleu_seed = 13;
  bool deterministic = true;

  static RunConfig from_file(const std::filesystem::path& path);
  void validate() const;

  /// Stable hash over everything that determines outputs; artifacts are
  /// content-addressed by it so resumption is safe.
  std::string config_hash() const;
};

std::unique_ptr<ChatClient> make_chat_client(const GatewaySpec& spec);
std::unique_ptr<LmScorer> make_scorer(const ScorerSpec& spec);

struct ReportBundle {
  std::filesystem::path run_manifest;
  std::filesystem::path evaluation_report;
  std::vector<std::filesystem::path> sr_sets;
  std::vector<std::filesystem::path> scope_reports;
  std::vector<std::string> failures;
  std::vector<std::string> stages_run;
  std::vector<std::string> stages_skipped;
};

/// Phase I (synthesize -> filter -> split -> train, skipped when a
/// trained table already exists) then Phase II (index -> retrieve ->
/// generate -> scope-filter -> evaluate). Every stage artifact is
/// persisted under output_dir and prior artifacts are never mutated;
/// a rerun resumes from the first missing artifact.
ReportBundle end_to_end(const RunConfig& config);

}  // namespace secreq
