#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "secreq/corpus.hpp"
#include "secreq/text.hpp"
#include "secreq/weighting.hpp"

namespace secreq {

/// Weighted late-interaction score: sum over FR tokens of the maximum
/// weighted cosine against the VR tokens. Weights multiply before the
/// max; argmax ties resolve to the lowest VR position.
double score(const TokenEmbeddings& fr_emb, const TokenEmbeddings& vr_emb,
             std::span<const double> vr_weights);

struct RetrievalResult {
  std::string vr_id;
  double score = 0.0;
  int rank = 0;  // 1-based
};

struct IndexManifest {
  int format_version = 1;
  std::string provider_id;
  std::size_t dim = 0;
  std::string corpus_hash;
  int weight_table_version = 0;
  std::string built_at;
};

/// Immutable retrieval index: per-VR token embeddings plus the weight
/// vectors derived from the weight table. Entries are ordered by vr_id.
struct VrIndexEntry {
  std::string id;
  TokenSequence tokens;
  TokenEmbeddings embeddings;
  std::vector<double> weights;
};

struct VrIndex {
  std::vector<VrIndexEntry> entries;
  TokenWeightTable weight_table;
  IndexManifest manifest;

  std::size_t size() const { return entries.size(); }
};

/// Stable hash of corpus contents (ids + composed text), hex encoded.
std::string corpus_hash(const VrCorpus& corpus);

/// Precompute embeddings and weight vectors for every in-scope VR.
/// `built_at` defaults to the epoch so deterministic runs are
/// byte-stable; pass a real timestamp when provenance matters.
VrIndex build_index(const VrCorpus& corpus, const EmbeddingProvider& provider,
                    const TokenWeightTable& table,
                    const std::string& built_at = "1970-01-01T00:00:00Z");

/// Exhaustive top-k scoring. Ties break by ascending vr_id.
std::vector<RetrievalResult> retrieve_top_k(const VrIndex& index,
                                            const EmbeddingProvider& provider,
                                            const std::string& fr_text,
                                            std::size_t k);

/// Full ranking (k = corpus size), used by the synthesis rank filter.
std::vector<RetrievalResult> retrieve_all(const VrIndex& index,
                                          const EmbeddingProvider& provider,
                                          const std::string& fr_text);

// ---- training ----

struct TrainConfig {
  double learning_rate = 6e-7;
  int epochs = 10;
  int batch_size = 16;
  std::uint64_t seed = 1;
  double temperature = 1.0;
  // recorded for a future remote-trainable provider; the encoder here
  // is frozen and this rate is unused
  double encoder_learning_rate = 3e-5;
};

struct TrainPair {
  std::string fr_text;
  std::string vr_id;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double validation_top5_rate = -1.0;  // -1 when no validation pairs
  int final_table_version = 0;
  std::vector<std::string> warnings;
};

/// Encoded training instance (embeddings cached once per text).
struct EncodedPair {
  TokenEmbeddings fr_emb;
  std::string vr_id;
  TokenSequence vr_tokens;
  TokenEmbeddings vr_emb;
};

EncodedPair encode_pair(const TrainPair& pair, const VrCorpus& corpus,
                        const EmbeddingProvider& provider);

/// In-batch softmax cross-entropy over the batch's distinct VRs.
/// Gradient covers only tokens occurring in batch VRs. Duplicate VRs in
/// a batch collapse for the softmax denominator (warning appended).
struct LossAndGrad {
  double loss = 0.0;
  std::map<std::string, double> grad;
  bool had_duplicates = false;
};
LossAndGrad loss_and_grad(std::span<const EncodedPair> batch,
                          const TokenWeightTable& table,
                          double temperature = 1.0);

/// Mini-batch gradient descent on the weight table only. Weights are
/// re-clamped to [0.05, 20] after each step; the returned table carries
/// a bumped version and trained = true.
std::pair<TokenWeightTable, TrainReport> train_weights(
    const std::vector<TrainPair>& train, const std::vector<TrainPair>& val,
    const VrCorpus& corpus, const EmbeddingProvider& provider,
    const TokenWeightTable& init, const TrainConfig& config);

// ---- persistence ----

/// Directory layout: manifest.json, embeddings.bin (LE float32,
/// row-major), offsets.json (vr_id -> [row_start, n]), tokens.json,
/// weights.json. Load/store roundtrip is bit-exact.
void save_index(const VrIndex& index, const std::filesystem::path& dir);
VrIndex load_index(const std::filesystem::path& dir);

}  // namespace secreq
