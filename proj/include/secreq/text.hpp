#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace secreq {

/// Lowercased token stream produced by the unified tokenizer.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::string source;

  bool empty() const { return tokens.empty(); }
  std::size_t size() const { return tokens.size(); }
};

/// Lowercase, split on maximal runs of non-alphanumeric characters,
/// drop empty fragments. One tokenizer serves retrieval, TF-IDF and
/// the vocabulary metrics so the weight table stays indexable by a
/// single vocabulary.
TokenSequence tokenize(std::string_view text);

/// Row-major m x d matrix of per-token unit vectors.
struct TokenEmbeddings {
  std::vector<float> data;  // rows * dim, row-major
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::string provider_id;

  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
};

/// Cosine similarity of two unit-ish vectors, accumulated in double.
double cosine(std::span<const float> a, std::span<const float> b);

/// Supplies per-token embeddings. Implementations must be safe for
/// concurrent calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual const std::string& provider_id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual bool deterministic() const = 0;

  /// Embed a non-empty token sequence into unit rows.
  virtual TokenEmbeddings embed(const TokenSequence& seq) const = 0;
};

/// Default non-contextual provider: token -> seeded 64-bit hash ->
/// splitmix64-driven pseudo-random d-vector -> normalized. Bit-for-bit
/// reproducible across platforms at the hash level and within 1e-9
/// after normalization.
class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dim = 64, std::uint64_t seed = 0x5ec7e9u);

  const std::string& provider_id() const override { return provider_id_; }
  std::size_t dim() const override { return dim_; }
  bool deterministic() const override { return true; }
  TokenEmbeddings embed(const TokenSequence& seq) const override;

  /// Single-token embedding, reused row-wise by embed().
  std::vector<float> embed_token(std::string_view token) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::string provider_id_;
};

/// FNV-1a 64-bit hash of a byte string, the documented token hash.
std::uint64_t fnv1a64(std::string_view bytes);

/// splitmix64 step, the documented per-component generator.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace secreq
