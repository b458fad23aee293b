#include "secreq/text.hpp"

#include <cctype>
#include <cmath>

#include "secreq/errors.hpp"

namespace secreq {

TokenSequence tokenize(std::string_view text) {
  TokenSequence seq;
  seq.source.assign(text);
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      seq.tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) seq.tokens.push_back(std::move(current));
  return seq;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ < 8) throw ConfigError("HashEmbedder: dim must be >= 8");
  provider_id_ =
      "hash-v1/d" + std::to_string(dim_) + "/s" + std::to_string(seed_);
}

std::vector<float> HashEmbedder::embed_token(std::string_view token) const {
  // splitmix64 stream seeded by (token hash xor seed); components
  // uniform in [-1, 1), then normalized in double precision.
  std::uint64_t state = fnv1a64(token) ^ seed_;
  std::vector<double> v(dim_);
  double norm_sq = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) {
    std::uint64_t u = splitmix64(state);
    v[k] = static_cast<double>(u >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    norm_sq += v[k] * v[k];
  }
  double inv = 1.0 / std::sqrt(norm_sq);
  std::vector<float> out(dim_);
  for (std::size_t k = 0; k < dim_; ++k)
    out[k] = static_cast<float>(v[k] * inv);
  return out;
}

TokenEmbeddings HashEmbedder::embed(const TokenSequence& seq) const {
  if (seq.empty())
    throw ValidationError("embed: token sequence must be non-empty");
  TokenEmbeddings emb;
  emb.rows = seq.size();
  emb.dim = dim_;
  emb.provider_id = provider_id_;
  emb.data.reserve(emb.rows * dim_);
  for (const auto& token : seq.tokens) {
    auto row = embed_token(token);
    emb.data.insert(emb.data.end(), row.begin(), row.end());
  }
  return emb;
}

}  // namespace secreq
