#include "secreq/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "secreq/errors.hpp"

namespace secreq {

using nlohmann::json;

double score(const TokenEmbeddings& fr_emb, const TokenEmbeddings& vr_emb,
             std::span<const double> vr_weights) {
  if (vr_emb.rows == 0)
    throw ValidationError("score: empty document embeddings");
  if (vr_weights.size() != vr_emb.rows)
    throw ValidationError("score: weight vector length mismatch");
  if (fr_emb.rows == 0)
    throw ValidationError("score: empty query embeddings");

  double total = 0.0;
  for (std::size_t i = 0; i < fr_emb.rows; ++i) {
    auto q = fr_emb.row(i);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < vr_emb.rows; ++j) {
      double weighted = vr_weights[j] * cosine(q, vr_emb.row(j));
      if (weighted > best) best = weighted;  // ties keep the lowest j
    }
    total += best;
  }
  return total;
}

std::string corpus_hash(const VrCorpus& corpus) {
  std::string blob = corpus.source_version;
  for (const auto& rec : corpus.records) {
    blob += '\x1f';
    blob += rec.id;
    blob += '\x1e';
    blob += rec.composed_text;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(blob)));
  return buf;
}

VrIndex build_index(const VrCorpus& corpus, const EmbeddingProvider& provider,
                    const TokenWeightTable& table,
                    const std::string& built_at) {
  if (corpus.records.empty())
    throw ValidationError("build_index: empty corpus");
  VrIndex index;
  index.weight_table = table;
  index.manifest.provider_id = provider.provider_id();
  index.manifest.dim = provider.dim();
  index.manifest.corpus_hash = corpus_hash(corpus);
  index.manifest.weight_table_version = table.version;
  index.manifest.built_at = built_at;
  index.entries.reserve(corpus.records.size());
  for (const auto& rec : corpus.records) {  // records already ordered by id
    VrIndexEntry entry;
    entry.id = rec.id;
    entry.tokens = tokenize(rec.composed_text);
    if (entry.tokens.empty())
      throw ValidationError("build_index: VR " + rec.id +
                            " tokenizes to nothing");
    entry.embeddings = provider.embed(entry.tokens);
    entry.weights = lookup_weights(table, entry.tokens);
    index.entries.push_back(std::move(entry));
  }
  return index;
}

namespace {

std::vector<RetrievalResult> rank(const VrIndex& index,
                                  const TokenEmbeddings& fr_emb,
                                  std::size_t k) {
  std::vector<RetrievalResult> results;
  results.reserve(index.entries.size());
  for (const auto& entry : index.entries)
    results.push_back({entry.id, score(fr_emb, entry.embeddings,
                                       entry.weights),
                       0});
  std::stable_sort(results.begin(), results.end(),
                   [](const RetrievalResult& a, const RetrievalResult& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return vr_id_less(a.vr_id, b.vr_id);
                   });
  if (results.size() > k) results.resize(k);
  for (std::size_t i = 0; i < results.size(); ++i)
    results[i].rank = static_cast<int>(i) + 1;
  return results;
}

}  // namespace

std::vector<RetrievalResult> retrieve_top_k(const VrIndex& index,
                                            const EmbeddingProvider& provider,
                                            const std::string& fr_text,
                                            std::size_t k) {
  if (k == 0 || k > index.size())
    throw ValidationError("retrieve_top_k: k must be in [1, corpus size]");
  if (provider.provider_id() != index.manifest.provider_id)
    throw ValidationError("retrieve_top_k: provider '" +
                          provider.provider_id() +
                          "' does not match index manifest '" +
                          index.manifest.provider_id + "'");
  auto seq = tokenize(fr_text);
  if (seq.empty())
    throw ValidationError("retrieve_top_k: query tokenizes to nothing");
  return rank(index, provider.embed(seq), k);
}

std::vector<RetrievalResult> retrieve_all(const VrIndex& index,
                                          const EmbeddingProvider& provider,
                                          const std::string& fr_text) {
  return retrieve_top_k(index, provider, fr_text, index.size());
}

// ---- training ----

EncodedPair encode_pair(const TrainPair& pair, const VrCorpus& corpus,
                        const EmbeddingProvider& provider) {
  const VrRecord* vr = corpus.find(pair.vr_id);
  if (vr == nullptr)
    throw ValidationError("encode_pair: unknown VR id " + pair.vr_id);
  EncodedPair enc;
  auto fr_seq = tokenize(pair.fr_text);
  if (fr_seq.empty())
    throw ValidationError("encode_pair: FR tokenizes to nothing");
  enc.fr_emb = provider.embed(fr_seq);
  enc.vr_id = pair.vr_id;
  enc.vr_tokens = tokenize(vr->composed_text);
  enc.vr_emb = provider.embed(enc.vr_tokens);
  return enc;
}

namespace {

// Score one FR against one VR and accumulate d(score)/d(w_token) into
// `grad_out` scaled by `factor`. The argmax matches the forward pass
// (lowest j on ties).
double score_with_grad(const TokenEmbeddings& fr_emb,
                       const TokenSequence& vr_tokens,
                       const TokenEmbeddings& vr_emb,
                       const TokenWeightTable& table,
                       std::map<std::string, double>* grad_out,
                       double factor) {
  std::vector<double> weights(vr_emb.rows);
  for (std::size_t j = 0; j < vr_emb.rows; ++j)
    weights[j] = table.lookup(vr_tokens.tokens[j]);

  double total = 0.0;
  for (std::size_t i = 0; i < fr_emb.rows; ++i) {
    auto q = fr_emb.row(i);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    double best_cos = 0.0;
    for (std::size_t j = 0; j < vr_emb.rows; ++j) {
      double c = cosine(q, vr_emb.row(j));
      double weighted = weights[j] * c;
      if (weighted > best) {
        best = weighted;
        best_j = j;
        best_cos = c;
      }
    }
    total += best;
    if (grad_out != nullptr)
      (*grad_out)[vr_tokens.tokens[best_j]] += factor * best_cos;
  }
  return total;
}

}  // namespace

LossAndGrad loss_and_grad(std::span<const EncodedPair> batch,
                          const TokenWeightTable& table, double temperature) {
  if (batch.empty()) throw ValidationError("loss_and_grad: empty batch");

  // distinct VRs of the batch form the softmax candidates
  std::vector<std::size_t> candidates;  // indices into batch
  std::map<std::string, std::size_t> vr_to_candidate;
  LossAndGrad out;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (vr_to_candidate.emplace(batch[b].vr_id, candidates.size()).second)
      candidates.push_back(b);
    else
      out.had_duplicates = true;
  }

  std::size_t n_cand = candidates.size();
  for (const auto& pair : batch) {
    std::size_t positive = vr_to_candidate.at(pair.vr_id);

    // forward logits and per-candidate score gradients for this FR
    std::vector<double> logits(n_cand);
    std::vector<std::map<std::string, double>> score_grads(n_cand);
    for (std::size_t c = 0; c < n_cand; ++c) {
      const EncodedPair& cand = batch[candidates[c]];
      logits[c] = score_with_grad(pair.fr_emb, cand.vr_tokens, cand.vr_emb,
                                  table, &score_grads[c], 1.0) /
                  temperature;
    }
    double max_logit = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - max_logit);
    double log_denom = std::log(denom) + max_logit;
    out.loss += (log_denom - logits[positive]) /
                static_cast<double>(batch.size());

    for (std::size_t c = 0; c < n_cand; ++c) {
      double softmax = std::exp(logits[c] - log_denom);
      double coeff = (softmax - (c == positive ? 1.0 : 0.0)) /
                     (temperature * static_cast<double>(batch.size()));
      for (const auto& [token, g] : score_grads[c])
        out.grad[token] += coeff * g;
    }
  }
  return out;
}

std::pair<TokenWeightTable, TrainReport> train_weights(
    const std::vector<TrainPair>& train, const std::vector<TrainPair>& val,
    const VrCorpus& corpus, const EmbeddingProvider& provider,
    const TokenWeightTable& init, const TrainConfig& config) {
  if (config.learning_rate < 0.0)
    throw ConfigError("train_weights: learning_rate must be >= 0");
  if (config.batch_size < 2)
    throw ConfigError("train_weights: batch_size must be >= 2");
  if (train.empty()) throw ValidationError("train_weights: no training pairs");

  std::vector<EncodedPair> encoded;
  encoded.reserve(train.size());
  for (const auto& pair : train)
    encoded.push_back(encode_pair(pair, corpus, provider));

  TokenWeightTable table = init;
  TrainReport report;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);

  bool duplicate_warned = false;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));
      if (end - start < 2) continue;  // softmax needs at least one negative
      std::vector<EncodedPair> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(encoded[order[i]]);

      auto lg = loss_and_grad(batch, table, config.temperature);
      if (lg.had_duplicates && !duplicate_warned) {
        report.warnings.push_back(
            "batch contained duplicate VRs; collapsed for the softmax "
            "denominator");
        duplicate_warned = true;
      }
      for (const auto& [token, g] : lg.grad) {
        double w = table.lookup(token) - config.learning_rate * g;
        table.weights[token] = std::clamp(w, kWeightFloor, kWeightCeil);
      }
      epoch_loss += lg.loss;
      ++batches;
    }
    report.epoch_loss.push_back(batches > 0 ? epoch_loss / batches : 0.0);
  }

  table.version = init.version + 1;
  table.trained = true;
  report.final_table_version = table.version;

  if (!val.empty()) {
    // proxy metric: gold VR in top-5 against the full corpus
    VrIndex index = build_index(corpus, provider, table);
    std::size_t k = std::min<std::size_t>(5, index.size());
    std::size_t hits = 0;
    for (const auto& pair : val) {
      auto results = retrieve_top_k(index, provider, pair.fr_text, k);
      for (const auto& r : results)
        if (r.vr_id == pair.vr_id) {
          ++hits;
          break;
        }
    }
    report.validation_top5_rate =
        static_cast<double>(hits) / static_cast<double>(val.size());
  }
  return {std::move(table), std::move(report)};
}

// ---- persistence ----

void save_index(const VrIndex& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["format_version"] = index.manifest.format_version;
  manifest["provider_id"] = index.manifest.provider_id;
  manifest["dim"] = index.manifest.dim;
  manifest["corpus_hash"] = index.manifest.corpus_hash;
  manifest["weight_table_version"] = index.manifest.weight_table_version;
  manifest["built_at"] = index.manifest.built_at;
  std::ofstream(dir / "manifest.json") << manifest.dump(1) << '\n';

  json offsets = json::object();
  json tokens = json::object();
  std::ofstream bin(dir / "embeddings.bin", std::ios::binary);
  std::size_t row_start = 0;
  for (const auto& entry : index.entries) {
    offsets[entry.id] = {row_start, entry.embeddings.rows};
    tokens[entry.id] = entry.tokens.tokens;
    // little-endian float32 row-major; all supported targets are LE
    bin.write(reinterpret_cast<const char*>(entry.embeddings.data.data()),
              static_cast<std::streamsize>(entry.embeddings.data.size() *
                                           sizeof(float)));
    row_start += entry.embeddings.rows;
  }
  bin.close();
  std::ofstream(dir / "offsets.json") << offsets.dump(1) << '\n';
  std::ofstream(dir / "tokens.json") << tokens.dump(1) << '\n';
  std::ofstream(dir / "weights.json")
      << weight_table_to_json(index.weight_table) << '\n';
}

VrIndex load_index(const std::filesystem::path& dir) {
  auto read_json = [&dir](const char* name) {
    std::ifstream in(dir / name);
    if (!in)
      throw ParseError("index load error: missing " + (dir / name).string());
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ParseError("index load error in " + std::string(name) + ": " +
                       e.what());
    }
    return doc;
  };

  json manifest = read_json("manifest.json");
  VrIndex index;
  index.manifest.format_version = manifest.at("format_version").get<int>();
  if (index.manifest.format_version != 1)
    throw ValidationError("index load error: unsupported format version " +
                          std::to_string(index.manifest.format_version));
  index.manifest.provider_id = manifest.at("provider_id").get<std::string>();
  index.manifest.dim = manifest.at("dim").get<std::size_t>();
  index.manifest.corpus_hash = manifest.at("corpus_hash").get<std::string>();
  index.manifest.weight_table_version =
      manifest.at("weight_table_version").get<int>();
  index.manifest.built_at = manifest.at("built_at").get<std::string>();

  {
    std::ifstream in(dir / "weights.json");
    if (!in)
      throw ParseError("index load error: missing " +
                       (dir / "weights.json").string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    index.weight_table = weight_table_from_json(buffer.str());
  }

  json offsets = read_json("offsets.json");
  json tokens = read_json("tokens.json");

  std::ifstream bin(dir / "embeddings.bin", std::ios::binary);
  if (!bin)
    throw ParseError("index load error: missing " +
                     (dir / "embeddings.bin").string());
  std::vector<float> all;
  {
    bin.seekg(0, std::ios::end);
    auto bytes = static_cast<std::size_t>(bin.tellg());
    if (bytes % sizeof(float) != 0)
      throw ParseError("index load error: embeddings.bin truncated");
    all.resize(bytes / sizeof(float));
    bin.seekg(0);
    bin.read(reinterpret_cast<char*>(all.data()),
             static_cast<std::streamsize>(bytes));
  }

  struct Slot {
    std::string id;
    std::size_t row_start, rows;
  };
  std::vector<Slot> slots;
  for (const auto& [id, span] : offsets.items()) {
    if (!span.is_array() || span.size() != 2)
      throw ParseError("index load error: bad offsets entry for " + id);
    slots.push_back({id, span[0].get<std::size_t>(),
                     span[1].get<std::size_t>()});
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    return vr_id_less(a.id, b.id);
  });

  std::size_t dim = index.manifest.dim;
  for (const auto& slot : slots) {
    if ((slot.row_start + slot.rows) * dim > all.size())
      throw ParseError("index load error: offsets exceed embeddings.bin for " +
                       slot.id);
    VrIndexEntry entry;
    entry.id = slot.id;
    if (!tokens.contains(slot.id))
      throw ParseError("index load error: tokens.json missing " + slot.id);
    for (const auto& t : tokens[slot.id])
      entry.tokens.tokens.push_back(t.get<std::string>());
    if (entry.tokens.size() != slot.rows)
      throw ParseError("index load error: token/row mismatch for " + slot.id);
    entry.embeddings.rows = slot.rows;
    entry.embeddings.dim = dim;
    entry.embeddings.provider_id = index.manifest.provider_id;
    entry.embeddings.data.assign(
        all.begin() + static_cast<std::ptrdiff_t>(slot.row_start * dim),
        all.begin() +
            static_cast<std::ptrdiff_t>((slot.row_start + slot.rows) * dim));
    entry.weights = lookup_weights(index.weight_table, entry.tokens);
    index.entries.push_back(std::move(entry));
  }
  return index;
}

}  // namespace secreq
