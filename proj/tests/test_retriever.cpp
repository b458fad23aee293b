#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "secreq/corpus.hpp"
#include "secreq/errors.hpp"
#include "secreq/retriever.hpp"

using namespace secreq;

namespace {

TokenEmbeddings random_unit_rows(std::mt19937_64& rng, std::size_t rows,
                                 std::size_t dim) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  TokenEmbeddings emb;
  emb.rows = rows;
  emb.dim = dim;
  emb.provider_id = "test";
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
      x = uni(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double x : v) emb.data.push_back(static_cast<float>(x / norm));
  }
  return emb;
}

// naive triple-loop oracle for the weighted late-interaction score
double oracle_score(const TokenEmbeddings& fr, const TokenEmbeddings& vr,
                    const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < fr.rows; ++i) {
    double best = -1e300;
    for (std::size_t j = 0; j < vr.rows; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < fr.dim; ++d)
        dot += static_cast<double>(fr.data[i * fr.dim + d]) *
               static_cast<double>(vr.data[j * vr.dim + d]);
      double na = 0.0, nb = 0.0;
      for (std::size_t d = 0; d < fr.dim; ++d) {
        na += static_cast<double>(fr.data[i * fr.dim + d]) *
              static_cast<double>(fr.data[i * fr.dim + d]);
        nb += static_cast<double>(vr.data[j * vr.dim + d]) *
              static_cast<double>(vr.data[j * vr.dim + d]);
      }
      best = std::max(best, w[j] * dot / std::sqrt(na * nb));
    }
    total += best;
  }
  return total;
}

VrCorpus synthetic_corpus(std::mt19937_64& rng, std::size_t n_docs) {
  static const std::vector<std::string> vocab{
      "session",  "token",   "verify", "password", "expire", "channel",
      "encrypt",  "log",     "audit",  "input",    "output", "filter",
      "account",  "access",  "policy", "upload",   "file",   "request"};
  std::string flat = "[";
  for (std::size_t i = 0; i < n_docs; ++i) {
    std::size_t len = 3 + rng() % 5;
    std::string text;
    for (std::size_t t = 0; t < len; ++t) {
      if (t) text += " ";
      text += vocab[rng() % vocab.size()];
    }
    if (i) flat += ",";
    flat += R"({"id": "1.1.)" + std::to_string(i + 1) +
            R"(", "chapter_title": "c", "section_title": "s", "description": ")" +
            text + "\"}";
  }
  flat += "]";
  return ingest_asvs(flat);
}

}  // namespace

TEST_CASE("score matches the naive oracle on random instances") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> wdist(0.05, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t m = 1 + rng() % 8, n = 1 + rng() % 8, d = 2 + rng() % 15;
    auto fr = random_unit_rows(rng, m, d);
    auto vr = random_unit_rows(rng, n, d);
    std::vector<double> w(n);
    for (auto& x : w) x = wdist(rng);
    double expected = oracle_score(fr, vr, w);
    double got = score(fr, vr, w);
    CHECK(std::fabs(got - expected) <=
          1e-9 * std::max(1.0, std::fabs(expected)));
  }
}

TEST_CASE("uniform weights reduce to unweighted MaxSim") {
  std::mt19937_64 rng(7);
  auto fr = random_unit_rows(rng, 5, 8);
  auto vr = random_unit_rows(rng, 6, 8);
  std::vector<double> ones(6, 1.0);
  CHECK(score(fr, vr, ones) ==
        doctest::Approx(oracle_score(fr, vr, ones)).epsilon(1e-12));
}

TEST_CASE("global weight scaling scales scores and preserves ranking") {
  std::mt19937_64 rng(11);
  HashEmbedder provider(16, 5);
  for (int trial = 0; trial < 20; ++trial) {
    auto corpus = synthetic_corpus(rng, 6 + rng() % 6);
    auto uniform = uniform_weight_table();
    TokenWeightTable scaled = uniform;
    double c = 3.5;
    scaled.default_weight = c;

    auto idx1 = build_index(corpus, provider, uniform);
    auto idx2 = build_index(corpus, provider, scaled);
    auto r1 = retrieve_all(idx1, provider, "verify session token expiry");
    auto r2 = retrieve_all(idx2, provider, "verify session token expiry");
    REQUIRE(r1.size() == r2.size());
    for (std::size_t i = 0; i < r1.size(); ++i) {
      CHECK(r1[i].vr_id == r2[i].vr_id);
      CHECK(r2[i].score == doctest::Approx(c * r1[i].score).epsilon(1e-9));
    }
  }
}

TEST_CASE("score ties break by ascending vr id") {
  // two identical documents must rank in id order
  std::string flat = R"([
    {"id": "1.1.10", "chapter_title": "c", "section_title": "s",
     "description": "verify session expiry handling"},
    {"id": "1.1.2", "chapter_title": "c", "section_title": "s",
     "description": "verify session expiry handling"}
  ])";
  auto corpus = ingest_asvs(flat);
  HashEmbedder provider(16, 1);
  auto index = build_index(corpus, provider, uniform_weight_table());
  auto results = retrieve_all(index, provider, "session expiry");
  REQUIRE(results.size() == 2);
  CHECK(results[0].vr_id == "1.1.2");
  CHECK(results[1].vr_id == "1.1.10");
  CHECK(results[0].rank == 1);
  CHECK(results[1].rank == 2);
}

TEST_CASE("retrieval guards its preconditions") {
  std::mt19937_64 rng(3);
  auto corpus = synthetic_corpus(rng, 4);
  HashEmbedder provider(16, 1);
  auto index = build_index(corpus, provider, uniform_weight_table());
  CHECK_THROWS_AS(retrieve_top_k(index, provider, "session", 0),
                  ValidationError);
  CHECK_THROWS_AS(retrieve_top_k(index, provider, "session", 5),
                  ValidationError);
  CHECK_THROWS_AS(retrieve_top_k(index, provider, "---", 2), ValidationError);
  HashEmbedder other(16, 99);
  CHECK_THROWS_AS(retrieve_top_k(index, other, "session", 2),
                  ValidationError);
}

TEST_CASE("index save/load roundtrip reproduces scores bit-exactly") {
  std::mt19937_64 rng(19);
  auto corpus = synthetic_corpus(rng, 8);
  HashEmbedder provider(24, 2);
  auto table = init_weight_table(compute_tf_idf(corpus));
  auto index = build_index(corpus, provider, table);

  auto dir = std::filesystem::temp_directory_path() / "secreq_index_test";
  std::filesystem::remove_all(dir);
  save_index(index, dir);
  auto loaded = load_index(dir);

  CHECK(loaded.manifest.corpus_hash == index.manifest.corpus_hash);
  CHECK(loaded.manifest.weight_table_version ==
        index.manifest.weight_table_version);
  auto before = retrieve_all(index, provider, "verify token access policy");
  auto after = retrieve_all(loaded, provider, "verify token access policy");
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(before[i].vr_id == after[i].vr_id);
    CHECK(before[i].score == after[i].score);  // bit-exact
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupted index artifacts produce structured load errors") {
  std::mt19937_64 rng(23);
  auto corpus = synthetic_corpus(rng, 4);
  HashEmbedder provider(16, 2);
  auto index = build_index(corpus, provider, uniform_weight_table());
  auto dir = std::filesystem::temp_directory_path() / "secreq_index_corrupt";
  std::filesystem::remove_all(dir);
  save_index(index, dir);

  SUBCASE("truncated embeddings") {
    std::filesystem::resize_file(dir / "embeddings.bin", 10);
    CHECK_THROWS_AS(load_index(dir), ParseError);
  }
  SUBCASE("corrupt offsets") {
    std::ofstream(dir / "offsets.json") << "{broken";
    CHECK_THROWS_AS(load_index(dir), ParseError);
  }
  SUBCASE("missing manifest") {
    std::filesystem::remove(dir / "manifest.json");
    CHECK_THROWS_AS(load_index(dir), ParseError);
  }
  std::filesystem::remove_all(dir);
}

namespace {

// The loss is piecewise-smooth: at an argmax tie between two different
// token types, central differences straddle a kink and are meaningless.
// Batches whose top-two per-row scores (across distinct token types)
// sit closer than `margin` are rejected and redrawn.
bool batch_has_near_tie(const std::vector<EncodedPair>& batch,
                        const TokenWeightTable& table, double margin) {
  for (const auto& fr_pair : batch) {
    for (const auto& vr_pair : batch) {
      const auto& fr = fr_pair.fr_emb;
      const auto& vr = vr_pair.vr_emb;
      const auto& tokens = vr_pair.vr_tokens.tokens;
      for (std::size_t i = 0; i < fr.rows; ++i) {
        double best = -1e300;
        std::string best_token;
        for (std::size_t j = 0; j < vr.rows; ++j) {
          double dot = 0.0;
          for (std::size_t d = 0; d < vr.dim; ++d)
            dot += static_cast<double>(fr.data[i * fr.dim + d]) *
                   static_cast<double>(vr.data[j * vr.dim + d]);
          double v = table.lookup(tokens[j]) * dot;
          if (v > best) {
            best = v;
            best_token = tokens[j];
          }
        }
        for (std::size_t j = 0; j < vr.rows; ++j) {
          if (tokens[j] == best_token) continue;
          double dot = 0.0;
          for (std::size_t d = 0; d < vr.dim; ++d)
            dot += static_cast<double>(fr.data[i * fr.dim + d]) *
                   static_cast<double>(vr.data[j * vr.dim + d]);
          if (best - table.lookup(tokens[j]) * dot < margin) return true;
        }
      }
    }
  }
  return false;
}

}  // namespace

TEST_CASE("analytic gradient matches central finite differences") {
  std::mt19937_64 rng(31);
  HashEmbedder provider(16, 7);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto corpus = synthetic_corpus(rng, 5 + rng() % 4);
    auto table = init_weight_table(compute_tf_idf(corpus));

    std::vector<EncodedPair> batch;
    for (std::size_t b = 0; b < 3 + rng() % 3; ++b) {
      const auto& vr = corpus.records[rng() % corpus.records.size()];
      // FR drawn from the VR's own tokens plus noise
      std::string fr_text = "verify " + vr.composed_text;
      batch.push_back(encode_pair({fr_text, vr.id}, corpus, provider));
    }
    if (batch_has_near_tie(batch, table, 1e-2)) continue;
    auto lg = loss_and_grad(batch, table);

    for (const auto& [token, analytic] : lg.grad) {
      const double h = 1e-4;
      auto plus = table, minus = table;
      plus.weights[token] = table.lookup(token) + h;
      minus.weights[token] = table.lookup(token) - h;
      double fd = (loss_and_grad(batch, plus).loss -
                   loss_and_grad(batch, minus).loss) /
                  (2.0 * h);
      double scale = std::max({1e-6, std::fabs(analytic), std::fabs(fd)});
      CHECK(std::fabs(analytic - fd) / scale <= 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("zero learning rate leaves the weight table unchanged") {
  std::mt19937_64 rng(37);
  auto corpus = synthetic_corpus(rng, 6);
  HashEmbedder provider(16, 7);
  auto init = init_weight_table(compute_tf_idf(corpus));

  std::vector<TrainPair> pairs;
  for (const auto& rec : corpus.records)
    pairs.push_back({"verify " + rec.composed_text, rec.id});
  TrainConfig config;
  config.learning_rate = 0.0;
  config.epochs = 2;
  config.batch_size = 3;
  auto [table, report] = train_weights(pairs, {}, corpus, provider, init,
                                       config);
  for (const auto& [token, w] : init.weights)
    CHECK(table.weights.at(token) == w);
  CHECK(table.version == init.version + 1);
  CHECK(table.trained);
  CHECK(report.epoch_loss.size() == 2);
}

TEST_CASE("training moves a discriminative token's weight up") {
  // corpus where "session" appears only in the always-positive VR
  std::string flat = R"([
    {"id": "1.1.1", "chapter_title": "c", "section_title": "s",
     "description": "session lifetime rules enforced"},
    {"id": "1.1.2", "chapter_title": "c", "section_title": "s",
     "description": "cryptographic storage module boundary"},
    {"id": "1.1.3", "chapter_title": "c", "section_title": "s",
     "description": "input validation pipeline stages"}
  ])";
  auto corpus = ingest_asvs(flat);
  HashEmbedder provider(16, 3);
  auto init = uniform_weight_table();
  init.weights["session"] = 1.0;
  init.weights["cryptographic"] = 1.0;

  std::vector<TrainPair> pairs;
  for (int i = 0; i < 12; ++i)
    pairs.push_back({"the user session must stay alive", "1.1.1"});
  for (int i = 0; i < 6; ++i)
    pairs.push_back({"validate every input field", "1.1.3"});

  TrainConfig config;
  config.learning_rate = 1e-2;
  config.epochs = 5;
  config.batch_size = 6;
  auto [table, report] =
      train_weights(pairs, {}, corpus, provider, init, config);
  CHECK(table.weights.at("session") > 1.0);
  CHECK(table.weights.at("cryptographic") <= 1.0);
}

TEST_CASE("duplicate VRs in a batch collapse with a warning") {
  std::mt19937_64 rng(41);
  auto corpus = synthetic_corpus(rng, 3);
  HashEmbedder provider(16, 7);
  std::vector<EncodedPair> batch;
  batch.push_back(encode_pair({"verify alpha", corpus.records[0].id}, corpus,
                              provider));
  batch.push_back(encode_pair({"verify beta", corpus.records[0].id}, corpus,
                              provider));
  batch.push_back(encode_pair({"verify gamma", corpus.records[1].id}, corpus,
                              provider));
  auto lg = loss_and_grad(batch, uniform_weight_table());
  CHECK(lg.had_duplicates);
  CHECK(lg.loss > 0.0);
}

TEST_CASE("training configuration is validated") {
  std::mt19937_64 rng(43);
  auto corpus = synthetic_corpus(rng, 3);
  HashEmbedder provider(16, 7);
  auto init = uniform_weight_table();
  std::vector<TrainPair> pairs{{"verify alpha", corpus.records[0].id},
                               {"verify beta", corpus.records[1].id}};
  TrainConfig bad;
  bad.learning_rate = -1.0;
  CHECK_THROWS_AS(train_weights(pairs, {}, corpus, provider, init, bad),
                  ConfigError);
  bad = TrainConfig{};
  bad.batch_size = 1;
  CHECK_THROWS_AS(train_weights(pairs, {}, corpus, provider, init, bad),
                  ConfigError);
  CHECK_THROWS_AS(train_weights({}, {}, corpus, provider, init, TrainConfig{}),
                  ValidationError);
  CHECK_THROWS_AS(encode_pair({"text", "9.9.9"}, corpus, provider),
                  ValidationError);
}

TEST_CASE("trained weights stay inside the clamp band") {
  std::mt19937_64 rng(47);
  auto corpus = synthetic_corpus(rng, 5);
  HashEmbedder provider(16, 7);
  std::vector<TrainPair> pairs;
  for (const auto& rec : corpus.records)
    pairs.push_back({rec.composed_text, rec.id});
  TrainConfig config;
  config.learning_rate = 100.0;  // deliberately huge to hit the clamps
  config.epochs = 3;
  config.batch_size = 2;
  auto [table, report] = train_weights(pairs, pairs, corpus, provider,
                                       uniform_weight_table(), config);
  for (const auto& [token, w] : table.weights) {
    CHECK(w >= kWeightFloor);
    CHECK(w <= kWeightCeil);
  }
  CHECK(report.validation_top5_rate >= 0.0);
  CHECK(report.validation_top5_rate <= 1.0);
}
