#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "secreq/corpus.hpp"
#include "secreq/errors.hpp"
#include "secreq/weighting.hpp"

using namespace secreq;

namespace {

// two-document corpus with hand-computable statistics
VrCorpus tiny_corpus() {
  std::string flat = R"([
    {"id": "1.1.1", "chapter_title": "alpha", "section_title": "beta",
     "description": "session session token"},
    {"id": "1.1.2", "chapter_title": "alpha", "section_title": "beta",
     "description": "token expiry"}
  ])";
  return ingest_asvs(flat);
}

}  // namespace

TEST_CASE("tf-idf uses count/len and ln(D/df) with no smoothing") {
  auto table = compute_tf_idf(tiny_corpus());
  // doc1 tokens: alpha beta session session token (len 5)
  // doc2 tokens: alpha beta token expiry (len 4)
  CHECK(table.corpus_size == 2);
  CHECK(table.doc_freq.at("session") == 1);
  CHECK(table.doc_freq.at("token") == 2);
  double ln2 = std::log(2.0);
  CHECK(table.entry("session", "1.1.1") ==
        doctest::Approx((2.0 / 5.0) * ln2).epsilon(1e-12));
  CHECK(table.entry("expiry", "1.1.2") ==
        doctest::Approx((1.0 / 4.0) * ln2).epsilon(1e-12));
  // df = D makes idf exactly zero
  CHECK(table.entry("token", "1.1.1") == doctest::Approx(0.0));
  CHECK(table.entry("missing", "1.1.1") == 0.0);
}

TEST_CASE("initial weights rescale to vocabulary mean 1 and clamp") {
  auto table = init_weight_table(compute_tf_idf(tiny_corpus()));
  double sum = 0.0;
  for (const auto& [token, w] : table.weights) {
    CHECK(w >= kWeightFloor);
    CHECK(w <= kWeightCeil);
    sum += w;
  }
  // tokens with idf 0 get clamped up to the floor, so the mean can sit
  // slightly above 1; unclamped raw weights average exactly 1
  CHECK(sum / static_cast<double>(table.weights.size()) ==
        doctest::Approx(1.0).epsilon(0.15));
  CHECK(table.version == 1);
  CHECK_FALSE(table.trained);
}

TEST_CASE("aggregation mode changes the raw statistic") {
  auto tfidf = compute_tf_idf(tiny_corpus());
  auto mean_t = init_weight_table(tfidf, WeightAggregation::kMean);
  auto max_t = init_weight_table(tfidf, WeightAggregation::kMax);
  auto idf_t = init_weight_table(tfidf, WeightAggregation::kIdfOnly);
  // under idf-only, both single-document tokens share one weight
  CHECK(idf_t.weights.at("session") ==
        doctest::Approx(idf_t.weights.at("expiry")));
  // under mean/max they differ because term frequencies differ
  CHECK(mean_t.weights.at("session") > mean_t.weights.at("expiry"));
  CHECK(max_t.weights.at("session") > max_t.weights.at("expiry"));
}

TEST_CASE("out-of-vocabulary tokens fall back to the default weight") {
  auto table = init_weight_table(compute_tf_idf(tiny_corpus()));
  CHECK(table.lookup("nonexistent") == 1.0);
  auto weights = lookup_weights(table, tokenize("session nonexistent"));
  REQUIRE(weights.size() == 2);
  CHECK(weights[0] == table.weights.at("session"));
  CHECK(weights[1] == 1.0);
}

TEST_CASE("uniform table scores every token 1") {
  auto table = uniform_weight_table();
  CHECK(table.lookup("anything") == 1.0);
  CHECK(table.version == 0);
}

TEST_CASE("weight table JSON roundtrip is exact") {
  auto table = init_weight_table(compute_tf_idf(tiny_corpus()));
  table.trained = true;
  table.version = 3;
  auto restored = weight_table_from_json(weight_table_to_json(table));
  CHECK(restored.version == 3);
  CHECK(restored.trained);
  CHECK(restored.default_weight == table.default_weight);
  REQUIRE(restored.weights.size() == table.weights.size());
  for (const auto& [token, w] : table.weights)
    CHECK(restored.weights.at(token) == w);  // bit-exact through JSON doubles
}

TEST_CASE("invalid weight payloads are rejected") {
  CHECK_THROWS_AS(weight_table_from_json("nonsense"), ParseError);
  CHECK_THROWS_AS(weight_table_from_json(
                      R"({"version":1,"default_weight":1.0,
                          "weights":{"a":-0.5}})"),
                  ValidationError);
}

TEST_CASE("degenerate corpora raise errors") {
  CHECK_THROWS_AS(compute_tf_idf(VrCorpus{}), ValidationError);
  CHECK_THROWS_AS(init_weight_table(TfIdfTable{}), ValidationError);
}
