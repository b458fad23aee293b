#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "secreq/corpus.hpp"
#include "secreq/errors.hpp"

using namespace secreq;

namespace {
const std::string kAsvs = std::string(SECREQ_SOURCE_DIR) +
                          "/data/asvs-4.0.3.json";
const std::string kExclusions = std::string(SECREQ_SOURCE_DIR) +
                                "/config/exclusions.json";
const std::string kFrDir = std::string(SECREQ_SOURCE_DIR) + "/data/frs/";
}  // namespace

TEST_CASE("bundled ASVS yields 277 valid and 9 deprecated requirements") {
  auto corpus = ingest_asvs_file(kAsvs);
  CHECK(corpus.records.size() == 277);
  std::size_t deprecated = 0;
  for (const auto& entry : corpus.exclusion_log)
    if (entry.reason == "deprecated") ++deprecated;
  CHECK(deprecated == 9);
  CHECK(corpus.source_version == "4.0.3");
}

TEST_CASE("per-chapter valid counts match the reference distribution") {
  auto corpus = ingest_asvs_file(kAsvs);
  std::vector<std::size_t> expected{39, 57, 20, 9, 30, 16, 12,
                                    16, 8,  10, 8, 15, 13, 24};
  auto counts = corpus.per_chapter_counts();
  REQUIRE(counts.size() == 14);
  for (int chapter = 1; chapter <= 14; ++chapter)
    CHECK(counts.at(chapter) == expected[chapter - 1]);
}

TEST_CASE("shipped exclusion config leaves 241 in-scope VRs") {
  auto corpus = apply_exclusions(ingest_asvs_file(kAsvs),
                                 load_exclusion_config(kExclusions));
  CHECK(corpus.records.size() == 241);
  std::size_t process_oriented = 0;
  for (const auto& entry : corpus.exclusion_log)
    if (entry.reason == "process-oriented") ++process_oriented;
  CHECK(process_oriented == 36);
}

TEST_CASE("vr ids order numerically, not lexicographically") {
  CHECK(vr_id_less("1.9.1", "1.10.1"));
  CHECK(vr_id_less("2.1.9", "2.1.10"));
  CHECK_FALSE(vr_id_less("10.1.1", "2.1.1"));
}

TEST_CASE("exclusion prefix 1.1 does not swallow section 1.10") {
  auto corpus = ingest_asvs_file(kAsvs);
  auto excluded = apply_exclusions(corpus, {"1.1"});
  for (const auto& rec : excluded.records)
    CHECK(rec.id.rfind("1.1.", 0) == std::string::npos);
  bool has_1_10 = false;
  for (const auto& rec : excluded.records)
    if (rec.id.rfind("1.10.", 0) == 0) has_1_10 = true;
  CHECK(has_1_10);
}

TEST_CASE("non-matching exclusion prefix is logged as a warning") {
  auto corpus = ingest_asvs_file(kAsvs);
  auto excluded = apply_exclusions(corpus, {"99.1"});
  bool warned = false;
  for (const auto& entry : excluded.exclusion_log)
    if (entry.id == "99.1" &&
        entry.reason.rfind("warning", 0) == 0)
      warned = true;
  CHECK(warned);
  CHECK(excluded.records.size() == corpus.records.size());
}

TEST_CASE("composed text is chapter - section - description") {
  auto corpus = ingest_asvs_file(kAsvs);
  const VrRecord* rec = corpus.find("2.1.1");
  REQUIRE(rec != nullptr);
  CHECK(rec->composed_text ==
        "Authentication - Password Security - Verify that user set passwords "
        "are at least 12 characters in length (after multiple spaces are "
        "combined).");
}

TEST_CASE("composing a deprecated record is an error") {
  VrRecord rec;
  rec.id = "1.2.3";
  rec.deprecated = true;
  CHECK_THROWS_AS(compose_vr_text(rec), ValidationError);
}

TEST_CASE("flat-form ingestion and duplicate detection") {
  std::string flat = R"([
    {"id": "1.1.1", "chapter_title": "C", "section_title": "S",
     "description": "Verify the architecture supports isolated tiers."},
    {"id": "V1.1.2", "chapter_title": "C", "section_title": "S",
     "description": "Verify components declare trust boundaries."}
  ])";
  auto corpus = ingest_asvs(flat);
  CHECK(corpus.records.size() == 2);
  CHECK(corpus.records[1].id == "1.1.2");  // shortcode prefix stripped

  std::string dup = R"([
    {"id": "1.1.1", "chapter_title": "C", "section_title": "S",
     "description": "Verify one thing thoroughly and well."},
    {"id": "1.1.1", "chapter_title": "C", "section_title": "S",
     "description": "Verify another thing thoroughly and well."}
  ])";
  CHECK_THROWS_AS(ingest_asvs(dup), ValidationError);
}

TEST_CASE("malformed ASVS input raises a parse error") {
  CHECK_THROWS_AS(ingest_asvs("not json"), ParseError);
  CHECK_THROWS_AS(ingest_asvs("{\"unexpected\": true}"), ParseError);
}

TEST_CASE("three bundled FR datasets total 323 requirements") {
  auto epurse = ingest_frs(kFrDir + "epurse.jsonl", "ePurse");
  auto cpn = ingest_frs(kFrDir + "cpn.jsonl", "CPN");
  auto gps = ingest_frs(kFrDir + "gps.jsonl", "GPS");
  CHECK(epurse.set.records.size() == 41);
  CHECK(cpn.set.records.size() == 169);
  CHECK(gps.set.records.size() == 113);
  CHECK(epurse.rejected.empty());
  CHECK(cpn.rejected.empty());
  CHECK(gps.rejected.empty());
  CHECK(epurse.set.records.size() + cpn.set.records.size() +
            gps.set.records.size() ==
        323);
}

TEST_CASE("FR ingestion rejects bad lines but keeps the rest") {
  auto tmp = std::filesystem::temp_directory_path() / "secreq_frs_test.jsonl";
  {
    std::ofstream out(tmp);
    out << R"({"id": "X-1", "text": "The system shall log in users."})"
        << '\n';
    out << "not json\n";
    out << R"({"id": "X-2", "text": ""})" << '\n';
    out << R"({"id": "X-1", "text": "Duplicate id line."})" << '\n';
  }
  auto report = ingest_frs(tmp, "X");
  CHECK(report.set.records.size() == 1);
  CHECK(report.rejected.size() == 3);
  std::filesystem::remove(tmp);
}

TEST_CASE("an entirely invalid FR file is an error") {
  auto tmp = std::filesystem::temp_directory_path() / "secreq_frs_empty.jsonl";
  std::ofstream(tmp) << "\n";
  CHECK_THROWS_AS(ingest_frs(tmp, "X"), ValidationError);
  std::filesystem::remove(tmp);
}
