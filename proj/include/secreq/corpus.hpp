#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace secreq {

/// One ASVS verification requirement.
struct VrRecord {
  std::string id;  // dotted ordinal, e.g. "2.1.1"
  int chapter_ordinal = 0;
  std::string chapter_title;
  std::string section_title;
  std::string description;
  bool deprecated = false;
  std::string composed_text;  // derived, empty iff deprecated
};

struct Exclusion {
  std::string id;
  std::string reason;
};

/// The validated VR corpus; immutable after construction.
struct VrCorpus {
  std::vector<VrRecord> records;  // valid records only, ordered by id
  std::vector<Exclusion> exclusion_log;
  std::string source_version;

  std::map<int, std::size_t> per_chapter_counts() const;
  const VrRecord* find(const std::string& id) const;
};

/// One project functional requirement.
struct FrRecord {
  std::string project;
  std::string id;
  std::string text;
};

struct FrSet {
  std::string project;
  std::vector<FrRecord> records;
};

/// Numeric ordering on dotted VR ids ("2.1.10" after "2.1.9").
bool vr_id_less(const std::string& a, const std::string& b);

/// Compose chapter title, section title and description with the given
/// separator; empty parts are skipped so consecutive separators
/// collapse to one.
std::string compose_vr_text(const VrRecord& record,
                            const std::string& separator = " - ");

/// Ingest the official ASVS JSON export (nested chapters/sections/items
/// or a flat item list). Deprecated items go to the exclusion log.
VrCorpus ingest_asvs(const std::string& json_text);
VrCorpus ingest_asvs_file(const std::filesystem::path& path);

/// Move records in the listed sections (prefixes like "1.1", "14.1")
/// to the exclusion log with reason "process-oriented". A section id
/// matches only whole chapter.section components, so "1.1" does not
/// swallow "1.10".
VrCorpus apply_exclusions(const VrCorpus& corpus,
                          const std::vector<std::string>& excluded_sections);

/// Read section prefixes from the shipped exclusion config JSON.
std::vector<std::string> load_exclusion_config(
    const std::filesystem::path& path);

/// Ingest a JSON-lines FR file; missing ids become "<project>-<line>".
/// Records with a blank text field are rejected and reported.
struct FrIngestReport {
  FrSet set;
  std::vector<std::string> rejected;  // "<line>: <reason>"
};
FrIngestReport ingest_frs(const std::filesystem::path& path,
                          const std::string& project);

}  // namespace secreq
