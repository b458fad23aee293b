#include "secreq/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "secreq/errors.hpp"
#include "secreq/text.hpp"

namespace secreq {

using nlohmann::json;

namespace {

constexpr int kTokenWarnLow = 4;
constexpr int kTokenWarnHigh = 160;

std::vector<int> id_parts(const std::string& id) {
  std::vector<int> parts;
  std::size_t pos = 0;
  while (pos <= id.size()) {
    std::size_t dot = id.find('.', pos);
    std::string piece = id.substr(pos, dot == std::string::npos
                                           ? std::string::npos
                                           : dot - pos);
    if (piece.empty() ||
        piece.find_first_not_of("0123456789") != std::string::npos)
      return {};
    parts.push_back(std::stoi(piece));
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return parts;
}

bool looks_deprecated(const std::string& description) {
  return description.empty() ||
         description.find("[DELETED") != std::string::npos;
}

// Accepts "V2.1.1" shortcodes and bare "2.1.1" ids alike.
std::string strip_shortcode(std::string code) {
  if (!code.empty() && (code.front() == 'V' || code.front() == 'v'))
    code.erase(code.begin());
  return code;
}

std::string require_string(const json& node, const char* key,
                           const std::string& path) {
  if (!node.contains(key) || !node[key].is_string())
    throw ParseError("ASVS parse error at " + path + ": missing string '" +
                     key + "'");
  return node[key].get<std::string>();
}

void finalize(VrCorpus& corpus) {
  std::sort(corpus.records.begin(), corpus.records.end(),
            [](const VrRecord& a, const VrRecord& b) {
              return vr_id_less(a.id, b.id);
            });
  std::set<std::string> seen;
  for (auto& rec : corpus.records) {
    if (!seen.insert(rec.id).second)
      throw ValidationError("duplicate VR id: " + rec.id);
    rec.composed_text = compose_vr_text(rec);
    auto n = static_cast<int>(tokenize(rec.composed_text).size());
    if (n < kTokenWarnLow || n > kTokenWarnHigh) {
      // plausibility band breach is a warning, carried via the log
      corpus.exclusion_log.push_back(
          {rec.id, "warning: token count " + std::to_string(n) +
                       " outside plausibility band"});
    }
  }
}

}  // namespace

bool vr_id_less(const std::string& a, const std::string& b) {
  return id_parts(a) < id_parts(b);
}

std::map<int, std::size_t> VrCorpus::per_chapter_counts() const {
  std::map<int, std::size_t> counts;
  for (const auto& rec : records) ++counts[rec.chapter_ordinal];
  return counts;
}

const VrRecord* VrCorpus::find(const std::string& id) const {
  auto it = std::lower_bound(records.begin(), records.end(), id,
                             [](const VrRecord& rec, const std::string& key) {
                               return vr_id_less(rec.id, key);
                             });
  if (it != records.end() && it->id == id) return &*it;
  return nullptr;
}

std::string compose_vr_text(const VrRecord& record,
                            const std::string& separator) {
  if (record.deprecated)
    throw ValidationError("compose_vr_text: record " + record.id +
                          " is deprecated");
  std::string out;
  for (const std::string* part :
       {&record.chapter_title, &record.section_title, &record.description}) {
    if (part->empty()) continue;
    if (!out.empty()) out += separator;
    out += *part;
  }
  return out;
}

VrCorpus ingest_asvs(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("ASVS parse error: ") + e.what());
  }

  VrCorpus corpus;
  if (doc.is_object() && doc.contains("Version") &&
      doc["Version"].is_string())
    corpus.source_version = doc["Version"].get<std::string>();

  auto add_item = [&corpus](VrRecord rec) {
    if (looks_deprecated(rec.description)) {
      corpus.exclusion_log.push_back({rec.id, "deprecated"});
    } else {
      corpus.records.push_back(std::move(rec));
    }
  };

  if (doc.is_object() && doc.contains("Requirements")) {
    // nested form: chapters -> sections -> items
    const json& chapters = doc["Requirements"];
    if (!chapters.is_array())
      throw ParseError("ASVS parse error at Requirements: expected array");
    for (std::size_t ci = 0; ci < chapters.size(); ++ci) {
      const json& chapter = chapters[ci];
      std::string cpath = "Requirements[" + std::to_string(ci) + "]";
      if (!chapter.contains("Ordinal") ||
          !chapter["Ordinal"].is_number_integer())
        throw ParseError("ASVS parse error at " + cpath +
                         ": missing integer 'Ordinal'");
      int chapter_ordinal = chapter["Ordinal"].get<int>();
      std::string chapter_title = chapter.contains("ShortName") &&
                                          chapter["ShortName"].is_string()
                                      ? chapter["ShortName"].get<std::string>()
                                      : require_string(chapter, "Name", cpath);
      const json& sections = chapter.value("Items", json::array());
      for (std::size_t si = 0; si < sections.size(); ++si) {
        const json& section = sections[si];
        std::string spath = cpath + ".Items[" + std::to_string(si) + "]";
        std::string section_title = require_string(section, "Name", spath);
        const json& items = section.value("Items", json::array());
        for (std::size_t ii = 0; ii < items.size(); ++ii) {
          const json& item = items[ii];
          std::string ipath = spath + ".Items[" + std::to_string(ii) + "]";
          VrRecord rec;
          rec.id = strip_shortcode(require_string(item, "Shortcode", ipath));
          if (id_parts(rec.id).size() != 3)
            throw ParseError("ASVS parse error at " + ipath +
                             ": bad shortcode '" + rec.id + "'");
          rec.chapter_ordinal = chapter_ordinal;
          rec.chapter_title = chapter_title;
          rec.section_title = section_title;
          rec.description = item.value("Description", std::string{});
          rec.deprecated = looks_deprecated(rec.description);
          add_item(std::move(rec));
        }
      }
    }
  } else if (doc.is_array()) {
    // flat form: [{id, chapter_ordinal, chapter_title, section_title,
    // description}]
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const json& item = doc[i];
      std::string path = "[" + std::to_string(i) + "]";
      VrRecord rec;
      rec.id = strip_shortcode(require_string(item, "id", path));
      if (id_parts(rec.id).size() != 3)
        throw ParseError("ASVS parse error at " + path + ": bad id '" +
                         rec.id + "'");
      rec.chapter_ordinal = item.contains("chapter_ordinal")
                                ? item["chapter_ordinal"].get<int>()
                                : id_parts(rec.id)[0];
      rec.chapter_title = require_string(item, "chapter_title", path);
      rec.section_title = require_string(item, "section_title", path);
      rec.description = item.value("description", std::string{});
      rec.deprecated = looks_deprecated(rec.description);
      add_item(std::move(rec));
    }
  } else {
    throw ParseError(
        "ASVS parse error: expected object with 'Requirements' or a flat "
        "item array");
  }

  finalize(corpus);
  return corpus;
}

VrCorpus ingest_asvs_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open ASVS file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ingest_asvs(buffer.str());
}

VrCorpus apply_exclusions(const VrCorpus& corpus,
                          const std::vector<std::string>& excluded_sections) {
  for (const auto& prefix : excluded_sections) {
    if (id_parts(prefix).size() != 2)
      throw ValidationError("exclusion prefix must be chapter.section: " +
                            prefix);
  }
  VrCorpus out;
  out.source_version = corpus.source_version;
  out.exclusion_log = corpus.exclusion_log;
  std::map<std::string, int> hits;
  for (const auto& rec : corpus.records) {
    std::string section =
        rec.id.substr(0, rec.id.rfind('.'));  // chapter.section
    bool excluded = false;
    for (const auto& prefix : excluded_sections) {
      if (section == prefix) {
        excluded = true;
        ++hits[prefix];
        break;
      }
    }
    if (excluded) {
      out.exclusion_log.push_back({rec.id, "process-oriented"});
    } else {
      out.records.push_back(rec);
    }
  }
  for (const auto& prefix : excluded_sections) {
    if (hits.find(prefix) == hits.end())
      out.exclusion_log.push_back(
          {prefix, "warning: exclusion prefix matched nothing"});
  }
  return out;
}

std::vector<std::string> load_exclusion_config(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open exclusion config: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad exclusion config: ") + e.what());
  }
  std::vector<std::string> sections;
  for (const auto& entry : doc.at("excluded_sections")) {
    if (entry.is_string())
      sections.push_back(entry.get<std::string>());
    else
      sections.push_back(entry.at("section").get<std::string>());
  }
  return sections;
}

FrIngestReport ingest_frs(const std::filesystem::path& path,
                          const std::string& project) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open FR file: " + path.string());
  FrIngestReport report;
  report.set.project = project;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      report.rejected.push_back(std::to_string(line_no) + ": " + e.what());
      continue;
    }
    FrRecord rec;
    rec.project = project;
    rec.text = row.value("text", std::string{});
    auto n = tokenize(rec.text).size();
    if (n < 1 || n > 512) {
      report.rejected.push_back(std::to_string(line_no) +
                                ": text token count out of [1, 512]");
      continue;
    }
    rec.id = row.value("id", std::string{});
    if (rec.id.empty()) rec.id = project + "-" + std::to_string(line_no);
    if (!ids.insert(rec.id).second) {
      report.rejected.push_back(std::to_string(line_no) +
                                ": duplicate id " + rec.id);
      continue;
    }
    report.set.records.push_back(std::move(rec));
  }
  if (report.set.records.empty())
    throw ValidationError("FR set for project " + project + " is empty");
  return report;
}

}  // namespace secreq
