#include "secreq/srgen.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "secreq/errors.hpp"
#include "secreq/text.hpp"

namespace secreq {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string replace_all(std::string text, const std::string& slot,
                        const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

std::set<std::string> token_set(const std::string& text) {
  auto seq = tokenize(text);
  return {seq.tokens.begin(), seq.tokens.end()};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  return static_cast<double>(inter) /
         static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace

GenerationTemplate GenerationTemplate::from_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw TemplateError("cannot open generation template: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw TemplateError(std::string("bad generation template: ") + e.what());
  }
  GenerationTemplate tmpl;
  for (const char* key :
       {"template_id", "instruction", "sentinel", "relevant_example",
        "irrelevant_example"})
    if (!doc.contains(key))
      throw TemplateError(std::string("generation template: missing slot '") +
                          key + "'");
  tmpl.template_id = doc["template_id"].get<std::string>();
  tmpl.instruction = doc["instruction"].get<std::string>();
  tmpl.sentinel = doc["sentinel"].get<std::string>();
  const json& rel = doc["relevant_example"];
  for (const char* key : {"fr", "vr", "sr"})
    if (!rel.contains(key))
      throw TemplateError(
          std::string("generation template: relevant_example missing '") +
          key + "'");
  tmpl.relevant_example = {rel["fr"].get<std::string>(),
                           rel["vr"].get<std::string>(),
                           rel["sr"].get<std::string>()};
  const json& irr = doc["irrelevant_example"];
  for (const char* key : {"fr", "vr"})
    if (!irr.contains(key))
      throw TemplateError(
          std::string("generation template: irrelevant_example missing '") +
          key + "'");
  tmpl.irrelevant_example = {irr["fr"].get<std::string>(),
                             irr["vr"].get<std::string>()};
  tmpl.validate();
  return tmpl;
}

void GenerationTemplate::validate() const {
  if (template_id.empty() || instruction.empty())
    throw TemplateError(
        "generation template: empty template_id or instruction");
  if (sentinel.empty())
    throw TemplateError("generation template: empty sentinel");
  if (instruction.find("{sentinel}") == std::string::npos)
    throw TemplateError("generation template: instruction lacks {sentinel}");
  if (relevant_example.fr.empty() || relevant_example.vr.empty() ||
      relevant_example.sr.empty())
    throw TemplateError("generation template: incomplete relevant example");
  if (irrelevant_example.fr.empty() || irrelevant_example.vr.empty())
    throw TemplateError("generation template: incomplete irrelevant example");
}

GenerationPrompt build_generation_prompt(const FrRecord& fr,
                                         const VrRecord& vr,
                                         const GenerationTemplate& tmpl) {
  tmpl.validate();
  if (fr.text.empty())
    throw ValidationError("build_generation_prompt: FR " + fr.id +
                          " has no text");
  if (vr.composed_text.empty())
    throw ValidationError("build_generation_prompt: VR " + vr.id +
                          " has no composed text");

  GenerationPrompt prompt;
  prompt.template_id = tmpl.template_id;
  prompt.fr_id = fr.id;
  prompt.vr_id = vr.id;

  std::string text = replace_all(tmpl.instruction, "{sentinel}", tmpl.sentinel);
  text += "\n\nExample (relevant pair):\n";
  text += "Functional requirement: " + tmpl.relevant_example.fr + "\n";
  text += "Verification requirement: " + tmpl.relevant_example.vr + "\n";
  text += "Security requirement: " + tmpl.relevant_example.sr + "\n";
  text += "\nExample (irrelevant pair):\n";
  text += "Functional requirement: " + tmpl.irrelevant_example.fr + "\n";
  text += "Verification requirement: " + tmpl.irrelevant_example.vr + "\n";
  text += "Security requirement: " + tmpl.sentinel + "\n";
  text += "\nFunctional requirement: " + fr.text + "\n";
  text += "Verification requirement: " + vr.composed_text + "\n";
  text += "Security requirement:";
  prompt.text = std::move(text);
  return prompt;
}

SrRecord generate_sr(const FrRecord& fr, const VrRecord& vr,
                     ChatClient& gateway, const GenerationTemplate& tmpl,
                     const std::string& model_id) {
  auto prompt = build_generation_prompt(fr, vr, tmpl);
  ChatRequest request;
  request.model_id = model_id;
  request.temperature = 0.0;
  request.seed = 0;
  request.messages.push_back({"user", prompt.text});
  ChatResponse response = gateway.chat(request);

  SrRecord record;
  record.fr_id = fr.id;
  record.vr_id = vr.id;
  record.project = fr.project;
  record.raw_response = response.content;

  std::string trimmed = trim(response.content);
  if (trimmed.empty())
    throw ValidationError("generate_sr: empty response for " + fr.id + "/" +
                          vr.id);
  if (trimmed == tmpl.sentinel) {
    record.gated = true;
  } else {
    record.text = trimmed;
  }
  return record;
}

SrSet derive_srs(const FrSet& frs, const VrIndex& index,
                 const EmbeddingProvider& provider, const VrCorpus& corpus,
                 std::size_t k, ChatClient& gateway,
                 const GenerationTemplate& tmpl, const std::string& model_id,
                 std::int64_t seed) {
  SrSet out;
  out.project = frs.project;
  out.manifest.model_id = model_id;
  out.manifest.seed = seed;
  out.manifest.index_corpus_hash = index.manifest.corpus_hash;
  out.manifest.weight_table_version = index.weight_table.version;
  out.manifest.k = static_cast<int>(k);

  for (const auto& fr : frs.records) {
    std::vector<RetrievalResult> top;
    try {
      top = retrieve_top_k(index, provider, fr.text, k);
    } catch (const Error& e) {
      out.failures.push_back(fr.id + "/-: " + e.what());
      ++out.attempted;
      continue;
    }
    for (const auto& hit : top) {
      ++out.attempted;
      const VrRecord* vr = corpus.find(hit.vr_id);
      if (vr == nullptr) {
        out.failures.push_back(fr.id + "/" + hit.vr_id +
                               ": VR missing from corpus");
        continue;
      }
      try {
        SrRecord rec = generate_sr(fr, *vr, gateway, tmpl, model_id);
        if (rec.gated)
          ++out.gated;
        else
          ++out.generated;
        out.records.push_back(std::move(rec));
      } catch (const Error& e) {
        out.failures.push_back(fr.id + "/" + hit.vr_id + ": " + e.what());
      }
    }
  }
  return out;
}

std::vector<DuplicateGroup> consolidate_duplicates(const SrSet& set,
                                                   double threshold) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw ValidationError("consolidate_duplicates: threshold in (0, 1]");

  // candidate indices in (fr_id, vr_id) order so the representative is
  // deterministic
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < set.records.size(); ++i)
    if (!set.records[i].gated) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = set.records[a];
    const auto& rb = set.records[b];
    return std::tie(ra.fr_id, ra.vr_id) < std::tie(rb.fr_id, rb.vr_id);
  });

  std::vector<std::set<std::string>> tokens;
  tokens.reserve(order.size());
  for (auto idx : order) tokens.push_back(token_set(set.records[idx].text));

  std::vector<bool> assigned(order.size(), false);
  std::vector<DuplicateGroup> groups;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (assigned[i]) continue;
    DuplicateGroup group;
    group.representative = order[i];
    group.members.push_back(order[i]);
    assigned[i] = true;
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (assigned[j]) continue;
      double sim = jaccard(tokens[i], tokens[j]);
      if (sim >= threshold) {
        group.members.push_back(order[j]);
        group.min_similarity = std::min(group.min_similarity, sim);
        assigned[j] = true;
      }
    }
    if (group.members.size() > 1) groups.push_back(std::move(group));
  }
  return groups;
}

void save_sr_set(const SrSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write SR set: " + path.string());
  for (const auto& rec : set.records) {
    json row;
    row["project"] = rec.project;
    row["fr_id"] = rec.fr_id;
    row["vr_id"] = rec.vr_id;
    row["gated"] = rec.gated;
    row["text"] = rec.text;
    row["raw_response"] = rec.raw_response;
    out << row.dump() << '\n';
  }

  json manifest;
  manifest["project"] = set.project;
  manifest["model_id"] = set.manifest.model_id;
  manifest["seed"] = set.manifest.seed;
  manifest["index_corpus_hash"] = set.manifest.index_corpus_hash;
  manifest["weight_table_version"] = set.manifest.weight_table_version;
  manifest["k"] = set.manifest.k;
  manifest["attempted"] = set.attempted;
  manifest["generated"] = set.generated;
  manifest["gated"] = set.gated;
  manifest["failures"] = set.failures;
  std::ofstream mout(path.string() + ".manifest.json");
  mout << manifest.dump(1) << '\n';
}

SrSet load_sr_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open SR set: " + path.string());
  SrSet set;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad SR set line: ") + e.what());
    }
    SrRecord rec;
    rec.project = row.at("project").get<std::string>();
    rec.fr_id = row.at("fr_id").get<std::string>();
    rec.vr_id = row.at("vr_id").get<std::string>();
    rec.gated = row.at("gated").get<bool>();
    rec.text = row.at("text").get<std::string>();
    rec.raw_response = row.value("raw_response", std::string{});
    set.records.push_back(std::move(rec));
  }

  std::ifstream min(path.string() + ".manifest.json");
  if (min) {
    json manifest;
    try {
      min >> manifest;
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad SR set manifest: ") + e.what());
    }
    set.project = manifest.value("project", std::string{});
    set.manifest.model_id = manifest.value("model_id", std::string{});
    set.manifest.seed = manifest.value("seed", std::int64_t{0});
    set.manifest.index_corpus_hash =
        manifest.value("index_corpus_hash", std::string{});
    set.manifest.weight_table_version =
        manifest.value("weight_table_version", 0);
    set.manifest.k = manifest.value("k", 0);
    set.attempted = manifest.value("attempted", std::size_t{0});
    set.generated = manifest.value("generated", std::size_t{0});
    set.gated = manifest.value("gated", std::size_t{0});
    if (manifest.contains("failures"))
      set.failures = manifest["failures"].get<std::vector<std::string>>();
  }
  return set;
}

}  // namespace secreq
