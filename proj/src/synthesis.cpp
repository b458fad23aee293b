#include "secreq/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "secreq/errors.hpp"

namespace secreq {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

PromptExemplar exemplar_from_json(const json& node, const std::string& slot) {
  for (const char* key : {"vr", "fr", "reason"})
    if (!node.contains(key))
      throw TemplateError("synthesis template: slot '" + slot +
                          "' missing field '" + key + "'");
  return {node["vr"].get<std::string>(), node["fr"].get<std::string>(),
          node["reason"].get<std::string>()};
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

}  // namespace

SynthesisTemplate SynthesisTemplate::from_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw TemplateError("cannot open synthesis template: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw TemplateError(std::string("bad synthesis template: ") + e.what());
  }
  SynthesisTemplate tmpl;
  for (const char* key : {"template_id", "instruction"})
    if (!doc.contains(key))
      throw TemplateError(std::string("synthesis template: missing slot '") +
                          key + "'");
  tmpl.template_id = doc["template_id"].get<std::string>();
  tmpl.instruction = doc["instruction"].get<std::string>();
  if (!doc.contains("good_example"))
    throw TemplateError("synthesis template: missing slot 'good_example'");
  tmpl.good_example = exemplar_from_json(doc["good_example"], "good_example");
  if (!doc.contains("bad_examples"))
    throw TemplateError("synthesis template: missing slot 'bad_examples'");
  for (const auto& node : doc["bad_examples"])
    tmpl.bad_examples.push_back(exemplar_from_json(node, "bad_examples"));
  tmpl.validate();
  return tmpl;
}

void SynthesisTemplate::validate() const {
  if (template_id.empty() || instruction.empty())
    throw TemplateError("synthesis template: empty template_id or instruction");
  if (instruction.find("{count}") == std::string::npos)
    throw TemplateError("synthesis template: instruction lacks {count} slot");
  if (bad_examples.size() != 3)
    throw TemplateError("synthesis template: exactly 3 bad examples required");
}

SynthesisPrompt build_synthesis_prompt(const VrRecord& vr,
                                       const SynthesisTemplate& tmpl,
                                       int count) {
  tmpl.validate();
  if (count < 1)
    throw ValidationError("build_synthesis_prompt: count must be >= 1");
  if (vr.composed_text.empty())
    throw ValidationError("build_synthesis_prompt: VR " + vr.id +
                          " has no composed text");

  SynthesisPrompt prompt;
  prompt.template_id = tmpl.template_id;
  prompt.vr_id = vr.id;
  prompt.requested_count = count;

  std::string text =
      replace_all(tmpl.instruction, "{count}", std::to_string(count));
  text += "\n\nExample of a good functional requirement:\n";
  text += "Verification requirement: " + tmpl.good_example.vr + "\n";
  text += "Functional requirement: " + tmpl.good_example.fr + "\n";
  text += "Reason for good: " + tmpl.good_example.reason + "\n";
  for (std::size_t i = 0; i < tmpl.bad_examples.size(); ++i) {
    const auto& bad = tmpl.bad_examples[i];
    text += "\nExample of a bad functional requirement (" +
            std::to_string(i + 1) + "):\n";
    text += "Verification requirement: " + bad.vr + "\n";
    text += "Functional requirement: " + bad.fr + "\n";
    text += "Reason for bad: " + bad.reason + "\n";
  }
  text += "\nVerification requirement: " + vr.composed_text + "\n";
  prompt.text = std::move(text);
  return prompt;
}

std::vector<std::string> parse_requirement_list(const std::string& response) {
  std::vector<std::string> items;
  std::size_t pos = 0;
  bool saw_marker = false;
  while (pos <= response.size()) {
    std::size_t eol = response.find('\n', pos);
    std::string line = trim(response.substr(
        pos, eol == std::string::npos ? std::string::npos : eol - pos));
    if (!line.empty()) {
      // strip "1." / "1)" / "-" / "*" markers
      std::size_t i = 0;
      while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i])))
        ++i;
      if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
        saw_marker = true;
        line = trim(line.substr(i + 1));
      } else if (line[0] == '-' || line[0] == '*') {
        saw_marker = true;
        line = trim(line.substr(1));
      }
      if (!line.empty()) items.push_back(line);
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  // one-per-line prose with several sentences and no markers at all is
  // indistinguishable from a list only if each line stands alone; a
  // single unmarked paragraph is rejected
  if (items.empty() || (!saw_marker && items.size() == 1))
    throw ParseError("unparseable synthesis response: " + response);
  return items;
}

SynthesisOutcome synthesize_frs(const VrRecord& vr, int count,
                                ChatClient& gateway,
                                const SynthesisTemplate& tmpl,
                                const std::string& model_id) {
  auto prompt = build_synthesis_prompt(vr, tmpl, count);
  ChatRequest request;
  request.model_id = model_id;
  request.temperature = 0.0;
  request.seed = 0;
  request.messages.push_back({"user", prompt.text});
  ChatResponse response = gateway.chat(request);

  SynthesisOutcome outcome;
  auto items = parse_requirement_list(response.content);
  for (std::size_t i = 0; i < items.size(); ++i) {
    CandidatePair pair;
    pair.fr_text = items[i];
    pair.vr_id = vr.id;
    pair.provenance = "synthetic";
    pair.batch_id = vr.id + "#" + std::to_string(i + 1);
    outcome.pairs.push_back(std::move(pair));
  }
  if (static_cast<int>(items.size()) < count)
    outcome.warnings.push_back("VR " + vr.id + ": requested " +
                               std::to_string(count) + " FRs, parsed " +
                               std::to_string(items.size()));
  return outcome;
}

std::vector<FilterDecision> rank_filter(
    const std::vector<CandidatePair>& pairs, const VrIndex& zero_shot_index,
    const EmbeddingProvider& provider, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw ValidationError("rank_filter: fraction must be in (0, 1]");
  for (const auto& entry : zero_shot_index.weight_table.weights)
    if (entry.second != 1.0)
      throw ValidationError(
          "rank_filter: index must use the zero-shot (uniform) weight table");

  auto n = zero_shot_index.size();
  int threshold =
      static_cast<int>(std::ceil(fraction * static_cast<double>(n)));

  std::vector<FilterDecision> decisions;
  decisions.reserve(pairs.size());
  for (const auto& pair : pairs) {
    FilterDecision decision;
    decision.fr_text = pair.fr_text;
    decision.vr_id = pair.vr_id;
    decision.threshold_rank = threshold;
    if (tokenize(pair.fr_text).empty()) {
      decision.accepted = false;
      decision.reason = "FR tokenizes to nothing";
      decisions.push_back(std::move(decision));
      continue;
    }
    auto ranking = retrieve_all(zero_shot_index, provider, pair.fr_text);
    for (const auto& result : ranking)
      if (result.vr_id == pair.vr_id) {
        decision.rank = result.rank;
        break;
      }
    if (decision.rank == 0) {
      decision.accepted = false;
      decision.reason = "VR " + pair.vr_id + " not in index";
    } else {
      decision.accepted = decision.rank <= threshold;
    }
    decisions.push_back(std::move(decision));
  }
  return decisions;
}

std::pair<std::vector<CandidatePair>, std::vector<CandidatePair>>
split_train_val(const std::vector<CandidatePair>& pairs, double train_fraction,
                double val_fraction, std::uint64_t seed) {
  if (std::abs(train_fraction + val_fraction - 1.0) > 1e-9)
    throw ValidationError("split_train_val: fractions must sum to 1");
  if (pairs.size() < 10)
    throw ValidationError(
        "split_train_val: need at least 10 pairs for a non-empty validation "
        "set");

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto val_size = static_cast<std::size_t>(
      std::floor(val_fraction * static_cast<double>(pairs.size())));
  std::pair<std::vector<CandidatePair>, std::vector<CandidatePair>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < pairs.size() - val_size)
      out.first.push_back(pairs[order[i]]);
    else
      out.second.push_back(pairs[order[i]]);
  }
  return out;
}

void save_filter_decisions(const std::vector<FilterDecision>& decisions,
                           const std::vector<CandidatePair>& pairs,
                           const std::filesystem::path& path) {
  if (decisions.size() != pairs.size())
    throw ValidationError("save_filter_decisions: size mismatch");
  std::ofstream out(path);
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    json row;
    row["fr_text"] = decisions[i].fr_text;
    row["vr_id"] = decisions[i].vr_id;
    row["provenance"] = pairs[i].provenance;
    row["accepted"] = decisions[i].accepted;
    row["rank"] = decisions[i].rank;
    row["threshold_rank"] = decisions[i].threshold_rank;
    out << row.dump() << '\n';
  }
}

}  // namespace secreq
