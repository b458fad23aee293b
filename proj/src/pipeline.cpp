#include "secreq/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "secreq/errors.hpp"
#include "secreq/metrics.hpp"
#include "secreq/scope.hpp"
#include "secreq/srgen.hpp"
#include "secreq/stats.hpp"
#include "secreq/synthesis.hpp"
#include "secreq/text.hpp"

namespace secreq {

using nlohmann::json;

namespace {

std::string interpolate_env(const std::string& value) {
  if (value.size() >= 3 && value.substr(0, 2) == "${" &&
      value.back() == '}') {
    std::string var = value.substr(2, value.size() - 3);
    const char* resolved = std::getenv(var.c_str());
    if (resolved == nullptr)
      throw ConfigError("credential variable not set: " + var);
    return resolved;
  }
  return value;
}

std::filesystem::path path_or_empty(const json& doc, const char* key) {
  return doc.contains(key) ? std::filesystem::path(doc[key].get<std::string>())
                           : std::filesystem::path{};
}

void require_file(const std::filesystem::path& path, const char* what) {
  if (path.empty())
    throw ConfigError(std::string("run config: missing path for ") + what);
  if (!std::filesystem::exists(path))
    throw ConfigError(std::string("run config: ") + what +
                      " does not exist: " + path.string());
}

std::vector<CandidatePair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open pair file: " + path.string());
  std::vector<CandidatePair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row = json::parse(line);
    CandidatePair pair;
    pair.fr_text = row.at("fr_text").get<std::string>();
    pair.vr_id = row.at("vr_id").get<std::string>();
    pair.provenance = row.value("provenance", "synthetic");
    pair.batch_id = row.value("batch_id", std::string{});
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void save_pairs(const std::vector<CandidatePair>& pairs,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  for (const auto& pair : pairs) {
    json row;
    row["fr_text"] = pair.fr_text;
    row["vr_id"] = pair.vr_id;
    row["provenance"] = pair.provenance;
    row["batch_id"] = pair.batch_id;
    out << row.dump() << '\n';
  }
}

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << doc.dump(1) << '\n';
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open run config: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }

  RunConfig config;
  config.asvs_path = path_or_empty(doc, "asvs_path");
  config.exclusion_config_path = path_or_empty(doc, "exclusion_config_path");
  config.synthesis_template_path = path_or_empty(doc, "synthesis_template_path");
  config.generation_template_path =
      path_or_empty(doc, "generation_template_path");
  config.keyword_config_path = path_or_empty(doc, "keyword_config_path");
  config.output_dir = path_or_empty(doc, "output_dir");
  if (doc.contains("fr_datasets"))
    for (const auto& [project, file] : doc["fr_datasets"].items())
      config.fr_datasets[project] = file.get<std::string>();

  config.retrieval_k = doc.value("retrieval_k", config.retrieval_k);
  config.filter_fraction = doc.value("filter_fraction", config.filter_fraction);
  config.synth_count_per_vr =
      doc.value("synth_count_per_vr", config.synth_count_per_vr);
  config.embed_dim = doc.value("embed_dim", config.embed_dim);
  config.embed_seed = doc.value("embed_seed", config.embed_seed);
  config.split_seed = doc.value("split_seed", config.split_seed);
  config.self_bleu_seed = doc.value("self_bleu_seed", config.self_bleu_seed);
  config.deterministic = doc.value("deterministic", config.deterministic);

  if (doc.contains("train")) {
    const json& t = doc["train"];
    config.train.learning_rate =
        t.value("learning_rate", config.train.learning_rate);
    config.train.epochs = t.value("epochs", config.train.epochs);
    config.train.batch_size = t.value("batch_size", config.train.batch_size);
    config.train.seed = t.value("seed", config.train.seed);
    config.train.temperature =
        t.value("temperature", config.train.temperature);
  }
  if (doc.contains("gateway")) {
    const json& g = doc["gateway"];
    config.gateway.mode = g.value("mode", config.gateway.mode);
    config.gateway.endpoint = g.value("endpoint", config.gateway.endpoint);
    config.gateway.credential =
        interpolate_env(g.value("credential", config.gateway.credential));
    config.gateway.chat_model_id =
        g.value("chat_model_id", config.gateway.chat_model_id);
    if (g.contains("script_path"))
      config.gateway.script_path = g["script_path"].get<std::string>();
    config.gateway.mock_seed = g.value("mock_seed", config.gateway.mock_seed);
    config.gateway.gate_modulus =
        g.value("gate_modulus", config.gateway.gate_modulus);
    config.gateway.max_in_flight =
        g.value("max_in_flight", config.gateway.max_in_flight);
  }
  if (doc.contains("scorer")) {
    const json& s = doc["scorer"];
    config.scorer.mode = s.value("mode", config.scorer.mode);
    config.scorer.uniform_vocab_size =
        s.value("uniform_vocab_size", config.scorer.uniform_vocab_size);
    if (s.contains("unigram_path"))
      config.scorer.unigram_path = s["unigram_path"].get<std::string>();
  }
  config.validate();
  return config;
}

void RunConfig::validate() const {
  require_file(asvs_path, "asvs_path");
  require_file(exclusion_config_path, "exclusion_config_path");
  require_file(synthesis_template_path, "synthesis_template_path");
  require_file(generation_template_path, "generation_template_path");
  require_file(keyword_config_path, "keyword_config_path");
  if (fr_datasets.empty())
    throw ConfigError("run config: fr_datasets must not be empty");
  for (const auto& [project, file] : fr_datasets)
    require_file(file, ("fr_datasets/" + project).c_str());
  if (output_dir.empty())
    throw ConfigError("run config: output_dir must be set");
  if (retrieval_k == 0) throw ConfigError("run config: retrieval_k must be >= 1");
  if (filter_fraction <= 0.0 || filter_fraction > 1.0)
    throw ConfigError("run config: filter_fraction must be in (0, 1]");
  if (synth_count_per_vr < 1)
    throw ConfigError("run config: synth_count_per_vr must be >= 1");
  if (embed_dim == 0) throw ConfigError("run config: embed_dim must be >= 1");
  if (gateway.mode != "http" && gateway.mode != "mock-script" &&
      gateway.mode != "mock-synthetic" && gateway.mode != "echo")
    throw ConfigError("run config: unknown gateway mode " + gateway.mode);
  if (gateway.mode == "http" && gateway.endpoint.empty())
    throw ConfigError("run config: http gateway needs an endpoint");
  if (deterministic && gateway.mode == "http")
    throw ConfigError(
        "run config: deterministic mode requires a mock gateway");
}

std::string RunConfig::config_hash() const {
  std::ostringstream blob;
  blob << asvs_path.string() << '\x1f' << exclusion_config_path.string()
       << '\x1f' << synthesis_template_path.string() << '\x1f'
       << generation_template_path.string() << '\x1f'
       << keyword_config_path.string() << '\x1f';
  for (const auto& [project, file] : fr_datasets)
    blob << project << '=' << file.string() << '\x1f';
  blob << retrieval_k << '\x1f' << filter_fraction << '\x1f'
       << synth_count_per_vr << '\x1f' << train.learning_rate << '\x1f'
       << train.epochs << '\x1f' << train.batch_size << '\x1f' << train.seed
       << '\x1f' << train.temperature << '\x1f' << gateway.mode << '\x1f'
       << gateway.endpoint << '\x1f' << gateway.chat_model_id << '\x1f'
       << gateway.script_path.string() << '\x1f' << gateway.mock_seed << '\x1f'
       << gateway.gate_modulus << '\x1f' << scorer.mode << '\x1f'
       << scorer.uniform_vocab_size << '\x1f'
       << scorer.unigram_path.string() << '\x1f' << embed_dim << '\x1f'
       << embed_seed << '\x1f' << split_seed << '\x1f' << self_bleu_seed
       << '\x1f' << deterministic;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(blob.str())));
  return hex;
}

std::unique_ptr<ChatClient> make_chat_client(const GatewaySpec& spec) {
  if (spec.mode == "http")
    return std::make_unique<HttpChatClient>(spec.endpoint, spec.credential);
  if (spec.mode == "mock-script") {
    return std::make_unique<ScriptedMockChat>(
        ScriptedMockChat::from_file(spec.script_path));
  }
  if (spec.mode == "mock-synthetic") {
    SyntheticMockChat::Options options;
    options.seed = spec.mock_seed;
    options.gate_modulus = spec.gate_modulus;
    return std::make_unique<SyntheticMockChat>(options);
  }
  if (spec.mode == "echo") return std::make_unique<EchoMockChat>();
  throw ConfigError("unknown gateway mode: " + spec.mode);
}

std::unique_ptr<LmScorer> make_scorer(const ScorerSpec& spec) {
  if (spec.mode == "uniform")
    return std::make_unique<UnigramScorer>(spec.uniform_vocab_size);
  if (spec.mode == "unigram-file") {
    std::ifstream in(spec.unigram_path);
    if (!in)
      throw ConfigError("cannot open unigram table: " +
                        spec.unigram_path.string());
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad unigram table: ") + e.what());
    }
    std::map<std::string, double> probabilities;
    for (const auto& [token, p] : doc.items())
      probabilities[token] = p.get<double>();
    return std::make_unique<UnigramScorer>(std::move(probabilities));
  }
  throw ConfigError("unknown scorer mode: " + spec.mode);
}

ReportBundle end_to_end(const RunConfig& config) {
  config.validate();
  const std::string hash = config.config_hash();
  const std::filesystem::path out = config.output_dir / hash;
  std::filesystem::create_directories(out);

  ReportBundle bundle;
  auto stage = [&bundle](const std::string& name,
                         const std::filesystem::path& artifact,
                         const auto& fn) {
    if (std::filesystem::exists(artifact)) {
      bundle.stages_skipped.push_back(name);
    } else {
      fn();
      bundle.stages_run.push_back(name);
    }
  };

  // shared inputs
  VrCorpus corpus = apply_exclusions(
      ingest_asvs_file(config.asvs_path),
      load_exclusion_config(config.exclusion_config_path));
  HashEmbedder provider(config.embed_dim, config.embed_seed);
  auto gateway = make_chat_client(config.gateway);
  auto scorer = make_scorer(config.scorer);
  auto synthesis_tmpl =
      SynthesisTemplate::from_file(config.synthesis_template_path);
  auto generation_tmpl =
      GenerationTemplate::from_file(config.generation_template_path);
  auto keyword_sets = load_keyword_config(config.keyword_config_path);
  std::string built_at = "1970-01-01T00:00:00Z";

  // ---- Phase I: synthesize -> filter -> split -> train ----
  const auto weights_path = out / "trained_weights.json";
  if (std::filesystem::exists(weights_path)) {
    bundle.stages_skipped.push_back("phase-1");
  } else {
    const auto candidates_path = out / "candidates.jsonl";
    stage("synthesize", candidates_path, [&] {
      std::vector<CandidatePair> candidates;
      for (const auto& vr : corpus.records) {
        try {
          auto outcome = synthesize_frs(vr, config.synth_count_per_vr,
                                        *gateway, synthesis_tmpl,
                                        config.gateway.chat_model_id);
          for (auto& pair : outcome.pairs)
            candidates.push_back(std::move(pair));
          for (auto& warning : outcome.warnings)
            bundle.failures.push_back("synthesize: " + warning);
        } catch (const Error& e) {
          bundle.failures.push_back("synthesize " + vr.id + ": " + e.what());
        }
      }
      save_pairs(candidates, candidates_path);
    });

    const auto decisions_path = out / "filter_decisions.jsonl";
    const auto accepted_path = out / "accepted_pairs.jsonl";
    stage("filter", accepted_path, [&] {
      auto candidates = load_pairs(candidates_path);
      VrIndex zero_index =
          build_index(corpus, provider, uniform_weight_table(), built_at);
      auto decisions =
          rank_filter(candidates, zero_index, provider, config.filter_fraction);
      save_filter_decisions(decisions, candidates, decisions_path);
      std::vector<CandidatePair> accepted;
      for (std::size_t i = 0; i < decisions.size(); ++i)
        if (decisions[i].accepted) accepted.push_back(candidates[i]);
      save_pairs(accepted, accepted_path);
    });

    const auto train_path = out / "pairs_train.jsonl";
    const auto val_path = out / "pairs_val.jsonl";
    stage("split", val_path, [&] {
      auto accepted = load_pairs(accepted_path);
      auto [train, val] = split_train_val(accepted, 0.9, 0.1,
                                          config.split_seed);
      save_pairs(train, train_path);
      save_pairs(val, val_path);
    });

    stage("train", weights_path, [&] {
      auto train_pairs = load_pairs(train_path);
      auto val_pairs = load_pairs(val_path);
      std::vector<TrainPair> train, val;
      for (const auto& pair : train_pairs)
        train.push_back({pair.fr_text, pair.vr_id});
      for (const auto& pair : val_pairs)
        val.push_back({pair.fr_text, pair.vr_id});
      auto init = init_weight_table(compute_tf_idf(corpus));
      auto [table, report] =
          train_weights(train, val, corpus, provider, init, config.train);
      for (const auto& warning : report.warnings)
        bundle.failures.push_back("train: " + warning);
      json doc = json::parse(weight_table_to_json(table));
      doc["config_hash"] = hash;
      doc["epoch_loss"] = report.epoch_loss;
      doc["validation_top5_rate"] = report.validation_top5_rate;
      write_json(doc, weights_path);
    });
  }

  // ---- Phase II: index -> retrieve/generate -> scope-filter -> evaluate ----
  const auto index_dir = out / "index";
  stage("index", index_dir / "manifest.json", [&] {
    std::ifstream win(weights_path);
    std::stringstream buffer;
    buffer << win.rdbuf();
    auto table = weight_table_from_json(buffer.str());
    std::filesystem::create_directories(index_dir);
    save_index(build_index(corpus, provider, table, built_at), index_dir);
  });
  VrIndex index = load_index(index_dir);

  for (const auto& [project, fr_path] : config.fr_datasets) {
    const auto sr_path = out / ("srs_" + project + ".jsonl");
    stage("generate:" + project, sr_path, [&, project, fr_path] {
      auto report = ingest_frs(fr_path, project);
      for (const auto& rejected : report.rejected)
        bundle.failures.push_back("ingest " + project + ": " + rejected);
      SrSet set = derive_srs(report.set, index, provider, corpus,
                             config.retrieval_k, *gateway, generation_tmpl,
                             config.gateway.chat_model_id,
                             static_cast<std::int64_t>(config.train.seed));
      for (const auto& failure : set.failures)
        bundle.failures.push_back("generate " + project + ": " + failure);
      save_sr_set(set, sr_path);
    });
    bundle.sr_sets.push_back(sr_path);

    const auto scope_path = out / ("scope_" + project + ".json");
    stage("scope:" + project, scope_path, [&, project, sr_path, scope_path] {
      SrSet set = load_sr_set(sr_path);
      std::vector<std::string> texts;
      std::vector<std::size_t> record_index;
      for (std::size_t i = 0; i < set.records.size(); ++i)
        if (!set.records[i].gated) {
          texts.push_back(set.records[i].text);
          record_index.push_back(i);
        }
      auto decisions = filter_out_of_scope(texts, project, keyword_sets);
      json doc;
      doc["config_hash"] = hash;
      doc["project"] = project;
      doc["decisions"] = json::array();
      for (std::size_t i = 0; i < decisions.size(); ++i) {
        json row;
        row["record_index"] = record_index[i];
        row["in_scope"] = decisions[i].in_scope;
        if (decisions[i].matched_keyword)
          row["matched_keyword"] = *decisions[i].matched_keyword;
        if (decisions[i].matched_foreign_project)
          row["matched_foreign_project"] =
              *decisions[i].matched_foreign_project;
        doc["decisions"].push_back(std::move(row));
      }
      write_json(doc, scope_path);
    });
    bundle.scope_reports.push_back(scope_path);
  }

  const auto evaluation_path = out / "evaluation.json";
  stage("evaluate", evaluation_path, [&] {
    json report;
    report["config_hash"] = hash;
    report["projects"] = json::object();
    std::map<std::string, std::vector<double>> si_samples;

    for (const auto& [project, fr_path] : config.fr_datasets) {
      SrSet set = load_sr_set(out / ("srs_" + project + ".jsonl"));
      std::ifstream sin(out / ("scope_" + project + ".json"));
      json scope_doc;
      sin >> scope_doc;
      std::map<std::size_t, bool> in_scope_by_record;
      for (const auto& row : scope_doc["decisions"])
        in_scope_by_record[row["record_index"].get<std::size_t>()] =
            row["in_scope"].get<bool>();

      std::vector<std::string> texts;
      std::vector<bool> flags;
      std::map<std::string, std::vector<std::string>> per_fr;
      std::map<std::string, bool> fr_in_scope;
      for (std::size_t i = 0; i < set.records.size(); ++i) {
        const auto& rec = set.records[i];
        if (rec.gated) continue;
        bool in_scope = in_scope_by_record.count(i)
                            ? in_scope_by_record.at(i)
                            : true;
        texts.push_back(rec.text);
        flags.push_back(in_scope);
        per_fr[rec.fr_id].push_back(rec.text);
        // an FR counts as in scope while any of its SRs survives
        if (in_scope || !fr_in_scope.count(rec.fr_id))
          fr_in_scope[rec.fr_id] = fr_in_scope[rec.fr_id] || in_scope;
        si_samples[project].push_back(
            self_information(rec.text, *scorer, in_scope));
      }

      json entry;
      entry["n_total"] = set.attempted;
      entry["n_generated"] = set.generated;
      entry["n_gated"] = set.gated;
      std::size_t n_in_scope = 0;
      for (bool f : flags)
        if (f) ++n_in_scope;
      entry["n_in_scope"] = n_in_scope;
      if (!texts.empty()) {
        entry["self_information_mean"] =
            mean_self_information(texts, flags, *scorer);
        entry["vocabulary_size"] = vocabulary_size(texts, flags);
      }
      if (per_fr.size() >= 2) {
        auto sb = self_bleu(per_fr, fr_in_scope, config.self_bleu_seed);
        entry["self_bleu_mean"] = sb.mean;
        for (const auto& warning : sb.warnings)
          bundle.failures.push_back("evaluate " + project + ": " + warning);
      }
      report["projects"][project] = std::move(entry);
    }

    // statistics sub-report over the first two projects with usable
    // SI samples; degenerate cases are recorded, not fatal
    json stats = json::object();
    std::vector<std::string> keys;
    for (const auto& [project, samples] : si_samples)
      if (samples.size() >= 2) keys.push_back(project);
    if (keys.size() >= 2) {
      try {
        auto welch = welch_t(si_samples[keys[0]], si_samples[keys[1]]);
        stats["welch"] = {{"a", keys[0]},
                          {"b", keys[1]},
                          {"t", welch.t},
                          {"df", welch.df},
                          {"p_value", welch.p_value}};
      } catch (const Error& e) {
        stats["welch"] = {{"error", e.what()}};
      }
      // subjects = shared sample positions, raters = the two projects
      std::size_t n =
          std::min(si_samples[keys[0]].size(), si_samples[keys[1]].size());
      std::vector<std::vector<double>> ratings;
      for (std::size_t i = 0; i < n; ++i)
        ratings.push_back({si_samples[keys[0]][i], si_samples[keys[1]][i]});
      try {
        auto icc = icc_2k(ratings);
        stats["icc"] = {{"icc", icc.icc},
                        {"f_statistic", icc.f_statistic},
                        {"df1", icc.df1},
                        {"df2", icc.df2},
                        {"p_value", icc.p_value},
                        {"design", icc.design}};
      } catch (const Error& e) {
        stats["icc"] = {{"error", e.what()}};
      }
    }
    report["statistics"] = std::move(stats);
    write_json(report, evaluation_path);
  });
  bundle.evaluation_report = evaluation_path;

  // append-only output directory: the manifest from the first complete
  // run stands; reruns only fill in missing artifacts
  const auto manifest_path = out / "run_manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    json manifest;
    manifest["config_hash"] = hash;
    manifest["corpus_hash"] = corpus_hash(corpus);
    manifest["provider_id"] = provider.provider_id();
    manifest["gateway_mode"] = config.gateway.mode;
    manifest["scorer_id"] = scorer->scorer_id();
    manifest["deterministic"] = config.deterministic;
    manifest["built_at"] = built_at;
    manifest["stages_run"] = bundle.stages_run;
    manifest["stages_skipped"] = bundle.stages_skipped;
    manifest["failures"] = bundle.failures;
    // artifact refs are relative to the bundle directory so two runs of
    // the same config produce byte-identical manifests
    json artifacts = json::array();
    auto rel = [&out](const std::filesystem::path& p) {
      return std::filesystem::relative(p, out).generic_string();
    };
    artifacts.push_back(rel(out / "trained_weights.json"));
    artifacts.push_back(rel(index_dir));
    for (const auto& p : bundle.sr_sets) artifacts.push_back(rel(p));
    for (const auto& p : bundle.scope_reports) artifacts.push_back(rel(p));
    artifacts.push_back(rel(evaluation_path));
    manifest["artifacts"] = std::move(artifacts);
    write_json(manifest, manifest_path);
  }
  bundle.run_manifest = manifest_path;
  return bundle;
}

}  // namespace secreq
