#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "secreq/corpus.hpp"
#include "secreq/errors.hpp"
#include "secreq/metrics.hpp"
#include "secreq/pipeline.hpp"
#include "secreq/retriever.hpp"
#include "secreq/scope.hpp"
#include "secreq/srgen.hpp"
#include "secreq/stats.hpp"
#include "secreq/synthesis.hpp"
#include "secreq/text.hpp"
#include "secreq/weighting.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace secreq;

namespace {

VrCorpus load_corpus(const std::string& asvs, const std::string& exclusions) {
  VrCorpus corpus = ingest_asvs_file(asvs);
  if (!exclusions.empty())
    corpus = apply_exclusions(corpus, load_exclusion_config(exclusions));
  return corpus;
}

std::vector<CandidatePair> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open pair file: " + path);
  std::vector<CandidatePair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row = json::parse(line);
    pairs.push_back({row.at("fr_text").get<std::string>(),
                     row.at("vr_id").get<std::string>(),
                     row.value("provenance", "synthetic"),
                     row.value("batch_id", std::string{})});
  }
  return pairs;
}

void write_pairs(const std::vector<CandidatePair>& pairs, std::ostream& out) {
  for (const auto& pair : pairs) {
    json row;
    row["fr_text"] = pair.fr_text;
    row["vr_id"] = pair.vr_id;
    row["provenance"] = pair.provenance;
    row["batch_id"] = pair.batch_id;
    out << row.dump() << '\n';
  }
}

TokenWeightTable read_weight_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open weight table: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return weight_table_from_json(buffer.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Security-requirement derivation toolkit"};
  app.require_subcommand(1);

  // common option storage
  std::string asvs, exclusions, out_path, fr_file, project, index_dir;
  std::string weights_path, template_path, keywords, config_path;
  std::string pairs_path, val_path, gateway_mode = "mock-synthetic";
  std::string model_id = "chat-default";
  std::size_t k = 5, dim = 64;
  int count = 10;
  double fraction = 0.3;
  std::uint64_t seed = 11, embed_seed = 0x5ec7e9u;
  long long population = 0;
  double confidence = 0.95, margin = 0.05, proportion = 0.5;

  auto* ingest_asvs_cmd =
      app.add_subcommand("ingest-asvs", "Parse an ASVS JSON file and report "
                                        "per-chapter verification counts");
  ingest_asvs_cmd->add_option("--asvs", asvs, "ASVS JSON file")->required();
  ingest_asvs_cmd->add_option("--exclusions", exclusions,
                              "section exclusion config");

  auto* ingest_frs_cmd = app.add_subcommand(
      "ingest-frs", "Validate a JSON-lines functional-requirement dataset");
  ingest_frs_cmd->add_option("--fr-file", fr_file, "FR JSON-lines file")
      ->required();
  ingest_frs_cmd->add_option("--project", project, "project name")->required();

  auto* synth_cmd = app.add_subcommand(
      "synth-pairs", "Synthesize candidate FR texts for every VR");
  synth_cmd->add_option("--asvs", asvs)->required();
  synth_cmd->add_option("--exclusions", exclusions);
  synth_cmd->add_option("--template", template_path)->required();
  synth_cmd->add_option("--count", count, "FRs per VR");
  synth_cmd->add_option("--gateway", gateway_mode,
                        "mock-synthetic | echo | mock-script:<file>");
  synth_cmd->add_option("--out", out_path)->required();

  auto* filter_cmd = app.add_subcommand(
      "filter-pairs", "Keep pairs whose VR ranks inside the threshold");
  filter_cmd->add_option("--pairs", pairs_path)->required();
  filter_cmd->add_option("--asvs", asvs)->required();
  filter_cmd->add_option("--exclusions", exclusions);
  filter_cmd->add_option("--fraction", fraction);
  filter_cmd->add_option("--dim", dim);
  filter_cmd->add_option("--embed-seed", embed_seed);
  filter_cmd->add_option("--out", out_path)->required();
  filter_cmd->add_option("--decisions", val_path, "decision log output");

  auto* split_cmd =
      app.add_subcommand("split", "Shuffle pairs into train/validation");
  split_cmd->add_option("--pairs", pairs_path)->required();
  split_cmd->add_option("--seed", seed);
  split_cmd->add_option("--train-out", out_path)->required();
  split_cmd->add_option("--val-out", val_path)->required();

  auto* build_cmd =
      app.add_subcommand("build-index", "Build and persist a retrieval index");
  build_cmd->add_option("--asvs", asvs)->required();
  build_cmd->add_option("--exclusions", exclusions);
  build_cmd->add_option("--weights", weights_path,
                        "weight table JSON (default uniform)");
  build_cmd->add_option("--dim", dim);
  build_cmd->add_option("--embed-seed", embed_seed);
  build_cmd->add_option("--out", index_dir)->required();

  auto* train_cmd =
      app.add_subcommand("train", "Train token weights on FR-VR pairs");
  train_cmd->add_option("--train-pairs", pairs_path)->required();
  train_cmd->add_option("--val-pairs", val_path);
  train_cmd->add_option("--asvs", asvs)->required();
  train_cmd->add_option("--exclusions", exclusions);
  train_cmd->add_option("--dim", dim);
  train_cmd->add_option("--embed-seed", embed_seed);
  TrainConfig train_config;
  train_cmd->add_option("--lr", train_config.learning_rate);
  train_cmd->add_option("--epochs", train_config.epochs);
  train_cmd->add_option("--batch-size", train_config.batch_size);
  train_cmd->add_option("--seed", train_config.seed);
  train_cmd->add_option("--out", out_path)->required();

  auto* retrieve_cmd =
      app.add_subcommand("retrieve", "Top-k VRs for every FR in a dataset");
  retrieve_cmd->add_option("--fr-file", fr_file)->required();
  retrieve_cmd->add_option("--project", project);
  retrieve_cmd->add_option("--index", index_dir)->required();
  retrieve_cmd->add_option("--k", k);

  auto* generate_cmd = app.add_subcommand(
      "generate", "Derive security requirements for an FR dataset");
  generate_cmd->add_option("--fr-file", fr_file)->required();
  generate_cmd->add_option("--project", project)->required();
  generate_cmd->add_option("--index", index_dir)->required();
  generate_cmd->add_option("--asvs", asvs)->required();
  generate_cmd->add_option("--exclusions", exclusions);
  generate_cmd->add_option("--template", template_path)->required();
  generate_cmd->add_option("--k", k);
  generate_cmd->add_option("--gateway", gateway_mode);
  generate_cmd->add_option("--model", model_id);
  generate_cmd->add_option("--out", out_path)->required();

  auto* scope_cmd = app.add_subcommand(
      "scope-filter", "Flag SRs that mention foreign-project keywords");
  scope_cmd->add_option("--srs", pairs_path, "SR set JSON-lines")->required();
  scope_cmd->add_option("--project", project)->required();
  scope_cmd->add_option("--keywords", keywords)->required();

  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "Self-information / Self-BLEU / vocabulary report");
  evaluate_cmd->add_option("--srs", pairs_path)->required();
  evaluate_cmd->add_option("--project", project)->required();
  evaluate_cmd->add_option("--keywords", keywords)->required();
  evaluate_cmd->add_option("--seed", seed);
  std::size_t vocab_size = 65536;
  evaluate_cmd->add_option("--scorer-vocab", vocab_size);

  auto* sample_cmd =
      app.add_subcommand("sample-size", "Minimum sample size calculator");
  sample_cmd->add_option("--population", population, "0 = unbounded");
  sample_cmd->add_option("--confidence", confidence);
  sample_cmd->add_option("--margin", margin);
  sample_cmd->add_option("--proportion", proportion);

  auto* report_cmd =
      app.add_subcommand("report", "Run the full two-phase pipeline");
  report_cmd->add_option("--config", config_path, "run config JSON")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  auto make_gateway = [&]() -> std::unique_ptr<ChatClient> {
    GatewaySpec spec;
    if (gateway_mode.rfind("mock-script:", 0) == 0) {
      spec.mode = "mock-script";
      spec.script_path = gateway_mode.substr(12);
    } else {
      spec.mode = gateway_mode;
    }
    return make_chat_client(spec);
  };

  try {
    if (*ingest_asvs_cmd) {
      auto corpus = load_corpus(asvs, exclusions);
      json report;
      report["source_version"] = corpus.source_version;
      report["valid"] = corpus.records.size();
      report["excluded"] = corpus.exclusion_log.size();
      report["per_chapter"] = json::object();
      for (const auto& [chapter, n] : corpus.per_chapter_counts())
        report["per_chapter"][std::to_string(chapter)] = n;
      std::cout << report.dump(1) << '\n';
    } else if (*ingest_frs_cmd) {
      auto report = ingest_frs(fr_file, project);
      json doc;
      doc["project"] = project;
      doc["accepted"] = report.set.records.size();
      doc["rejected"] = report.rejected;
      std::cout << doc.dump(1) << '\n';
      if (!report.rejected.empty()) return 1;
    } else if (*synth_cmd) {
      auto corpus = load_corpus(asvs, exclusions);
      auto tmpl = SynthesisTemplate::from_file(template_path);
      auto gateway = make_gateway();
      std::vector<CandidatePair> pairs;
      for (const auto& vr : corpus.records) {
        auto outcome = synthesize_frs(vr, count, *gateway, tmpl, model_id);
        for (auto& warning : outcome.warnings)
          std::cerr << warning << '\n';
        for (auto& pair : outcome.pairs) pairs.push_back(std::move(pair));
      }
      std::ofstream out(out_path);
      write_pairs(pairs, out);
      std::cout << pairs.size() << " candidate pairs written\n";
    } else if (*filter_cmd) {
      auto corpus = load_corpus(asvs, exclusions);
      HashEmbedder provider(dim, embed_seed);
      auto index = build_index(corpus, provider, uniform_weight_table());
      auto pairs = read_pairs(pairs_path);
      auto decisions = rank_filter(pairs, index, provider, fraction);
      if (!val_path.empty()) save_filter_decisions(decisions, pairs, val_path);
      std::vector<CandidatePair> accepted;
      for (std::size_t i = 0; i < decisions.size(); ++i)
        if (decisions[i].accepted) accepted.push_back(pairs[i]);
      std::ofstream out(out_path);
      write_pairs(accepted, out);
      std::cout << accepted.size() << " of " << pairs.size()
                << " pairs accepted (threshold rank "
                << (decisions.empty() ? 0 : decisions[0].threshold_rank)
                << ")\n";
    } else if (*split_cmd) {
      auto pairs = read_pairs(pairs_path);
      auto [train, val] = split_train_val(pairs, 0.9, 0.1, seed);
      std::ofstream tout(out_path), vout(val_path);
      write_pairs(train, tout);
      write_pairs(val, vout);
      std::cout << train.size() << " train / " << val.size()
                << " validation\n";
    } else if (*build_cmd) {
      auto corpus = load_corpus(asvs, exclusions);
      HashEmbedder provider(dim, embed_seed);
      auto table = weights_path.empty() ? uniform_weight_table()
                                        : read_weight_table(weights_path);
      fs::create_directories(index_dir);
      save_index(build_index(corpus, provider, table), index_dir);
      std::cout << "index written to " << index_dir << '\n';
    } else if (*train_cmd) {
      auto corpus = load_corpus(asvs, exclusions);
      HashEmbedder provider(dim, embed_seed);
      std::vector<TrainPair> train, val;
      for (const auto& pair : read_pairs(pairs_path))
        train.push_back({pair.fr_text, pair.vr_id});
      if (!val_path.empty())
        for (const auto& pair : read_pairs(val_path))
          val.push_back({pair.fr_text, pair.vr_id});
      auto init = init_weight_table(compute_tf_idf(corpus));
      auto [table, report] =
          train_weights(train, val, corpus, provider, init, train_config);
      std::ofstream out(out_path);
      out << weight_table_to_json(table) << '\n';
      json summary;
      summary["epoch_loss"] = report.epoch_loss;
      summary["validation_top5_rate"] = report.validation_top5_rate;
      summary["warnings"] = report.warnings;
      std::cout << summary.dump(1) << '\n';
    } else if (*retrieve_cmd) {
      auto index = load_index(index_dir);
      HashEmbedder provider(index.manifest.dim,
                            embed_seed);  // provider must match the index
      auto report =
          ingest_frs(fr_file, project.empty() ? "default" : project);
      for (const auto& fr : report.set.records) {
        auto results = retrieve_top_k(index, provider, fr.text, k);
        json row;
        row["fr_id"] = fr.id;
        row["results"] = json::array();
        for (const auto& r : results)
          row["results"].push_back(
              {{"vr_id", r.vr_id}, {"score", r.score}, {"rank", r.rank}});
        std::cout << row.dump() << '\n';
      }
    } else if (*generate_cmd) {
      auto corpus = load_corpus(asvs, exclusions);
      auto index = load_index(index_dir);
      HashEmbedder provider(index.manifest.dim, embed_seed);
      auto tmpl = GenerationTemplate::from_file(template_path);
      auto gateway = make_gateway();
      auto report = ingest_frs(fr_file, project);
      auto set = derive_srs(report.set, index, provider, corpus, k, *gateway,
                            tmpl, model_id);
      save_sr_set(set, out_path);
      std::cout << set.attempted << " attempted, " << set.generated
                << " generated, " << set.gated << " gated, "
                << set.failures.size() << " failures\n";
      if (!set.failures.empty()) return 1;
    } else if (*scope_cmd) {
      auto set = load_sr_set(pairs_path);
      auto keyword_sets = load_keyword_config(keywords);
      std::vector<std::string> texts;
      for (const auto& rec : set.records)
        if (!rec.gated) texts.push_back(rec.text);
      auto decisions = filter_out_of_scope(texts, project, keyword_sets);
      for (const auto& d : decisions) {
        json row;
        row["sr_index"] = d.sr_index;
        row["in_scope"] = d.in_scope;
        if (d.matched_keyword) row["matched_keyword"] = *d.matched_keyword;
        if (d.matched_foreign_project)
          row["matched_foreign_project"] = *d.matched_foreign_project;
        std::cout << row.dump() << '\n';
      }
    } else if (*evaluate_cmd) {
      auto set = load_sr_set(pairs_path);
      auto keyword_sets = load_keyword_config(keywords);
      std::vector<std::string> texts;
      std::map<std::string, std::vector<std::string>> per_fr;
      for (const auto& rec : set.records)
        if (!rec.gated) {
          texts.push_back(rec.text);
          per_fr[rec.fr_id].push_back(rec.text);
        }
      auto decisions = filter_out_of_scope(texts, project, keyword_sets);
      std::vector<bool> flags;
      for (const auto& d : decisions) flags.push_back(d.in_scope);
      UnigramScorer scorer(vocab_size);
      json report;
      report["project"] = project;
      report["n_total"] = texts.size();
      std::size_t in_scope = 0;
      for (bool f : flags)
        if (f) ++in_scope;
      report["n_in_scope"] = in_scope;
      if (!texts.empty()) {
        report["self_information_mean"] =
            mean_self_information(texts, flags, scorer);
        report["vocabulary_size"] = vocabulary_size(texts, flags);
      }
      if (per_fr.size() >= 2) {
        std::map<std::string, bool> fr_scope;
        for (const auto& [fr_id, _] : per_fr) fr_scope[fr_id] = true;
        report["self_bleu_mean"] = self_bleu(per_fr, fr_scope, seed).mean;
      }
      std::cout << report.dump(1) << '\n';
    } else if (*sample_cmd) {
      SampleSizeSpec spec;
      spec.population = population;
      spec.confidence = confidence;
      spec.margin = margin;
      spec.proportion = proportion;
      std::cout << min_sample_size(spec) << '\n';
    } else if (*report_cmd) {
      auto config = RunConfig::from_file(config_path);
      auto bundle = end_to_end(config);
      json doc;
      doc["run_manifest"] = bundle.run_manifest.string();
      doc["evaluation_report"] = bundle.evaluation_report.string();
      doc["stages_run"] = bundle.stages_run;
      doc["stages_skipped"] = bundle.stages_skipped;
      doc["failures"] = bundle.failures;
      std::cout << doc.dump(1) << '\n';
    }
  } catch (const Error& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << '\n';
    return 1;
  }
  return 0;
}
