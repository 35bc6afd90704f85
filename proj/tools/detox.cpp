// detox: command-line front end for the corpus, collection, discourse,
// injection, training, evaluation and judging tools.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

#include "detox/collect.hpp"
#include "detox/corpus.hpp"
#include "detox/discourse.hpp"
#include "detox/eval.hpp"
#include "detox/inject.hpp"
#include "detox/judge.hpp"
#include "detox/judge_service.hpp"
#include "detox/train.hpp"

namespace fs = std::filesystem;
using namespace detox;

namespace {

fs::path data_dir() {
  const char* env = std::getenv("DETOX_DATA_DIR");
  return env && *env ? fs::path(env) : fs::path("detox-data");
}

json read_json(const fs::path& path) { return json::parse(read_file(path)); }

template <typename T>
std::vector<T> read_rows(const fs::path& path) {
  std::vector<T> out;
  for (const auto& row : read_jsonl(path)) out.push_back(row.get<T>());
  return out;
}

template <typename T>
void write_rows(const fs::path& path, const std::vector<T>& rows) {
  std::vector<json> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.emplace_back(row);
  write_jsonl(path, out);
}

int corpus_validate(const fs::path& path) {
  auto corpus = load_corpus(path);
  std::cout << path.string() << ": " << corpus.size() << " valid records\n";
  for (const auto& [group, count] : group_counts(corpus)) {
    std::cout << "  " << group << "\t" << count << "\n";
  }
  return 0;
}

int corpus_split(const fs::path& path, std::uint64_t seed, const std::string& ratios,
                 const fs::path& out_dir) {
  SplitSpec spec;
  spec.seed = seed;
  spec.ratios = parse_ratios(ratios);
  const auto result = split(load_corpus(path), spec);
  save_corpus(out_dir / "train.jsonl", result.train);
  save_corpus(out_dir / "dev.jsonl", result.dev);
  save_corpus(out_dir / "test.jsonl", result.test);
  save_corpus(out_dir / "excluded.jsonl", result.excluded);
  std::cout << "train " << result.train.size() << ", dev " << result.dev.size() << ", test "
            << result.test.size() << ", excluded " << result.excluded.size() << "\n";
  return 0;
}

int collect_run(const std::string& source_spec, const std::string& classifier_spec,
                const fs::path& out, std::optional<fs::path> log_path, std::size_t max_length,
                long poll_interval_s, long max_poll_age_s) {
  const std::string prefix = "replay:";
  if (source_spec.rfind(prefix, 0) != 0) {
    throw Error("unsupported source '" + source_spec + "' (expected replay:<events.jsonl>)");
  }
  auto source = ReplaySource::from_file(source_spec.substr(prefix.size()));
  auto classifier = make_classifier(classifier_spec);
  PipelineConfig config;
  config.max_length_tokens = max_length;
  config.poll_interval = std::chrono::seconds(poll_interval_s);
  config.max_poll_age = std::chrono::seconds(max_poll_age_s);
  config.persistence_path = log_path ? *log_path : data_dir() / "collect" / "log.jsonl";
  auto result = run_pipeline(source, *classifier, config, out);
  std::cout << result.stats.to_json().dump(2) << "\n";
  return 0;
}

int discourse_annotate(const fs::path& corpus_path, const std::optional<fs::path>& explicit_path,
                       const std::optional<std::string>& implicit_spec,
                       const std::optional<std::string>& rst_spec, const fs::path& out,
                       std::size_t workers) {
  auto corpus = load_corpus(corpus_path);
  std::optional<ConnectiveLexicon> lexicon;
  if (explicit_path) lexicon = ConnectiveLexicon::from_tsv(*explicit_path);
  std::unique_ptr<ParserAdapter> implicit, rst;
  if (implicit_spec) implicit = make_parser(Framework::kPdtbImplicit, *implicit_spec);
  if (rst_spec) rst = make_parser(Framework::kRstRoot, *rst_spec);
  Annotators annotators;
  annotators.lexicon = lexicon ? &*lexicon : nullptr;
  annotators.implicit = implicit.get();
  annotators.rst = rst.get();
  std::vector<AnnotationRequest> requests;
  for (const auto& record : corpus) {
    requests.push_back({record.id, record.original,
                        record.parent_body.empty() ? std::nullopt
                                                   : std::optional<std::string>(record.parent_body)});
  }
  auto annotated = annotate_corpus(requests, annotators, workers);
  save_relations(out, annotated);
  std::size_t total = 0;
  for (const auto& record : annotated) total += record.relations.size();
  std::cout << total << " relations over " << annotated.size() << " records\n";
  return 0;
}

int inject_run(const fs::path& config_path, const fs::path& corpus_path,
               const fs::path& relations_path, const fs::path& out) {
  const auto config = read_json(config_path).get<InjectionConfig>();
  const auto corpus = load_corpus(corpus_path);
  const auto relations = load_relations(relations_path);
  std::map<std::string, std::vector<DiscourseRelation>> training;
  for (const auto& record : corpus) {
    if (record.split != SplitName::kTrain) continue;
    auto it = relations.find(record.id);
    training[record.id] = it == relations.end() ? std::vector<DiscourseRelation>{} : it->second;
  }
  if (training.empty() && config.alpha_policy != ThresholdKind::kZero) {
    throw Error("no records with split \"train\"; threshold statistics need the training split");
  }
  const Thresholds thresholds = resolve_thresholds(config, training);
  std::vector<ModelInput> inputs;
  static const std::vector<DiscourseRelation> kNone;
  for (const auto& record : corpus) {
    auto it = relations.find(record.id);
    inputs.push_back(build_input(record, it == relations.end() ? kNone : it->second, config,
                                 thresholds));
  }
  write_rows(out, inputs);
  std::cerr << "alpha: explicit " << thresholds.pdtb_explicit << ", implicit "
            << thresholds.pdtb_implicit << ", rst " << thresholds.rst << "\n";
  std::cout << inputs.size() << " inputs written to " << out.string() << "\n";
  return 0;
}

int train_run(const std::string& backend_name, const fs::path& inputs_path,
              const fs::path& targets_path, const fs::path& config_path, const fs::path& out) {
  if (backend_name != "ref") throw Error("unknown backend '" + backend_name + "'");
  const json spec = read_json(config_path);
  const auto config = spec.get<TrainConfig>();
  ReferenceOptions options;
  if (spec.contains("backend")) options = spec.at("backend").get<ReferenceOptions>();
  options.max_positions = std::max(options.max_positions, config.block_size);
  ReferenceBackend backend(options);

  const auto inputs = read_rows<ModelInput>(inputs_path);
  bool marked = false;
  for (const auto& input : inputs) marked = marked || !input.tokens_used.empty();
  if (spec.contains("injection")) {
    const auto injection = spec.at("injection").get<InjectionConfig>();
    const auto tokens = vocabulary(injection);
    if (!tokens.empty()) augment_tokenizer(backend, tokens);
  } else if (marked) {
    throw Error("inputs carry special tokens; add the \"injection\" config to " +
                config_path.string() + " so the tokenizer can be augmented");
  }
  const auto dataset = make_training_set(inputs, load_corpus(targets_path));
  const auto curve = finetune(backend, dataset, config);
  backend.save(out);
  std::cout << "trained on " << dataset.size() << " pairs; loss per epoch:";
  for (double loss : curve) std::cout << " " << loss;
  std::cout << "\n";
  return 0;
}

int generate_run(const fs::path& model_dir, const fs::path& inputs_path, const fs::path& gen_path,
                 const fs::path& out, std::size_t workers) {
  const auto backend = ReferenceBackend::load(model_dir);
  const auto params = read_json(gen_path).get<GenerationParams>();
  const auto inputs = read_rows<ModelInput>(inputs_path);
  write_rows(out, generate_all(backend, inputs, params, workers));
  std::cout << inputs.size() << " outputs written to " << out.string() << "\n";
  return 0;
}

int eval_run(const fs::path& outputs_path, const fs::path& corpus_path,
             const std::string& classifier_spec, const std::string& scorer_spec,
             const fs::path& report_path, const std::string& label) {
  auto classifier = make_classifier(classifier_spec);
  auto scorer = make_scorer(scorer_spec);
  const auto report = evaluate(read_rows<GeneratedOutput>(outputs_path), load_corpus(corpus_path),
                               *classifier, *scorer, label);
  write_file(report_path, json(report).dump(2) + "\n");
  std::cout << format_table({report});
  return 0;
}

int report_run(const std::vector<fs::path>& paths, const std::string& format) {
  std::vector<EvalReport> reports;
  for (const auto& path : paths) reports.push_back(read_json(path).get<EvalReport>());
  if (format == "table") {
    std::cout << format_table(reports);
  } else if (format == "json") {
    std::cout << json(reports).dump(2) << "\n";
  } else {
    throw Error("unknown format '" + format + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discourse-aware offensive-comment rewriting toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  // corpus
  auto* corpus = app.add_subcommand("corpus", "Validate and split StyleTransferPair corpora");
  corpus->require_subcommand(1);
  fs::path corpus_path, out_dir;
  std::uint64_t seed = 0;
  std::string ratios = "0.8,0.1,0.1";
  auto* validate = corpus->add_subcommand("validate", "Check every record; print group totals");
  validate->add_option("path", corpus_path, "corpus JSONL")->required();
  validate->callback([&] { action = [&] { return corpus_validate(corpus_path); }; });
  auto* split_cmd = corpus->add_subcommand("split", "Seeded train/dev/test split");
  split_cmd->add_option("path", corpus_path, "corpus JSONL")->required();
  split_cmd->add_option("--seed", seed, "split seed");
  split_cmd->add_option("--ratios", ratios, "train,dev,test ratios");
  split_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  split_cmd->callback([&] {
    action = [&] { return corpus_split(corpus_path, seed, ratios, out_dir); };
  });

  // collect
  auto* collect = app.add_subcommand("collect", "Moderation-stream collection pipeline");
  collect->require_subcommand(1);
  std::string source_spec, classifier_spec = "lexicon";
  fs::path collect_out;
  std::optional<fs::path> log_path;
  std::size_t max_length = 512;
  long poll_interval_s = 3600, max_poll_age_s = 7 * 24 * 3600;
  auto* run = collect->add_subcommand("run", "Run the pipeline to completion (resumes a log)");
  run->add_option("--source", source_spec, "replay:<events.jsonl>")->required();
  run->add_option("--classifier", classifier_spec, "lexicon | lexicon:<file> | table:<file>");
  run->add_option("--out", collect_out, "retained records JSONL")->required();
  run->add_option("--log", log_path, "persistence log (default $DETOX_DATA_DIR/collect/log.jsonl)");
  run->add_option("--max-length", max_length, "length filter in tokens");
  run->add_option("--poll-interval", poll_interval_s, "seconds between status polls");
  run->add_option("--max-poll-age", max_poll_age_s, "seconds before an unremoved comment times out");
  run->callback([&] {
    action = [&] {
      return collect_run(source_spec, classifier_spec, collect_out, log_path, max_length,
                         poll_interval_s, max_poll_age_s);
    };
  });

  // discourse
  auto* discourse = app.add_subcommand("discourse", "Discourse relation extraction");
  discourse->require_subcommand(1);
  fs::path relations_out;
  std::optional<fs::path> explicit_path;
  std::optional<std::string> implicit_spec, rst_spec;
  std::size_t workers = 1;
  auto* annotate = discourse->add_subcommand("annotate", "Annotate a corpus");
  annotate->add_option("corpus", corpus_path, "corpus JSONL")->required();
  annotate->add_option("--explicit", explicit_path, "connective lexicon TSV");
  annotate->add_option("--implicit", implicit_spec, "stub:<gold.jsonl> | const:<Sense>@<conf>");
  annotate->add_option("--rst", rst_spec, "stub:<gold.jsonl> | const:<Class>@<conf>");
  annotate->add_option("--out", relations_out, "relations JSONL")->required();
  annotate->add_option("--workers", workers, "parallel workers");
  annotate->callback([&] {
    action = [&] {
      return discourse_annotate(corpus_path, explicit_path, implicit_spec, rst_spec,
                                relations_out, workers);
    };
  });

  // inject
  fs::path config_path, relations_path, inputs_out;
  auto* inject = app.add_subcommand("inject", "Build model inputs with relation tokens");
  inject->add_option("--config", config_path, "InjectionConfig JSON")->required();
  inject->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  inject->add_option("--relations", relations_path, "relations JSONL")->required();
  inject->add_option("--out", inputs_out, "ModelInput JSONL")->required();
  inject->callback([&] {
    action = [&] { return inject_run(config_path, corpus_path, relations_path, inputs_out); };
  });

  // train
  std::string backend = "ref";
  fs::path inputs_path, targets_path, model_dir;
  auto* train = app.add_subcommand("train", "Fine-tune a backend");
  train->add_option("--backend", backend, "backend name")->default_val("ref");
  train->add_option("--inputs", inputs_path, "ModelInput JSONL")->required();
  train->add_option("--targets", targets_path, "corpus JSONL with rewrites")->required();
  train->add_option("--config", config_path, "train JSON")->required();
  train->add_option("--out", model_dir, "model directory")->required();
  train->callback([&] {
    action = [&] { return train_run(backend, inputs_path, targets_path, config_path, model_dir); };
  });

  // generate
  fs::path gen_path, outputs_path;
  auto* generate_cmd = app.add_subcommand("generate", "Generate rewrites");
  generate_cmd->add_option("--model", model_dir, "model directory")->required();
  generate_cmd->add_option("--inputs", inputs_path, "ModelInput JSONL")->required();
  generate_cmd->add_option("--gen", gen_path, "GenerationParams JSON")->required();
  generate_cmd->add_option("--out", outputs_path, "outputs JSONL")->required();
  generate_cmd->add_option("--workers", workers, "parallel workers");
  generate_cmd->callback([&] {
    action = [&] { return generate_run(model_dir, inputs_path, gen_path, outputs_path, workers); };
  });

  // eval
  std::string scorer_spec = "token_f1", label;
  fs::path report_path;
  auto* eval = app.add_subcommand("eval", "BLEU, semantic score and SafeScore");
  eval->add_option("--outputs", outputs_path, "outputs JSONL")->required();
  eval->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  eval->add_option("--classifier", classifier_spec, "classifier adapter");
  eval->add_option("--scorer", scorer_spec, "semantic scorer adapter");
  eval->add_option("--report", report_path, "report JSON")->required();
  eval->add_option("--label", label, "row label");
  eval->callback([&] {
    action = [&] {
      return eval_run(outputs_path, corpus_path, classifier_spec, scorer_spec, report_path, label);
    };
  });

  // report
  std::vector<fs::path> report_paths;
  std::string format = "table";
  auto* report = app.add_subcommand("report", "Print reports");
  report->add_option("reports", report_paths, "report JSON files")->required();
  report->add_option("--format", format, "table | json");
  report->callback([&] { action = [&] { return report_run(report_paths, format); }; });

  // judge-serve
  ServiceConfig service;
  std::optional<std::string> token;
  bool hide_parent = false;
  std::optional<fs::path> service_relations;
  auto* serve = app.add_subcommand("judge-serve", "Serve the judging and annotation API");
  serve->add_option("--port", service.port, "TCP port");
  serve->add_option("--host", service.host, "bind address");
  serve->add_option("--data", service.data_dir, "data directory (default $DETOX_DATA_DIR)");
  serve->add_option("--token", token, "shared bearer token");
  serve->add_option("--relations", service_relations, "relations JSONL for the discourse subset");
  serve->add_flag("--hide-parent", hide_parent, "omit parent comments from judge payloads");
  serve->callback([&] {
    action = [&] {
      if (service.data_dir.empty()) service.data_dir = data_dir();
      service.token = token;
      service.show_parent = !hide_parent;
      service.relations_path = service_relations;
      JudgeService server(service);
      const int port = server.bind();
      std::cerr << "listening on " << service.host << ":" << port << "\n";
      server.listen();
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action ? action() : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
