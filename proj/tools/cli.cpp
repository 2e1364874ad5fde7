// Copyright 2026 The dtirex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace dtirex::cli {

namespace {

struct CorpusFlags {
  std::string split = "train";
  std::string abstracts;
  std::string entities;
  std::string relations;

  void add_to(CLI::App* cmd, bool relations_optional) {
    cmd->add_option("--split", split, "Corpus split from the config: train, dev or test")
        ->capture_default_str();
    cmd->add_option("--abstracts", abstracts, "Abstracts TSV (overrides --split)");
    cmd->add_option("--entities", entities, "Entities TSV");
    cmd->add_option("--relations", relations,
                    relations_optional ? "Relations TSV (optional)" : "Relations TSV");
  }

  CorpusPaths resolve(const RunConfig& cfg) const {
    CorpusPaths p;
    if (!abstracts.empty() || !entities.empty()) {
      p.abstracts = abstracts;
      p.entities = entities;
      p.relations = relations;
    } else {
      const SplitPaths& s = cfg.split(split);
      p.abstracts = s.abstracts;
      p.entities = s.entities;
      p.relations = relations.empty() ? s.relations : std::filesystem::path(relations);
    }
    if (p.abstracts.empty() || p.entities.empty()) {
      throw ConfigError(ConfigErrc::BadValue,
                        "no corpus given: pass --abstracts and --entities or set paths." + split +
                            ".abstracts and paths." + split + ".entities");
    }
    return p;
  }

  bool given() const { return !abstracts.empty() || !entities.empty(); }
};

std::filesystem::path require_path(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(ConfigErrc::BadValue, "missing " + what);
  return p;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(ConfigErrc::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(ConfigErrc::Io, "cannot write " + path.string());
  return out;
}

void report_diagnostics(const Diagnostics& diag, bool verbose, std::ostream& err) {
  if (verbose) {
    for (const auto& w : diag.warnings) err << "warning: " << w << '\n';
  } else if (!diag.warnings.empty()) {
    err << diag.warnings.size() << " warnings (rerun with --verbose to list them)\n";
  }
  for (const auto& [key, n] : diag.counters) err << key << ": " << n << '\n';
}

std::vector<RelationExample> read_examples_file(const std::filesystem::path& path, Diagnostics* diag) {
  auto in = open_in(path);
  return read_examples(in, diag);
}

std::vector<EncodedExample> encode_all(std::span<const RelationExample> examples, const Vocabulary& vocab,
                                       std::size_t max_len, Diagnostics* diag) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    if (auto enc = encode(ex, vocab, max_len, diag)) out.push_back(std::move(*enc));
  }
  return out;
}

int cmd_stats(const RunConfig& cfg, const CorpusFlags& corpus, bool verbose, std::ostream& out,
              std::ostream& err) {
  Diagnostics diag;
  const Corpus c = load_corpus(corpus.resolve(cfg), &diag);
  out << format_stats(corpus_stats(c));
  report_diagnostics(diag, verbose, err);
  return 0;
}

int cmd_preprocess(const RunConfig& cfg, const CorpusFlags& corpus, bool verbose, std::ostream& out,
                   std::ostream& err) {
  const auto target = require_path(cfg.output.empty() ? cfg.examples : cfg.output,
                                   "output path (--output or paths.examples)");
  Diagnostics diag;
  const Corpus c = load_corpus(corpus.resolve(cfg), &diag);
  const PreprocessResult r = preprocess_corpus(c, cfg.splitter, &diag);
  auto file = open_out(target);
  write_examples(file, r.examples);
  if (!file.flush()) throw ConfigError(ConfigErrc::Io, "failed writing " + target.string());
  out << format_preprocess_stats(r.stats);
  report_diagnostics(diag, verbose, err);
  return 0;
}

int cmd_build_vocab(const RunConfig& cfg, bool verbose, std::ostream& out, std::ostream& err) {
  const auto source = require_path(cfg.examples, "examples path (--examples or paths.examples)");
  const auto target = require_path(cfg.output.empty() ? cfg.vocab : cfg.output,
                                   "output path (--output or paths.vocab)");
  Diagnostics diag;
  const auto examples = read_examples_file(source, &diag);
  const Vocabulary vocab = build_vocab(examples, cfg.min_frequency);
  auto file = open_out(target);
  vocab.save(file);
  if (!file.flush()) throw ConfigError(ConfigErrc::Io, "failed writing " + target.string());
  out << "vocabulary size: " << vocab.size() << '\n';
  report_diagnostics(diag, verbose, err);
  return 0;
}

int cmd_train(const RunConfig& cfg, bool verbose, std::ostream& out, std::ostream& err) {
  const auto source = require_path(cfg.examples, "examples path (--examples or paths.examples)");
  const auto vocab_path = require_path(cfg.vocab, "vocabulary path (--vocab or paths.vocab)");
  const auto target = require_path(cfg.output.empty() ? cfg.checkpoint : cfg.output,
                                   "output path (--output or paths.checkpoint)");
  Diagnostics diag;
  const auto raw = read_examples_file(source, &diag);
  auto vin = open_in(vocab_path);
  const Vocabulary vocab = Vocabulary::load(vin);

  ModelConfig model = cfg.model;
  model.vocab_size = vocab.size();
  if (model.max_positions < cfg.train.max_seq_length) {
    throw ConfigError(ConfigErrc::BadValue,
                      "model.max_positions (" + std::to_string(model.max_positions) +
                          ") is smaller than train.max_seq_length (" +
                          std::to_string(cfg.train.max_seq_length) + ")");
  }
  const auto examples = encode_all(raw, vocab, cfg.train.max_seq_length, &diag);

  std::ofstream log_file;
  std::ostream* log = &err;
  if (!cfg.log.empty()) {
    log_file = open_out(cfg.log);
    log = &log_file;
  }
  std::vector<EpochLog> history;
  const Checkpoint ckpt = train(examples, model, cfg.train, vocab, log, &history);
  save_checkpoint(ckpt, target);

  out << "examples: " << examples.size() << '\n';
  out << "parameters: " << ckpt.params.parameter_count() << '\n';
  out << "epochs: " << ckpt.epochs_completed << '\n';
  if (!history.empty()) {
    std::ostringstream line;
    line.precision(6);
    line << std::fixed << "final loss: " << history.back().mean_loss << '\n';
    out << line.str();
  }
  out << "checkpoint: " << target.string() << '\n';
  report_diagnostics(diag, verbose, err);
  return 0;
}

int cmd_predict(const RunConfig& cfg, const CorpusFlags& corpus, bool verbose, std::ostream& out,
                std::ostream& err) {
  const auto ckpt_path = require_path(cfg.checkpoint, "checkpoint path (--checkpoint or paths.checkpoint)");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  Diagnostics diag;
  std::vector<RelationExample> raw;
  if (!cfg.examples.empty() && !corpus.given()) {
    raw = read_examples_file(cfg.examples, &diag);
  } else {
    const Corpus c = load_corpus(corpus.resolve(cfg), &diag);
    raw = preprocess_corpus(c, cfg.splitter, &diag).examples;
  }
  const auto examples = encode_all(raw, ckpt.vocab, ckpt.train.max_seq_length, &diag);
  const auto preds = predict(ckpt, examples);
  const auto target = cfg.output.empty() ? cfg.predictions : cfg.output;
  if (target.empty()) {
    write_predictions(out, preds);
  } else {
    auto file = open_out(target);
    write_predictions(file, preds);
  }
  err << "predicted relations: " << preds.size() << " from " << examples.size() << " examples\n";
  report_diagnostics(diag, verbose, err);
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const auto pred_path = require_path(cfg.predictions, "predictions path (--predictions or paths.predictions)");
  const auto gold_path = require_path(cfg.gold, "gold path (--gold or paths.gold)");
  auto pin = open_in(pred_path);
  auto gin = open_in(gold_path);
  std::vector<RelationTuple> pred, gold;
  try {
    pred = read_relation_tuples(pin);
  } catch (const Error& e) {
    throw ConfigError(ConfigErrc::BadValue, pred_path.string() + ": " + e.what());
  }
  try {
    gold = read_relation_tuples(gin);
  } catch (const Error& e) {
    throw ConfigError(ConfigErrc::BadValue, gold_path.string() + ": " + e.what());
  }
  const std::string text = report(micro_metrics(confusion(pred, gold)));
  out << text;
  if (!cfg.output.empty()) {
    auto file = open_out(cfg.output);
    file << text;
  }
  return 0;
}

}  // namespace

std::string format_stats(const CorpusStats& s) {
  std::ostringstream out;
  out << "documents: " << s.n_documents << '\n';
  out << "chemicals: " << s.n_chemicals << '\n';
  out << "proteins: " << s.n_proteins << '\n';
  out << "positive relations: " << s.n_positive_relations << '\n';
  for (RelationLabel l : kCorpusLabels) {
    const auto it = s.per_label_counts.find(l);
    out << label_name(l) << ": " << (it == s.per_label_counts.end() ? 0 : it->second) << '\n';
  }
  return out.str();
}

std::string format_preprocess_stats(const PreprocessStats& s) {
  std::ostringstream out;
  out << "documents: " << s.documents << '\n';
  out << "sentences: " << s.sentences << '\n';
  out << "candidates: " << s.candidates << '\n';
  out << "examples: " << s.examples << '\n';
  out << "cross-sentence skipped: " << s.cross_sentence_skipped << '\n';
  out << "rare-label pairs dropped: " << s.rare_label_dropped << '\n';
  out << "overlapping pairs skipped: " << s.overlapping_skipped << '\n';
  out << "multi-label pairs: " << s.multi_label_pairs << '\n';
  for (const auto& [label, n] : s.per_label) out << label_name(label) << ": " << n << '\n';
  return out.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chemical-protein relation extraction pipeline", "dtirex"};
  app.require_subcommand(1);
  app.fallthrough();
  // A repeated flag keeps its last value.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string head, cls_path;
  bool verbose = false;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--seed", seed, "Training seed (train.seed)");
  app.add_option("--head", head, "Classifier head: model1 or rbert-cnn")
      ->check(CLI::IsMember({"model1", "rbert-cnn"}));
  app.add_option("--cls-path", cls_path, "Include the CLS path in the rbert-cnn head: on or off")
      ->check(CLI::IsMember({"on", "off"}));
  app.add_flag("-v,--verbose", verbose, "List every warning");

  std::map<std::string, std::string> overrides;
  auto* group = app.add_option_group("Configuration overrides", "Any configuration key as --<key> <value>");
  for (const auto& key : config_keys()) {
    if (key == "seed") continue;
    group->add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "");
  }

  std::string examples, vocab, checkpoint, output, log, predictions, gold;
  std::optional<std::size_t> min_frequency;
  CorpusFlags corpus;

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  corpus.add_to(stats, true);

  auto* prep = app.add_subcommand("preprocess", "Tag same-sentence pairs and write the examples TSV");
  corpus.add_to(prep, true);
  prep->add_option("-o,--output", output, "Examples TSV to write");

  auto* bv = app.add_subcommand("build-vocab", "Build the word vocabulary from an examples TSV");
  bv->add_option("--examples", examples, "Examples TSV");
  bv->add_option("--min-frequency", min_frequency, "Drop tokens seen fewer times");
  bv->add_option("-o,--output", output, "Vocabulary file to write");

  auto* tr = app.add_subcommand("train", "Train a classifier and write a checkpoint");
  tr->add_option("--examples", examples, "Examples TSV");
  tr->add_option("--vocab", vocab, "Vocabulary file");
  tr->add_option("-o,--output", output, "Checkpoint to write");
  tr->add_option("--log", log, "Per-epoch log file (default: stderr)");

  auto* pr = app.add_subcommand("predict", "Predict relation tuples");
  pr->add_option("--checkpoint", checkpoint, "Checkpoint file");
  pr->add_option("--examples", examples, "Examples TSV (alternative to corpus files)");
  corpus.add_to(pr, true);
  pr->add_option("-o,--output", output, "Predictions TSV (default: stdout)");

  auto* ev = app.add_subcommand("evaluate", "Score predictions against gold relations");
  ev->add_option("--predictions", predictions, "Predictions TSV");
  ev->add_option("--gold", gold, "Gold relations TSV");
  ev->add_option("-o,--output", output, "Also write the report here");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    if (seed) cfg.train.seed = *seed;
    if (!head.empty()) cfg.set("model.head", head);
    if (!cls_path.empty()) cfg.set("model.include_cls_path", cls_path);
    if (min_frequency) cfg.min_frequency = *min_frequency;
    if (!examples.empty()) cfg.examples = examples;
    if (!vocab.empty()) cfg.vocab = vocab;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (!output.empty()) cfg.output = output;
    if (!log.empty()) cfg.log = log;
    if (!predictions.empty()) cfg.predictions = predictions;
    if (!gold.empty()) cfg.gold = gold;
    cfg.splitter.validate();

    if (stats->parsed()) return cmd_stats(cfg, corpus, verbose, out, err);
    if (prep->parsed()) return cmd_preprocess(cfg, corpus, verbose, out, err);
    if (bv->parsed()) return cmd_build_vocab(cfg, verbose, out, err);
    if (tr->parsed()) return cmd_train(cfg, verbose, out, err);
    if (pr->parsed()) return cmd_predict(cfg, corpus, verbose, out, err);
    if (ev->parsed()) return cmd_evaluate(cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace dtirex::cli
