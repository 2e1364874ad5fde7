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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "dtirex/dtirex.hpp"

namespace py = pybind11;
using namespace dtirex;

namespace {

RelationLabel label_from(const std::string& name) {
  const auto l = parse_label(name, /*allow_other=*/true);
  if (!l) throw py::value_error("unknown relation label '" + name + "'");
  return *l;
}

py::dict stats_dict(const CorpusStats& s) {
  py::dict labels;
  for (const auto& [l, n] : s.per_label_counts) labels[py::str(std::string(label_name(l)))] = n;
  py::dict d;
  d["documents"] = s.n_documents;
  d["chemicals"] = s.n_chemicals;
  d["proteins"] = s.n_proteins;
  d["positive_relations"] = s.n_positive_relations;
  d["labels"] = labels;
  return d;
}

py::dict stats_dict(const PreprocessStats& s) {
  py::dict labels;
  for (const auto& [l, n] : s.per_label) labels[py::str(std::string(label_name(l)))] = n;
  py::dict d;
  d["documents"] = s.documents;
  d["sentences"] = s.sentences;
  d["candidates"] = s.candidates;
  d["examples"] = s.examples;
  d["cross_sentence_skipped"] = s.cross_sentence_skipped;
  d["rare_label_dropped"] = s.rare_label_dropped;
  d["overlapping_skipped"] = s.overlapping_skipped;
  d["multi_label_pairs"] = s.multi_label_pairs;
  d["labels"] = labels;
  return d;
}

using Tuple = std::tuple<std::string, std::string, std::string, std::string>;

std::vector<RelationTuple> tuples_from(const std::vector<Tuple>& in) {
  std::vector<RelationTuple> out;
  out.reserve(in.size());
  for (const auto& [pmid, label, a1, a2] : in) out.push_back({pmid, label_from(label), a1, a2});
  return out;
}

std::vector<Tuple> tuples_to(const std::vector<RelationTuple>& in) {
  std::vector<Tuple> out;
  out.reserve(in.size());
  for (const auto& t : in) out.emplace_back(t.pmid, std::string(label_name(t.label)), t.arg1, t.arg2);
  return out;
}

py::dict prf_dict(const PRF& p) {
  py::dict d;
  d["precision"] = p.precision;
  d["recall"] = p.recall;
  d["f1"] = p.f1;
  return d;
}

std::vector<EncodedExample> encode_all(const std::vector<RelationExample>& examples, const Vocabulary& vocab,
                                       std::size_t max_len) {
  std::vector<EncodedExample> out;
  for (const auto& ex : examples) {
    if (auto e = encode(ex, vocab, max_len)) out.push_back(std::move(*e));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_dtirex, m) {
  m.doc() = "Chemical-protein relation extraction: corpus, preprocessing, model, training, scoring";

  py::register_exception<Error>(m, "DtirexError", PyExc_RuntimeError);

  m.def("label_names", [] {
    std::vector<std::string> names;
    for (int i = 0; i < static_cast<int>(kNumClasses); ++i) names.emplace_back(label_name(class_label(i)));
    return names;
  }, "Class names by class id; the last one is Other.");

  py::class_<Document>(m, "Document")
      .def_readonly("pmid", &Document::pmid)
      .def_readonly("title", &Document::title)
      .def_readonly("abstract", &Document::abstract);

  py::class_<Corpus>(m, "Corpus")
      .def_property_readonly("documents", &Corpus::documents)
      .def("entity_count", &Corpus::entity_count)
      .def("relation_count", &Corpus::relation_count)
      .def("stats", [](const Corpus& c) { return stats_dict(corpus_stats(c)); })
      .def("relations", [](const Corpus& c, const std::string& pmid) {
        std::vector<Tuple> out;
        for (const auto& r : c.relations(pmid)) out.emplace_back(r.pmid, std::string(label_name(r.label)), r.arg1, r.arg2);
        return out;
      }, py::arg("pmid"));

  m.def("load_corpus",
        [](const std::filesystem::path& abstracts, const std::filesystem::path& entities,
           const std::optional<std::filesystem::path>& relations) {
          return load_corpus({abstracts, entities, relations.value_or(std::filesystem::path{})});
        },
        py::arg("abstracts"), py::arg("entities"), py::arg("relations") = py::none());

  py::class_<RelationExample>(m, "RelationExample")
      .def_readonly("pmid", &RelationExample::pmid)
      .def_readonly("chem_eid", &RelationExample::chem_eid)
      .def_readonly("prot_eid", &RelationExample::prot_eid)
      .def_readonly("tagged_text", &RelationExample::tagged_text)
      .def_property_readonly("label", [](const RelationExample& e) { return std::string(label_name(e.label)); })
      .def("__repr__", [](const RelationExample& e) {
        return "<RelationExample " + e.pmid + " " + e.chem_eid + "/" + e.prot_eid + " " +
               std::string(label_name(e.label)) + ">";
      });

  m.def("preprocess",
        [](const Corpus& corpus, std::vector<std::string> non_terminal_tokens,
           std::vector<std::string> abbreviations) {
          SplitterConfig cfg;
          cfg.non_terminal_tokens = std::move(non_terminal_tokens);
          cfg.abbreviations = std::move(abbreviations);
          PreprocessResult r = preprocess_corpus(corpus, cfg);
          return py::make_tuple(std::move(r.examples), stats_dict(r.stats));
        },
        py::arg("corpus"), py::arg("non_terminal_tokens") = std::vector<std::string>{"vivo", "Vmax"},
        py::arg("abbreviations") = std::vector<std::string>{},
        "Returns (examples, stats) for every same-sentence chemical/protein pair.");

  m.def("write_examples", [](const std::filesystem::path& path, const std::vector<RelationExample>& examples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw py::value_error("cannot open " + path.string());
    write_examples(out, examples);
  });
  m.def("read_examples", [](const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw py::value_error("cannot open " + path.string());
    return read_examples(in);
  });

  m.def("tokenize", [](const std::string& text) { return tokenize(text); });

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<>())
      .def(py::init<std::vector<std::string>>())
      .def("id", &Vocabulary::id)
      .def("token", &Vocabulary::token)
      .def_property_readonly("tokens", &Vocabulary::tokens)
      .def("__len__", &Vocabulary::size)
      .def("save", [](const Vocabulary& v, const std::filesystem::path& path) {
        std::ofstream out(path, std::ios::binary);
        v.save(out);
      })
      .def_static("load", [](const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw py::value_error("cannot open " + path.string());
        return Vocabulary::load(in);
      });
  m.def("build_vocab",
        [](const std::vector<RelationExample>& examples, std::size_t min_frequency) {
          return build_vocab(examples, min_frequency);
        },
        py::arg("examples"), py::arg("min_frequency") = 1);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("hidden", &ModelConfig::hidden)
      .def_readwrite("layers", &ModelConfig::layers)
      .def_readwrite("heads", &ModelConfig::heads)
      .def_readwrite("ffn", &ModelConfig::ffn)
      .def_readwrite("max_positions", &ModelConfig::max_positions)
      .def_readwrite("cnn_windows", &ModelConfig::cnn_windows)
      .def_readwrite("cnn_filters", &ModelConfig::cnn_filters)
      .def_readwrite("head_dim", &ModelConfig::head_dim)
      .def_readwrite("n_classes", &ModelConfig::n_classes)
      .def_readwrite("dropout", &ModelConfig::dropout)
      .def_readwrite("include_cls_path", &ModelConfig::include_cls_path)
      .def_property("head", [](const ModelConfig& c) { return std::string(head_name(c.head)); },
                    [](ModelConfig& c, const std::string& name) { c.head = parse_head(name); });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("adam_epsilon", &TrainConfig::adam_epsilon)
      .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
      .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
      .def_readwrite("gradient_accumulation_steps", &TrainConfig::gradient_accumulation_steps)
      .def_readwrite("max_grad_norm", &TrainConfig::max_grad_norm)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("warmup_steps", &TrainConfig::warmup_steps)
      .def_readwrite("dropout", &TrainConfig::dropout)
      .def_readwrite("max_seq_length", &TrainConfig::max_seq_length)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("model", &Checkpoint::model)
      .def_readonly("train", &Checkpoint::train)
      .def_readonly("vocab", &Checkpoint::vocab)
      .def_readonly("labels", &Checkpoint::labels)
      .def_readonly("epochs_completed", &Checkpoint::epochs_completed)
      .def("save", [](const Checkpoint& c, const std::filesystem::path& path) { save_checkpoint(c, path); })
      .def_static("load", [](const std::filesystem::path& path) { return load_checkpoint(path); })
      .def("tensor_names", [](const Checkpoint& c) {
        std::vector<std::string> names;
        for (const auto& t : c.params.tensors()) names.push_back(t.name);
        return names;
      })
      .def("same_parameters", [](const Checkpoint& a, const Checkpoint& b) {
        return a.params.bitwise_equal(b.params);
      });

  m.def("train",
        [](const std::vector<RelationExample>& examples, const Vocabulary& vocab, ModelConfig model,
           const TrainConfig& train_cfg) {
          const auto encoded = encode_all(examples, vocab, train_cfg.max_seq_length);
          model.vocab_size = vocab.size();
          std::vector<EpochLog> history;
          Checkpoint ck;
          {
            py::gil_scoped_release release;
            ck = train(encoded, model, train_cfg, vocab, nullptr, &history);
          }
          std::vector<std::pair<double, double>> log;
          for (const auto& h : history) log.emplace_back(h.mean_loss, h.train_accuracy);
          return py::make_tuple(std::move(ck), std::move(log));
        },
        py::arg("examples"), py::arg("vocab"), py::arg("model") = ModelConfig{},
        py::arg("train") = TrainConfig{},
        "Returns (checkpoint, [(mean_loss, train_accuracy) per epoch]). vocab_size follows the vocabulary.");

  m.def("predict", [](const Checkpoint& ck, const std::vector<RelationExample>& examples) {
    const auto encoded = encode_all(examples, ck.vocab, ck.train.max_seq_length);
    return tuples_to(predict(ck, encoded));
  }, py::arg("checkpoint"), py::arg("examples"), "Predicted (pmid, label, chem_eid, prot_eid) tuples; Other is never emitted.");

  m.def("score",
        [](const std::vector<Tuple>& pred, const std::vector<Tuple>& gold) {
          const MetricReport r = micro_metrics(confusion(tuples_from(pred), tuples_from(gold)));
          py::dict per_class;
          for (std::size_t i = 0; i < kNumEvaluatedLabels; ++i) {
            per_class[py::str(std::string(label_name(static_cast<RelationLabel>(i))))] = prf_dict(r.per_class[i]);
          }
          py::dict d = prf_dict(r.micro);
          d["per_class"] = per_class;
          d["report"] = report(r);
          return d;
        },
        py::arg("predictions"), py::arg("gold"),
        "Micro and per-class precision, recall and F1 over (pmid, label, arg1, arg2) tuples.");
}
