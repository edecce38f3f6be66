#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhan/corpus.hpp"
#include "mhan/embeddings.hpp"
#include "mhan/gradcheck.hpp"
#include "mhan/layers.hpp"
#include "mhan/rng.hpp"
#include "mhan/tensor.hpp"

namespace mhan {

enum class Architecture { NN, HNN, HAN };

inline const char* architecture_name(Architecture a) {
  switch (a) {
    case Architecture::NN: return "nn";
    case Architecture::HNN: return "hnn";
    case Architecture::HAN: return "han";
  }
  return "?";
}

inline Architecture architecture_from_name(const std::string& s) {
  if (s == "nn") return Architecture::NN;
  if (s == "hnn") return Architecture::HNN;
  if (s == "han") return Architecture::HAN;
  throw std::invalid_argument("unknown architecture: " + s);
}

struct ModelConfig {
  Architecture architecture = Architecture::HAN;
  EncoderKind encoder = EncoderKind::Dense;
  std::size_t d = 40;     // word embedding dim
  std::size_t d_w = 100;  // word encoder hidden dim
  std::size_t d_s = 100;  // sentence encoder hidden dim
  std::size_t d_a = 100;  // attention dim
  Act activation = Act::Relu;
  bool strict_paper_scaling = true;
  std::size_t k = 0;  // label vocabulary size

  std::size_t word_out() const { return encoder == EncoderKind::BiGru ? 2 * d_w : d_w; }
  std::size_t sent_out() const { return encoder == EncoderKind::BiGru ? 2 * d_s : d_s; }
  // Width of the document vector fed to the classifier.
  std::size_t doc_dim() const { return architecture == Architecture::NN ? d : sent_out(); }

  void validate() const {
    if (d == 0 || k == 0) throw std::invalid_argument("model config: d and k must be positive");
    if (architecture != Architecture::NN && (d_w == 0 || d_s == 0))
      throw std::invalid_argument("model config: encoder dims must be positive");
    if (architecture == Architecture::HAN && d_a == 0)
      throw std::invalid_argument("model config: attention dim must be positive");
  }
};

// One language's full parameter bundle. NN keeps only the classifier, HNN
// adds the two encoders, HAN adds both attention levels.
struct HanParams {
  ModelConfig cfg;
  EncoderParams word_enc, sent_enc;
  AttentionParams word_att, sent_att;
  ClassifierParams clf;

  bool has_encoders() const { return cfg.architecture != Architecture::NN; }
  bool has_attention() const { return cfg.architecture == Architecture::HAN; }

  NamedTensors named(const std::string& prefix = "") const {
    NamedTensors out;
    if (has_encoders()) {
      for (auto& nt : word_enc.named(prefix + "word_enc")) out.push_back(nt);
      if (has_attention())
        for (auto& nt : word_att.named(prefix + "word_att")) out.push_back(nt);
      for (auto& nt : sent_enc.named(prefix + "sent_enc")) out.push_back(nt);
      if (has_attention())
        for (auto& nt : sent_att.named(prefix + "sent_att")) out.push_back(nt);
    }
    for (auto& nt : clf.named(prefix + "classifier")) out.push_back(nt);
    return out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named()) n += t->size();
    return n;
  }
};

inline EncoderParams make_word_encoder(const ModelConfig& cfg, Rng& rng) {
  return EncoderParams::create(cfg.encoder, cfg.d, cfg.d_w, rng, cfg.activation);
}
inline AttentionParams make_word_attention(const ModelConfig& cfg, Rng& rng) {
  return AttentionParams::create(cfg.word_out(), cfg.d_a, rng, cfg.activation);
}
inline EncoderParams make_sentence_encoder(const ModelConfig& cfg, Rng& rng) {
  return EncoderParams::create(cfg.encoder, cfg.word_out(), cfg.d_s, rng, cfg.activation);
}
inline AttentionParams make_sentence_attention(const ModelConfig& cfg, Rng& rng) {
  return AttentionParams::create(cfg.sent_out(), cfg.d_a, rng, cfg.activation);
}
inline ClassifierParams make_classifier(const ModelConfig& cfg, Rng& rng) {
  return ClassifierParams::create(cfg.doc_dim(), cfg.k, rng);
}

inline HanParams build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  HanParams p;
  p.cfg = cfg;
  if (cfg.architecture != Architecture::NN) {
    Rng rw(seed, "model/word_enc");
    p.word_enc = make_word_encoder(cfg, rw);
    Rng rs(seed, "model/sent_enc");
    p.sent_enc = make_sentence_encoder(cfg, rs);
    if (cfg.architecture == Architecture::HAN) {
      Rng raw(seed, "model/word_att");
      p.word_att = make_word_attention(cfg, raw);
      Rng ras(seed, "model/sent_att");
      p.sent_att = make_sentence_attention(cfg, ras);
    }
  }
  Rng rc(seed, "model/classifier");
  p.clf = make_classifier(cfg, rc);
  return p;
}

struct ForwardResult {
  TensorPtr doc_vector;    // u
  TensorPtr probabilities; // per-label sigmoid outputs
  std::vector<TensorPtr> word_alpha;  // one per sentence (HAN only)
  TensorPtr sentence_alpha;           // HAN only
};

// Forward over pre-embedded sentences (valid positions only; the masks fed to
// the layers are all-true prefixes, which is equivalent to running the padded
// grid with its prefix masks).
inline ForwardResult han_forward_embedded(Graph& g, const HanParams& p,
                                          const std::vector<std::vector<TensorPtr>>& sents) {
  if (sents.empty())
    throw std::invalid_argument("han_forward: document has zero valid sentences");
  for (const auto& s : sents)
    if (s.empty()) throw std::invalid_argument("han_forward: empty sentence");

  ForwardResult res;
  const ModelConfig& cfg = p.cfg;

  if (cfg.architecture == Architecture::NN) {
    std::vector<TensorPtr> words;
    for (const auto& s : sents) words.insert(words.end(), s.begin(), s.end());
    res.doc_vector = average_pool(g, words, full_mask(words.size()));
    res.probabilities = classify(g, res.doc_vector, p.clf);
    return res;
  }

  std::vector<TensorPtr> sentence_vectors;
  sentence_vectors.reserve(sents.size());
  for (const auto& s : sents) {
    const Mask m = full_mask(s.size());
    auto h = encode(g, s, p.word_enc, m);
    if (cfg.architecture == Architecture::HAN) {
      auto pooled = attention_pool(g, h, p.word_att, m, cfg.strict_paper_scaling);
      sentence_vectors.push_back(pooled.pooled);
      res.word_alpha.push_back(pooled.alpha);
    } else {
      sentence_vectors.push_back(average_pool(g, h, m));
    }
  }

  const Mask sm = full_mask(sentence_vectors.size());
  auto hs = encode(g, sentence_vectors, p.sent_enc, sm);
  if (cfg.architecture == Architecture::HAN) {
    auto pooled = attention_pool(g, hs, p.sent_att, sm, cfg.strict_paper_scaling);
    res.doc_vector = pooled.pooled;
    res.sentence_alpha = pooled.alpha;
  } else {
    res.doc_vector = average_pool(g, hs, sm);
  }
  res.probabilities = classify(g, res.doc_vector, p.clf);
  return res;
}

inline std::vector<std::vector<TensorPtr>> embed_document(const Document& doc,
                                                          const EmbeddedLang& emb) {
  std::vector<std::vector<TensorPtr>> sents;
  sents.reserve(doc.sentences.size());
  for (const auto& row : doc.sentences) {
    std::vector<TensorPtr> s;
    s.reserve(row.size());
    for (int tid : row) s.push_back(emb.vector_for(tid));
    sents.push_back(std::move(s));
  }
  return sents;
}

inline ForwardResult han_forward(Graph& g, const HanParams& p, const Document& doc,
                                 const EmbeddedLang& emb) {
  if (doc.lang != emb.lang)
    throw std::invalid_argument("han_forward: document language '" + doc.lang +
                                "' does not match embedding language '" + emb.lang + "'");
  return han_forward_embedded(g, p, embed_document(doc, emb));
}

// One record per document: id, language, gold labels, document vector with
// 6 significant digits. Deterministic bytes for a fixed model and split.
inline void export_doc_vectors(const std::vector<const Document*>& docs, const HanParams& p,
                               const EmbeddedLang& emb, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_doc_vectors: cannot open " + path);
  out << "id\tlang\tlabels\tvector\n";
  char buf[64];
  for (const Document* doc : docs) {
    Graph g(false);
    auto fr = han_forward(g, p, *doc, emb);
    out << doc->id << '\t' << doc->lang << '\t';
    for (std::size_t i = 0; i < doc->labels.size(); ++i) {
      if (i) out << ',';
      out << doc->labels[i];
    }
    out << '\t';
    const auto& v = fr.doc_vector->values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6g", v[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("export_doc_vectors: write failed for " + path);
}

// Random tiny document + fresh model, composed end to end through the BCE
// loss, handed to the finite-difference oracle. Shapes stay small (dims <= 5,
// lengths <= 4) so the check runs in milliseconds.
inline GradCheckProblem make_han_gradcheck_problem(EncoderKind kind, std::uint64_t seed,
                                                   int attempt) {
  Rng rng(seed, "gradcheck/" + std::to_string(attempt));
  ModelConfig cfg;
  cfg.architecture = Architecture::HAN;
  cfg.encoder = kind;
  cfg.d = 2 + rng.index(4);    // 2..5
  cfg.d_w = 2 + rng.index(4);  // 2..5
  cfg.d_s = 2 + rng.index(4);
  cfg.d_a = 2 + rng.index(4);
  cfg.k = 2 + rng.index(2);
  cfg.strict_paper_scaling = rng.uniform01() < 0.5;

  const std::size_t n_sent = 1 + rng.index(4);  // K <= 4
  auto sents = std::make_shared<std::vector<std::vector<TensorPtr>>>();
  for (std::size_t i = 0; i < n_sent; ++i) {
    std::vector<TensorPtr> s;
    const std::size_t n_words = 1 + rng.index(4);  // T <= 4
    for (std::size_t t = 0; t < n_words; ++t) {
      std::vector<double> v(cfg.d);
      for (auto& x : v) x = rng.uniform(-1.0, 1.0);
      s.push_back(Tensor::make({cfg.d}, std::move(v)));
    }
    sents->push_back(std::move(s));
  }
  auto gold = std::make_shared<std::vector<double>>(cfg.k, 0.0);
  (*gold)[rng.index(cfg.k)] = 1.0;

  auto params = std::make_shared<HanParams>(build_model(cfg, rng.next_u64()));

  GradCheckProblem prob;
  prob.params = params->named();
  prob.loss = [params, sents, gold](Graph& g) {
    auto fr = han_forward_embedded(g, *params, *sents);
    return bce_loss(g, *gold, fr.probabilities);
  };
  return prob;
}

// Max relative error of reverse-mode vs central differences over the full
// encoder/attention/classifier/BCE composition.
inline GradCheckResult han_grad_check(EncoderKind kind, std::uint64_t seed, double eps = 1e-4,
                                      double tol = 1e-4) {
  return grad_check_redraw(
      [kind, seed](int attempt) { return make_han_gradcheck_problem(kind, seed, attempt); }, tol,
      eps);
}

}  // namespace mhan
