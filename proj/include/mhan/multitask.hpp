#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhan/corpus.hpp"
#include "mhan/embeddings.hpp"
#include "mhan/model.hpp"
#include "mhan/optim.hpp"
#include "mhan/rng.hpp"

namespace mhan {

// Which parameter roles are one tensor across languages. Classifier layers
// are always language-specific (disjoint label sets).
enum class SharingScheme { Mono, Enc, Att, Both };

inline const char* sharing_name(SharingScheme s) {
  switch (s) {
    case SharingScheme::Mono: return "mono";
    case SharingScheme::Enc: return "enc";
    case SharingScheme::Att: return "att";
    case SharingScheme::Both: return "both";
  }
  return "?";
}

inline SharingScheme sharing_from_name(const std::string& s) {
  if (s == "mono") return SharingScheme::Mono;
  if (s == "enc") return SharingScheme::Enc;
  if (s == "att") return SharingScheme::Att;
  if (s == "both") return SharingScheme::Both;
  throw std::invalid_argument("unknown sharing scheme: " + s);
}

inline bool shares_encoders(SharingScheme s) {
  return s == SharingScheme::Enc || s == SharingScheme::Both;
}
inline bool shares_attention(SharingScheme s) {
  return s == SharingScheme::Att || s == SharingScheme::Both;
}

struct MultiTaskConfig {
  std::vector<std::string> languages;
  std::size_t epoch_size = 25000;  // N_e: samples per language per epoch
  std::size_t batch_size = 16;
  std::map<std::string, double> gamma;  // per-language objective weight

  double gamma_for(const std::string& lang) const {
    auto it = gamma.find(lang);
    return it == gamma.end() ? 1.0 : it->second;
  }

  void validate() const {
    if (languages.empty()) throw std::invalid_argument("multitask: no languages");
    if (batch_size == 0 || batch_size % languages.size() != 0)
      throw std::invalid_argument("multitask: batch size " + std::to_string(batch_size) +
                                  " is not divisible by " + std::to_string(languages.size()) +
                                  " languages");
  }
};

// Per-language HanParams views that resolve shared roles to one tensor
// identity. `distinct()` lists every tensor exactly once under a stable name
// ("shared/..." or "<lang>/...").
class SharingRegistry {
 public:
  SharingScheme scheme() const { return scheme_; }
  const std::vector<std::string>& languages() const { return langs_; }

  const HanParams& view(const std::string& lang) const {
    auto it = views_.find(lang);
    if (it == views_.end())
      throw std::invalid_argument("registry: language '" + lang + "' is not registered");
    return it->second;
  }
  HanParams& view(const std::string& lang) {
    auto it = views_.find(lang);
    if (it == views_.end())
      throw std::invalid_argument("registry: language '" + lang + "' is not registered");
    return it->second;
  }

  const NamedTensors& distinct() const { return distinct_; }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& [name, t] : distinct_) n += t->size();
    return n;
  }

  // Size of one language's full parameter view (shared tensors included).
  std::map<std::string, std::size_t> per_language_params() const {
    std::map<std::string, std::size_t> out;
    for (const auto& [lang, p] : views_) out[lang] = p.param_count();
    return out;
  }

  double average_params_per_language() const {
    return static_cast<double>(total_params()) / static_cast<double>(langs_.size());
  }

  void zero_grad() {
    for (const auto& [name, t] : distinct_) t->zero_grad();
  }

  friend SharingRegistry build_mhan(const std::map<std::string, ModelConfig>& cfgs,
                                    SharingScheme scheme, std::uint64_t seed);

 private:
  SharingScheme scheme_ = SharingScheme::Mono;
  std::vector<std::string> langs_;
  std::map<std::string, HanParams> views_;
  NamedTensors distinct_;
};

// Builds the per-language networks with the requested roles aliased to one
// shared tensor set. All languages must agree on every dimension and on the
// encoder kind for the shared tensors to typecheck; label counts may differ.
inline SharingRegistry build_mhan(const std::map<std::string, ModelConfig>& cfgs,
                                  SharingScheme scheme, std::uint64_t seed) {
  if (cfgs.empty()) throw std::invalid_argument("build_mhan: no languages");
  const ModelConfig& ref = cfgs.begin()->second;
  for (const auto& [lang, cfg] : cfgs) {
    cfg.validate();
    if (scheme != SharingScheme::Mono && cfg.architecture != Architecture::HAN)
      throw std::invalid_argument("build_mhan: sharing schemes require the HAN architecture");
    if (cfg.architecture != ref.architecture || cfg.encoder != ref.encoder || cfg.d != ref.d ||
        cfg.d_w != ref.d_w || cfg.d_s != ref.d_s || cfg.d_a != ref.d_a ||
        cfg.activation != ref.activation ||
        cfg.strict_paper_scaling != ref.strict_paper_scaling)
      throw std::invalid_argument("build_mhan: language '" + lang +
                                  "' differs from the reference configuration; sharing requires "
                                  "identical dims and encoder kind");
  }

  SharingRegistry reg;
  reg.scheme_ = scheme;
  for (const auto& [lang, cfg] : cfgs) reg.langs_.push_back(lang);

  const bool enc_shared = shares_encoders(scheme);
  const bool att_shared = shares_attention(scheme);

  EncoderParams shared_word_enc, shared_sent_enc;
  AttentionParams shared_word_att, shared_sent_att;
  if (enc_shared) {
    Rng rw(seed, "shared/word_enc");
    shared_word_enc = make_word_encoder(ref, rw);
    Rng rs(seed, "shared/sent_enc");
    shared_sent_enc = make_sentence_encoder(ref, rs);
    for (auto& nt : shared_word_enc.named("shared/word_enc")) reg.distinct_.push_back(nt);
    for (auto& nt : shared_sent_enc.named("shared/sent_enc")) reg.distinct_.push_back(nt);
  }
  if (att_shared) {
    Rng rw(seed, "shared/word_att");
    shared_word_att = make_word_attention(ref, rw);
    Rng rs(seed, "shared/sent_att");
    shared_sent_att = make_sentence_attention(ref, rs);
    for (auto& nt : shared_word_att.named("shared/word_att")) reg.distinct_.push_back(nt);
    for (auto& nt : shared_sent_att.named("shared/sent_att")) reg.distinct_.push_back(nt);
  }

  for (const auto& [lang, cfg] : cfgs) {
    HanParams p;
    p.cfg = cfg;
    if (cfg.architecture != Architecture::NN) {
      if (enc_shared) {
        p.word_enc = shared_word_enc;
        p.sent_enc = shared_sent_enc;
      } else {
        Rng rw(seed, lang + "/word_enc");
        p.word_enc = make_word_encoder(cfg, rw);
        Rng rs(seed, lang + "/sent_enc");
        p.sent_enc = make_sentence_encoder(cfg, rs);
        for (auto& nt : p.word_enc.named(lang + "/word_enc")) reg.distinct_.push_back(nt);
        for (auto& nt : p.sent_enc.named(lang + "/sent_enc")) reg.distinct_.push_back(nt);
      }
      if (cfg.architecture == Architecture::HAN) {
        if (att_shared) {
          p.word_att = shared_word_att;
          p.sent_att = shared_sent_att;
        } else {
          Rng rw(seed, lang + "/word_att");
          p.word_att = make_word_attention(cfg, rw);
          Rng rs(seed, lang + "/sent_att");
          p.sent_att = make_sentence_attention(cfg, rs);
          for (auto& nt : p.word_att.named(lang + "/word_att")) reg.distinct_.push_back(nt);
          for (auto& nt : p.sent_att.named(lang + "/sent_att")) reg.distinct_.push_back(nt);
        }
      }
    }
    Rng rc(seed, lang + "/classifier");
    p.clf = make_classifier(cfg, rc);
    for (auto& nt : p.clf.named(lang + "/classifier")) reg.distinct_.push_back(nt);
    reg.views_.emplace(lang, std::move(p));
  }
  return reg;
}

struct ParamCountReport {
  std::size_t total = 0;                          // distinct tensors counted once
  double average_per_language = 0.0;              // total / M
  std::map<std::string, std::size_t> per_language;  // one language's view size
  bool attention_biases_shared = false;  // b of the scoring layers follows W/u
};

inline ParamCountReport count_params(const SharingRegistry& reg) {
  ParamCountReport r;
  r.total = reg.total_params();
  r.average_per_language = reg.average_params_per_language();
  r.per_language = reg.per_language_params();
  r.attention_biases_shared = shares_attention(reg.scheme());
  return r;
}

// One minibatch with an equal quota from every language, sampled uniformly
// with replacement within a language and interleaved across languages.
inline std::vector<const Document*> cyclic_batch(
    const std::map<std::string, std::vector<const Document*>>& datasets,
    const std::vector<std::string>& languages, std::size_t batch_size, Rng& rng) {
  if (languages.empty()) throw std::invalid_argument("cyclic_batch: no languages");
  if (batch_size == 0 || batch_size % languages.size() != 0)
    throw std::invalid_argument("cyclic_batch: batch size " + std::to_string(batch_size) +
                                " is not divisible by " + std::to_string(languages.size()) +
                                " languages");
  for (const auto& lang : languages) {
    auto it = datasets.find(lang);
    if (it == datasets.end() || it->second.empty())
      throw std::invalid_argument("cyclic_batch: no training documents for '" + lang + "'");
  }
  const std::size_t per_lang = batch_size / languages.size();
  std::vector<const Document*> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < per_lang; ++i)
    for (const auto& lang : languages) {
      const auto& docs = datasets.at(lang);
      batch.push_back(docs[rng.index(docs.size())]);
    }
  return batch;
}

// Empirical minibatch form of the joint objective: mean over the batch of
// gamma_l-weighted per-document BCE, one backward pass, one optimizer step
// over every distinct tensor. Shared tensors accumulate gradient from all
// languages in the batch.
inline double joint_step(SharingRegistry& reg, const std::vector<const Document*>& batch,
                         const std::map<std::string, EmbeddedLang>& embeddings,
                         const LabelVocab& vocab, const MultiTaskConfig& mcfg, Optimizer& opt) {
  if (batch.empty()) throw std::invalid_argument("joint_step: empty batch");
  reg.zero_grad();
  Graph g;
  std::vector<TensorPtr> losses;
  losses.reserve(batch.size());
  for (const Document* doc : batch) {
    const HanParams& p = reg.view(doc->lang);  // throws for unregistered language
    auto emb_it = embeddings.find(doc->lang);
    if (emb_it == embeddings.end())
      throw std::invalid_argument("joint_step: no embeddings for '" + doc->lang + "'");
    auto fr = han_forward(g, p, *doc, emb_it->second);
    TensorPtr l = bce_loss(g, khot_labels(*doc, vocab), fr.probabilities);
    const double gamma = mcfg.gamma_for(doc->lang);
    if (gamma != 1.0) l = g.scale_shift(l, gamma, 0.0);
    losses.push_back(std::move(l));
  }
  TensorPtr joint = g.scale_shift(g.sum(g.concat_scalars(losses)),
                                  1.0 / static_cast<double>(batch.size()), 0.0);
  g.backward(joint);
  opt.step(reg.distinct());
  return joint->scalar_value();
}

}  // namespace mhan
