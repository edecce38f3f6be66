#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mhan/rng.hpp"

namespace mhan {

struct GridLimits {
  std::size_t max_sentences = 30;
  std::size_t max_words = 30;
};

// One tokenized document: ragged token-id rows, already truncated to the
// grid limits at ingestion. Labels stay raw strings; k-hot vectors are
// derived against a LabelVocab.
struct Document {
  std::string id;
  std::string lang;
  std::vector<std::vector<int>> sentences;
  std::vector<std::string> labels;

  std::size_t sentence_count() const { return sentences.size(); }
};

struct LanguageCorpus {
  std::vector<std::string> vocab;
  std::unordered_map<std::string, int> token_ids;
  std::vector<Document> docs;

  int intern(const std::string& token) {
    auto it = token_ids.find(token);
    if (it != token_ids.end()) return it->second;
    const int id = static_cast<int>(vocab.size());
    vocab.push_back(token);
    token_ids.emplace(token, id);
    return id;
  }
};

using Corpus = std::map<std::string, LanguageCorpus>;

struct CorpusLoadReport {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::size_t rejected_no_labels = 0;
  std::size_t rejected_empty = 0;
  std::size_t truncated_sentences = 0;  // sentences cut at max_words
  std::size_t truncated_documents = 0;  // documents cut at max_sentences
};

struct LoadedCorpus {
  Corpus corpus;
  CorpusLoadReport report;
};

// JSON-lines ingestion: {"id": str, "lang": str, "sentences": [[token,..],..],
// "labels": [str,..]}. Over-length input is truncated, empty or unlabeled
// documents are rejected and counted.
inline LoadedCorpus load_corpus(const std::string& path, const GridLimits& limits = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_corpus: cannot open " + path);
  LoadedCorpus out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    out.report.lines++;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("load_corpus: " + path + " line " + std::to_string(lineno) +
                               ": " + e.what());
    }
    const auto bad = [&](const std::string& what) {
      return std::runtime_error("load_corpus: " + path + " line " + std::to_string(lineno) +
                                ": " + what);
    };
    if (!j.is_object() || !j.contains("id") || !j.contains("lang") || !j.contains("sentences") ||
        !j.contains("labels"))
      throw bad("record must have id, lang, sentences, labels");
    if (!j["id"].is_string() || !j["lang"].is_string() || !j["sentences"].is_array() ||
        !j["labels"].is_array())
      throw bad("malformed field types");
    const std::string lang = j["lang"].get<std::string>();
    if (lang.empty()) throw bad("unknown language code (empty)");

    Document doc;
    doc.id = j["id"].get<std::string>();
    doc.lang = lang;
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) throw bad("labels must be strings");
      doc.labels.push_back(l.get<std::string>());
    }
    if (doc.labels.empty()) {
      out.report.rejected_no_labels++;
      continue;
    }

    LanguageCorpus& lc = out.corpus[lang];
    bool doc_truncated = false;
    for (const auto& sent : j["sentences"]) {
      if (!sent.is_array()) throw bad("sentences must be arrays of tokens");
      if (doc.sentences.size() == limits.max_sentences) {
        doc_truncated = true;
        break;
      }
      std::vector<int> row;
      for (const auto& tok : sent) {
        if (!tok.is_string()) throw bad("tokens must be strings");
        if (row.size() == limits.max_words) {
          out.report.truncated_sentences++;
          break;
        }
        row.push_back(lc.intern(tok.get<std::string>()));
      }
      if (!row.empty()) doc.sentences.push_back(std::move(row));
    }
    if (doc_truncated) out.report.truncated_documents++;
    if (doc.sentences.empty()) {
      out.report.rejected_empty++;
      continue;
    }
    lc.docs.push_back(std::move(doc));
    out.report.accepted++;
  }
  return out;
}

// Canonical single-line serialization (fixed key order, token strings
// restored); loading its output reproduces the document exactly.
inline std::string serialize_document(const Document& doc, const LanguageCorpus& lc) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["lang"] = doc.lang;
  auto sentences = nlohmann::ordered_json::array();
  for (const auto& row : doc.sentences) {
    auto sent = nlohmann::ordered_json::array();
    for (int tid : row) sent.push_back(lc.vocab.at(static_cast<std::size_t>(tid)));
    sentences.push_back(std::move(sent));
  }
  j["sentences"] = std::move(sentences);
  j["labels"] = doc.labels;
  return j.dump();
}

inline std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& [lang, lc] : corpus)
    for (const auto& doc : lc.docs) {
      out += serialize_document(doc, lc);
      out += '\n';
    }
  return out;
}

// Zero-padded grid view of a document with its validity masks.
struct PaddedDocument {
  std::size_t max_sentences = 0;
  std::size_t max_words = 0;
  std::vector<int> grid;                  // max_sentences x max_words, -1 at padding
  std::vector<std::uint8_t> sentence_mask;  // prefix-valid, length max_sentences
  std::vector<std::vector<std::uint8_t>> word_mask;  // per grid row
};

inline PaddedDocument pad_document(const Document& doc, const GridLimits& limits = {}) {
  if (doc.sentences.size() > limits.max_sentences)
    throw std::invalid_argument("pad_document: document exceeds sentence limit");
  PaddedDocument p;
  p.max_sentences = limits.max_sentences;
  p.max_words = limits.max_words;
  p.grid.assign(limits.max_sentences * limits.max_words, -1);
  p.sentence_mask.assign(limits.max_sentences, 0);
  p.word_mask.assign(limits.max_sentences, std::vector<std::uint8_t>(limits.max_words, 0));
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const auto& row = doc.sentences[i];
    if (row.empty()) throw std::invalid_argument("pad_document: empty sentence");
    if (row.size() > limits.max_words)
      throw std::invalid_argument("pad_document: sentence exceeds word limit");
    p.sentence_mask[i] = 1;
    for (std::size_t t = 0; t < row.size(); ++t) {
      p.grid[i * limits.max_words + t] = row[t];
      p.word_mask[i][t] = 1;
    }
  }
  return p;
}

inline std::vector<std::vector<int>> unpad_document(const PaddedDocument& p) {
  std::vector<std::vector<int>> rows;
  for (std::size_t i = 0; i < p.max_sentences; ++i) {
    if (!p.sentence_mask[i]) break;
    std::vector<int> row;
    for (std::size_t t = 0; t < p.max_words; ++t) {
      if (!p.word_mask[i][t]) break;
      row.push_back(p.grid[i * p.max_words + t]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Per-language index split. Validation and test take floor(10%) each and the
// remainder stays in train, so 100 docs land exactly on 80/10/10.
struct SplitIndices {
  std::vector<std::size_t> train, valid, test;
};

inline SplitIndices split_documents(std::size_t n_docs, std::uint64_t seed,
                                    const std::string& lang) {
  if (n_docs < 10)
    throw std::invalid_argument("split: language " + lang + " has " + std::to_string(n_docs) +
                                " documents, need at least 10");
  std::vector<std::size_t> idx(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) idx[i] = i;
  Rng rng(seed, "split/" + lang);
  for (std::size_t i = n_docs; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);

  const std::size_t n_valid = n_docs / 10;
  const std::size_t n_test = n_docs / 10;
  SplitIndices s;
  s.valid.assign(idx.begin(), idx.begin() + n_valid);
  s.test.assign(idx.begin() + n_valid, idx.begin() + n_valid + n_test);
  s.train.assign(idx.begin() + n_valid + n_test, idx.end());
  return s;
}

using CorpusSplits = std::map<std::string, SplitIndices>;

inline CorpusSplits split_corpus(const Corpus& corpus, std::uint64_t seed) {
  CorpusSplits out;
  for (const auto& [lang, lc] : corpus) out[lang] = split_documents(lc.docs.size(), seed, lang);
  return out;
}

// ceil(fraction * N) documents, at least one, sampled without replacement.
inline std::vector<std::size_t> subsample_low_resource(const std::vector<std::size_t>& train,
                                                       double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("subsample: fraction must be in (0, 1], got " +
                                std::to_string(fraction));
  if (fraction == 1.0) return train;
  std::vector<std::size_t> idx = train;
  Rng rng(seed, "subsample");
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  std::size_t m = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(train.size())));
  if (m == 0) m = 1;
  if (m > idx.size()) m = idx.size();
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Low-resource availability bands of the evaluation protocol.
inline std::vector<double> tier_fractions(const std::string& tier) {
  if (tier == "tiny") return {0.001, 0.002, 0.003, 0.004, 0.005};
  if (tier == "small") return {0.01, 0.02, 0.03, 0.04, 0.05};
  if (tier == "medium") return {0.10, 0.20, 0.30, 0.40, 0.50};
  throw std::invalid_argument("unknown low-resource tier: " + tier);
}

enum class LabelType { General, Specific };

inline const char* label_type_name(LabelType t) {
  return t == LabelType::General ? "general" : "specific";
}

// Per-language label vocabulary over the training split: descending frequency,
// ties lexicographic. Vocabularies are independent across languages.
struct LabelVocab {
  LabelType type = LabelType::General;
  std::size_t min_count = 1;
  std::map<std::string, std::vector<std::string>> labels;
  std::map<std::string, std::unordered_map<std::string, int>> index;

  std::size_t size(const std::string& lang) const {
    auto it = labels.find(lang);
    return it == labels.end() ? 0 : it->second.size();
  }

  // -1 when the label did not survive the vocabulary cut.
  int label_index(const std::string& lang, const std::string& label) const {
    auto it = index.find(lang);
    if (it == index.end()) return -1;
    auto jt = it->second.find(label);
    return jt == it->second.end() ? -1 : jt->second;
  }
};

inline LabelVocab build_label_vocab(const Corpus& corpus, const CorpusSplits& splits,
                                    LabelType type, std::size_t min_count) {
  LabelVocab v;
  v.type = type;
  v.min_count = min_count;
  for (const auto& [lang, lc] : corpus) {
    const auto& split = splits.at(lang);
    if (split.train.empty())
      throw std::invalid_argument("label vocab: empty training split for " + lang);
    std::map<std::string, std::size_t> freq;
    for (std::size_t i : split.train)
      for (const auto& label : lc.docs[i].labels) freq[label]++;
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [label, count] : freq)
      if (count >= min_count) kept.emplace_back(label, count);
    if (kept.empty())
      throw std::invalid_argument("label vocab: no label of " + lang + " reaches min_count " +
                                  std::to_string(min_count));
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    auto& ordered = v.labels[lang];
    auto& idx = v.index[lang];
    for (const auto& [label, count] : kept) {
      idx.emplace(label, static_cast<int>(ordered.size()));
      ordered.push_back(label);
    }
  }
  return v;
}

inline std::vector<double> khot_labels(const Document& doc, const LabelVocab& vocab) {
  std::vector<double> y(vocab.size(doc.lang), 0.0);
  for (const auto& label : doc.labels) {
    const int j = vocab.label_index(doc.lang, label);
    if (j >= 0) y[static_cast<std::size_t>(j)] = 1.0;
  }
  return y;
}

inline std::vector<int> gold_label_indices(const Document& doc, const LabelVocab& vocab) {
  std::vector<int> out;
  for (const auto& label : doc.labels) {
    const int j = vocab.label_index(doc.lang, label);
    if (j >= 0) out.push_back(j);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Documents whose labels all fell outside the vocabulary cannot contribute a
// positive target; they are excluded from a split when the vocab is applied.
inline std::vector<std::size_t> filter_labeled(const LanguageCorpus& lc,
                                               const std::vector<std::size_t>& indices,
                                               const LabelVocab& vocab,
                                               std::size_t* dropped = nullptr) {
  std::vector<std::size_t> kept;
  for (std::size_t i : indices) {
    if (gold_label_indices(lc.docs[i], vocab).empty()) {
      if (dropped) ++*dropped;
      continue;
    }
    kept.push_back(i);
  }
  return kept;
}

}  // namespace mhan
