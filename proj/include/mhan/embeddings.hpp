#pragma once

#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mhan/corpus.hpp"
#include "mhan/tensor.hpp"

namespace mhan {

// Frozen word vectors per language. Rows never receive gradients; unknown
// tokens resolve to the zero vector at lookup time.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim, bool aligned = true)
      : dim_(dim), aligned_(aligned) {
    if (dim == 0) throw std::invalid_argument("embeddings: dim must be positive");
  }

  std::size_t dim() const { return dim_; }
  bool aligned() const { return aligned_; }
  void set_aligned(bool v) { aligned_ = v; }

  // Last write wins for duplicate tokens; the caller counts duplicates.
  void insert(const std::string& lang, const std::string& token, std::vector<double> row,
              std::size_t* duplicates = nullptr) {
    if (row.size() != dim_)
      throw std::invalid_argument("embeddings: vector for '" + token + "' has " +
                                  std::to_string(row.size()) + " components, expected " +
                                  std::to_string(dim_));
    auto& table = langs_[lang];
    auto it = table.index.find(token);
    if (it != table.index.end()) {
      if (duplicates) ++*duplicates;
      table.rows[it->second] = std::move(row);
      return;
    }
    table.index.emplace(token, table.rows.size());
    table.rows.push_back(std::move(row));
  }

  bool has_language(const std::string& lang) const { return langs_.count(lang) > 0; }

  std::vector<std::string> languages() const {
    std::vector<std::string> out;
    for (const auto& [lang, t] : langs_) out.push_back(lang);
    return out;
  }

  std::size_t vocab_size(const std::string& lang) const {
    auto it = langs_.find(lang);
    return it == langs_.end() ? 0 : it->second.rows.size();
  }

  // nullptr for out-of-vocabulary tokens.
  const std::vector<double>* lookup(const std::string& lang, const std::string& token) const {
    auto it = langs_.find(lang);
    if (it == langs_.end()) return nullptr;
    auto jt = it->second.index.find(token);
    if (jt == it->second.index.end()) return nullptr;
    return &it->second.rows[jt->second];
  }

  // Order-insensitive content digest; stable across a training run.
  std::uint64_t content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
      const unsigned char* c = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= c[i];
        h *= 1099511628211ull;
      }
    };
    for (const auto& [lang, table] : langs_) {
      mix(lang.data(), lang.size());
      std::vector<std::pair<std::string, std::size_t>> sorted(table.index.begin(),
                                                              table.index.end());
      std::sort(sorted.begin(), sorted.end());
      for (const auto& [token, row] : sorted) {
        mix(token.data(), token.size());
        mix(table.rows[row].data(), table.rows[row].size() * sizeof(double));
      }
    }
    return h;
  }

 private:
  struct LangTable {
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::vector<double>> rows;
  };
  std::size_t dim_;
  bool aligned_;
  std::map<std::string, LangTable> langs_;
};

struct EmbeddingLoadReport {
  std::size_t rows = 0;
  std::size_t duplicates = 0;
};

// word2vec text format: header `vocab_size dim`, then `token v1 .. vd`.
// Tokens may carry a `lang:word` prefix (single multilingual file); plain
// tokens require an explicit language for the whole file.
inline EmbeddingLoadReport load_embeddings_into(EmbeddingTable& table, const std::string& path,
                                                const std::string& file_lang = "") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_embeddings: cannot open " + path);
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("load_embeddings: " + path + ": missing header line");
  std::istringstream hs(header);
  std::size_t declared_rows = 0, dim = 0;
  if (!(hs >> declared_rows >> dim))
    throw std::runtime_error("load_embeddings: " + path + ": malformed header '" + header + "'");
  if (dim != table.dim())
    throw std::runtime_error("load_embeddings: " + path + ": file dim " + std::to_string(dim) +
                             " does not match expected " + std::to_string(table.dim()));
  EmbeddingLoadReport report;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::string lang = file_lang, token = key;
    if (const auto colon = key.find(':'); colon != std::string::npos) {
      lang = key.substr(0, colon);
      token = key.substr(colon + 1);
    }
    if (lang.empty())
      throw std::runtime_error("load_embeddings: " + path + " line " + std::to_string(lineno) +
                               ": token '" + key +
                               "' has no language prefix and no file language was given");
    std::vector<double> row(dim);
    for (std::size_t i = 0; i < dim; ++i)
      if (!(ls >> row[i]))
        throw std::runtime_error("load_embeddings: " + path + " line " + std::to_string(lineno) +
                                 ": expected " + std::to_string(dim) + " floats");
    double extra;
    if (ls >> extra)
      throw std::runtime_error("load_embeddings: " + path + " line " + std::to_string(lineno) +
                               ": more than " + std::to_string(dim) + " floats");
    table.insert(lang, token, std::move(row), &report.duplicates);
    report.rows++;
  }
  if (declared_rows != report.rows)
    throw std::runtime_error("load_embeddings: " + path + ": header declares " +
                             std::to_string(declared_rows) + " rows, found " +
                             std::to_string(report.rows));
  return report;
}

inline EmbeddingTable load_embeddings(const std::string& path, std::size_t expected_d,
                                      const std::string& file_lang = "") {
  std::ifstream probe(path);
  if (!probe) throw std::runtime_error("load_embeddings: cannot open " + path);
  std::string header;
  std::getline(probe, header);
  std::istringstream hs(header);
  std::size_t rows = 0, dim = 0;
  if (!(hs >> rows >> dim))
    throw std::runtime_error("load_embeddings: " + path + ": malformed header '" + header + "'");
  if (expected_d != 0 && dim != expected_d)
    throw std::runtime_error("load_embeddings: " + path + ": file dim " + std::to_string(dim) +
                             " does not match expected " + std::to_string(expected_d));
  probe.close();
  EmbeddingTable table(dim);
  load_embeddings_into(table, path, file_lang);
  return table;
}

// Corpus-vocabulary view of one language's embeddings: a frozen leaf tensor
// per token id, one shared zero tensor for everything out of vocabulary.
struct EmbeddedLang {
  std::string lang;
  std::vector<TensorPtr> by_token_id;
  TensorPtr zero;
  std::size_t oov_count = 0;

  const TensorPtr& vector_for(int token_id) const {
    return by_token_id.at(static_cast<std::size_t>(token_id));
  }
};

inline EmbeddedLang embed_language(const EmbeddingTable& table, const std::string& lang,
                                   const LanguageCorpus& lc) {
  EmbeddedLang e;
  e.lang = lang;
  e.zero = Tensor::zeros({table.dim()});
  e.by_token_id.reserve(lc.vocab.size());
  for (const auto& token : lc.vocab) {
    const std::vector<double>* row = table.lookup(lang, token);
    if (row == nullptr) {
      e.by_token_id.push_back(e.zero);
      e.oov_count++;
    } else {
      e.by_token_id.push_back(Tensor::make({table.dim()}, *row));
    }
  }
  return e;
}

}  // namespace mhan
