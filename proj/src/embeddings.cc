#include "embeddings.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "errors.h"

namespace morsem {

Vec EmbeddingTable::Get(const std::string& word) const {
  auto it = table_.find(word);
  if (it == table_.end()) return Vec(dim_, 0.0);
  return it->second;
}

const Vec* EmbeddingTable::Find(const std::string& word) const {
  auto it = table_.find(word);
  return it == table_.end() ? nullptr : &it->second;
}

void EmbeddingTable::Set(const std::string& word, Vec v) {
  if (dim_ == 0) dim_ = static_cast<int>(v.size());
  if (static_cast<int>(v.size()) != dim_) {
    throw DataError("embedding dimension mismatch for word '" + word + "'");
  }
  table_[word] = std::move(v);
}

void EmbeddingTable::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open embedding file for writing: " + path);
  out << table_.size() << ' ' << dim_ << '\n';
  out.precision(17);
  for (const auto& [word, vec] : table_) {
    out << word;
    for (double x : vec) out << ' ' << x;
    out << '\n';
  }
}

EmbeddingTable LoadWordEmbeddings(const std::string& path,
                                  std::optional<int> expected_dim,
                                  bool lowercase) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path);

  std::string header;
  if (!std::getline(in, header)) throw DataError("empty embedding file: " + path);
  std::istringstream hs(header);
  long count = -1;
  int dim = -1;
  if (!(hs >> count >> dim) || count < 0 || dim < 1) {
    throw DataError("malformed embedding header (want '<count> <dim>'): " + header);
  }
  std::string trailing;
  if (hs >> trailing) {
    throw DataError("malformed embedding header (want '<count> <dim>'): " + header);
  }
  if (expected_dim && *expected_dim != dim) {
    throw DataError("embedding dimension is " + std::to_string(dim) +
                    ", expected " + std::to_string(*expected_dim));
  }

  EmbeddingTable table(dim);
  std::string line;
  long rows = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (lowercase) {
      std::transform(word.begin(), word.end(), word.begin(),
                     [](unsigned char c) { return std::tolower(c); });
    }
    Vec v;
    v.reserve(dim);
    double x;
    while (ls >> x) v.push_back(x);
    if (static_cast<int>(v.size()) != dim) {
      throw DataError("embedding row at line " + std::to_string(lineno) +
                      " has " + std::to_string(v.size()) + " values, expected " +
                      std::to_string(dim));
    }
    if (table.Contains(word)) {
      std::cerr << "warning: duplicate embedding for '" << word
                << "', keeping the last row\n";
    }
    table.Set(word, std::move(v));
    ++rows;
  }
  if (rows != count) {
    std::cerr << "warning: embedding header promised " << count << " rows, read "
              << rows << "\n";
  }
  return table;
}

Vec MorphemeEmbeddings::Get(Label label, const std::string& morpheme,
                            AbsentPolicy policy) const {
  if (label == Label::kStem) {
    if (stems_ != nullptr) {
      if (const Vec* v = stems_->Find(morpheme)) return *v;
    }
  } else {
    const auto& store = affixes(label);
    auto it = store.find(morpheme);
    if (it != store.end()) return it->second;
  }
  return Vec(dim_, policy == AbsentPolicy::kOnes ? 1.0 : 0.0);
}

Vec* MorphemeEmbeddings::MutableAffix(Label label, const std::string& morpheme) {
  if (label == Label::kStem) return nullptr;  // stems are frozen
  auto& store = affixes(label);
  auto it = store.find(morpheme);
  if (it != store.end()) return &it->second;
  double r = 0.1 / std::sqrt(static_cast<double>(dim_));
  Vec v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = rng_.Uniform(-r, r);
  return &store.emplace(morpheme, std::move(v)).first->second;
}

bool MorphemeEmbeddings::HasAffix(Label label, const std::string& morpheme) const {
  if (label == Label::kStem) return false;
  return affixes(label).count(morpheme) > 0;
}

std::map<std::string, Vec>& MorphemeEmbeddings::affixes(Label label) {
  return label == Label::kPrefix ? prefixes_ : suffixes_;
}

const std::map<std::string, Vec>& MorphemeEmbeddings::affixes(Label label) const {
  return label == Label::kPrefix ? prefixes_ : suffixes_;
}

}  // namespace morsem
