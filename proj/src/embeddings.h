#ifndef MORSEM_EMBEDDINGS_H
#define MORSEM_EMBEDDINGS_H

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>

#include "analysis.h"
#include "linalg.h"
#include "rng.h"

namespace morsem {

// Fixed table of word vectors, all of one dimension. Words absent from the
// table read as zero vectors; callers that care can check Contains first.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(table_.size()); }
  bool Contains(const std::string& word) const { return table_.count(word) > 0; }

  // Zero vector for absent words.
  Vec Get(const std::string& word) const;
  const Vec* Find(const std::string& word) const;
  void Set(const std::string& word, Vec v);

  const std::map<std::string, Vec>& entries() const { return table_; }

  void Save(const std::string& path) const;

 private:
  int dim_ = 0;
  std::map<std::string, Vec> table_;
};

// Reads the plain-text format: a "<count> <dim>" header line followed by one
// "<word> <v1> ... <vd>" row per word. Duplicate words keep the last row (a
// warning goes to stderr). expected_dim, when given, must match the header.
EmbeddingTable LoadWordEmbeddings(const std::string& path,
                                  std::optional<int> expected_dim = std::nullopt,
                                  bool lowercase = false);

enum class AbsentPolicy { kZeros, kOnes };

// Morpheme vector store used by the composition models. Stem vectors come
// from the (frozen) word embedding table; prefix and suffix vectors are
// trainable and get a small random initialization on first touch.
class MorphemeEmbeddings {
 public:
  MorphemeEmbeddings() = default;
  MorphemeEmbeddings(const EmbeddingTable* stems, int dim, std::uint64_t seed)
      : stems_(stems), dim_(dim), rng_(seed) {}

  int dim() const { return dim_; }

  // Read-only lookup; absent morphemes resolve per `policy`.
  Vec Get(Label label, const std::string& morpheme, AbsentPolicy policy) const;

  // Trainable affix entry, created (with random init in +-0.1/sqrt(d)) if
  // missing. Only prefix/suffix labels are trainable.
  Vec* MutableAffix(Label label, const std::string& morpheme);

  bool HasAffix(Label label, const std::string& morpheme) const;

  // Affix stores, keyed by morpheme string; exposed for regularization,
  // checkpointing and tests. Map order keeps dumps deterministic.
  std::map<std::string, Vec>& affixes(Label label);
  const std::map<std::string, Vec>& affixes(Label label) const;

  void set_stem_table(const EmbeddingTable* stems) { stems_ = stems; }
  const EmbeddingTable* stem_table() const { return stems_; }

 private:
  const EmbeddingTable* stems_ = nullptr;
  int dim_ = 0;
  Rng rng_{1};
  std::map<std::string, Vec> prefixes_;
  std::map<std::string, Vec> suffixes_;
};

}  // namespace morsem

#endif
