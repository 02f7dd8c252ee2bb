#ifndef MORSEM_FEATURE_SPACE_H
#define MORSEM_FEATURE_SPACE_H

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace morsem {

// Sparse feature vector keyed by feature id, kept sorted by id so that
// accumulation order (and hence floating-point results) is deterministic.
class SparseVec {
 public:
  void Add(int id, double value);
  void AddScaled(const SparseVec& other, double scale);
  double Dot(const std::vector<double>& dense) const;

  // Merges duplicate ids and sorts; cheap no-op when already canonical.
  void Canonicalize();

  const std::vector<std::pair<int, double>>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); canonical_ = true; }

  double MaxAbsDifference(const SparseVec& other) const;

 private:
  std::vector<std::pair<int, double>> entries_;
  bool canonical_ = true;
};

// Bidirectional map between feature template strings and dense ids.
// Ids are assigned in first-touch order, so a fixed traversal order of the
// data yields a fixed index (the determinism contract leans on this).
class FeatureIndex {
 public:
  // Returns the id, interning the template if it is new.
  int Intern(const std::string& tmpl);
  // Returns the id or -1 when the template is unknown.
  int Lookup(const std::string& tmpl) const;

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int id) const { return names_[id]; }

  // Two-column "id<TAB>template" text dump; restore round-trips exactly.
  void Dump(const std::string& path) const;
  static FeatureIndex Restore(const std::string& path);

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> names_;
};

}  // namespace morsem

#endif
