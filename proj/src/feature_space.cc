#include "feature_space.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "errors.h"

namespace morsem {

void SparseVec::Add(int id, double value) {
  if (value == 0.0) return;
  if (!entries_.empty() && canonical_ &&
      id <= entries_.back().first) {
    if (id == entries_.back().first) {
      entries_.back().second += value;
      return;
    }
    canonical_ = false;
  }
  entries_.emplace_back(id, value);
}

void SparseVec::AddScaled(const SparseVec& other, double scale) {
  for (const auto& [id, v] : other.entries_) Add(id, scale * v);
}

void SparseVec::Canonicalize() {
  if (canonical_) return;
  std::sort(entries_.begin(), entries_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> merged;
  merged.reserve(entries_.size());
  for (const auto& [id, v] : entries_) {
    if (!merged.empty() && merged.back().first == id) {
      merged.back().second += v;
    } else {
      merged.emplace_back(id, v);
    }
  }
  entries_.swap(merged);
  canonical_ = true;
}

double SparseVec::Dot(const std::vector<double>& dense) const {
  double s = 0.0;
  for (const auto& [id, v] : entries_) {
    if (id >= 0 && id < static_cast<int>(dense.size())) s += v * dense[id];
  }
  return s;
}

double SparseVec::MaxAbsDifference(const SparseVec& other) const {
  SparseVec a = *this, b = other;
  a.Canonicalize();
  b.Canonicalize();
  double worst = 0.0;
  std::size_t i = 0, j = 0;
  const auto& ea = a.entries_;
  const auto& eb = b.entries_;
  while (i < ea.size() || j < eb.size()) {
    if (j >= eb.size() || (i < ea.size() && ea[i].first < eb[j].first)) {
      worst = std::max(worst, std::fabs(ea[i].second));
      ++i;
    } else if (i >= ea.size() || eb[j].first < ea[i].first) {
      worst = std::max(worst, std::fabs(eb[j].second));
      ++j;
    } else {
      worst = std::max(worst, std::fabs(ea[i].second - eb[j].second));
      ++i;
      ++j;
    }
  }
  return worst;
}

int FeatureIndex::Intern(const std::string& tmpl) {
  auto it = ids_.find(tmpl);
  if (it != ids_.end()) return it->second;
  int id = static_cast<int>(names_.size());
  ids_.emplace(tmpl, id);
  names_.push_back(tmpl);
  return id;
}

int FeatureIndex::Lookup(const std::string& tmpl) const {
  auto it = ids_.find(tmpl);
  return it == ids_.end() ? -1 : it->second;
}

void FeatureIndex::Dump(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open feature index file for writing: " + path);
  for (std::size_t id = 0; id < names_.size(); ++id) {
    out << id << '\t' << names_[id] << '\n';
  }
}

FeatureIndex FeatureIndex::Restore(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature index file: " + path);
  FeatureIndex index;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("feature index line " + std::to_string(lineno) +
                      ": missing tab");
    }
    int id = std::atoi(line.substr(0, tab).c_str());
    if (id != static_cast<int>(index.names_.size())) {
      throw DataError("feature index line " + std::to_string(lineno) +
                      ": ids must be dense and in order");
    }
    index.Intern(line.substr(tab + 1));
  }
  return index;
}

}  // namespace morsem
