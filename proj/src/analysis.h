#ifndef MORSEM_ANALYSIS_H
#define MORSEM_ANALYSIS_H

#include <optional>
#include <string>
#include <vector>

namespace morsem {

// Order matters: Viterbi tie-breaking prefers smaller values.
enum class Label : int { kStem = 0, kPrefix = 1, kSuffix = 2 };

constexpr int kNumLabels = 3;

inline const char* LabelName(Label l) {
  switch (l) {
    case Label::kStem: return "stem";
    case Label::kPrefix: return "prefix";
    case Label::kSuffix: return "suffix";
  }
  return "?";
}

inline std::optional<Label> ParseLabel(const std::string& s) {
  if (s == "stem") return Label::kStem;
  if (s == "prefix") return Label::kPrefix;
  if (s == "suffix") return Label::kSuffix;
  return std::nullopt;
}

// A segmentation of some string into labeled, contiguous, non-empty pieces.
struct LabeledSegmentation {
  std::vector<std::string> segments;
  std::vector<Label> labels;

  int size() const { return static_cast<int>(segments.size()); }

  bool operator==(const LabeledSegmentation& o) const {
    return segments == o.segments && labels == o.labels;
  }
};

// Underlying (canonical) string plus its segmentation; the segments always
// concatenate to exactly `ur`.
struct CanonicalAnalysis {
  std::string ur;
  LabeledSegmentation seg;

  bool operator==(const CanonicalAnalysis& o) const {
    return ur == o.ur && seg == o.seg;
  }
};

inline std::string ConcatSegments(const LabeledSegmentation& seg) {
  std::string s;
  for (const auto& piece : seg.segments) s += piece;
  return s;
}

// Serialized as in the dataset format: "seg1:label1+seg2:label2+...".
inline std::string FormatAnalysis(const LabeledSegmentation& seg) {
  std::string out;
  for (int i = 0; i < seg.size(); ++i) {
    if (i > 0) out += '+';
    out += seg.segments[i];
    out += ':';
    out += LabelName(seg.labels[i]);
  }
  return out;
}

// Unique string key for memoization maps.
inline std::string AnalysisKey(const CanonicalAnalysis& a) {
  std::string key = a.ur;
  key += '\x1f';
  key += FormatAnalysis(a.seg);
  return key;
}

}  // namespace morsem

#endif
