#include "evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "errors.h"
#include "rng.h"

namespace morsem {

bool SegmentationMatch(const CanonicalAnalysis& pred, const CanonicalAnalysis& gold,
                       bool require_labels) {
  if (pred.ur != gold.ur) return false;
  if (pred.seg.segments != gold.seg.segments) return false;
  if (require_labels && pred.seg.labels != gold.seg.labels) return false;
  return true;
}

double MorphemeF1(const CanonicalAnalysis& pred, const CanonicalAnalysis& gold) {
  std::set<std::string> p(pred.seg.segments.begin(), pred.seg.segments.end());
  std::set<std::string> g(gold.seg.segments.begin(), gold.seg.segments.end());
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  int inter = 0;
  for (const auto& s : p) inter += g.count(s);
  double prec = inter / static_cast<double>(p.size());
  double rec = inter / static_cast<double>(g.size());
  if (prec + rec == 0.0) return 0.0;
  return 2.0 * prec * rec / (prec + rec);
}

namespace {

std::string JoinSegments(const CanonicalAnalysis& a) {
  std::string out;
  for (int i = 0; i < a.seg.size(); ++i) {
    const std::string& piece = a.seg.segments[i];
    if (piece.find('#') != std::string::npos) {
      throw DataError("segment '" + piece + "' contains the join separator '#'");
    }
    if (i > 0) out += '#';
    out += piece;
  }
  return out;
}

int Levenshtein(const std::string& a, const std::string& b) {
  int n = static_cast<int>(a.size());
  int m = static_cast<int>(b.size());
  std::vector<int> prev(m + 1), cur(m + 1);
  for (int j = 0; j <= m; ++j) prev[j] = j;
  for (int i = 1; i <= n; ++i) {
    cur[0] = i;
    for (int j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

int CanonicalEditDistance(const CanonicalAnalysis& pred, const CanonicalAnalysis& gold) {
  return Levenshtein(JoinSegments(pred), JoinSegments(gold));
}

SegmentationMetrics EvaluateSegmentations(const std::vector<CanonicalAnalysis>& pred,
                                          const std::vector<CanonicalAnalysis>& gold) {
  if (pred.size() != gold.size()) {
    throw DataError("prediction/gold count mismatch in evaluation");
  }
  SegmentationMetrics m;
  m.count = static_cast<int>(pred.size());
  if (m.count == 0) return m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    m.accuracy += SegmentationMatch(pred[i], gold[i], false) ? 1.0 : 0.0;
    m.strict_accuracy += SegmentationMatch(pred[i], gold[i], true) ? 1.0 : 0.0;
    m.f1 += MorphemeF1(pred[i], gold[i]);
    m.edit_distance += CanonicalEditDistance(pred[i], gold[i]);
  }
  m.accuracy /= m.count;
  m.strict_accuracy /= m.count;
  m.f1 /= m.count;
  m.edit_distance /= m.count;
  return m;
}

CosineSummary MeanCosine(const std::vector<Vec>& pred, const std::vector<Vec>& gold) {
  if (pred.size() != gold.size()) {
    throw DataError("prediction/gold count mismatch in vector evaluation");
  }
  CosineSummary s;
  s.count = static_cast<int>(pred.size());
  if (s.count == 0) return s;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    std::optional<double> c = Cosine(pred[i], gold[i]);
    if (c.has_value()) {
      total += *c;
    } else {
      ++s.undefined;  // contributes zero
    }
  }
  s.mean = total / s.count;
  return s;
}

QuartileStats Quartiles(std::vector<double> xs) {
  if (xs.empty()) throw DataError("quartiles of an empty sample");
  std::sort(xs.begin(), xs.end());
  auto at = [&](double q) {
    double pos = q * (xs.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, xs.size() - 1);
    double frac = pos - lo;
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
  };
  QuartileStats q;
  q.min = xs.front();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  q.max = xs.back();
  return q;
}

MeanStd MeanAndStd(const std::vector<double>& xs) {
  MeanStd ms;
  if (xs.empty()) return ms;
  double sum = 0.0;
  for (double x : xs) sum += x;
  ms.mean = sum / xs.size();
  if (xs.size() < 2) return ms;
  double sq = 0.0;
  for (double x : xs) sq += (x - ms.mean) * (x - ms.mean);
  ms.std = std::sqrt(sq / (xs.size() - 1));
  return ms;
}

std::string FormatMeanStd(const MeanStd& ms) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f (%.4f)", ms.mean, ms.std);
  return buf;
}

std::vector<int> FoldAssignment(int n, int folds, std::uint64_t seed) {
  if (folds < 2) throw DataError("need at least two folds");
  if (n < folds) throw DataError("fewer items than folds");
  std::vector<int> assign(n);
  for (int i = 0; i < n; ++i) assign[i] = i % folds;
  Rng rng(seed);
  rng.Shuffle(&assign);
  return assign;
}

}  // namespace morsem
