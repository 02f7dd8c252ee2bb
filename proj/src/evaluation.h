#ifndef MORSEM_EVALUATION_H
#define MORSEM_EVALUATION_H

#include <cstdint>
#include <string>
#include <vector>

#include "analysis.h"
#include "linalg.h"

namespace morsem {

// Exact match of underlying string and segment boundaries; labels must also
// match when require_labels is set.
bool SegmentationMatch(const CanonicalAnalysis& pred, const CanonicalAnalysis& gold,
                       bool require_labels = false);

// Set-based F1 over the segment strings of one analysis pair (labels and
// multiplicity ignored). Two empty sets count as a perfect match.
double MorphemeF1(const CanonicalAnalysis& pred, const CanonicalAnalysis& gold);

// Levenshtein distance between the two analyses rendered as segments joined
// by '#'. Rejects segments that contain the separator.
int CanonicalEditDistance(const CanonicalAnalysis& pred, const CanonicalAnalysis& gold);

struct SegmentationMetrics {
  double accuracy = 0.0;         // boundary match, labels ignored
  double strict_accuracy = 0.0;  // boundary and label match
  double f1 = 0.0;               // mean morpheme F1
  double edit_distance = 0.0;    // mean canonical edit distance
  int count = 0;
};

SegmentationMetrics EvaluateSegmentations(const std::vector<CanonicalAnalysis>& pred,
                                          const std::vector<CanonicalAnalysis>& gold);

struct CosineSummary {
  double mean = 0.0;  // undefined pairs (a zero-norm side) enter as zero
  int count = 0;
  int undefined = 0;
};

CosineSummary MeanCosine(const std::vector<Vec>& pred, const std::vector<Vec>& gold);

struct QuartileStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Linear-interpolation quartiles; input need not be sorted.
QuartileStats Quartiles(std::vector<double> xs);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1), zero when n < 2
};

MeanStd MeanAndStd(const std::vector<double>& xs);

// "0.9333 (0.0123)" with four decimals.
std::string FormatMeanStd(const MeanStd& ms);

// Balanced random assignment of n items to folds 0 .. folds-1.
std::vector<int> FoldAssignment(int n, int folds, std::uint64_t seed);

}  // namespace morsem

#endif
