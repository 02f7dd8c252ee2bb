#ifndef MORSEM_SEGMENTER_H
#define MORSEM_SEGMENTER_H

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "analysis.h"
#include "feature_space.h"
#include "rng.h"

namespace morsem {

// String-keyed variant of the arc feature cache (segment contexts have
// variable length, so packing into an integer is not practical).
class SegFeatureCache {
 public:
  const std::vector<int>* Find(const std::string& key, int index_size) const;
  void Put(const std::string& key, std::vector<int> ids, bool permanent,
           int index_size);

 private:
  struct Entry {
    std::vector<int> ids;
    int built_at;
  };
  std::unordered_map<std::string, Entry> map_;
};

// First-order semi-Markov CRF over labeled segmentations of an underlying
// string. Also serves, globally normalized, as the proposal q2(s, l | u).
struct SegmenterParams {
  FeatureIndex feature_index;
  std::vector<double> eta;
  int max_segment_length = 12;
  int num_labels = kNumLabels;  // tests may restrict to a prefix of the label set

  mutable SegFeatureCache cache;

  double Weight(int id) const {
    return (id >= 0 && id < static_cast<int>(eta.size())) ? eta[id] : 0.0;
  }
  void SyncWeights() { eta.resize(feature_index.size(), 0.0); }
};

struct SegmenterTrainConfig {
  int epochs = 20;
  double learning_rate = 0.5;
  double adagrad_epsilon = 1e-8;
  double l2 = 1e-4;
  int max_segment_length = 12;
  std::uint64_t seed = 1;
};

// Sum of all firing feature weights for this exact labeled segmentation
// (segment, context, length, boundary and transition features).
double SegmentationLogScore(const LabeledSegmentation& seg, const std::string& u,
                            const SegmenterParams& params);

// The same features as counts; interns new templates.
SparseVec SegmentationFeatures(const LabeledSegmentation& seg, const std::string& u,
                               SegmenterParams* params);

double SemiCrfLogPartition(const std::string& u, const SegmenterParams& params);

// Expected feature counts under the segmentation posterior: the gradient of
// the log partition with respect to eta. Interns new templates.
SparseVec SemiCrfExpectedFeatures(const std::string& u, SegmenterParams* params);

// Highest-scoring labeled segmentation. Exact ties prefer fewer segments,
// then the lexicographically smallest label sequence (stem < prefix < suffix).
LabeledSegmentation SemiCrfViterbi(const std::string& u, const SegmenterParams& params);

// Per-string tables (segment scores, forward masses) built once so repeated
// sampling and scoring against a frozen parameter set stay cheap.
class Q2Lattice {
 public:
  Q2Lattice(std::string u, const SegmenterParams& params);

  LabeledSegmentation Sample(Rng* rng) const;
  double LogPartition() const { return log_z_; }
  // Score of one segmentation from the cached tables; equals
  // SegmentationLogScore against the same parameters.
  double Score(const LabeledSegmentation& seg) const;
  // log q2(seg | u) = Score(seg) - LogPartition().
  double LogProb(const LabeledSegmentation& seg) const;

 private:
  int SegIndex(int b, int e, int l) const;

  std::string u_;
  int n_;
  int max_len_;
  int labels_;
  std::vector<double> seg_score_;    // [b][e][label]
  std::vector<double> trans_;        // [from][to], from = labels_ means BOS
  std::vector<double> eos_;          // [label]
  std::vector<double> alpha_;        // [j][label]
  double log_z_;
};

std::pair<LabeledSegmentation, double> SampleQ2(const std::string& u,
                                                const SegmenterParams& params,
                                                Rng* rng);

// Conditional MLE on (u, gold segmentation) pairs.
SegmenterParams TrainProposalQ2(
    const std::vector<std::pair<std::string, LabeledSegmentation>>& data,
    const SegmenterTrainConfig& config);

}  // namespace morsem

#endif
