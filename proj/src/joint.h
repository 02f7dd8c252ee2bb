#ifndef MORSEM_JOINT_H
#define MORSEM_JOINT_H

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "analysis.h"
#include "composition.h"
#include "embeddings.h"
#include "rng.h"
#include "segmenter.h"
#include "transducer.h"

namespace morsem {

// Parameters of the joint distribution over (vector, segmentation, labels,
// underlying string) given a surface word: a Gaussian vector-fit factor
// around the composed morpheme vectors, a segmentation factor, and a
// transduction factor that sums over edit paths.
struct JointParams {
  TransducerParams transducer;
  SegmenterParams segmenter;
  CompositionModel composition;
  MorphemeEmbeddings morphemes;
  double sigma_sq = 0.5;
  double l2 = 1e-4;
};

// Proposal distributions, trained on gold analyses and then frozen.
struct JointProposals {
  TransducerParams q1;  // underlying string given surface word
  SegmenterParams q2;   // labeled segmentation given underlying string
};

struct WeightedSample {
  CanonicalAnalysis analysis;
  double log_struct = 0.0;  // segmentation + transduction log factors
  double log_gauss = 0.0;   // vector fit, zero when no vector is scored
  double log_q = 0.0;       // proposal log density of this sample
  double log_weight = 0.0;  // log_struct + log_gauss - log_q
};

// Unnormalized joint log score of one analysis (with the Gaussian term when
// v is non-null). Throws DataError when the analysis is outside the model's
// support (symbols or length).
double JointUnnormalizedLogScore(const CanonicalAnalysis& analysis,
                                 const std::string& word, const Vec* v,
                                 const JointParams& params);

// num_samples importance samples for `word`; the Gaussian factor enters the
// weights when v is non-null.
std::vector<WeightedSample> DrawSamples(const std::string& word, const Vec* v,
                                        int num_samples, const JointParams& params,
                                        const JointProposals& proposals, Rng* rng);

struct LogZGradients {
  SparseVec eta;           // d log Z / d segmentation weights
  SparseVec omega;         // d log Z / d transduction weights
  double log_z_estimate = 0.0;
  double ess = 0.0;        // effective sample size of the weights
};

// Self-normalized importance estimate of the partition gradient from drawn
// samples. The sample weights are recomputed without the Gaussian term (the
// vector integrates out of the partition, so composition parameters take no
// gradient here). Interns features of the sampled analyses.
LogZGradients EstimateLogZGradients(const std::vector<WeightedSample>& samples,
                                    const std::string& word, JointParams* params);

// Convenience form: draws num_samples fresh (vector-free) samples first.
LogZGradients EstimateLogZGradients(const std::string& word, int num_samples,
                                    JointParams* params,
                                    const JointProposals& proposals, Rng* rng);

struct JointExample {
  std::string word;
  CanonicalAnalysis gold;
};

struct JointTrainConfig {
  int epochs = 20;
  double learning_rate = 0.1;
  double adagrad_epsilon = 1e-8;
  double l2 = 1e-4;          // on segmentation/transduction weights
  double sigma_sq = 0.5;
  int train_samples = 10;    // importance samples per gradient step
  int dev_samples = 500;     // decode samples for per-epoch dev accuracy
  bool use_vectors = true;   // score word vectors and train composition
  CompositionKind composition = CompositionKind::kAdd;
  std::uint64_t seed = 1;
};

struct JointTrainResult {
  JointParams params;                // snapshot from the best dev epoch
  std::vector<double> dev_accuracy;  // one entry per epoch
  int best_epoch = -1;
  int skipped_examples = 0;          // gold analyses outside the support
};

// Stochastic maximum likelihood: gold factor gradients minus the importance
// estimate of the partition gradient, AdaGrad steps, one pass per epoch in
// shuffled order. Keeps the parameters from the epoch with the highest dev
// segmentation accuracy (the final epoch when dev is empty).
JointTrainResult TrainJoint(const std::vector<JointExample>& train,
                            const std::vector<JointExample>& dev,
                            const EmbeddingTable& embeddings,
                            const JointProposals& proposals,
                            const JointTrainConfig& config);

struct DecodeConfig {
  int num_samples = 10000;
  bool use_vector = true;      // include the Gaussian factor when v is given
  bool rank_by_weight = false; // rank by importance weight instead of joint score
  std::uint64_t seed = 1;
};

// Highest-ranked sampled analysis: approximate MAP over the sampled support.
// Ranking uses the joint score (falling back to the lexicographically
// smallest underlying string and formatted analysis on exact ties), or the
// raw importance weight first under rank_by_weight. Weight ranking degrades
// as the sample count grows (rare proposals carry outsized weights), so the
// joint score is the default.
CanonicalAnalysis Decode(const std::string& word, const Vec* v,
                         const JointParams& params, const JointProposals& proposals,
                         const DecodeConfig& config);

// As Decode, but with the underlying string held fixed; only segmentations
// are sampled.
CanonicalAnalysis DecodeWithOracleUr(const std::string& word, const std::string& ur,
                                     const Vec* v, const JointParams& params,
                                     const JointProposals& proposals,
                                     const DecodeConfig& config);

// Posterior-mean vector for an unseen word: the weight-averaged composed
// vector over sampled analyses (no Gaussian factor in the weights).
Vec PredictVector(const std::string& word, const JointParams& params,
                  const JointProposals& proposals, const DecodeConfig& config);

struct GridPoint {
  double sigma_sq = 0.5;
  double l2 = 1e-4;
};

struct GridCell {
  GridPoint point;
  double accuracy = 0.0;
  double f1 = 0.0;
};

struct GridResult {
  GridCell best;
  std::vector<GridCell> cells;
};

// Evaluates every point with the supplied callback (accuracy, F1 on dev) and
// picks the best by accuracy, then F1, then smaller l2, then smaller
// sigma^2.
GridResult GridSearch(
    const std::vector<GridPoint>& points,
    const std::function<std::pair<double, double>(const GridPoint&)>& evaluate);

}  // namespace morsem

#endif
