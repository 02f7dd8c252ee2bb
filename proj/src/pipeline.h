#ifndef MORSEM_PIPELINE_H
#define MORSEM_PIPELINE_H

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.h"
#include "evaluation.h"
#include "joint.h"

namespace morsem {

// One bag of knobs for a full run; field defaults are the library defaults.
struct RunConfig {
  std::uint64_t seed = 1;
  int train_samples = 10;       // importance samples per training step
  int decode_samples = 10000;   // samples per decoded word
  int insertion_limit = 5;      // by how many chars an underlying form may grow
  int max_segment_length = 12;
  double l2 = 1e-4;
  double sigma_sq = 0.5;
  CompositionKind composition = CompositionKind::kAdd;
  int epochs = 20;
  int proposal_epochs = 20;
  int dev_samples = 500;        // decode samples for per-epoch dev accuracy
  bool use_vectors = true;      // score word vectors during training/decoding
  bool oracle_ur = false;       // decode with the gold underlying string fixed
  bool rank_by_weight = false;  // decode ranking by importance weight, not score
  int folds = 10;
  double dev_fraction = 0.1;    // carved from train where no dev set is given
};

std::vector<JointExample> ToJointExamples(const Dataset& data);

// Stable 64-bit FNV-1a string hash, used to derive per-word seeds.
std::uint64_t HashString(const std::string& s);

// Fits the two proposal distributions on the gold analyses: an edit model of
// the underlying string given the surface, and a segmenter of the underlying
// string. Both are trained here and frozen everywhere downstream.
JointProposals TrainProposals(const Dataset& data, const RunConfig& config);

// Proposal training plus joint training, mapping RunConfig onto the module
// configs. `dev` steers best-epoch selection and may be empty.
struct PipelineModel {
  JointParams params;
  JointProposals proposals;
  std::vector<double> dev_accuracy;
  int best_epoch = -1;
  int skipped_examples = 0;
};
PipelineModel TrainPipeline(const Dataset& train, const Dataset& dev,
                            const EmbeddingTable& embeddings,
                            const RunConfig& config);

// As TrainPipeline, but with proposals supplied by the caller (reused across
// runs) instead of trained here.
PipelineModel TrainPipelineWith(const JointProposals& proposals,
                                const Dataset& train, const Dataset& dev,
                                const EmbeddingTable& embeddings,
                                const RunConfig& config);

// Decodes every record and scores against gold. Per-word seeds are derived
// from config.seed and the surface string, so predictions do not depend on
// corpus order. Words the model cannot analyze at all (unsupported symbols
// or lengths) fall back to a single stem spanning the surface; numeric
// failures propagate.
struct CorpusPredictions {
  std::vector<CanonicalAnalysis> predicted;  // aligned with the dataset
  SegmentationMetrics metrics;
};
CorpusPredictions DecodeCorpus(const Dataset& data,
                               const EmbeddingTable& embeddings,
                               const JointParams& params,
                               const JointProposals& proposals,
                               const RunConfig& config);

// "surface<TAB>predicted-analysis<TAB>gold-analysis", one row per record.
void WritePredictionsTsv(const Dataset& data,
                         const std::vector<CanonicalAnalysis>& predicted,
                         const std::string& path);

// Fixed-precision tab-separated table; identical inputs give identical bytes.
std::string FormatMetricsTable(
    const std::vector<std::pair<std::string, SegmentationMetrics>>& rows);

// Seeded k-fold cross-validation: per fold, proposals and the joint model
// are trained on the other folds (with a dev slice carved out for epoch
// selection) and evaluated on the held-out fold.
struct CrossvalResult {
  std::vector<int> fold_of;  // fold label per record, for audit files
  std::vector<SegmentationMetrics> fold_metrics;
  MeanStd accuracy, strict_accuracy, f1, edit_distance;
  std::string table;  // "metric<TAB>mean (std)" rows
};
CrossvalResult CrossValidate(const Dataset& data,
                             const EmbeddingTable& embeddings,
                             const RunConfig& config);

// Writes "index<TAB>surface<TAB>fold" rows so fold membership is auditable.
void WriteFoldAssignments(const Dataset& data, const std::vector<int>& fold_of,
                          const std::string& path);

// Trains one joint model per (l2, sigma^2) cell against a fixed dev set and
// returns every cell plus the winner. Proposals are shared across cells.
GridResult RunGridSearch(const Dataset& train, const Dataset& dev,
                         const EmbeddingTable& embeddings,
                         const JointProposals& proposals,
                         const RunConfig& config,
                         const std::vector<double>& l2_values,
                         const std::vector<double>& sigma_sq_values);

std::string FormatGridTable(const GridResult& grid);

// Per-affix vector-approximation quality under gold morphology: for every
// record whose surface has an embedding, compose the gold morphemes and
// record the cosine against the observed vector once per affix occurrence.
struct AffixCosineRow {
  std::string affix;  // "<label>:<segment>"
  double cosine = 0.0;
};
std::vector<AffixCosineRow> GoldCompositionAffixCosines(
    const Dataset& data, const EmbeddingTable& embeddings,
    const CompositionModel& model, const MorphemeEmbeddings& morphemes);

// "affix<TAB>cosine" rows for external plotting.
void WriteBoxplotData(const std::vector<AffixCosineRow>& rows,
                      const std::string& path);

}  // namespace morsem

#endif
