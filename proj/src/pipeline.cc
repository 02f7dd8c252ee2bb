#include "pipeline.h"

#include <cstdio>
#include <fstream>

#include "composition.h"
#include "errors.h"
#include "rng.h"

namespace morsem {
namespace {

std::string Num(double x, const char* fmt = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, x);
  return buf;
}

CanonicalAnalysis WholeWordFallback(const std::string& surface) {
  CanonicalAnalysis a;
  a.ur = surface;
  a.seg.segments = {surface};
  a.seg.labels = {Label::kStem};
  return a;
}

std::ofstream OpenForWrite(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file '" + path + "'");
  return out;
}

}  // namespace

std::vector<JointExample> ToJointExamples(const Dataset& data) {
  std::vector<JointExample> out;
  out.reserve(data.size());
  for (const auto& record : data) out.push_back({record.surface, record.gold});
  return out;
}

JointProposals TrainProposals(const Dataset& data, const RunConfig& config) {
  if (data.empty()) throw UsageError("no data to train proposals on");

  std::vector<TransductionPair> q1_pairs;
  std::vector<std::pair<std::string, LabeledSegmentation>> q2_pairs;
  q1_pairs.reserve(data.size());
  q2_pairs.reserve(data.size());
  for (const auto& record : data) {
    q1_pairs.push_back({record.surface, record.gold.ur});
    q2_pairs.emplace_back(record.gold.ur, record.gold.seg);
  }

  TransducerTrainConfig q1_cfg;
  q1_cfg.epochs = config.proposal_epochs;
  q1_cfg.insertion_limit = config.insertion_limit;
  q1_cfg.seed = Rng::DeriveSeed(config.seed, 11);

  SegmenterTrainConfig q2_cfg;
  q2_cfg.epochs = config.proposal_epochs;
  q2_cfg.max_segment_length = config.max_segment_length;
  q2_cfg.seed = Rng::DeriveSeed(config.seed, 12);

  JointProposals proposals;
  proposals.q1 = TrainProposalQ1(q1_pairs, q1_cfg);
  proposals.q2 = TrainProposalQ2(q2_pairs, q2_cfg);
  return proposals;
}

// FNV-1a.
std::uint64_t HashString(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

PipelineModel TrainPipelineWith(const JointProposals& proposals,
                                const Dataset& train, const Dataset& dev,
                                const EmbeddingTable& embeddings,
                                const RunConfig& config) {
  PipelineModel model;
  model.proposals = proposals;

  JointTrainConfig jc;
  jc.epochs = config.epochs;
  jc.l2 = config.l2;
  jc.sigma_sq = config.sigma_sq;
  jc.train_samples = config.train_samples;
  jc.dev_samples = config.dev_samples;
  jc.use_vectors = config.use_vectors;
  jc.composition = config.composition;
  jc.seed = Rng::DeriveSeed(config.seed, 21);

  JointTrainResult result = TrainJoint(ToJointExamples(train),
                                       ToJointExamples(dev), embeddings,
                                       model.proposals, jc);
  model.params = std::move(result.params);
  model.dev_accuracy = std::move(result.dev_accuracy);
  model.best_epoch = result.best_epoch;
  model.skipped_examples = result.skipped_examples;
  return model;
}

PipelineModel TrainPipeline(const Dataset& train, const Dataset& dev,
                            const EmbeddingTable& embeddings,
                            const RunConfig& config) {
  return TrainPipelineWith(TrainProposals(train, config), train, dev,
                           embeddings, config);
}

CorpusPredictions DecodeCorpus(const Dataset& data,
                               const EmbeddingTable& embeddings,
                               const JointParams& params,
                               const JointProposals& proposals,
                               const RunConfig& config) {
  CorpusPredictions out;
  out.predicted.reserve(data.size());
  std::vector<CanonicalAnalysis> gold;
  gold.reserve(data.size());

  for (std::size_t i = 0; i < data.size(); ++i) {
    const DatasetRecord& record = data[i];
    DecodeConfig dc;
    dc.num_samples = config.decode_samples;
    dc.use_vector = config.use_vectors;
    dc.rank_by_weight = config.rank_by_weight;
    dc.seed = Rng::DeriveSeed(config.seed, HashString(record.surface));
    const Vec* v = config.use_vectors ? embeddings.Find(record.surface) : nullptr;
    CanonicalAnalysis pred;
    try {
      pred = config.oracle_ur
                 ? DecodeWithOracleUr(record.surface, record.gold.ur, v, params,
                                      proposals, dc)
                 : Decode(record.surface, v, params, proposals, dc);
    } catch (const DataError&) {
      pred = WholeWordFallback(record.surface);
    }
    out.predicted.push_back(std::move(pred));
    gold.push_back(record.gold);
  }
  out.metrics = EvaluateSegmentations(out.predicted, gold);
  return out;
}

void WritePredictionsTsv(const Dataset& data,
                         const std::vector<CanonicalAnalysis>& predicted,
                         const std::string& path) {
  if (data.size() != predicted.size()) {
    throw UsageError("predictions are not aligned with the dataset");
  }
  std::ofstream out = OpenForWrite(path);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data[i].surface << '\t' << FormatAnalysis(predicted[i].seg) << '\t'
        << FormatAnalysis(data[i].gold.seg) << '\n';
  }
}

std::string FormatMetricsTable(
    const std::vector<std::pair<std::string, SegmentationMetrics>>& rows) {
  std::string out = "model\taccuracy\tstrict\tf1\tedit\tn\n";
  for (const auto& [name, m] : rows) {
    out += name;
    out += '\t' + Num(m.accuracy) + '\t' + Num(m.strict_accuracy) + '\t' +
           Num(m.f1) + '\t' + Num(m.edit_distance) + '\t' +
           std::to_string(m.count) + '\n';
  }
  return out;
}

CrossvalResult CrossValidate(const Dataset& data,
                             const EmbeddingTable& embeddings,
                             const RunConfig& config) {
  if (config.folds < 2) throw UsageError("cross-validation needs >= 2 folds");
  CrossvalResult result;
  result.fold_of = FoldAssignment(static_cast<int>(data.size()), config.folds,
                                  Rng::DeriveSeed(config.seed, 31));

  std::vector<double> acc, strict, f1, edit;
  for (int fold = 0; fold < config.folds; ++fold) {
    Dataset held_out;
    Dataset rest;
    for (std::size_t i = 0; i < data.size(); ++i) {
      (result.fold_of[i] == fold ? held_out : rest).push_back(data[i]);
    }
    if (held_out.empty() || rest.empty()) {
      throw DataError("fold " + std::to_string(fold) +
                      " leaves an empty train or test side");
    }
    DatasetSplit split = SplitDataset(rest, config.dev_fraction, 0.0,
                                      Rng::DeriveSeed(config.seed, 100 + fold));
    RunConfig fold_cfg = config;
    fold_cfg.seed = Rng::DeriveSeed(config.seed, 200 + fold);
    PipelineModel model =
        TrainPipeline(split.train, split.dev, embeddings, fold_cfg);
    CorpusPredictions preds = DecodeCorpus(held_out, embeddings, model.params,
                                           model.proposals, fold_cfg);
    result.fold_metrics.push_back(preds.metrics);
    acc.push_back(preds.metrics.accuracy);
    strict.push_back(preds.metrics.strict_accuracy);
    f1.push_back(preds.metrics.f1);
    edit.push_back(preds.metrics.edit_distance);
  }

  result.accuracy = MeanAndStd(acc);
  result.strict_accuracy = MeanAndStd(strict);
  result.f1 = MeanAndStd(f1);
  result.edit_distance = MeanAndStd(edit);
  result.table = "metric\tmean (std)\n";
  result.table += "accuracy\t" + FormatMeanStd(result.accuracy) + '\n';
  result.table += "strict_accuracy\t" + FormatMeanStd(result.strict_accuracy) + '\n';
  result.table += "f1\t" + FormatMeanStd(result.f1) + '\n';
  result.table += "edit_distance\t" + FormatMeanStd(result.edit_distance) + '\n';
  return result;
}

void WriteFoldAssignments(const Dataset& data, const std::vector<int>& fold_of,
                          const std::string& path) {
  if (data.size() != fold_of.size()) {
    throw UsageError("fold assignments are not aligned with the dataset");
  }
  std::ofstream out = OpenForWrite(path);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << i << '\t' << data[i].surface << '\t' << fold_of[i] << '\n';
  }
}

GridResult RunGridSearch(const Dataset& train, const Dataset& dev,
                         const EmbeddingTable& embeddings,
                         const JointProposals& proposals,
                         const RunConfig& config,
                         const std::vector<double>& l2_values,
                         const std::vector<double>& sigma_sq_values) {
  if (l2_values.empty() || sigma_sq_values.empty()) {
    throw UsageError("grid search needs at least one value per axis");
  }
  if (dev.empty()) throw UsageError("grid search needs a dev set");

  std::vector<GridPoint> points;
  for (double l2 : l2_values) {
    for (double s : sigma_sq_values) points.push_back({s, l2});
  }

  auto train_examples = ToJointExamples(train);
  auto dev_examples = ToJointExamples(dev);
  auto evaluate = [&](const GridPoint& p) {
    JointTrainConfig jc;
    jc.epochs = config.epochs;
    jc.l2 = p.l2;
    jc.sigma_sq = p.sigma_sq;
    jc.train_samples = config.train_samples;
    jc.dev_samples = config.dev_samples;
    jc.use_vectors = config.use_vectors;
    jc.composition = config.composition;
    jc.seed = Rng::DeriveSeed(config.seed, 21);
    JointTrainResult fit =
        TrainJoint(train_examples, dev_examples, embeddings, proposals, jc);

    RunConfig eval_cfg = config;
    eval_cfg.l2 = p.l2;
    eval_cfg.sigma_sq = p.sigma_sq;
    CorpusPredictions preds =
        DecodeCorpus(dev, embeddings, fit.params, proposals, eval_cfg);
    return std::make_pair(preds.metrics.accuracy, preds.metrics.f1);
  };
  return GridSearch(points, evaluate);
}

std::string FormatGridTable(const GridResult& grid) {
  std::string out = "l2\tsigma_sq\taccuracy\tf1\n";
  for (const auto& cell : grid.cells) {
    out += Num(cell.point.l2, "%.6g") + '\t' + Num(cell.point.sigma_sq, "%.6g") +
           '\t' + Num(cell.accuracy) + '\t' + Num(cell.f1) + '\n';
  }
  out += "best l2=" + Num(grid.best.point.l2, "%.6g") +
         " sigma_sq=" + Num(grid.best.point.sigma_sq, "%.6g") +
         " accuracy=" + Num(grid.best.accuracy) + " f1=" + Num(grid.best.f1) +
         '\n';
  return out;
}

std::vector<AffixCosineRow> GoldCompositionAffixCosines(
    const Dataset& data, const EmbeddingTable& embeddings,
    const CompositionModel& model, const MorphemeEmbeddings& morphemes) {
  std::vector<AffixCosineRow> rows;
  for (const auto& record : data) {
    if (!embeddings.Contains(record.surface)) continue;
    std::vector<Vec> inputs =
        GatherMorphemeVectors(record.gold.seg, morphemes, model.kind);
    Vec composed = Compose(model, inputs, record.gold.seg.labels);
    auto cos = Cosine(composed, embeddings.Get(record.surface));
    if (!cos) continue;
    for (int i = 0; i < record.gold.seg.size(); ++i) {
      if (record.gold.seg.labels[i] == Label::kStem) continue;
      rows.push_back({std::string(LabelName(record.gold.seg.labels[i])) + ":" +
                          record.gold.seg.segments[i],
                      *cos});
    }
  }
  return rows;
}

void WriteBoxplotData(const std::vector<AffixCosineRow>& rows,
                      const std::string& path) {
  std::ofstream out = OpenForWrite(path);
  for (const auto& row : rows) {
    out << row.affix << '\t' << Num(row.cosine, "%.6f") << '\n';
  }
}

}  // namespace morsem
