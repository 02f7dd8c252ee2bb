#include "joint.h"

#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "errors.h"
#include "evaluation.h"
#include "logmath.h"
#include "optim.h"

namespace morsem {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vec ComposeAnalysis(const CanonicalAnalysis& a, const JointParams& params) {
  std::vector<Vec> inputs =
      GatherMorphemeVectors(a.seg, params.morphemes, params.composition.kind);
  return Compose(params.composition, inputs, a.seg.labels);
}

double LogPbar(const WeightedSample& s) { return s.log_struct + s.log_gauss; }

// Selection order: joint score (or importance weight under by_weight), then
// joint score, then lexicographically smaller underlying string, then
// smaller formatted analysis. The last step only disambiguates distinct
// analyses that tie on every score.
const WeightedSample* PickBest(const std::vector<WeightedSample>& samples,
                               bool by_weight) {
  const WeightedSample* best = nullptr;
  for (const auto& s : samples) {
    if (s.analysis.ur.empty()) continue;  // zero-mass proposal artifact
    if (best == nullptr) {
      best = &s;
      continue;
    }
    double primary_s = by_weight ? s.log_weight : LogPbar(s);
    double primary_b = by_weight ? best->log_weight : LogPbar(*best);
    bool better;
    if (primary_s != primary_b) {
      better = primary_s > primary_b;
    } else if (LogPbar(s) != LogPbar(*best)) {
      better = LogPbar(s) > LogPbar(*best);
    } else if (s.analysis.ur != best->analysis.ur) {
      better = s.analysis.ur < best->analysis.ur;
    } else {
      better = FormatAnalysis(s.analysis.seg) < FormatAnalysis(best->analysis.seg);
    }
    if (better) best = &s;
  }
  if (best == nullptr) {
    throw NumericError("every sampled analysis has zero mass");
  }
  return best;
}

// Self-normalized weights from log exponents; max-shifted for stability.
std::vector<double> NormalizeLogWeights(const std::vector<double>& lw,
                                        double* log_sum_exp, double* ess) {
  double mx = kNegInf;
  for (double x : lw) {
    if (std::isnan(x)) throw NumericError("importance weight is NaN");
    if (x > mx) mx = x;
  }
  if (mx == kNegInf) {
    throw NumericError("all importance weights are zero");
  }
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> w(lw.size());
  for (std::size_t i = 0; i < lw.size(); ++i) {
    double v = std::exp(lw[i] - mx);
    w[i] = v;
    sum += v;
    sum_sq += v * v;
  }
  for (double& v : w) v /= sum;
  if (log_sum_exp != nullptr) *log_sum_exp = mx + std::log(sum);
  if (ess != nullptr) *ess = sum * sum / sum_sq;
  return w;
}

// AdaGrad ascent over the touched coordinates of a dense weight vector, with
// the regularizer folded into the gradient coordinate-wise.
void AdaGradSparseStep(const SparseVec& grad, double l2, double lr, double eps,
                       std::vector<double>* w, std::vector<double>* acc) {
  if (acc->size() < w->size()) acc->resize(w->size(), 0.0);
  for (const auto& [id, g0] : grad.entries()) {
    if (id < 0 || id >= static_cast<int>(w->size())) continue;
    double g = g0 - 2.0 * l2 * (*w)[id];
    (*acc)[id] += g * g;
    (*w)[id] += lr * g / (std::sqrt((*acc)[id]) + eps);
  }
}

void AddRegularized(const Vec& grad, const Vec& param, double l2, Vec* out) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    (*out)[i] += grad[i] - 2.0 * l2 * param[i];
  }
}

// One ascent step on composition parameters and the affix vectors of this
// example's analysis, from gradients of the vector-fit log factor.
void ApplyCompositionStep(JointParams* params, const CompositionGradients& g,
                          const LabeledSegmentation& seg, double l2,
                          AdaGradSlots* slots) {
  CompositionModel& m = params->composition;
  if (!g.alpha.empty()) {
    Vec ga(m.alpha.size(), 0.0);
    for (std::size_t i = 0; i < g.alpha.size(); ++i) {
      ga[i] = g.alpha[i] - 2.0 * l2 * m.alpha[i];
    }
    slots->Step("alpha", &m.alpha, ga);
  }
  for (std::size_t i = 0; i < g.position_mats.size(); ++i) {
    Vec gm(m.position_mats[i].data.size(), 0.0);
    AddRegularized(g.position_mats[i].data, m.position_mats[i].data, l2, &gm);
    slots->Step("P" + std::to_string(i), &m.position_mats[i].data, gm);
  }
  if (!g.X.data.empty()) {
    Vec gx(m.X.data.size(), 0.0);
    AddRegularized(g.X.data, m.X.data, l2, &gx);
    slots->Step("X", &m.X.data, gx);
  }
  if (!g.U.data.empty()) {
    Vec gu(m.U.data.size(), 0.0);
    AddRegularized(g.U.data, m.U.data, l2, &gu);
    slots->Step("U", &m.U.data, gu);
  }
  if (!g.h0.empty()) {
    Vec gh(m.h0.size(), 0.0);
    AddRegularized(g.h0, m.h0, l2, &gh);
    slots->Step("h0", &m.h0, gh);
  }
  // Stems stay frozen; gradients reach only the trainable affix vectors.
  // The same affix may fill several positions, so aggregate first.
  std::map<std::pair<int, std::string>, Vec> affix_grads;
  for (int i = 0; i < seg.size(); ++i) {
    if (seg.labels[i] == Label::kStem) continue;
    auto key = std::make_pair(static_cast<int>(seg.labels[i]), seg.segments[i]);
    auto it = affix_grads.find(key);
    if (it == affix_grads.end()) {
      affix_grads.emplace(std::move(key), g.inputs[i]);
    } else {
      AxpyInto(&it->second, 1.0, g.inputs[i]);
    }
  }
  for (auto& [key, grad] : affix_grads) {
    Label label = static_cast<Label>(key.first);
    Vec* a = params->morphemes.MutableAffix(label, key.second);
    Vec ga(a->size(), 0.0);
    AddRegularized(grad, *a, l2, &ga);
    slots->Step(std::string("m|") + LabelName(label) + "|" + key.second, a, ga);
  }
}

double DevAccuracy(const std::vector<JointExample>& dev,
                   const EmbeddingTable& embeddings, const JointParams& params,
                   const JointProposals& proposals, const JointTrainConfig& config,
                   std::uint64_t epoch_seed) {
  int correct = 0;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    DecodeConfig dc;
    dc.num_samples = config.dev_samples;
    dc.use_vector = config.use_vectors;
    dc.seed = Rng::DeriveSeed(epoch_seed, i);
    Vec v;
    const Vec* vp = nullptr;
    if (config.use_vectors && embeddings.Contains(dev[i].word)) {
      v = embeddings.Get(dev[i].word);
      vp = &v;
    }
    try {
      CanonicalAnalysis pred = Decode(dev[i].word, vp, params, proposals, dc);
      if (SegmentationMatch(pred, dev[i].gold)) ++correct;
    } catch (const DataError&) {
      // A word outside the model's alphabet cannot be decoded: count it wrong.
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dev.size());
}

}  // namespace

double JointUnnormalizedLogScore(const CanonicalAnalysis& analysis,
                                 const std::string& word, const Vec* v,
                                 const JointParams& params) {
  double score = TransductionLogScore(analysis.ur, word, params.transducer) +
                 SegmentationLogScore(analysis.seg, analysis.ur, params.segmenter);
  if (v != nullptr) {
    score += GaussianLogFactor(*v, ComposeAnalysis(analysis, params), params.sigma_sq);
  }
  return score;
}

std::vector<WeightedSample> DrawSamples(const std::string& word, const Vec* v,
                                        int num_samples, const JointParams& params,
                                        const JointProposals& proposals, Rng* rng) {
  if (num_samples < 1) throw UsageError("need at least one sample");
  Q1Lattice q1(word, proposals.q1);
  // Everything that depends only on the underlying string (or the whole
  // analysis) is computed once per distinct value: with many samples per
  // word the string space collapses to a few candidates.
  std::unordered_map<std::string, double> q1_logp;
  std::unordered_map<std::string, double> trans_logscore;
  std::unordered_map<std::string, Q2Lattice> prop_q2;
  std::unordered_map<std::string, Q2Lattice> joint_q2;
  std::unordered_map<std::string, double> gauss_cache;

  std::vector<WeightedSample> out;
  out.reserve(num_samples);
  for (int i = 0; i < num_samples; ++i) {
    WeightedSample s;
    std::string u = q1.Sample(rng);
    if (u.empty()) {
      // Reachable only through a proposal dead end (insertion limit 0 after
      // deleting everything). No analysis has an empty underlying string, so
      // the sample carries zero mass and is skipped by every estimator.
      s.analysis.ur.clear();
      s.log_q = q1.LogProb(u);
      s.log_struct = kNegInf;
      s.log_weight = kNegInf;
      out.push_back(std::move(s));
      continue;
    }
    auto q1_it = q1_logp.find(u);
    if (q1_it == q1_logp.end()) {
      q1_it = q1_logp.emplace(u, q1.LogProb(u)).first;
    }
    auto prop_it = prop_q2.find(u);
    if (prop_it == prop_q2.end()) {
      prop_it = prop_q2.try_emplace(u, u, proposals.q2).first;
    }
    auto joint_it = joint_q2.find(u);
    if (joint_it == joint_q2.end()) {
      joint_it = joint_q2.try_emplace(u, u, params.segmenter).first;
    }
    auto trans_it = trans_logscore.find(u);
    if (trans_it == trans_logscore.end()) {
      trans_it =
          trans_logscore.emplace(u, TransductionLogScore(u, word, params.transducer))
              .first;
    }
    LabeledSegmentation seg = prop_it->second.Sample(rng);
    double log_q2 = prop_it->second.LogProb(seg);
    double log_seg = joint_it->second.Score(seg);
    s.analysis.ur = u;
    s.analysis.seg = std::move(seg);
    s.log_q = q1_it->second + log_q2;
    s.log_struct = trans_it->second + log_seg;
    if (v != nullptr) {
      std::string key = AnalysisKey(s.analysis);
      auto g_it = gauss_cache.find(key);
      if (g_it == gauss_cache.end()) {
        double g = GaussianLogFactor(*v, ComposeAnalysis(s.analysis, params),
                                     params.sigma_sq);
        g_it = gauss_cache.emplace(std::move(key), g).first;
      }
      s.log_gauss = g_it->second;
    }
    s.log_weight = s.log_struct + s.log_gauss - s.log_q;
    if (!std::isfinite(s.log_weight)) {
      throw NumericError("non-finite importance weight for word '" + word + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

LogZGradients EstimateLogZGradients(const std::vector<WeightedSample>& samples,
                                    const std::string& word, JointParams* params) {
  if (samples.empty()) throw UsageError("need at least one sample");
  // The vector integrates out of the partition, so the weights here drop the
  // Gaussian term even when the samples were drawn with one.
  std::vector<double> lw(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    lw[i] = samples[i].log_struct - samples[i].log_q;
  }
  LogZGradients out;
  double log_sum = 0.0;
  std::vector<double> w = NormalizeLogWeights(lw, &log_sum, &out.ess);
  out.log_z_estimate = log_sum - std::log(static_cast<double>(samples.size()));

  // Aggregate weights per distinct underlying string / analysis so feature
  // extraction runs once per value, in sorted (deterministic) order.
  std::map<std::string, double> weight_by_u;
  std::map<std::string, std::pair<const CanonicalAnalysis*, double>> weight_by_analysis;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (w[i] == 0.0 && samples[i].analysis.ur.empty()) continue;
    weight_by_u[samples[i].analysis.ur] += w[i];
    auto [it, inserted] = weight_by_analysis.try_emplace(
        AnalysisKey(samples[i].analysis), &samples[i].analysis, w[i]);
    if (!inserted) it->second.second += w[i];
  }
  for (const auto& [u, weight] : weight_by_u) {
    SparseVec g = TransductionExpectedFeatures(u, word, &params->transducer);
    out.omega.AddScaled(g, weight);
  }
  for (const auto& [key, entry] : weight_by_analysis) {
    SparseVec f =
        SegmentationFeatures(entry.first->seg, entry.first->ur, &params->segmenter);
    out.eta.AddScaled(f, entry.second);
  }
  out.eta.Canonicalize();
  out.omega.Canonicalize();
  return out;
}

LogZGradients EstimateLogZGradients(const std::string& word, int num_samples,
                                    JointParams* params,
                                    const JointProposals& proposals, Rng* rng) {
  std::vector<WeightedSample> samples =
      DrawSamples(word, nullptr, num_samples, *params, proposals, rng);
  return EstimateLogZGradients(samples, word, params);
}

JointTrainResult TrainJoint(const std::vector<JointExample>& train,
                            const std::vector<JointExample>& dev,
                            const EmbeddingTable& embeddings,
                            const JointProposals& proposals,
                            const JointTrainConfig& config) {
  if (config.epochs < 1) throw UsageError("need at least one epoch");
  if (train.empty()) throw UsageError("empty training set");

  JointTrainResult result;
  JointParams params;
  params.transducer.insertion_limit = proposals.q1.insertion_limit;
  params.transducer.alphabet = proposals.q1.alphabet;
  params.transducer.output_alphabet = proposals.q1.output_alphabet;
  params.transducer.epsilon = proposals.q1.epsilon;
  params.segmenter.max_segment_length = proposals.q2.max_segment_length;
  params.segmenter.num_labels = proposals.q2.num_labels;
  params.sigma_sq = config.sigma_sq;
  params.l2 = config.l2;
  int dim = embeddings.dim();
  params.composition = CompositionModel::Create(config.composition, dim,
                                                Rng::DeriveSeed(config.seed, 101));
  params.morphemes =
      MorphemeEmbeddings(&embeddings, dim, Rng::DeriveSeed(config.seed, 102));

  // One pass in corpus order before training: drop gold analyses the model
  // cannot represent, intern gold features (a fixed id layout regardless of
  // the shuffle), and create the affix vectors the analyses mention.
  std::vector<char> usable(train.size(), 1);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const JointExample& ex = train[i];
    try {
      SegmentationFeatures(ex.gold.seg, ex.gold.ur, &params.segmenter);
      TransductionExpectedFeatures(ex.gold.ur, ex.word, &params.transducer);
    } catch (const DataError& e) {
      usable[i] = 0;
      ++result.skipped_examples;
      std::cerr << "warning: skipping unrepresentable analysis for '" << ex.word
                << "': " << e.what() << "\n";
      continue;
    }
    if (config.use_vectors) {
      for (int j = 0; j < ex.gold.seg.size(); ++j) {
        if (ex.gold.seg.labels[j] != Label::kStem) {
          params.morphemes.MutableAffix(ex.gold.seg.labels[j], ex.gold.seg.segments[j]);
        }
      }
    }
  }
  params.segmenter.SyncWeights();
  params.transducer.SyncWeights();

  std::vector<double> eta_acc, omega_acc;
  AdaGradSlots comp_slots(config.learning_rate, config.adagrad_epsilon);
  Rng rng(Rng::DeriveSeed(config.seed, 1));

  std::vector<int> order(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) order[i] = static_cast<int>(i);

  JointParams best;
  double best_acc = -1.0;
  int best_epoch = -1;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(&order);
    for (int idx : order) {
      if (!usable[idx]) continue;
      const JointExample& ex = train[static_cast<std::size_t>(idx)];

      SparseVec grad_eta =
          SegmentationFeatures(ex.gold.seg, ex.gold.ur, &params.segmenter);
      SparseVec grad_omega =
          TransductionExpectedFeatures(ex.gold.ur, ex.word, &params.transducer);
      LogZGradients z = EstimateLogZGradients(ex.word, config.train_samples, &params,
                                              proposals, &rng);
      grad_eta.AddScaled(z.eta, -1.0);
      grad_eta.Canonicalize();
      grad_omega.AddScaled(z.omega, -1.0);
      grad_omega.Canonicalize();
      params.segmenter.SyncWeights();
      params.transducer.SyncWeights();
      AdaGradSparseStep(grad_eta, config.l2, config.learning_rate,
                        config.adagrad_epsilon, &params.segmenter.eta, &eta_acc);
      AdaGradSparseStep(grad_omega, config.l2, config.learning_rate,
                        config.adagrad_epsilon, &params.transducer.omega, &omega_acc);

      if (config.use_vectors && embeddings.Contains(ex.word)) {
        Vec v = embeddings.Get(ex.word);
        std::vector<Vec> inputs = GatherMorphemeVectors(ex.gold.seg, params.morphemes,
                                                        params.composition.kind);
        CompositionTrace trace =
            ComposeWithTrace(params.composition, inputs, ex.gold.seg.labels);
        Vec d_out(v.size(), 0.0);
        for (std::size_t k = 0; k < v.size(); ++k) {
          d_out[k] = (v[k] - trace.output[k]) / params.sigma_sq;
        }
        CompositionGradients g =
            ComposeBackward(params.composition, inputs, trace, d_out);
        ApplyCompositionStep(&params, g, ex.gold.seg, config.l2, &comp_slots);
      }
    }

    double acc = dev.empty() ? 0.0
                             : DevAccuracy(dev, embeddings, params, proposals, config,
                                           Rng::DeriveSeed(config.seed, 1000 + epoch));
    result.dev_accuracy.push_back(acc);
    if (dev.empty() || acc > best_acc) {
      best_acc = acc;
      best = params;
      best_epoch = epoch;
    }
  }
  result.params = std::move(best);
  result.best_epoch = best_epoch;
  return result;
}

CanonicalAnalysis Decode(const std::string& word, const Vec* v,
                         const JointParams& params, const JointProposals& proposals,
                         const DecodeConfig& config) {
  Rng rng(config.seed);
  const Vec* vp = config.use_vector ? v : nullptr;
  std::vector<WeightedSample> samples =
      DrawSamples(word, vp, config.num_samples, params, proposals, &rng);
  return PickBest(samples, config.rank_by_weight)->analysis;
}

CanonicalAnalysis DecodeWithOracleUr(const std::string& word, const std::string& ur,
                                     const Vec* v, const JointParams& params,
                                     const JointProposals& proposals,
                                     const DecodeConfig& config) {
  if (config.num_samples < 1) throw UsageError("need at least one sample");
  if (ur.empty()) throw DataError("oracle underlying string is empty");
  Rng rng(config.seed);
  double log_trans = TransductionLogScore(ur, word, params.transducer);
  Q2Lattice prop(ur, proposals.q2);
  Q2Lattice joint(ur, params.segmenter);
  const Vec* vp = config.use_vector ? v : nullptr;
  std::unordered_map<std::string, double> gauss_cache;
  std::vector<WeightedSample> samples;
  samples.reserve(config.num_samples);
  for (int i = 0; i < config.num_samples; ++i) {
    WeightedSample s;
    s.analysis.ur = ur;
    s.analysis.seg = prop.Sample(&rng);
    s.log_q = prop.LogProb(s.analysis.seg);
    s.log_struct = log_trans + joint.Score(s.analysis.seg);
    if (vp != nullptr) {
      std::string key = FormatAnalysis(s.analysis.seg);
      auto it = gauss_cache.find(key);
      if (it == gauss_cache.end()) {
        double g = GaussianLogFactor(*vp, ComposeAnalysis(s.analysis, params),
                                     params.sigma_sq);
        it = gauss_cache.emplace(std::move(key), g).first;
      }
      s.log_gauss = it->second;
    }
    s.log_weight = s.log_struct + s.log_gauss - s.log_q;
    if (!std::isfinite(s.log_weight)) {
      throw NumericError("non-finite importance weight for word '" + word + "'");
    }
    samples.push_back(std::move(s));
  }
  return PickBest(samples, config.rank_by_weight)->analysis;
}

Vec PredictVector(const std::string& word, const JointParams& params,
                  const JointProposals& proposals, const DecodeConfig& config) {
  Rng rng(config.seed);
  std::vector<WeightedSample> samples =
      DrawSamples(word, nullptr, config.num_samples, params, proposals, &rng);
  std::vector<double> lw(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) lw[i] = samples[i].log_weight;
  std::vector<double> w = NormalizeLogWeights(lw, nullptr, nullptr);

  std::map<std::string, std::pair<const CanonicalAnalysis*, double>> weight_by_analysis;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (w[i] == 0.0 && samples[i].analysis.ur.empty()) continue;
    auto [it, inserted] = weight_by_analysis.try_emplace(
        AnalysisKey(samples[i].analysis), &samples[i].analysis, w[i]);
    if (!inserted) it->second.second += w[i];
  }
  Vec out(params.composition.dim, 0.0);
  for (const auto& [key, entry] : weight_by_analysis) {
    Vec c = ComposeAnalysis(*entry.first, params);
    AxpyInto(&out, entry.second, c);
  }
  return out;
}

GridResult GridSearch(
    const std::vector<GridPoint>& points,
    const std::function<std::pair<double, double>(const GridPoint&)>& evaluate) {
  if (points.empty()) throw UsageError("empty hyperparameter grid");
  GridResult result;
  bool have_best = false;
  for (const GridPoint& p : points) {
    auto [accuracy, f1] = evaluate(p);
    GridCell cell;
    cell.point = p;
    cell.accuracy = accuracy;
    cell.f1 = f1;
    result.cells.push_back(cell);
    bool better;
    if (!have_best) {
      better = true;
    } else if (cell.accuracy != result.best.accuracy) {
      better = cell.accuracy > result.best.accuracy;
    } else if (cell.f1 != result.best.f1) {
      better = cell.f1 > result.best.f1;
    } else if (cell.point.l2 != result.best.point.l2) {
      better = cell.point.l2 < result.best.point.l2;
    } else {
      better = cell.point.sigma_sq < result.best.point.sigma_sq;
    }
    if (better) {
      result.best = cell;
      have_best = true;
    }
  }
  return result;
}

}  // namespace morsem
