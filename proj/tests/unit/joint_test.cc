#include "joint.h"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "errors.h"
#include "logmath.h"
#include "test_util.h"

using namespace morsem;
using morsem::test::AllStrings;
using morsem::test::EnumerateSegmentations;

namespace {

// A joint instance small enough to enumerate every analysis exactly.
struct TinyJoint {
  JointParams params;
  JointProposals proposals;
  std::string word;
  std::vector<CanonicalAnalysis> analyses;
};

// Builds the instance over alphabet {a, b}: interns the features of every
// analysis, then assigns Gaussian random weights (scale 0 keeps them zero).
// Proposal weights are either a copy of the joint weights or an independent
// draw at proposal_scale.
TinyJoint MakeTiny(const std::string& word, int k, int maxlen, int num_labels,
                   double scale, double proposal_scale, std::uint64_t seed,
                   bool proposals_match) {
  TinyJoint t;
  t.word = word;
  t.params.transducer.insertion_limit = k;
  t.params.transducer.alphabet = "ab";
  t.params.transducer.output_alphabet = "ab";
  t.params.segmenter.max_segment_length = maxlen;
  t.params.segmenter.num_labels = num_labels;
  for (const std::string& u : AllStrings("ab", static_cast<int>(word.size()) + k)) {
    TransductionExpectedFeatures(u, word, &t.params.transducer);
    for (const LabeledSegmentation& seg : EnumerateSegmentations(u, maxlen, num_labels)) {
      SegmentationFeatures(seg, u, &t.params.segmenter);
      t.analyses.push_back({u, seg});
    }
  }
  t.params.transducer.SyncWeights();
  t.params.segmenter.SyncWeights();
  Rng rng(seed);
  for (double& x : t.params.transducer.omega) x = scale * rng.Gaussian();
  for (double& x : t.params.segmenter.eta) x = scale * rng.Gaussian();
  if (proposals_match) {
    t.proposals.q1 = t.params.transducer;
    t.proposals.q2 = t.params.segmenter;
  } else {
    t.proposals.q1 = t.params.transducer;
    t.proposals.q2 = t.params.segmenter;
    Rng prng(Rng::DeriveSeed(seed, 7));
    for (double& x : t.proposals.q1.omega) x = proposal_scale * prng.Gaussian();
    for (double& x : t.proposals.q2.eta) x = proposal_scale * prng.Gaussian();
  }
  return t;
}

std::vector<double> ExactScores(const TinyJoint& t, const Vec* v) {
  std::vector<double> scores;
  scores.reserve(t.analyses.size());
  for (const CanonicalAnalysis& a : t.analyses) {
    scores.push_back(JointUnnormalizedLogScore(a, t.word, v, t.params));
  }
  return scores;
}

std::vector<double> Posterior(const std::vector<double>& scores, double* log_z) {
  double z = LogSumExp(scores);
  if (log_z != nullptr) *log_z = z;
  std::vector<double> p(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) p[i] = std::exp(scores[i] - z);
  return p;
}

// Proposal log density of every analysis, via the same public scoring calls
// the sampler uses.
std::vector<double> ProposalLogDensity(const TinyJoint& t) {
  Q1Lattice q1(t.word, t.proposals.q1);
  std::map<std::string, double> lq1;
  std::map<std::string, Q2Lattice> q2;
  std::vector<double> out;
  out.reserve(t.analyses.size());
  for (const CanonicalAnalysis& a : t.analyses) {
    auto it = lq1.find(a.ur);
    if (it == lq1.end()) {
      it = lq1.emplace(a.ur, q1.LogProb(a.ur)).first;
      q2.try_emplace(a.ur, a.ur, t.proposals.q2);
    }
    out.push_back(it->second + q2.at(a.ur).LogProb(a.seg));
  }
  return out;
}

// Index of the analysis the decoder should return: maximum key, ties broken
// by joint score, then underlying string, then formatted analysis.
int ExpectedPick(const TinyJoint& t, const std::vector<double>& keys,
                 const std::vector<double>& scores) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(keys.size()); ++i) {
    bool better;
    if (keys[i] != keys[best]) {
      better = keys[i] > keys[best];
    } else if (scores[i] != scores[best]) {
      better = scores[i] > scores[best];
    } else if (t.analyses[i].ur != t.analyses[best].ur) {
      better = t.analyses[i].ur < t.analyses[best].ur;
    } else {
      better = FormatAnalysis(t.analyses[i].seg) < FormatAnalysis(t.analyses[best].seg);
    }
    if (better) best = i;
  }
  return best;
}

double MaxAbsWeight(const std::vector<double>& w) {
  double m = 0.0;
  for (double x : w) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_SUITE("joint") {

TEST_CASE("joint score decomposes into factor terms") {
  TinyJoint t = MakeTiny("ab", 1, 2, 3, 0.4, 0.0, 5, true);
  EmbeddingTable stems(2);
  stems.Set("a", {1.0, 0.0});
  stems.Set("ab", {0.5, -0.5});
  t.params.morphemes = MorphemeEmbeddings(&stems, 2, 9);
  t.params.composition = CompositionModel::Create(CompositionKind::kAdd, 2, 9);
  t.params.sigma_sq = 0.5;

  CanonicalAnalysis a{"ab", {{"ab"}, {Label::kStem}}};
  double trans = TransductionLogScore("ab", "ab", t.params.transducer);
  double seg = SegmentationLogScore(a.seg, "ab", t.params.segmenter);
  CHECK(JointUnnormalizedLogScore(a, "ab", nullptr, t.params) == trans + seg);

  Vec c = {0.5, -0.5};  // the composed output: single stem, add
  CHECK(JointUnnormalizedLogScore(a, "ab", &c, t.params) == trans + seg);

  // Displacing the vector by squared distance 2 sigma^2 costs exactly 1.
  Vec v = c;
  v[0] += 1.0;  // ||v - c||^2 = 1 = 2 * 0.5
  CHECK(JointUnnormalizedLogScore(a, "ab", &v, t.params) ==
        doctest::Approx(trans + seg - 1.0).epsilon(1e-12));
}

TEST_CASE("zero-parameter score is the path-count of the transduction") {
  TinyJoint t = MakeTiny("a", 1, 2, 3, 0.0, 0.0, 1, true);
  CanonicalAnalysis a{"a", {{"a"}, {Label::kStem}}};
  // Three edit paths spell ("a", "a") with one insert allowed; all other
  // factors are zero.
  CHECK(JointUnnormalizedLogScore(a, "a", nullptr, t.params) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("single sample carries normalized weight one") {
  TinyJoint t = MakeTiny("a", 1, 2, 3, 0.3, 0.0, 11, true);
  Rng rng(4);
  std::vector<WeightedSample> s =
      DrawSamples("a", nullptr, 1, t.params, t.proposals, &rng);
  REQUIRE(s.size() == 1);
  CHECK(std::isfinite(s[0].log_weight));
  LogZGradients z = EstimateLogZGradients(s, "a", &t.params);
  CHECK(z.ess == doctest::Approx(1.0).epsilon(1e-12));
  SparseVec f = SegmentationFeatures(s[0].analysis.seg, s[0].analysis.ur,
                                     &t.params.segmenter);
  CHECK(z.eta.MaxAbsDifference(f) < 1e-12);
}

TEST_CASE("equal-weight samples average their feature vectors") {
  TinyJoint t = MakeTiny("a", 1, 2, 3, 0.0, 0.0, 1, true);
  WeightedSample s1, s2;
  s1.analysis = {"a", {{"a"}, {Label::kStem}}};
  s2.analysis = {"a", {{"a"}, {Label::kSuffix}}};
  s1.log_struct = s2.log_struct = -1.25;
  s1.log_q = s2.log_q = -2.5;
  s1.log_weight = s2.log_weight = s1.log_struct - s1.log_q;
  std::vector<WeightedSample> samples = {s1, s2};
  LogZGradients z = EstimateLogZGradients(samples, "a", &t.params);
  CHECK(z.ess == doctest::Approx(2.0).epsilon(1e-12));
  SparseVec expected;
  expected.AddScaled(
      SegmentationFeatures(s1.analysis.seg, "a", &t.params.segmenter), 0.5);
  expected.AddScaled(
      SegmentationFeatures(s2.analysis.seg, "a", &t.params.segmenter), 0.5);
  expected.Canonicalize();
  CHECK(z.eta.MaxAbsDifference(expected) < 1e-12);
  // Both samples share one underlying string, so the transduction block is
  // that string's expected features at total weight one.
  SparseVec g = TransductionExpectedFeatures("a", "a", &t.params.transducer);
  CHECK(z.omega.MaxAbsDifference(g) < 1e-12);
}

TEST_CASE("partition estimate and gradient match enumeration") {
  // A proposal aligned with the target (the trained-proposal regime) keeps
  // the estimator tight; a deliberately mismatched proposal stays consistent
  // at a wider tolerance.
  struct Variant {
    bool match;
    double tol;
    double min_ess;
  };
  for (const Variant& variant :
       {Variant{true, 0.01, 5000.0}, Variant{false, 0.05, 300.0}}) {
    CAPTURE(variant.match);
    TinyJoint t = MakeTiny("a", 1, 2, 3, 0.5, 0.3, 21, variant.match);
    double log_z = 0.0;
    std::vector<double> scores = ExactScores(t, nullptr);
    std::vector<double> post = Posterior(scores, &log_z);

    SparseVec exact_eta, exact_omega;
    for (std::size_t i = 0; i < t.analyses.size(); ++i) {
      exact_eta.AddScaled(SegmentationFeatures(t.analyses[i].seg, t.analyses[i].ur,
                                               &t.params.segmenter),
                          post[i]);
      exact_omega.AddScaled(
          TransductionExpectedFeatures(t.analyses[i].ur, t.word, &t.params.transducer),
          post[i]);
    }
    exact_eta.Canonicalize();
    exact_omega.Canonicalize();

    Rng rng(17);
    LogZGradients z =
        EstimateLogZGradients(t.word, 20000, &t.params, t.proposals, &rng);
    CHECK(std::abs(z.log_z_estimate - log_z) < variant.tol);
    CHECK(z.eta.MaxAbsDifference(exact_eta) < variant.tol);
    CHECK(z.omega.MaxAbsDifference(exact_omega) < variant.tol);
    CHECK(z.ess > variant.min_ess);
  }
}

TEST_CASE("decode returns the enumerated maximum-score analysis") {
  int score_hits = 0, weight_hits = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    TinyJoint t = MakeTiny("a", 1, 2, 3, 0.5, 0.3, 100 + trial, false);
    std::vector<double> scores = ExactScores(t, nullptr);
    std::vector<double> lq = ProposalLogDensity(t);
    std::vector<double> keys(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) keys[i] = scores[i] - lq[i];

    DecodeConfig dc;
    dc.num_samples = 10000;
    dc.seed = Rng::DeriveSeed(900, trial);
    CanonicalAnalysis got = Decode(t.word, nullptr, t.params, t.proposals, dc);
    if (got == t.analyses[ExpectedPick(t, scores, scores)]) ++score_hits;

    dc.rank_by_weight = true;
    CanonicalAnalysis w_got = Decode(t.word, nullptr, t.params, t.proposals, dc);
    if (w_got == t.analyses[ExpectedPick(t, keys, scores)]) ++weight_hits;
  }
  CHECK(score_hits >= trials - 1);
  CHECK(weight_hits >= trials - 1);
}

TEST_CASE("decode with a vector matches enumeration including the Gaussian") {
  EmbeddingTable stems(2);
  stems.Set("a", {0.8, -0.2});
  stems.Set("b", {-0.4, 0.6});
  stems.Set("aa", {0.1, 0.3});
  stems.Set("ab", {0.5, 0.5});
  stems.Set("ba", {-0.2, -0.7});
  stems.Set("bb", {0.9, 0.1});
  int hits = 0, weight_hits = 0;
  const int trials = 10;
  for (int trial = 0; trial < trials; ++trial) {
    TinyJoint t = MakeTiny("a", 1, 2, 3, 0.4, 0.25, 300 + trial, false);
    t.params.morphemes = MorphemeEmbeddings(&stems, 2, 5);
    t.params.composition = CompositionModel::Create(CompositionKind::kAdd, 2, 5);
    t.params.sigma_sq = 0.5;
    Rng vr(Rng::DeriveSeed(44, trial));
    Vec v = {vr.Gaussian(), vr.Gaussian()};

    std::vector<double> scores = ExactScores(t, &v);
    std::vector<double> lq = ProposalLogDensity(t);
    std::vector<double> keys(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) keys[i] = scores[i] - lq[i];

    DecodeConfig dc;
    dc.num_samples = 10000;
    dc.seed = Rng::DeriveSeed(901, trial);
    CanonicalAnalysis got = Decode(t.word, &v, t.params, t.proposals, dc);
    if (got == t.analyses[ExpectedPick(t, scores, scores)]) ++hits;

    dc.rank_by_weight = true;
    CanonicalAnalysis w_got = Decode(t.word, &v, t.params, t.proposals, dc);
    if (w_got == t.analyses[ExpectedPick(t, keys, scores)]) ++weight_hits;
  }
  CHECK(hits >= trials - 1);
  CHECK(weight_hits >= trials - 1);
}

TEST_CASE("predicted vector matches the enumerated posterior mean") {
  EmbeddingTable stems(2);
  stems.Set("a", {1.0, 0.0});
  stems.Set("b", {0.0, 1.0});
  stems.Set("aa", {0.3, -0.2});
  stems.Set("ab", {0.5, 0.5});
  stems.Set("ba", {-0.1, 0.4});
  stems.Set("bb", {0.2, 0.2});
  TinyJoint t = MakeTiny("a", 1, 2, 3, 0.4, 0.3, 77, true);
  t.params.morphemes = MorphemeEmbeddings(&stems, 2, 5);
  t.params.composition = CompositionModel::Create(CompositionKind::kAdd, 2, 5);

  std::vector<double> scores = ExactScores(t, nullptr);
  std::vector<double> post = Posterior(scores, nullptr);
  Vec exact(2, 0.0);
  Vec lo(2, 1e18), hi(2, -1e18);
  for (std::size_t i = 0; i < t.analyses.size(); ++i) {
    Vec c = Compose(t.params.composition,
                    GatherMorphemeVectors(t.analyses[i].seg, t.params.morphemes,
                                          t.params.composition.kind),
                    t.analyses[i].seg.labels);
    for (int d = 0; d < 2; ++d) {
      exact[d] += post[i] * c[d];
      lo[d] = std::min(lo[d], c[d]);
      hi[d] = std::max(hi[d], c[d]);
    }
  }

  DecodeConfig dc;
  dc.num_samples = 20000;
  dc.seed = 3;
  Vec got = PredictVector(t.word, t.params, t.proposals, dc);
  REQUIRE(got.size() == 2);
  for (int d = 0; d < 2; ++d) {
    CHECK(std::abs(got[d] - exact[d]) < 0.02);
    // A convex combination of composed outputs stays inside their range.
    CHECK(got[d] >= lo[d] - 1e-12);
    CHECK(got[d] <= hi[d] + 1e-12);
  }
}

TEST_CASE("insertion limit zero yields zero-mass empty-string samples") {
  TinyJoint t = MakeTiny("ab", 0, 2, 2, 0.3, 0.2, 31, false);
  Rng rng(8);
  std::vector<WeightedSample> samples =
      DrawSamples("ab", nullptr, 4000, t.params, t.proposals, &rng);
  int empties = 0;
  for (const WeightedSample& s : samples) {
    if (s.analysis.ur.empty()) {
      ++empties;
      CHECK(s.log_weight == -std::numeric_limits<double>::infinity());
    } else {
      CHECK(std::isfinite(s.log_weight));
    }
  }
  CHECK(empties > 0);  // pure deletion reaches the dead end

  // The estimator still matches enumeration over the real analyses.
  double log_z = 0.0;
  std::vector<double> scores = ExactScores(t, nullptr);
  Posterior(scores, &log_z);
  LogZGradients z = EstimateLogZGradients(samples, "ab", &t.params);
  CHECK(std::abs(z.log_z_estimate - log_z) < 0.05);

  DecodeConfig dc;
  dc.num_samples = 2000;
  dc.seed = 9;
  CanonicalAnalysis got = Decode("ab", nullptr, t.params, t.proposals, dc);
  CHECK(!got.ur.empty());
}

TEST_CASE("oracle decode keeps the supplied underlying string") {
  for (int trial = 0; trial < 10; ++trial) {
    TinyJoint t = MakeTiny("ab", 1, 3, 3, 0.5, 0.3, 500 + trial, false);
    DecodeConfig dc;
    dc.num_samples = 200;
    dc.seed = trial;
    CanonicalAnalysis got =
        DecodeWithOracleUr("ab", "aab", nullptr, t.params, t.proposals, dc);
    CHECK(got.ur == "aab");
    CHECK(ConcatSegments(got.seg) == "aab");
  }
}

TEST_CASE("oracle decode matches restricted enumeration") {
  TinyJoint t = MakeTiny("ab", 1, 3, 3, 0.6, 0.35, 61, false);
  const std::string ur = "ab";
  double log_trans = TransductionLogScore(ur, t.word, t.params.transducer);
  Q2Lattice prop(ur, t.proposals.q2);
  TinyJoint restricted;  // reuse the pick helper on the restricted set
  restricted.word = t.word;
  std::vector<double> keys, scores;
  for (const LabeledSegmentation& seg : EnumerateSegmentations(ur, 3, 3)) {
    restricted.analyses.push_back({ur, seg});
    double score = log_trans + SegmentationLogScore(seg, ur, t.params.segmenter);
    scores.push_back(score);
    keys.push_back(score - prop.LogProb(seg));
  }
  DecodeConfig dc;
  dc.num_samples = 4000;
  dc.seed = 12;
  CanonicalAnalysis got =
      DecodeWithOracleUr(t.word, ur, nullptr, t.params, t.proposals, dc);
  CHECK(got == restricted.analyses[ExpectedPick(restricted, scores, scores)]);

  dc.rank_by_weight = true;
  CanonicalAnalysis w_got =
      DecodeWithOracleUr(t.word, ur, nullptr, t.params, t.proposals, dc);
  CHECK(w_got == restricted.analyses[ExpectedPick(restricted, keys, scores)]);
}

TEST_CASE("degenerate support returns the only analysis for any sample count") {
  TinyJoint t = MakeTiny("a", 0, 1, 1, 0.7, 0.0, 3, true);
  for (int m : {1, 3, 50}) {
    DecodeConfig dc;
    dc.num_samples = m;
    dc.seed = m;
    CanonicalAnalysis got =
        DecodeWithOracleUr("a", "a", nullptr, t.params, t.proposals, dc);
    CHECK(got.ur == "a");
    REQUIRE(got.seg.size() == 1);
    CHECK(got.seg.segments[0] == "a");
    CHECK(got.seg.labels[0] == Label::kStem);
  }
}

TEST_CASE("sampling is deterministic under a fixed seed") {
  TinyJoint t = MakeTiny("ab", 1, 2, 3, 0.5, 0.3, 9, false);
  Rng r1(42), r2(42);
  std::vector<WeightedSample> s1 =
      DrawSamples("ab", nullptr, 500, t.params, t.proposals, &r1);
  std::vector<WeightedSample> s2 =
      DrawSamples("ab", nullptr, 500, t.params, t.proposals, &r2);
  REQUIRE(s1.size() == s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].analysis == s2[i].analysis);
    CHECK(s1[i].log_weight == s2[i].log_weight);
    CHECK(s1[i].log_q == s2[i].log_q);
  }
}

// ---------------------------------------------------------------------------
// Training.

namespace {

// Four stems, an "s" suffix, no orthographic changes; every vector is the
// sum of latent stem and suffix vectors, so the corpus is fully learnable.
struct MiniCorpus {
  std::vector<JointExample> train;
  EmbeddingTable embeddings{3};
  Vec latent_suffix;
  JointProposals proposals;
};

MiniCorpus MakeMini() {
  MiniCorpus c;
  std::vector<std::string> stems = {"ab", "ba", "aab", "bba"};
  Rng rng(99);
  c.latent_suffix = {rng.Gaussian(), rng.Gaussian(), rng.Gaussian()};
  std::vector<TransductionPair> q1_pairs;
  std::vector<std::pair<std::string, LabeledSegmentation>> q2_pairs;
  for (const std::string& stem : stems) {
    Vec sv = {rng.Gaussian(), rng.Gaussian(), rng.Gaussian()};
    c.embeddings.Set(stem, sv);
    JointExample plain{stem, {stem, {{stem}, {Label::kStem}}}};
    c.train.push_back(plain);

    std::string word = stem + "s";
    Vec wv = sv;
    AxpyInto(&wv, 1.0, c.latent_suffix);
    c.embeddings.Set(word, wv);
    JointExample suffixed{word, {word, {{stem, "s"}, {Label::kStem, Label::kSuffix}}}};
    c.train.push_back(suffixed);
  }
  for (const JointExample& ex : c.train) {
    q1_pairs.push_back({ex.word, ex.gold.ur});
    q2_pairs.emplace_back(ex.gold.ur, ex.gold.seg);
  }
  // Lightly trained proposals: peaked enough to guide sampling, soft enough
  // that the importance samples still explore competing analyses. Every gold
  // underlying string equals its surface word, so the instance stays exact
  // with no insertions allowed.
  TransducerTrainConfig q1c;
  q1c.epochs = 3;
  q1c.insertion_limit = 0;
  SegmenterTrainConfig q2c;
  q2c.epochs = 3;
  c.proposals.q1 = TrainProposalQ1(q1_pairs, q1c);
  c.proposals.q2 = TrainProposalQ2(q2_pairs, q2c);
  return c;
}

JointTrainConfig MiniConfig() {
  JointTrainConfig cfg;
  cfg.epochs = 6;
  cfg.train_samples = 10;
  cfg.dev_samples = 300;
  cfg.seed = 7;
  return cfg;
}

// Exact per-corpus conditional log-likelihood by enumerating every analysis.
double ExactLogLikelihood(const std::vector<JointExample>& data,
                          const JointParams& params, const std::string& alphabet) {
  double ll = 0.0;
  for (const JointExample& ex : data) {
    std::vector<double> scores;
    for (const std::string& u :
         AllStrings(alphabet, static_cast<int>(ex.word.size()) +
                                  params.transducer.insertion_limit)) {
      for (const LabeledSegmentation& seg :
           EnumerateSegmentations(u, params.segmenter.max_segment_length,
                                  params.segmenter.num_labels)) {
        scores.push_back(JointUnnormalizedLogScore({u, seg}, ex.word, nullptr, params));
      }
    }
    ll += JointUnnormalizedLogScore(ex.gold, ex.word, nullptr, params) -
          LogSumExp(scores);
  }
  return ll;
}

double VectorFitLoss(const MiniCorpus& c, const JointParams& params) {
  double total = 0.0;
  for (const JointExample& ex : c.train) {
    Vec v = c.embeddings.Get(ex.word);
    Vec composed = Compose(
        params.composition,
        GatherMorphemeVectors(ex.gold.seg, params.morphemes, params.composition.kind),
        ex.gold.seg.labels);
    total += SquaredDistance(v, composed);
  }
  return total;
}

}  // namespace

TEST_CASE("training ascends the exact likelihood") {
  // Three examples on a space small enough to enumerate: the stochastic
  // gradient must beat the zero-weight model by a wide exact-likelihood
  // margin.
  std::vector<JointExample> train = {
      {"ab", {"ab", {{"ab"}, {Label::kStem}}}},
      {"a", {"a", {{"a"}, {Label::kStem}}}},
      {"abs", {"abs", {{"ab", "s"}, {Label::kStem, Label::kSuffix}}}},
  };
  EmbeddingTable emb(2);
  std::vector<TransductionPair> q1_pairs;
  std::vector<std::pair<std::string, LabeledSegmentation>> q2_pairs;
  for (const JointExample& ex : train) {
    q1_pairs.push_back({ex.word, ex.gold.ur});
    q2_pairs.emplace_back(ex.gold.ur, ex.gold.seg);
  }
  TransducerTrainConfig q1c;
  q1c.epochs = 2;
  q1c.insertion_limit = 1;
  SegmenterTrainConfig q2c;
  q2c.epochs = 2;
  q2c.max_segment_length = 3;
  JointProposals proposals{TrainProposalQ1(q1_pairs, q1c), TrainProposalQ2(q2_pairs, q2c)};

  JointTrainConfig cfg;
  cfg.epochs = 12;
  cfg.train_samples = 10;
  cfg.use_vectors = false;
  cfg.seed = 7;
  JointTrainResult r = TrainJoint(train, {}, emb, proposals, cfg);

  JointParams zero;
  zero.transducer = proposals.q1;
  for (double& x : zero.transducer.omega) x = 0.0;
  zero.segmenter = proposals.q2;
  for (double& x : zero.segmenter.eta) x = 0.0;

  const std::string& alphabet = proposals.q1.alphabet;
  double trained = ExactLogLikelihood(train, r.params, alphabet);
  double baseline = ExactLogLikelihood(train, zero, alphabet);
  CHECK(trained > baseline + 3.0);
}

TEST_CASE("training result bookkeeping is consistent and deterministic") {
  MiniCorpus c = MakeMini();
  JointTrainConfig cfg = MiniConfig();
  JointTrainResult r1 = TrainJoint(c.train, c.train, c.embeddings, c.proposals, cfg);
  JointTrainResult r2 = TrainJoint(c.train, c.train, c.embeddings, c.proposals, cfg);

  REQUIRE(r1.dev_accuracy.size() == 6);
  CHECK(r1.skipped_examples == 0);
  for (double a : r1.dev_accuracy) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
  // The kept parameters come from the first epoch that attains the maximum.
  auto it = std::max_element(r1.dev_accuracy.begin(), r1.dev_accuracy.end());
  CHECK(r1.best_epoch == static_cast<int>(it - r1.dev_accuracy.begin()));

  CHECK(r1.dev_accuracy == r2.dev_accuracy);
  CHECK(r1.best_epoch == r2.best_epoch);
  CHECK(r1.params.segmenter.eta == r2.params.segmenter.eta);
  CHECK(r1.params.transducer.omega == r2.params.transducer.omega);

  // The Gaussian term trained the affix vectors: zeroing them hurts the fit.
  CHECK(r1.params.morphemes.HasAffix(Label::kSuffix, "s"));
  JointParams zeroed = r1.params;
  for (auto& [name, vec] : zeroed.morphemes.affixes(Label::kSuffix)) {
    vec.assign(vec.size(), 0.0);
  }
  CHECK(VectorFitLoss(c, r1.params) < VectorFitLoss(c, zeroed));
}

TEST_CASE("unsupported gold analyses are skipped with a warning") {
  MiniCorpus c = MakeMini();
  std::string long_ur(13, 'a');
  c.train.push_back({"ab", {long_ur, {{long_ur}, {Label::kStem}}}});
  JointTrainConfig cfg = MiniConfig();
  cfg.epochs = 1;
  JointTrainResult r = TrainJoint(c.train, {}, c.embeddings, c.proposals, cfg);
  CHECK(r.skipped_examples == 1);
  CHECK(r.dev_accuracy.size() == 1);
}

TEST_CASE("structure-only training leaves composition parameters untouched") {
  MiniCorpus c = MakeMini();
  JointTrainConfig cfg = MiniConfig();
  cfg.epochs = 2;
  cfg.use_vectors = false;
  cfg.composition = CompositionKind::kRnn;
  JointTrainResult r = TrainJoint(c.train, {}, c.embeddings, c.proposals, cfg);
  CompositionModel fresh = CompositionModel::Create(
      CompositionKind::kRnn, 3, Rng::DeriveSeed(cfg.seed, 101));
  CHECK(r.params.composition.X.data == fresh.X.data);
  CHECK(r.params.composition.U.data == fresh.U.data);
  CHECK(r.params.composition.h0 == fresh.h0);
  CHECK(r.params.morphemes.affixes(Label::kPrefix).empty());
  CHECK(r.params.morphemes.affixes(Label::kSuffix).empty());
  // Structure weights did move.
  CHECK(MaxAbsWeight(r.params.segmenter.eta) > 0.0);
}

TEST_CASE("dominant regularization keeps weights much smaller") {
  MiniCorpus c = MakeMini();
  JointTrainConfig cfg = MiniConfig();
  cfg.epochs = 16;
  cfg.use_vectors = false;
  JointTrainConfig heavy = cfg;
  heavy.l2 = 1e5;
  cfg.l2 = 0.0;
  JointTrainResult free_run = TrainJoint(c.train, {}, c.embeddings, c.proposals, cfg);
  JointTrainResult heavy_run =
      TrainJoint(c.train, {}, c.embeddings, c.proposals, heavy);
  // Any feature's very first step moves it by the full rate before the
  // regularizer can react, so the norms never decay all the way to zero;
  // the meaningful effect is that the regularized run stays far smaller at
  // matched epochs.
  CHECK(Norm(heavy_run.params.segmenter.eta) <
        0.5 * Norm(free_run.params.segmenter.eta));
  CHECK(Norm(heavy_run.params.transducer.omega) <
        0.75 * Norm(free_run.params.transducer.omega));
}

TEST_CASE("vector-fit gradient matches finite differences through composition") {
  EmbeddingTable stems(3);
  stems.Set("ab", {0.4, -0.3, 0.2});
  for (CompositionKind kind : {CompositionKind::kAdd, CompositionKind::kRnn}) {
    CAPTURE(CompositionKindName(kind));
    MorphemeEmbeddings morphemes(&stems, 3, 21);
    CompositionModel model = CompositionModel::Create(kind, 3, 22);
    LabeledSegmentation seg{{"ab", "s"}, {Label::kStem, Label::kSuffix}};
    Vec* affix = morphemes.MutableAffix(Label::kSuffix, "s");
    Vec v = {0.9, 0.1, -0.5};
    double sigma_sq = 0.7;

    std::vector<Vec> inputs = GatherMorphemeVectors(seg, morphemes, kind);
    CompositionTrace trace = ComposeWithTrace(model, inputs, seg.labels);
    Vec d_out(3);
    for (int k = 0; k < 3; ++k) d_out[k] = (v[k] - trace.output[k]) / sigma_sq;
    CompositionGradients g = ComposeBackward(model, inputs, trace, d_out);

    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      double saved = (*affix)[k];
      (*affix)[k] = saved + h;
      double up = GaussianLogFactor(
          v, Compose(model, GatherMorphemeVectors(seg, morphemes, kind), seg.labels),
          sigma_sq);
      (*affix)[k] = saved - h;
      double down = GaussianLogFactor(
          v, Compose(model, GatherMorphemeVectors(seg, morphemes, kind), seg.labels),
          sigma_sq);
      (*affix)[k] = saved;
      double fd = (up - down) / (2.0 * h);
      CHECK(g.inputs[1][k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("errors: bad sample counts and impossible oracle strings") {
  TinyJoint t = MakeTiny("a", 1, 2, 3, 0.0, 0.0, 1, true);
  Rng rng(1);
  CHECK_THROWS_AS(DrawSamples("a", nullptr, 0, t.params, t.proposals, &rng),
                  UsageError);
  DecodeConfig dc;
  dc.num_samples = 10;
  CHECK_THROWS_AS(
      DecodeWithOracleUr("a", "", nullptr, t.params, t.proposals, dc), DataError);
  // Too long for |word| + insertion limit.
  CHECK_THROWS_AS(
      DecodeWithOracleUr("a", "aaa", nullptr, t.params, t.proposals, dc), DataError);
  std::vector<WeightedSample> none;
  CHECK_THROWS_AS(EstimateLogZGradients(none, "a", &t.params), UsageError);
}

}  // TEST_SUITE joint
