#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "composition.h"
#include "errors.h"
#include "rng.h"
#include "test_util.h"

using namespace morsem;

namespace {

std::vector<Vec> RandomInputs(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> xs(n, Vec(d));
  for (auto& v : xs) {
    for (double& x : v) x = rng.Uniform(-1.0, 1.0);
  }
  return xs;
}

std::vector<Label> StemFirst(int n) {
  std::vector<Label> ls(n, Label::kSuffix);
  if (n > 0) ls[0] = Label::kStem;
  return ls;
}

double Loss(const CompositionModel& m, const std::vector<Vec>& inputs,
            const std::vector<Label>& labels, const Vec& target) {
  Vec c = Compose(m, inputs, labels);
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    double diff = c[k] - target[k];
    s += 0.5 * diff * diff;
  }
  return s;
}

// Central finite difference of the squared loss against every input and
// parameter coordinate, compared with the analytic backward pass.
void CheckGradients(CompositionKind kind) {
  const int d = 3, n = 3;
  CompositionModel m = CompositionModel::Create(kind, d, 11);
  std::vector<Vec> inputs = RandomInputs(n, d, 5);
  std::vector<Label> labels = StemFirst(n);
  Rng rng(7);
  Vec target(d);
  for (double& x : target) x = rng.Uniform(-1.0, 1.0);
  // Move parameters off their symmetric initial values.
  for (double& a : m.alpha) a += rng.Uniform(-0.2, 0.2);
  for (Mat& p : m.position_mats) {
    for (double& x : p.data) x += rng.Uniform(-0.2, 0.2);
  }
  for (double& x : m.X.data) x += rng.Uniform(-0.2, 0.2);
  for (double& x : m.U.data) x += rng.Uniform(-0.2, 0.2);
  for (double& x : m.h0) x = rng.Uniform(-0.2, 0.2);

  CompositionTrace fwd = ComposeWithTrace(m, inputs, labels);
  Vec d_out(d);
  for (int k = 0; k < d; ++k) d_out[k] = fwd.output[k] - target[k];
  CompositionGradients g = ComposeBackward(m, inputs, fwd, d_out);

  const double h = 1e-6;
  auto fd = [&](double* x) {
    double keep = *x;
    *x = keep + h;
    double hi = Loss(m, inputs, labels, target);
    *x = keep - h;
    double lo = Loss(m, inputs, labels, target);
    *x = keep;
    return (hi - lo) / (2.0 * h);
  };

  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      CHECK(std::abs(fd(&inputs[i][k]) - g.inputs[i][k]) < 1e-6);
    }
  }
  for (std::size_t i = 0; i < m.alpha.size(); ++i) {
    CHECK(std::abs(fd(&m.alpha[i]) - g.alpha[i]) < 1e-6);
  }
  for (std::size_t i = 0; i < m.position_mats.size(); ++i) {
    for (std::size_t k = 0; k < m.position_mats[i].data.size(); ++k) {
      CHECK(std::abs(fd(&m.position_mats[i].data[k]) - g.position_mats[i].data[k]) <
            1e-6);
    }
  }
  if (m.X.rows > 0) {
    for (std::size_t k = 0; k < m.X.data.size(); ++k) {
      CHECK(std::abs(fd(&m.X.data[k]) - g.X.data[k]) < 1e-6);
    }
    for (std::size_t k = 0; k < m.U.data.size(); ++k) {
      CHECK(std::abs(fd(&m.U.data[k]) - g.U.data[k]) < 1e-6);
    }
    for (int k = 0; k < d; ++k) {
      CHECK(std::abs(fd(&m.h0[k]) - g.h0[k]) < 1e-6);
    }
  }
}

}  // namespace

TEST_SUITE("composition") {

TEST_CASE("kind names round-trip") {
  for (CompositionKind k :
       {CompositionKind::kStem, CompositionKind::kMult, CompositionKind::kAdd,
        CompositionKind::kWAdd, CompositionKind::kFullAdd, CompositionKind::kLds,
        CompositionKind::kRnn}) {
    CHECK(ParseCompositionKind(CompositionKindName(k)) == k);
  }
  CHECK(!ParseCompositionKind("concat").has_value());
}

TEST_CASE("stem composition picks the first stem vector") {
  CompositionModel m = CompositionModel::Create(CompositionKind::kStem, 2, 1);
  std::vector<Vec> inputs{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}};
  CHECK(Compose(m, inputs, {Label::kPrefix, Label::kStem, Label::kStem}) ==
        Vec{3.0, 4.0});
  CHECK(Compose(m, inputs, {Label::kPrefix, Label::kSuffix, Label::kSuffix}) ==
        Vec{0.0, 0.0});
}

TEST_CASE("multiplicative composition is the elementwise product") {
  CompositionModel m = CompositionModel::Create(CompositionKind::kMult, 2, 1);
  std::vector<Vec> inputs{{2.0, -1.0}, {3.0, 0.5}};
  CHECK(Compose(m, inputs, StemFirst(2)) == Vec{6.0, -0.5});
}

TEST_CASE("additive composition is the sum") {
  CompositionModel m = CompositionModel::Create(CompositionKind::kAdd, 2, 1);
  std::vector<Vec> inputs{{2.0, -1.0}, {3.0, 0.5}};
  CHECK(Compose(m, inputs, StemFirst(2)) == Vec{5.0, -0.5});
}

TEST_CASE("untrained positional weights reduce to addition") {
  std::vector<Vec> inputs{{1.0, 2.0}, {0.5, -1.0}, {3.0, 1.0}};
  CompositionModel wadd = CompositionModel::Create(CompositionKind::kWAdd, 2, 1);
  CompositionModel fulladd = CompositionModel::Create(CompositionKind::kFullAdd, 2, 1);
  CHECK(Compose(wadd, inputs, StemFirst(3)) == Vec{4.5, 2.0});
  CHECK(Compose(fulladd, inputs, StemFirst(3)) == Vec{4.5, 2.0});
}

TEST_CASE("positional weights apply per position") {
  CompositionModel m = CompositionModel::Create(CompositionKind::kWAdd, 2, 1);
  m.alpha[0] = 2.0;
  m.alpha[1] = -1.0;
  std::vector<Vec> inputs{{1.0, 1.0}, {3.0, 0.0}};
  CHECK(Compose(m, inputs, StemFirst(2)) == Vec{-1.0, 2.0});

  CompositionModel f = CompositionModel::Create(CompositionKind::kFullAdd, 2, 1);
  f.position_mats[1](0, 0) = 0.0;
  f.position_mats[1](0, 1) = 1.0;
  f.position_mats[1](1, 0) = 1.0;
  f.position_mats[1](1, 1) = 0.0;  // swap coordinates of the second morpheme
  CHECK(Compose(f, inputs, StemFirst(2)) == Vec{1.0 + 0.0, 1.0 + 3.0});
}

TEST_CASE("recurrent compositions follow their recurrences") {
  CompositionModel m = CompositionModel::Create(CompositionKind::kLds, 2, 3);
  m.X = Mat::Identity(2);
  m.U = Mat::Identity(2);
  m.X(0, 0) = 2.0;
  m.h0 = {1.0, 0.0};
  std::vector<Vec> inputs{{1.0, 1.0}, {0.5, 0.5}};
  // h1 = X h0 + m1 = (2+1, 0+1) = (3, 1); h2 = X h1 + m2 = (6.5, 1.5)
  CHECK(Compose(m, inputs, StemFirst(2)) == Vec{6.5, 1.5});

  CompositionModel r = CompositionModel::Create(CompositionKind::kRnn, 1, 3);
  r.X = Mat::Identity(1);
  r.U = Mat::Identity(1);
  r.h0 = {0.0};
  std::vector<Vec> one{{0.5}, {0.25}};
  double h1 = std::tanh(0.5);
  double h2 = std::tanh(h1 + 0.25);
  Vec out = Compose(r, one, StemFirst(2));
  CHECK(out[0] == doctest::Approx(h2).epsilon(1e-15));
}

TEST_CASE("backward passes match finite differences") {
  CheckGradients(CompositionKind::kStem);
  CheckGradients(CompositionKind::kMult);
  CheckGradients(CompositionKind::kAdd);
  CheckGradients(CompositionKind::kWAdd);
  CheckGradients(CompositionKind::kFullAdd);
  CheckGradients(CompositionKind::kLds);
  CheckGradients(CompositionKind::kRnn);
}

TEST_CASE("multiplicative gradients stay exact at zero coordinates") {
  CompositionModel m = CompositionModel::Create(CompositionKind::kMult, 2, 1);
  std::vector<Vec> inputs{{0.0, 2.0}, {3.0, 4.0}, {5.0, 0.0}};
  std::vector<Label> labels = StemFirst(3);
  CompositionTrace fwd = ComposeWithTrace(m, inputs, labels);
  CHECK(fwd.output == Vec{0.0, 0.0});
  CompositionGradients g = ComposeBackward(m, inputs, fwd, {1.0, 1.0});
  // d output_0 / d inputs[0][0] = 3 * 5; other zeros kill the rest.
  CHECK(g.inputs[0][0] == 15.0);
  CHECK(g.inputs[1][0] == 0.0);
  CHECK(g.inputs[0][1] == 0.0);
  CHECK(g.inputs[2][1] == 8.0);
}

TEST_CASE("morpheme gathering respects the absence policy") {
  EmbeddingTable words(2);
  words.Set("ab", {1.0, 2.0});
  MorphemeEmbeddings store(&words, 2, 9);
  LabeledSegmentation seg;
  seg.segments = {"ab", "ly"};
  seg.labels = {Label::kStem, Label::kSuffix};
  auto mult = GatherMorphemeVectors(seg, store, CompositionKind::kMult);
  CHECK(mult[0] == Vec{1.0, 2.0});
  CHECK(mult[1] == Vec{1.0, 1.0});  // absent suffix reads as ones
  auto add = GatherMorphemeVectors(seg, store, CompositionKind::kAdd);
  CHECK(add[1] == Vec{0.0, 0.0});  // and as zeros additively
}

TEST_CASE("dimension and arity violations are rejected") {
  CHECK_THROWS_AS(CompositionModel::Create(CompositionKind::kAdd, 0, 1), DataError);
  CompositionModel m = CompositionModel::Create(CompositionKind::kWAdd, 2, 1);
  CHECK_THROWS_AS(Compose(m, {}, {}), DataError);
  CHECK_THROWS_AS(Compose(m, {{1.0, 2.0, 3.0}}, StemFirst(1)), DataError);
  std::vector<Vec> many(8, Vec{1.0, 1.0});
  CHECK_THROWS_AS(Compose(m, many, StemFirst(8)), DataError);
  CompositionModel add = CompositionModel::Create(CompositionKind::kAdd, 2, 1);
  CHECK(Compose(add, many, StemFirst(8)) == Vec{8.0, 8.0});  // no positional cap
}

TEST_CASE("gaussian factor value") {
  CHECK(GaussianLogFactor({1.0, 2.0}, {1.0, 2.0}, 0.5) == 0.0);
  CHECK(GaussianLogFactor({1.0, 0.0}, {0.0, 2.0}, 0.5) ==
        doctest::Approx(-(1.0 + 4.0) / 1.0));
  CHECK_THROWS_AS(GaussianLogFactor({1.0}, {1.0}, 0.0), DataError);
}

TEST_CASE("gold training recovers an additive affix vector") {
  const int d = 4;
  EmbeddingTable words(d);
  Rng rng(21);
  Vec latent_ly(d), latent_un(d);
  for (double& x : latent_ly) x = rng.Uniform(-1.0, 1.0);
  for (double& x : latent_un) x = rng.Uniform(-1.0, 1.0);
  std::vector<GoldCompositionExample> data;
  std::vector<std::string> stems{"walk", "talk", "jump", "rest", "play", "cook"};
  for (const std::string& s : stems) {
    Vec sv(d);
    for (double& x : sv) x = rng.Uniform(-1.0, 1.0);
    words.Set(s, sv);
    GoldCompositionExample ex;
    ex.seg.segments = {s, "ly"};
    ex.seg.labels = {Label::kStem, Label::kSuffix};
    ex.target = sv;
    AxpyInto(&ex.target, 1.0, latent_ly);
    data.push_back(ex);
    GoldCompositionExample ex2;
    ex2.seg.segments = {"un", s};
    ex2.seg.labels = {Label::kPrefix, Label::kStem};
    ex2.target = sv;
    AxpyInto(&ex2.target, 1.0, latent_un);
    data.push_back(ex2);
  }
  CompositionModel model = CompositionModel::Create(CompositionKind::kAdd, d, 1);
  MorphemeEmbeddings store(&words, d, 33);
  CompositionTrainConfig cfg;
  cfg.epochs = 300;
  cfg.learning_rate = 0.05;
  std::vector<double> loss = TrainCompositionGold(&model, &store, data, cfg);
  REQUIRE(int(loss.size()) == cfg.epochs);
  CHECK(loss.back() < 1e-6);
  Vec ly = store.Get(Label::kSuffix, "ly", AbsentPolicy::kZeros);
  for (int k = 0; k < d; ++k) CHECK(std::abs(ly[k] - latent_ly[k]) < 1e-3);
}

TEST_CASE("gold training reduces loss for recurrent models") {
  const int d = 3;
  EmbeddingTable words(d);
  Rng rng(4);
  std::vector<GoldCompositionExample> data;
  for (int i = 0; i < 8; ++i) {
    std::string s = "s" + std::to_string(i);
    Vec sv(d), tv(d);
    for (double& x : sv) x = rng.Uniform(-1.0, 1.0);
    for (double& x : tv) x = rng.Uniform(-1.0, 1.0);
    words.Set(s, sv);
    GoldCompositionExample ex;
    ex.seg.segments = {s, "er"};
    ex.seg.labels = {Label::kStem, Label::kSuffix};
    ex.target = tv;
    data.push_back(ex);
  }
  for (CompositionKind kind : {CompositionKind::kLds, CompositionKind::kRnn,
                               CompositionKind::kWAdd, CompositionKind::kFullAdd}) {
    CompositionModel model = CompositionModel::Create(kind, d, 2);
    MorphemeEmbeddings store(&words, d, 5);
    CompositionTrainConfig cfg;
    cfg.epochs = 120;
    std::vector<double> loss = TrainCompositionGold(&model, &store, data, cfg);
    CHECK(loss.back() < 0.5 * loss.front());
  }
}

TEST_CASE("gold training is deterministic") {
  const int d = 2;
  EmbeddingTable words(d);
  words.Set("ab", {0.5, -0.5});
  std::vector<GoldCompositionExample> data(1);
  data[0].seg.segments = {"ab", "y"};
  data[0].seg.labels = {Label::kStem, Label::kSuffix};
  data[0].target = {1.0, 1.0};
  auto run = [&]() {
    CompositionModel model = CompositionModel::Create(CompositionKind::kRnn, d, 7);
    MorphemeEmbeddings store(&words, d, 11);
    CompositionTrainConfig cfg;
    cfg.epochs = 20;
    return TrainCompositionGold(&model, &store, data, cfg);
  };
  CHECK(run() == run());
}

}  // TEST_SUITE
