#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "errors.h"
#include "logmath.h"
#include "test_util.h"
#include "transducer.h"

using namespace morsem;
using morsem::test::AllStrings;
using morsem::test::Coef;
using morsem::test::EnumerateEditPaths;
using morsem::test::OracleArc;

namespace {

TransducerParams MakeParams(const std::string& alphabet, const std::string& out_alpha,
                            int limit) {
  TransducerParams p;
  p.alphabet = alphabet;
  p.output_alphabet = out_alpha;
  p.insertion_limit = limit;
  return p;
}

void SetWeight(TransducerParams* p, const std::string& tmpl, double w) {
  int id = p->feature_index.Intern(tmpl);
  p->SyncWeights();
  p->omega[id] = w;
}

std::vector<TransductionPair> ToyPairs() {
  return {{"ab", "ab"}, {"ba", "b"}, {"aa", "a"}};
}

}  // namespace

TEST_SUITE("transducer") {

TEST_CASE("zero weights make the score count edit paths") {
  struct Case {
    std::string u, w;
    int k;
  };
  for (const Case& c : std::vector<Case>{{"a", "a", 1},
                                         {"a", "a", 0},
                                         {"", "ab", 2},
                                         {"ab", "ab", 0},
                                         {"ab", "ab", 1},
                                         {"abc", "ab", 2},
                                         {"b", "ab", 1},
                                         {"ba", "ab", 2}}) {
    TransducerParams p = MakeParams("abc", "abc", c.k);
    auto paths = EnumerateEditPaths(c.u, c.w, c.k);
    REQUIRE(!paths.empty());
    CHECK(TransductionLogScore(c.u, c.w, p) ==
          doctest::Approx(std::log(double(paths.size()))).epsilon(1e-12));
  }
  // Pinned counts: one copy path alone, or copy plus the two orders of
  // (delete, insert) once a single insertion is allowed.
  TransducerParams p0 = MakeParams("a", "a", 0);
  CHECK(TransductionLogScore("a", "a", p0) == doctest::Approx(0.0));
  TransducerParams p1 = MakeParams("a", "a", 1);
  CHECK(TransductionLogScore("a", "a", p1) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("weighted score matches a brute-force path sum") {
  TransducerParams p = MakeParams("ab", "ab", 2);
  SetWeight(&p, "E|cpy|a|a", 0.7);
  SetWeight(&p, "BND|B|ins", -0.4);
  for (const auto& [w, u] : std::vector<std::pair<std::string, std::string>>{
           {"ab", "aba"}, {"ab", "ab"}, {"ba", "ab"}, {"ab", "b"}}) {
    double oracle = kLogZero;
    for (const auto& path : EnumerateEditPaths(u, w, p.insertion_limit)) {
      double s = 0.0;
      for (const OracleArc& arc : path) {
        if (arc.kind == OracleArc::kCopy && u[arc.i - 1] == 'a') s += 0.7;
        if (arc.kind == OracleArc::kIns && arc.j == 0) s += -0.4;
      }
      oracle = LogAdd(oracle, s);
    }
    CHECK(TransductionLogScore(u, w, p) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("path posterior expectations on the smallest lattice") {
  // (u, w) = ("a", "a") with one insertion allowed has exactly three paths:
  // {copy}, {delete, insert}, {insert, delete}, all weight one. The copy
  // feature appears in one path, delete and insert in two each.
  TransducerParams p = MakeParams("a", "a", 1);
  SparseVec e = TransductionExpectedFeatures("a", "a", &p);
  int cpy = p.feature_index.Lookup("E|cpy|a|a");
  int del = p.feature_index.Lookup(std::string("E|del|a|") + '\x01');
  int ins = p.feature_index.Lookup(std::string("E|ins|") + '\x01' + "|a");
  REQUIRE(cpy >= 0);
  REQUIRE(del >= 0);
  REQUIRE(ins >= 0);
  CHECK(Coef(e, cpy) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(Coef(e, del) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(Coef(e, ins) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("expected features are the gradient of the log score") {
  TransducerParams p = MakeParams("ab", "ab", 1);
  TransductionExpectedFeatures("ab", "ab", &p);
  TransductionExpectedFeatures("ba", "ab", &p);
  Rng rng(17);
  for (double& w : p.omega) w = rng.Uniform(-0.5, 0.5);
  const double h = 1e-6;
  for (const auto& [w, u] : std::vector<std::pair<std::string, std::string>>{
           {"ab", "ab"}, {"ab", "ba"}}) {
    SparseVec grad = TransductionExpectedFeatures(u, w, &p);
    for (int id = 0; id < p.feature_index.size(); ++id) {
      double keep = p.omega[id];
      p.omega[id] = keep + h;
      double hi = TransductionLogScore(u, w, p);
      p.omega[id] = keep - h;
      double lo = TransductionLogScore(u, w, p);
      p.omega[id] = keep;
      double fd = (hi - lo) / (2.0 * h);
      CHECK(std::abs(fd - Coef(grad, id)) < 1e-6);
    }
  }
}

TEST_CASE("memoized feature ids survive interning and cache clears") {
  TransducerParams p = MakeParams("ab", "ab", 1);
  double paths = std::exp(TransductionLogScore("ab", "ab", p));
  CHECK(paths == doctest::Approx(double(EnumerateEditPaths("ab", "ab", 1).size())));
  TransductionExpectedFeatures("ab", "ab", &p);  // interns, stale entries refresh
  Rng rng(31);
  for (double& w : p.omega) w = rng.Uniform(-0.3, 0.3);
  double s1 = TransductionLogScore("ab", "ab", p);
  p.cache.clear();
  double s2 = TransductionLogScore("ab", "ab", p);
  CHECK(s1 == s2);
}

TEST_CASE("alphabet and length violations raise data errors") {
  TransducerParams p = MakeParams("ab", "a", 1);
  CHECK_THROWS_AS(TransductionLogScore("aaa", "a", p), DataError);
  CHECK_THROWS_AS(TransductionLogScore("b", "ab", p), DataError);
  CHECK_THROWS_AS(TransductionLogScore("a", "ac", p), DataError);
  CHECK_THROWS_AS(Q1Lattice("ac", p), DataError);
  TransducerTrainConfig cfg;
  cfg.insertion_limit = 1;
  CHECK_THROWS_AS(TrainProposalQ1({{"a", "aaa"}}, cfg), DataError);
}

TEST_CASE("proposal is a normalized distribution over bounded strings") {
  TransducerTrainConfig cfg;
  cfg.epochs = 4;
  cfg.insertion_limit = 2;
  cfg.seed = 5;
  TransducerParams q = TrainProposalQ1(ToyPairs(), cfg);
  CHECK(q.output_alphabet == "ab");
  for (const std::string& w : {std::string("ab"), std::string("ba")}) {
    Q1Lattice lat(w, q);
    double mass = 0.0;
    for (const std::string& u : AllStrings("ab", int(w.size()) + 2)) {
      mass += std::exp(lat.LogProb(u));
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::exp(lat.LogProb("")) == 0.0);  // the empty string is excluded
  }
}

TEST_CASE("proposal normalizes when the output alphabet is smaller") {
  TransducerTrainConfig cfg;
  cfg.epochs = 3;
  cfg.insertion_limit = 2;
  TransducerParams q = TrainProposalQ1({{"ab", "a"}, {"ba", "aa"}}, cfg);
  CHECK(q.output_alphabet == "a");
  Q1Lattice lat("ab", q);
  double mass = 0.0;
  for (const std::string& u : AllStrings("a", 4)) mass += std::exp(lat.LogProb(u));
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sampler frequencies match the marginal probabilities") {
  TransducerTrainConfig cfg;
  cfg.epochs = 4;
  cfg.insertion_limit = 2;
  TransducerParams q = TrainProposalQ1(ToyPairs(), cfg);
  Q1Lattice lat("ab", q);
  std::map<std::string, int> counts;
  Rng rng(123);
  const int kDraws = 50000;
  for (int i = 0; i < kDraws; ++i) counts[lat.Sample(&rng)]++;
  double tv = 0.0;
  double seen = 0.0;
  for (const std::string& u : AllStrings("ab", 4)) {
    double exact = std::exp(lat.LogProb(u));
    auto it = counts.find(u);
    double emp = it == counts.end() ? 0.0 : it->second / double(kDraws);
    seen += emp;
    tv += std::abs(exact - emp);
  }
  CHECK(seen == doctest::Approx(1.0));  // nothing sampled outside the support
  CHECK(tv / 2.0 < 0.02);
}

TEST_CASE("sampled strings always score finite under the marginal") {
  TransducerTrainConfig cfg;
  cfg.epochs = 2;
  cfg.insertion_limit = 3;
  TransducerParams q = TrainProposalQ1(ToyPairs(), cfg);
  Q1Lattice lat("ba", q);
  Rng rng(77);
  for (int i = 0; i < 500; ++i) {
    std::string u = lat.Sample(&rng);
    CHECK(std::isfinite(lat.LogProb(u)));
    CHECK(int(u.size()) <= 2 + 3);
  }
}

TEST_CASE("training raises the data likelihood") {
  TransducerTrainConfig cfg;
  cfg.epochs = 6;
  cfg.insertion_limit = 2;
  TransducerParams q = TrainProposalQ1(ToyPairs(), cfg);
  TransducerParams zero = MakeParams(q.alphabet, q.output_alphabet, 2);
  double trained = 0.0, base = 0.0;
  for (const TransductionPair& pr : ToyPairs()) {
    trained += Q1LogProb(pr.u, pr.w, q);
    base += Q1LogProb(pr.u, pr.w, zero);
  }
  CHECK(trained > base + 0.5);
}

TEST_CASE("proposal training is deterministic") {
  TransducerTrainConfig cfg;
  cfg.epochs = 3;
  cfg.insertion_limit = 2;
  TransducerParams a = TrainProposalQ1(ToyPairs(), cfg);
  TransducerParams b = TrainProposalQ1(ToyPairs(), cfg);
  REQUIRE(a.omega.size() == b.omega.size());
  for (std::size_t i = 0; i < a.omega.size(); ++i) CHECK(a.omega[i] == b.omega[i]);
  for (int i = 0; i < a.feature_index.size(); ++i) {
    CHECK(a.feature_index.name(i) == b.feature_index.name(i));
  }
}

TEST_CASE("sampling is deterministic per seed") {
  TransducerTrainConfig cfg;
  cfg.epochs = 2;
  cfg.insertion_limit = 2;
  TransducerParams q = TrainProposalQ1(ToyPairs(), cfg);
  Q1Lattice lat("ab", q);
  Rng r1(9), r2(9);
  for (int i = 0; i < 200; ++i) CHECK(lat.Sample(&r1) == lat.Sample(&r2));
}

}  // TEST_SUITE
