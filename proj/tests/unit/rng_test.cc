#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "rng.h"

using namespace morsem;

TEST_SUITE("rng") {

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.Uniform() == b.Uniform());
}

TEST_CASE("different seeds give different streams") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 100; ++i) {
    if (a.Uniform() == b.Uniform()) ++same;
  }
  CHECK(same < 5);
}

TEST_CASE("uniform stays in range") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    double x = rng.Uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    double x = rng.Uniform(-2.0, 3.0);
    CHECK(x >= -2.0);
    CHECK(x < 3.0);
  }
}

TEST_CASE("uniform int covers its range") {
  Rng rng(11);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 10000; ++i) {
    int x = rng.UniformInt(5);
    REQUIRE(x >= 0);
    REQUIRE(x < 5);
    counts[x]++;
  }
  for (int c : counts) CHECK(c > 1700);  // near 2000 each
}

TEST_CASE("gaussian moments") {
  Rng rng(5);
  int n = 50000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.Gaussian();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("categorical follows the given probabilities") {
  Rng rng(3);
  std::vector<double> probs{0.2, 0.5, 0.3};
  std::vector<int> counts(3, 0);
  int n = 20000;
  for (int i = 0; i < n; ++i) counts[rng.Categorical(probs)]++;
  CHECK(std::abs(counts[0] / double(n) - 0.2) < 0.02);
  CHECK(std::abs(counts[1] / double(n) - 0.5) < 0.02);
  CHECK(std::abs(counts[2] / double(n) - 0.3) < 0.02);
}

TEST_CASE("categorical clamps to the last index") {
  Rng rng(9);
  // Probabilities that sum to slightly below one must still return an index.
  std::vector<double> probs{0.0, 0.0};
  for (int i = 0; i < 100; ++i) {
    int k = rng.Categorical(probs);
    CHECK(k == 1);
  }
}

TEST_CASE("shuffle permutes") {
  Rng rng(13);
  std::vector<int> xs{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> ys = xs;
  rng.Shuffle(&ys);
  std::vector<int> sorted = ys;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == xs);
}

TEST_CASE("shuffle is deterministic per seed") {
  std::vector<int> a{1, 2, 3, 4, 5}, b{1, 2, 3, 4, 5};
  Rng r1(21), r2(21);
  r1.Shuffle(&a);
  r2.Shuffle(&b);
  CHECK(a == b);
}

TEST_CASE("derived seeds do not collide over a large range") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    seen.insert(Rng::DeriveSeed(1234, i));
  }
  CHECK(seen.size() == 10000);
  CHECK(Rng::DeriveSeed(1, 0) != Rng::DeriveSeed(2, 0));
}

}  // TEST_SUITE
