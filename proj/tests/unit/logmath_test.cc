#include <doctest.h>

#include <cmath>

#include "logmath.h"

using namespace morsem;

TEST_SUITE("logmath") {

TEST_CASE("log add identities") {
  CHECK(LogAdd(kLogZero, kLogZero) == kLogZero);
  CHECK(LogAdd(kLogZero, 1.5) == 1.5);
  CHECK(LogAdd(-2.0, kLogZero) == -2.0);
  CHECK(LogAdd(0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("log add matches direct computation") {
  CHECK(LogAdd(std::log(3.0), std::log(5.0)) ==
        doctest::Approx(std::log(8.0)).epsilon(1e-14));
  CHECK(LogAdd(std::log(5.0), std::log(3.0)) ==
        doctest::Approx(std::log(8.0)).epsilon(1e-14));
}

TEST_CASE("log add is stable for huge magnitude gaps") {
  CHECK(LogAdd(0.0, -1000.0) == 0.0);
  CHECK(LogAdd(-1000.0, 0.0) == 0.0);
  CHECK(std::isfinite(LogAdd(-1e308, -1e308)));
}

TEST_CASE("log sum exp") {
  CHECK(LogSumExp({}) == kLogZero);
  CHECK(LogSumExp({kLogZero, kLogZero}) == kLogZero);
  CHECK(LogSumExp({std::log(1.0), std::log(2.0), std::log(3.0)}) ==
        doctest::Approx(std::log(6.0)).epsilon(1e-14));
  CHECK(LogSumExp({-1000.0, -1000.0}) ==
        doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-14));
}

}  // TEST_SUITE
