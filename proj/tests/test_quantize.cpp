#include "psa/quantize.hpp"

#include <cmath>

#include "doctest.h"
#include "psa/rng.hpp"

using namespace psa;

TEST_SUITE("quantize") {

TEST_CASE("all-zero input") {
  Matrix v = Matrix::Zero(3, 1);
  auto r = quantize_tensor(v, QuantizerConfig::weights(4));
  CHECK(r.scale == 1.0);
  CHECK(r.values.isZero(0.0));
}

TEST_CASE("signed 2-bit hand example") {
  Matrix v(3, 1);
  v << -1.0, 0.25, 0.5;
  auto r = quantize_tensor(v, QuantizerConfig::weights(2));
  // scale = 1.0 / (2^1 - 1) = 1.0; integers round half away from zero.
  CHECK(r.scale == 1.0);
  CHECK(r.values(0, 0) == -1.0);
  CHECK(r.values(1, 0) == 0.0);
  CHECK(r.values(2, 0) == 1.0);  // 0.5 -> 1
}

TEST_CASE("rounding error bounded by half a step") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix v(8, 4);
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 8; ++i) v(i, j) = rng.uniform(-2.0, 2.0);
    auto r = quantize_tensor(v, QuantizerConfig::weights(16));
    CHECK((r.values - v).array().abs().maxCoeff() <= r.scale / 2 + 1e-15);
  }
}

TEST_CASE("unsigned mode") {
  Matrix v(2, 1);
  v << 0.0, 3.0;
  auto r = quantize_tensor(v, QuantizerConfig::activations(2));
  CHECK(r.scale == doctest::Approx(1.0));  // 3 / (2^2 - 1)
  CHECK(r.values(1, 0) == 3.0);

  Matrix neg(1, 1);
  neg << -0.5;
  CHECK_THROWS(quantize_tensor(neg, QuantizerConfig::activations(4)));
}

TEST_CASE("idempotence") {
  Rng rng(11);
  for (int bits : {2, 3, 4, 8, 16}) {
    for (int trial = 0; trial < 20; ++trial) {
      Matrix v(6, 3);
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 6; ++i) v(i, j) = rng.uniform(-1.0, 1.0);
      auto once = quantize_tensor(v, QuantizerConfig::weights(bits));
      auto twice = quantize_tensor(once.values, QuantizerConfig::weights(bits));
      CHECK(once.values == twice.values);
      CHECK(once.scale == doctest::Approx(twice.scale));
    }
  }
}

TEST_CASE("monotone refinement of the error bound") {
  // The max-based scale halves-or-better with each added bit, so the
  // rounding-error bound scale/2 never increases with bits.  (The realized
  // max error itself is not monotone: a value landing exactly on a coarse
  // grid can sit between cells of a finer one.)
  Rng rng(5);
  Matrix v(16, 2);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 16; ++i) v(i, j) = rng.uniform(-3.0, 3.0);
  double prev_scale = std::numeric_limits<double>::infinity();
  for (int bits = 2; bits <= 16; ++bits) {
    auto r = quantize_tensor(v, QuantizerConfig::weights(bits));
    CHECK(r.scale <= prev_scale + 1e-18);
    CHECK((r.values - v).array().abs().maxCoeff() <= r.scale / 2 + 1e-15);
    prev_scale = r.scale;
  }
}

TEST_CASE("signed 1-bit collapses to zero") {
  Matrix v(2, 1);
  v << 0.7, -0.3;
  auto r = quantize_tensor(v, QuantizerConfig::weights(1));
  CHECK(r.values.isZero(0.0));
}

}  // TEST_SUITE
