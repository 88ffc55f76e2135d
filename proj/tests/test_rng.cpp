#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fouport/numerics.hpp"
#include "fouport/rng.hpp"

using namespace fouport;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Random123 test vectors
  uint32_t out[4];
  rng::philox_block({0, 0, 0, 0, 0, 0}, out);
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);
  rng::philox_block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                    out);
  CHECK(out[0] == 0x408f276du);
  CHECK(out[1] == 0x41c83b0eu);
  CHECK(out[2] == 0xa20bc7c6u);
  CHECK(out[3] == 0x6d5451fdu);
}

TEST_CASE("normal stream determinism and addressing") {
  rng::NormalStream a(42, rng::StreamClass::future_wy, 7, 3);
  rng::NormalStream b(42, rng::StreamClass::future_wy, 7, 3);
  std::vector<double> first;
  for (int i = 0; i < 100; ++i) first.push_back(a.next());
  for (int i = 0; i < 100; ++i) CHECK(b.next() == first[std::size_t(i)]);

  // random access: seek to an arbitrary index
  rng::NormalStream c(42, rng::StreamClass::future_wy, 7, 3);
  c.seek(57);
  CHECK(c.next() == first[57]);
  CHECK(c.next() == first[58]);

  // different coordinates give different draws
  rng::NormalStream d(42, rng::StreamClass::future_wy, 8, 3);
  rng::NormalStream e(42, rng::StreamClass::history_wy, 7, 3);
  rng::NormalStream f(43, rng::StreamClass::future_wy, 7, 3);
  CHECK(d.next() != first[0]);
  CHECK(e.next() != first[0]);
  CHECK(f.next() != first[0]);
}

TEST_CASE("normal stream moments") {
  const std::size_t n = 400000;
  rng::NormalStream s(2024, rng::StreamClass::future_wy, 0, 0);
  double sum = 0.0, sum2 = 0.0, sum3 = 0.0, sum4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = s.next();
    sum += z;
    sum2 += z * z;
    sum3 += z * z * z;
    sum4 += z * z * z * z;
  }
  const double inv = 1.0 / double(n);
  // 4-sigma bands on the sampling error of each moment
  CHECK(std::abs(sum * inv) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(sum2 * inv - 1.0) < 4.0 * std::sqrt(2.0 / double(n)));
  CHECK(std::abs(sum3 * inv) < 4.0 * std::sqrt(15.0 / double(n)));
  CHECK(std::abs(sum4 * inv - 3.0) < 4.0 * std::sqrt(96.0 / double(n)));
}

TEST_CASE("mix_seed separates salts") {
  CHECK(rng::mix_seed(1, 0) != rng::mix_seed(1, 1));
  CHECK(rng::mix_seed(1, 0) != rng::mix_seed(2, 0));
  CHECK(rng::mix_seed(123, 45) == rng::mix_seed(123, 45));
}
