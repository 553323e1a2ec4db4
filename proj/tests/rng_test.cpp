#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedldp/rng.hpp"

using namespace fedldp;

TEST_CASE("identical keys reproduce identical sequences") {
  RngStream a(7, 3, 9, rng_purpose::kNoise);
  RngStream b(7, 3, 9, rng_purpose::kNoise);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
}

TEST_CASE("any key component separates the stream") {
  RngStream base(7, 3, 9, rng_purpose::kNoise);
  RngStream seed(8, 3, 9, rng_purpose::kNoise);
  RngStream client(7, 4, 9, rng_purpose::kNoise);
  RngStream round(7, 3, 10, rng_purpose::kNoise);
  RngStream purpose(7, 3, 9, rng_purpose::kMinibatch);
  const auto v = base();
  CHECK(v != seed());
  CHECK(v != client());
  CHECK(v != round());
  CHECK(v != purpose());
}

TEST_CASE("interleaved consumption does not perturb either stream") {
  RngStream a1(1, 2, 3, 4), b1(5, 6, 7, 8);
  std::vector<std::uint64_t> a_seq, b_seq;
  for (int i = 0; i < 50; ++i) {
    a_seq.push_back(a1());
    b_seq.push_back(b1());
  }
  RngStream a2(1, 2, 3, 4), b2(5, 6, 7, 8);
  for (int i = 0; i < 50; ++i) CHECK(b_seq[i] == b2());
  for (int i = 0; i < 50; ++i) CHECK(a_seq[i] == a2());
}

TEST_CASE("uniform lies in [0,1) with the right mean and variance") {
  RngStream rng(13, 0, 0, rng_purpose::kOracle);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal draws match the first four standard moments") {
  RngStream rng(17, 0, 0, rng_purpose::kOracle);
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m1 += z;
    m2 += z * z;
    m3 += z * z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 0.01);
  CHECK(m2 == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(m3) < 0.05);
  CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("below(n) is unbiased over its range") {
  RngStream rng(19, 0, 0, rng_purpose::kOracle);
  const std::uint64_t n = 7;
  const int draws = 70000;
  std::vector<int> counts(n, 0);
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t v = rng.below(n);
    REQUIRE(v < n);
    ++counts[static_cast<int>(v)];
  }
  // each bucket ~ Binomial(70000, 1/7): mean 10000, sd ~ 92.6; allow 5 sd
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("below(1) always returns zero") {
  RngStream rng(23, 0, 0, rng_purpose::kOracle);
  for (int i = 0; i < 10; ++i) CHECK(rng.below(1) == 0);
}
