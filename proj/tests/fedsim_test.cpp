#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "fedldp/core.hpp"
#include "fedldp/fedsim.hpp"
#include "fedldp/losses.hpp"
#include "fedldp/rng.hpp"

using namespace fedldp;

namespace {

ClientDataset quadratic_client(int n, int d, std::uint64_t seed) {
  ClientDataset c;
  RngStream rng(seed, 0, 0, rng_purpose::kOracle);
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.x = Vector(d);
    for (int j = 0; j < d; ++j) s.x[j] = rng.normal();
    c.samples.push_back(s);
  }
  return c;
}

}  // namespace

TEST_CASE("availability_moments matches the frozen uniform{1,2} reference") {
  const auto [M, M_prime] = availability_moments(AvailabilityModel::UniformRange(1, 2));
  CHECK(M == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(M_prime == doctest::Approx(1.2649110640673518).epsilon(1e-13));
  // fixed model: both moments collapse to M
  const auto [f, f_prime] = availability_moments(AvailabilityModel::Fixed(7));
  CHECK(f == doctest::Approx(7.0));
  CHECK(f_prime == doctest::Approx(7.0));
  // and always M >= M'
  const auto [c, c_prime] = availability_moments(
      AvailabilityModel::Categorical({1, 5, 10}, {0.2, 0.3, 0.5}));
  CHECK(c >= c_prime);
}

TEST_CASE("AvailabilityModel::validate rejects malformed models") {
  CHECK_THROWS_AS(AvailabilityModel::Categorical({1, 2}, {0.5}), Error);
  CHECK_THROWS_AS(AvailabilityModel::Categorical({0}, {1.0}), Error);
  CHECK_THROWS_AS(AvailabilityModel::Categorical({1, 2}, {0.7, 0.7}), Error);
  CHECK_THROWS_AS(AvailabilityModel::UniformRange(3, 2), Error);
}

TEST_CASE("sample_round returns sorted uniform subsets") {
  const int N = 6, M = 2;
  AvailabilityModel model = AvailabilityModel::Fixed(M);
  std::map<std::vector<int>, int> counts;
  const int draws = 30000;
  for (int t = 0; t < draws; ++t) {
    RngStream rng(99, 0, static_cast<std::uint64_t>(t), rng_purpose::kAvailability);
    std::vector<int> s = sample_round(rng, model, N);
    REQUIRE(static_cast<int>(s.size()) == M);
    CHECK(s[0] < s[1]);
    ++counts[s];
  }
  // C(6,2) = 15 subsets, each ~ 2000 draws; 5 sd ~ 220
  CHECK(counts.size() == 15);
  for (const auto& [subset, c] : counts) CHECK(std::abs(c - 2000) < 250);
  // N below the support is rejected
  RngStream rng(99, 0, 0, rng_purpose::kAvailability);
  CHECK_THROWS_AS(sample_round(rng, AvailabilityModel::Fixed(5), 4), Error);
}

TEST_CASE("shuffle_stage permutes uniformly") {
  std::vector<int> position_counts(3 * 3, 0);
  const int draws = 30000;
  for (int t = 0; t < draws; ++t) {
    std::vector<Vector> msgs;
    for (int i = 0; i < 3; ++i) {
      Vector v(1);
      v << static_cast<double>(i);
      msgs.push_back(v);
    }
    RngStream rng(123, 0, static_cast<std::uint64_t>(t), rng_purpose::kShuffle);
    std::vector<Vector> out = shuffle_stage(std::move(msgs), rng);
    for (int pos = 0; pos < 3; ++pos) {
      ++position_counts[pos * 3 + static_cast<int>(out[pos][0])];
    }
  }
  // each (position, value) cell ~ 10000; 5 sd ~ 410
  for (int c : position_counts) CHECK(std::abs(c - 10000) < 450);
}

TEST_CASE("client_message is an unbiased gradient estimate") {
  ClientDataset client = quadratic_client(20, 3, 7);
  LossSpec loss;
  loss.family = LossFamily::Quadratic;
  loss.D = 10.0;
  loss.L = 20.0;
  Vector w = Vector::Zero(3);
  Vector full = Vector::Zero(3);
  for (const auto& s : client.samples) full += grad(loss, w, s).grad;
  full /= static_cast<double>(client.n());

  Vector mean = Vector::Zero(3);
  const int draws = 40000;
  for (int t = 0; t < draws; ++t) {
    RngStream batch(5, 1, static_cast<std::uint64_t>(t), rng_purpose::kMinibatch);
    RngStream noise(5, 1, static_cast<std::uint64_t>(t), rng_purpose::kNoise);
    mean += client_message(client, loss, w, 3, SamplingMode::WithReplacement, 0.25,
                           batch, noise);
  }
  mean /= static_cast<double>(draws);
  // sampling sd per coordinate is O(1); MC tolerance 5/sqrt(draws) ~ 0.025
  CHECK((mean - full).norm() < 0.05);
}

TEST_CASE("client_message noise variance matches sigma_sq") {
  ClientDataset client = quadratic_client(5, 2, 9);
  LossSpec loss;
  loss.family = LossFamily::Quadratic;
  loss.D = 10.0;
  loss.L = 20.0;
  Vector w = Vector::Zero(2);
  const double sigma_sq = 0.5;
  const int draws = 40000;
  double var = 0.0;
  for (int t = 0; t < draws; ++t) {
    RngStream batch(6, 1, static_cast<std::uint64_t>(t), rng_purpose::kMinibatch);
    RngStream noise(6, 1, static_cast<std::uint64_t>(t), rng_purpose::kNoise);
    // full batch removes the sampling term, leaving pure Gaussian noise
    Vector m = client_message(client, loss, w, 5, SamplingMode::WithReplacement, sigma_sq,
                              batch, noise);
    RngStream batch2(6, 1, static_cast<std::uint64_t>(t), rng_purpose::kMinibatch);
    RngStream noise2(6, 1, static_cast<std::uint64_t>(t), rng_purpose::kNoise);
    Vector exact = client_message(client, loss, w, 5, SamplingMode::WithReplacement, 0.0,
                                  batch2, noise2);
    var += (m - exact).squaredNorm();
  }
  var /= static_cast<double>(draws);
  CHECK(var == doctest::Approx(2.0 * sigma_sq).epsilon(0.03));  // d * sigma_sq, d = 2
}

TEST_CASE("K >= n with replacement is the exact deterministic full gradient") {
  ClientDataset client = quadratic_client(8, 3, 13);
  client.scale = 1.7;
  LossSpec loss;
  loss.family = LossFamily::Quadratic;
  loss.D = 10.0;
  loss.L = 20.0;
  Vector w(3);
  w << 0.1, -0.2, 0.3;
  Vector full = Vector::Zero(3);
  for (const auto& s : client.samples) full += grad(loss, w, s).grad;
  full *= client.scale / static_cast<double>(client.n());
  for (int K : {8, 20}) {
    RngStream batch(1, 1, 1, rng_purpose::kMinibatch);
    RngStream noise(1, 1, 1, rng_purpose::kNoise);
    Vector m = client_message(client, loss, w, K, SamplingMode::WithReplacement, 0.0,
                              batch, noise);
    CHECK((m - full).norm() <= 1e-14);
  }
}

TEST_CASE("one-pass sampling consumes disjoint blocks and then exhausts") {
  ClientDataset client = quadratic_client(10, 1, 17);
  // make each sample identifiable through the quadratic gradient at w = 0
  LossSpec loss;
  loss.family = LossFamily::Quadratic;
  loss.D = 10.0;
  loss.L = 20.0;
  Vector w = Vector::Zero(1);
  RngStream order_rng(3, 1, 0, rng_purpose::kDataOrder);
  OnePassState state = OnePassState::Shuffled(10, order_rng);
  // the shuffled order is a permutation
  std::vector<int> seen(10, 0);
  for (int idx : state.order) ++seen[idx];
  for (int c : seen) CHECK(c == 1);

  RngStream batch(3, 1, 0, rng_purpose::kMinibatch);
  RngStream noise(3, 1, 0, rng_purpose::kNoise);
  double total = 0.0;
  for (int r = 0; r < 5; ++r) {
    Vector m = client_message(client, loss, w, 2, SamplingMode::WithoutReplacementDisjoint,
                              0.0, batch, noise, &state);
    total += 2.0 * m[0];  // sum of the block's gradients
  }
  double full = 0.0;
  for (const auto& s : client.samples) full += grad(loss, w, s).grad[0];
  CHECK(total == doctest::Approx(full).epsilon(1e-12));  // every sample used once
  CHECK_THROWS_WITH_AS(client_message(client, loss, w, 2,
                                      SamplingMode::WithoutReplacementDisjoint, 0.0, batch,
                                      noise, &state),
                       doctest::Contains("budget exhausted"), Error);
  CHECK_THROWS_AS(client_message(client, loss, w, 2,
                                 SamplingMode::WithoutReplacementDisjoint, 0.0, batch,
                                 noise, nullptr),
                  Error);
}

TEST_CASE("client_batch_size equalizes unequal client sizes") {
  CHECK(client_batch_size(4, 100, 100) == 4);
  CHECK(client_batch_size(4, 150, 100) == 6);   // ceil(4*150/100)
  CHECK(client_batch_size(4, 101, 100) == 5);   // ceil rounds up
  CHECK(client_batch_size(100, 50, 40) == 50);  // capped at n_i
  CHECK_THROWS_AS(client_batch_size(0, 10, 10), Error);
}

TEST_CASE("dump_transcripts writes the versioned line format") {
  RoundTranscript t;
  t.round = 2;
  t.active_set = {0, 3};
  Vector m0(2), m1(2);
  m0 << 1.0, 2.0;
  m1 << -0.5, 0.25;
  t.messages = {m0, m1};
  std::ostringstream out;
  dump_transcripts({t}, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header.find("fedldp-transcript v1") != std::string::npos);
  int round = 0, client = 0, M = 0;
  double a = 0.0, b = 0.0;
  in >> round >> client >> M >> a >> b;
  CHECK(round == 2);
  CHECK(client == 0);
  CHECK(M == 2);
  CHECK(a == doctest::Approx(1.0));
  in >> round >> client >> M >> a >> b;
  CHECK(client == 3);
  CHECK(b == doctest::Approx(0.25));
}
