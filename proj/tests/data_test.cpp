#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "fedldp/core.hpp"
#include "fedldp/data.hpp"
#include "fedldp/rng.hpp"

using namespace fedldp;

namespace {

std::vector<std::uint8_t> idx_image_bytes(int count, int rows, int cols) {
  std::vector<std::uint8_t> b;
  auto be32 = [&](std::uint32_t v) {
    b.push_back(std::uint8_t(v >> 24));
    b.push_back(std::uint8_t(v >> 16));
    b.push_back(std::uint8_t(v >> 8));
    b.push_back(std::uint8_t(v));
  };
  be32(0x803);
  be32(std::uint32_t(count));
  be32(std::uint32_t(rows));
  be32(std::uint32_t(cols));
  for (int i = 0; i < count * rows * cols; ++i) b.push_back(std::uint8_t(i & 0xFF));
  return b;
}

std::vector<std::uint8_t> idx_label_bytes(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> b;
  auto be32 = [&](std::uint32_t v) {
    b.push_back(std::uint8_t(v >> 24));
    b.push_back(std::uint8_t(v >> 16));
    b.push_back(std::uint8_t(v >> 8));
    b.push_back(std::uint8_t(v));
  };
  be32(0x801);
  be32(std::uint32_t(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

}  // namespace

TEST_CASE("parse_idx_images reads the big-endian container") {
  auto bytes = idx_image_bytes(2, 3, 4);
  RawImageSet set = parse_idx_images(bytes);
  CHECK(set.count == 2);
  CHECK(set.rows == 3);
  CHECK(set.cols == 4);
  REQUIRE(set.pixels.size() == 24);
  CHECK(set.pixels[0] == 0);
  CHECK(set.pixels[23] == 23);
}

TEST_CASE("idx parsers reject wrong magic and truncation with byte offsets") {
  auto bytes = idx_image_bytes(2, 3, 4);
  auto bad_magic = bytes;
  bad_magic[3] = 0x01;  // labels magic in an image parse
  CHECK_THROWS_WITH_AS(parse_idx_images(bad_magic), doctest::Contains("wrong magic"),
                       Error);
  auto truncated = bytes;
  truncated.resize(20);
  CHECK_THROWS_WITH_AS(parse_idx_images(truncated), doctest::Contains("truncated"), Error);
  std::vector<std::uint8_t> tiny = {0x00, 0x00};
  CHECK_THROWS_WITH_AS(parse_idx_images(tiny), doctest::Contains("byte offset 0"), Error);

  auto labels = idx_label_bytes({1, 2, 3});
  CHECK(parse_idx_labels(labels) == std::vector<std::uint8_t>({1, 2, 3}));
  labels.pop_back();
  CHECK_THROWS_WITH_AS(parse_idx_labels(labels), doctest::Contains("truncated"), Error);
  CHECK_THROWS_AS(read_file_bytes("/nonexistent/images.idx"), Error);
}

TEST_CASE("pca_reduce recovers a planted low-rank subspace") {
  // data = scores * axes with two dominant directions plus small noise
  const int n = 400, d = 6;
  Matrix data(n, d);
  RngStream rng(71, 0, 0, rng_purpose::kOracle);
  Vector axis1 = Vector::Zero(d), axis2 = Vector::Zero(d);
  axis1[0] = 1.0;
  axis2[2] = 1.0;
  for (int i = 0; i < n; ++i) {
    const double s1 = 5.0 * rng.normal();
    const double s2 = 2.0 * rng.normal();
    for (int j = 0; j < d; ++j) {
      data(i, j) = s1 * axis1[j] + s2 * axis2[j] + 0.01 * rng.normal() + 3.0;
    }
  }
  PcaResult pca = pca_reduce(data, 2);
  CHECK(pca.eigenvalues[0] > pca.eigenvalues[1]);
  CHECK(pca.eigenvalues[0] == doctest::Approx(25.0).epsilon(0.2));
  CHECK(pca.eigenvalues[1] == doctest::Approx(4.0).epsilon(0.2));
  // top directions align with the planted axes (sign convention: positive)
  CHECK(std::abs(pca.basis.col(0).dot(axis1)) > 0.999);
  CHECK(std::abs(pca.basis.col(1).dot(axis2)) > 0.999);
  CHECK(pca.basis.col(0)[0] > 0.0);
  // projected data is centered
  CHECK(std::abs(pca.projected.col(0).mean()) < 1e-10);
  CHECK_THROWS_AS(pca_reduce(data, 0), Error);
  CHECK_THROWS_AS(pca_reduce(data, 7), Error);
}

TEST_CASE("partition_mnist_pairs builds 25 odd/even clients with 80/20 splits") {
  // synthetic 'digits': 40 samples per digit, feature = digit identity
  const int per_digit = 40;
  Matrix features(10 * per_digit, 2);
  std::vector<std::uint8_t> labels;
  for (int d = 0; d < 10; ++d) {
    for (int k = 0; k < per_digit; ++k) {
      features(labels.size(), 0) = d;
      features(labels.size(), 1) = k;
      labels.push_back(std::uint8_t(d));
    }
  }
  SplitFederation split =
      partition_mnist_pairs(features, labels, MnistPartition::Pairs, 1.0, 5);
  REQUIRE(split.train.num_clients() == 25);
  REQUIRE(split.test.size() == 25);
  for (int c = 0; c < 25; ++c) {
    CHECK(split.train.clients[c].n() == 64);  // 0.8 * 80
    CHECK(static_cast<int>(split.test[c].samples.size()) == 16);
    // every sample in the pairs mode belongs to the client's two digits,
    // and the +-1 label matches parity
    const int a = 2 * (c / 5) + 1;  // odd digit
    const int b = 2 * (c % 5);      // even digit
    for (const auto& s : split.train.clients[c].samples) {
      const int digit = static_cast<int>(s.x[0]);
      CHECK((digit == a || digit == b));
      CHECK(s.y == (digit % 2 == 1 ? 1.0 : -1.0));
    }
  }
  CHECK(split.train.weights[0] == doctest::Approx(1.0 / 25.0));

  // shuffled mode keeps the sizes but mixes digits across clients
  SplitFederation mixed =
      partition_mnist_pairs(features, labels, MnistPartition::Shuffled, 1.0, 5);
  CHECK(mixed.train.clients[0].n() == 64);
  int foreign = 0;
  for (const auto& s : mixed.train.clients[0].samples) {
    const int digit = static_cast<int>(s.x[0]);
    if (digit != 1 && digit != 0) ++foreign;
  }
  CHECK(foreign > 0);

  // subsampling shrinks clients deterministically
  SplitFederation sub =
      partition_mnist_pairs(features, labels, MnistPartition::Pairs, 0.5, 5);
  CHECK(sub.train.clients[0].n() == 32);
  SplitFederation sub2 =
      partition_mnist_pairs(features, labels, MnistPartition::Pairs, 0.5, 5);
  CHECK((sub.train.clients[3].samples[0].x - sub2.train.clients[3].samples[0].x).norm() ==
        0.0);
}

TEST_CASE("partition_by_target sorts and groups (1338 rows, 5 clients)") {
  const int rows = 1338;
  TabularSet tab;
  tab.rows.resize(rows, 2);
  tab.target.resize(rows);
  RngStream rng(83, 0, 0, rng_purpose::kOracle);
  for (int i = 0; i < rows; ++i) {
    tab.rows(i, 0) = rng.normal();
    tab.rows(i, 1) = rng.normal();
    tab.target[i] = rng.normal();
  }
  FederatedDataset fed = partition_by_target(tab, 5);
  REQUIRE(fed.num_clients() == 5);
  for (int c = 0; c < 4; ++c) CHECK(fed.clients[c].n() == 268);
  CHECK(fed.clients[4].n() == 266);
  // group targets are ascending across clients
  double prev_max = -1e300;
  for (const auto& c : fed.clients) {
    double lo = 1e300, hi = -1e300;
    for (const auto& s : c.samples) {
      lo = std::min(lo, s.y);
      hi = std::max(hi, s.y);
    }
    CHECK(lo >= prev_max);
    prev_max = hi;
  }
  CHECK_THROWS_AS(partition_by_target(tab, 0), Error);
}

TEST_CASE("estimate_hetero recovers the two-client 1-D dispersion") {
  // client gradients at the pooled minimizer 0 are -1 and +1: upsilon*^2 = 1
  FederatedDataset fed;
  fed.dim = 1;
  for (double center : {1.0, -1.0}) {
    ClientDataset c;
    for (int k = 0; k < 5; ++k) {
      Sample s;
      s.x = Vector::Constant(1, center);
      c.samples.push_back(s);
    }
    fed.clients.push_back(c);
  }
  fed.weights = {0.5, 0.5};
  LossSpec loss;
  loss.family = LossFamily::Quadratic;
  loss.L = 4.0;
  loss.D = 2.0;
  const auto [star_sq, sup_sq] = estimate_hetero(fed, loss, 1);
  CHECK(star_sq == doctest::Approx(1.0).epsilon(1e-10));
  // quadratic client gradients differ by a constant: sup equals the value at w*
  CHECK(sup_sq == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("standardize uses train-rows statistics only") {
  TabularSet tab;
  tab.rows.resize(4, 2);
  tab.rows << 1.0, 10.0, 3.0, 10.0, 5.0, 10.0, 100.0, 10.0;
  tab.target.resize(4);
  tab.target.setZero();
  TabularSet out = standardize(tab, {0}, 3);
  // train stats from rows 0..2: mean 3, population var 8/3
  const double sd = std::sqrt(8.0 / 3.0);
  CHECK(out.rows(0, 0) == doctest::Approx(-2.0 / sd).epsilon(1e-12));
  CHECK(out.rows(3, 0) == doctest::Approx(97.0 / sd).epsilon(1e-12));
  CHECK(out.rows(0, 1) == doctest::Approx(10.0));  // untouched column
  CHECK_THROWS_WITH_AS(standardize(tab, {1}, 3), doctest::Contains("zero variance"),
                       Error);
  CHECK_THROWS_AS(standardize(tab, {0}, 1), Error);
  CHECK_THROWS_AS(standardize(tab, {5}, 3), Error);
}

TEST_CASE("append_bias_column appends ones") {
  TabularSet tab;
  tab.rows.resize(2, 1);
  tab.rows << 3.0, 4.0;
  tab.target.resize(2);
  tab.target.setZero();
  tab.feature_names = {"a"};
  TabularSet out = append_bias_column(tab);
  CHECK(out.rows.cols() == 2);
  CHECK(out.rows(0, 1) == 1.0);
  CHECK(out.rows(1, 1) == 1.0);
  CHECK(out.feature_names.back() == "bias");
}

TEST_CASE("make_synthetic_quadratic is deterministic and well-formed") {
  FederatedDataset a = make_synthetic_quadratic(3, 10, 4, 0.5, 42);
  FederatedDataset b = make_synthetic_quadratic(3, 10, 4, 0.5, 42);
  CHECK_NOTHROW(a.validate());
  CHECK(a.num_clients() == 3);
  CHECK(a.n_min() == 10);
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 10; ++k) {
      CHECK((a.clients[i].samples[k].x - b.clients[i].samples[k].x).norm() == 0.0);
    }
  }
  FederatedDataset c = make_synthetic_quadratic(3, 10, 4, 0.5, 43);
  CHECK((a.clients[0].samples[0].x - c.clients[0].samples[0].x).norm() > 0.0);
  CHECK_THROWS_AS(make_synthetic_quadratic(0, 10, 4, 0.5, 1), Error);
}
