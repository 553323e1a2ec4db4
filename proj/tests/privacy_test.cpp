#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fedldp/core.hpp"
#include "fedldp/privacy.hpp"

using namespace fedldp;

// Reference values below were frozen from an independent high-precision
// (50-digit) evaluation of the calibration formulas.

TEST_CASE("gaussian_sigma_sq matches the frozen reference") {
  CHECK(gaussian_sigma_sq(1.0, 1, 1.0, 1e-5) ==
        doctest::Approx(375.5542085211020).epsilon(1e-13));
  CHECK(gaussian_sigma_sq(1.0, 2, 1.0, 1e-5) ==
        doctest::Approx(93.88855213027550).epsilon(1e-13));
  CHECK(gaussian_sigma_sq(0.0, 1, 1.0, 1e-6) == 0.0);
}

TEST_CASE("gaussian_sigma_sq enforces the eps <= 1 validity range") {
  CHECK_THROWS_WITH_AS(gaussian_sigma_sq(1.0, 1, 1.5, 1e-6),
                       doctest::Contains("eps <= 1"), Error);
  CHECK_THROWS_AS(gaussian_sigma_sq(1.0, 0, 1.0, 1e-6), Error);
  CHECK_THROWS_AS(gaussian_sigma_sq(1.0, 1, 1.0, 0.0), Error);
}

TEST_CASE("advanced_composition_split matches the frozen reference") {
  const auto [eps_t, delta_t] = advanced_composition_split(1.0, 1e-6, 100);
  CHECK(eps_t == doctest::Approx(0.009281996250077209).epsilon(1e-13));
  CHECK(delta_t == doctest::Approx(5e-9).epsilon(1e-15));
}

TEST_CASE("advanced_composition_split enforces eps0 <= 2 ln(2/delta0)") {
  // 2 ln(2/1e-6) ~ 29.03; 30 must be rejected
  CHECK_THROWS_WITH_AS(advanced_composition_split(30.0, 1e-6, 10),
                       doctest::Contains("2 ln(2/delta0)"), Error);
}

TEST_CASE("subsample_amplify formula and preconditions") {
  CHECK(subsample_amplify(0.5, 10, 100) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK_THROWS_WITH_AS(subsample_amplify(1.5, 1, 10), doctest::Contains("eps <= 1"), Error);
  CHECK_THROWS_WITH_AS(subsample_amplify(0.5, 11, 10), doctest::Contains("K <= n"), Error);
}

TEST_CASE("mbsgd_noise_plan matches the frozen reference") {
  NoisePlan plan = mbsgd_noise_plan(1.0, 1000, 1.0, 1e-6, 100);
  CHECK(plan.sigma_sq == doctest::Approx(7.182169621564737).epsilon(1e-13));
  CHECK(plan.K_min == 5);
  CHECK(plan.R == 100);
  CHECK(plan.mode == NoiseMode::MbsgdAdvancedComposition);
}

TEST_CASE("mbsgd_noise_plan sigma^2 is monotone in its arguments") {
  double prev = mbsgd_noise_plan(1.0, 100, 1.0, 1e-6, 10).sigma_sq;
  for (int n : {200, 400, 800}) {  // decreasing in n
    const double cur = mbsgd_noise_plan(1.0, n, 1.0, 1e-6, 10).sigma_sq;
    CHECK(cur < prev);
    prev = cur;
  }
  prev = mbsgd_noise_plan(1.0, 100, 0.25, 1e-6, 10).sigma_sq;
  for (double eps : {0.5, 1.0, 2.0}) {  // decreasing in eps
    const double cur = mbsgd_noise_plan(1.0, 100, eps, 1e-6, 10).sigma_sq;
    CHECK(cur < prev);
    prev = cur;
  }
  prev = mbsgd_noise_plan(1.0, 100, 1.0, 1e-6, 5).sigma_sq;
  for (int R : {10, 20, 40}) {  // increasing in R
    const double cur = mbsgd_noise_plan(1.0, 100, 1.0, 1e-6, R).sigma_sq;
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("onepass_noise_plan matches the frozen reference") {
  NoisePlan plan = onepass_noise_plan(1.0, 10, 1.0, 1e-5, 1000);
  CHECK(plan.sigma_sq == doctest::Approx(3.7555420852110202).epsilon(1e-13));
  CHECK(plan.R == 100);
  CHECK(plan.K_min == 10);
  CHECK(plan.mode == NoiseMode::OnepassParallel);
  // floor in R = n/K
  CHECK(onepass_noise_plan(1.0, 7, 1.0, 1e-5, 100).R == 14);
}

TEST_CASE("onepass_noise_plan enforces eps0 <= 8 ln(1/delta0) and n >= K") {
  // 8 ln(1/1e-5) ~ 92.1
  CHECK_THROWS_WITH_AS(onepass_noise_plan(1.0, 10, 95.0, 1e-5, 1000),
                       doctest::Contains("8 ln(1/delta0)"), Error);
  CHECK_THROWS_AS(onepass_noise_plan(1.0, 10, 1.0, 1e-5, 5), Error);
}

TEST_CASE("experiment_noise_plan matches the frozen reference") {
  const int n = 1238;
  NoisePlan plan = experiment_noise_plan(1.0, n, 12.0, 1.0 / (double(n) * n), 35);
  CHECK(plan.sigma_sq == doctest::Approx(1.8069270842019046e-5).epsilon(1e-13));
  CHECK(plan.K_min == 363);
  CHECK(plan.mode == NoiseMode::ExperimentGrade);
}

TEST_CASE("sdp_noise_plan enforces the minimum cohort size") {
  // N = M = 100, R = 10, delta = 1e-4 requires M >= 304.1
  CHECK_THROWS_WITH_AS(sdp_noise_plan(1.0, 100, 100, 100, 1.0, 1e-4, 10),
                       doctest::Contains("16 ln(18 R M^2/(N delta))"), Error);
  CHECK_NOTHROW(sdp_noise_plan(1.0, 100, 100, 400, 1.0, 1e-4, 10));
  CHECK_THROWS_WITH_AS(sdp_noise_plan(1.0, 100, 100000, 1000, 11.0, 1e-4, 10),
                       doctest::Contains("eps <= ln(2/delta)"), Error);
}

TEST_CASE("sdp_noise_plan scales linearly in its constant") {
  const double s1 = sdp_noise_plan(1.0, 100, 100000, 1000, 1.0, 1e-6, 10, 256.0).sigma_sq;
  const double s2 = sdp_noise_plan(1.0, 100, 100000, 1000, 1.0, 1e-6, 10, 512.0).sigma_sq;
  CHECK(s2 == doctest::Approx(2.0 * s1).epsilon(1e-14));
}

TEST_CASE("shuffle_amplify_round matches the frozen reference") {
  const auto [eps_r, delta_t] = shuffle_amplify_round(0.1, 0.0, 1, 10000, 1e-6);
  CHECK(eps_r == doctest::Approx(0.016292484999404682).epsilon(1e-13));
  CHECK(delta_t == doctest::Approx(1e-6).epsilon(1e-15));
}

TEST_CASE("shuffle_amplify_round enforces both validity preconditions") {
  // eps bound: ln(N/(16 ln(2/delta_r)))/n
  CHECK_THROWS_WITH_AS(shuffle_amplify_round(5.0, 0.0, 1, 10000, 1e-6),
                       doctest::Contains("ln(N/(16 ln(2/delta_r)))"), Error);
  // delta bound: algebraically the same region as the eps bound, so a tiny
  // delta_r is also rejected (via whichever check fires first)
  CHECK_THROWS_AS(shuffle_amplify_round(0.01, 0.0, 1, 100, 1e-12), Error);
}

TEST_CASE("shuffle_amplify_ledger composes per-round budgets") {
  PrivacyLedger ledger;
  const int R = 5, n = 1, N = 100000;
  ledger.rounds.assign(R, {0.05, 1e-12});
  const auto [eps, delta] = shuffle_amplify_ledger(ledger, n, N, 0.0);

  // independent recomposition from the single-round primitive
  double sum_sq = 0.0, sum_delta = 0.0;
  for (int r = 0; r < R; ++r) {
    const double delta_r = double(N) * n * 1e-12;
    const auto [e, d] = shuffle_amplify_round(0.05, 1e-12, n, N, delta_r);
    sum_sq += e * e;
    sum_delta += d;
  }
  const double eps_ref = 2.0 * sum_sq + std::sqrt(2.0 * sum_sq * std::log(1.0 / sum_delta));
  CHECK(eps == doctest::Approx(eps_ref).epsilon(1e-12));
  CHECK(delta == doctest::Approx(2.0 * sum_delta).epsilon(1e-12));
}

TEST_CASE("shuffle_amplify_ledger rejects per-round eps0 above 1/n") {
  PrivacyLedger ledger;
  ledger.rounds.assign(3, {0.05, 1e-12});
  ledger.rounds[2].eps0 = 0.3;  // above 1/n for n = 5
  CHECK_THROWS_WITH_AS(shuffle_amplify_ledger(ledger, 5, 100000, 0.0),
                       doctest::Contains("round 2"), Error);
}

TEST_CASE("compositionality_constant is the root-sum-square ratio") {
  PrivacyLedger ledger;
  ledger.rounds = {{0.3, 0.0}, {0.4, 0.0}};
  ledger.target_eps0 = 1.0;
  CHECK(compositionality_constant(ledger) == doctest::Approx(0.5).epsilon(1e-14));
  ledger.target_eps0 = 0.0;
  CHECK_THROWS_AS(compositionality_constant(ledger), Error);
}

TEST_CASE("group_privacy_userlevel matches the frozen reference") {
  const auto [eps_u, delta_u] = group_privacy_userlevel(0.1, 1e-6, 3);
  CHECK(eps_u == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(delta_u == doctest::Approx(3.6642082744805095e-6).epsilon(1e-13));
}

TEST_CASE("ledger save/load round-trips through the text format") {
  PrivacyLedger ledger;
  ledger.rounds = {{0.123456789012345, 1e-7}, {0.5, 1e-9}, {0.0, 0.0}};
  std::stringstream ss;
  save_ledger(ledger, ss);
  PrivacyLedger back = load_ledger(ss);
  REQUIRE(back.num_rounds() == 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(back.rounds[r].eps0 == ledger.rounds[r].eps0);
    CHECK(back.rounds[r].delta0 == ledger.rounds[r].delta0);
  }
}

TEST_CASE("ledger parser skips comments and reports line numbers") {
  std::stringstream ok("# header\n0.1 1e-6\n\n0.2 1e-7 # trailing note\n");
  PrivacyLedger ledger = load_ledger(ok);
  REQUIRE(ledger.num_rounds() == 2);
  CHECK(ledger.rounds[1].eps0 == doctest::Approx(0.2));

  std::stringstream bad("0.1 1e-6\n0.2\n");
  CHECK_THROWS_WITH_AS(load_ledger(bad), doctest::Contains("line 2"), Error);

  std::stringstream neg("0.1 1e-6\n-0.2 1e-6\n");
  CHECK_THROWS_WITH_AS(load_ledger(neg), doctest::Contains("line 2"), Error);

  CHECK_THROWS_WITH_AS(load_ledger_file("/nonexistent/ledger.txt"),
                       doctest::Contains("cannot open"), Error);
}

TEST_CASE("noise_mode_name covers every mode") {
  CHECK(std::string(noise_mode_name(NoiseMode::MbsgdAdvancedComposition)) ==
        "mbsgd-advanced-composition");
  CHECK(std::string(noise_mode_name(NoiseMode::OnepassParallel)) == "onepass-parallel");
  CHECK(std::string(noise_mode_name(NoiseMode::SdpShuffled)) == "sdp-shuffled");
  CHECK(std::string(noise_mode_name(NoiseMode::ExperimentGrade)) == "experiment-grade");
}
