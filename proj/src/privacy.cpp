#include "fedldp/privacy.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fedldp/core.hpp"

namespace fedldp {
namespace {

void check_eps_delta(double eps, double delta, const char* where) {
  if (eps < 0.0) throw Error(std::string(where) + ": eps must be non-negative");
  if (delta <= 0.0 || delta >= 1.0) throw Error(std::string(where) + ": delta must be in (0,1)");
}

}  // namespace

const char* noise_mode_name(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::MbsgdAdvancedComposition:
      return "mbsgd-advanced-composition";
    case NoiseMode::OnepassParallel:
      return "onepass-parallel";
    case NoiseMode::SdpShuffled:
      return "sdp-shuffled";
    case NoiseMode::ExperimentGrade:
      return "experiment-grade";
  }
  return "unknown";
}

double gaussian_sigma_sq(double L, int K, double eps, double delta) {
  if (L < 0.0) throw Error("gaussian_sigma_sq: L must be non-negative");
  if (K < 1) throw Error("gaussian_sigma_sq: K must be >= 1");
  check_eps_delta(eps, delta, "gaussian_sigma_sq");
  if (eps == 0.0) throw Error("gaussian_sigma_sq: eps must be positive");
  if (eps > 1.0) throw Error("gaussian_sigma_sq: inner eps exceeds Gaussian-mechanism range (requires eps <= 1)");
  if (L == 0.0) return 0.0;
  const double K_d = static_cast<double>(K);
  return 32.0 * L * L * std::log(1.25 / delta) / (eps * eps * K_d * K_d);
}

std::pair<double, double> advanced_composition_split(double eps0, double delta0, int R) {
  check_eps_delta(eps0, delta0, "advanced_composition_split");
  if (R < 1) throw Error("advanced_composition_split: R must be >= 1");
  const double bound = 2.0 * std::log(2.0 / delta0);
  if (eps0 > bound) {
    throw Error("advanced_composition_split: violated eps0 <= 2 ln(2/delta0)");
  }
  const double eps_tilde = eps0 / (2.0 * std::sqrt(2.0 * R * std::log(2.0 / delta0)));
  const double delta_tilde = delta0 / (2.0 * R);
  return {eps_tilde, delta_tilde};
}

double subsample_amplify(double eps, int K, int n) {
  if (eps < 0.0) throw Error("subsample_amplify: eps must be non-negative");
  if (eps > 1.0) throw Error("subsample_amplify: violated eps <= 1 (validity range of the amplification bound)");
  if (K < 1) throw Error("subsample_amplify: K must be >= 1");
  if (K > n) throw Error("subsample_amplify: violated K <= n");
  return 2.0 * eps * static_cast<double>(K) / static_cast<double>(n);
}

NoisePlan mbsgd_noise_plan(double L, int n, double eps0, double delta0, int R) {
  if (L < 0.0) throw Error("mbsgd_noise_plan: L must be non-negative");
  if (n < 1) throw Error("mbsgd_noise_plan: n must be >= 1");
  check_eps_delta(eps0, delta0, "mbsgd_noise_plan");
  if (eps0 == 0.0) throw Error("mbsgd_noise_plan: eps0 must be positive");
  if (R < 1) throw Error("mbsgd_noise_plan: R must be >= 1");
  if (eps0 > 2.0 * std::log(2.0 / delta0)) {
    throw Error("mbsgd_noise_plan: violated eps0 <= 2 ln(2/delta0)");
  }
  const double n_d = static_cast<double>(n);
  const double R_d = static_cast<double>(R);
  NoisePlan plan;
  plan.mode = NoiseMode::MbsgdAdvancedComposition;
  plan.R = R;
  plan.sigma_sq = 256.0 * L * L * R_d * std::log(2.5 * R_d / delta0) * std::log(2.0 / delta0) /
                  (n_d * n_d * eps0 * eps0);
  const double k_raw = eps0 * n_d / (4.0 * std::sqrt(2.0 * R_d * std::log(2.0 / delta0)));
  plan.K_min = std::max(1, static_cast<int>(std::ceil(k_raw)));
  return plan;
}

NoisePlan onepass_noise_plan(double L, int K, double eps0, double delta0, int n) {
  if (L < 0.0) throw Error("onepass_noise_plan: L must be non-negative");
  if (K < 1) throw Error("onepass_noise_plan: K must be >= 1");
  if (n < K) throw Error("onepass_noise_plan: need n >= K for at least one disjoint batch");
  check_eps_delta(eps0, delta0, "onepass_noise_plan");
  if (eps0 == 0.0) throw Error("onepass_noise_plan: eps0 must be positive");
  if (eps0 > 8.0 * std::log(1.0 / delta0)) {
    throw Error("onepass_noise_plan: violated eps0 <= 8 ln(1/delta0)");
  }
  const double K_d = static_cast<double>(K);
  NoisePlan plan;
  plan.mode = NoiseMode::OnepassParallel;
  plan.R = n / K;
  plan.K_min = K;
  plan.sigma_sq = 32.0 * L * L * std::log(1.25 / delta0) / (eps0 * eps0 * K_d * K_d);
  return plan;
}

NoisePlan experiment_noise_plan(double L, int n, double eps, double delta, int R) {
  if (L < 0.0) throw Error("experiment_noise_plan: L must be non-negative");
  if (n < 1) throw Error("experiment_noise_plan: n must be >= 1");
  check_eps_delta(eps, delta, "experiment_noise_plan");
  if (eps == 0.0) throw Error("experiment_noise_plan: eps must be positive");
  if (R < 1) throw Error("experiment_noise_plan: R must be >= 1");
  const double n_d = static_cast<double>(n);
  const double R_d = static_cast<double>(R);
  const double k_raw = n_d * std::sqrt(eps) / (2.0 * std::sqrt(R_d));
  if (k_raw < 1.0) throw Error("experiment_noise_plan: n too small for this (eps, R)");
  NoisePlan plan;
  plan.mode = NoiseMode::ExperimentGrade;
  plan.R = R;
  plan.sigma_sq = 8.0 * L * L * std::log(1.0 / delta) * R_d / (n_d * n_d * eps * eps);
  plan.K_min = static_cast<int>(std::ceil(k_raw));
  return plan;
}

NoisePlan sdp_noise_plan(double L, int n, int N, int M, double eps, double delta, int R,
                         double C_const) {
  if (L < 0.0) throw Error("sdp_noise_plan: L must be non-negative");
  if (n < 1 || N < 1 || M < 1) throw Error("sdp_noise_plan: n, N, M must be >= 1");
  check_eps_delta(eps, delta, "sdp_noise_plan");
  if (eps == 0.0) throw Error("sdp_noise_plan: eps must be positive");
  if (R < 1) throw Error("sdp_noise_plan: R must be >= 1");
  if (C_const <= 0.0) throw Error("sdp_noise_plan: C_const must be positive");
  if (eps > std::log(2.0 / delta)) {
    throw Error("sdp_noise_plan: violated eps <= ln(2/delta)");
  }
  const double n_d = n, N_d = N, M_d = M, R_d = R;
  const double m_bound = 16.0 * std::log(18.0 * R_d * M_d * M_d / (N_d * delta));
  if (M_d < m_bound) {
    std::ostringstream os;
    os << "sdp_noise_plan: violated M >= 16 ln(18 R M^2/(N delta)) (need M >= " << m_bound << ")";
    throw Error(os.str());
  }
  NoisePlan plan;
  plan.mode = NoiseMode::SdpShuffled;
  plan.R = R;
  plan.sigma_sq = C_const * L * L * R_d * M_d * std::log(R_d * M_d * M_d / (N_d * delta)) *
                  std::log(R_d / delta) * std::log(1.0 / delta) /
                  (n_d * n_d * N_d * N_d * eps * eps);
  return plan;
}

std::pair<double, double> shuffle_amplify_round(double eps0_r, double delta0_r, int n,
                                                int N, double delta_r) {
  if (eps0_r < 0.0) throw Error("shuffle_amplify_round: eps0_r must be non-negative");
  if (delta0_r < 0.0 || delta0_r >= 1.0) throw Error("shuffle_amplify_round: delta0_r must be in [0,1)");
  if (n < 1 || N < 1) throw Error("shuffle_amplify_round: n, N must be >= 1");
  if (delta_r <= 0.0 || delta_r >= 1.0) throw Error("shuffle_amplify_round: delta_r must be in (0,1)");
  const double n_d = n, N_d = N;
  const double eps_bound = std::log(N_d / (16.0 * std::log(2.0 / delta_r))) / n_d;
  if (eps0_r > eps_bound) {
    std::ostringstream os;
    os << "shuffle_amplify_round: violated eps0_r <= ln(N/(16 ln(2/delta_r)))/n (max "
       << eps_bound << ")";
    throw Error(os.str());
  }
  const double delta_bound = 2.0 * std::exp(-N_d * std::exp(-n_d * eps0_r) / 16.0);
  if (delta_r < delta_bound) {
    std::ostringstream os;
    os << "shuffle_amplify_round: violated delta_r >= 2 exp(-N e^{-n eps0_r}/16) (min "
       << delta_bound << ")";
    throw Error(os.str());
  }
  // ln(1 + x) evaluated via log1p; the leading factor (e^eps0 - 1)/(e^eps0 + 1)
  // uses expm1 so the result degrades gracefully as eps0_r -> 0.
  const double ratio = std::expm1(eps0_r) / (std::exp(eps0_r) + 1.0);
  const double boost = std::exp(n_d * eps0_r);
  const double x = ratio * (8.0 * std::sqrt(boost * std::log(4.0 / delta_r)) / std::sqrt(N_d) +
                            8.0 * boost / N_d);
  const double eps_r = std::log1p(x);
  const double delta_tilde =
      delta_r + 2.0 * N_d * n_d * std::exp((n_d - 1.0) * eps0_r) * delta0_r;
  return {eps_r, delta_tilde};
}

std::pair<double, double> shuffle_amplify_ledger(const PrivacyLedger& ledger, int n, int N,
                                                 double delta_prime) {
  if (n < 1 || N < 1) throw Error("shuffle_amplify_ledger: n, N must be >= 1");
  const double n_d = n, N_d = N;
  double sum_sq = 0.0;
  double sum_delta = 0.0;
  for (int r = 0; r < ledger.num_rounds(); ++r) {
    const auto& round = ledger.rounds[r];
    if (round.eps0 > 1.0 / n_d) {
      std::ostringstream os;
      os << "shuffle_amplify_ledger: round " << r << " violated eps0_r <= 1/n";
      throw Error(os.str());
    }
    const double delta_r = N_d * n_d * round.delta0;
    try {
      auto [eps_r, delta_tilde_r] = shuffle_amplify_round(round.eps0, round.delta0, n, N, delta_r);
      sum_sq += eps_r * eps_r;
      sum_delta += delta_tilde_r;
    } catch (const Error& e) {
      std::ostringstream os;
      os << "shuffle_amplify_ledger: round " << r << ": " << e.what();
      throw Error(os.str());
    }
  }
  // The slack split is free; by default give the advanced-composition slack the
  // same share as the per-round deltas, i.e. half the total delta budget.
  if (delta_prime <= 0.0) delta_prime = sum_delta > 0.0 ? sum_delta : 1e-12;
  if (delta_prime >= 1.0) throw Error("shuffle_amplify_ledger: delta_prime must be in (0,1)");
  const double eps = 2.0 * sum_sq + std::sqrt(2.0 * sum_sq * std::log(1.0 / delta_prime));
  return {eps, delta_prime + sum_delta};
}

double compositionality_constant(const PrivacyLedger& ledger) {
  if (ledger.target_eps0 <= 0.0) {
    throw Error("compositionality_constant: target_eps0 must be positive");
  }
  double sum_sq = 0.0;
  for (const auto& round : ledger.rounds) sum_sq += round.eps0 * round.eps0;
  return std::sqrt(sum_sq) / ledger.target_eps0;
}

std::pair<double, double> group_privacy_userlevel(double eps0, double delta0, int n) {
  if (n < 1) throw Error("group_privacy_userlevel: n must be >= 1");
  if (eps0 < 0.0) throw Error("group_privacy_userlevel: eps0 must be non-negative");
  const double n_d = n;
  return {n_d * eps0, n_d * std::exp((n_d - 1.0) * eps0) * delta0};
}

PrivacyLedger load_ledger(std::istream& in) {
  PrivacyLedger ledger;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    double eps0 = 0.0, delta0 = 0.0;
    if (!(fields >> eps0)) continue;  // blank or comment-only line
    if (!(fields >> delta0)) {
      std::ostringstream os;
      os << "ledger line " << lineno << ": expected 'eps0 delta0'";
      throw Error(os.str());
    }
    if (eps0 < 0.0 || delta0 < 0.0 || delta0 >= 1.0) {
      std::ostringstream os;
      os << "ledger line " << lineno << ": eps0 must be >= 0 and delta0 in [0,1)";
      throw Error(os.str());
    }
    ledger.rounds.push_back({eps0, delta0});
  }
  return ledger;
}

PrivacyLedger load_ledger_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ledger file: " + path);
  return load_ledger(in);
}

void save_ledger(const PrivacyLedger& ledger, std::ostream& out) {
  out << "# per-round randomizer budgets: eps0_r delta0_r\n";
  out.precision(17);
  for (const auto& round : ledger.rounds) {
    out << round.eps0 << ' ' << round.delta0 << '\n';
  }
}

}  // namespace fedldp
