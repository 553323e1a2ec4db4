#ifndef FEDLDP_PRIVACY_HPP
#define FEDLDP_PRIVACY_HPP

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace fedldp {

/// Per-round randomizer budgets plus the target total budget; the basis for
/// compositionality audits and shuffle amplification.
struct PrivacyLedger {
  struct Round {
    double eps0 = 0.0;
    double delta0 = 0.0;
  };
  std::vector<Round> rounds;
  double target_eps0 = 0.0;
  double target_delta0 = 0.0;

  int num_rounds() const { return static_cast<int>(rounds.size()); }
};

enum class NoiseMode {
  MbsgdAdvancedComposition,
  OnepassParallel,
  SdpShuffled,
  ExperimentGrade,
};

struct NoisePlan {
  double sigma_sq = 0.0;
  int K_min = 1;
  int R = 1;
  NoiseMode mode = NoiseMode::MbsgdAdvancedComposition;
};

const char* noise_mode_name(NoiseMode mode);

/// Variance making one batch-gradient release (eps, delta)-DP at L2
/// sensitivity 2L/K: 32 L^2 ln(1.25/delta) / (eps^2 K^2). Requires eps <= 1.
double gaussian_sigma_sq(double L, int K, double eps, double delta);

/// Splits a total (eps0, delta0) budget over R rounds so that advanced
/// composition recovers at most (eps0, delta0).
std::pair<double, double> advanced_composition_split(double eps0, double delta0, int R);

/// Budget after uniform with-replacement subsampling of K from n: 2 eps K / n.
double subsample_amplify(double eps, int K, int n);

NoisePlan mbsgd_noise_plan(double L, int n, double eps0, double delta0, int R);
NoisePlan onepass_noise_plan(double L, int K, double eps0, double delta0, int n);
NoisePlan experiment_noise_plan(double L, int n, double eps, double delta, int R);

/// Default absolute constant for the shuffled-DP calibration; the theory
/// leaves it unspecified, so only the scaling is meaningful.
constexpr double kDefaultSdpConstant = 256.0;

NoisePlan sdp_noise_plan(double L, int n, int N, int M, double eps, double delta, int R,
                         double C_const = kDefaultSdpConstant);

/// Single-round amplification by shuffling: returns (eps_r, delta_tilde_r).
std::pair<double, double> shuffle_amplify_round(double eps0_r, double delta0_r, int n,
                                                int N, double delta_r);

/// Composes per-round shuffled budgets via advanced composition with slack
/// delta_prime (default: half the summed per-round delta budget).
std::pair<double, double> shuffle_amplify_ledger(const PrivacyLedger& ledger, int n, int N,
                                                 double delta_prime);

/// Minimal C with sqrt(sum (eps0_r)^2) <= C * target_eps0.
double compositionality_constant(const PrivacyLedger& ledger);

/// Group-privacy conversion from item-level to user-level DP:
/// (n eps0, n e^{(n-1) eps0} delta0).
std::pair<double, double> group_privacy_userlevel(double eps0, double delta0, int n);

/// Line-oriented ledger file: one "eps0 delta0" pair per line, '#' comments.
PrivacyLedger load_ledger(std::istream& in);
PrivacyLedger load_ledger_file(const std::string& path);
void save_ledger(const PrivacyLedger& ledger, std::ostream& out);

}  // namespace fedldp

#endif
