#ifndef FEDLDP_ORACLES_HPP
#define FEDLDP_ORACLES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedldp/algorithms.hpp"
#include "fedldp/core.hpp"
#include "fedldp/fedsim.hpp"
#include "fedldp/losses.hpp"

namespace fedldp {

/// Independent brute-force / Monte-Carlo oracles. Kept separate from the main
/// algorithms so they are never tested against themselves.

struct OracleReport {
  std::string name;
  double measured = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool one_sided = false;  // pass iff measured <= reference + tolerance
  bool pass = false;
};

OracleReport make_report(std::string name, double measured, double reference,
                         double tolerance, bool one_sided = false);

/// E||(1/M~) sum_{l in S} a_l||^2 by exhaustive enumeration of all C(N~, M~)
/// subsets; requires sum a_l = 0 and N~ <= 20.
double subset_variance_exact(const std::vector<Vector>& a, int M_tilde);

/// The matching closed form (N~-M~)/((N~-1) M~) * (1/N~) sum ||a_l||^2.
double subset_variance_formula(const std::vector<Vector>& a, int M_tilde);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  int draws = 0;
};

/// Monte-Carlo estimate of E||g~_r - grad F^(w)||^2 for the round-averaged
/// noisy message at fixed w.
McEstimate gradient_variance_mc(const FederatedDataset& fed, const LossSpec& loss,
                                const Vector& w, int K, double sigma_sq,
                                const AvailabilityModel& availability, int draws,
                                std::uint64_t seed);

/// The variance lemma's bound evaluated at w: min{Phi^2/(M'K), phi_max^2/(MK)}
/// + (1 - (M-1)/(N-1)) upsilon^2 / M + d min{Sigma^2/M', sigma_max^2/M}.
double gradient_variance_bound(const FederatedDataset& fed, const LossSpec& loss,
                               const Vector& w, int K, double sigma_sq,
                               const AvailabilityModel& availability);

/// Central differences per coordinate.
Vector finite_diff_grad(const LossSpec& loss, const Vector& w, const Sample& x, double h);

struct StabilityConfig {
  int N = 4;
  int n = 50;
  int d = 5;
  double D = 5.0;
  double eta = 0.1;
  int R = 50;
  int K = 1;
  double L = 1.0;
};

/// Coupled adjacent-dataset MB-SGD runs (shared seeds, sigma^2 = 0) against
/// the uniform-stability bound 2 L^2 R eta / (n_min M) + 3 stderr.
OracleReport stability_experiment(const StabilityConfig& config, int seed_pairs,
                                  std::uint64_t seed);

}  // namespace fedldp

#endif
