#ifndef FEDLDP_ALGORITHMS_HPP
#define FEDLDP_ALGORITHMS_HPP

#include <cstdint>
#include <vector>

#include "fedldp/core.hpp"
#include "fedldp/fedsim.hpp"
#include "fedldp/losses.hpp"
#include "fedldp/privacy.hpp"

namespace fedldp {

/// Per-round step sizes eta_r, averaging weights gamma_r and (accelerated
/// runs only) acceleration weights alpha_r with alpha_1 = 1.
struct Schedule {
  std::vector<double> eta;
  std::vector<double> gamma;
  std::vector<double> alpha;

  int R() const { return static_cast<int>(eta.size()); }
  void validate(bool accelerated) const;
};

struct RunResult {
  Vector w_hat;
  std::vector<Vector> iterate_history;
  std::vector<RoundTranscript> transcript;
  std::vector<double> train_loss;
};

/// Shared driver knobs: start point, RNG seed, sampling mode, base batch size.
struct RunOptions {
  Vector w0;
  std::uint64_t seed = 0;
  SamplingMode mode = SamplingMode::WithReplacement;
  int K = 1;
  bool record_history = false;
};

/// Weighted empirical risk over the whole federation (scale factors applied).
double empirical_risk(const FederatedDataset& fed, const LossSpec& loss, const Vector& w);
Vector empirical_grad(const FederatedDataset& fed, const LossSpec& loss, const Vector& w);

/// Noisy LDP MB-SGD: w_{r+1} = Pi_W[w_r - eta_r g~_r], output the
/// gamma-weighted average of w_0..w_{R-1}.
RunResult mbsgd_run(const FederatedDataset& fed, const LossSpec& loss, const NoisePlan& plan,
                    const Schedule& schedule, const AvailabilityModel& availability,
                    const RunOptions& opts);

enum class ScheduleCase { ConvexSco, StronglyConvexSco, ConvexErm, StronglyConvexErm };

/// Constants feeding the theorem step-size schedules; d_psi is the product
/// d*Psi~, c and r0 the strongly-convex (Stich) recursion constants.
struct ScheduleConstants {
  double L = 1.0;
  double beta = 1.0;
  double mu = 0.0;
  double D = 1.0;
  double n_min = 1.0;
  double M_tilde = 1.0;
  double d_psi = 0.0;
  double r0 = 1.0;
  double c = 1.0;
  int R = 1;
};

Schedule mbsgd_schedule(ScheduleCase scase, const ScheduleConstants& k);

/// Constant step size of the strongly convex recursion:
/// eta = min{1/g, ln(max{2, a^2 r0 T^2 / c})/(aT)}.
double stich_stepsize(double a, double g, double r0, int T, double c);

struct AcsaState {
  Vector w;
  Vector w_ag;
  Vector w_md;
};

/// One accelerated round; the argmin over the ball has the closed form
/// Pi_D[(alpha mu w_md + ((1-alpha) mu + eta) w_prev - alpha g~)/(mu + eta)].
AcsaState acsa_round(const AcsaState& prev, const Vector& g_tilde, double alpha, double eta,
                     double mu, double D);

/// Default accelerated schedule: alpha_r = 2/(r+1), eta_r = 4 upsilon/(r(r+1)).
Schedule acsa_schedule(int R, double upsilon);

/// Noisy Accelerated MB-SGD; if regularizer_lambda > 0 the run optimizes
/// F^ + (lambda/2)||w - w0||^2 with the round mu set to lambda. Output w_R^ag.
RunResult acsa_run(const FederatedDataset& fed, const LossSpec& loss, const NoisePlan& plan,
                   const Schedule& schedule, double regularizer_lambda, double mu,
                   const AvailabilityModel& availability, const RunOptions& opts);

/// Regularization weight lambda = V/(2 D sqrt(R)) for the convex case.
double acsa_regularizer(double V, double D, int R);

struct MultistageResult {
  RunResult run;
  std::vector<int> stage_rounds;
  std::vector<Vector> stage_outputs;
};

/// Multi-stage accelerated runs with geometric target halving; stages run
/// while the cumulative round count stays within R_budget.
MultistageResult multistage_acsa(const FederatedDataset& fed, const LossSpec& loss,
                                 const NoisePlan& plan, double Delta, double V_sq, double mu,
                                 double beta, int R_budget,
                                 const AvailabilityModel& availability,
                                 const RunOptions& opts);

/// One-pass accelerated run: disjoint batches of K, R = floor(n/K), noise from
/// onepass_noise_plan; also returns the (constant per-round) privacy ledger.
RunResult onepass_run(const FederatedDataset& fed, const LossSpec& loss, double eps0,
                      double delta0, int K, const AvailabilityModel& availability,
                      const RunOptions& opts, PrivacyLedger* ledger_out = nullptr);

/// FedAvg-style baseline: each active client takes local_steps noisy projected
/// SGD steps from w_r; the server averages the returned iterates.
RunResult local_sgd_run(const FederatedDataset& fed, const LossSpec& loss,
                        const NoisePlan& plan, int local_steps, double eta, int R,
                        const AvailabilityModel& availability, const RunOptions& opts);

enum class RoundCountTheorem { Thm21Convex, Thm21StronglyConvex };

/// Constants for round_count; named after the theorem formula symbols.
struct RoundCountConstants {
  double L = 1.0;
  double beta = 1.0;
  double mu = 0.0;
  double D = 1.0;
  double M = 1.0;
  double n = 1.0;
  double d = 1.0;
  double eps0 = 1.0;
  double K = 1.0;
};

int round_count(RoundCountTheorem theorem, const RoundCountConstants& k);

}  // namespace fedldp

#endif
