#include "fedldp/algorithms.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace fedldp {
namespace {

constexpr std::uint64_t kServerStream = 0xFFFFFFFFULL;

Vector acsa_md(const AcsaState& prev, double alpha, double eta, double mu) {
  const double denom = eta + (1.0 - alpha * alpha) * mu;
  if (denom <= 1e-300) throw Error("acsa_round: denominator underflow in w_md");
  return ((1.0 - alpha) * (mu + eta) / denom) * prev.w_ag +
         (alpha * ((1.0 - alpha) * mu + eta) / denom) * prev.w;
}

struct ClientRuntime {
  std::map<int, OnePassState> onepass;

  OnePassState* state_for(int i, const FederatedDataset& fed, SamplingMode mode,
                          std::uint64_t seed) {
    if (mode != SamplingMode::WithoutReplacementDisjoint) return nullptr;
    auto it = onepass.find(i);
    if (it == onepass.end()) {
      RngStream order_rng(seed, static_cast<std::uint64_t>(i), 0, rng_purpose::kDataOrder);
      it = onepass.emplace(i, OnePassState::Shuffled(fed.clients[i].n(), order_rng)).first;
    }
    return &it->second;
  }
};

/// Gathers the round's active set and aggregated noisy gradient at `w_query`,
/// appending the transcript record.
Vector gather_round(const FederatedDataset& fed, const LossSpec& loss, const NoisePlan& plan,
                    const AvailabilityModel& availability, const Vector& w_query, int r,
                    const RunOptions& opts, ClientRuntime& runtime,
                    std::vector<RoundTranscript>& transcripts) {
  RngStream avail_rng(opts.seed, kServerStream, static_cast<std::uint64_t>(r),
                      rng_purpose::kAvailability);
  RoundTranscript t;
  t.round = r;
  t.active_set = sample_round(avail_rng, availability, fed.num_clients());
  const int n_min = fed.n_min();
  Vector acc = Vector::Zero(fed.dim);
  for (int i : t.active_set) {
    const int K_i = client_batch_size(opts.K, fed.clients[i].n(), n_min);
    RngStream batch_rng(opts.seed, static_cast<std::uint64_t>(i),
                        static_cast<std::uint64_t>(r), rng_purpose::kMinibatch);
    RngStream noise_rng(opts.seed, static_cast<std::uint64_t>(i),
                        static_cast<std::uint64_t>(r), rng_purpose::kNoise);
    Vector msg = client_message(fed.clients[i], loss, w_query, K_i, opts.mode, plan.sigma_sq,
                                batch_rng, noise_rng,
                                runtime.state_for(i, fed, opts.mode, opts.seed));
    acc += msg;
    t.messages.push_back(std::move(msg));
  }
  const double M_r = static_cast<double>(t.active_count());
  transcripts.push_back(std::move(t));
  return acc / M_r;
}

}  // namespace

void Schedule::validate(bool accelerated) const {
  const int rounds = R();
  if (static_cast<int>(gamma.size()) != rounds && !accelerated) {
    throw Error("Schedule: gamma length must equal R");
  }
  double gamma_sum = 0.0;
  for (double g : gamma) {
    if (g < 0.0) throw Error("Schedule: gamma_r must be non-negative");
    gamma_sum += g;
  }
  if (!accelerated && rounds > 0 && gamma_sum <= 0.0) {
    throw Error("Schedule: Gamma_R must be positive");
  }
  for (double e : eta) {
    if (e <= 0.0) throw Error("Schedule: eta_r must be positive");
  }
  if (accelerated) {
    if (static_cast<int>(alpha.size()) != rounds) {
      throw Error("Schedule: alpha length must equal R");
    }
    if (rounds > 0 && alpha[0] != 1.0) throw Error("Schedule: alpha_1 must be 1");
    for (int r = 1; r < rounds; ++r) {
      if (alpha[r] <= 0.0 || alpha[r] >= 1.0) {
        throw Error("Schedule: alpha_r must lie in (0,1) for r >= 2");
      }
    }
  }
}

double empirical_risk(const FederatedDataset& fed, const LossSpec& loss, const Vector& w) {
  double total = 0.0;
  for (int i = 0; i < fed.num_clients(); ++i) {
    const auto& c = fed.clients[i];
    double client = 0.0;
    for (const auto& s : c.samples) client += loss_value(loss, w, s);
    total += fed.weights[i] * c.scale * client / static_cast<double>(c.n());
  }
  return total;
}

Vector empirical_grad(const FederatedDataset& fed, const LossSpec& loss, const Vector& w) {
  Vector total = Vector::Zero(w.size());
  for (int i = 0; i < fed.num_clients(); ++i) {
    const auto& c = fed.clients[i];
    Vector client = Vector::Zero(w.size());
    for (const auto& s : c.samples) client += grad(loss, w, s).grad;
    total += (fed.weights[i] * c.scale / static_cast<double>(c.n())) * client;
  }
  return total;
}

RunResult mbsgd_run(const FederatedDataset& fed, const LossSpec& loss, const NoisePlan& plan,
                    const Schedule& schedule, const AvailabilityModel& availability,
                    const RunOptions& opts) {
  fed.validate();
  schedule.validate(false);
  const int R = schedule.R();
  ClientRuntime runtime;
  RunResult out;
  Vector w = project_ball(opts.w0, loss.D);
  Vector w_hat_acc = Vector::Zero(fed.dim);
  double gamma_sum = 0.0;
  if (opts.record_history) out.iterate_history.push_back(w);
  for (int r = 0; r < R; ++r) {
    w_hat_acc += schedule.gamma[r] * w;
    gamma_sum += schedule.gamma[r];
    Vector g = gather_round(fed, loss, plan, availability, w, r, opts, runtime, out.transcript);
    w = project_ball(w - schedule.eta[r] * g, loss.D);
    if (opts.record_history) out.iterate_history.push_back(w);
    out.train_loss.push_back(empirical_risk(fed, loss, w));
  }
  out.w_hat = R == 0 ? w : Vector(w_hat_acc / gamma_sum);
  return out;
}

double stich_stepsize(double a, double g, double r0, int T, double c) {
  if (a <= 0.0 || g <= 0.0 || c <= 0.0 || T < 1) {
    throw Error("stich_stepsize: a, g, c must be positive and T >= 1");
  }
  const double T_d = static_cast<double>(T);
  const double arg = std::max(2.0, a * a * r0 * T_d * T_d / c);
  return std::min(1.0 / g, std::log(arg) / (a * T_d));
}

Schedule mbsgd_schedule(ScheduleCase scase, const ScheduleConstants& k) {
  if (k.R < 1) throw Error("mbsgd_schedule: R must be >= 1");
  Schedule s;
  switch (scase) {
    case ScheduleCase::ConvexSco:
    case ScheduleCase::ConvexErm: {
      if (k.L <= 0.0 || k.beta <= 0.0 || k.D <= 0.0 || k.M_tilde <= 0.0 || k.n_min <= 0.0) {
        throw Error("mbsgd_schedule: missing constants (L, beta, D, M_tilde, n_min)");
      }
      const double alt = k.d_psi > 0.0 ? k.L / std::sqrt(k.d_psi)
                                       : std::numeric_limits<double>::infinity();
      const double eta_tilde = (k.D * std::sqrt(k.M_tilde) / (k.L * k.R)) *
                               std::min(std::sqrt(k.n_min), alt);
      const double eta = std::min(1.0 / (4.0 * k.beta), eta_tilde);
      s.eta.assign(k.R, eta);
      s.gamma.assign(k.R, 1.0 / k.R);
      break;
    }
    case ScheduleCase::StronglyConvexSco:
    case ScheduleCase::StronglyConvexErm: {
      if (k.mu <= 0.0 || k.beta <= 0.0) {
        throw Error("mbsgd_schedule: missing constants (mu, beta)");
      }
      const double eta = stich_stepsize(k.mu, 4.0 * k.beta, k.r0, k.R, k.c);
      s.eta.assign(k.R, eta);
      s.gamma.resize(k.R);
      for (int r = 0; r < k.R; ++r) {
        s.gamma[r] = std::pow(1.0 - k.mu * eta, -(r + 1));
      }
      break;
    }
  }
  return s;
}

AcsaState acsa_round(const AcsaState& prev, const Vector& g_tilde, double alpha, double eta,
                     double mu, double D) {
  if (mu + eta <= 1e-300) throw Error("acsa_round: denominator underflow (mu + eta ~ 0)");
  AcsaState next;
  next.w_md = acsa_md(prev, alpha, eta, mu);
  Vector z = (alpha * mu * next.w_md + ((1.0 - alpha) * mu + eta) * prev.w - alpha * g_tilde) /
             (mu + eta);
  next.w = project_ball(z, D);
  next.w_ag = alpha * next.w + (1.0 - alpha) * prev.w_ag;
  return next;
}

Schedule acsa_schedule(int R, double upsilon) {
  if (R < 1) throw Error("acsa_schedule: R must be >= 1");
  if (upsilon <= 0.0) throw Error("acsa_schedule: upsilon must be positive");
  Schedule s;
  s.eta.resize(R);
  s.alpha.resize(R);
  for (int r = 1; r <= R; ++r) {
    s.alpha[r - 1] = 2.0 / (r + 1.0);
    s.eta[r - 1] = 4.0 * upsilon / (static_cast<double>(r) * (r + 1.0));
  }
  return s;
}

double acsa_regularizer(double V, double D, int R) {
  if (D <= 0.0 || R < 1) throw Error("acsa_regularizer: D must be positive, R >= 1");
  if (V < 0.0) throw Error("acsa_regularizer: V must be non-negative");
  return V / (2.0 * D * std::sqrt(static_cast<double>(R)));
}

RunResult acsa_run(const FederatedDataset& fed, const LossSpec& loss, const NoisePlan& plan,
                   const Schedule& schedule, double regularizer_lambda, double mu,
                   const AvailabilityModel& availability, const RunOptions& opts) {
  fed.validate();
  schedule.validate(true);
  const int R = schedule.R();
  const double mu_round = regularizer_lambda > 0.0 ? regularizer_lambda : mu;
  ClientRuntime runtime;
  RunResult out;
  AcsaState state;
  state.w = project_ball(opts.w0, loss.D);
  state.w_ag = state.w;
  state.w_md = state.w;
  const Vector w_center = state.w;
  if (opts.record_history) out.iterate_history.push_back(state.w_ag);
  for (int r = 1; r <= R; ++r) {
    const double alpha = schedule.alpha[r - 1];
    const double eta = schedule.eta[r - 1];
    Vector w_md = acsa_md(state, alpha, eta, mu_round);
    Vector g = gather_round(fed, loss, plan, availability, w_md, r - 1, opts, runtime,
                            out.transcript);
    if (regularizer_lambda > 0.0) g += regularizer_lambda * (w_md - w_center);
    state = acsa_round(state, g, alpha, eta, mu_round, loss.D);
    if (opts.record_history) out.iterate_history.push_back(state.w_ag);
    out.train_loss.push_back(empirical_risk(fed, loss, state.w_ag));
  }
  out.w_hat = state.w_ag;
  return out;
}

MultistageResult multistage_acsa(const FederatedDataset& fed, const LossSpec& loss,
                                 const NoisePlan& plan, double Delta, double V_sq, double mu,
                                 double beta, int R_budget,
                                 const AvailabilityModel& availability,
                                 const RunOptions& opts) {
  if (mu <= 0.0) throw Error("multistage_acsa: mu must be positive");
  if (Delta <= 0.0) throw Error("multistage_acsa: Delta must be positive");
  if (beta < mu) throw Error("multistage_acsa: beta must be >= mu");
  MultistageResult out;
  RunOptions stage_opts = opts;
  int total = 0;
  for (int k = 1;; ++k) {
    const double target = Delta * std::pow(2.0, -(k + 1.0));
    const double R_raw =
        std::max(4.0 * std::sqrt(2.0 * beta / mu), 128.0 * V_sq / (3.0 * mu * target));
    const int R_k = static_cast<int>(std::ceil(R_raw));
    if (total + R_k > R_budget) {
      if (k == 1) throw Error("multistage_acsa: R_budget smaller than one stage");
      break;
    }
    const double R_d = static_cast<double>(R_k);
    const double upsilon =
        std::max(2.0 * beta, std::sqrt(mu * V_sq /
                                       (3.0 * Delta * std::pow(2.0, -(k - 1.0)) * R_d *
                                        (R_d + 1.0) * (R_d + 2.0))));
    Schedule schedule = acsa_schedule(R_k, upsilon);
    // Stage seeds are offset so warm-started stages do not reuse noise draws.
    stage_opts.seed = opts.seed + static_cast<std::uint64_t>(k) * 0x100000ULL;
    RunResult stage =
        acsa_run(fed, loss, plan, schedule, /*regularizer_lambda=*/0.0, mu, availability,
                 stage_opts);
    stage_opts.w0 = stage.w_hat;
    total += R_k;
    out.stage_rounds.push_back(R_k);
    out.stage_outputs.push_back(stage.w_hat);
    for (auto& t : stage.transcript) {
      t.round += total - R_k;
      out.run.transcript.push_back(std::move(t));
    }
    for (double l : stage.train_loss) out.run.train_loss.push_back(l);
    out.run.w_hat = stage.w_hat;
  }
  return out;
}

RunResult onepass_run(const FederatedDataset& fed, const LossSpec& loss, double eps0,
                      double delta0, int K, const AvailabilityModel& availability,
                      const RunOptions& opts, PrivacyLedger* ledger_out) {
  fed.validate();
  const int n_min = fed.n_min();
  NoisePlan plan = onepass_noise_plan(loss.L, K, eps0, delta0, n_min);
  RunOptions run_opts = opts;
  run_opts.mode = SamplingMode::WithoutReplacementDisjoint;
  run_opts.K = K;
  const double beta = loss.beta ? *loss.beta : loss.L / loss.D;
  Schedule schedule = acsa_schedule(plan.R, 2.0 * beta);
  if (ledger_out != nullptr) {
    ledger_out->rounds.assign(static_cast<std::size_t>(plan.R), {eps0, delta0});
    ledger_out->target_eps0 = eps0;
    ledger_out->target_delta0 = delta0;
  }
  return acsa_run(fed, loss, plan, schedule, /*regularizer_lambda=*/0.0, loss.mu,
                  availability, run_opts);
}

RunResult local_sgd_run(const FederatedDataset& fed, const LossSpec& loss,
                        const NoisePlan& plan, int local_steps, double eta, int R,
                        const AvailabilityModel& availability, const RunOptions& opts) {
  fed.validate();
  if (local_steps < 1) throw Error("local_sgd_run: local_steps must be >= 1");
  if (eta <= 0.0) throw Error("local_sgd_run: eta must be positive");
  RunResult out;
  Vector w = project_ball(opts.w0, loss.D);
  const int n_min = fed.n_min();
  if (opts.record_history) out.iterate_history.push_back(w);
  for (int r = 0; r < R; ++r) {
    RngStream avail_rng(opts.seed, kServerStream, static_cast<std::uint64_t>(r),
                        rng_purpose::kAvailability);
    RoundTranscript t;
    t.round = r;
    t.active_set = sample_round(avail_rng, availability, fed.num_clients());
    Vector acc = Vector::Zero(fed.dim);
    for (int i : t.active_set) {
      const int K_i = client_batch_size(opts.K, fed.clients[i].n(), n_min);
      RngStream batch_rng(opts.seed, static_cast<std::uint64_t>(i),
                          static_cast<std::uint64_t>(r), rng_purpose::kMinibatch);
      RngStream noise_rng(opts.seed, static_cast<std::uint64_t>(i),
                          static_cast<std::uint64_t>(r), rng_purpose::kNoise);
      Vector v = w;
      for (int step = 0; step < local_steps; ++step) {
        Vector g = client_message(fed.clients[i], loss, v, K_i, SamplingMode::WithReplacement,
                                  plan.sigma_sq, batch_rng, noise_rng);
        v = project_ball(v - eta * g, loss.D);
      }
      acc += v;
      t.messages.push_back(std::move(v));
    }
    w = acc / static_cast<double>(t.active_count());
    w = project_ball(w, loss.D);
    out.transcript.push_back(std::move(t));
    if (opts.record_history) out.iterate_history.push_back(w);
    out.train_loss.push_back(empirical_risk(fed, loss, w));
  }
  out.w_hat = w;
  return out;
}

int round_count(RoundCountTheorem theorem, const RoundCountConstants& k) {
  if (k.L <= 0.0 || k.beta <= 0.0 || k.D <= 0.0 || k.M <= 0.0 || k.n <= 0.0 || k.d <= 0.0 ||
      k.eps0 <= 0.0 || k.K <= 0.0) {
    throw Error("round_count: constants must be positive");
  }
  double raw = 0.0;
  const double erm_term = std::min(k.n, k.eps0 * k.eps0 * k.n * k.n / k.d) / k.K;
  switch (theorem) {
    case RoundCountTheorem::Thm21Convex: {
      const double first = (k.beta * k.D * std::sqrt(k.M) / k.L) *
                           std::min(std::sqrt(k.n), k.eps0 * k.n / std::sqrt(k.d));
      raw = std::max(first, erm_term);
      break;
    }
    case RoundCountTheorem::Thm21StronglyConvex: {
      if (k.mu <= 0.0) throw Error("round_count: mu must be positive");
      const double log_arg =
          k.beta * k.D * k.D * k.mu * k.M * k.eps0 * k.eps0 * k.n * k.n / (k.d * k.L * k.L);
      if (log_arg <= 0.0) throw Error("round_count: log of non-positive argument");
      const double first = (8.0 * k.beta / k.mu) * std::log(log_arg);
      raw = std::max(first, erm_term);
      break;
    }
  }
  return std::max(1, static_cast<int>(std::ceil(raw)));
}

}  // namespace fedldp
