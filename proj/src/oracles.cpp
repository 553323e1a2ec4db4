#include "fedldp/oracles.hpp"

#include <cmath>

#include "fedldp/data.hpp"
#include "fedldp/rng.hpp"

namespace fedldp {
namespace {

/// Per-client single-sample gradient variance and client-drift terms of the
/// variance lemma, evaluated at w.
struct VarianceTerms {
  double Phi_sq = 0.0;       // average over clients
  double phi_max_sq = 0.0;   // worst client
  double upsilon_sq = 0.0;   // client heterogeneity at w
};

Vector client_full_grad(const ClientDataset& c, const LossSpec& loss, const Vector& w) {
  Vector g = Vector::Zero(w.size());
  for (const auto& s : c.samples) g += grad(loss, w, s).grad;
  return (c.scale / static_cast<double>(c.n())) * g;
}

VarianceTerms variance_terms(const FederatedDataset& fed, const LossSpec& loss,
                             const Vector& w) {
  VarianceTerms t;
  const Vector g_bar = empirical_grad(fed, loss, w);
  for (const auto& c : fed.clients) {
    const Vector g_i = client_full_grad(c, loss, w);
    double phi_sq = 0.0;
    for (const auto& s : c.samples) {
      phi_sq += (c.scale * grad(loss, w, s).grad - g_i).squaredNorm();
    }
    phi_sq /= static_cast<double>(c.n());
    t.Phi_sq += phi_sq;
    t.phi_max_sq = std::max(t.phi_max_sq, phi_sq);
    t.upsilon_sq += (g_i - g_bar).squaredNorm();
  }
  const double N = static_cast<double>(fed.num_clients());
  t.Phi_sq /= N;
  t.upsilon_sq /= N;
  return t;
}

}  // namespace

OracleReport make_report(std::string name, double measured, double reference,
                         double tolerance, bool one_sided) {
  OracleReport r;
  r.name = std::move(name);
  r.measured = measured;
  r.reference = reference;
  r.tolerance = tolerance;
  r.one_sided = one_sided;
  r.pass = one_sided ? measured <= reference + tolerance
                     : std::abs(measured - reference) <= tolerance;
  return r;
}

double subset_variance_exact(const std::vector<Vector>& a, int M_tilde) {
  const int N = static_cast<int>(a.size());
  if (N > 20) throw Error("subset_variance_exact: use Monte-Carlo path (N > 20)");
  if (M_tilde < 1 || M_tilde > N) throw Error("subset_variance_exact: need 1 <= M~ <= N~");
  Vector total = Vector::Zero(a[0].size());
  for (const auto& v : a) total += v;
  if (total.norm() > 1e-9) throw Error("subset_variance_exact: vectors must sum to 0");
  // Enumerate M_tilde-subsets via lexicographic index vectors.
  std::vector<int> idx(M_tilde);
  for (int i = 0; i < M_tilde; ++i) idx[i] = i;
  double acc = 0.0;
  long long count = 0;
  while (true) {
    Vector sum = Vector::Zero(a[0].size());
    for (int i : idx) sum += a[i];
    acc += (sum / static_cast<double>(M_tilde)).squaredNorm();
    ++count;
    int k = M_tilde - 1;
    while (k >= 0 && idx[k] == N - M_tilde + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (int j = k + 1; j < M_tilde; ++j) idx[j] = idx[j - 1] + 1;
  }
  return acc / static_cast<double>(count);
}

double subset_variance_formula(const std::vector<Vector>& a, int M_tilde) {
  const double N = static_cast<double>(a.size());
  const double M = static_cast<double>(M_tilde);
  if (a.size() == 1) return 0.0;
  double mean_sq = 0.0;
  for (const auto& v : a) mean_sq += v.squaredNorm();
  mean_sq /= N;
  return (N - M) / ((N - 1.0) * M) * mean_sq;
}

McEstimate gradient_variance_mc(const FederatedDataset& fed, const LossSpec& loss,
                                const Vector& w, int K, double sigma_sq,
                                const AvailabilityModel& availability, int draws,
                                std::uint64_t seed) {
  if (draws < 1) throw Error("gradient_variance_mc: draws must be >= 1");
  fed.validate();
  const Vector g_bar = empirical_grad(fed, loss, w);
  const int n_min = fed.n_min();
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < draws; ++t) {
    RngStream avail_rng(seed, 0xAAAAAAAAULL, static_cast<std::uint64_t>(t),
                        rng_purpose::kOracle);
    std::vector<int> active = sample_round(avail_rng, availability, fed.num_clients());
    Vector acc = Vector::Zero(fed.dim);
    for (int i : active) {
      const int K_i = client_batch_size(K, fed.clients[i].n(), n_min);
      RngStream batch_rng(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t),
                          rng_purpose::kMinibatch + 100);
      RngStream noise_rng(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t),
                          rng_purpose::kNoise + 100);
      acc += client_message(fed.clients[i], loss, w, K_i, SamplingMode::WithReplacement,
                            sigma_sq, batch_rng, noise_rng);
    }
    const double dev = (acc / static_cast<double>(active.size()) - g_bar).squaredNorm();
    sum += dev;
    sum_sq += dev * dev;
  }
  McEstimate est;
  est.draws = draws;
  est.mean = sum / draws;
  const double var = std::max(0.0, sum_sq / draws - est.mean * est.mean);
  est.stderr_ = std::sqrt(var / draws);
  return est;
}

double gradient_variance_bound(const FederatedDataset& fed, const LossSpec& loss,
                               const Vector& w, int K, double sigma_sq,
                               const AvailabilityModel& availability) {
  const auto [M, M_prime] = availability_moments(availability);
  const VarianceTerms t = variance_terms(fed, loss, w);
  const double N = static_cast<double>(fed.num_clients());
  const double K_d = static_cast<double>(K);
  const double d = static_cast<double>(fed.dim);
  double bound = std::min(t.Phi_sq / (M_prime * K_d), t.phi_max_sq / (M * K_d));
  if (fed.num_clients() > 1) {
    bound += (1.0 - (M - 1.0) / (N - 1.0)) * t.upsilon_sq / M;
  }
  bound += d * std::min(sigma_sq / M_prime, sigma_sq / M);
  return bound;
}

Vector finite_diff_grad(const LossSpec& loss, const Vector& w, const Sample& x, double h) {
  if (h <= 0.0) throw Error("finite_diff_grad: h must be positive");
  Vector g(w.size());
  Vector wp = w, wm = w;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    wp[j] = w[j] + h;
    wm[j] = w[j] - h;
    g[j] = (loss_value(loss, wp, x) - loss_value(loss, wm, x)) / (2.0 * h);
    wp[j] = w[j];
    wm[j] = w[j];
  }
  return g;
}

OracleReport stability_experiment(const StabilityConfig& config, int seed_pairs,
                                  std::uint64_t seed) {
  if (seed_pairs < 2) throw Error("stability_experiment: need at least 2 seed pairs");
  LossSpec loss;
  loss.family = LossFamily::Quadratic;
  loss.L = config.L;
  loss.beta = 1.0;
  loss.D = config.D;
  if (config.eta > 1.0) throw Error("stability_experiment: eta must be <= 1/beta = 1");

  NoisePlan plan;  // sigma_sq = 0: the bound is about sampling randomness only
  plan.sigma_sq = 0.0;
  plan.R = config.R;
  Schedule schedule;
  schedule.eta.assign(config.R, config.eta);
  schedule.gamma.assign(config.R, 1.0 / std::max(1, config.R));
  AvailabilityModel availability = AvailabilityModel::Fixed(config.N);

  double sum = 0.0, sum_sq = 0.0;
  for (int p = 0; p < seed_pairs; ++p) {
    const std::uint64_t data_seed = seed + 1000ULL * p;
    FederatedDataset fed = make_synthetic_quadratic(config.N, config.n, config.d,
                                                    /*hetero=*/0.0, data_seed);
    // Adjacent dataset: one replaced sample in client 0.
    FederatedDataset fed_adj = fed;
    RngStream replace_rng(data_seed, 0xBBBBBBBBULL, 0, rng_purpose::kOracle);
    for (int j = 0; j < config.d; ++j) {
      fed_adj.clients[0].samples[0].x[j] = replace_rng.normal();
    }
    RunOptions opts;
    opts.w0 = Vector::Zero(config.d);
    opts.seed = seed + 7777ULL + p;  // shared across the coupled pair
    opts.K = config.K;
    RunResult a = mbsgd_run(fed, loss, plan, schedule, availability, opts);
    RunResult b = mbsgd_run(fed_adj, loss, plan, schedule, availability, opts);
    const double dist = config.L * (a.w_hat - b.w_hat).norm();
    sum += dist;
    sum_sq += dist * dist;
  }
  const double mean = sum / seed_pairs;
  const double var = std::max(0.0, sum_sq / seed_pairs - mean * mean);
  const double stderr_ = std::sqrt(var / seed_pairs);
  const double n_min = static_cast<double>(config.n);
  const double bound =
      2.0 * config.L * config.L * config.R * config.eta / (n_min * config.N);
  return make_report("stability", mean, bound, 3.0 * stderr_, /*one_sided=*/true);
}

}  // namespace fedldp
