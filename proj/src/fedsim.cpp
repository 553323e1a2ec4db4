#include "fedldp/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace fedldp {

AvailabilityModel AvailabilityModel::Fixed(int M) {
  AvailabilityModel m;
  m.kind = Kind::Fixed;
  m.values = {M};
  m.probs = {1.0};
  m.validate();
  return m;
}

AvailabilityModel AvailabilityModel::UniformRange(int lo, int hi) {
  if (lo > hi) throw Error("AvailabilityModel: lo > hi");
  AvailabilityModel m;
  m.kind = Kind::UniformRange;
  const double p = 1.0 / static_cast<double>(hi - lo + 1);
  for (int v = lo; v <= hi; ++v) {
    m.values.push_back(v);
    m.probs.push_back(p);
  }
  m.validate();
  return m;
}

AvailabilityModel AvailabilityModel::Categorical(std::vector<int> values,
                                                 std::vector<double> probs) {
  AvailabilityModel m;
  m.kind = Kind::Categorical;
  m.values = std::move(values);
  m.probs = std::move(probs);
  m.validate();
  return m;
}

void AvailabilityModel::validate() const {
  if (values.empty() || values.size() != probs.size()) {
    throw Error("AvailabilityModel: support/probability size mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 1) throw Error("AvailabilityModel: support values must be >= 1");
    if (probs[i] < 0.0) throw Error("AvailabilityModel: negative probability");
    sum += probs[i];
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error("AvailabilityModel: probabilities must sum to 1");
}

int AvailabilityModel::max_support() const {
  return *std::max_element(values.begin(), values.end());
}

int AvailabilityModel::draw(RngStream& rng) const {
  if (values.size() == 1) return values[0];
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += probs[i];
    if (u < acc) return values[i];
  }
  return values.back();
}

std::pair<double, double> availability_moments(const AvailabilityModel& model) {
  model.validate();
  double e_inv = 0.0, e_inv_sq = 0.0;
  for (std::size_t i = 0; i < model.values.size(); ++i) {
    const double v = static_cast<double>(model.values[i]);
    e_inv += model.probs[i] / v;
    e_inv_sq += model.probs[i] / (v * v);
  }
  return {1.0 / e_inv, 1.0 / std::sqrt(e_inv_sq)};
}

std::vector<int> sample_round(RngStream& rng, const AvailabilityModel& model, int N) {
  if (N < model.max_support()) throw Error("sample_round: N smaller than availability support");
  const int M_r = model.draw(rng);
  // Partial Fisher-Yates: first M_r entries are a uniform subset.
  std::vector<int> pool(N);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < M_r; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(N - i)));
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> active(pool.begin(), pool.begin() + M_r);
  std::sort(active.begin(), active.end());
  return active;
}

OnePassState OnePassState::Shuffled(int n, RngStream& rng) {
  OnePassState state;
  state.order.resize(n);
  std::iota(state.order.begin(), state.order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(state.order[i], state.order[j]);
  }
  return state;
}

Vector client_message(const ClientDataset& client, const LossSpec& loss, const Vector& w,
                      int K, SamplingMode mode, double sigma_sq, RngStream& batch_rng,
                      RngStream& noise_rng, OnePassState* state) {
  if (K < 1) throw Error("client_message: K must be >= 1");
  if (sigma_sq < 0.0) throw Error("client_message: sigma_sq must be non-negative");
  const int n = client.n();
  Vector sum = Vector::Zero(w.size());
  int divisor = K;
  if (mode == SamplingMode::WithReplacement) {
    if (K >= n) {
      // Full batch: the exact deterministic client gradient.
      for (const auto& s : client.samples) sum += grad(loss, w, s).grad;
      divisor = n;
    } else {
      for (int j = 0; j < K; ++j) {
        const int idx = static_cast<int>(batch_rng.below(static_cast<std::uint64_t>(n)));
        sum += grad(loss, w, client.samples[idx]).grad;
      }
    }
  } else {
    if (state == nullptr) throw Error("client_message: one-pass mode requires sampler state");
    if (K > n) throw Error("client_message: K exceeds client sample count");
    if (state->cursor + K > n) throw Error("one-pass budget exhausted");
    for (int j = 0; j < K; ++j) {
      const int idx = state->order[state->cursor++];
      sum += grad(loss, w, client.samples[idx]).grad;
    }
  }
  Vector message = (client.scale / static_cast<double>(divisor)) * sum;
  if (sigma_sq > 0.0) {
    const double sd = std::sqrt(sigma_sq);
    for (Eigen::Index j = 0; j < message.size(); ++j) {
      message[j] += sd * noise_rng.normal();
    }
  }
  require_finite(message, "client message");
  return message;
}

int client_batch_size(int K, int n_i, int n_min) {
  if (K < 1 || n_i < 1 || n_min < 1) throw Error("client_batch_size: arguments must be >= 1");
  const long long scaled = static_cast<long long>(K) * n_i;
  int K_i = static_cast<int>((scaled + n_min - 1) / n_min);
  return std::min(K_i, n_i);
}

std::vector<Vector> shuffle_stage(std::vector<Vector> messages, RngStream& rng) {
  for (std::size_t i = messages.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(messages[i - 1], messages[j]);
  }
  return messages;
}

void dump_transcripts(const std::vector<RoundTranscript>& transcripts, std::ostream& out) {
  out << "# fedldp-transcript v1: round client M_r message...\n";
  out.precision(17);
  for (const auto& t : transcripts) {
    for (int k = 0; k < t.active_count(); ++k) {
      out << t.round << ' ' << t.active_set[k] << ' ' << t.active_count();
      const Vector& m = t.messages[k];
      for (Eigen::Index j = 0; j < m.size(); ++j) out << ' ' << m[j];
      out << '\n';
    }
  }
}

}  // namespace fedldp
