#include "fedldp/core.hpp"

#include <cmath>
#include <limits>

namespace fedldp {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw Error(std::string("non-finite vector: ") + what);
  }
}

void LossSpec::validate() const {
  if (L <= 0.0) throw Error("LossSpec: L must be positive");
  if (mu < 0.0) throw Error("LossSpec: mu must be non-negative");
  if (beta && *beta < mu) throw Error("LossSpec: beta must be >= mu");
  if (D <= 0.0) throw Error("LossSpec: D must be positive");
  if (family == LossFamily::MoreauWrapped) {
    if (!inner) throw Error("LossSpec: moreau-wrapped requires inner loss");
    if (moreau_beta <= 0.0) throw Error("LossSpec: moreau beta must be positive");
    inner->validate();
  }
}

void ClientDataset::validate() const {
  if (samples.empty()) throw Error("ClientDataset: n must be >= 1");
  if (eps <= 0.0) throw Error("ClientDataset: eps must be positive");
  if (delta <= 0.0 || delta >= 1.0) throw Error("ClientDataset: delta must be in (0,1)");
}

int FederatedDataset::n_min() const {
  int m = std::numeric_limits<int>::max();
  for (const auto& c : clients) m = std::min(m, c.n());
  return m;
}

void FederatedDataset::validate() const {
  if (clients.empty()) throw Error("FederatedDataset: no clients");
  if (weights.size() != clients.size()) throw Error("FederatedDataset: weight count mismatch");
  double sum = 0.0;
  for (double p : weights) {
    if (p < 0.0) throw Error("FederatedDataset: negative client weight");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error("FederatedDataset: weights must sum to 1");
  for (const auto& c : clients) {
    c.validate();
    for (const auto& s : c.samples) {
      if (s.x.size() != dim) throw Error("FederatedDataset: sample dimension mismatch");
    }
  }
}

Vector project_ball(const Vector& z, double D) {
  if (D <= 0.0) throw Error("project_ball: radius must be positive");
  require_finite(z, "project_ball input");
  double norm = z.norm();
  if (norm <= D) return z;
  return (D / norm) * z;
}

FederatedDataset apply_client_weights(const FederatedDataset& fed) {
  fed.validate();
  FederatedDataset out = fed;
  const double N = static_cast<double>(fed.num_clients());
  for (int i = 0; i < fed.num_clients(); ++i) {
    double factor = fed.weights[i] * N;
    out.clients[i].scale = fed.clients[i].scale * factor;
    out.clients[i].L = fed.clients[i].L * factor;
    out.weights[i] = 1.0 / N;
  }
  return out;
}

}  // namespace fedldp
