#ifndef FEDLDP_CORE_HPP
#define FEDLDP_CORE_HPP

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedldp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Error type used across the library for contract violations. The message
/// names the violated bound or formula so callers can surface it verbatim.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

enum class LossFamily {
  Quadratic,       // f(w, x) = 0.5 ||w - x||^2, strongly convex test family
  Linear,          // squared loss 0.5 (<w,x> - y)^2
  Logistic,        // ln(1 + exp(-y <w,x>)) with input clamped to [-15, 15]
  Absolute,        // ||w - x||_1, non-smooth
  Hinge,           // max(0, 1 - y <w,x>), non-smooth
  MoreauWrapped,   // Moreau envelope of an inner non-smooth loss
};

/// Loss family with its constants. `beta` is absent (nullopt) for non-smooth
/// families; `mu` is 0 for merely convex losses. For MoreauWrapped the
/// `inner` spec and `moreau_beta` describe the smoothed objective.
struct LossSpec {
  LossFamily family = LossFamily::Quadratic;
  double L = 1.0;
  std::optional<double> beta;
  double mu = 0.0;
  double D = 1.0;
  std::optional<double> clip_threshold;

  std::shared_ptr<const LossSpec> inner;  // MoreauWrapped only
  double moreau_beta = 0.0;
  double prox_tol = 1e-10;
  int prox_max_iter = 10000;

  void validate() const;
};

struct Sample {
  Vector x;
  double y = 0.0;
};

struct ClientDataset {
  std::vector<Sample> samples;
  double eps = 1.0;
  double delta = 1e-6;
  double L = 1.0;      // per-client Lipschitz bound
  double scale = 1.0;  // objective rescale factor (see apply_client_weights)

  int n() const { return static_cast<int>(samples.size()); }
  void validate() const;
};

struct FederatedDataset {
  std::vector<ClientDataset> clients;
  std::vector<double> weights;  // p_i, sum to 1
  int dim = 0;

  int num_clients() const { return static_cast<int>(clients.size()); }
  int n_min() const;
  void validate() const;
};

/// Per-round record of every active client's message; the collection over all
/// rounds is the algorithm's formal output.
struct RoundTranscript {
  int round = 0;
  std::vector<int> active_set;
  std::vector<Vector> messages;

  int active_count() const { return static_cast<int>(active_set.size()); }
};

/// Euclidean projection onto the ball of radius D centered at the origin.
Vector project_ball(const Vector& z, double D);

/// Rewrites a weighted federation as a uniformly weighted one by folding each
/// p_i into the client objective: F~_i = p_i N F_i, L~_i = p_i N L_i.
FederatedDataset apply_client_weights(const FederatedDataset& fed);

void require_finite(const Vector& v, const char* what);

}  // namespace fedldp

#endif
