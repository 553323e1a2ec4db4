#ifndef FEDLDP_LOSSES_HPP
#define FEDLDP_LOSSES_HPP

#include <optional>
#include <utility>

#include "fedldp/core.hpp"

namespace fedldp {

struct GradientSample {
  Vector grad;
  double loss_value = 0.0;
};

/// Moreau envelope f_beta(w, x) = min_{v in W} (f(v, x) + (beta/2)||w - v||^2)
/// of a (possibly non-smooth) inner loss; 2L-Lipschitz and beta-smooth.
struct MoreauEnvelope {
  LossSpec inner;
  double beta = 1.0;
  double prox_tol = 1e-10;
  int prox_max_iter = 10000;
};

/// Loss value without the gradient (same clamping rules as grad()).
double loss_value(const LossSpec& loss, const Vector& w, const Sample& x);

/// Exact analytic gradient of the family at (w, x). The logistic margin
/// <w, x> is clamped to [-15, 15] in both value and gradient; if
/// clip_threshold is set the gradient is norm-clipped to it.
GradientSample grad(const LossSpec& loss, const Vector& w, const Sample& x);

/// Envelope value and gradient beta*(w - v*), with v* the prox point solved
/// to tolerance env.prox_tol over the ball of radius env.inner.D.
std::pair<double, Vector> moreau_value_grad(const MoreauEnvelope& env, const Vector& w,
                                            const Sample& x);

/// Prox point v* alone (exposed for oracle cross-checks).
Vector moreau_prox(const MoreauEnvelope& env, const Vector& w, const Sample& x);

enum class SmoothingTheorem {
  Thm22Convex,
  Thm22StronglyConvex,
  Thm24Convex,
  Thm24StronglyConvex,
};

/// Constants consumed by smoothing_beta; d_xi is the product d*Xi~ and d_psi
/// the product d*Psi~ (always used as products in the formulas).
struct SmoothingParams {
  double L = 1.0;
  double D = 1.0;
  double mu = 0.0;      // strongly convex cases
  double mu_bar = 0.0;  // Thm 2.4 strongly convex case
  double M_tilde = 1.0;
  double n_min = 1.0;
  double d_xi = 0.0;
  double d_psi = 0.0;
};

double smoothing_beta(SmoothingTheorem theorem, const SmoothingParams& p);

}  // namespace fedldp

#endif
