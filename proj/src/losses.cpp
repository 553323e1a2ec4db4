#include "fedldp/losses.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fedldp {
namespace {

constexpr double kLogisticClamp = 15.0;

void check_dim(const LossSpec& loss, const Vector& w, const Sample& x) {
  if (loss.family == LossFamily::Quadratic || loss.family == LossFamily::Absolute) {
    if (x.x.size() != w.size()) throw Error("loss: sample/parameter dimension mismatch");
  } else if (x.x.size() != w.size()) {
    throw Error("loss: sample/parameter dimension mismatch");
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Unconstrained prox argmin_v f(v, x) + (rho/2)||v - base||^2 in closed form
/// for the non-smooth families.
Vector prox_unconstrained(const LossSpec& inner, const Sample& x, const Vector& base,
                          double rho) {
  switch (inner.family) {
    case LossFamily::Absolute: {
      Vector v = base;
      const double t = 1.0 / rho;
      for (Eigen::Index j = 0; j < v.size(); ++j) {
        const double r = base[j] - x.x[j];
        double shrunk = 0.0;
        if (r > t) shrunk = r - t;
        else if (r < -t) shrunk = r + t;
        v[j] = x.x[j] + shrunk;
      }
      return v;
    }
    case LossFamily::Hinge: {
      const double margin = 1.0 - x.y * base.dot(x.x);
      if (margin <= 0.0) return base;
      const double xx = x.x.squaredNorm();
      if (xx == 0.0) return base;
      const double tau = std::min(1.0 / rho, margin / xx);
      return base + (tau * x.y) * x.x;
    }
    default:
      throw Error("prox_unconstrained: closed form only for absolute/hinge");
  }
}

/// Smoothness constant of the inner loss, used to pick the prox step size.
double inner_smoothness(const LossSpec& inner, const Sample& x) {
  if (inner.beta) return *inner.beta;
  switch (inner.family) {
    case LossFamily::Quadratic:
      return 1.0;
    case LossFamily::Linear:
      return x.x.squaredNorm();
    case LossFamily::Logistic:
      return 0.25 * x.x.squaredNorm();
    default:
      throw Error("inner_smoothness: non-smooth family");
  }
}

bool is_smooth_family(LossFamily f) {
  return f == LossFamily::Quadratic || f == LossFamily::Linear || f == LossFamily::Logistic;
}

}  // namespace

double loss_value(const LossSpec& loss, const Vector& w, const Sample& x) {
  check_dim(loss, w, x);
  switch (loss.family) {
    case LossFamily::Quadratic:
      return 0.5 * (w - x.x).squaredNorm();
    case LossFamily::Linear: {
      const double r = w.dot(x.x) - x.y;
      return 0.5 * r * r;
    }
    case LossFamily::Logistic: {
      double z = w.dot(x.x);
      z = std::clamp(z, -kLogisticClamp, kLogisticClamp);
      const double m = x.y * z;
      // stable ln(1 + e^{-m})
      return m >= 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    }
    case LossFamily::Absolute:
      return (w - x.x).lpNorm<1>();
    case LossFamily::Hinge:
      return std::max(0.0, 1.0 - x.y * w.dot(x.x));
    case LossFamily::MoreauWrapped: {
      MoreauEnvelope env{*loss.inner, loss.moreau_beta, loss.prox_tol, loss.prox_max_iter};
      return moreau_value_grad(env, w, x).first;
    }
  }
  throw Error("loss_value: unknown family");
}

GradientSample grad(const LossSpec& loss, const Vector& w, const Sample& x) {
  check_dim(loss, w, x);
  GradientSample out;
  switch (loss.family) {
    case LossFamily::Quadratic:
      out.grad = w - x.x;
      out.loss_value = 0.5 * out.grad.squaredNorm();
      break;
    case LossFamily::Linear: {
      const double r = w.dot(x.x) - x.y;
      out.grad = r * x.x;
      out.loss_value = 0.5 * r * r;
      break;
    }
    case LossFamily::Logistic: {
      const double z = w.dot(x.x);
      const double zc = std::clamp(z, -kLogisticClamp, kLogisticClamp);
      const double m = x.y * zc;
      out.loss_value = m >= 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
      if (std::abs(z) < kLogisticClamp) {
        out.grad = (-x.y * sigmoid(-m)) * x.x;
      } else {
        out.grad = Vector::Zero(w.size());  // clamped region: flat
      }
      break;
    }
    case LossFamily::Absolute: {
      out.grad = Vector::Zero(w.size());
      out.loss_value = 0.0;
      for (Eigen::Index j = 0; j < w.size(); ++j) {
        const double r = w[j] - x.x[j];
        out.loss_value += std::abs(r);
        out.grad[j] = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      }
      break;
    }
    case LossFamily::Hinge: {
      const double margin = 1.0 - x.y * w.dot(x.x);
      out.loss_value = std::max(0.0, margin);
      out.grad = margin > 0.0 ? Vector(-x.y * x.x) : Vector(Vector::Zero(w.size()));
      break;
    }
    case LossFamily::MoreauWrapped: {
      MoreauEnvelope env{*loss.inner, loss.moreau_beta, loss.prox_tol, loss.prox_max_iter};
      auto [value, g] = moreau_value_grad(env, w, x);
      out.loss_value = value;
      out.grad = g;
      break;
    }
  }
  require_finite(out.grad, "gradient");
  if (loss.clip_threshold) {
    const double c = *loss.clip_threshold;
    const double norm = out.grad.norm();
    if (norm > c) out.grad *= c / norm;
  }
  return out;
}

Vector moreau_prox(const MoreauEnvelope& env, const Vector& w, const Sample& x) {
  if (env.beta <= 0.0) throw Error("moreau: beta must be positive");
  const double D = env.inner.D;
  const double beta = env.beta;

  if (is_smooth_family(env.inner.family)) {
    // Projected gradient on phi(v) = f(v) + (beta/2)||w - v||^2, which is
    // beta-strongly convex; the gradient-mapping stop implies
    // ||v - v*|| <= 2 * prox_tol.
    const double L_phi = inner_smoothness(env.inner, x) + beta;
    const double step = 1.0 / L_phi;
    Vector v = project_ball(w, D);
    for (int iter = 0; iter < env.prox_max_iter; ++iter) {
      Vector g = grad(env.inner, v, x).grad + beta * (v - w);
      Vector v_next = project_ball(v - step * g, D);
      const double map_norm = (v - v_next).norm() / step;
      v = v_next;
      if (map_norm <= env.prox_tol * beta) return v;
    }
    std::ostringstream os;
    os << "moreau prox solver did not converge in " << env.prox_max_iter
       << " iterations (best iterate norm " << v.norm() << ")";
    throw Error(os.str());
  }

  // Non-smooth families: exact unconstrained prox, with the ball constraint
  // handled through the KKT multiplier: v(lambda) = prox_{f, beta+lambda}
  // (beta w / (beta+lambda)), ||v(lambda)|| decreasing in lambda.
  Vector v = prox_unconstrained(env.inner, x, w, beta);
  if (v.norm() <= D) return v;
  auto v_at = [&](double lambda) {
    const double rho = beta + lambda;
    Vector base = (beta / rho) * w;
    return prox_unconstrained(env.inner, x, base, rho);
  };
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (v_at(hi).norm() > D) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) throw Error("moreau prox: multiplier bracket overflow");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (v_at(mid).norm() > D) lo = mid;
    else hi = mid;
    if (hi - lo <= env.prox_tol * beta) break;
  }
  return project_ball(v_at(hi), D);
}

std::pair<double, Vector> moreau_value_grad(const MoreauEnvelope& env, const Vector& w,
                                            const Sample& x) {
  Vector v_star = moreau_prox(env, w, x);
  const double value =
      loss_value(env.inner, v_star, x) + 0.5 * env.beta * (w - v_star).squaredNorm();
  Vector g = env.beta * (w - v_star);
  return {value, g};
}

double smoothing_beta(SmoothingTheorem theorem, const SmoothingParams& p) {
  double beta = 0.0;
  switch (theorem) {
    case SmoothingTheorem::Thm22Convex: {
      if (p.L <= 0.0 || p.D <= 0.0 || p.M_tilde <= 0.0) {
        throw Error("smoothing_beta: L, D, M_tilde must be positive");
      }
      const double alt = p.d_xi > 0.0 ? 1.0 / std::sqrt(p.d_xi)
                                      : std::numeric_limits<double>::infinity();
      beta = (p.L * std::sqrt(p.M_tilde) / p.D) * std::min(std::sqrt(p.n_min), alt);
      break;
    }
    case SmoothingTheorem::Thm22StronglyConvex: {
      if (p.mu <= 0.0 || p.M_tilde <= 0.0) {
        throw Error("smoothing_beta: mu, M_tilde must be positive");
      }
      const double alt =
          p.d_xi > 0.0 ? 1.0 / p.d_xi : std::numeric_limits<double>::infinity();
      beta = p.mu * p.M_tilde * std::min(p.n_min, alt);
      break;
    }
    case SmoothingTheorem::Thm24Convex: {
      if (p.L <= 0.0 || p.D <= 0.0 || p.M_tilde <= 0.0 || p.d_psi <= 0.0) {
        throw Error("smoothing_beta: L, D, M_tilde, d_psi must be positive");
      }
      beta = p.L * p.L * std::sqrt(p.M_tilde) / (p.D * std::sqrt(p.d_psi));
      break;
    }
    case SmoothingTheorem::Thm24StronglyConvex: {
      if (p.mu_bar <= 0.0 || p.M_tilde <= 0.0 || p.d_psi <= 0.0) {
        throw Error("smoothing_beta: mu_bar, M_tilde, d_psi must be positive");
      }
      beta = p.mu_bar * p.M_tilde * p.L * p.L / p.d_psi;
      break;
    }
  }
  if (!std::isfinite(beta) || beta <= 1e-300) {
    throw Error("smoothing_beta: smoothing parameter underflow");
  }
  return beta;
}

}  // namespace fedldp
