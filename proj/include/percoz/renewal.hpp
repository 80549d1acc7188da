#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "percoz/direction.hpp"
#include "percoz/kernel.hpp"

namespace percoz {

/// Dense kernel on a box window.
struct DenseKernel {
  Box box;
  std::vector<double> v;

  explicit DenseKernel(const Box& b) : box(b), v(b.vertex_count(), 0.0) {}
  double at(const Point& x) const { return box.contains(x) ? v[box.index(x)] : 0.0; }
  double& ref(const Point& x) { return v[box.index(x)]; }
  Kernel to_sparse(const std::string& kind) const;
};

/// (a*b)(x) restricted to x in `window`. Standard errors propagate to first
/// order, treating the entries as independent.
Kernel convolve(const Kernel& a, const Kernel& b, const Box& window);

/// Solves h = delta_0 + f*h on `window` in increasing <t,x>. f(0) must be 0
/// and f must vanish off the open half-space <t,x> > 0.
DenseKernel renewal_solve_dense(const Kernel& f, const Box& window, const Direction& t);
Kernel renewal_solve(const Kernel& f, const Box& window, const Direction& t);

/// max over the window of |h - delta_0 - f*h|, with f*h taken over the window.
double renewal_residual(const DenseKernel& h, const Kernel& f);

/// delta_0 + sum_{k<=K} f^{*k} on the window, and the tail bound
/// F(0)^{K+1}/(1-F(0)) on what was left out.
struct SeriesResult {
  DenseKernel h;
  double tail_bound;
};
SeriesResult renewal_series(const Kernel& f, const Box& window, int K);

/// sum_x k(x) e^{<s,x>}. Throws when an exponent exceeds kMaxExponent.
inline constexpr double kMaxExponent = 700.0;
double generating_value(const Kernel& k, const Eigen::VectorXd& s);

/// s = lambda * direction with F(s) = 1.
Eigen::VectorXd solve_tilt_boundary(const Kernel& f, const Eigen::VectorXd& direction, double tol = 1e-13);

struct TiltMoments {
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;
  double mass = 0;  ///< F(s)
};

/// Mean and covariance of q = f e^{<s,x>} / F(s). With require_full_rank, a
/// covariance with an eigenvalue below 1e-12 times the largest is an error.
TiltMoments mean_cov(const Kernel& f, const Eigen::VectorXd& s, bool require_full_rank = true);

/// Central finite differences of log F at s: gradient and Hessian.
struct FiniteDifferenceCheck {
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double grad_error = 0;  ///< max |grad - mu|
  double hess_error = 0;  ///< max |hess - cov|
};
FiniteDifferenceCheck finite_difference_check(const Kernel& f, const Eigen::VectorXd& s, double step = 1e-5);

struct RenewalModel {
  Kernel f;
  Eigen::VectorXd s_star;
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;
  double phi_prefactor = 0;
  long truncation = -1;
};

/// Tilt on the ray `direction`, moments there, and the prefactor.
RenewalModel build_model(const Kernel& f, const Eigen::VectorXd& direction);

/// e^{-<floor(n mu), s>} / sqrt((2 pi n)^{d-1} det C <C^{-1} mu, mu>).
double oz_predict(const RenewalModel& model, int n);
/// Same form at a lattice point x parallel to mu, with n = |x| / |mu|.
double oz_predict_at(const RenewalModel& model, const Point& x);
/// sqrt(|mu|^{d-1} / (det C <C^{-1} mu, mu>)).
double phi_prefactor(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov);
double phi_prefactor(const RenewalModel& model);

struct MassGapReport {
  std::size_t points = 0;
  double max_ratio = 0;
  std::vector<Point> defects;  ///< f > 0 where h = 0
  double rate = 0;             ///< fitted decay of f/h per unit Euclidean length
  double rate_error = 0;
  bool bounded_away = false;   ///< rate - 2 rate_error > 0
};
MassGapReport mass_gap_check(const Kernel& f, const Kernel& h);

/// tau(xhat) = <s, xhat> at the point s of {F = 1} where mu(s) is parallel to
/// xhat. Newton on (s, lambda) started from the ray root; throws when xhat is
/// outside the cone of the support.
struct TauPoint {
  double tau = 0;
  Eigen::VectorXd s;
  Eigen::VectorXd mu;
};
TauPoint tau_synthetic(const Kernel& f, const Eigen::VectorXd& xhat);

/// Share of sum_k f^{*k}(x) carried by k with |k - n| >= n^{1/2+alpha}, where
/// x = floor(n mu) and f^{*k} is computed by layered convolution on `window`.
double gaussian_window_outside_mass(const Kernel& f, const Point& x, int n, double alpha, const Box& window,
                                    const Direction& t);

namespace synthetic {
/// q delta_{u1}.
Kernel geometric(int dim, double q);
/// (q/2)(delta_{u1+u2} + delta_{u1-u2}) + q2 delta_{2u1}.
Kernel three_atom(double q, double q2);
/// a delta_{u1} + b/(2(d-1)) sum_j (delta_{u1+uj} + delta_{u1-uj}) + c delta_{2u1}.
Kernel full_rank(int dim, double a, double b, double c);
/// Kernel from JSON: either {"kernel": {...}} or {"model": name, "dim", params}.
Kernel from_spec(const nlohmann::json& spec);
}  // namespace synthetic

}  // namespace percoz
