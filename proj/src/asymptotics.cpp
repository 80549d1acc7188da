#include "percoz/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "percoz/lattice.hpp"
#include "percoz/renewal.hpp"

namespace percoz {

namespace {

struct LinearFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
  Eigen::VectorXd residuals;
};

// Weighted least squares. With real inverse variances the covariance is
// inflated by the reduced chi-square when it exceeds one; with unit weights
// it is scaled by the residual variance.
LinearFit least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, bool weighted) {
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd A = sw.asDiagonal() * X;
  const Eigen::VectorXd b = sw.asDiagonal() * y;
  LinearFit fit;
  fit.beta = A.colPivHouseholderQr().solve(b);
  fit.residuals = y - X * fit.beta;
  const auto m = X.rows(), k = X.cols();
  const double chi2 = (sw.asDiagonal() * fit.residuals).squaredNorm();
  const double dof = m > k ? static_cast<double>(m - k) : 1.0;
  const Eigen::MatrixXd inv = (A.transpose() * A).inverse();
  const double scale = weighted ? std::max(1.0, chi2 / dof) : chi2 / dof;
  fit.cov = inv * scale;
  return fit;
}

struct Usable {
  std::vector<DecaySample> pts;
  std::size_t dropped = 0;
  bool weighted = true;
  std::vector<std::string> warnings;
};

Usable usable_points(const DecaySeries& s) {
  s.validate();
  Usable u;
  for (const auto& p : s.samples) {
    if (p.value > 0 && std::isfinite(p.value)) {
      u.pts.push_back(p);
      if (!(p.std_error > 0)) u.weighted = false;
    } else {
      ++u.dropped;
    }
  }
  if (u.dropped) u.warnings.push_back("dropped " + std::to_string(u.dropped) + " nonpositive values");
  if (u.pts.size() < 4) throw DomainError("tau fit needs at least 4 positive values, got " + std::to_string(u.pts.size()));
  return u;
}

Eigen::VectorXd weights_of(const Usable& u) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(u.pts.size()));
  for (std::size_t i = 0; i < u.pts.size(); ++i) {
    const double rel = u.pts[i].std_error / u.pts[i].value;
    w[static_cast<Eigen::Index>(i)] = u.weighted ? 1.0 / (rel * rel) : 1.0;
  }
  return w;
}

Eigen::VectorXd to_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> from_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double rms(const Eigen::VectorXd& r, Eigen::Index from, Eigen::Index to) {
  double s = 0;
  for (Eigen::Index i = from; i < to; ++i) s += r[i] * r[i];
  return to > from ? std::sqrt(s / static_cast<double>(to - from)) : 0.0;
}

// Orthonormal basis of the complement of a unit vector.
Eigen::MatrixXd complement_basis(const Eigen::VectorXd& x) {
  const auto d = x.size();
  Eigen::MatrixXd M(d, d);
  M.col(0) = x;
  Eigen::Index skip = 0;
  x.cwiseAbs().maxCoeff(&skip);
  Eigen::Index c = 1;
  for (Eigen::Index i = 0; i < d; ++i)
    if (i != skip) M.col(c++) = Eigen::VectorXd::Unit(d, i);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  return Q.rightCols(d - 1);
}

}  // namespace

std::string to_string(SeriesSource s) {
  switch (s) {
    case SeriesSource::monte_carlo: return "monte-carlo";
    case SeriesSource::renewal_solve: return "renewal-solve";
    case SeriesSource::exact_enumeration: return "exact-enumeration";
  }
  return "?";
}

SeriesSource parse_source(const std::string& s) {
  if (s == "monte-carlo") return SeriesSource::monte_carlo;
  if (s == "renewal-solve") return SeriesSource::renewal_solve;
  if (s == "exact-enumeration") return SeriesSource::exact_enumeration;
  throw DomainError("unknown series source '" + s + "'");
}

void DecaySeries::validate() const {
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].n <= samples[i - 1].n) throw DomainError("series n must be strictly increasing");
  if (!(step > 0)) throw DomainError("series step must be positive");
}

nlohmann::json DecaySeries::to_json() const {
  nlohmann::json j;
  j["direction"] = from_vec(direction);
  j["step"] = step;
  j["source"] = to_string(source);
  j["samples"] = nlohmann::json::array();
  for (const auto& s : samples) j["samples"].push_back({{"n", s.n}, {"value", s.value}, {"std_error", s.std_error}});
  return j;
}

DecaySeries DecaySeries::from_json(const nlohmann::json& j) {
  DecaySeries s;
  s.direction = to_vec(j.at("direction"));
  s.step = j.value("step", 1.0);
  s.source = parse_source(j.value("source", std::string("renewal-solve")));
  for (const auto& e : j.at("samples"))
    s.samples.push_back({e.at("n").get<int>(), e.at("value").get<double>(), e.value("std_error", 0.0)});
  s.validate();
  return s;
}

TauFit tau_fit(const DecaySeries& series) {
  const Usable u = usable_points(series);
  const auto m = static_cast<Eigen::Index>(u.pts.size());
  Eigen::MatrixXd X(m, 2);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    X(i, 0) = 1;
    X(i, 1) = u.pts[static_cast<std::size_t>(i)].n;
    y[i] = -std::log(u.pts[static_cast<std::size_t>(i)].value);
  }
  const auto fit = least_squares(X, y, weights_of(u), u.weighted);
  TauFit r;
  r.tau = fit.beta[1];
  r.tau_error = std::sqrt(std::max(0.0, fit.cov(1, 1)));
  r.intercept = fit.beta[0];
  r.used = u.pts.size();
  r.dropped = u.dropped;
  r.warnings = u.warnings;
  return r;
}

double oz_form(double tau, double phi, int d, int n, double step) {
  return phi * std::exp(-tau * n) / std::pow(2 * std::numbers::pi * n * step, 0.5 * (d - 1));
}

OzFit oz_fit(const DecaySeries& series, int d) {
  const Usable u = usable_points(series);
  const auto m = static_cast<Eigen::Index>(u.pts.size());
  const double kappa0 = 0.5 * (d - 1);
  const Eigen::VectorXd w = weights_of(u);
  Eigen::MatrixXd X(m, 2), X3(m, 3);
  Eigen::VectorXd y(m), ly(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& p = u.pts[static_cast<std::size_t>(i)];
    const double L = std::log(2 * std::numbers::pi * p.n * series.step);
    ly[i] = std::log(p.value);
    y[i] = ly[i] + kappa0 * L;
    X(i, 0) = X3(i, 0) = 1;
    X(i, 1) = X3(i, 2) = -p.n;
    X3(i, 1) = -L;
  }
  const auto fit = least_squares(X, y, w, u.weighted);
  OzFit r;
  r.used = u.pts.size();
  r.warnings = u.warnings;
  r.tau = fit.beta[1];
  r.tau_error = std::sqrt(std::max(0.0, fit.cov(1, 1)));
  r.phi = std::exp(fit.beta[0]);
  r.phi_error = r.phi * std::sqrt(std::max(0.0, fit.cov(0, 0)));
  r.residuals.assign(fit.residuals.data(), fit.residuals.data() + m);
  const Eigen::Index third = m / 3;
  r.early_rms = rms(fit.residuals, 0, third);
  r.late_rms = rms(fit.residuals, m - third, m);
  r.residuals_shrink = r.late_rms < r.early_rms;

  const auto free = least_squares(X3, ly, w, u.weighted);
  r.kappa = free.beta[1];
  r.kappa_error = std::sqrt(std::max(0.0, free.cov(1, 1)));
  const double allowed = std::max(0.25 * (kappa0 > 0 ? kappa0 : 1.0), 3 * r.kappa_error);
  r.model_mismatch = std::fabs(r.kappa - kappa0) > allowed;
  if (r.model_mismatch) r.warnings.push_back("power correction does not match (d-1)/2: residual trend in the OZ form");

  const TauFit naive = tau_fit(series);
  r.naive_tau = naive.tau;
  r.naive_disagrees = std::fabs(naive.tau - r.tau) > 3 * std::hypot(naive.tau_error, r.tau_error);
  return r;
}

void TauSurface::add(const Eigen::VectorXd& direction, double t, double err) {
  directions.push_back(direction.normalized());
  tau.push_back(t);
  tau_error.push_back(err);
}

void TauSurface::validate() const {
  if (directions.empty()) throw DomainError("empty tau surface");
  if (tau.size() != directions.size() || tau_error.size() != directions.size())
    throw DomainError("tau surface arrays differ in length");
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (double t : tau) {
    if (!(t > 0) || !std::isfinite(t)) throw DomainError("tau must be positive and finite");
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (hi > 100 * lo) throw DomainError("tau varies by more than a factor 100 over directions");
}

nlohmann::json TauSurface::to_json() const {
  nlohmann::json j;
  j["dim"] = dim();
  j["directions"] = nlohmann::json::array();
  for (const auto& d : directions) j["directions"].push_back(from_vec(d));
  j["tau"] = tau;
  j["tau_error"] = tau_error;
  return j;
}

TauSurface TauSurface::from_json(const nlohmann::json& j) {
  TauSurface s;
  const auto& dirs = j.at("directions");
  const auto& taus = j.at("tau");
  if (dirs.size() != taus.size()) throw DomainError("directions and tau differ in length");
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Eigen::VectorXd v = to_vec(dirs[i]);
    if (!(v.norm() > 0)) throw DomainError("zero direction at index " + std::to_string(i));
    s.add(v, taus[i].get<double>(), j.contains("tau_error") ? j["tau_error"][i].get<double>() : 0.0);
  }
  return s;
}

std::vector<Eigen::VectorXd> neighbour_directions(int d) {
  std::vector<Eigen::VectorXd> out;
  int total = 1;
  for (int i = 0; i < d; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    Eigen::VectorXd v(d);
    int c = code;
    for (int i = d - 1; i >= 0; --i, c /= 3) v[i] = c % 3 - 1;
    if (v.norm() > 0) out.push_back(v.normalized());
  }
  return out;
}

std::vector<Eigen::VectorXd> refine_directions(const Eigen::VectorXd& xhat_in, int count, double radius) {
  const Eigen::VectorXd xhat = xhat_in.normalized();
  const auto d = xhat.size();
  std::vector<Eigen::VectorXd> out{xhat};
  if (d == 1) return out;
  const Eigen::MatrixXd T = complement_basis(xhat);
  const int per_ring = d == 2 ? 2 : 8;
  const int rings = std::max(1, (count - 1 + per_ring - 1) / per_ring);
  for (int r = 1; r <= rings && static_cast<int>(out.size()) < count; ++r) {
    const double ang = radius * r / rings;
    for (int k = 0; k < per_ring && static_cast<int>(out.size()) < count; ++k) {
      Eigen::VectorXd tang;
      if (d == 2) {
        tang = (k == 0 ? 1.0 : -1.0) * T.col(0);
      } else {
        const double phi = 2 * std::numbers::pi * k / per_ring;
        tang = std::cos(phi) * T.col(0) + std::sin(phi) * T.col(1);
      }
      out.push_back((std::cos(ang) * xhat + std::sin(ang) * tang).normalized());
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> equidecay_surface(const TauSurface& tau) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (!(tau.tau[i] > 0) || !std::isfinite(tau.tau[i])) throw DomainError("tau must be positive on every direction");
    out.push_back(tau.directions[i] / tau.tau[i]);
  }
  return out;
}

ConvexityReport convexity_check(const TauSurface& tau, const TauEvaluator& evaluate) {
  const int d = tau.dim();
  Eigen::MatrixXd D(d, static_cast<Eigen::Index>(tau.size()));
  for (std::size_t i = 0; i < tau.size(); ++i) D.col(static_cast<Eigen::Index>(i)) = tau.directions[i];
  if (tau.size() < 3 || Eigen::FullPivLU<Eigen::MatrixXd>(D).rank() < d)
    throw DomainError("convexity check needs directions spanning R^d");

  ConvexityReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tau.size(); ++i) {
    for (std::size_t j = i + 1; j < tau.size(); ++j) {
      const Eigen::VectorXd z = tau.directions[i] + tau.directions[j];
      const double len = z.norm();
      if (len < 1e-9) continue;
      const Eigen::VectorXd zh = z / len;
      double tz = 0, ez = 0;
      if (evaluate) {
        tz = evaluate(zh);
      } else {
        std::size_t k = tau.size();
        for (std::size_t c = 0; c < tau.size(); ++c)
          if ((tau.directions[c] - zh).norm() < 1e-9) {
            k = c;
            break;
          }
        if (k == tau.size()) continue;
        tz = tau.tau[k];
        ez = tau.tau_error[k];
      }
      ConvexityPair pr;
      pr.i = i;
      pr.j = j;
      pr.lhs = len * tz;
      pr.rhs = tau.tau[i] + tau.tau[j];
      pr.sigma = std::sqrt(tau.tau_error[i] * tau.tau_error[i] + tau.tau_error[j] * tau.tau_error[j] + len * len * ez * ez);
      ++rep.checked;
      const double slack = std::max(3 * pr.sigma, 1e-9 * std::fabs(pr.rhs));
      const double gap = pr.rhs - pr.lhs;
      if (gap < -slack) {
        rep.defects.push_back(pr);
      } else if (std::fabs(gap) <= slack) {
        rep.equalities.push_back(pr);
      } else {
        rep.min_margin = std::min(rep.min_margin, gap / pr.rhs);
      }
    }
  }
  if (!std::isfinite(rep.min_margin)) rep.min_margin = 0;
  return rep;
}

namespace {

// Principal curvatures of the graph w = c + b.u + u^T H u / 2 at u = 0.
std::vector<double> graph_curvatures(const Eigen::VectorXd& beta, int m) {
  Eigen::VectorXd g = beta.segment(1, m);
  Eigen::MatrixXd H(m, m);
  Eigen::Index k = 1 + m;
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      H(i, j) = H(j, i) = beta[k++];
    }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m) + g * g.transpose();
  const Eigen::MatrixXd II = H / std::sqrt(1 + g.squaredNorm());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_i(I);
  const Eigen::MatrixXd root_inv = es_i.operatorInverseSqrt();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(root_inv * II * root_inv);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + m);
  return out;
}

}  // namespace

CurvatureResult curvature_check(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& xhat_in,
                                double radius) {
  if (points.empty()) throw DomainError("empty point cloud");
  const Eigen::VectorXd xhat = xhat_in.normalized();
  const auto d = xhat.size();
  const int m = static_cast<int>(d) - 1;
  const std::size_t need = static_cast<std::size_t>(d * (d + 1) / 2 + d + 1);

  std::vector<Eigen::VectorXd> near;
  std::size_t base = 0;
  double best = -2;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) throw DomainError("point dimension differs from direction");
    const double c = points[i].normalized().dot(xhat);
    if (c > best) {
      best = c;
      base = i;
    }
    if (c >= std::cos(radius)) near.push_back(points[i]);
  }
  if (near.size() < need) throw DomainError("insufficient angular resolution");
  const Eigen::VectorXd p0 = points[base];

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& p : near) mean += p;
  mean /= static_cast<double>(near.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(d, d);
  for (const auto& p : near) C += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pca(C);
  Eigen::VectorXd normal = pca.eigenvectors().col(0);
  if (normal.dot(p0) > 0) normal = -normal;
  const Eigen::MatrixXd T = pca.eigenvectors().rightCols(m);

  const Eigen::Index cols = 1 + m + m * (m + 1) / 2;
  const auto rows = static_cast<Eigen::Index>(near.size());
  Eigen::MatrixXd A(rows, cols);
  Eigen::VectorXd w(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd q = near[static_cast<std::size_t>(r)] - p0;
    const Eigen::VectorXd u = T.transpose() * q;
    w[r] = normal.dot(q);
    A(r, 0) = 1;
    for (int i = 0; i < m; ++i) A(r, 1 + i) = u[i];
    Eigen::Index k = 1 + m;
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) A(r, k++) = i == j ? 0.5 * u[i] * u[i] : u[i] * u[j];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  if (!(sv[sv.size() - 1] > 1e-10 * sv[0])) throw DomainError("insufficient angular resolution");
  const auto fit = least_squares(A, w, Eigen::VectorXd::Ones(rows), false);

  CurvatureResult res;
  res.base_point = p0;
  res.normal = normal;
  res.points_used = near.size();
  res.curvatures = graph_curvatures(fit.beta, m);
  Eigen::MatrixXd J(m, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double h = 1e-6 * std::max(1.0, std::fabs(fit.beta[c]));
    Eigen::VectorXd bp = fit.beta, bm = fit.beta;
    bp[c] += h;
    bm[c] -= h;
    const auto kp = graph_curvatures(bp, m), km = graph_curvatures(bm, m);
    for (int i = 0; i < m; ++i) J(i, c) = (kp[static_cast<std::size_t>(i)] - km[static_cast<std::size_t>(i)]) / (2 * h);
  }
  const Eigen::MatrixXd cov = J * fit.cov * J.transpose();
  res.gaussian = 1;
  res.positive = true;
  for (int i = 0; i < m; ++i) {
    const double se = std::sqrt(std::max(0.0, cov(i, i)));
    res.std_errors.push_back(se);
    res.gaussian *= res.curvatures[static_cast<std::size_t>(i)];
    if (!(res.curvatures[static_cast<std::size_t>(i)] > 2 * se)) res.positive = false;
  }
  return res;
}

DualDirections dual_directions(const Eigen::VectorXd& xhat_in, const std::vector<PhiBarEntry>& table,
                               const std::vector<Eigen::VectorXd>& candidates, double tol) {
  const Eigen::VectorXd xhat = xhat_in.normalized();
  std::optional<double> phi_x;
  for (const auto& e : table)
    if ((e.direction.normalized() - xhat).norm() < 1e-9) phi_x = e.value;
  if (!phi_x) throw DomainError("phi_bar(xhat) is not in the table");

  std::vector<Eigen::VectorXd> grid = candidates;
  if (grid.empty())
    for (const auto& e : table) grid.push_back(e.direction);

  DualDirections out;
  double best = -2;
  for (const auto& c : grid) {
    const Eigen::VectorXd s = c.normalized();
    double r = std::numeric_limits<double>::infinity();
    for (const auto& e : table) {
      const double proj = s.dot(e.direction.normalized());
      if (proj > 1e-12) r = std::min(r, e.value / proj);
    }
    if (!std::isfinite(r)) continue;
    if (r * s.dot(xhat) >= *phi_x * (1 - tol)) {
      out.duals.push_back(s);
      if (s.dot(xhat) > best) {
        best = s.dot(xhat);
        out.representative = s;
      }
    }
  }
  if (out.duals.empty()) out.warnings.push_back("no dual direction within tolerance; widen the tolerance or refine the grid");
  return out;
}

TauSurface trace_tilt_surface(const Kernel& f, const std::vector<Eigen::VectorXd>& rays) {
  TauSurface surf;
  for (const auto& ray : rays) {
    const Eigen::VectorXd s = solve_tilt_boundary(f, ray);
    const auto m = mean_cov(f, s, false);
    const Eigen::VectorXd muhat = m.mu.normalized();
    surf.add(muhat, s.dot(muhat));
  }
  return surf;
}

}  // namespace percoz
