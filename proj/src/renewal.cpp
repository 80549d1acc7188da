#include "percoz/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace percoz {

namespace {

struct Atom {
  Point x;
  double value;
  double error;
};

std::vector<Atom> atoms_of(const Kernel& k) {
  std::vector<Atom> out;
  for (const auto& [x, e] : k.entries)
    if (e.value != 0 || e.std_error != 0) out.push_back({x, e.value, e.std_error});
  return out;
}

Eigen::VectorXd vec(const Point& x) {
  Eigen::VectorXd v(x.dim);
  for (int i = 0; i < x.dim; ++i) v[i] = x[i];
  return v;
}

void check_same_dim(const Kernel& k, Eigen::Index d) {
  if (k.dim != d) throw DomainError("kernel and tilt differ in dimension");
}

// Window indices ordered by <t,x>.
std::vector<std::size_t> layer_order(const Box& window, const Direction& t) {
  std::vector<std::size_t> idx(window.vertex_count());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (t.exact() && t.integer_vector() == Point::unit(t.dim(), 0)) return idx;  // index order is lexicographic
  std::vector<Point> pts(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) pts[i] = window.point(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return t.compare(pts[a], pts[b]) < 0; });
  return idx;
}

}  // namespace

Kernel DenseKernel::to_sparse(const std::string& kind) const {
  Kernel k(box.dim(), kind);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0) k.set(box.point(i), v[i]);
  return k;
}

Kernel convolve(const Kernel& a, const Kernel& b, const Box& window) {
  if (a.dim != b.dim || a.dim != window.dim()) throw DomainError("convolve needs equal dimensions");
  Kernel out(a.dim, a.kind + "*" + b.kind);
  std::map<Point, double> var;
  for (const auto& [za, ea] : a.entries) {
    for (const auto& [zb, eb] : b.entries) {
      const Point x = za + zb;
      if (!window.contains(x)) continue;
      out.entries[x].value += ea.value * eb.value;
      var[x] += eb.value * eb.value * ea.std_error * ea.std_error + ea.value * ea.value * eb.std_error * eb.std_error;
    }
  }
  for (auto& [x, e] : out.entries) e.std_error = std::sqrt(var[x]);
  return out;
}

DenseKernel renewal_solve_dense(const Kernel& f, const Box& window, const Direction& t) {
  if (f.dim != window.dim() || t.dim() != f.dim) throw DomainError("renewal_solve needs equal dimensions");
  const Point o(f.dim);
  if (f.value(o) != 0) throw DomainError("renewal_solve requires f(0) = 0");
  const auto atoms = atoms_of(f);
  for (const auto& at : atoms)
    if (at.value != 0 && t.compare(at.x, o) <= 0) throw DomainError("f must vanish off the half-space <t,x> > 0; entry at " + at.x.str());
  if (!window.contains(o)) throw DomainError("window must contain the origin");
  DenseKernel h(window);
  const int d = window.dim();
  for (std::size_t i : layer_order(window, t)) {
    const Point x = window.point(i);
    double s = x == o ? 1.0 : 0.0;
    for (const auto& at : atoms) {
      Point y = x;
      bool in = true;
      for (int k = 0; k < d; ++k) {
        y[k] -= at.x[k];
        if (y[k] < window.lo()[k] || y[k] > window.hi()[k]) {
          in = false;
          break;
        }
      }
      if (in) s += at.value * h.v[window.index(y)];
    }
    h.v[i] = s;
  }
  return h;
}

Kernel renewal_solve(const Kernel& f, const Box& window, const Direction& t) {
  Kernel h = renewal_solve_dense(f, window, t).to_sparse("h");
  h.support_radius = f.support_radius;
  return h;
}

double renewal_residual(const DenseKernel& h, const Kernel& f) {
  const auto atoms = atoms_of(f);
  const Box& w = h.box;
  const Point o(w.dim());
  double worst = 0;
  for (std::size_t i = 0; i < w.vertex_count(); ++i) {
    const Point x = w.point(i);
    double s = x == o ? 1.0 : 0.0;
    for (const auto& at : atoms) s += at.value * h.at(x - at.x);
    worst = std::max(worst, std::fabs(h.v[i] - s));
  }
  return worst;
}

SeriesResult renewal_series(const Kernel& f, const Box& window, int K) {
  const Point o(f.dim);
  const auto atoms = atoms_of(f);
  DenseKernel term(window), total(window);
  term.ref(o) = 1.0;
  total.ref(o) = 1.0;
  for (int k = 1; k <= K; ++k) {
    DenseKernel next(window);
    for (std::size_t i = 0; i < window.vertex_count(); ++i) {
      if (term.v[i] == 0) continue;
      const Point y = window.point(i);
      for (const auto& at : atoms) {
        const Point x = y + at.x;
        if (window.contains(x)) next.ref(x) += at.value * term.v[i];
      }
    }
    term = std::move(next);
    for (std::size_t i = 0; i < window.vertex_count(); ++i) total.v[i] += term.v[i];
  }
  const double m = f.total_mass();
  const double tail = m < 1 ? std::pow(m, K + 1) / (1 - m) : std::numeric_limits<double>::infinity();
  return {std::move(total), tail};
}

double generating_value(const Kernel& k, const Eigen::VectorXd& s) {
  check_same_dim(k, s.size());
  double total = 0;
  for (const auto& [x, e] : k.entries) {
    if (e.value == 0) continue;
    const double ex = s.dot(vec(x));
    if (ex > kMaxExponent) throw DomainError("generating function overflow at exponent " + std::to_string(ex));
    total += e.value * std::exp(ex);
  }
  return total;
}

Eigen::VectorXd solve_tilt_boundary(const Kernel& f, const Eigen::VectorXd& direction, double tol) {
  check_same_dim(f, direction.size());
  if (!(direction.norm() > 0)) throw DomainError("tilt direction must be nonzero");
  const double f0 = generating_value(f, Eigen::VectorXd::Zero(direction.size()));
  if (f0 >= 1) throw DomainError("kernel mass >= 1");
  double reach = 0;
  for (const auto& [x, e] : f.entries)
    if (e.value > 0) reach = std::max(reach, direction.dot(vec(x)));
  if (!(reach > 0)) throw DomainError("ray does not cross {F = 1}");
  const double cap = kMaxExponent / reach;
  double lo = 0, hi = std::min(1.0, cap);
  while (generating_value(f, hi * direction) < 1) {
    lo = hi;
    if (hi >= cap) throw DomainError("ray does not cross {F = 1}");
    hi = std::min(2 * hi, cap);
  }
  double lam = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd s = lam * direction;
    const double F = generating_value(f, s);
    if (std::fabs(F - 1) < tol) break;
    if (F < 1)
      lo = lam;
    else
      hi = lam;
    double dF = 0;
    for (const auto& [x, e] : f.entries)
      if (e.value != 0) dF += e.value * std::exp(s.dot(vec(x))) * direction.dot(vec(x));
    double next = dF > 0 ? lam - (F - 1) / dF : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-300) break;
    lam = next;
  }
  return lam * direction;
}

TiltMoments mean_cov(const Kernel& f, const Eigen::VectorXd& s, bool require_full_rank) {
  check_same_dim(f, s.size());
  const auto d = s.size();
  TiltMoments m;
  m.mu = Eigen::VectorXd::Zero(d);
  m.cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [x, e] : f.entries) {
    if (e.value == 0) continue;
    const double w = e.value * std::exp(s.dot(vec(x)));
    m.mass += w;
    m.mu += w * vec(x);
  }
  if (!(m.mass > 0)) throw DomainError("kernel has no mass");
  m.mu /= m.mass;
  for (const auto& [x, e] : f.entries) {
    if (e.value == 0) continue;
    const double w = e.value * std::exp(s.dot(vec(x))) / m.mass;
    const Eigen::VectorXd dx = vec(x) - m.mu;
    m.cov += w * dx * dx.transpose();
  }
  if (require_full_rank) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.cov);
    const double top = es.eigenvalues().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1e-300))) throw DomainError("singular covariance: kernel support is degenerate");
  }
  return m;
}

FiniteDifferenceCheck finite_difference_check(const Kernel& f, const Eigen::VectorXd& s, double step) {
  const auto d = s.size();
  auto lf = [&](const Eigen::VectorXd& y) { return std::log(generating_value(f, y)); };
  FiniteDifferenceCheck c;
  c.grad = Eigen::VectorXd::Zero(d);
  c.hess = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd ei = Eigen::VectorXd::Zero(d);
    ei[i] = step;
    c.grad[i] = (lf(s + ei) - lf(s - ei)) / (2 * step);
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd ej = Eigen::VectorXd::Zero(d);
      ej[j] = step;
      c.hess(i, j) = (lf(s + ei + ej) - lf(s + ei - ej) - lf(s - ei + ej) + lf(s - ei - ej)) / (4 * step * step);
    }
  }
  const auto m = mean_cov(f, s, false);
  c.grad_error = (c.grad - m.mu).cwiseAbs().maxCoeff();
  c.hess_error = (c.hess - m.cov).cwiseAbs().maxCoeff();
  return c;
}

double phi_prefactor(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
  const auto d = mu.size();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const double det = cov.determinant();
  if (!(det > 0) || ldlt.info() != Eigen::Success) throw DomainError("singular covariance");
  const double quad = mu.dot(ldlt.solve(mu));
  return std::sqrt(std::pow(mu.norm(), static_cast<double>(d - 1)) / (det * quad));
}

double phi_prefactor(const RenewalModel& model) { return phi_prefactor(model.mu, model.cov); }

RenewalModel build_model(const Kernel& f, const Eigen::VectorXd& direction) {
  RenewalModel m;
  m.f = f;
  m.truncation = f.max_norm1();
  m.s_star = solve_tilt_boundary(f, direction);
  const auto mc = mean_cov(f, m.s_star, true);
  m.mu = mc.mu;
  m.cov = mc.cov;
  m.phi_prefactor = phi_prefactor(m.mu, m.cov);
  return m;
}

double oz_predict(const RenewalModel& model, int n) {
  if (n <= 0) throw DomainError("oz_predict needs n > 0");
  const auto d = model.mu.size();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(model.cov);
  const double det = model.cov.determinant();
  if (!(det > 0)) throw DomainError("singular covariance");
  const double quad = model.mu.dot(ldlt.solve(model.mu));
  Eigen::VectorXd x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = std::floor(n * model.mu[i] + 1e-9);
  const double pre = std::pow(2 * std::numbers::pi * n, static_cast<double>(d - 1)) * det * quad;
  return std::exp(-x.dot(model.s_star)) / std::sqrt(pre);
}

double oz_predict_at(const RenewalModel& model, const Point& x) {
  const auto d = model.mu.size();
  if (x.dim != d) throw DomainError("point and model differ in dimension");
  Eigen::VectorXd xv(d);
  for (Eigen::Index i = 0; i < d; ++i) xv[i] = x[static_cast<int>(i)];
  const double n = xv.norm() / model.mu.norm();
  if (!(n > 0)) throw DomainError("oz_predict_at needs x != 0");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(model.cov);
  const double det = model.cov.determinant();
  if (!(det > 0)) throw DomainError("singular covariance");
  const double quad = model.mu.dot(ldlt.solve(model.mu));
  const double pre = std::pow(2 * std::numbers::pi * n, static_cast<double>(d - 1)) * det * quad;
  return std::exp(-xv.dot(model.s_star)) / std::sqrt(pre);
}

MassGapReport mass_gap_check(const Kernel& f, const Kernel& h) {
  MassGapReport r;
  std::vector<double> xs, ys;
  for (const auto& [x, e] : f.entries) {
    if (e.value <= 0) continue;
    ++r.points;
    const double hv = h.value(x);
    if (hv <= 0) {
      r.defects.push_back(x);
      continue;
    }
    const double ratio = e.value / hv;
    r.max_ratio = std::max(r.max_ratio, ratio);
    xs.push_back(x.norm2());
    ys.push_back(std::log(ratio));
  }
  const std::size_t n = xs.size();
  if (n < 3) {
    r.rate_error = std::numeric_limits<double>::infinity();
    return r;
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0)) {
    r.rate_error = std::numeric_limits<double>::infinity();
    return r;
  }
  const double slope = sxy / sxx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - my - slope * (xs[i] - mx);
    rss += e * e;
  }
  r.rate = -slope;
  r.rate_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  r.bounded_away = r.rate - 2 * r.rate_error > 0;
  return r;
}

TauPoint tau_synthetic(const Kernel& f, const Eigen::VectorXd& xhat_in) {
  const auto d = xhat_in.size();
  const Eigen::VectorXd xhat = xhat_in.normalized();
  Eigen::VectorXd s = solve_tilt_boundary(f, xhat);
  auto m = mean_cov(f, s, true);
  double lam = m.mu.norm();
  auto residual = [&](const Eigen::VectorXd& ss, double l, TiltMoments& mm) {
    mm = mean_cov(f, ss, false);
    Eigen::VectorXd r(d + 1);
    r.head(d) = mm.mu - l * xhat;
    r[d] = std::log(mm.mass);
    return r;
  };
  Eigen::VectorXd r = residual(s, lam, m);
  for (int it = 0; it < 100 && r.norm() > 1e-14; ++it) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d + 1, d + 1);
    J.topLeftCorner(d, d) = m.cov;
    J.block(0, d, d, 1) = -xhat;
    J.block(d, 0, 1, d) = m.mu.transpose();
    const Eigen::VectorXd step = J.fullPivLu().solve(-r);
    double a = 1;
    bool moved = false;
    for (int k = 0; k < 40; ++k, a *= 0.5) {
      TiltMoments mm;
      const Eigen::VectorXd ss = s + a * step.head(d);
      const double ll = lam + a * step[d];
      Eigen::VectorXd rr;
      try {
        rr = residual(ss, ll, mm);
      } catch (const DomainError&) {
        continue;
      }
      if (rr.norm() < r.norm()) {
        s = ss;
        lam = ll;
        r = rr;
        m = mm;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (r.norm() > 1e-9 || !(lam > 0)) throw DomainError("direction outside the support cone of the kernel");
  return {s.dot(xhat), s, m.mu};
}

double gaussian_window_outside_mass(const Kernel& f, const Point& x, int n, double alpha, const Box& window,
                                    const Direction& t) {
  const auto atoms = atoms_of(f);
  const Point o(f.dim);
  double min_step = std::numeric_limits<double>::infinity();
  for (const auto& at : atoms)
    if (at.value > 0) min_step = std::min(min_step, t.dot(at.x));
  if (!(min_step > 0)) throw DomainError("f must live on <t,x> > 0");
  const int kmax = static_cast<int>(std::floor(t.dot(x) / min_step + 1e-9));
  DenseKernel term(window);
  term.ref(o) = 1.0;
  double total = 0, outside = 0;
  const double width = std::pow(static_cast<double>(n), 0.5 + alpha);
  for (int k = 1; k <= kmax; ++k) {
    DenseKernel next(window);
    for (std::size_t i = 0; i < window.vertex_count(); ++i) {
      if (term.v[i] == 0) continue;
      const Point y = window.point(i);
      for (const auto& at : atoms) {
        const Point z = y + at.x;
        if (window.contains(z)) next.ref(z) += at.value * term.v[i];
      }
    }
    term = std::move(next);
    const double c = term.at(x);
    total += c;
    if (std::fabs(static_cast<double>(k - n)) >= width) outside += c;
  }
  return total > 0 ? outside / total : 0.0;
}

namespace synthetic {

Kernel geometric(int dim, double q) {
  Kernel k(dim, "f");
  k.set(Point::unit(dim, 0), q);
  k.support_radius = 1;
  return k;
}

Kernel three_atom(double q, double q2) {
  Kernel k(2, "f");
  k.set(Point{1, 1}, q / 2);
  k.set(Point{1, -1}, q / 2);
  if (q2 != 0) k.set(Point{2, 0}, q2);
  k.support_radius = 2;
  return k;
}

Kernel full_rank(int dim, double a, double b, double c) {
  if (dim < 2) throw DomainError("full-rank kernel needs d >= 2");
  Kernel k(dim, "f");
  const Point u1 = Point::unit(dim, 0);
  k.set(u1, a);
  for (int j = 1; j < dim; ++j) {
    k.set(u1 + Point::unit(dim, j), b / (2.0 * (dim - 1)));
    k.set(u1 - Point::unit(dim, j), b / (2.0 * (dim - 1)));
  }
  k.set(u1 * 2, c);
  k.support_radius = 2;
  return k;
}

Kernel from_spec(const nlohmann::json& spec) {
  if (spec.contains("kernel")) return Kernel::from_json(spec.at("kernel"));
  const std::string model = spec.value("model", std::string());
  if (model == "geometric") return geometric(spec.value("dim", 2), spec.at("q").get<double>());
  if (model == "three-atom") return three_atom(spec.at("q").get<double>(), spec.value("q2", 0.0));
  if (model == "full-rank")
    return full_rank(spec.value("dim", 2), spec.at("a").get<double>(), spec.at("b").get<double>(), spec.at("c").get<double>());
  throw DomainError("unknown synthetic model '" + model + "'");
}

}  // namespace synthetic

}  // namespace percoz
