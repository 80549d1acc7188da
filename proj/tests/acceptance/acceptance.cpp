// One PASS/FAIL line per acceptance criterion; detail lines start with '#'.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "percoz/asymptotics.hpp"
#include "percoz/combinatorics.hpp"
#include "percoz/exact.hpp"
#include "percoz/renewal.hpp"
#include "percoz/sampler.hpp"

using namespace percoz;

namespace {

struct Scale {
  std::uint64_t c1_samples = 1'000'000;
  std::uint64_t c7_samples = 10'000'000;
  std::uint64_t c8_samples = 10'000'000;
  int threads = 1;
};

__attribute__((format(printf, 1, 2))) void detail(const char* fmt, ...) {
  std::va_list ap;
  va_start(ap, fmt);
  std::printf("#   ");
  std::vprintf(fmt, ap);
  std::printf("\n");
  std::fflush(stdout);
  va_end(ap);
}

Box line_box(int n) { return Box(Point{-1, -1, -1}, Point{n + 1, 1, 1}); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

Eigen::VectorXd to_eigen(const Point& p) {
  Eigen::VectorXd v(p.dim);
  for (int i = 0; i < p.dim; ++i) v[i] = p[i];
  return v;
}

// ---------------------------------------------------------------- 1

bool c1(const Scale& sc) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  const std::vector<double> ps{0.3, 0.5, 0.7};

  const Box cube(Point{0, 0, 0}, Point{1, 1, 1});
  const auto con = named_event("connect", cube, Point{1, 1, 1}, Direction::axis(3, 0), 0);
  const auto rc = enumerate_event(cube, con.edges, con.predicate, "connect");
  for (double p : ps) {
    const auto v = verify_estimator(rc, con.predicate, p, sc.c1_samples, 11, 4.0);
    detail("cube 0<->(1,1,1) p=%.1f exact=%.8f mc=%.8f se=%.2e z=%+.2f", p, v.exact, v.estimate, v.std_error, v.z);
    ok &= v.pass;
  }

  // the finite connection needs sites off the shell, so it uses [-1,2]x[-1,1]^2
  const Box lb = line_box(1);
  const Point u1{1, 0, 0};
  const auto ft = named_event("finite-two-point", lb, u1, Direction::axis(3, 0), 1);
  const auto rf = enumerate_event(lb, ft.edges, ft.predicate, "finite-two-point");
  for (double p : ps) {
    SamplerParams prm;
    prm.dim = 3;
    prm.p = p;
    prm.t = Direction::axis(3, 0);
    prm.box = lb;
    prm.margin = 1;
    prm.samples = sc.c1_samples;
    prm.seed = 12;
    prm.threads = sc.threads;
    prm.kinds = kind::kFinite;
    const std::vector<Point> xs{u1};
    const auto est = estimate_kernels(prm, xs);
    const auto& r = est.results.at("two-point").at(u1);
    const double exact = rf.poly.at(p);
    const double se = std::sqrt(exact * (1 - exact) / static_cast<double>(sc.c1_samples));
    const double z = se > 0 ? (r.value - exact) / se : (r.value == exact ? 0.0 : INFINITY);
    detail("finite 0<->u1 in %d-edge box p=%.1f exact=%.3e mc=%.3e z=%+.2f", rf.poly.edges, p, exact, r.value, z);
    ok &= std::fabs(z) <= 4.0;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail("runtime %.1f s (limit 60 s)", secs);
  return ok && secs < 60;
}

// ---------------------------------------------------------------- 2

bool c2() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  const auto a = phi_exact(Point{1, 0, 0}, 8);
  const auto b = phi_exact(Point{2, 0, 0}, 8);
  detail("phi(u1)=%ld psi(u1)=%ld certified=%d; phi(2u1)=%ld certified=%d (volume 8)", a.phi, a.psi, a.certified, b.phi,
         b.certified);
  ok &= a.phi == 10 && a.psi == 1 && b.phi == 14 && a.certified && b.certified;

  for (int n = 1; n <= 3; ++n) {
    const auto r = phi_exact(Point::unit(3, 0) * n, n + 3);
    const long s = staircase_boundary(3, n);
    detail("axis n=%d phi=%ld staircase=%ld", n, r.phi, s);
    ok &= r.phi == s && s == 2 * 2 * (n + 1) + 2;
  }
  const auto ball = l1_ball(3, 3);
  PhiTable table;
  long above = 0;
  for (const auto& x : ball) {
    if (x.is_zero()) continue;
    if (table.get(x).phi > staircase_boundary(3, x.norm1())) ++above;
  }
  const auto rep = subadditivity_table(ball, table);
  detail("staircase exceeded at %ld points; subadditivity: %zu pairs, %zu violations, certified=%d", above,
         rep.pairs_checked, rep.violations.size(), rep.all_certified);
  ok &= above == 0 && rep.violations.empty();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail("runtime %.1f s (limit 300 s)", secs);
  return ok && secs < 300;
}

// ---------------------------------------------------------------- 3

bool c3() {
  bool ok = true;
  std::vector<double> ps;
  for (int i = 1; i <= 9; ++i) ps.push_back(i / 10.0);
  for (int n : {1, 2}) {
    const Box b = line_box(n);
    const Point x = Point::unit(3, 0) * n;
    const auto ev = named_event("finite-two-point", b, x, Direction::axis(3, 0), 1);
    const auto r = enumerate_event(b, ev.edges, ev.predicate, "finite-two-point");
    const auto comb = phi_exact(x, n + 4);
    const bool holds = dominates_bound(r.poly, comb.psi, comb.phi, ps);
    detail("x=%du1: %d edges, psi=%ld phi=%ld, P(0.5)=%.6e bound=%.6e holds=%d", n, r.poly.edges, comb.psi, comb.phi,
           r.poly.at(0.5), std::pow(0.5, comb.psi + comb.phi), holds);
    ok &= holds;
  }
  return ok;
}

// ---------------------------------------------------------------- 4

bool c4() {
  bool ok = true;
  const int N = 200;
  struct Case {
    const char* name;
    Kernel f;
    Box window;
  };
  const std::vector<Case> cases{
      {"geometric q=0.6", synthetic::geometric(2, 0.6), Box(Point{0, -2}, Point{N, 2})},
      {"three-atom q=0.5 q2=0.3", synthetic::three_atom(0.5, 0.3), Box(Point{0, -N}, Point{N, N})},
  };
  for (const auto& c : cases) {
    const auto h = renewal_solve_dense(c.f, c.window, Direction::axis(2, 0));
    const double res = renewal_residual(h, c.f);
    // every path to layer n takes at most n steps
    const auto s = renewal_series(c.f, c.window, N);
    double diff = 0;
    for (std::size_t i = 0; i < h.v.size(); ++i) diff = std::max(diff, std::fabs(h.v[i] - s.h.v[i]));
    double closed = 0;
    if (c.f.entries.size() == 1) {
      for (int n = 0; n <= N; ++n) closed = std::max(closed, std::fabs(h.at(Point{n, 0}) - std::pow(0.6, n)));
    }
    detail("%s: window %ld sites, residual %.2e, series diff %.2e (tail bound %.2e), closed-form diff %.2e", c.name,
           static_cast<long>(h.v.size()), res, diff, s.tail_bound, closed);
    ok &= res < 1e-12 && diff <= s.tail_bound + 1e-15 && closed < 1e-12;
  }
  return ok;
}

// ---------------------------------------------------------------- 5

struct SeriesCase {
  const char* name;
  Kernel f;
  Point v;  // lattice step parallel to mu
  Eigen::VectorXd xhat;
};

DecaySeries renewal_series_along(const Kernel& f, const Point& v, int n0, int n1, int W) {
  const int d = f.dim;
  Point lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    const int a = std::min(0, n1 * v[i]), b = std::max(0, n1 * v[i]);
    lo[i] = i == 0 ? a : a - W;
    hi[i] = i == 0 ? b : b + W;
  }
  const auto h = renewal_solve_dense(f, Box(lo, hi), Direction::axis(d, 0));
  DecaySeries s;
  s.direction = to_eigen(v).normalized();
  s.step = to_eigen(v).norm();
  s.source = SeriesSource::renewal_solve;
  for (int n = n0; n <= n1; ++n) s.samples.push_back({n, h.at(v * n), 0.0});
  return s;
}

bool c5() {
  bool ok = true;
  const std::vector<SeriesCase> cases{
      {"d=2 full-rank axis", synthetic::full_rank(2, 0.2, 0.2, 0.1), Point{1, 0}, vec({1, 0})},
      {"d=2 full-rank (2,1)", synthetic::full_rank(2, 0.2, 0.2, 0.1), Point{2, 1}, vec({2, 1}).normalized()},
      {"d=3 full-rank axis", synthetic::full_rank(3, 0.15, 0.2, 0.1), Point{1, 0, 0}, vec({1, 0, 0})},
  };
  for (const auto& c : cases) {
    // the tilt whose mean points along xhat
    const auto tp = tau_synthetic(c.f, c.xhat);
    const double F = generating_value(c.f, tp.s);
    const auto fd = finite_difference_check(c.f, tp.s);
    const auto mc = mean_cov(c.f, tp.s);
    const double mu_dir = (mc.mu.normalized() - c.xhat).norm();
    // ray root on the same ray agrees with the Newton point
    const auto s_ray = solve_tilt_boundary(c.f, tp.s.normalized());
    const double F_ray = generating_value(c.f, s_ray);
    const auto series = renewal_series_along(c.f, c.v, 20, 120, 120);
    const auto fit = oz_fit(series, c.f.dim);
    const double polar = tp.s.dot(mc.mu.normalized());
    const double tau_unit = fit.tau / series.step;
    const double rel = std::fabs(tau_unit - polar) / polar;
    detail("%s: |F(s*)-1|=%.1e |F(ray)-1|=%.1e grad err %.1e hess err %.1e mu angle %.1e", c.name, std::fabs(F - 1),
           std::fabs(F_ray - 1), fd.grad_error, fd.hess_error, mu_dir);
    detail("%s: tau fitted %.8f per unit length, <s*,mu/|mu|> %.8f, relative gap %.2e", c.name, tau_unit, polar, rel);
    ok &= std::fabs(F - 1) < 1e-10 && std::fabs(F_ray - 1) < 1e-10 && fd.grad_error < 1e-6 && fd.hess_error < 1e-4 &&
          mu_dir < 1e-8 && rel < 0.02;
  }
  return ok;
}

// ---------------------------------------------------------------- 6

bool c6() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  const std::vector<std::pair<const char*, Kernel>> cases{
      {"d=2 a=0.2 b=0.2 c=0.1", synthetic::full_rank(2, 0.2, 0.2, 0.1)},
      {"d=3 a=0.15 b=0.2 c=0.1", synthetic::full_rank(3, 0.15, 0.2, 0.1)},
  };
  for (const auto& [name, f] : cases) {
    const int d = f.dim;
    const auto model = build_model(f, Eigen::VectorXd::Unit(d, 0));
    const auto series = renewal_series_along(f, Point::unit(d, 0), 20, 120, 120);
    const auto fit = oz_fit(series, d);
    const double rel = fit.phi / model.phi_prefactor - 1;
    detail("%s: Phi fitted %.6f closed form %.6f (rel %+.2e); rms early %.2e late %.2e; kappa %.4f", name, fit.phi,
           model.phi_prefactor, rel, fit.early_rms, fit.late_rms, fit.kappa);
    ok &= std::fabs(rel) < 0.05 && fit.residuals_shrink && !fit.model_mismatch;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail("runtime %.1f s (limit 120 s)", secs);
  return ok && secs < 120;
}

// ---------------------------------------------------------------- 7

bool c7(const Scale& sc) {
  const int d = 3;
  const Point u1 = Point::unit(d, 0);
  std::vector<Point> xs;
  for (int n = 1; n <= 5; ++n)
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b) xs.push_back(Point{n, a, b});
  SamplerParams prm;
  prm.dim = d;
  prm.p = 0.35;
  prm.t = Direction::axis(d, 0);
  prm.box = Box::centered(d, 12);
  prm.margin = 1;
  prm.samples = sc.c7_samples;
  prm.seed = 7;
  prm.threads = sc.threads;
  prm.kinds = kind::kH | kind::kF;
  const auto est = estimate_kernels(prm, xs);
  const Kernel& h = est.kernels.at("h");
  const Kernel& f = est.kernels.at("f");
  detail("%llu samples, box [-12,12]^3, p=0.35, %zu displacements, implication violations %llu",
         static_cast<unsigned long long>(sc.c7_samples), xs.size(), static_cast<unsigned long long>(est.implication_violations));
  bool ok = true;
  for (int n = 1; n <= 5; ++n) {
    const Point x = u1 * n;
    double conv = 0, var = 0;
    for (const auto& [y, fe] : f.entries) {
      const Point r = x - y;
      const double hv = h.value(r), he = h.error(r);
      conv += fe.value * hv;
      var += hv * hv * fe.std_error * fe.std_error + fe.value * fe.value * he * he;
    }
    const double sd = std::sqrt(var + h.error(x) * h.error(x));
    const double z = sd > 0 ? (h.value(x) - conv) / sd : (h.value(x) == conv ? 0.0 : INFINITY);
    detail("renewal x=%du1: h=%.4e (se %.1e) f*h=%.4e z=%+.2f", n, h.value(x), h.error(x), conv, z);
    ok &= std::fabs(z) <= 3.0;
  }
  for (int a = 1; a <= 4; ++a)
    for (int b = a; a + b <= 5; ++b) {
      const double ha = h.value(u1 * a), hb = h.value(u1 * b), hs = h.value(u1 * (a + b));
      const double sd = std::sqrt(hb * hb * h.error(u1 * a) * h.error(u1 * a) + ha * ha * h.error(u1 * b) * h.error(u1 * b) +
                                  h.error(u1 * (a + b)) * h.error(u1 * (a + b)));
      const double z = sd > 0 ? (ha * hb - hs) / sd : (ha * hb <= hs ? 0.0 : INFINITY);
      detail("supermultiplicative %du1+%du1: h(x)h(y)=%.3e h(x+y)=%.3e z=%+.2f", a, b, ha * hb, hs, z);
      ok &= z <= 3.0;
    }
  return ok && est.implication_violations == 0;
}

// ---------------------------------------------------------------- 8

bool c8(const Scale& sc) {
  SamplerParams prm;
  prm.dim = 3;
  prm.p = 0.35;
  prm.t = Direction::axis(3, 0);
  prm.box = Box::centered(3, 4);
  prm.margin = 1;
  prm.samples = sc.c8_samples;
  prm.seed = 8;
  prm.kinds = kind::kEvents;
  const std::vector<Point> xs{{1, 0, 0}, {2, 0, 0}, {1, 1, 0}, {2, 1, 0}};
  std::uint64_t premises[4] = {0, 0, 0, 0}, broken[4] = {0, 0, 0, 0}, records = 0;
  for_each_record(prm, xs, [&](std::uint64_t, const EventRecord& r) {
    ++records;
    const bool pre[4] = {r.f, r.f_bar, r.f_tilde, r.g};
    const bool con[4] = {r.h, r.h_bar, r.h_tilde, r.finite_connect};
    for (int i = 0; i < 4; ++i) {
      premises[i] += pre[i];
      broken[i] += pre[i] && !con[i];
    }
  });
  const char* names[4] = {"f=>h", "fbar=>hbar", "ftilde=>htilde", "g=>finite"};
  bool ok = sc.c8_samples >= 10'000'000;
  for (int i = 0; i < 4; ++i) {
    detail("%-15s premise held %llu times, exceptions %llu", names[i], static_cast<unsigned long long>(premises[i]),
           static_cast<unsigned long long>(broken[i]));
    ok &= broken[i] == 0;
  }
  detail("%llu configurations, %llu records, box [-4,4]^3, p=0.35", static_cast<unsigned long long>(sc.c8_samples),
         static_cast<unsigned long long>(records));
  return ok;
}

// ---------------------------------------------------------------- 9

bool c9() {
  const Box b = line_box(1);
  const auto ev = named_event("finite-two-point", b, Point{1, 0, 0}, Direction::axis(3, 0), 1);
  const auto w = find_non_monotonicity(b, ev.edges, ev.predicate);
  if (!w.destroys) {
    detail("no configuration where opening an edge destroys the finite connection");
    return false;
  }
  BondConfig lo(b);
  for (const auto& e : w.destroys->lower_open) lo.set(e, true);
  BondConfig hi = lo;
  hi.set(w.destroys->flipped, true);
  const bool replay = finite_two_point(lo, Point{1, 0, 0}) && !finite_two_point(hi, Point{1, 0, 0});
  std::string open;
  for (const auto& e : w.destroys->lower_open) open += " " + e.base.str() + "+e" + std::to_string(e.axis);
  detail("lower config open edges:%s", open.c_str());
  detail("opening %s+e%d turns the finite connection off; replay %s", w.destroys->flipped.base.str().c_str(),
         w.destroys->flipped.axis, replay ? "confirms" : "disagrees");
  return replay && w.witnessed();
}

// ---------------------------------------------------------------- 10

// neighbourhood of the quadratic fit and the calibration tolerance it allows
constexpr double kCurvRadius = 0.15;
constexpr double kFitTol = 0.01;

bool c10() {
  bool ok = true;
  const Kernel f = synthetic::full_rank(3, 0.15, 0.2, 0.1);
  const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(3, 0);
  const auto rays = refine_directions(e1, 81, 0.6);
  const TauSurface surf = trace_tilt_surface(f, rays);
  const auto conv = convexity_check(surf, [&f](const Eigen::VectorXd& u) { return tau_synthetic(f, u).tau; });
  detail("tilt-traced surface: %zu directions, %zu pairs, %zu defects at 3 sigma, min margin %.3e", surf.size(),
         conv.checked, conv.defects.size(), conv.min_margin);
  ok &= conv.defects.empty() && conv.checked > 0;

  const auto fine = refine_directions(e1, 81, kCurvRadius);
  const auto pts = equidecay_surface(trace_tilt_surface(f, fine));
  const auto cr = curvature_check(pts, e1, kCurvRadius);
  const auto model = build_model(f, e1);
  const double polar = model.mu.norm() / model.cov(1, 1);
  bool pos = true;
  for (std::size_t i = 0; i < cr.curvatures.size(); ++i) pos &= cr.curvatures[i] - 2 * cr.std_errors[i] > 0;
  detail("curvatures %.5f %.5f (se %.1e %.1e), %zu points; polar prediction |mu|/C_perp %.5f (rel %+.2e)",
         cr.curvatures[0], cr.curvatures[1], cr.std_errors[0], cr.std_errors[1], cr.points_used, polar,
         cr.curvatures[0] / polar - 1);
  ok &= pos;

  std::vector<Eigen::VectorXd> sphere, ellipsoid;
  const Eigen::VectorXd axes = vec({1, 2, 2});
  for (const auto& u : fine) {
    sphere.push_back(u);
    ellipsoid.push_back(u / u.cwiseQuotient(axes).norm());
  }
  const auto cs = curvature_check(sphere, e1, kCurvRadius);
  const auto ce = curvature_check(ellipsoid, e1, kCurvRadius);
  double es = 0;
  for (double k : cs.curvatures) es = std::max(es, std::fabs(k - 1));
  // pole of the (1,2,2) ellipsoid: both curvatures a/b^2 = 1/4, Gaussian 1/16
  const double eg = std::fabs(ce.gaussian * 16 - 1);
  detail("unit sphere: %.5f %.5f (expect 1); ellipsoid (1,2,2) pole: Gaussian %.6f (expect 0.0625); tolerance %.0f%%",
         cs.curvatures[0], cs.curvatures[1], ce.gaussian, 100 * kFitTol);
  ok &= es < kFitTol && eg < 2 * kFitTol;
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"percoz acceptance criteria"};
  Scale sc;
  std::vector<int> only;
  std::vector<int> known;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--known-failures", known, "Criteria expected to fail; the exit status is 0 iff the failures are exactly these")
      ->delimiter(',');
  app.add_option("--c1-samples", sc.c1_samples)->capture_default_str();
  app.add_option("--c7-samples", sc.c7_samples)->capture_default_str();
  app.add_option("--c8-samples", sc.c8_samples)->capture_default_str();
  app.add_option("--threads", sc.threads)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<bool()>>> criteria{
      {"oracle equivalence (Monte Carlo vs exact enumeration, 4 sigma)", [&] { return c1(sc); }},
      {"combinatorics (phi, psi, staircase, subadditivity)", [] { return c2(); }},
      {"exact probabilities dominate p^psi (1-p)^phi", [] { return c3(); }},
      {"renewal identity and series (geometric, three-atom, n<=200)", [] { return c4(); }},
      {"tilt machinery and polar relation", [] { return c5(); }},
      {"OZ reproduction on full-rank synthetic kernels", [] { return c6(); }},
      {"percolation renewal consistency, d=3 p=0.35", [&] { return c7(sc); }},
      {"event algebra implications", [&] { return c8(sc); }},
      {"non-monotonicity witness", [] { return c9(); }},
      {"surface convexity and curvature", [] { return c10(); }},
  };
  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string err;
    try {
      pass = criteria[i].second();
    } catch (const std::exception& e) {
      err = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!err.empty()) detail("exception: %s", err.c_str());
    std::printf("C%-2d %s  %s  [%.1f s]\n", id, pass ? "PASS" : "FAIL", criteria[i].first, secs);
    std::fflush(stdout);
    if (!pass) failed.insert(id);
  }
  std::set<int> expected;
  for (int k : known)
    if (only.empty() || std::find(only.begin(), only.end(), k) != only.end()) expected.insert(k);
  if (failed != expected) {
    std::printf("# failures differ from the known set\n");
    return 1;
  }
  if (!failed.empty()) std::printf("# all failures are known and documented\n");
  return 0;
}
