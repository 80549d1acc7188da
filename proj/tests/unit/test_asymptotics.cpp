#include <cmath>
#include <numbers>

#include "doctest.h"
#include "percoz/asymptotics.hpp"
#include "percoz/renewal.hpp"

using namespace percoz;

namespace {

Eigen::VectorXd v3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

Eigen::VectorXd v2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

DecaySeries series_of(int d, int n0, int n1, const std::function<double(int)>& value) {
  DecaySeries s;
  s.direction = Eigen::VectorXd::Unit(d, 0);
  for (int n = n0; n <= n1; ++n) s.samples.push_back({n, value(n), 0.0});
  return s;
}

// Axis series of the renewal solution for a kernel with mu parallel to u1.
DecaySeries renewal_series_axis(const Kernel& f, int n0, int n1) {
  const int d = f.dim;
  Point lo(d), hi(d);
  hi[0] = n1;
  for (int i = 1; i < d; ++i) {
    lo[i] = -n1;
    hi[i] = n1;
  }
  const auto h = renewal_solve_dense(f, Box(lo, hi), Direction::axis(d, 0));
  return series_of(d, n0, n1, [&](int n) { return h.at(Point::unit(d, 0) * n); });
}

std::vector<Eigen::VectorXd> sphere_cap(const Eigen::VectorXd& scale, double radius, int rings) {
  std::vector<Eigen::VectorXd> pts;
  pts.push_back(v3(scale[0], 0, 0));
  for (int r = 1; r <= rings; ++r) {
    const double th = radius * r / rings;
    for (int k = 0; k < 12; ++k) {
      const double ph = 2 * std::numbers::pi * k / 12;
      pts.push_back(v3(scale[0] * std::cos(th), scale[1] * std::sin(th) * std::cos(ph), scale[2] * std::sin(th) * std::sin(ph)));
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("tau_fit trivial series") {
  const double q = 0.6;
  const auto fit = tau_fit(series_of(2, 1, 10, [&](int n) { return std::pow(q, n); }));
  CHECK(fit.tau == doctest::Approx(std::log(1 / q)).epsilon(1e-12));
  CHECK(std::fabs(tau_fit(series_of(2, 1, 10, [](int) { return 0.3; })).tau) < 1e-12);

  auto s = series_of(2, 1, 6, [&](int n) { return std::pow(q, n); });
  s.samples[2].value = 0;
  const auto f2 = tau_fit(s);
  CHECK(f2.dropped == 1);
  CHECK(f2.warnings.size() == 1);
  s.samples[3].value = -1;
  s.samples[4].value = 0;
  CHECK_THROWS_AS(tau_fit(s), DomainError);

  auto bad = series_of(2, 1, 6, [](int) { return 1.0; });
  bad.samples[3].n = 2;
  CHECK_THROWS_AS(tau_fit(bad), DomainError);
}

TEST_CASE("tau_fit with errors weights the points") {
  auto s = series_of(2, 1, 8, [](int n) { return std::exp(-0.5 * n); });
  for (auto& p : s.samples) p.std_error = 0.01 * p.value;
  s.samples.back().value *= 3;  // an outlier with a huge error barely moves the fit
  s.samples.back().std_error = 100 * s.samples.back().value;
  CHECK(tau_fit(s).tau == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("oz_fit round trip and mismatch flag") {
  for (int d : {2, 3}) {
    const double tau = 0.37, phi = 1.9;
    auto s = series_of(d, 5, 60, [&](int n) { return oz_form(tau, phi, d, n); });
    const auto fit = oz_fit(s, d);
    CHECK(fit.tau == doctest::Approx(tau).epsilon(1e-10));
    CHECK(fit.phi == doctest::Approx(phi).epsilon(1e-10));
    CHECK_FALSE(fit.model_mismatch);
    CHECK(fit.kappa == doctest::Approx(0.5 * (d - 1)).epsilon(1e-8));
    CHECK(fit.naive_tau > tau);
    CHECK(fit.naive_disagrees);

    const auto pure = oz_fit(series_of(d, 5, 60, [&](int n) { return phi * std::exp(-tau * n); }), d);
    CHECK(pure.model_mismatch);
    CHECK(std::fabs(pure.kappa) < 1e-8);
  }
}

TEST_CASE("oz_fit on a renewal solution recovers the prefactor") {
  const Kernel f = synthetic::full_rank(2, 0.2, 0.2, 0.1);
  const auto model = build_model(f, v2(1, 0));
  const auto s = renewal_series_axis(f, 20, 120);
  const auto fit = oz_fit(s, 2);
  CHECK(fit.phi == doctest::Approx(model.phi_prefactor).epsilon(0.05));
  CHECK(fit.tau == doctest::Approx(model.s_star[0]).epsilon(1e-3));
  CHECK(fit.residuals_shrink);
  CHECK_FALSE(fit.model_mismatch);

  const auto naive = tau_fit(s);
  CHECK(naive.tau == doctest::Approx(model.s_star.dot(model.mu) / model.mu[0]).epsilon(0.01));
}

TEST_CASE("equi-decay surface of trivial tau") {
  TauSurface one, two;
  for (const auto& d : neighbour_directions(3)) {
    one.add(d, 1.0);
    two.add(d, 2.0);
  }
  CHECK(one.size() == 26);
  for (const auto& p : equidecay_surface(one)) CHECK(p.norm() == doctest::Approx(1.0));
  for (const auto& p : equidecay_surface(two)) CHECK(p.norm() == doctest::Approx(0.5));
  CHECK_NOTHROW(one.validate());
  TauSurface bad = one;
  bad.tau[3] = 0;
  CHECK_THROWS_AS(equidecay_surface(bad), DomainError);
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad.tau[3] = 101;
  CHECK_THROWS_AS(bad.validate(), DomainError);

  const auto back = TauSurface::from_json(two.to_json());
  CHECK(back.size() == 26);
  CHECK(back.tau[5] == 2.0);
}

TEST_CASE("convexity check") {
  Eigen::Matrix3d Q;
  Q << 2, 0.3, 0, 0.3, 1, 0.1, 0, 0.1, 1.5;
  const TauEvaluator ip = [&](const Eigen::VectorXd& x) { return std::sqrt(x.dot(Q * x)); };
  TauSurface s;
  for (const auto& d : neighbour_directions(3)) s.add(d, ip(d), 1e-6);
  const auto rep = convexity_check(s, ip);
  CHECK(rep.defects.empty());
  CHECK(rep.equalities.empty());
  CHECK(rep.min_margin > 0);
  CHECK(rep.checked > 300);

  // lookup mode: only sums landing on sampled directions
  const auto rep2 = convexity_check(s);
  CHECK(rep2.checked > 0);
  CHECK(rep2.defects.empty());

  const Eigen::VectorXd l = v3(1, 0.5, 0);
  const TauEvaluator lin = [&](const Eigen::VectorXd& x) { return std::fabs(l.dot(x)); };
  TauSurface sl;
  for (const auto& d : neighbour_directions(3)) sl.add(d, lin(d));
  const auto rl = convexity_check(sl, lin);
  CHECK(rl.defects.empty());
  CHECK(rl.equalities.size() > 0);

  // a concave profile is caught
  const TauEvaluator conc = [](const Eigen::VectorXd& x) { return std::sqrt(std::fabs(x[0])) + std::sqrt(std::fabs(x[1])) + std::fabs(x[2]); };
  TauSurface sc;
  for (const auto& d : neighbour_directions(3)) sc.add(d, conc(d));
  CHECK_FALSE(convexity_check(sc, conc).defects.empty());

  TauSurface flat;
  flat.add(v3(1, 0, 0), 1);
  flat.add(v3(0, 1, 0), 1);
  flat.add(v3(1, 1, 0), 1);
  CHECK_THROWS_AS(convexity_check(flat), DomainError);
}

TEST_CASE("curvature calibration: sphere and ellipsoid") {
  const auto sph = curvature_check(sphere_cap(v3(1, 1, 1), 0.15, 4), v3(1, 0, 0));
  REQUIRE(sph.curvatures.size() == 2);
  for (double k : sph.curvatures) CHECK(k == doctest::Approx(1.0).epsilon(0.01));
  CHECK(sph.positive);
  CHECK(sph.normal[0] < 0);

  const auto ell = curvature_check(sphere_cap(v3(1, 2, 2), 0.15, 4), v3(1, 0, 0));
  for (double k : ell.curvatures) CHECK(k == doctest::Approx(0.25).epsilon(0.01));
  CHECK(ell.gaussian == doctest::Approx(1.0 / 16).epsilon(0.02));

  CHECK_THROWS_WITH(curvature_check(sphere_cap(v3(1, 1, 1), 0.15, 4), v3(0, 1, 0)), "insufficient angular resolution");
  std::vector<Eigen::VectorXd> line;
  for (int i = -6; i <= 6; ++i) line.push_back(v3(1, 0.01 * i, 0));
  CHECK_THROWS_WITH(curvature_check(line, v3(1, 0, 0)), "insufficient angular resolution");
}

TEST_CASE("curvature of a synthetic tau surface traced by tilt rays") {
  const Kernel f = synthetic::full_rank(3, 0.15, 0.2, 0.1);
  const auto rays = refine_directions(v3(1, 0, 0), 41, 0.6);
  const TauSurface surf = trace_tilt_surface(f, rays);
  CHECK_NOTHROW(surf.validate());
  const auto c = curvature_check(equidecay_surface(surf), v3(1, 0, 0), 0.5);
  for (double k : c.curvatures) CHECK(k > 0);
  CHECK(c.positive);
  // mu is parallel to u1 on the axis ray
  CHECK(surf.directions[0][0] == doctest::Approx(1.0));
  const auto tp = tau_synthetic(f, v3(1, 0, 0));
  CHECK(surf.tau[0] == doctest::Approx(tp.tau).epsilon(1e-10));

  const auto conv = convexity_check(surf, [&](const Eigen::VectorXd& x) { return tau_synthetic(f, x).tau; });
  CHECK(conv.defects.empty());
}

TEST_CASE("dual directions") {
  const auto grid = neighbour_directions(3);
  auto table_of = [&](const std::function<double(const Eigen::VectorXd&)>& phi) {
    std::vector<PhiBarEntry> t;
    for (const auto& g : grid) t.push_back({g, phi(g)});
    return t;
  };
  const auto euclid = table_of([](const Eigen::VectorXd& y) { return 3 * y.norm(); });
  const auto e = dual_directions(v3(1, 1, 0), euclid);
  REQUIRE(e.duals.size() == 1);
  CHECK((e.representative - v3(1, 1, 0).normalized()).norm() < 1e-12);

  const auto l1 = table_of([](const Eigen::VectorXd& y) { return y.lpNorm<1>(); });
  const auto face = dual_directions(v3(1, 0, 0), l1);
  CHECK(face.duals.size() == 9);
  CHECK((face.representative - v3(1, 0, 0)).norm() < 1e-12);
  const auto corner = dual_directions(v3(1, 1, 1), l1);
  REQUIRE(corner.duals.size() == 1);
  CHECK((corner.representative - v3(1, 1, 1).normalized()).norm() < 1e-12);

  // for a sup-norm phi the diagonal sees a face, not a corner
  const auto linf = table_of([](const Eigen::VectorXd& y) { return y.lpNorm<Eigen::Infinity>(); });
  CHECK(dual_directions(v3(1, 1, 1), linf).duals.size() == 7);

  std::vector<PhiBarEntry> sparse{{v3(1, 0, 0), 1.0}};
  CHECK_THROWS_AS(dual_directions(v3(0, 1, 0), sparse), DomainError);
  const auto none = dual_directions(v3(1, 0, 0), sparse, {v3(0, 1, 0), v3(-1, 0, 0)});
  CHECK(none.duals.empty());
  CHECK(none.warnings.size() == 1);
}

TEST_CASE("direction grids") {
  CHECK(neighbour_directions(2).size() == 8);
  const auto r = refine_directions(v3(1, 1, 0), 17, 0.2);
  CHECK(r.size() == 17);
  for (const auto& x : r) {
    CHECK(x.norm() == doctest::Approx(1.0));
    CHECK(x.dot(v3(1, 1, 0).normalized()) >= std::cos(0.2) - 1e-12);
  }
}

TEST_CASE("decay series json") {
  auto s = series_of(3, 1, 4, [](int n) { return 1.0 / n; });
  s.source = SeriesSource::monte_carlo;
  s.samples[1].std_error = 0.1;
  const auto b = DecaySeries::from_json(s.to_json());
  CHECK(b.samples.size() == 4);
  CHECK(b.samples[1].std_error == 0.1);
  CHECK(b.source == SeriesSource::monte_carlo);
  CHECK_THROWS_AS(parse_source("guess"), DomainError);
}
