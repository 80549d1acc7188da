#include <cmath>
#include <random>

#include "doctest.h"
#include "percoz/renewal.hpp"

using namespace percoz;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Box strip_window(int d, int n, int w) {
  Point lo(d), hi(d);
  lo[0] = 0;
  hi[0] = n;
  for (int i = 1; i < d; ++i) {
    lo[i] = -w;
    hi[i] = w;
  }
  return Box(lo, hi);
}

}  // namespace

TEST_CASE("convolution against a point mass and brute force") {
  const Box w = Box::centered(2, 6);
  Kernel delta(2, "d");
  delta.set(Point{0, 0}, 1.0);
  const Kernel k = synthetic::full_rank(2, 0.2, 0.2, 0.1);
  const Kernel c = convolve(delta, k, w);
  for (const auto& [x, e] : k.entries) CHECK(c.value(x) == doctest::Approx(e.value));

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coord(-2, 2);
  std::uniform_real_distribution<double> val(0, 1);
  Kernel a(2, "a"), b(2, "b");
  for (int i = 0; i < 6; ++i) {
    a.add(Point{coord(rng), coord(rng)}, val(rng));
    b.add(Point{coord(rng), coord(rng)}, val(rng));
  }
  const Kernel ab = convolve(a, b, w);
  for (std::size_t i = 0; i < w.vertex_count(); ++i) {
    const Point x = w.point(i);
    double s = 0;
    for (const auto& [y, e] : a.entries) s += e.value * b.value(x - y);
    CHECK(ab.value(x) == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("convolution propagates errors") {
  Kernel a(1, "a"), b(1, "b");
  a.set(Point{1}, 0.5, 0.1);
  b.set(Point{2}, 0.4, 0.2);
  const Kernel c = convolve(a, b, Box::centered(1, 5));
  CHECK(c.value(Point{3}) == doctest::Approx(0.2));
  CHECK(c.error(Point{3}) == doctest::Approx(std::sqrt(0.16 * 0.01 + 0.25 * 0.04)));
}

TEST_CASE("geometric and three-atom renewals have closed forms") {
  const Direction t = Direction::axis(2, 0);
  const double q = 0.7;
  const auto h = renewal_solve_dense(synthetic::geometric(2, q), strip_window(2, 20, 3), t);
  for (int n = 0; n <= 20; ++n) {
    CHECK(h.at(Point{n, 0}) == doctest::Approx(std::pow(q, n)).epsilon(1e-14));
    CHECK(h.at(Point{n, 1}) == 0.0);
  }

  const auto h3 = renewal_solve_dense(synthetic::three_atom(q, 0.0), strip_window(2, 16, 16), t);
  for (int n = 0; n <= 16; ++n)
    for (int j = -n; j <= n; ++j) {
      const double expect = (n + j) % 2 == 0 ? std::pow(q, n) * binom(n, (n + j) / 2) / std::pow(2.0, n) : 0.0;
      CHECK(h3.at(Point{n, j}) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("renewal solve rejects kernels off the half-space") {
  Kernel bad(2, "f");
  bad.set(Point{0, 1}, 0.1);
  CHECK_THROWS_AS(renewal_solve_dense(bad, Box::centered(2, 3), Direction::axis(2, 0)), DomainError);
  Kernel atom0(2, "f");
  atom0.set(Point{0, 0}, 0.1);
  CHECK_THROWS_AS(renewal_solve_dense(atom0, Box::centered(2, 3), Direction::axis(2, 0)), DomainError);
}

TEST_CASE("residual and series agree with the layered solve") {
  const Kernel f = synthetic::full_rank(3, 0.15, 0.2, 0.1);
  const Box w = strip_window(3, 12, 6);
  const Direction t = Direction::axis(3, 0);
  const auto h = renewal_solve_dense(f, w, t);
  CHECK(renewal_residual(h, f) < 1e-12);
  const auto s = renewal_series(f, w, 40);
  double worst = 0;
  for (std::size_t i = 0; i < h.v.size(); ++i) worst = std::max(worst, std::fabs(h.v[i] - s.h.v[i]));
  CHECK(worst <= s.tail_bound + 1e-15);

  // a direction with irrational slope orders the same window differently
  const Direction tt = Direction::from_real({1.0, 0.01 * std::sqrt(2.0), 0.0});
  const auto h2 = renewal_solve_dense(f, w, tt);
  for (std::size_t i = 0; i < h.v.size(); ++i) CHECK(h2.v[i] == doctest::Approx(h.v[i]).epsilon(1e-13));
}

TEST_CASE("generating function") {
  const Kernel g = synthetic::geometric(2, 0.4);
  CHECK(generating_value(g, vec2(0, 0)) == doctest::Approx(0.4));
  CHECK(generating_value(g, vec2(0.3, 5)) == doctest::Approx(0.4 * std::exp(0.3)));
  CHECK_THROWS_AS(generating_value(g, vec2(800, 0)), DomainError);

  // H(s) = 1/(1 - F(s)) inside the convergence domain
  const Kernel f = synthetic::full_rank(2, 0.2, 0.2, 0.1);
  const auto h = renewal_solve_dense(f, strip_window(2, 80, 80), Direction::axis(2, 0));
  const Eigen::VectorXd s = vec2(0.1, 0.05);
  double H = 0;
  for (std::size_t i = 0; i < h.v.size(); ++i) {
    const Point x = h.box.point(i);
    H += h.v[i] * std::exp(s[0] * x[0] + s[1] * x[1]);
  }
  CHECK(H == doctest::Approx(1.0 / (1.0 - generating_value(f, s))).epsilon(1e-10));
}

TEST_CASE("tilt boundary") {
  const double q = 0.3;
  const Eigen::VectorXd s = solve_tilt_boundary(synthetic::geometric(2, q), vec2(1, 0));
  CHECK(s[0] == doctest::Approx(std::log(1 / q)).epsilon(1e-12));
  CHECK(s[1] == 0.0);

  const Kernel f = synthetic::full_rank(2, 0.2, 0.2, 0.1);
  for (double ang = -3.0; ang <= 3.0; ang += 0.5) {
    const Eigen::VectorXd dir = vec2(std::cos(ang), std::sin(ang));
    if (dir[0] <= 0 && std::fabs(dir[1]) < 1e-9) continue;
    if (dir[0] + std::fabs(dir[1]) <= 0) continue;
    const Eigen::VectorXd r = solve_tilt_boundary(f, dir);
    CHECK(std::fabs(generating_value(f, r) - 1) < 1e-10);
  }

  CHECK_THROWS_AS(solve_tilt_boundary(synthetic::geometric(2, 1.2), vec2(1, 0)), DomainError);
  CHECK_THROWS_AS(solve_tilt_boundary(synthetic::geometric(2, 0.5), vec2(-1, 0)), DomainError);
  CHECK_THROWS_AS(solve_tilt_boundary(synthetic::geometric(2, 0.5), vec2(0, 1)), DomainError);
}

TEST_CASE("tilted moments and finite differences") {
  CHECK_THROWS_AS(mean_cov(synthetic::geometric(2, 0.5), vec2(0, 0)), DomainError);
  CHECK_THROWS_AS(mean_cov(synthetic::three_atom(0.5, 0.0), vec2(0, 0)), DomainError);
  CHECK_NOTHROW(mean_cov(synthetic::three_atom(0.5, 0.0), vec2(0, 0), false));
  CHECK_NOTHROW(mean_cov(synthetic::three_atom(0.5, 0.2), vec2(0, 0)));

  const auto m = mean_cov(synthetic::three_atom(0.5, 0.0), vec2(0, 0), false);
  CHECK(m.mu[0] == doctest::Approx(1.0));
  CHECK(m.mu[1] == doctest::Approx(0.0));
  CHECK(m.cov(1, 1) == doctest::Approx(1.0));

  const Kernel f3 = synthetic::full_rank(3, 0.15, 0.2, 0.1);
  Eigen::VectorXd s(3);
  s << 0.4, 0.3, -0.2;
  const auto fd = finite_difference_check(f3, s);
  CHECK(fd.grad_error < 1e-6);
  CHECK(fd.hess_error < 1e-4);
  const auto fd2 = finite_difference_check(synthetic::three_atom(0.5, 0.2), vec2(0.7, -0.4));
  CHECK(fd2.grad_error < 1e-6);
  CHECK(fd2.hess_error < 1e-4);
}

TEST_CASE("OZ prediction tracks the exact renewal solution") {
  const Kernel f = synthetic::full_rank(2, 0.2, 0.2, 0.1);
  const auto model = build_model(f, vec2(1, 0));
  CHECK(model.mu[1] == doctest::Approx(0.0).scale(1.0));
  CHECK(std::fabs(generating_value(f, model.s_star) - 1) < 1e-10);

  // prefactor by hand for a diagonal covariance
  const double c00 = model.cov(0, 0), c11 = model.cov(1, 1);
  CHECK(std::fabs(model.cov(0, 1)) < 1e-12);
  const double mu = model.mu[0];
  CHECK(model.phi_prefactor == doctest::Approx(std::sqrt(mu / (c00 * c11 * mu * mu / c00))));

  const auto h = renewal_solve_dense(f, strip_window(2, 120, 120), Direction::axis(2, 0));
  double prev = 1;
  for (int n : {20, 40, 80}) {
    const Point x{static_cast<int>(std::floor(n * mu + 1e-9)), 0};
    const double rel = std::fabs(oz_predict(model, n) / h.at(x) - 1);
    CHECK(rel < prev);
    prev = rel;
  }
  CHECK(prev < 0.02);
}

TEST_CASE("mass gap report") {
  const Kernel f = synthetic::full_rank(2, 0.2, 0.2, 0.1);
  const Kernel h = renewal_solve(f, strip_window(2, 10, 10), Direction::axis(2, 0));
  const auto r = mass_gap_check(f, h);
  CHECK(r.points == 4);
  CHECK(r.defects.empty());
  CHECK(r.max_ratio <= 1.0);

  Kernel h0 = h;
  h0.set(Point{2, 0}, 0.0);
  CHECK(mass_gap_check(f, h0).defects.size() == 1);

  Kernel fe(1, "f"), he(1, "h");
  for (int n = 1; n <= 10; ++n) {
    fe.set(Point{n}, std::exp(-1.0 * n));
    he.set(Point{n}, std::exp(-0.5 * n));
  }
  const auto g = mass_gap_check(fe, he);
  CHECK(g.rate == doctest::Approx(0.5));
  CHECK(g.bounded_away);
}

TEST_CASE("tau of a synthetic kernel") {
  const Kernel f = synthetic::full_rank(2, 0.2, 0.2, 0.1);
  const auto tp = tau_synthetic(f, vec2(1, 0));
  CHECK(tp.tau == doctest::Approx(solve_tilt_boundary(f, vec2(1, 0))[0]).epsilon(1e-10));

  const Eigen::VectorXd xh = vec2(1, 0.3).normalized();
  const auto tq = tau_synthetic(f, xh);
  CHECK(std::fabs(generating_value(f, tq.s) - 1) < 1e-10);
  CHECK(std::fabs(tq.mu[0] * xh[1] - tq.mu[1] * xh[0]) < 1e-10);
  // tau(x) = sup over {F <= 1} of <s, xhat>: no boundary point does better
  for (double ang = -1.2; ang <= 1.2; ang += 0.1) {
    const Eigen::VectorXd s = solve_tilt_boundary(f, vec2(std::cos(ang), std::sin(ang)));
    CHECK(s.dot(xh) <= tq.tau + 1e-10);
  }
  CHECK_THROWS_AS(tau_synthetic(f, vec2(-1, 0)), DomainError);
  CHECK_THROWS_AS(tau_synthetic(f, vec2(0.2, 1)), DomainError);
}

TEST_CASE("gaussian window") {
  const Kernel f = synthetic::full_rank(2, 0.2, 0.2, 0.1);
  const auto model = build_model(f, vec2(1, 0));
  const int n = 40;
  const Point x{static_cast<int>(std::floor(n * model.mu[0] + 1e-9)), 0};
  const double out = gaussian_window_outside_mass(f, x, n, 0.1, strip_window(2, x[0], x[0]), Direction::axis(2, 0));
  CHECK(out >= 0.0);
  CHECK(out < 0.05);
  CHECK(gaussian_window_outside_mass(f, x, n, -0.4, strip_window(2, x[0], x[0]), Direction::axis(2, 0)) > out);
}

TEST_CASE("synthetic kernels from json") {
  const auto k = synthetic::from_spec({{"model", "full-rank"}, {"dim", 3}, {"a", 0.15}, {"b", 0.2}, {"c", 0.1}});
  CHECK(k.total_mass() == doctest::Approx(0.45));
  CHECK(k.value(Point{1, 0, 1}) == doctest::Approx(0.05));
  CHECK(synthetic::from_spec({{"model", "three-atom"}, {"q", 0.5}}).entries.size() == 2);
  CHECK(synthetic::from_spec({{"kernel", k.to_json()}}).total_mass() == doctest::Approx(0.45));
  CHECK_THROWS_AS(synthetic::from_spec({{"model", "nope"}}), DomainError);
}
