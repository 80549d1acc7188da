#include "percoz/exact.hpp"

#include <bit>
#include <cmath>
#include <memory>

#include "percoz/explorer.hpp"
#include "percoz/sampler.hpp"

namespace percoz {

namespace {

BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Rational rpow(const Rational& x, int k) {
  Rational r = 1;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

std::vector<Edge> open_edges_of(const std::vector<Edge>& edges, std::uint64_t mask) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if ((mask >> i) & 1u) out.push_back(edges[i]);
  return out;
}

}  // namespace

Rational to_rational(double x) {
  if (!std::isfinite(x)) throw DomainError("non-finite probability");
  int exp = 0;
  const double m = std::frexp(x, &exp);
  const auto mant = static_cast<long long>(std::ldexp(m, 53));
  Rational r = mant;
  const int shift = exp - 53;
  if (shift >= 0)
    r *= rpow(Rational(2), shift);
  else
    r /= rpow(Rational(2), -shift);
  return r;
}

Rational ExactPolynomial::eval(const Rational& p) const {
  const Rational q = 1 - p;
  Rational s = 0;
  for (int k = 0; k <= edges; ++k)
    if (counts[static_cast<std::size_t>(k)] != 0) s += Rational(counts[static_cast<std::size_t>(k)]) * rpow(p, k) * rpow(q, edges - k);
  return s;
}

double ExactPolynomial::at(double p) const { return static_cast<double>(eval(to_rational(p))); }

Rational ExactPolynomial::derivative(const Rational& p) const {
  const Rational q = 1 - p;
  Rational s = 0;
  for (int k = 0; k <= edges; ++k) {
    const Rational c(counts[static_cast<std::size_t>(k)]);
    if (c == 0) continue;
    if (k > 0) s += c * k * rpow(p, k - 1) * rpow(q, edges - k);
    if (k < edges) s -= c * (edges - k) * rpow(p, k) * rpow(q, edges - k - 1);
  }
  return s;
}

std::vector<BigInt> ExactPolynomial::power_coefficients() const {
  std::vector<BigInt> a(static_cast<std::size_t>(edges) + 1, 0);
  for (int k = 0; k <= edges; ++k)
    for (int i = 0; i <= edges - k; ++i) {
      const BigInt term = counts[static_cast<std::size_t>(k)] * binomial(edges - k, i);
      if (i % 2)
        a[static_cast<std::size_t>(k + i)] -= term;
      else
        a[static_cast<std::size_t>(k + i)] += term;
    }
  return a;
}

BigInt ExactPolynomial::total() const {
  BigInt s = 0;
  for (const auto& c : counts) s += c;
  return s;
}

nlohmann::json ExactResult::to_json(const std::vector<double>& ps) const {
  nlohmann::json j;
  j["event"] = event;
  j["box"] = {{"lo", std::vector<int>(box.lo().c.begin(), box.lo().c.begin() + box.dim())},
              {"hi", std::vector<int>(box.hi().c.begin(), box.hi().c.begin() + box.dim())}};
  j["edges"] = poly.edges;
  j["counts_by_open_edges"] = nlohmann::json::array();
  for (const auto& c : poly.counts) j["counts_by_open_edges"].push_back(c.str());
  j["power_coefficients"] = nlohmann::json::array();
  for (const auto& c : poly.power_coefficients()) j["power_coefficients"].push_back(c.str());
  j["values"] = nlohmann::json::array();
  for (double p : ps) {
    const Rational v = poly.eval(to_rational(p));
    j["values"].push_back({{"p", p}, {"value", static_cast<double>(v)}});
  }
  return j;
}

std::vector<Edge> all_edges(const Box& box) {
  std::vector<Edge> out;
  box.for_each_edge([&](std::size_t slot) { out.push_back(box.edge_at_slot(slot)); });
  return out;
}

std::vector<Edge> relevant_edges(const Box& box) {
  std::vector<Edge> out;
  box.for_each_edge([&](std::size_t slot) {
    const Edge e = box.edge_at_slot(slot);
    if (!box.on_shell(e.base) || !box.on_shell(e.tip())) out.push_back(e);
  });
  return out;
}

ExactResult enumerate_event(const Box& box, const std::vector<Edge>& edges, const ConfigPredicate& event,
                            const std::string& name) {
  const int E = static_cast<int>(edges.size());
  if (E > kMaxExactEdges)
    throw DomainError("exact enumeration refused: " + std::to_string(E) + " edges exceeds the budget of " +
                      std::to_string(kMaxExactEdges));
  std::vector<std::size_t> slots;
  for (const auto& e : edges) {
    if (!box.contains(e)) throw DomainError("edge outside the box");
    slots.push_back(box.slot(e));
  }
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(E) + 1, 0);
  BondConfig cfg(box);
  int open = 0;
  const std::uint64_t total = std::uint64_t{1} << E;
  // Gray code: one edge flips per step
  std::uint64_t gray = 0;
  for (std::uint64_t i = 0; i < total; ++i) {
    if (i > 0) {
      const int bit = std::countr_zero(i);
      gray ^= std::uint64_t{1} << bit;
      const bool now = (gray >> bit) & 1u;
      cfg.set(slots[static_cast<std::size_t>(bit)], now);
      open += now ? 1 : -1;
    }
    if (event(cfg)) ++counts[static_cast<std::size_t>(open)];
  }
  ExactResult r;
  r.event = name;
  r.box = box;
  r.edges = edges;
  r.poly.edges = E;
  for (auto c : counts) r.poly.counts.emplace_back(c);
  return r;
}

const std::vector<std::string>& named_event_list() {
  static const std::vector<std::string> names{"connect", "finite-two-point", "h",       "f",          "g",
                                              "h_bar",   "f_bar",            "h_tilde", "f_tilde",    "edge-open",
                                              "tautology"};
  return names;
}

NamedEvent named_event(const std::string& name, const Box& box, const Point& x, const Direction& t, int margin) {
  const Point o(box.dim());
  if (!box.contains(o) || !box.contains(x)) throw DomainError("0 and x must lie in the box");
  NamedEvent ev;
  if (name == "connect") {
    auto ex = std::make_shared<Explorer>(box);
    const std::size_t io = box.index(o), ix = box.index(x);
    ev.predicate = [ex, io, ix](const BondConfig& c) {
      ex->explore(c, io);
      return ex->visited(ix);
    };
    ev.edges = all_edges(box);
  } else if (name == "finite-two-point") {
    ev.predicate = [x, margin](const BondConfig& c) { return finite_two_point(c, x, margin); };
    ev.edges = relevant_edges(box);
  } else if (name == "edge-open") {
    const Edge e = Edge::between(o, x);
    ev.predicate = [e](const BondConfig& c) { return c.open(e); };
    ev.edges = {e};
  } else if (name == "tautology") {
    ev.predicate = [](const BondConfig&) { return true; };
  } else {
    const unsigned bit = event_kind_bit(name);
    if (bit == kind::kFinite) return named_event("finite-two-point", box, x, t, margin);
    auto cls = std::make_shared<EventClassifier>(box, t, margin);
    ev.predicate = [cls, o, x, bit](const BondConfig& c) { return cls->classify(c, o, x, bit).flag(bit); };
    const bool whole = bit & (kind::kHBar | kind::kFBar | kind::kHTilde | kind::kFTilde);
    ev.edges = whole ? all_edges(box) : relevant_edges(box);
  }
  return ev;
}

VerifyResult verify_estimator(const ExactResult& exact, const ConfigPredicate& event, double p, std::uint64_t n_samples,
                              std::uint64_t seed, double tolerance_sigma) {
  if (!(p >= 0 && p <= 1)) throw DomainError("p must lie in [0,1]");
  if (n_samples == 0) throw DomainError("verify_estimator needs samples");
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < n_samples; ++i)
    if (event(sample_config(exact.box, p, seed, i))) ++hits;
  const auto est = bernoulli_estimate(hits, n_samples, seed, exact.box);
  VerifyResult r;
  r.exact = exact.poly.at(p);
  r.estimate = est.value;
  r.std_error = est.std_error;
  r.samples = n_samples;
  const double diff = std::fabs(r.estimate - r.exact);
  r.z = r.std_error > 0 ? diff / r.std_error : (diff == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  r.pass = diff <= tolerance_sigma * r.std_error;
  return r;
}

NonMonotonicity find_non_monotonicity(const Box& box, const std::vector<Edge>& edges, const ConfigPredicate& event) {
  const int E = static_cast<int>(edges.size());
  if (E > kMaxExactEdges) throw DomainError("exact enumeration refused: too many edges");
  NonMonotonicity out;
  BondConfig cfg(box);
  auto load = [&](std::uint64_t mask) {
    for (int i = 0; i < E; ++i) cfg.set(edges[static_cast<std::size_t>(i)], (mask >> i) & 1u);
  };
  const std::uint64_t total = std::uint64_t{1} << E;
  for (std::uint64_t mask = 0; mask < total && !out.witnessed(); ++mask) {
    load(mask);
    const bool lower = event(cfg);
    for (int i = 0; i < E; ++i) {
      if ((mask >> i) & 1u) continue;
      const Edge& e = edges[static_cast<std::size_t>(i)];
      cfg.set(e, true);
      const bool upper = event(cfg);
      cfg.set(e, false);
      if (lower == upper) continue;
      auto& slot = lower ? out.destroys : out.creates;
      if (!slot) slot = MonotonicityPair{open_edges_of(edges, mask), e, lower, upper};
    }
  }
  return out;
}

Rational min_derivative(const ExactPolynomial& poly, int steps) {
  Rational best = poly.derivative(Rational(1, steps));
  for (int k = 2; k < steps; ++k) best = std::min(best, poly.derivative(Rational(k, steps)));
  return best;
}

bool dominates_bound(const ExactPolynomial& poly, long psi, long phi, const std::vector<double>& ps) {
  for (double p : ps) {
    const Rational r = to_rational(p);
    if (poly.eval(r) < rpow(r, static_cast<int>(psi)) * rpow(1 - r, static_cast<int>(phi))) return false;
  }
  return true;
}

}  // namespace percoz
