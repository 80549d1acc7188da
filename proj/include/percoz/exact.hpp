#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "percoz/direction.hpp"
#include "percoz/lattice.hpp"

namespace percoz {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline constexpr int kMaxExactEdges = 24;

/// P(event) = sum_k counts[k] p^k (1-p)^{E-k} over the E enumerated edges.
struct ExactPolynomial {
  int edges = 0;
  std::vector<BigInt> counts;

  Rational eval(const Rational& p) const;
  /// Evaluated exactly at the binary value of p, rounded once.
  double at(double p) const;
  Rational derivative(const Rational& p) const;
  /// Coefficients of 1, p, p^2, ... after expanding (1-p)^{E-k}.
  std::vector<BigInt> power_coefficients() const;
  BigInt total() const;
};

Rational to_rational(double x);

struct ExactResult {
  std::string event;
  Box box;
  std::vector<Edge> edges;  ///< enumerated edges; all other box edges closed
  ExactPolynomial poly;

  nlohmann::json to_json(const std::vector<double>& ps) const;
};

using ConfigPredicate = std::function<bool(const BondConfig&)>;

/// Edges with at least one endpoint off the box shell.
std::vector<Edge> relevant_edges(const Box& box);
std::vector<Edge> all_edges(const Box& box);

/// Counts configurations of `edges` satisfying the predicate, by number of
/// open edges. Refuses more than kMaxExactEdges edges.
ExactResult enumerate_event(const Box& box, const std::vector<Edge>& edges, const ConfigPredicate& event,
                            const std::string& name = "event");

/// Named events on the pair (0, x): "connect", "finite-two-point", the
/// classifier kernels "h", "f", "g", "h_bar", "f_bar", "h_tilde", "f_tilde",
/// and "edge-open" (the edge from 0 to x) and "tautology".
struct NamedEvent {
  ConfigPredicate predicate;
  std::vector<Edge> edges;  ///< edges the event can depend on
};
NamedEvent named_event(const std::string& name, const Box& box, const Point& x, const Direction& t, int margin = 1);
const std::vector<std::string>& named_event_list();

struct VerifyResult {
  double exact = 0;
  double estimate = 0;
  double std_error = 0;
  double z = 0;
  std::uint64_t samples = 0;
  bool pass = false;
};

/// Monte Carlo with sample_config against the exact polynomial: passes when
/// |MC - exact| <= tolerance_sigma * std_error.
VerifyResult verify_estimator(const ExactResult& exact, const ConfigPredicate& event, double p, std::uint64_t n_samples,
                              std::uint64_t seed, double tolerance_sigma);

/// Two configurations differing in one edge, `lower` with the edge closed.
struct MonotonicityPair {
  std::vector<Edge> lower_open;
  Edge flipped;
  bool lower_value = false;
  bool upper_value = false;
};

/// Witnesses that the event is neither increasing nor decreasing: an
/// opening that destroys it and one that creates it.
struct NonMonotonicity {
  std::optional<MonotonicityPair> destroys;
  std::optional<MonotonicityPair> creates;
  bool witnessed() const { return destroys && creates; }
};
NonMonotonicity find_non_monotonicity(const Box& box, const std::vector<Edge>& edges, const ConfigPredicate& event);

/// min over the grid k/(steps) of dP/dp (exact).
Rational min_derivative(const ExactPolynomial& poly, int steps = 100);

/// p^psi (1-p)^phi <= P(p) at each p, compared exactly.
bool dominates_bound(const ExactPolynomial& poly, long psi, long phi, const std::vector<double>& ps);

}  // namespace percoz
