#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "percoz/cluster.hpp"
#include "percoz/direction.hpp"
#include "percoz/explorer.hpp"
#include "percoz/kernel.hpp"
#include "percoz/lattice.hpp"
#include "percoz/rng.hpp"

namespace percoz {

namespace kind {
inline constexpr unsigned kFinite = 1u << 0;
inline constexpr unsigned kH = 1u << 1;
inline constexpr unsigned kF = 1u << 2;
inline constexpr unsigned kG = 1u << 3;
inline constexpr unsigned kHBar = 1u << 4;
inline constexpr unsigned kFBar = 1u << 5;
inline constexpr unsigned kHTilde = 1u << 6;
inline constexpr unsigned kFTilde = 1u << 7;
inline constexpr unsigned kSurface = 1u << 8;  ///< surface_size and cluster_edges
inline constexpr unsigned kEvents = 0xffu;
inline constexpr unsigned kAll = 0x1ffu;
}  // namespace kind

/// Kernel kind names in output order.
const std::vector<std::string>& event_kind_names();
unsigned event_kind_bit(const std::string& name);

struct EventRecord {
  Point x;
  unsigned computed = 0;
  bool finite_connect = false;
  bool h = false, f = false, g = false;
  bool h_bar = false, f_bar = false;
  bool h_tilde = false, f_tilde = false;
  std::vector<Point> break_points;
  std::vector<Edge> t_bonds;
  long surface_size = -1;
  long cluster_edges = -1;

  bool flag(unsigned bit) const;
  /// f => h, fbar => hbar, ftilde => htilde, g => finite, h => finite in strip.
  bool implications_hold() const;
  bool strip_finite = false;
};

struct EstimatorResult {
  double value = 0;
  double std_error = 0;
  std::uint64_t n_samples = 0;
  std::uint64_t hits = 0;
  std::uint64_t seed = 0;
  Box box;
  /// Set by conditional estimators with fewer than kMinConditioningHits
  /// conditioning events; value and std_error are then meaningless.
  bool insufficient = false;
};

inline constexpr std::uint64_t kMinConditioningHits = 100;

EstimatorResult bernoulli_estimate(std::uint64_t hits, std::uint64_t n, std::uint64_t seed, const Box& box);

BondConfig sample_config(const Box& box, double p, std::uint64_t seed, std::uint64_t stream_id);

/// 0 and x connected in a cluster that avoids the box shell.
bool finite_two_point(const BondConfig& config, const Point& x, int margin = 1);

/// Break points b of the strip cluster of `from` and `to`: <t,from+u> <= <t,b>
/// <= <t,to-u> and the cluster meets the slab around b in {b-u, b, b+u}.
/// Sorted by <t,.>.
std::vector<Point> detect_break_points(std::span<const Point> strip_cluster, const Direction& t, const Point& from,
                                       const Point& to);

struct TBonds {
  std::vector<Edge> edges;
  std::vector<Point> left;  ///< B_e: left endpoints
};

TBonds detect_t_bonds(std::span<const Point> break_points, const Direction& t);

/// Classifies connectivity events between pairs of sites for one box and
/// direction. Holds an explorer, so one classifier per thread.
class EventClassifier {
 public:
  EventClassifier(const Box& box, const Direction& t, int margin = 1);

  /// Events for the pair (a, b), recorded with x = b - a. Only the kinds in
  /// the mask are computed; others stay false.
  template <EdgeSource Src>
  EventRecord classify(const Src& src, const Point& a, const Point& b, unsigned kinds = kind::kAll);

  const Box& box() const { return box_; }
  const Direction& direction() const { return t_; }
  int margin() const { return margin_; }

 private:
  void check_margin(const Point& p) const;
  bool in_strip(std::size_t v, const Point& lo, const Point& hi) const { return t_.in_slab(explorer_.point(v), lo, hi); }
  template <EdgeSource Src>
  bool local_break_ok(const Src& src, const Point& b, const Point& lo, const Point& hi) const;
  template <EdgeSource Src>
  bool local_pair_ok(const Src& src, const Point& low, const Point& high, bool restrict_strip, const Point& lo,
                     const Point& hi) const;
  template <EdgeSource Src>
  bool edge_open(const Src& src, const Point& p, const Point& q) const;

  Box box_;
  Direction t_;
  int margin_;
  Explorer explorer_;
  std::vector<Point> scratch_;
};

EventRecord classify_events(const BondConfig& config, const Point& x, const Direction& t, int margin = 1,
                            unsigned kinds = kind::kAll);

/// Splits a finite connection at its first and last break point and reports
/// the three factor events of the renewal decomposition.
struct RenewalSplit {
  bool applicable = false;  ///< finite connection whose extreme break points start and end a t-bond
  Point z1, z2;
  bool f_bar_prefix = false, h_middle = false, f_tilde_suffix = false;
};

RenewalSplit renewal_split(const BondConfig& config, const Point& x, const Direction& t, int margin = 1);

struct SamplerParams {
  int dim = 3;
  double p = 0.5;
  Direction t;
  Box box;
  int margin = 1;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::uint64_t first_stream = 0;
  int threads = 1;
  unsigned kinds = kind::kEvents;
};

struct KernelEstimates {
  std::map<std::string, Kernel> kernels;  ///< two-point, h, f, g, h_bar, ...
  std::map<std::string, std::map<Point, EstimatorResult>> results;
  std::uint64_t samples = 0;
  std::uint64_t implication_violations = 0;
};

/// Empirical kernels of every requested kind on `displacements`, all from the
/// same samples. Conventions h(0)=1, f(0)=0 are applied.
KernelEstimates estimate_kernels(const SamplerParams& params, std::span<const Point> displacements);

/// Per-sample hook variant used by acceptance checks: calls `on_record` for
/// each (sample, displacement) record.
void for_each_record(const SamplerParams& params, std::span<const Point> displacements,
                     const std::function<void(std::uint64_t sample, const EventRecord&)>& on_record);

struct SurfaceTailResult {
  EstimatorResult estimate;
  std::uint64_t conditioning_hits = 0;
  long threshold = 0;
};

/// P(|external boundary| >= (1+delta) phi | 0 and x finitely connected).
SurfaceTailResult surface_tail(const Point& x, double delta, long phi, const SamplerParams& params);

struct SlabReport {
  int index = 0;
  int crossings = 0;
  bool good = true;
  int surface_components = 0;
};

struct SlabCrossings {
  std::vector<SlabReport> slabs;
  double eta = 0;  ///< fraction of slabs with at least two crossings
};

/// Cuts the strip between 0 and x into slabs bounded by the hyperplanes
/// through floor(i N xhat) and classifies each slab of the filled cluster.
SlabCrossings slab_crossings(const ClusterData& cluster, const Direction& t, int N, const Point& x);

}  // namespace percoz
