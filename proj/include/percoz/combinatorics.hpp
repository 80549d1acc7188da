#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "percoz/direction.hpp"
#include "percoz/lattice.hpp"

namespace percoz {

inline constexpr std::uint64_t kDefaultAnimalBudget = 200'000'000;

/// 2(d-1)(|x|+1)+2: the boundary size of the axis-monotone staircase to x.
long staircase_boundary(int dim, long norm1);

struct StaircasePath {
  std::vector<Point> vertices;  ///< 0, ..., x in walk order
  std::vector<Edge> edges;
};

/// Walks |x_1| steps along sign(x_1)u_1, then |x_2| along u_2, and so on.
/// x = 0 gives an empty path.
StaircasePath staircase_path(const Point& x);

struct AnimalStats {
  std::uint64_t visited = 0;
  bool budget_exhausted = false;
};

/// Enumerates every connected vertex set of Z^d that contains the origin and
/// every anchor, with at most max_volume sites. Each set is produced exactly
/// once (Redelmeier's untried-set recursion rooted at the origin). The visitor
/// gets the sites in insertion order and the number of adjacent pairs among
/// them. Returning false from the visitor stops the enumeration.
///
/// With translation_classes=true, anchors must be empty and only sets whose
/// lexicographically smallest site is the origin are produced, i.e. one
/// representative per translation class (fixed animals).
AnimalStats enumerate_animals(int dim, std::span<const Point> anchors, int max_volume, std::uint64_t budget,
                              const std::function<bool(std::span<const Point>, long adjacent_pairs)>& visit,
                              bool translation_classes = false);

struct CombinatoricsResult {
  long phi = 0;
  long psi = 0;
  long upsilon = 0;
  int achieved_at_volume = 0;
  /// Heuristic certificate: max_volume >= |x|+1, the last volume layer did not
  /// lower the minimum, and the budget was not hit.
  bool certified = false;
  int volumes_scanned = 0;
  std::uint64_t animals_visited = 0;
  /// Minimum external-boundary size among animals of each exact volume
  /// (index = volume; -1 where no animal contains both anchors).
  std::vector<long> min_by_volume;
};

CombinatoricsResult phi_exact(const Point& x, int max_volume, std::uint64_t budget = kDefaultAnimalBudget);
long psi_exact(const Point& x, int max_volume, std::uint64_t budget = kDefaultAnimalBudget);
long upsilon_exact(const Point& x, int max_volume, std::uint64_t budget = kDefaultAnimalBudget);

/// phi with a memo keyed by the hyperoctahedral orbit of x; volume cap is
/// |x| + 1 + slack.
class PhiTable {
 public:
  explicit PhiTable(int slack = 1, std::uint64_t budget = kDefaultAnimalBudget) : slack_(slack), budget_(budget) {}
  const CombinatoricsResult& get(const Point& x);
  static Point canonical(const Point& x);

 private:
  int slack_;
  std::uint64_t budget_;
  std::map<Point, CombinatoricsResult> memo_;
};

struct PhiTResult {
  long value = 0;
  Point argmin;
  bool certified = false;
  int candidates = 0;
};

/// Minimum of phi(y') over lattice points with <t,y'> >= <t,x> and
/// |y'| <= |x| + search_extra.
PhiTResult phi_t_exact(const Point& x, const Direction& t, int volume_slack = 1, int search_extra = 1,
                       std::uint64_t budget = kDefaultAnimalBudget);

struct SubadditivityViolation {
  Point x, y;
  long phi_x, phi_y, phi_x_minus_y;
};

struct SubadditivityReport {
  std::size_t pairs_checked = 0;
  std::vector<SubadditivityViolation> violations;
  bool all_certified = true;
};

/// Checks phi(x) <= phi(y) + phi(x-y) for every ordered pair from `points`.
SubadditivityReport subadditivity_table(std::span<const Point> points, PhiTable& table);

/// All lattice points of Z^d with |x| <= radius.
std::vector<Point> l1_ball(int dim, int radius);

struct PhiBarSequence {
  std::vector<int> n;
  std::vector<Point> sites;  ///< floor(n * xhat)
  std::vector<double> values;  ///< phi(floor(n xhat)) / n
  bool truncated = false;
  bool monotone_nonincreasing = true;
  /// max |v_i - v_j| over the last half of the sequence.
  double cauchy_spread = 0;
};

PhiBarSequence phi_bar_estimate(const std::vector<double>& xhat, const std::vector<int>& n_list, PhiTable& table);

/// Counts, for each boundary size k, the translation classes of connected
/// hole-free vertex sets of at most max_volume sites whose boundary has k
/// edges. A tabulation only; the growth constant is not asserted.
std::map<long, std::uint64_t> surface_counts(int dim, int max_volume);

}  // namespace percoz
