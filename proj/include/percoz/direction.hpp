#pragma once

#include <string>
#include <vector>

#include "percoz/lattice.hpp"

namespace percoz {

/// Unit vector t of S^{d-1} together with its distinguished axis u, the first
/// coordinate axis maximizing <t, u_i>. When t was built from an integer
/// vector, hyperplane comparisons are exact integer arithmetic; otherwise they
/// use an absolute tolerance of kTolerance.
class Direction {
 public:
  static constexpr double kTolerance = 1e-9;

  static Direction from_integer(const Point& v);
  static Direction from_real(const std::vector<double>& v);
  /// Parses "1,0,0" or "0.6,0.8,0". All-integer input gives an exact direction.
  static Direction parse(const std::string& text);
  static Direction axis(int dim, int i) { return from_integer(Point::unit(dim, i)); }

  int dim() const { return static_cast<int>(t_.size()); }
  const std::vector<double>& t() const { return t_; }
  bool exact() const { return exact_; }
  const Point& integer_vector() const { return ivec_; }
  int u_axis() const { return u_axis_; }
  Point u() const { return Point::unit(dim(), u_axis_); }

  double dot(const Point& x) const;
  /// Sign of <t, a - b>.
  int compare(const Point& a, const Point& b) const;
  /// <t,lo> <= <t,z> <= <t,hi>.
  bool in_slab(const Point& z, const Point& lo, const Point& hi) const { return compare(z, lo) >= 0 && compare(z, hi) <= 0; }

  std::string str() const;

 private:
  std::vector<double> t_;
  Point ivec_;
  bool exact_ = false;
  int u_axis_ = 0;
};

}  // namespace percoz
