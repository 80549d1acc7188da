#pragma once

#include <map>
#include <string>

#include "json.hpp"
#include "percoz/lattice.hpp"

namespace percoz {

struct KernelEntry {
  double value = 0;
  double std_error = 0;
};

/// Sparse nonnegative function on Z^d. `support_radius` is the declared
/// L1 truncation radius (-1 when undeclared).
struct Kernel {
  int dim = 0;
  std::string kind;
  std::map<Point, KernelEntry> entries;
  long support_radius = -1;

  Kernel() = default;
  Kernel(int d, std::string k) : dim(d), kind(std::move(k)) { Point::check_dim(d); }

  static Kernel delta(int d, const std::string& kind = "h") {
    Kernel k(d, kind);
    k.set(Point(d), 1.0);
    return k;
  }

  void set(const Point& x, double value, double std_error = 0);
  void add(const Point& x, double value) { entries[x].value += value; }
  double value(const Point& x) const;
  double error(const Point& x) const;
  double total_mass() const;
  long max_norm1() const;
  void drop_zeros();

  nlohmann::json to_json() const;
  static Kernel from_json(const nlohmann::json& j);
};

}  // namespace percoz
