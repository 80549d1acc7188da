#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace percoz {

inline constexpr int kMaxDim = 4;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A site of Z^d. Unused trailing coordinates are kept at zero so that
/// comparison and hashing never see stale data.
struct Point {
  std::array<std::int32_t, kMaxDim> c{};
  int dim = 0;

  Point() = default;
  explicit Point(int d) : dim(d) { check_dim(d); }
  Point(std::initializer_list<int> coords);
  static Point from(std::span<const int> coords);
  static Point unit(int d, int axis, int sign = 1);

  std::int32_t& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
  std::int32_t operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

  friend auto operator<=>(const Point&, const Point&) = default;

  Point operator+(const Point& o) const;
  Point operator-(const Point& o) const;
  Point operator-() const;
  Point operator*(int k) const;

  /// L1 norm, written |x| throughout the combinatorics.
  long norm1() const;
  double norm2() const;
  bool is_zero() const;
  std::string str() const;

  static void check_dim(int d);
};

std::ostream& operator<<(std::ostream& os, const Point& p);

struct PointHash {
  std::size_t operator()(const Point& p) const noexcept;
};

/// The 2d nearest neighbours in the order +u1, -u1, +u2, -u2, ...
std::vector<Point> neighbors(const Point& x);

/// An edge stored by its lexicographically smaller endpoint and the axis
/// along which it points.
struct Edge {
  Point base;
  int axis = 0;

  Edge() = default;
  Edge(const Point& b, int ax) : base(b), axis(ax) {}
  /// Builds the canonical edge between two points at L1 distance 1.
  static Edge between(const Point& a, const Point& b);

  Point tip() const { return base + Point::unit(base.dim, axis); }
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct EdgeHash {
  std::size_t operator()(const Edge& e) const noexcept;
};

/// Axis-aligned window [lo, hi] of Z^d.
class Box {
 public:
  Box() = default;
  Box(Point lo, Point hi);
  /// Cube [-half, half]^d.
  static Box centered(int dim, int half_width);

  int dim() const { return lo_.dim; }
  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }
  std::int32_t extent(int axis) const { return hi_[axis] - lo_[axis] + 1; }

  std::size_t vertex_count() const { return vertex_count_; }
  std::size_t edge_count() const { return edge_count_; }
  /// Slots index edges as vertex_index * d + axis; not every slot is an edge.
  std::size_t slot_count() const { return vertex_count_ * static_cast<std::size_t>(dim()); }

  bool contains(const Point& p) const;
  bool on_shell(const Point& p) const;
  /// Minimal L-infinity distance from p to the outer layer of the box.
  int shell_distance(const Point& p) const;

  std::size_t index(const Point& p) const;
  Point point(std::size_t index) const;
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  bool slot_is_edge(std::size_t slot) const;
  std::size_t slot(const Edge& e) const { return index(e.base) * static_cast<std::size_t>(dim()) + static_cast<std::size_t>(e.axis); }
  Edge edge_at_slot(std::size_t slot) const;
  bool contains(const Edge& e) const { return contains(e.base) && contains(e.tip()); }

  /// Calls fn(slot) for every edge in canonical order (min endpoint, axis).
  template <class Fn>
  void for_each_edge(Fn&& fn) const {
    const int d = dim();
    for (std::size_t v = 0; v < vertex_count_; ++v) {
      Point p = point(v);
      for (int a = 0; a < d; ++a) {
        if (p[a] < hi_[a]) fn(v * static_cast<std::size_t>(d) + static_cast<std::size_t>(a));
      }
    }
  }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  Point lo_, hi_;
  std::array<std::size_t, kMaxDim> strides_{};
  std::size_t vertex_count_ = 0;
  std::size_t edge_count_ = 0;
};

/// Bond configuration on the edges of a box. Bits live in slot order; slots
/// that are not edges stay clear.
class BondConfig {
 public:
  BondConfig() = default;
  explicit BondConfig(Box box, std::uint64_t seed = 0, double p = 0.0);

  const Box& box() const { return box_; }
  std::uint64_t seed() const { return seed_; }
  double p() const { return p_; }

  bool open(std::size_t slot) const { return (bits_[slot >> 6] >> (slot & 63)) & 1u; }
  bool open(const Edge& e) const { return box_.contains(e) && open(box_.slot(e)); }
  void set(std::size_t slot, bool value);
  void set(const Edge& e, bool value);

  std::size_t open_count() const;

  /// Little-endian byte layout:
  ///   "PCZB" | u32 version=1 | u32 d | i32 lo[d] | i32 hi[d] | u64 seed |
  ///   f64 p | u64 edge_count | ceil(edge_count/8) bytes, LSB-first bits in
  ///   canonical edge order.
  std::vector<std::uint8_t> serialize() const;
  static BondConfig deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const BondConfig&, const BondConfig&) = default;

 private:
  Box box_;
  std::uint64_t seed_ = 0;
  double p_ = 0.0;
  std::vector<std::uint64_t> bits_;
};

}  // namespace percoz
