#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "percoz/lattice.hpp"

namespace percoz {

template <class Src>
concept EdgeSource = requires(const Src& s, std::size_t slot) {
  { s.open(slot) } -> std::convertible_to<bool>;
};

struct AcceptAll {
  bool operator()(std::size_t) const { return true; }
};

/// Reusable breadth-first cluster explorer over a fixed box. Visited marks are
/// epoch stamps, so repeated explorations cost nothing to reset. One explorer
/// per thread.
class Explorer {
 public:
  explicit Explorer(const Box& box);

  struct Result {
    bool touches_shell = false;
    /// True when the search was cut short at the first shell vertex.
    bool stopped = false;
  };

  const Box& box() const { return box_; }
  const Point& point(std::size_t v) const { return points_[v]; }
  bool on_shell(std::size_t v) const { return shell_[v] != 0; }

  /// Explores the open component of `start` among vertices accepted by
  /// `accept`; an edge is usable only if both endpoints are accepted.
  template <EdgeSource Src, class Filter = AcceptAll>
  Result explore(const Src& src, std::size_t start, Filter accept = {}, bool stop_at_shell = false) {
    return explore_visit(src, start, accept, [&](std::size_t v) { return !(stop_at_shell && shell_[v]); });
  }

  /// As explore(), calling visit(v) on each vertex as it is dequeued; a false
  /// return ends the search with stopped=true.
  template <EdgeSource Src, class Filter, class Visit>
  Result explore_visit(const Src& src, std::size_t start, Filter accept, Visit visit) {
    ++epoch_;
    if (epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0u);
      epoch_ = 1;
    }
    order_.clear();
    Result res;
    stamp_[start] = epoch_;
    order_.push_back(start);
    const int d = box_.dim();
    for (std::size_t head = 0; head < order_.size(); ++head) {
      const std::size_t v = order_[head];
      if (shell_[v]) res.touches_shell = true;
      if (!visit(v)) {
        res.stopped = true;
        return res;
      }
      const Point& pv = points_[v];
      for (int a = 0; a < d; ++a) {
        const std::size_t st = box_.stride(a);
        if (pv[a] < box_.hi()[a]) {
          const std::size_t w = v + st;
          if (stamp_[w] != epoch_ && accept(w) && src.open(v * static_cast<std::size_t>(d) + static_cast<std::size_t>(a))) {
            stamp_[w] = epoch_;
            order_.push_back(w);
          }
        }
        if (pv[a] > box_.lo()[a]) {
          const std::size_t w = v - st;
          if (stamp_[w] != epoch_ && accept(w) && src.open(w * static_cast<std::size_t>(d) + static_cast<std::size_t>(a))) {
            stamp_[w] = epoch_;
            order_.push_back(w);
          }
        }
      }
    }
    return res;
  }

  /// Vertices reached by the last exploration, in BFS order.
  std::span<const std::size_t> vertices() const { return order_; }
  bool visited(std::size_t v) const { return stamp_[v] == epoch_; }

 private:
  Box box_;
  std::vector<Point> points_;
  std::vector<std::uint8_t> shell_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::size_t> order_;
  std::uint32_t epoch_ = 0;
};

}  // namespace percoz
