#include "percoz/cluster.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace percoz {

bool ClusterData::contains(const Point& p) const { return std::binary_search(vertices.begin(), vertices.end(), p); }

ClusterData component(const BondConfig& config, const Point& x) {
  const Box& box = config.box();
  if (!box.contains(x)) throw DomainError("site " + x.str() + " outside box");
  Explorer ex(box);
  const auto res = ex.explore(config, box.index(x));
  ClusterData out;
  out.touches_box_boundary = res.touches_shell;
  const int d = box.dim();
  for (std::size_t v : ex.vertices()) out.vertices.push_back(ex.point(v));
  std::sort(out.vertices.begin(), out.vertices.end());
  for (std::size_t v : ex.vertices()) {
    const Point& p = ex.point(v);
    for (int a = 0; a < d; ++a) {
      for (int sgn : {+1, -1}) {
        const Point q = p + Point::unit(d, a, sgn);
        if (!box.contains(q)) continue;
        const Edge e = Edge::between(p, q);
        if (ex.visited(box.index(q))) {
          if (sgn > 0 && config.open(box.slot(e))) out.open_edges.push_back(e);
        } else {
          out.graph_boundary.push_back(e);
        }
      }
    }
  }
  std::sort(out.open_edges.begin(), out.open_edges.end());
  std::sort(out.graph_boundary.begin(), out.graph_boundary.end());
  return out;
}

namespace {

// Marks every box vertex reachable from the shell through vertices not in
// `blocked`; lattice edges are used regardless of their state.
std::vector<std::uint8_t> reach_from_shell(const Box& box, const std::vector<std::uint8_t>& blocked) {
  std::vector<std::uint8_t> seen(box.vertex_count(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t v = 0; v < box.vertex_count(); ++v) {
    if (!blocked[v] && box.on_shell(box.point(v))) {
      seen[v] = 1;
      queue.push_back(v);
    }
  }
  const int d = box.dim();
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    const Point p = box.point(v);
    for (int a = 0; a < d; ++a) {
      if (p[a] < box.hi()[a]) {
        const std::size_t w = v + box.stride(a);
        if (!seen[w] && !blocked[w]) {
          seen[w] = 1;
          queue.push_back(w);
        }
      }
      if (p[a] > box.lo()[a]) {
        const std::size_t w = v - box.stride(a);
        if (!seen[w] && !blocked[w]) {
          seen[w] = 1;
          queue.push_back(w);
        }
      }
    }
  }
  return seen;
}

std::vector<Edge> box_boundary_of(const Box& box, const std::vector<std::uint8_t>& in_set, const std::vector<Point>& members) {
  std::vector<Edge> out;
  const int d = box.dim();
  for (const Point& p : members) {
    for (int a = 0; a < d; ++a) {
      for (int sgn : {+1, -1}) {
        const Point q = p + Point::unit(d, a, sgn);
        if (box.contains(q) && !in_set[box.index(q)]) out.push_back(Edge::between(p, q));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

ClusterData fill(const ClusterData& cluster, const Box& box) {
  if (cluster.touches_box_boundary) throw DomainError("indeterminate fill: cluster touches the box shell");
  std::vector<std::uint8_t> blocked(box.vertex_count(), 0);
  for (const Point& p : cluster.vertices) {
    if (!box.contains(p)) throw DomainError("cluster vertex " + p.str() + " outside box");
    blocked[box.index(p)] = 1;
  }
  const auto outside = reach_from_shell(box, blocked);
  ClusterData out = cluster;
  out.filled_vertices.clear();
  std::vector<std::uint8_t> filled(box.vertex_count(), 0);
  for (std::size_t v = 0; v < box.vertex_count(); ++v) {
    if (!outside[v]) {
      filled[v] = 1;
      out.filled_vertices.push_back(box.point(v));
    }
  }
  out.external_boundary = box_boundary_of(box, filled, out.filled_vertices);
  out.plaquettes = out.external_boundary;
  out.filled = true;
  return out;
}

long edge_boundary_size(const std::vector<Point>& vertices) {
  if (vertices.empty()) return 0;
  std::unordered_set<Point, PointHash> set(vertices.begin(), vertices.end());
  const int d = vertices.front().dim;
  long adjacent = 0;
  for (const Point& p : vertices)
    for (int a = 0; a < d; ++a)
      if (set.count(p + Point::unit(d, a))) ++adjacent;
  return 2L * d * static_cast<long>(set.size()) - 2 * adjacent;
}

std::vector<Edge> edge_boundary(const std::vector<Point>& vertices) {
  std::unordered_set<Point, PointHash> set(vertices.begin(), vertices.end());
  std::vector<Edge> out;
  for (const Point& p : set)
    for (const Point& q : neighbors(p))
      if (!set.count(q)) out.push_back(Edge::between(p, q));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Point> fill_infinite(const std::vector<Point>& vertices) {
  if (vertices.empty()) return {};
  const int d = vertices.front().dim;
  Point lo = vertices.front(), hi = vertices.front();
  for (const Point& p : vertices)
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  for (int i = 0; i < d; ++i) {
    --lo[i];
    ++hi[i];
  }
  // Every complement site outside the bounding box reaches infinity, so the
  // holes are the complement components of the padded box avoiding its shell.
  const Box box(lo, hi);
  std::vector<std::uint8_t> blocked(box.vertex_count(), 0);
  for (const Point& p : vertices) blocked[box.index(p)] = 1;
  const auto outside = reach_from_shell(box, blocked);
  std::vector<Point> out;
  for (std::size_t v = 0; v < box.vertex_count(); ++v)
    if (!outside[v]) out.push_back(box.point(v));
  return out;
}

bool plaquette_adjacency(const Edge& p1, const Edge& p2) {
  if (p1 == p2) return false;
  const int d = p1.base.dim;
  if (p2.base.dim != d) return false;
  // Closed dual cell in doubled coordinates: coordinate `axis` is the single
  // value 2b+1, the others span [2b-1, 2b+1].
  int dims = 0;
  for (int i = 0; i < d; ++i) {
    const int lo1 = i == p1.axis ? 2 * p1.base[i] + 1 : 2 * p1.base[i] - 1;
    const int hi1 = 2 * p1.base[i] + 1;
    const int lo2 = i == p2.axis ? 2 * p2.base[i] + 1 : 2 * p2.base[i] - 1;
    const int hi2 = 2 * p2.base[i] + 1;
    const int lo = std::max(lo1, lo2), hi = std::min(hi1, hi2);
    if (lo > hi) return false;
    if (lo < hi) ++dims;
  }
  return dims == d - 2;
}

std::vector<std::vector<Edge>> surface_components(const std::vector<Edge>& plaquettes) {
  std::vector<Edge> items(plaquettes);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  if (items.empty()) return {};
  std::unordered_map<Edge, std::size_t, EdgeHash> index;
  for (std::size_t i = 0; i < items.size(); ++i) index.emplace(items[i], i);
  std::vector<std::size_t> parent(items.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  const int d = items.front().base.dim;
  int offsets = 1;
  for (int i = 0; i < d; ++i) offsets *= 3;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (int code = 0; code < offsets; ++code) {
      Point shift(d);
      int c = code;
      for (int k = 0; k < d; ++k) {
        shift[k] = c % 3 - 1;
        c /= 3;
      }
      for (int axis = 0; axis < d; ++axis) {
        auto it = index.find(Edge(items[i].base + shift, axis));
        if (it == index.end() || it->second <= i) continue;
        if (plaquette_adjacency(items[i], it->first)) parent[find(i)] = find(it->second);
      }
    }
  }
  std::unordered_map<std::size_t, std::size_t> slot_of_root;
  std::vector<std::vector<Edge>> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::size_t r = find(i);
    auto [it, fresh] = slot_of_root.emplace(r, out.size());
    if (fresh) out.emplace_back();
    out[it->second].push_back(items[i]);
  }
  return out;
}

}  // namespace percoz
