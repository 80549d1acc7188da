#include "percoz/combinatorics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace percoz {

long staircase_boundary(int dim, long norm1) { return 2L * (dim - 1) * (norm1 + 1) + 2; }

StaircasePath staircase_path(const Point& x) {
  StaircasePath out;
  if (x.is_zero()) return out;
  Point cur(x.dim);
  out.vertices.push_back(cur);
  for (int i = 0; i < x.dim; ++i) {
    const int sgn = x[i] > 0 ? 1 : -1;
    for (int k = 0; k < std::abs(x[i]); ++k) {
      const Point next = cur + Point::unit(x.dim, i, sgn);
      out.edges.push_back(Edge::between(cur, next));
      out.vertices.push_back(next);
      cur = next;
    }
  }
  return out;
}

namespace {

// Dense cube [-R, R]^d holding enumeration marks.
class Grid {
 public:
  Grid(int dim, int radius) : dim_(dim), radius_(radius), side_(2 * radius + 1) {
    std::size_t n = 1;
    for (int i = 0; i < dim; ++i) {
      stride_[static_cast<std::size_t>(i)] = n;
      n *= static_cast<std::size_t>(side_);
    }
    cells_.assign(n, 0);
  }
  std::size_t index(const Point& p) const {
    std::size_t idx = 0;
    for (int i = 0; i < dim_; ++i) idx += static_cast<std::size_t>(p[i] + radius_) * stride_[static_cast<std::size_t>(i)];
    return idx;
  }
  bool inside(const Point& p) const {
    for (int i = 0; i < dim_; ++i)
      if (p[i] < -radius_ || p[i] > radius_) return false;
    return true;
  }
  std::uint8_t& operator[](std::size_t i) { return cells_[i]; }

 private:
  int dim_, radius_, side_;
  std::array<std::size_t, kMaxDim> stride_{};
  std::vector<std::uint8_t> cells_;
};

constexpr std::uint8_t kSeen = 1;
constexpr std::uint8_t kInAnimal = 2;
constexpr std::uint8_t kAnchor = 4;

class AnimalWalker {
 public:
  AnimalWalker(int dim, std::span<const Point> anchors, int max_volume, std::uint64_t budget,
               const std::function<bool(std::span<const Point>, long)>& visit, bool translation_classes)
      : dim_(dim),
        anchors_(anchors.begin(), anchors.end()),
        max_volume_(max_volume),
        budget_(budget),
        visit_(visit),
        translation_classes_(translation_classes),
        grid_(dim, max_volume + 1) {
    for (const Point& a : anchors_) {
      if (a.dim != dim) throw DomainError("anchor dimension mismatch");
      if (a.norm1() >= max_volume) continue;  // unreachable; handled by pruning
      grid_[grid_.index(a)] |= kAnchor;
    }
  }

  AnimalStats run() {
    if (max_volume_ < 1) return stats_;
    const Point origin(dim_);
    grid_[grid_.index(origin)] |= kSeen;
    std::vector<long> dist(anchors_.size(), std::numeric_limits<long>::max());
    recurse({origin}, dist);
    return stats_;
  }

 private:
  bool allowed(const Point& p) const {
    if (!translation_classes_) return true;
    return p >= Point(dim_);
  }

  void recurse(std::vector<Point> untried, const std::vector<long>& dist_in) {
    while (!untried.empty() && !stop_) {
      const Point c = untried.back();
      untried.pop_back();
      const std::size_t ci = grid_.index(c);
      long gained = 0;
      for (int a = 0; a < dim_; ++a) {
        for (int sgn : {1, -1}) {
          const Point q = c + Point::unit(dim_, a, sgn);
          if (grid_.inside(q) && (grid_[grid_.index(q)] & kInAnimal)) ++gained;
        }
      }
      grid_[ci] |= kInAnimal;
      animal_.push_back(c);
      adjacent_ += gained;
      if (grid_[ci] & kAnchor) ++anchors_in_;

      if (++stats_.visited > budget_) {
        stats_.budget_exhausted = true;
        stop_ = true;
      } else {
        if (anchors_in_ == count_reachable_anchors() && all_anchors_reachable())
          if (!visit_(animal_, adjacent_)) stop_ = true;
        std::vector<long> dist = dist_in;
        long need = 0;
        for (std::size_t k = 0; k < anchors_.size(); ++k) {
          dist[k] = std::min(dist[k], (c - anchors_[k]).norm1());
          need = std::max(need, dist[k]);
        }
        const long room = max_volume_ - static_cast<long>(animal_.size());
        if (!stop_ && room > 0 && need <= room) {
          std::vector<Point> fresh;
          for (int a = 0; a < dim_; ++a) {
            for (int sgn : {1, -1}) {
              const Point q = c + Point::unit(dim_, a, sgn);
              if (!grid_.inside(q) || !allowed(q)) continue;
              std::uint8_t& m = grid_[grid_.index(q)];
              if (m & kSeen) continue;
              m |= kSeen;
              fresh.push_back(q);
            }
          }
          std::vector<Point> next = untried;
          next.insert(next.end(), fresh.begin(), fresh.end());
          recurse(std::move(next), dist);
          for (const Point& q : fresh) grid_[grid_.index(q)] &= static_cast<std::uint8_t>(~kSeen);
        }
      }

      if (grid_[ci] & kAnchor) --anchors_in_;
      adjacent_ -= gained;
      animal_.pop_back();
      grid_[ci] &= static_cast<std::uint8_t>(~kInAnimal);
    }
  }

  std::size_t count_reachable_anchors() const {
    std::size_t n = 0;
    for (const Point& a : anchors_)
      if (a.norm1() < max_volume_) ++n;
    return n;
  }
  bool all_anchors_reachable() const { return count_reachable_anchors() == anchors_.size(); }

  int dim_;
  std::vector<Point> anchors_;
  int max_volume_;
  std::uint64_t budget_;
  const std::function<bool(std::span<const Point>, long)>& visit_;
  bool translation_classes_;
  Grid grid_;
  std::vector<Point> animal_;
  long adjacent_ = 0;
  std::size_t anchors_in_ = 0;
  bool stop_ = false;
  AnimalStats stats_;
};

// Boundary size of the filled closure of a connected set with `adjacent`
// adjacent pairs. A hole needs at least 2d enclosing sites.
long filled_boundary_size(std::span<const Point> cells, long adjacent) {
  const int d = cells.front().dim;
  const long n = static_cast<long>(cells.size());
  if (n < 2L * d) return 2L * d * n - 2 * adjacent;
  Point lo = cells.front(), hi = cells.front();
  for (const Point& p : cells)
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  for (int i = 0; i < d; ++i) {
    --lo[i];
    ++hi[i];
  }
  const Box box(lo, hi);
  thread_local std::vector<std::uint8_t> mark;
  thread_local std::vector<std::size_t> queue;
  mark.assign(box.vertex_count(), 0);
  for (const Point& p : cells) mark[box.index(p)] = 1;
  queue.clear();
  for (std::size_t v = 0; v < box.vertex_count(); ++v) {
    if (!mark[v] && box.on_shell(box.point(v))) {
      mark[v] = 2;
      queue.push_back(v);
    }
  }
  for (std::size_t h = 0; h < queue.size(); ++h) {
    const std::size_t v = queue[h];
    const Point p = box.point(v);
    for (int a = 0; a < d; ++a) {
      if (p[a] < hi[a] && !mark[v + box.stride(a)]) {
        mark[v + box.stride(a)] = 2;
        queue.push_back(v + box.stride(a));
      }
      if (p[a] > lo[a] && !mark[v - box.stride(a)]) {
        mark[v - box.stride(a)] = 2;
        queue.push_back(v - box.stride(a));
      }
    }
  }
  long holes = 0;
  for (auto m : mark)
    if (m == 0) ++holes;
  if (holes == 0) return 2L * d * n - 2 * adjacent;
  long filled = 0, adj = 0;
  for (std::size_t v = 0; v < box.vertex_count(); ++v) {
    if (mark[v] == 2) continue;
    ++filled;
    const Point p = box.point(v);
    for (int a = 0; a < d; ++a)
      if (p[a] < hi[a] && mark[v + box.stride(a)] != 2) ++adj;
  }
  return 2L * d * filled - 2 * adj;
}

}  // namespace

AnimalStats enumerate_animals(int dim, std::span<const Point> anchors, int max_volume, std::uint64_t budget,
                              const std::function<bool(std::span<const Point>, long)>& visit, bool translation_classes) {
  Point::check_dim(dim);
  if (translation_classes && !anchors.empty()) throw DomainError("translation classes cannot carry anchors");
  AnimalWalker walker(dim, anchors, max_volume, budget, visit, translation_classes);
  return walker.run();
}

CombinatoricsResult phi_exact(const Point& x, int max_volume, std::uint64_t budget) {
  CombinatoricsResult r;
  if (x.is_zero()) {
    r.phi = 0;
    r.psi = 0;
    r.upsilon = 1;
    r.achieved_at_volume = 1;
    r.certified = true;
    return r;
  }
  r.min_by_volume.assign(static_cast<std::size_t>(std::max(max_volume, 0) + 1), -1);
  long best = std::numeric_limits<long>::max();
  long best_volume = std::numeric_limits<long>::max();
  const Point anchors[] = {x};
  const auto stats = enumerate_animals(x.dim, anchors, max_volume, budget, [&](std::span<const Point> cells, long adj) {
    const long b = filled_boundary_size(cells, adj);
    const long n = static_cast<long>(cells.size());
    long& slot = r.min_by_volume[static_cast<std::size_t>(n)];
    if (slot < 0 || b < slot) slot = b;
    if (b < best || (b == best && n < best_volume)) {
      best = b;
      best_volume = n;
    }
    return true;
  });
  r.animals_visited = stats.visited;
  r.volumes_scanned = max_volume;
  if (best == std::numeric_limits<long>::max()) {
    r.phi = -1;
    r.certified = false;
    return r;
  }
  r.phi = best;
  r.achieved_at_volume = static_cast<int>(best_volume);
  r.upsilon = best_volume;
  r.psi = best_volume - 1;
  long below_last = std::numeric_limits<long>::max();
  for (int v = 1; v < max_volume; ++v) {
    const long m = r.min_by_volume[static_cast<std::size_t>(v)];
    if (m >= 0) below_last = std::min(below_last, m);
  }
  r.certified = !stats.budget_exhausted && max_volume >= x.norm1() + 1 && below_last == best;
  return r;
}

long psi_exact(const Point& x, int max_volume, std::uint64_t budget) { return phi_exact(x, max_volume, budget).psi; }
long upsilon_exact(const Point& x, int max_volume, std::uint64_t budget) { return phi_exact(x, max_volume, budget).upsilon; }

Point PhiTable::canonical(const Point& x) {
  Point c = x;
  for (int i = 0; i < c.dim; ++i) c[i] = std::abs(c[i]);
  std::sort(c.c.begin(), c.c.begin() + c.dim, std::greater<>());
  return c;
}

const CombinatoricsResult& PhiTable::get(const Point& x) {
  const Point key = canonical(x);
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  const int volume = static_cast<int>(key.norm1()) + 1 + slack_;
  return memo_.emplace(key, phi_exact(key, volume, budget_)).first->second;
}

PhiTResult phi_t_exact(const Point& x, const Direction& t, int volume_slack, int search_extra, std::uint64_t budget) {
  if (t.compare(x, Point(x.dim)) <= 0) throw DomainError("phi_t requires <t,x> > 0");
  PhiTable table(volume_slack, budget);
  PhiTResult out;
  out.certified = true;
  const long radius = x.norm1() + search_extra;
  bool have = false;
  for (const Point& y : l1_ball(x.dim, static_cast<int>(radius))) {
    if (t.compare(y, x) < 0) continue;
    ++out.candidates;
    const auto& r = table.get(y);
    out.certified = out.certified && r.certified;
    if (!have || r.phi < out.value || (r.phi == out.value && y.norm1() < out.argmin.norm1())) {
      out.value = r.phi;
      out.argmin = y;
      have = true;
    }
  }
  return out;
}

std::vector<Point> l1_ball(int dim, int radius) {
  std::vector<Point> out;
  Point p(dim);
  for (int i = 0; i < dim; ++i) p[i] = -radius;
  while (true) {
    if (p.norm1() <= radius) out.push_back(p);
    int i = dim - 1;
    while (i >= 0 && p[i] == radius) {
      p[i] = -radius;
      --i;
    }
    if (i < 0) break;
    ++p[i];
  }
  return out;
}

SubadditivityReport subadditivity_table(std::span<const Point> points, PhiTable& table) {
  SubadditivityReport rep;
  for (const Point& x : points) {
    for (const Point& y : points) {
      const auto& fx = table.get(x);
      const auto& fy = table.get(y);
      const auto& fxy = table.get(x - y);
      rep.all_certified = rep.all_certified && fx.certified && fy.certified && fxy.certified;
      ++rep.pairs_checked;
      if (fx.phi > fy.phi + fxy.phi) rep.violations.push_back({x, y, fx.phi, fy.phi, fxy.phi});
    }
  }
  return rep;
}

PhiBarSequence phi_bar_estimate(const std::vector<double>& xhat, const std::vector<int>& n_list, PhiTable& table) {
  PhiBarSequence seq;
  const int d = static_cast<int>(xhat.size());
  Point::check_dim(d);
  for (int n : n_list) {
    if (n <= 0) throw DomainError("phi_bar_estimate needs positive n");
    Point site(d);
    for (int i = 0; i < d; ++i) site[i] = static_cast<int>(std::floor(n * xhat[static_cast<std::size_t>(i)] + 1e-12));
    const auto& r = table.get(site);
    if (r.phi < 0) {
      seq.truncated = true;
      break;
    }
    seq.n.push_back(n);
    seq.sites.push_back(site);
    seq.values.push_back(static_cast<double>(r.phi) / n);
  }
  for (std::size_t i = 1; i < seq.values.size(); ++i)
    if (seq.values[i] > seq.values[i - 1] + 1e-12) seq.monotone_nonincreasing = false;
  const std::size_t half = seq.values.size() / 2;
  for (std::size_t i = half; i < seq.values.size(); ++i)
    for (std::size_t j = half; j < seq.values.size(); ++j) seq.cauchy_spread = std::max(seq.cauchy_spread, std::fabs(seq.values[i] - seq.values[j]));
  return seq;
}

std::map<long, std::uint64_t> surface_counts(int dim, int max_volume) {
  std::map<long, std::uint64_t> counts;
  enumerate_animals(
      dim, {}, max_volume, kDefaultAnimalBudget,
      [&](std::span<const Point> cells, long adj) {
        const long plain = 2L * dim * static_cast<long>(cells.size()) - 2 * adj;
        if (filled_boundary_size(cells, adj) == plain) ++counts[plain];
        return true;
      },
      true);
  return counts;
}

}  // namespace percoz
