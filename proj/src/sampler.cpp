#include "percoz/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <limits>
#include <set>
#include <thread>

namespace percoz {

const std::vector<std::string>& event_kind_names() {
  static const std::vector<std::string> names{"two-point", "h", "f", "g", "h_bar", "f_bar", "h_tilde", "f_tilde"};
  return names;
}

unsigned event_kind_bit(const std::string& name) {
  const auto& names = event_kind_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return 1u << i;
  if (name == "finite") return kind::kFinite;
  throw DomainError("unknown event kind '" + name + "'");
}

bool EventRecord::flag(unsigned bit) const {
  switch (bit) {
    case kind::kFinite: return finite_connect;
    case kind::kH: return h;
    case kind::kF: return f;
    case kind::kG: return g;
    case kind::kHBar: return h_bar;
    case kind::kFBar: return f_bar;
    case kind::kHTilde: return h_tilde;
    case kind::kFTilde: return f_tilde;
    default: throw DomainError("not a single event bit");
  }
}

bool EventRecord::implications_hold() const {
  if (f && !h) return false;
  if (f_bar && !h_bar) return false;
  if (f_tilde && !h_tilde) return false;
  if (g && !finite_connect) return false;
  if (h && !strip_finite) return false;
  return true;
}

EstimatorResult bernoulli_estimate(std::uint64_t hits, std::uint64_t n, std::uint64_t seed, const Box& box) {
  EstimatorResult r;
  r.hits = hits;
  r.n_samples = n;
  r.seed = seed;
  r.box = box;
  if (n == 0) {
    r.insufficient = true;
    return r;
  }
  r.value = static_cast<double>(hits) / static_cast<double>(n);
  r.std_error = std::sqrt(r.value * (1 - r.value) / static_cast<double>(n));
  return r;
}

BondConfig sample_config(const Box& box, double p, std::uint64_t seed, std::uint64_t stream_id) {
  if (!(p >= 0 && p <= 1)) throw DomainError("p must lie in [0,1]");
  BondConfig cfg(box, seed, p);
  const LazyBonds src{stream_key(seed, stream_id), p};
  box.for_each_edge([&](std::size_t slot) {
    if (src.open(slot)) cfg.set(slot, true);
  });
  return cfg;
}

bool finite_two_point(const BondConfig& config, const Point& x, int margin) {
  const Box& box = config.box();
  const Point o(x.dim);
  for (const Point* q : {&o, &x})
    if (!box.contains(*q) || box.shell_distance(*q) < margin) throw DomainError("site " + q->str() + " violates the box margin");
  Explorer ex(box);
  const auto res = ex.explore(config, box.index(o), AcceptAll{}, true);
  return !res.touches_shell && ex.visited(box.index(x));
}

std::vector<Point> detect_break_points(std::span<const Point> strip_cluster, const Direction& t, const Point& from,
                                       const Point& to) {
  std::vector<Point> out;
  if (strip_cluster.empty()) return out;
  const Point u = t.u();
  const Point lo = from + u, hi = to - u;
  if (t.compare(lo, hi) > 0) return out;
  std::vector<Point> by_t(strip_cluster.begin(), strip_cluster.end());
  std::sort(by_t.begin(), by_t.end(), [&](const Point& a, const Point& b) {
    const int c = t.compare(a, b);
    return c != 0 ? c < 0 : a < b;
  });
  std::vector<Point> members(strip_cluster.begin(), strip_cluster.end());
  std::sort(members.begin(), members.end());
  auto has = [&](const Point& p) { return std::binary_search(members.begin(), members.end(), p); };
  for (const Point& b : by_t) {
    if (t.compare(b, lo) < 0 || t.compare(b, hi) > 0) continue;
    if (!has(b - u) || !has(b + u)) continue;
    const auto first = std::partition_point(by_t.begin(), by_t.end(), [&](const Point& v) { return t.compare(v, b - u) < 0; });
    const auto last = std::partition_point(first, by_t.end(), [&](const Point& v) { return t.compare(v, b + u) <= 0; });
    if (last - first == 3) out.push_back(b);
  }
  return out;
}

TBonds detect_t_bonds(std::span<const Point> break_points, const Direction& t) {
  TBonds out;
  const Point u = t.u();
  std::vector<Point> sorted(break_points.begin(), break_points.end());
  std::sort(sorted.begin(), sorted.end());
  for (const Point& b : break_points) {
    if (std::binary_search(sorted.begin(), sorted.end(), b + u)) {
      out.edges.push_back(Edge::between(b, b + u));
      out.left.push_back(b);
    }
  }
  return out;
}

EventClassifier::EventClassifier(const Box& box, const Direction& t, int margin)
    : box_(box), t_(t), margin_(margin), explorer_(box) {
  if (t.dim() != box.dim()) throw DomainError("direction and box differ in dimension");
  if (!(t.t()[static_cast<std::size_t>(t.u_axis())] > 0)) throw DomainError("direction needs a positive coordinate");
  if (margin < 1) throw DomainError("margin must be at least 1");
}

void EventClassifier::check_margin(const Point& p) const {
  if (!box_.contains(p) || box_.shell_distance(p) < margin_)
    throw DomainError("site " + p.str() + " is within margin " + std::to_string(margin_) + " of the box shell");
}

template <EdgeSource Src>
bool EventClassifier::edge_open(const Src& src, const Point& p, const Point& q) const {
  const Edge e = Edge::between(p, q);
  return box_.contains(e) && src.open(box_.slot(e));
}

// Necessary local condition for b to be a break point of the strip cluster
// in [lo, hi]: the axial edges at b are open and every other edge from
// {b-u, b, b+u} into the slab around b inside the strip is closed.
template <EdgeSource Src>
bool EventClassifier::local_break_ok(const Src& src, const Point& b, const Point& lo, const Point& hi) const {
  const Point u = t_.u();
  const Point trio[3] = {b - u, b, b + u};
  if (!edge_open(src, trio[0], trio[1]) || !edge_open(src, trio[1], trio[2])) return false;
  for (const Point& c : trio) {
    for (const Point& w : neighbors(c)) {
      if (w == trio[0] || w == trio[1] || w == trio[2]) continue;
      if (!t_.in_slab(w, lo, hi) || !t_.in_slab(w, trio[0], trio[2])) continue;
      if (edge_open(src, c, w)) return false;
    }
  }
  return true;
}

// Necessary local condition for C meeting the slab [low, high] in exactly
// {low, high} with high = low + u.
template <EdgeSource Src>
bool EventClassifier::local_pair_ok(const Src& src, const Point& low, const Point& high, bool restrict_strip,
                                    const Point& lo, const Point& hi) const {
  if (!edge_open(src, low, high)) return false;
  for (const Point& c : {low, high}) {
    for (const Point& w : neighbors(c)) {
      if (w == low || w == high) continue;
      if (restrict_strip && !t_.in_slab(w, lo, hi)) continue;
      if (!t_.in_slab(w, low, high)) continue;
      if (edge_open(src, c, w)) return false;
    }
  }
  return true;
}

template <EdgeSource Src>
EventRecord EventClassifier::classify(const Src& src, const Point& a, const Point& b, unsigned kinds) {
  check_margin(a);
  check_margin(b);
  if (t_.compare(b, a) < 0) throw DomainError("classify needs <t,a> <= <t,b>");
  EventRecord rec;
  rec.x = b - a;
  rec.computed = kinds;
  const Point u = t_.u();
  const std::size_t ia = box_.index(a), ib = box_.index(b);
  const bool distinct = !(a == b);

  const bool h_possible = (kinds & (kind::kH | kind::kF)) && distinct && t_.compare(a + u, b - u) <= 0 &&
                          local_break_ok(src, a + u, a, b) && local_break_ok(src, b - u, a, b);
  const bool hbar_possible = (kinds & (kind::kHBar | kind::kFBar)) && distinct && local_pair_ok(src, b - u, b, false, a, b);
  const bool htilde_possible =
      (kinds & (kind::kHTilde | kind::kFTilde)) && distinct && local_pair_ok(src, a, a + u, false, a, b);
  const bool need_full = kinds & (kind::kFinite | kind::kG | kind::kSurface);
  const bool need_strip = h_possible || (kinds & kind::kG) || (hbar_possible && (kinds & kind::kFBar)) ||
                          (htilde_possible && (kinds & kind::kFTilde));

  // Strip cluster and its break points. A strip cluster at the shell makes
  // every event that needs it false, so the search may stop there.
  bool strip_connected = false;
  if (need_strip) {
    const auto res = explorer_.explore(src, ia, [&](std::size_t v) { return in_strip(v, a, b); }, true);
    rec.strip_finite = !res.touches_shell;
    strip_connected = rec.strip_finite && explorer_.visited(ib);
    if (strip_connected) {
      scratch_.clear();
      for (std::size_t v : explorer_.vertices()) scratch_.push_back(explorer_.point(v));
      rec.break_points = detect_break_points(scratch_, t_, a, b);
      auto bonds = detect_t_bonds(rec.break_points, t_);
      rec.t_bonds = std::move(bonds.edges);
    }
  }
  auto in_b = [&](const Point& p) { return std::find(rec.break_points.begin(), rec.break_points.end(), p) != rec.break_points.end(); };

  if (h_possible && strip_connected) {
    rec.h = in_b(a + u) && in_b(b - u);
    if (rec.h && (kinds & kind::kF)) {
      const Point lo = a + u, hi = b - u;
      const auto res = explorer_.explore(src, box_.index(lo), [&](std::size_t v) { return in_strip(v, lo, hi); }, true);
      scratch_.clear();
      for (std::size_t v : explorer_.vertices()) scratch_.push_back(explorer_.point(v));
      rec.f = !res.touches_shell && explorer_.visited(box_.index(hi)) && detect_break_points(scratch_, t_, lo, hi).empty();
    }
    if (!(kinds & kind::kH)) rec.h = false;
  }

  if (need_full) {
    const auto res = explorer_.explore(src, ia, AcceptAll{}, true);
    rec.finite_connect = !res.stopped && explorer_.visited(ib);
    if (rec.finite_connect && (kinds & kind::kG)) {
      std::size_t be = 0;
      for (const Point& bp : rec.break_points)
        if (in_b(bp + u)) ++be;
      rec.g = be <= 1;
    }
    if (rec.finite_connect && (kinds & kind::kSurface)) {
      std::vector<Point> pts;
      long open_edges = 0;
      const int d = box_.dim();
      for (std::size_t v : explorer_.vertices()) {
        pts.push_back(explorer_.point(v));
        for (int ax = 0; ax < d; ++ax) {
          const std::size_t w = v + box_.stride(ax);
          if (explorer_.point(v)[ax] < box_.hi()[ax] && explorer_.visited(w) &&
              src.open(v * static_cast<std::size_t>(d) + static_cast<std::size_t>(ax)))
            ++open_edges;
        }
      }
      rec.cluster_edges = open_edges;
      std::sort(pts.begin(), pts.end());
      rec.surface_size = edge_boundary_size(fill_infinite(pts));
    }
    if (!(kinds & kind::kFinite)) rec.finite_connect = false;
  }

  const bool b_empty = rec.break_points.empty();
  if (hbar_possible) {
    const Point bm = b - u;
    const auto res = explorer_.explore_visit(src, ia, AcceptAll{}, [&](std::size_t v) {
      const Point& p = explorer_.point(v);
      if (t_.in_slab(p, bm, b) && !(p == bm) && !(p == b)) return false;
      if (explorer_.on_shell(v) && t_.compare(p, b) <= 0) return false;
      return true;
    });
    const bool hb = !res.stopped && explorer_.visited(ib) && explorer_.visited(box_.index(bm));
    rec.h_bar = hb && (kinds & kind::kHBar);
    rec.f_bar = hb && (kinds & kind::kFBar) && b_empty;
  }
  if (htilde_possible) {
    const Point ap = a + u;
    const auto res = explorer_.explore_visit(src, ia, AcceptAll{}, [&](std::size_t v) {
      const Point& p = explorer_.point(v);
      if (t_.in_slab(p, a, ap) && !(p == a) && !(p == ap)) return false;
      if (explorer_.on_shell(v) && t_.compare(p, a) >= 0) return false;
      return true;
    });
    const bool ht = !res.stopped && explorer_.visited(ib) && explorer_.visited(box_.index(ap));
    rec.h_tilde = ht && (kinds & kind::kHTilde);
    rec.f_tilde = ht && (kinds & kind::kFTilde) && b_empty;
  }
  return rec;
}

template EventRecord EventClassifier::classify<BondConfig>(const BondConfig&, const Point&, const Point&, unsigned);
template EventRecord EventClassifier::classify<LazyBonds>(const LazyBonds&, const Point&, const Point&, unsigned);

EventRecord classify_events(const BondConfig& config, const Point& x, const Direction& t, int margin, unsigned kinds) {
  EventClassifier c(config.box(), t, margin);
  return c.classify(config, Point(x.dim), x, kinds);
}

RenewalSplit renewal_split(const BondConfig& config, const Point& x, const Direction& t, int margin) {
  EventClassifier c(config.box(), t, margin);
  const Point o(x.dim);
  const auto rec = c.classify(config, o, x, kind::kFinite | kind::kG);
  RenewalSplit s;
  if (!rec.finite_connect || rec.break_points.size() < 2) return s;
  const Point u = t.u();
  s.z1 = rec.break_points.front();
  s.z2 = rec.break_points.back();
  auto in_b = [&](const Point& p) { return std::find(rec.break_points.begin(), rec.break_points.end(), p) != rec.break_points.end(); };
  if (!in_b(s.z1 + u) || !in_b(s.z2 - u)) return s;
  s.applicable = true;
  s.f_bar_prefix = c.classify(config, o, s.z1, kind::kFBar | kind::kHBar).f_bar;
  s.h_middle = c.classify(config, s.z1, s.z2, kind::kH).h;
  s.f_tilde_suffix = c.classify(config, s.z2, x, kind::kFTilde | kind::kHTilde).f_tilde;
  return s;
}

namespace {

struct Counters {
  std::vector<std::array<std::uint64_t, 8>> hits;
  std::uint64_t violations = 0;
};

void validate(const SamplerParams& prm) {
  if (!(prm.p >= 0 && prm.p <= 1)) throw DomainError("p must lie in [0,1]");
  if (prm.t.dim() != prm.box.dim() || prm.box.dim() != prm.dim) throw DomainError("dimension mismatch among dim, t and box");
  if (prm.threads < 1) throw DomainError("threads must be positive");
}

}  // namespace

KernelEstimates estimate_kernels(const SamplerParams& prm, std::span<const Point> displacements) {
  validate(prm);
  const Point o(prm.dim);
  for (const Point& x : displacements)
    if (prm.t.compare(x, o) < 0) throw DomainError("displacement " + x.str() + " has <t,x> < 0");
  const std::size_t nx = displacements.size();
  const unsigned kinds = prm.kinds & kind::kEvents;
  const int workers = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(prm.threads), std::max<std::uint64_t>(prm.samples, 1)));
  std::vector<Counters> parts(static_cast<std::size_t>(workers));
  std::vector<std::string> errors(static_cast<std::size_t>(workers));
  auto work = [&](int w) {
    try {
      Counters& c = parts[static_cast<std::size_t>(w)];
      c.hits.assign(nx, {});
      EventClassifier cls(prm.box, prm.t, prm.margin);
      const std::uint64_t begin = prm.samples * static_cast<std::uint64_t>(w) / static_cast<std::uint64_t>(workers);
      const std::uint64_t end = prm.samples * static_cast<std::uint64_t>(w + 1) / static_cast<std::uint64_t>(workers);
      for (std::uint64_t i = begin; i < end; ++i) {
        const LazyBonds src{stream_key(prm.seed, prm.first_stream + i), prm.p};
        for (std::size_t k = 0; k < nx; ++k) {
          if (displacements[k] == o) continue;
          const auto rec = cls.classify(src, o, displacements[k], kinds);
          if (!rec.implications_hold()) ++c.violations;
          for (unsigned bit = 0; bit < 8; ++bit)
            if ((kinds & (1u << bit)) && rec.flag(1u << bit)) ++c.hits[k][bit];
        }
      }
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(w)] = e.what();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw DomainError(e);

  KernelEstimates out;
  out.samples = prm.samples;
  const auto& names = event_kind_names();
  for (unsigned bit = 0; bit < 8; ++bit) {
    if (!(kinds & (1u << bit))) continue;
    const std::string& name = names[bit];
    Kernel kern(prm.dim, name);
    long radius = 0;
    for (std::size_t k = 0; k < nx; ++k) {
      const Point& x = displacements[k];
      radius = std::max(radius, x.norm1());
      std::uint64_t hits = 0;
      for (const auto& c : parts) hits += c.hits.empty() ? 0 : c.hits[k][bit];
      EstimatorResult r = bernoulli_estimate(hits, prm.samples, prm.seed, prm.box);
      if (x == o) {
        r = EstimatorResult{};
        r.n_samples = prm.samples;
        r.seed = prm.seed;
        r.box = prm.box;
        r.value = name == "h" ? 1.0 : (name == "f" ? 0.0 : r.value);
      }
      out.results[name][x] = r;
      kern.set(x, r.value, r.std_error);
    }
    if (name == "h") kern.set(o, 1.0);
    if (name == "f") kern.set(o, 0.0);
    kern.support_radius = radius;
    out.kernels[name] = std::move(kern);
  }
  for (const auto& c : parts) out.implication_violations += c.violations;
  return out;
}

void for_each_record(const SamplerParams& prm, std::span<const Point> displacements,
                     const std::function<void(std::uint64_t, const EventRecord&)>& on_record) {
  validate(prm);
  const Point o(prm.dim);
  EventClassifier cls(prm.box, prm.t, prm.margin);
  for (std::uint64_t i = 0; i < prm.samples; ++i) {
    const LazyBonds src{stream_key(prm.seed, prm.first_stream + i), prm.p};
    for (const Point& x : displacements) on_record(i, cls.classify(src, o, x, prm.kinds));
  }
}

SurfaceTailResult surface_tail(const Point& x, double delta, long phi, const SamplerParams& prm) {
  validate(prm);
  if (!(delta >= 0)) throw DomainError("delta must be nonnegative");
  if (phi < 0) throw DomainError("phi normalizer unavailable");
  SurfaceTailResult out;
  const double thr = std::ceil((1 + delta) * static_cast<double>(phi) - 1e-9);
  out.threshold = std::isfinite(thr) && thr < 1e15 ? static_cast<long>(thr) : std::numeric_limits<long>::max();
  EventClassifier cls(prm.box, prm.t, prm.margin);
  const Point o(prm.dim);
  std::uint64_t cond = 0, hits = 0;
  for (std::uint64_t i = 0; i < prm.samples; ++i) {
    const LazyBonds src{stream_key(prm.seed, prm.first_stream + i), prm.p};
    const auto rec = cls.classify(src, o, x, kind::kFinite | kind::kSurface);
    if (!rec.finite_connect) continue;
    ++cond;
    if (rec.surface_size >= out.threshold) ++hits;
  }
  out.conditioning_hits = cond;
  out.estimate = bernoulli_estimate(hits, cond, prm.seed, prm.box);
  out.estimate.insufficient = cond < kMinConditioningHits;
  return out;
}

SlabCrossings slab_crossings(const ClusterData& cluster, const Direction& t, int N, const Point& x) {
  if (!cluster.filled) throw DomainError("slab_crossings needs a filled cluster");
  if (N < 1) throw DomainError("slab width must be at least 1");
  const double len = x.norm2();
  if (!(len > 0)) throw DomainError("slab_crossings needs x != 0");
  const int nslabs = std::max(1, static_cast<int>(std::floor(len / N)));
  std::vector<Point> cuts;
  cuts.emplace_back(x.dim);
  for (int i = 1; i < nslabs; ++i) {
    Point c(x.dim);
    for (int k = 0; k < x.dim; ++k) c[k] = static_cast<int>(std::floor(i * N * x[k] / len + 1e-12));
    cuts.push_back(c);
  }
  cuts.push_back(x);
  const double step = t.dot(t.u());
  const auto& filled = cluster.filled_vertices;
  SlabCrossings out;
  int multi = 0;
  for (int i = 0; i < nslabs; ++i) {
    const Point& lo = cuts[static_cast<std::size_t>(i)];
    const Point& hi = cuts[static_cast<std::size_t>(i) + 1];
    const double klo = t.dot(lo), khi = t.dot(hi);
    SlabReport rep;
    rep.index = i;
    std::vector<Point> inside;
    for (const Point& v : filled)
      if (t.in_slab(v, lo, hi)) inside.push_back(v);
    std::sort(inside.begin(), inside.end());
    std::vector<char> seen(inside.size(), 0);
    for (std::size_t s = 0; s < inside.size(); ++s) {
      if (seen[s]) continue;
      std::vector<std::size_t> stack{s};
      seen[s] = 1;
      double kmin = t.dot(inside[s]), kmax = kmin;
      while (!stack.empty()) {
        const Point p = inside[stack.back()];
        stack.pop_back();
        kmin = std::min(kmin, t.dot(p));
        kmax = std::max(kmax, t.dot(p));
        for (const Point& q : neighbors(p)) {
          const auto it = std::lower_bound(inside.begin(), inside.end(), q);
          if (it == inside.end() || !(*it == q)) continue;
          const auto j = static_cast<std::size_t>(it - inside.begin());
          if (!seen[j]) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
      }
      if (kmin - klo < step - Direction::kTolerance && khi - kmax < step - Direction::kTolerance) ++rep.crossings;
    }
    std::vector<Edge> plaq;
    for (const Edge& e : cluster.external_boundary) {
      const double mid = 0.5 * (t.dot(e.base) + t.dot(e.tip()));
      if (mid >= klo - Direction::kTolerance && mid <= khi + Direction::kTolerance) plaq.push_back(e);
    }
    rep.surface_components = static_cast<int>(surface_components(plaq).size());
    rep.good = rep.surface_components <= 1;
    if (rep.crossings >= 2) ++multi;
    out.slabs.push_back(rep);
  }
  out.eta = static_cast<double>(multi) / nslabs;
  return out;
}

}  // namespace percoz
