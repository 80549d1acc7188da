#include "percoz/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <ostream>
#include <sstream>

#include "percoz/explorer.hpp"

namespace percoz {

void Point::check_dim(int d) {
  if (d < 1 || d > kMaxDim) throw DomainError("dimension must be in [1, " + std::to_string(kMaxDim) + "], got " + std::to_string(d));
}

Point::Point(std::initializer_list<int> coords) : dim(static_cast<int>(coords.size())) {
  check_dim(dim);
  int i = 0;
  for (int v : coords) c[static_cast<std::size_t>(i++)] = v;
}

Point Point::from(std::span<const int> coords) {
  Point p(static_cast<int>(coords.size()));
  for (int i = 0; i < p.dim; ++i) p[i] = coords[static_cast<std::size_t>(i)];
  return p;
}

Point Point::unit(int d, int axis, int sign) {
  Point p(d);
  p[axis] = sign;
  return p;
}

Point Point::operator+(const Point& o) const {
  Point r(*this);
  for (int i = 0; i < dim; ++i) r[i] += o[i];
  return r;
}

Point Point::operator-(const Point& o) const {
  Point r(*this);
  for (int i = 0; i < dim; ++i) r[i] -= o[i];
  return r;
}

Point Point::operator-() const {
  Point r(*this);
  for (int i = 0; i < dim; ++i) r[i] = -r[i];
  return r;
}

Point Point::operator*(int k) const {
  Point r(*this);
  for (int i = 0; i < dim; ++i) r[i] *= k;
  return r;
}

long Point::norm1() const {
  long s = 0;
  for (int i = 0; i < dim; ++i) s += std::labs(static_cast<long>(c[static_cast<std::size_t>(i)]));
  return s;
}

double Point::norm2() const {
  double s = 0;
  for (int i = 0; i < dim; ++i) s += static_cast<double>((*this)[i]) * (*this)[i];
  return std::sqrt(s);
}

bool Point::is_zero() const {
  for (int i = 0; i < dim; ++i)
    if ((*this)[i] != 0) return false;
  return true;
}

std::string Point::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Point& p) {
  os << '(';
  for (int i = 0; i < p.dim; ++i) os << (i ? "," : "") << p[i];
  return os << ')';
}

std::size_t PointHash::operator()(const Point& p) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ull ^ static_cast<std::uint64_t>(p.dim);
  for (int i = 0; i < p.dim; ++i) {
    h ^= static_cast<std::uint32_t>(p[i]) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

std::size_t EdgeHash::operator()(const Edge& e) const noexcept {
  return PointHash{}(e.base) * 31u + static_cast<std::size_t>(e.axis);
}

std::vector<Point> neighbors(const Point& x) {
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(2 * x.dim));
  for (int a = 0; a < x.dim; ++a) {
    out.push_back(x + Point::unit(x.dim, a, +1));
    out.push_back(x + Point::unit(x.dim, a, -1));
  }
  return out;
}

Edge Edge::between(const Point& a, const Point& b) {
  if (a.dim != b.dim) throw DomainError("edge endpoints differ in dimension");
  Point diff = b - a;
  if (diff.norm1() != 1) throw DomainError("edge endpoints " + a.str() + " and " + b.str() + " are not at L1 distance 1");
  for (int i = 0; i < a.dim; ++i) {
    if (diff[i] == 1) return Edge(a, i);
    if (diff[i] == -1) return Edge(b, i);
  }
  throw DomainError("unreachable");
}

Box::Box(Point lo, Point hi) : lo_(lo), hi_(hi) {
  if (lo.dim != hi.dim) throw DomainError("box corners differ in dimension");
  Point::check_dim(lo.dim);
  const int d = lo.dim;
  for (int i = 0; i < d; ++i)
    if (lo[i] > hi[i]) throw DomainError("box corner lo " + lo.str() + " exceeds hi " + hi.str());
  // First coordinate is most significant, so index order is lexicographic.
  std::size_t s = 1;
  for (int i = d - 1; i >= 0; --i) {
    strides_[static_cast<std::size_t>(i)] = s;
    s *= static_cast<std::size_t>(extent(i));
  }
  vertex_count_ = s;
  edge_count_ = 0;
  for (int a = 0; a < d; ++a) edge_count_ += vertex_count_ / static_cast<std::size_t>(extent(a)) * static_cast<std::size_t>(extent(a) - 1);
}

Box Box::centered(int dim, int half_width) {
  Point lo(dim), hi(dim);
  for (int i = 0; i < dim; ++i) {
    lo[i] = -half_width;
    hi[i] = half_width;
  }
  return Box(lo, hi);
}

bool Box::contains(const Point& p) const {
  if (p.dim != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (p[i] < lo_[i] || p[i] > hi_[i]) return false;
  return true;
}

bool Box::on_shell(const Point& p) const {
  for (int i = 0; i < dim(); ++i)
    if (p[i] == lo_[i] || p[i] == hi_[i]) return true;
  return false;
}

int Box::shell_distance(const Point& p) const {
  int m = 1 << 30;
  for (int i = 0; i < dim(); ++i) m = std::min({m, p[i] - lo_[i], hi_[i] - p[i]});
  return m;
}

std::size_t Box::index(const Point& p) const {
  std::size_t idx = 0;
  for (int i = 0; i < dim(); ++i) idx += static_cast<std::size_t>(p[i] - lo_[i]) * strides_[static_cast<std::size_t>(i)];
  return idx;
}

Point Box::point(std::size_t index) const {
  Point p(dim());
  for (int i = 0; i < dim(); ++i) {
    const std::size_t s = strides_[static_cast<std::size_t>(i)];
    p[i] = lo_[i] + static_cast<std::int32_t>(index / s);
    index %= s;
  }
  return p;
}

bool Box::slot_is_edge(std::size_t slot) const {
  const int d = dim();
  const int axis = static_cast<int>(slot % static_cast<std::size_t>(d));
  return point(slot / static_cast<std::size_t>(d))[axis] < hi_[axis];
}

Edge Box::edge_at_slot(std::size_t slot) const {
  const auto d = static_cast<std::size_t>(dim());
  return Edge(point(slot / d), static_cast<int>(slot % d));
}

Explorer::Explorer(const Box& box) : box_(box) {
  points_.resize(box.vertex_count());
  shell_.resize(box.vertex_count());
  stamp_.assign(box.vertex_count(), 0u);
  for (std::size_t v = 0; v < box.vertex_count(); ++v) {
    points_[v] = box.point(v);
    shell_[v] = box.on_shell(points_[v]) ? 1 : 0;
  }
  order_.reserve(256);
}

BondConfig::BondConfig(Box box, std::uint64_t seed, double p) : box_(std::move(box)), seed_(seed), p_(p) {
  bits_.assign((box_.slot_count() + 63) / 64, 0ull);
}

void BondConfig::set(std::size_t slot, bool value) {
  if (value)
    bits_[slot >> 6] |= (1ull << (slot & 63));
  else
    bits_[slot >> 6] &= ~(1ull << (slot & 63));
}

void BondConfig::set(const Edge& e, bool value) {
  if (!box_.contains(e)) throw DomainError("edge " + e.base.str() + "+u" + std::to_string(e.axis + 1) + " outside box");
  set(box_.slot(e), value);
}

std::size_t BondConfig::open_count() const {
  std::size_t n = 0;
  for (auto w : bits_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

namespace {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DomainError("truncated BondConfig stream");
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> BondConfig::serialize() const {
  std::vector<std::uint8_t> out{'P', 'C', 'Z', 'B'};
  const int d = box_.dim();
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (int i = 0; i < d; ++i) put<std::int32_t>(out, box_.lo()[i]);
  for (int i = 0; i < d; ++i) put<std::int32_t>(out, box_.hi()[i]);
  put<std::uint64_t>(out, seed_);
  put<double>(out, p_);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(box_.edge_count()));
  std::uint8_t cur = 0;
  int nbit = 0;
  box_.for_each_edge([&](std::size_t slot) {
    if (open(slot)) cur |= static_cast<std::uint8_t>(1u << nbit);
    if (++nbit == 8) {
      out.push_back(cur);
      cur = 0;
      nbit = 0;
    }
  });
  if (nbit) out.push_back(cur);
  return out;
}

BondConfig BondConfig::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "PCZB", 4) != 0) throw DomainError("not a BondConfig stream");
  std::size_t pos = 4;
  if (get<std::uint32_t>(bytes, pos) != kVersion) throw DomainError("unsupported BondConfig version");
  const int d = static_cast<int>(get<std::uint32_t>(bytes, pos));
  Point::check_dim(d);
  Point lo(d), hi(d);
  for (int i = 0; i < d; ++i) lo[i] = get<std::int32_t>(bytes, pos);
  for (int i = 0; i < d; ++i) hi[i] = get<std::int32_t>(bytes, pos);
  const auto seed = get<std::uint64_t>(bytes, pos);
  const auto p = get<double>(bytes, pos);
  BondConfig cfg(Box(lo, hi), seed, p);
  const auto n = get<std::uint64_t>(bytes, pos);
  if (n != cfg.box().edge_count()) throw DomainError("edge count does not match box");
  if (bytes.size() - pos != (n + 7) / 8) throw DomainError("bit stream length does not match edge count");
  std::size_t k = 0;
  cfg.box().for_each_edge([&](std::size_t slot) {
    if ((bytes[pos + k / 8] >> (k % 8)) & 1u) cfg.set(slot, true);
    ++k;
  });
  return cfg;
}

}  // namespace percoz
