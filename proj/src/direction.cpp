#include "percoz/direction.hpp"

#include <cmath>
#include <sstream>

namespace percoz {

namespace {

int first_max_axis(const std::vector<double>& t) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(t.size()); ++i)
    if (t[static_cast<std::size_t>(i)] > t[static_cast<std::size_t>(best)] + Direction::kTolerance) best = i;
  return best;
}

}  // namespace

Direction Direction::from_integer(const Point& v) {
  if (v.is_zero()) throw DomainError("direction vector must be nonzero");
  Direction d;
  d.exact_ = true;
  d.ivec_ = v;
  const double n = v.norm2();
  for (int i = 0; i < v.dim; ++i) d.t_.push_back(v[i] / n);
  // Ties among maximizers are exact here since equal integers give equal t_i.
  int best = 0;
  for (int i = 1; i < v.dim; ++i)
    if (v[i] > v[best]) best = i;
  d.u_axis_ = best;
  return d;
}

Direction Direction::from_real(const std::vector<double>& v) {
  Point::check_dim(static_cast<int>(v.size()));
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (!(n > 0) || !std::isfinite(n)) throw DomainError("direction vector must be finite and nonzero");
  Direction d;
  for (double x : v) d.t_.push_back(x / n);
  d.ivec_ = Point(static_cast<int>(v.size()));
  d.u_axis_ = first_max_axis(d.t_);
  return d;
}

Direction Direction::parse(const std::string& text) {
  std::vector<double> vals;
  bool all_int = true;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used == 0) throw DomainError("bad direction component '" + tok + "'");
    vals.push_back(v);
    if (tok.find_first_of(".eE") != std::string::npos && v != std::round(v)) all_int = false;
    if (std::fabs(v) > 1e6) all_int = false;
  }
  if (all_int) {
    Point p(static_cast<int>(vals.size()));
    for (int i = 0; i < p.dim; ++i) p[i] = static_cast<int>(std::lround(vals[static_cast<std::size_t>(i)]));
    return from_integer(p);
  }
  return from_real(vals);
}

double Direction::dot(const Point& x) const {
  double s = 0;
  for (int i = 0; i < dim(); ++i) s += t_[static_cast<std::size_t>(i)] * x[i];
  return s;
}

int Direction::compare(const Point& a, const Point& b) const {
  if (exact_) {
    long long s = 0;
    for (int i = 0; i < dim(); ++i) s += static_cast<long long>(ivec_[i]) * (static_cast<long long>(a[i]) - b[i]);
    return (s > 0) - (s < 0);
  }
  const double diff = dot(a - b);
  if (std::fabs(diff) <= kTolerance) return 0;
  return diff > 0 ? 1 : -1;
}

std::string Direction::str() const {
  std::ostringstream os;
  if (exact_) {
    for (int i = 0; i < dim(); ++i) os << (i ? "," : "") << ivec_[i];
  } else {
    os.precision(17);
    for (int i = 0; i < dim(); ++i) os << (i ? "," : "") << t_[static_cast<std::size_t>(i)];
  }
  return os.str();
}

}  // namespace percoz
