#include "percoz/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace percoz {

void Kernel::set(const Point& x, double value, double std_error) {
  if (x.dim != dim) throw DomainError("kernel entry " + x.str() + " has wrong dimension");
  if (!(value >= 0) || !std::isfinite(value)) throw DomainError("kernel values must be finite and nonnegative");
  entries[x] = {value, std_error};
}

double Kernel::value(const Point& x) const {
  auto it = entries.find(x);
  return it == entries.end() ? 0.0 : it->second.value;
}

double Kernel::error(const Point& x) const {
  auto it = entries.find(x);
  return it == entries.end() ? 0.0 : it->second.std_error;
}

double Kernel::total_mass() const {
  double s = 0;
  for (const auto& [x, e] : entries) s += e.value;
  return s;
}

long Kernel::max_norm1() const {
  long m = 0;
  for (const auto& [x, e] : entries)
    if (e.value != 0) m = std::max(m, x.norm1());
  return m;
}

void Kernel::drop_zeros() {
  std::erase_if(entries, [](const auto& kv) { return kv.second.value == 0 && kv.second.std_error == 0; });
}

nlohmann::json Kernel::to_json() const {
  nlohmann::json j;
  j["dim"] = dim;
  j["kind"] = kind;
  if (support_radius >= 0) j["support_radius"] = support_radius;
  auto& arr = j["entries"] = nlohmann::json::array();
  for (const auto& [x, e] : entries) {
    nlohmann::json row;
    row["x"] = std::vector<int>(x.c.begin(), x.c.begin() + x.dim);
    row["value"] = e.value;
    if (e.std_error != 0) row["std_error"] = e.std_error;
    arr.push_back(std::move(row));
  }
  return j;
}

Kernel Kernel::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("entries")) throw DomainError("kernel JSON needs dim and entries");
  Kernel k(j.at("dim").get<int>(), j.value("kind", std::string("h")));
  k.support_radius = j.value("support_radius", -1L);
  for (const auto& row : j.at("entries")) {
    const auto coords = row.at("x").get<std::vector<int>>();
    if (static_cast<int>(coords.size()) != k.dim) throw DomainError("kernel entry has wrong dimension");
    k.set(Point::from(coords), row.at("value").get<double>(), row.value("std_error", 0.0));
  }
  return k;
}

}  // namespace percoz
