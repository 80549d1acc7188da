#include "cli_support.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#ifndef PERCOZ_VERSION
#define PERCOZ_VERSION "unknown"
#endif

namespace percoz::cli {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n[]()");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n[]()");
  return s.substr(a, b - a + 1);
}

std::string config_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::vector<std::string> parts;
    const bool nested = !v.empty() && v.front().is_array();
    for (const auto& e : v) parts.push_back(config_text(e));
    return join(parts, nested ? ";" : ",");
  }
  throw UsageError({"config: unsupported value " + v.dump()});
}

}  // namespace

UsageError::UsageError(std::vector<std::string> fields)
    : std::runtime_error(join(fields, "; ")), fields_(std::move(fields)) {}

void Validator::require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) errors_.push_back(field + ": " + message);
}

void Validator::check() const {
  if (!errors_.empty()) throw UsageError(errors_);
}

Point parse_point(const std::string& text, int dim, const std::string& field) {
  std::vector<int> c;
  for (const auto& part : split(trim(text), ',')) {
    const std::string t = trim(part);
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      c.push_back(std::stoi(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw UsageError({field + ": '" + text + "' is not a list of integers"});
    }
  }
  if (static_cast<int>(c.size()) != dim)
    throw UsageError({field + ": expected " + std::to_string(dim) + " coordinates, got " + std::to_string(c.size())});
  return Point::from(c);
}

std::vector<Point> parse_points(const std::string& text_or_file, int dim, const std::string& field) {
  std::vector<Point> out;
  std::ifstream in(text_or_file);
  if (in) {
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string body = ss.str();
    const auto first = body.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && body[first] == '[') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(body);
      } catch (const std::exception& e) {
        throw UsageError({field + ": " + text_or_file + " is not valid JSON (" + e.what() + ")"});
      }
      for (const auto& e : j) out.push_back(parse_point(config_text(e), dim, field));
    } else {
      for (const auto& line : split(body, '\n'))
        if (!trim(line).empty() && trim(line)[0] != '#') out.push_back(parse_point(line, dim, field));
    }
    return out;
  }
  for (const auto& part : split(text_or_file, ';'))
    if (!trim(part).empty()) out.push_back(parse_point(part, dim, field));
  if (out.empty()) throw UsageError({field + ": no points given"});
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& field) {
  std::vector<int> out;
  try {
    if (text.find(':') != std::string::npos) {
      const auto p = split(text, ':');
      if (p.size() < 2 || p.size() > 3) throw std::invalid_argument(text);
      const int a = std::stoi(p[0]), b = std::stoi(p[1]), s = p.size() == 3 ? std::stoi(p[2]) : 1;
      if (s <= 0 || b < a) throw std::invalid_argument(text);
      for (int n = a; n <= b; n += s) out.push_back(n);
    } else {
      for (const auto& part : split(text, ','))
        if (!trim(part).empty()) out.push_back(std::stoi(trim(part)));
    }
  } catch (const std::exception&) {
    throw UsageError({field + ": '" + text + "' is not an integer list or range a:b[:step]"});
  }
  if (out.empty()) throw UsageError({field + ": empty list"});
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    if (trim(part).empty()) continue;
    try {
      out.push_back(std::stod(trim(part)));
    } catch (const std::exception&) {
      throw UsageError({field + ": '" + part + "' is not a number"});
    }
  }
  if (out.empty()) throw UsageError({field + ": empty list"});
  return out;
}

nlohmann::json read_json_file(const std::string& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw UsageError({field + ": cannot open '" + path + "'"});
  try {
    return nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw UsageError({field + ": '" + path + "' is not valid JSON (" + e.what() + ")"});
  }
}

void apply_config(CLI::App& app, const nlohmann::json& config) {
  if (!config.is_object()) throw UsageError({"config: top level must be a JSON object"});
  std::vector<std::string> unknown;
  for (const auto& [key, value] : config.items()) {
    std::string name = key;
    for (char& c : name)
      if (c == '_') c = '-';
    if (name == "config") continue;
    CLI::Option* opt = nullptr;
    try {
      opt = app.get_option("--" + name);
    } catch (const CLI::OptionNotFound&) {
      unknown.push_back("config: unknown key '" + key + "' for " + app.get_name());
      continue;
    }
    if (opt->count() > 0) continue;  // the command line wins
    opt->add_result(config_text(value));
    opt->run_callback();
  }
  if (!unknown.empty()) throw UsageError(unknown);
}

int default_threads() {
  if (const char* env = std::getenv("PERCOZ_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw UsageError({"PERCOZ_THREADS: must be a positive integer, got '" + std::string(env) + "'"});
  }
  return 1;
}

std::string spec_hash(const nlohmann::json& spec) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : spec.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Manifest::Manifest(std::string subcommand, nlohmann::json spec, int threads)
    : subcommand_(std::move(subcommand)), spec_(std::move(spec)), threads_(threads), t0_(std::chrono::steady_clock::now()) {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  started_at_ = buf;
}

nlohmann::json Manifest::finish() const {
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  return {{"tool", "percoz"},
          {"version", PERCOZ_VERSION},
          {"subcommand", subcommand_},
          {"spec", spec_},
          {"spec_hash", spec_hash(spec_)},
          {"threads", threads_},
          {"rng", "splitmix64 counter streams keyed by (seed, stream_id)"},
          {"started_at", started_at_},
          {"wall_time_seconds", wall}};
}

void write_json(const std::string& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw UsageError({"out: cannot write '" + path + "'"});
  out << text;
}

void Csv::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw UsageError({"csv: cannot write '" + path + "'"});
  out << join(header, ",") << "\n";
  for (const auto& r : rows) out << join(r, ",") << "\n";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string point_str(const Point& p) {
  std::string s;
  for (int i = 0; i < p.dim; ++i) s += (i ? " " : "") + std::to_string(p[i]);
  return s;
}

void write_gnuplot(const std::string& path, const std::string& csv, int xcol, int ycol, const std::string& title,
                   bool log_y) {
  std::ofstream out(path);
  if (!out) throw UsageError({"plot: cannot write '" + path + "'"});
  out << "set datafile separator ','\n";
  out << "set key autotitle columnhead\n";
  if (log_y) out << "set logscale y\n";
  out << "set title '" << title << "'\n";
  out << "plot '" << csv << "' using " << xcol << ":" << ycol << " with linespoints\n";
}

}  // namespace percoz::cli
