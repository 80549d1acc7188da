#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "percoz/lattice.hpp"

namespace percoz::cli {

/// Exit code 2. Carries one message per offending field.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(std::vector<std::string> fields);
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

class Validator {
 public:
  void require(bool ok, const std::string& field, const std::string& message);
  void fail(const std::string& field, const std::string& message) { require(false, field, message); }
  /// Throws UsageError listing every recorded failure.
  void check() const;

 private:
  std::vector<std::string> errors_;
};

Point parse_point(const std::string& text, int dim, const std::string& field);
/// "a,b,c;d,e,f" inline, or a file holding a JSON array of arrays or one
/// comma-separated point per line.
std::vector<Point> parse_points(const std::string& text_or_file, int dim, const std::string& field);
/// "20,40,80" or "20:120" or "20:120:5".
std::vector<int> parse_int_list(const std::string& text, const std::string& field);
std::vector<double> parse_double_list(const std::string& text, const std::string& field);

nlohmann::json read_json_file(const std::string& path, const std::string& field);

/// Fills options of `app` that were not given on the command line from the
/// JSON object; keys are long option names, with '-' or '_'.
void apply_config(CLI::App& app, const nlohmann::json& config);

int default_threads();

std::string spec_hash(const nlohmann::json& spec);

/// Run manifest. wall_time_seconds and started_at are the only fields that
/// vary between identical runs.
class Manifest {
 public:
  Manifest(std::string subcommand, nlohmann::json spec, int threads);
  nlohmann::json finish() const;
  const nlohmann::json& spec() const { return spec_; }
  const std::string& subcommand() const { return subcommand_; }

 private:
  std::string subcommand_;
  nlohmann::json spec_;
  int threads_;
  std::chrono::steady_clock::time_point t0_;
  std::string started_at_;
};

/// Writes JSON (indent 2, trailing newline) to a path, or stdout for "" or "-".
void write_json(const std::string& path, const nlohmann::json& j);

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  void write(const std::string& path) const;
};

std::string fmt(double v);
std::string point_str(const Point& p);

/// gnuplot script plotting column `ycol` against `xcol` of a CSV file.
void write_gnuplot(const std::string& path, const std::string& csv, int xcol, int ycol, const std::string& title,
                   bool log_y);

}  // namespace percoz::cli
