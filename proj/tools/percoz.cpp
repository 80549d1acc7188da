#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "json.hpp"
#include "percoz/asymptotics.hpp"
#include "percoz/cluster.hpp"
#include "percoz/combinatorics.hpp"
#include "percoz/exact.hpp"
#include "percoz/renewal.hpp"
#include "percoz/sampler.hpp"

using namespace percoz;
using namespace percoz::cli;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kDefect = 1, kUsage = 2;

json point_json(const Point& p) { return std::vector<int>(p.c.begin(), p.c.begin() + p.dim); }

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

Eigen::VectorXd to_eigen(const Point& p) {
  Eigen::VectorXd v(p.dim);
  for (int i = 0; i < p.dim; ++i) v[i] = p[i];
  return v;
}

Eigen::VectorXd parse_real_vector(const std::string& text, int dim, const std::string& field) {
  const auto vals = parse_double_list(text, field);
  if (static_cast<int>(vals.size()) != dim)
    throw UsageError({field + ": expected " + std::to_string(dim) + " components, got " + std::to_string(vals.size())});
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = vals[static_cast<std::size_t>(i)];
  if (!(v.norm() > 0)) throw UsageError({field + ": must be nonzero"});
  return v;
}

Direction parse_direction(const std::string& text, int dim, const std::string& field) {
  if (text.empty()) return Direction::axis(dim, 0);
  Direction t;
  try {
    t = Direction::parse(text);
  } catch (const std::exception& e) {
    throw UsageError({field + ": " + e.what()});
  }
  if (t.dim() != dim) throw UsageError({field + ": expected " + std::to_string(dim) + " components"});
  return t;
}

Kernel load_kernel(const std::string& path, const std::string& field, const std::string& kind) {
  const json j = read_json_file(path, field);
  try {
    if (j.contains("entries")) return Kernel::from_json(j);
    if (j.contains("kernels") && j["kernels"].contains(kind)) return Kernel::from_json(j["kernels"][kind]);
    if (j.contains("kernel") || j.contains("model")) return synthetic::from_spec(j);
  } catch (const DomainError& e) {
    throw UsageError({field + ": " + e.what()});
  } catch (const json::exception& e) {
    throw UsageError({field + ": " + e.what()});
  }
  throw UsageError({field + ": '" + path + "' holds no kernel (expected entries, kernels." + kind + ", or a synthetic model)"});
}

struct Common {
  std::string config;
  std::string out;
  std::string csv;
  std::string plot;
  int threads = 0;
};

void add_common(CLI::App* sub, Common& c, bool csv = true) {
  sub->add_option("--config", c.config, "JSON file mirroring these flags; flags given on the command line win");
  sub->add_option("--out", c.out, "Output JSON path (default stdout)");
  if (csv) {
    sub->add_option("--csv", c.csv, "CSV table path");
    sub->add_option("--plot", c.plot, "gnuplot script path (needs --csv)");
  }
  sub->add_option("--threads", c.threads, "Worker threads (default PERCOZ_THREADS or 1)");
}

int thread_count(const Common& c, Validator& v) {
  v.require(c.threads >= 0, "threads", "must be positive");
  return c.threads > 0 ? c.threads : default_threads();
}

struct SamplerOpts {
  int dim = 3;
  double p = 0.5;
  std::string t;
  int box = 12;
  int margin = 1;
  std::uint64_t samples = 1000;
  std::uint64_t seed = 1;
  std::uint64_t first_stream = 0;
};

void add_sampler(CLI::App* sub, SamplerOpts& s) {
  sub->add_option("--dim", s.dim, "Lattice dimension")->capture_default_str();
  sub->add_option("--p", s.p, "Bond density")->capture_default_str();
  sub->add_option("--t", s.t, "Direction t, e.g. 1,0,0 (default first axis)");
  sub->add_option("--box", s.box, "Box side L: the cube [-L/2, L/2]^d")->capture_default_str();
  sub->add_option("--margin", s.margin, "Minimum distance of the sites from the box shell")->capture_default_str();
  sub->add_option("--samples", s.samples, "Number of configurations")->capture_default_str();
  sub->add_option("--seed", s.seed, "Master seed")->capture_default_str();
  sub->add_option("--first-stream", s.first_stream, "Stream id of the first sample")->capture_default_str();
}

void validate_sampler(const SamplerOpts& s, Validator& v) {
  v.require(s.dim >= 2 && s.dim <= kMaxDim, "dim", "must lie in [2," + std::to_string(kMaxDim) + "], got " + std::to_string(s.dim));
  v.require(s.p >= 0 && s.p <= 1, "p", "must lie in [0,1], got " + fmt(s.p));
  v.require(s.box >= 2, "box", "must be at least 2, got " + std::to_string(s.box));
  v.require(s.margin >= 0, "margin", "must be nonnegative");
  v.require(s.samples >= 1, "samples", "must be positive");
}

SamplerParams sampler_params(const SamplerOpts& s, int threads) {
  SamplerParams prm;
  prm.dim = s.dim;
  prm.p = s.p;
  prm.t = parse_direction(s.t, s.dim, "t");
  prm.box = Box::centered(s.dim, s.box / 2);
  prm.margin = s.margin;
  prm.samples = s.samples;
  prm.seed = s.seed;
  prm.first_stream = s.first_stream;
  prm.threads = threads;
  return prm;
}

json sampler_spec(const SamplerOpts& s, const Direction& t) {
  return {{"dim", s.dim},       {"p", s.p},         {"t", t.str()},   {"box", s.box},
          {"margin", s.margin}, {"samples", s.samples}, {"seed", s.seed}, {"first_stream", s.first_stream}};
}

void emit(const Common& c, const Manifest& m, json body, const Csv* table = nullptr, int xcol = 1, int ycol = 2,
          bool log_y = true) {
  body["manifest"] = m.finish();
  if (table && !c.csv.empty()) {
    table->write(c.csv);
    if (!c.plot.empty()) write_gnuplot(c.plot, c.csv, xcol, ycol, "percoz " + m.subcommand(), log_y);
  }
  write_json(c.out, body);
}

// ---------------------------------------------------------------- sample

struct SampleCmd {
  Common c;
  SamplerOpts s;
  std::string dump;

  SampleCmd() { s.samples = 10; }

  void setup(CLI::App* sub) {
    add_sampler(sub, s);
    sub->add_option("--dump", dump, "Directory for binary configurations (sample_<stream>.pczb)");
    add_common(sub, c);
  }

  int run() {
    Validator v;
    validate_sampler(s, v);
    const int threads = thread_count(c, v);
    v.check();
    const auto prm = sampler_params(s, threads);
    json spec = sampler_spec(s, prm.t);
    spec["dump"] = dump;
    Manifest m("sample", spec, threads);
    if (!dump.empty()) std::filesystem::create_directories(dump);
    json recs = json::array();
    Csv table{{"stream", "open_edges", "origin_cluster_size", "touches_shell", "external_boundary"}, {}};
    const Point o(s.dim);
    for (std::uint64_t i = 0; i < s.samples; ++i) {
      const std::uint64_t stream = s.first_stream + i;
      const BondConfig cfg = sample_config(prm.box, s.p, s.seed, stream);
      const ClusterData comp = component(cfg, o);
      json r{{"stream", stream},
             {"open_edges", cfg.open_count()},
             {"origin_cluster_size", comp.vertices.size()},
             {"touches_shell", comp.touches_box_boundary}};
      long boundary = -1;
      if (!comp.touches_box_boundary) boundary = static_cast<long>(fill(comp, prm.box).external_boundary.size());
      r["external_boundary"] = boundary >= 0 ? json(boundary) : json(nullptr);
      recs.push_back(r);
      table.add({std::to_string(stream), std::to_string(cfg.open_count()), std::to_string(comp.vertices.size()),
                 comp.touches_box_boundary ? "1" : "0", std::to_string(boundary)});
      if (!dump.empty()) {
        const auto bytes = cfg.serialize();
        std::ofstream f(std::filesystem::path(dump) / ("sample_" + std::to_string(stream) + ".pczb"), std::ios::binary);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      }
    }
    emit(c, m, {{"samples", recs}}, &table, 1, 3, false);
    return kOk;
  }
};

// ---------------------------------------------------------------- estimate

struct EstimateCmd {
  Common c;
  SamplerOpts s;
  std::string displacements = "1,0,0";
  std::string kinds = "two-point,h,f,g,h_bar,f_bar,h_tilde,f_tilde";

  void setup(CLI::App* sub) {
    add_sampler(sub, s);
    sub->add_option("--displacements", displacements, "File, or inline list 'a,b,c;d,e,f'")->capture_default_str();
    sub->add_option("--kinds", kinds, "Comma-separated kernel kinds")->capture_default_str();
    add_common(sub, c);
  }

  int run() {
    Validator v;
    validate_sampler(s, v);
    const int threads = thread_count(c, v);
    unsigned mask = 0;
    std::vector<std::string> kind_list;
    for (const auto& k : parse_string_list(kinds)) {
      try {
        mask |= event_kind_bit(k);
        kind_list.push_back(k);
      } catch (const DomainError&) {
        v.fail("kinds", "unknown kind '" + k + "'");
      }
    }
    v.check();
    auto prm = sampler_params(s, threads);
    prm.kinds = mask;
    const auto xs = parse_points(displacements, s.dim, "displacements");
    json spec = sampler_spec(s, prm.t);
    json xj = json::array();
    for (const auto& x : xs) xj.push_back(point_json(x));
    spec["displacements"] = xj;
    spec["kinds"] = kind_list;
    Manifest m("estimate", spec, threads);
    const auto est = estimate_kernels(prm, xs);

    json recs = json::array();
    Csv table{{"kind", "x", "value", "std_error", "n", "hits"}, {}};
    json kernels = json::object();
    for (const auto& name : event_kind_names()) {
      if (!est.results.count(name)) continue;
      for (const auto& x : xs) {
        const auto& r = est.results.at(name).at(x);
        recs.push_back({{"kind", name}, {"x", point_json(x)}, {"value", r.value}, {"std_error", r.std_error},
                        {"n", r.n_samples}, {"hits", r.hits}});
        table.add({name, point_str(x), fmt(r.value), fmt(r.std_error), std::to_string(r.n_samples), std::to_string(r.hits)});
      }
      kernels[name] = est.kernels.at(name).to_json();
    }
    json body{{"records", recs}, {"kernels", kernels}, {"implication_violations", est.implication_violations}};
    emit(c, m, body, &table, 2, 3);
    return est.implication_violations ? kDefect : kOk;
  }

  static std::vector<std::string> parse_string_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text + ",") {
      if (ch == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else if (ch != ' ') {
        cur += ch;
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------- exact

struct ExactCmd {
  Common c;
  int dim = 3;
  std::string box = "2,2,2";
  std::string lo;
  std::string event = "connect";
  std::string x = "1,1,1";
  std::string ps = "0.5";
  std::string t;
  int margin = 1;
  std::uint64_t verify = 0;
  double sigma = 4;
  std::uint64_t seed = 1;
  bool witness = false;
  bool lower_bound = false;

  void setup(CLI::App* sub) {
    sub->add_option("--dim", dim)->capture_default_str();
    sub->add_option("--box", box, "Vertex extents of the box")->capture_default_str();
    sub->add_option("--lo", lo, "Lowest corner (default the origin)");
    sub->add_option("--event", event, "One of connect, finite-two-point, h, f, g, h_bar, f_bar, h_tilde, f_tilde, edge-open, tautology")
        ->capture_default_str();
    sub->add_option("--x", x, "Target site")->capture_default_str();
    sub->add_option("--p", ps, "Comma-separated bond densities")->capture_default_str();
    sub->add_option("--t", t, "Direction for the kernel events");
    sub->add_option("--margin", margin)->capture_default_str();
    sub->add_option("--verify", verify, "Monte Carlo samples to check against the exact value (0: skip)")->capture_default_str();
    sub->add_option("--sigma", sigma, "Tolerance in standard errors for --verify")->capture_default_str();
    sub->add_option("--seed", seed)->capture_default_str();
    sub->add_flag("--witness", witness, "Search for a non-monotonicity witness");
    sub->add_flag("--lower-bound", lower_bound, "Compare with p^psi (1-p)^phi exactly");
    add_common(sub, c, false);
  }

  int run() {
    Validator v;
    v.require(dim >= 2 && dim <= kMaxDim, "dim", "must lie in [2," + std::to_string(kMaxDim) + "]");
    const auto& names = named_event_list();
    v.require(std::find(names.begin(), names.end(), event) != names.end(), "event", "unknown event '" + event + "'");
    v.require(sigma > 0, "sigma", "must be positive");
    v.check();
    const Point ext = parse_point(box, dim, "box");
    const Point low = lo.empty() ? Point(dim) : parse_point(lo, dim, "lo");
    const Point target = parse_point(x, dim, "x");
    const auto plist = parse_double_list(ps, "p");
    for (double p : plist) v.require(p >= 0 && p <= 1, "p", "must lie in [0,1], got " + fmt(p));
    Point hi(dim);
    for (int i = 0; i < dim; ++i) {
      v.require(ext[i] >= 1, "box", "extents must be positive");
      hi[i] = low[i] + ext[i] - 1;
    }
    v.check();
    const Box b(low, hi);
    const Direction dir = parse_direction(t, dim, "t");
    const NamedEvent ev = named_event(event, b, target, dir, margin);
    if (static_cast<int>(ev.edges.size()) > kMaxExactEdges)
      throw UsageError({"box: event depends on " + std::to_string(ev.edges.size()) + " edges, budget is " +
                        std::to_string(kMaxExactEdges)});
    json spec{{"dim", dim}, {"box", box},   {"lo", point_json(low)}, {"event", event}, {"x", point_json(target)},
              {"p", plist}, {"t", dir.str()}, {"margin", margin},   {"verify", verify}, {"sigma", sigma},
              {"seed", seed}, {"witness", witness}, {"lower_bound", lower_bound}};
    Manifest m("exact", spec, 1);
    const ExactResult r = enumerate_event(b, ev.edges, ev.predicate, event);
    json body = r.to_json(plist);
    int code = kOk;
    if (verify > 0) {
      json vs = json::array();
      for (double p : plist) {
        const auto vr = verify_estimator(r, ev.predicate, p, verify, seed, sigma);
        vs.push_back({{"p", p}, {"exact", vr.exact}, {"estimate", vr.estimate}, {"std_error", vr.std_error},
                      {"z", std::isfinite(vr.z) ? json(vr.z) : json(nullptr)}, {"pass", vr.pass}});
        if (!vr.pass) code = kDefect;
      }
      body["verify"] = vs;
    }
    if (witness) {
      const auto w = find_non_monotonicity(b, ev.edges, ev.predicate);
      auto pair_json = [](const std::optional<MonotonicityPair>& pr) -> json {
        if (!pr) return nullptr;
        json open = json::array();
        for (const auto& e : pr->lower_open) open.push_back({{"base", point_json(e.base)}, {"axis", e.axis}});
        return {{"lower_open_edges", open},
                {"flipped", {{"base", point_json(pr->flipped.base)}, {"axis", pr->flipped.axis}}},
                {"lower_value", pr->lower_value},
                {"upper_value", pr->upper_value}};
      };
      body["non_monotonicity"] = {{"witnessed", w.witnessed()}, {"opening_destroys", pair_json(w.destroys)},
                                  {"opening_creates", pair_json(w.creates)}};
    }
    if (lower_bound) {
      const auto comb = phi_exact(target, static_cast<int>(target.norm1()) + 2);
      const bool ok = dominates_bound(r.poly, comb.psi, comb.phi, plist);
      body["lower_bound"] = {{"phi", comb.phi}, {"psi", comb.psi}, {"certified", comb.certified}, {"holds", ok}};
      if (!ok) code = kDefect;
    }
    emit(c, m, body);
    return code;
  }
};

// ---------------------------------------------------------------- oracle

struct OracleCmd {
  Common c;
  std::string quantity = "phi";
  int dim = 3;
  std::string x = "1,0,0";
  int max_volume = 0;
  std::uint64_t budget = kDefaultAnimalBudget;
  int radius = 2;
  int slack = 1;

  void setup(CLI::App* sub) {
    sub->add_option("quantity", quantity, "phi, subadditivity or surface-counts")->capture_default_str();
    sub->add_option("--dim", dim)->capture_default_str();
    sub->add_option("--x", x, "Target site")->capture_default_str();
    sub->add_option("--max-volume", max_volume, "Animal volume cap (default |x|+2)");
    sub->add_option("--budget", budget, "Animal visit budget")->capture_default_str();
    sub->add_option("--radius", radius, "L1 radius for subadditivity, volume for surface-counts")->capture_default_str();
    sub->add_option("--slack", slack, "Volume slack over |x|+1 in the subadditivity table")->capture_default_str();
    add_common(sub, c, false);
  }

  int run() {
    Validator v;
    v.require(dim >= 2 && dim <= kMaxDim, "dim", "must lie in [2," + std::to_string(kMaxDim) + "]");
    v.require(quantity == "phi" || quantity == "subadditivity" || quantity == "surface-counts", "quantity",
              "must be phi, subadditivity or surface-counts");
    v.require(radius >= 0, "radius", "must be nonnegative");
    v.require(max_volume >= 0, "max-volume", "must be nonnegative");
    v.check();
    json spec{{"quantity", quantity}, {"dim", dim}};
    int code = kOk;
    json body;
    if (quantity == "phi") {
      const Point target = parse_point(x, dim, "x");
      const int vol = max_volume > 0 ? max_volume : static_cast<int>(target.norm1()) + 2;
      spec["x"] = point_json(target);
      spec["max_volume"] = vol;
      spec["budget"] = budget;
      Manifest m("oracle", spec, 1);
      const auto r = phi_exact(target, vol, budget);
      const long stair = staircase_boundary(dim, target.norm1());
      body = {{"x", point_json(target)},
              {"phi", r.phi},
              {"psi", r.psi},
              {"upsilon", r.upsilon},
              {"certified", r.certified},
              {"volumes_scanned", r.volumes_scanned},
              {"animals_visited", r.animals_visited},
              {"achieved_at_volume", r.achieved_at_volume},
              {"min_by_volume", r.min_by_volume},
              {"staircase_bound", stair}};
      if (r.phi > stair || r.psi < target.norm1()) code = kDefect;
      emit(c, m, body);
      return code;
    }
    if (quantity == "subadditivity") {
      spec["radius"] = radius;
      spec["slack"] = slack;
      Manifest m("oracle", spec, 1);
      const auto pts = l1_ball(dim, radius);
      PhiTable table(slack, budget);
      const auto rep = subadditivity_table(pts, table);
      json viol = json::array();
      for (const auto& w : rep.violations)
        viol.push_back({{"x", point_json(w.x)}, {"y", point_json(w.y)}, {"phi_x", w.phi_x}, {"phi_y", w.phi_y},
                        {"phi_x_minus_y", w.phi_x_minus_y}});
      body = {{"pairs_checked", rep.pairs_checked}, {"violations", viol}, {"all_certified", rep.all_certified}};
      emit(c, m, body);
      return rep.violations.empty() ? kOk : kDefect;
    }
    spec["max_volume"] = radius;
    Manifest m("oracle", spec, 1);
    json counts = json::object();
    for (const auto& [k, n] : surface_counts(dim, radius)) counts[std::to_string(k)] = n;
    emit(c, m, {{"surface_counts", counts}});
    return kOk;
  }
};

// ---------------------------------------------------------------- renewal-check

struct RenewalCheckCmd {
  Common c;
  std::string f;
  std::string h;
  int window = 20;
  std::string t;
  int terms = 60;
  double sigma = 3;
  std::string h_out;

  void setup(CLI::App* sub) {
    sub->add_option("--f", f, "Kernel JSON (or estimate output holding kernels.f)");
    sub->add_option("--h-empirical", h, "Empirical h to test against f*h (kernel JSON or estimate output)");
    sub->add_option("--window", window, "Half-width W of the window [-W,W]^d")->capture_default_str();
    sub->add_option("--t", t, "Direction ordering the solve (default first axis)");
    sub->add_option("--terms", terms, "Series terms for the brute-force comparison")->capture_default_str();
    sub->add_option("--sigma", sigma, "Tolerance for the empirical comparison")->capture_default_str();
    sub->add_option("--h-out", h_out, "Write the solved h kernel here");
    add_common(sub, c);
  }

  int run() {
    Validator v;
    v.require(!f.empty(), "f", "required");
    v.require(window >= 1, "window", "must be positive");
    v.require(terms >= 1, "terms", "must be positive");
    v.require(sigma > 0, "sigma", "must be positive");
    v.check();
    const Kernel fk = load_kernel(f, "f", "f");
    const Direction dir = parse_direction(t, fk.dim, "t");
    json spec{{"f", fk.to_json()}, {"window", window}, {"t", dir.str()}, {"terms", terms}, {"sigma", sigma}};
    std::optional<Kernel> hk;
    if (!h.empty()) {
      hk = load_kernel(h, "h-empirical", "h");
      spec["h"] = hk->to_json();
    }
    Manifest m("renewal-check", spec, 1);
    const Box w = Box::centered(fk.dim, window);
    const auto hd = renewal_solve_dense(fk, w, dir);
    const double residual = renewal_residual(hd, fk);
    const auto series = renewal_series(fk, w, terms);
    double diff = 0;
    for (std::size_t i = 0; i < hd.v.size(); ++i) diff = std::max(diff, std::fabs(hd.v[i] - series.h.v[i]));
    const Kernel solved = hd.to_sparse("h");
    const auto gap = mass_gap_check(fk, solved);
    json defects = json::array();
    for (const auto& x : gap.defects) defects.push_back(point_json(x));
    json body{{"mass", fk.total_mass()},
              {"truncation_radius", fk.max_norm1()},
              {"residual", residual},
              {"series_max_difference", diff},
              {"series_tail_bound", series.tail_bound},
              {"series_within_tail_bound", diff <= series.tail_bound + 1e-15},
              {"mass_gap", {{"points", gap.points}, {"max_ratio", gap.max_ratio}, {"defects", defects},
                            {"rate", gap.rate}, {"rate_error", std::isfinite(gap.rate_error) ? json(gap.rate_error) : json(nullptr)},
                            {"bounded_away", gap.bounded_away}}}};
    int code = (residual < 1e-12 && diff <= series.tail_bound + 1e-15) ? kOk : kDefect;
    Csv table{{"x", "f", "h_solved", "h_empirical", "f_conv_h", "z"}, {}};
    if (hk) {
      json recs = json::array();
      json super = json::array();
      const Point o(fk.dim);
      for (const auto& [x, e] : hk->entries) {
        if (x == o) continue;
        double conv = 0, var = 0;
        for (const auto& [z, fe] : fk.entries) {
          const Point y = x - z;
          const double hv = hk->value(y), he = hk->error(y);
          conv += fe.value * hv;
          var += hv * hv * fe.std_error * fe.std_error + fe.value * fe.value * he * he;
        }
        const double sd = std::sqrt(var + e.std_error * e.std_error);
        const double z = sd > 0 ? (e.value - conv) / sd : (e.value == conv ? 0.0 : std::numeric_limits<double>::infinity());
        const bool ok = std::fabs(z) <= sigma;
        if (!ok) code = kDefect;
        recs.push_back({{"x", point_json(x)}, {"h", e.value}, {"h_error", e.std_error}, {"f_conv_h", conv},
                        {"f_conv_h_error", std::sqrt(var)}, {"z", std::isfinite(z) ? json(z) : json(nullptr)}, {"pass", ok}});
        table.add({point_str(x), fmt(fk.value(x)), fmt(hd.at(x)), fmt(e.value), fmt(conv), fmt(z)});
      }
      for (const auto& [a, ea] : hk->entries)
        for (const auto& [b, eb] : hk->entries) {
          if (a == o || b == o || b < a) continue;
          const Point s = a + b;
          if (!hk->entries.count(s)) continue;
          const double prod = ea.value * eb.value, hs = hk->value(s);
          const double sd = std::sqrt(eb.value * eb.value * ea.std_error * ea.std_error +
                                      ea.value * ea.value * eb.std_error * eb.std_error + hk->error(s) * hk->error(s));
          const double z = sd > 0 ? (prod - hs) / sd : (prod <= hs ? 0.0 : std::numeric_limits<double>::infinity());
          const bool ok = z <= sigma;
          if (!ok) code = kDefect;
          super.push_back({{"x", point_json(a)}, {"y", point_json(b)}, {"h_x_h_y", prod}, {"h_x_plus_y", hs},
                           {"z", std::isfinite(z) ? json(z) : json(nullptr)}, {"pass", ok}});
        }
      body["renewal_identity"] = recs;
      body["supermultiplicativity"] = super;
    } else {
      for (const auto& [x, e] : fk.entries) table.add({point_str(x), fmt(e.value), fmt(hd.at(x)), "", "", ""});
    }
    if (!h_out.empty()) write_json(h_out, solved.to_json());
    emit(c, m, body, &table, 1, 3);
    return code;
  }
};

// ---------------------------------------------------------------- synthetic-oz

std::optional<Point> short_parallel(const Eigen::VectorXd& mu) {
  const int d = static_cast<int>(mu.size());
  std::optional<Point> best;
  const int R = 4;
  std::vector<int> cur(static_cast<std::size_t>(d), -R);
  while (true) {
    Point p = Point::from(cur);
    if (!p.is_zero()) {
      const Eigen::VectorXd v = to_eigen(p);
      if ((v.normalized() - mu.normalized()).norm() < 1e-9 && (!best || p.norm1() < best->norm1())) best = p;
    }
    int k = 0;
    while (k < d && ++cur[static_cast<std::size_t>(k)] > R) cur[static_cast<std::size_t>(k++)] = -R;
    if (k == d) break;
  }
  return best;
}

struct SyntheticOzCmd {
  Common c;
  std::string spec_path;
  std::string n_list = "20,40,80";
  std::string n_range = "20:120";
  std::string lattice_direction;
  std::string t;
  int window = 0;
  double phi_tol = 0.05;

  void setup(CLI::App* sub) {
    sub->add_option("--spec", spec_path, "Model JSON: {model, dim, parameters, direction?} or {kernel: ...}");
    sub->add_option("--n-list", n_list, "n at which to print exact h against the OZ form")->capture_default_str();
    sub->add_option("--n-range", n_range, "Range a:b[:step] used by the OZ fit")->capture_default_str();
    sub->add_option("--lattice-direction", lattice_direction, "Integer vector v parallel to mu; x_n = n v");
    sub->add_option("--t", t, "Direction ordering the solve (default first axis)");
    sub->add_option("--window", window, "Transverse half-width of the window (default max n)");
    sub->add_option("--phi-tol", phi_tol, "Relative tolerance on the fitted prefactor")->capture_default_str();
    add_common(sub, c);
  }

  int run() {
    Validator v;
    v.require(!spec_path.empty(), "spec", "required");
    v.require(window >= 0, "window", "must be nonnegative");
    v.require(phi_tol > 0, "phi-tol", "must be positive");
    v.check();
    const json model_spec = read_json_file(spec_path, "spec");
    Kernel f;
    try {
      f = synthetic::from_spec(model_spec);
    } catch (const std::exception& e) {
      throw UsageError({std::string("spec: ") + e.what()});
    }
    const int d = f.dim;
    const Eigen::VectorXd ray = model_spec.contains("direction")
                                    ? parse_real_vector(model_spec["direction"].is_string() ? model_spec["direction"].get<std::string>()
                                                                                            : model_spec["direction"].dump(),
                                                        d, "spec.direction")
                                    : Eigen::VectorXd::Unit(d, 0);
    const auto fit_ns = parse_int_list(n_range, "n-range");
    const auto show_ns = parse_int_list(n_list, "n-list");
    for (int n : fit_ns) v.require(n >= 1, "n-range", "entries must be positive");
    for (int n : show_ns) v.require(n >= 1, "n-list", "entries must be positive");
    v.require(fit_ns.size() >= 4, "n-range", "needs at least 4 values");
    v.check();
    const Direction dir = parse_direction(t, d, "t");
    const RenewalModel model = build_model(f, ray);
    Point step_vec(d);
    if (!lattice_direction.empty()) {
      step_vec = parse_point(lattice_direction, d, "lattice-direction");
      if ((to_eigen(step_vec).normalized() - model.mu.normalized()).norm() > 1e-9)
        throw UsageError({"lattice-direction: not parallel to mu = " + vec_json(model.mu).dump()});
    } else {
      const auto sp = short_parallel(model.mu);
      if (!sp) throw UsageError({"lattice-direction: mu = " + vec_json(model.mu).dump() + " is not parallel to a short lattice vector; pass one"});
      step_vec = *sp;
    }
    const int nmax = std::max(*std::max_element(fit_ns.begin(), fit_ns.end()), *std::max_element(show_ns.begin(), show_ns.end()));
    const int W = window > 0 ? window : nmax;
    Point lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      const int a = std::min(0, nmax * step_vec[i]), b = std::max(0, nmax * step_vec[i]);
      const bool axis_of_t = dir.exact() && dir.integer_vector() == Point::unit(d, i);
      lo[i] = axis_of_t ? a : a - W;
      hi[i] = axis_of_t ? b : b + W;
    }
    json spec{{"model", model_spec}, {"n_list", show_ns}, {"n_range", n_range}, {"lattice_direction", point_json(step_vec)},
              {"t", dir.str()}, {"window", W}, {"phi_tol", phi_tol}};
    Manifest m("synthetic-oz", spec, 1);
    const auto h = renewal_solve_dense(f, Box(lo, hi), dir);

    DecaySeries series;
    series.direction = to_eigen(step_vec).normalized();
    series.step = to_eigen(step_vec).norm();
    series.source = SeriesSource::renewal_solve;
    for (int n : fit_ns) series.samples.push_back({n, h.at(step_vec * n), 0.0});
    const OzFit fit = oz_fit(series, d);
    const double rel = fit.phi / model.phi_prefactor - 1;

    json table_j = json::array();
    Csv table{{"n", "x", "h_exact", "oz_form", "ratio"}, {}};
    for (int n : show_ns) {
      const Point x = step_vec * n;
      const double ex = h.at(x), oz = oz_predict_at(model, x);
      table_j.push_back({{"n", n}, {"x", point_json(x)}, {"h", ex}, {"oz", oz}, {"ratio", ex > 0 ? json(oz / ex) : json(nullptr)}});
      table.add({std::to_string(n), point_str(x), fmt(ex), fmt(oz), fmt(ex > 0 ? oz / ex : 0.0)});
    }
    json body{{"closed_form",
               {{"s_star", vec_json(model.s_star)},
                {"mu", vec_json(model.mu)},
                {"cov", mat_json(model.cov)},
                {"Phi", model.phi_prefactor},
                {"tau_per_step", model.s_star.dot(to_eigen(step_vec))}}},
              {"fit",
               {{"tau", fit.tau},
                {"tau_error", fit.tau_error},
                {"Phi", fit.phi},
                {"Phi_error", fit.phi_error},
                {"Phi_relative_error", rel},
                {"residuals", fit.residuals},
                {"early_rms", fit.early_rms},
                {"late_rms", fit.late_rms},
                {"residuals_shrink", fit.residuals_shrink},
                {"kappa", fit.kappa},
                {"kappa_error", fit.kappa_error},
                {"model_mismatch", fit.model_mismatch},
                {"naive_tau", fit.naive_tau},
                {"naive_disagrees", fit.naive_disagrees}}},
              {"table", table_j},
              {"series", series.to_json()}};
    emit(c, m, body, &table, 1, 3);
    return (std::fabs(rel) <= phi_tol && fit.residuals_shrink) ? kOk : kDefect;
  }
};

// ---------------------------------------------------------------- oz-fit

struct OzFitCmd {
  Common c;
  std::string series_path;
  int dim = 3;

  void setup(CLI::App* sub) {
    sub->add_option("--series", series_path, "DecaySeries JSON");
    sub->add_option("--dim", dim)->capture_default_str();
    add_common(sub, c);
  }

  int run() {
    Validator v;
    v.require(!series_path.empty(), "series", "required");
    v.require(dim >= 2 && dim <= kMaxDim, "dim", "must lie in [2," + std::to_string(kMaxDim) + "]");
    v.check();
    const json sj = read_json_file(series_path, "series");
    DecaySeries s;
    try {
      s = DecaySeries::from_json(sj.contains("series") ? sj["series"] : sj);
    } catch (const std::exception& e) {
      throw UsageError({std::string("series: ") + e.what()});
    }
    Manifest m("oz-fit", {{"series", s.to_json()}, {"dim", dim}}, 1);
    const OzFit fit = oz_fit(s, dim);
    const TauFit naive = tau_fit(s);
    Csv table{{"n", "value", "residual"}, {}};
    std::size_t k = 0;
    for (const auto& p : s.samples)
      if (p.value > 0) table.add({std::to_string(p.n), fmt(p.value), fmt(fit.residuals[k++])});
    json body{{"tau", fit.tau},
              {"tau_error", fit.tau_error},
              {"Phi", fit.phi},
              {"Phi_error", fit.phi_error},
              {"residuals", fit.residuals},
              {"early_rms", fit.early_rms},
              {"late_rms", fit.late_rms},
              {"residuals_shrink", fit.residuals_shrink},
              {"kappa", fit.kappa},
              {"kappa_error", fit.kappa_error},
              {"model_mismatch", fit.model_mismatch},
              {"naive", {{"tau", naive.tau}, {"tau_error", naive.tau_error}, {"disagrees", fit.naive_disagrees}}},
              {"used", fit.used},
              {"warnings", fit.warnings}};
    emit(c, m, body, &table, 1, 3, false);
    return fit.model_mismatch ? kDefect : kOk;
  }
};

// ---------------------------------------------------------------- surface

struct SurfaceCmd {
  Common c;
  std::string tau_path;
  std::string kernel_path;
  int rays = 41;
  std::string around;
  double spread = 0.6;
  std::string checks = "convexity,curvature";
  std::string direction;
  double curv_radius = 0.5;
  std::string phi_bar;
  std::string x;

  void setup(CLI::App* sub) {
    sub->add_option("--tau", tau_path, "TauSurface JSON {directions, tau, tau_error}");
    sub->add_option("--kernel", kernel_path, "Synthetic kernel or model JSON; the surface is traced by tilt rays");
    sub->add_option("--rays", rays, "Number of tilt rays")->capture_default_str();
    sub->add_option("--around", around, "Centre of the ray fan (default first axis)");
    sub->add_option("--spread", spread, "Angular radius of the ray fan")->capture_default_str();
    sub->add_option("--check", checks, "Comma list of convexity, curvature, duals")->capture_default_str();
    sub->add_option("--direction", direction, "Direction for the curvature fit (default first axis)");
    sub->add_option("--curv-radius", curv_radius, "Angular radius of the curvature neighbourhood")->capture_default_str();
    sub->add_option("--phi-bar", phi_bar, "Table [{direction, value}] for the duals check");
    sub->add_option("--x", x, "Direction for the duals check");
    add_common(sub, c);
  }

  int run() {
    Validator v;
    v.require(tau_path.empty() != kernel_path.empty(), "tau", "give exactly one of --tau and --kernel");
    v.require(rays >= 3, "rays", "must be at least 3");
    v.require(spread > 0 && spread < 1.5, "spread", "must lie in (0, 1.5)");
    v.require(curv_radius > 0, "curv-radius", "must be positive");
    const auto wanted = EstimateCmd::parse_string_list(checks);
    for (const auto& w : wanted)
      v.require(w == "convexity" || w == "curvature" || w == "duals", "check", "unknown check '" + w + "'");
    const bool want_duals = std::find(wanted.begin(), wanted.end(), "duals") != wanted.end();
    v.require(!want_duals || (!phi_bar.empty() && !x.empty()), "phi-bar", "the duals check needs --phi-bar and --x");
    v.check();

    TauSurface surf;
    TauEvaluator eval;
    Kernel f;
    json spec{{"check", wanted}, {"curv_radius", curv_radius}};
    if (!tau_path.empty()) {
      try {
        surf = TauSurface::from_json(read_json_file(tau_path, "tau"));
      } catch (const DomainError& e) {
        throw UsageError({std::string("tau: ") + e.what()});
      } catch (const json::exception& e) {
        throw UsageError({std::string("tau: ") + e.what()});
      }
      spec["tau"] = surf.to_json();
    } else {
      f = load_kernel(kernel_path, "kernel", "f");
      const Eigen::VectorXd centre = around.empty() ? Eigen::VectorXd::Unit(f.dim, 0) : parse_real_vector(around, f.dim, "around");
      surf = trace_tilt_surface(f, refine_directions(centre, rays, spread));
      eval = [&f](const Eigen::VectorXd& u) { return tau_synthetic(f, u).tau; };
      spec["kernel"] = f.to_json();
      spec["rays"] = rays;
      spec["around"] = vec_json(centre);
      spec["spread"] = spread;
    }
    const int d = surf.dim();
    const Eigen::VectorXd dir = direction.empty() ? Eigen::VectorXd::Unit(d, 0) : parse_real_vector(direction, d, "direction");
    spec["direction"] = vec_json(dir);
    Manifest m("surface", spec, 1);
    surf.validate();
    const auto pts = equidecay_surface(surf);
    Csv table{{"direction", "tau", "tau_error", "point"}, {}};
    json pj = json::array();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      pj.push_back(vec_json(pts[i]));
      std::string ds, ps;
      for (Eigen::Index k = 0; k < d; ++k) {
        ds += (k ? " " : "") + fmt(surf.directions[i][k]);
        ps += (k ? " " : "") + fmt(pts[i][k]);
      }
      table.add({ds, fmt(surf.tau[i]), fmt(surf.tau_error[i]), ps});
    }
    json body{{"surface_points", pj}};
    int code = kOk;
    for (const auto& w : wanted) {
      if (w == "convexity") {
        const auto rep = convexity_check(surf, eval);
        auto pairs = [](const std::vector<ConvexityPair>& v) {
          json a = json::array();
          for (const auto& p : v) a.push_back({{"i", p.i}, {"j", p.j}, {"lhs", p.lhs}, {"rhs", p.rhs}, {"sigma", p.sigma}});
          return a;
        };
        body["convexity"] = {{"checked", rep.checked}, {"defects", pairs(rep.defects)}, {"equalities", pairs(rep.equalities)},
                             {"min_margin", rep.min_margin}};
        if (!rep.defects.empty()) code = kDefect;
      } else if (w == "curvature") {
        try {
          const auto cr = curvature_check(pts, dir, curv_radius);
          body["curvature"] = {{"curvatures", cr.curvatures}, {"std_errors", cr.std_errors}, {"gaussian", cr.gaussian},
                               {"positive", cr.positive}, {"points_used", cr.points_used},
                               {"base_point", vec_json(cr.base_point)}, {"normal", vec_json(cr.normal)}};
          if (!cr.positive) code = kDefect;
        } catch (const DomainError& e) {
          body["curvature"] = {{"error", e.what()}};
          code = kDefect;
        }
      } else {
        const json tj = read_json_file(phi_bar, "phi-bar");
        std::vector<PhiBarEntry> table_e;
        for (const auto& e : tj.is_array() ? tj : tj.at("entries")) {
          const auto vals = e.at("direction").get<std::vector<double>>();
          Eigen::VectorXd dv = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
          table_e.push_back({dv.normalized(), e.at("value").get<double>()});
        }
        const auto dd = dual_directions(parse_real_vector(x, d, "x"), table_e);
        json dj = json::array();
        for (const auto& s : dd.duals) dj.push_back(vec_json(s));
        body["duals"] = {{"duals", dj},
                         {"representative", dd.duals.empty() ? json(nullptr) : vec_json(dd.representative)},
                         {"warnings", dd.warnings}};
      }
    }
    emit(c, m, body, &table, 2, 3, false);
    return code;
  }
};

// ---------------------------------------------------------------- surface-tail

struct SurfaceTailCmd {
  Common c;
  SamplerOpts s;
  std::string x = "1,0,0";
  double delta = 0.5;
  long phi = -1;

  SurfaceTailCmd() { s.samples = 10000; }

  void setup(CLI::App* sub) {
    add_sampler(sub, s);
    sub->add_option("--x", x, "Target site")->capture_default_str();
    sub->add_option("--delta", delta, "Relative excess of the boundary over phi(x)")->capture_default_str();
    sub->add_option("--phi", phi, "phi(x) (default: exact enumeration)");
    add_common(sub, c, false);
  }

  int run() {
    Validator v;
    validate_sampler(s, v);
    v.require(delta >= 0, "delta", "must be nonnegative");
    const int threads = thread_count(c, v);
    v.check();
    const auto prm = sampler_params(s, threads);
    const Point target = parse_point(x, s.dim, "x");
    bool certified = true;
    long ph = phi;
    if (ph < 0) {
      const auto r = phi_exact(target, static_cast<int>(target.norm1()) + 2);
      ph = r.phi;
      certified = r.certified;
    }
    json spec = sampler_spec(s, prm.t);
    spec["x"] = point_json(target);
    spec["delta"] = delta;
    spec["phi"] = ph;
    Manifest m("surface-tail", spec, threads);
    const auto r = surface_tail(target, delta, ph, prm);
    json body{{"phi", ph},
              {"phi_certified", certified},
              {"threshold", r.threshold},
              {"conditioning_hits", r.conditioning_hits},
              {"insufficient_statistics", r.estimate.insufficient},
              {"value", r.estimate.insufficient ? json(nullptr) : json(r.estimate.value)},
              {"std_error", r.estimate.insufficient ? json(nullptr) : json(r.estimate.std_error)},
              {"hits", r.estimate.hits}};
    emit(c, m, body);
    return kOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"percoz: Ornstein-Zernike percolation lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PERCOZ_VERSION);

  SampleCmd sample;
  EstimateCmd estimate;
  ExactCmd exact;
  OracleCmd oracle;
  RenewalCheckCmd renewal;
  SyntheticOzCmd synth;
  OzFitCmd ozfit;
  SurfaceCmd surface;
  SurfaceTailCmd tail;

  struct Entry {
    CLI::App* sub;
    std::function<int()> run;
    std::string* config;
  };
  std::vector<Entry> entries;
  auto reg = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.setup(sub);
    entries.push_back({sub, [&cmd] { return cmd.run(); }, &cmd.c.config});
  };
  reg("sample", "Sample configurations and summarize the origin cluster", sample);
  reg("estimate", "Monte Carlo kernel estimates (two-point, h, f, g, ...)", estimate);
  reg("exact", "Exact event polynomials by exhaustive enumeration", exact);
  reg("oracle", "Lattice-animal oracle for phi, psi, upsilon", oracle);
  reg("renewal-check", "Renewal solve, residual and series checks for a kernel", renewal);
  reg("synthetic-oz", "OZ reproduction on a synthetic renewal model", synth);
  reg("oz-fit", "OZ-form fit of a decay series", ozfit);
  reg("surface", "Equi-decay surface, convexity and curvature checks", surface);
  reg("surface-tail", "Tail of the external boundary given a finite connection", tail);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  for (auto& e : entries) {
    if (!e.sub->parsed()) continue;
    try {
      if (!e.config->empty()) {
        apply_config(*e.sub, read_json_file(*e.config, "config"));
      }
      return e.run();
    } catch (const UsageError& u) {
      for (const auto& f : u.fields()) std::cerr << "percoz " << e.sub->get_name() << ": " << f << "\n";
      return kUsage;
    } catch (const CLI::ParseError& pe) {
      std::cerr << "percoz " << e.sub->get_name() << ": config: " << pe.what() << "\n";
      return kUsage;
    } catch (const DomainError& de) {
      std::cerr << "percoz " << e.sub->get_name() << ": " << de.what() << "\n";
      return kUsage;
    } catch (const std::exception& ex) {
      std::cerr << "percoz " << e.sub->get_name() << ": error: " << ex.what() << "\n";
      return kUsage;
    }
  }
  return kUsage;
}
