#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "percoz/kernel.hpp"

namespace percoz {

struct DecaySample {
  int n = 0;
  double value = 0;
  double std_error = 0;
};

enum class SeriesSource { monte_carlo, renewal_solve, exact_enumeration };
std::string to_string(SeriesSource s);
SeriesSource parse_source(const std::string& s);

/// Values v_n along x_n with ||x_n|| ~ n * step.
struct DecaySeries {
  Eigen::VectorXd direction;
  double step = 1.0;
  std::vector<DecaySample> samples;
  SeriesSource source = SeriesSource::renewal_solve;

  /// n strictly increasing; throws otherwise.
  void validate() const;
  nlohmann::json to_json() const;
  static DecaySeries from_json(const nlohmann::json& j);
};

struct TauFit {
  double tau = 0;
  double tau_error = 0;
  double intercept = 0;
  std::size_t used = 0;
  std::size_t dropped = 0;
  std::vector<std::string> warnings;
};

/// Slope of -log v against n, weighted by (v/sigma)^2 when every sample has
/// an error, unweighted otherwise. Needs 4 positive points.
TauFit tau_fit(const DecaySeries& series);

struct OzFit {
  double tau = 0;
  double tau_error = 0;
  double phi = 0;
  double phi_error = 0;
  std::vector<double> residuals;
  double early_rms = 0;  ///< first third of the range
  double late_rms = 0;   ///< last third
  bool residuals_shrink = false;
  /// Free-exponent fit log v = a - kappa log(2 pi n step) - tau n.
  double kappa = 0;
  double kappa_error = 0;
  bool model_mismatch = false;
  /// Naive tau from tau_fit and whether it disagrees beyond joint errors.
  double naive_tau = 0;
  bool naive_disagrees = false;
  std::size_t used = 0;
  std::vector<std::string> warnings;
};

/// log v = log Phi - ((d-1)/2) log(2 pi n step) - tau n.
OzFit oz_fit(const DecaySeries& series, int d);

/// Forward model of oz_fit.
double oz_form(double tau, double phi, int d, int n, double step = 1.0);

struct TauSurface {
  std::vector<Eigen::VectorXd> directions;  ///< unit vectors
  std::vector<double> tau;
  std::vector<double> tau_error;

  int dim() const { return directions.empty() ? 0 : static_cast<int>(directions.front().size()); }
  std::size_t size() const { return directions.size(); }
  void add(const Eigen::VectorXd& direction, double t, double err = 0);
  /// Positive, finite, and max/min <= 100.
  void validate() const;
  nlohmann::json to_json() const;
  static TauSurface from_json(const nlohmann::json& j);
};

/// The 3^d - 1 neighbours of the origin, normalized.
std::vector<Eigen::VectorXd> neighbour_directions(int d);
/// `count` directions within angle `radius` of xhat, on rings in the plane of
/// xhat and each coordinate axis.
std::vector<Eigen::VectorXd> refine_directions(const Eigen::VectorXd& xhat, int count, double radius);

/// x/tau(x) for each direction.
std::vector<Eigen::VectorXd> equidecay_surface(const TauSurface& tau);

using TauEvaluator = std::function<double(const Eigen::VectorXd& unit)>;

struct ConvexityPair {
  std::size_t i = 0, j = 0;
  double lhs = 0;     ///< tau(x + y)
  double rhs = 0;     ///< tau(x) + tau(y)
  double sigma = 0;
};

struct ConvexityReport {
  std::size_t checked = 0;
  std::vector<ConvexityPair> defects;     ///< lhs > rhs + 3 sigma
  std::vector<ConvexityPair> equalities;  ///< |rhs - lhs| within 3 sigma (or 1e-9 relative)
  double min_margin = 0;                  ///< min (rhs - lhs) / rhs over non-equalities
};

/// Subadditivity over direction pairs. tau(x + y) comes from `evaluate` when
/// given, otherwise from a sampled direction equal to (x + y)/|x + y|.
ConvexityReport convexity_check(const TauSurface& tau, const TauEvaluator& evaluate = {});

struct CurvatureResult {
  Eigen::VectorXd base_point;
  Eigen::VectorXd normal;  ///< inward
  std::vector<double> curvatures;
  std::vector<double> std_errors;
  double gaussian = 0;
  bool positive = false;  ///< every curvature exceeds 2 standard errors
  std::size_t points_used = 0;
};

/// Quadratic graph fit over the cloud points within angle `radius` of xhat,
/// in the tangent frame at the point closest in angle to xhat.
CurvatureResult curvature_check(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& xhat,
                                double radius = 0.35);

struct PhiBarEntry {
  Eigen::VectorXd direction;
  double value = 0;
};

struct DualDirections {
  std::vector<Eigen::VectorXd> duals;
  Eigen::VectorXd representative;
  std::vector<std::string> warnings;
};

/// Unit s on the candidate grid whose ray leaves W = {s : <s,y> <= phibar(y)}
/// at a point attaining <s,xhat> = phibar(xhat) within relative tolerance.
/// The representative is the dual closest to xhat.
DualDirections dual_directions(const Eigen::VectorXd& xhat, const std::vector<PhiBarEntry>& table,
                               const std::vector<Eigen::VectorXd>& candidates = {}, double tol = 1e-9);

/// Equi-decay surface of a synthetic kernel traced by tilt rays: each ray
/// direction gives s on {F = 1} and the surface point mu/<s,mu>.
TauSurface trace_tilt_surface(const Kernel& f, const std::vector<Eigen::VectorXd>& rays);

}  // namespace percoz
