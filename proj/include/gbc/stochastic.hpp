#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbc/geometry.hpp"
#include "gbc/models.hpp"

namespace gbc::stochastic {

using geometry::ManifoldModel;
using geometry::Point;

// Coarsest grid accepted by the path samplers.
inline constexpr int kMinSteps = 100;
// Half-width of the occupation window in units of √step.
inline constexpr double kOccupationWidth = 0.5;
// Lower crossing level of the downcrossing estimator in units of √step.
inline constexpr double kDowncrossingLevel = 2.0;
// −ζ(1/2)/√(2π): shift of a discretely monitored barrier.
inline constexpr double kBarrierShift = 0.5825971579390106;
// Outer quadrature of the moment integral.
inline constexpr double kMomentUpper = 4.0;
inline constexpr int kMomentNodes = 24;
inline constexpr std::size_t kMinPathsPerNode = 16;

class StepTooCoarse : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientHits : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Seed used when none is given: $GBC_SEED if set, else a fixed constant.
std::uint64_t default_seed();

// One reproducible random stream per (seed, stream index).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  double normal() { return normal_(engine_); }
  // Uniform on (0, 1).
  double uniform();
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// A sampled path on the double. Coordinate 0 is the signed normal coordinate;
// the path on M is its image under x¹ ↦ |x¹|.
struct PathSample {
  int dim = 0;
  // c for a circular double of circumference 2c (normal coordinate wrapped
  // into (−c, c]); 0 for a line.
  double half_period = 0.0;
  std::vector<double> times;
  std::vector<double> coords;  // (steps + 1) × dim, row major
  std::vector<double> local_time;  // empty when not tracked
  std::optional<std::size_t> first_hit;
  std::vector<std::optional<std::size_t>> last_exit;

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
  double normal(std::size_t k) const { return coords[k * dim]; }
  double& normal(std::size_t k) { return coords[k * dim]; }
  Point position(std::size_t k) const;
  double final_local_time() const { return local_time.empty() ? 0.0 : local_time.back(); }
};

struct BridgeSpec {
  double u = 0.0;
  int steps = 1000;

  void validate() const;
};

// Mirror map x ↦ x* on the double.
Point mirror(const Point& x);

// Reflecting Brownian motion from x0 ∈ M over [0, t]. Exact Skorokhod step on
// the normal component, with the sign of each boundary excursion drawn fairly.
// Supports halfspace and interval.
PathSample simulate_rbm(const ManifoldModel& model, const Point& x0, double t, int steps,
                        RngStream& rng);

// Positions from first_hit on replaced by their mirror images.
PathSample reflect_path(const PathSample& path, std::optional<std::size_t> first_hit);

// Heat kernel of ½Δ on the double (flat space or circle of circumference 2c).
double heat_kernel_double(const ManifoldModel& model, double t, const Point& x, const Point& y);
// Neumann kernel on M: q(t, x, y) + q(t, x, y*).
double neumann_kernel(const ManifoldModel& model, double t, const Point& x, const Point& y);

// Brownian bridge from u to −u on [0, 1], pinned Gaussian construction.
PathSample sample_bridge(const BridgeSpec& spec, RngStream& rng);

// Brownian bridge on the double from x to y over [0, t] with boundary local
// time drawn exactly from its conditional law on each step.
PathSample sample_double_bridge(const ManifoldModel& model, const Point& x, const Point& y,
                                double t, int steps, RngStream& rng);

// Local time at 0 of a one-dimensional Brownian bridge from a to b over
// [0, t], built from the same exact per-step law.
double flat_bridge_local_time(double a, double b, double t, int steps, RngStream& rng);

// Euler–Maruyama bridge of ½Δ_g in a chart of a curved model, from x to y over
// [0, t]; drift ½b plus the flat pinning term, last step pinned. No local time.
PathSample sample_chart_bridge(const ManifoldModel& model, const Point& x, const Point& y,
                               double t, int steps, RngStream& rng);

// (1/2ε)·trapezoidal occupation time of (−ε, ε) by the normal coordinate.
double occupation_local_time(const PathSample& path, double eps);
// Same estimator on every other grid point, ε scaled with the coarser step.
double occupation_local_time_coarse(const PathSample& path);
// Occupation estimator at ε = kOccupationWidth·√step, Richardson-extrapolated
// against the coarse grid to remove the O(√step) bias.
double local_time_bridge(const PathSample& path);
// Cross-check: shifted ε times the expected number of passages from the
// boundary up to ε, with boundary hits drawn from the bridge law between
// grid points.
double downcrossing_local_time(const PathSample& path);

struct MomentEstimate {
  int q = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double closed_form = 0.0;
  std::size_t paths = 0;
  int steps = 0;
  std::uint64_t seed = 0;
};

// q!/(2^{q/2+2}Γ(q/2+1)).
double moment_closed_form(int q);

// (1/√2π)∫₀^∞ e^{−2u²} E_{1;u,−u}[l₁^q] du by Gauss–Legendre in u and Monte
// Carlo over bridges; one path set serves every q.
std::vector<MomentEstimate> moment_integrals(const std::vector<int>& qs, std::size_t paths,
                                             int steps, std::uint64_t seed);
MomentEstimate moment_integral(int q, std::size_t paths, int steps, std::uint64_t seed);

struct LogLogFit {
  double slope = 0.0;
  double slope_se = 0.0;  // propagated from the per-point standard errors
};

// Least-squares slope of log y against log x.
LogLogFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& y_se);

struct ScalingResult {
  int n = 0;
  double slope = 0.0;
  double slope_se = 0.0;
  std::vector<double> t;
  std::vector<double> moment;
  std::vector<double> moment_se;
};

// Log-log slope of E_{t;x,x*}[l_t^n] over the t grid, one independent path set
// per t shared by every n.
std::vector<ScalingResult> local_time_scaling_check(const ManifoldModel& model, const Point& x,
                                                    const std::vector<int>& ns,
                                                    const std::vector<double>& t_grid,
                                                    std::size_t paths, int steps,
                                                    std::uint64_t seed);

struct ReflectionCheck {
  std::string functional;
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  bool pass = false;  // |lhs − rhs| ≤ 3·√(lhs_se² + rhs_se²)
};

// E_{t;x,x}[G(RE); T ≤ t] against (q(t,x,x*)/q(t,x,x))·E_{t;x,x*}[G(E)] for
// G ∈ {1, l_t, l_t²}, both sides from independent bridge samples.
std::vector<ReflectionCheck> reflection_identity_check(const ManifoldModel& model,
                                                       const Point& x, double t,
                                                       std::size_t paths, int steps,
                                                       std::uint64_t seed);

struct KernelSplit {
  double neumann = 0.0;         // q(x,x) + q(x,x*)
  double no_hit_mass = 0.0;     // P_{t;x,x}(T > t)
  double no_hit_mass_se = 0.0;
  double reconstructed = 0.0;   // q(x,x)·P(T > t) + 2q(x,x*)
  double reconstructed_se = 0.0;
};

KernelSplit kernel_split_check(const ManifoldModel& model, const Point& x, double t,
                               std::size_t paths, int steps, std::uint64_t seed);

struct BridgeConvergenceRow {
  double t = 0.0;
  double ks = 0.0;           // against N(0, ¼) at s = ½
  double mean = 0.0;         // sample mean of N_{1/2}
  double drift_sup = 0.0;    // sup of the scaled chart drift over the grid
};

// Drift model for the scaled normal component.
enum class BridgeDrift { flat, disk_chart };

// Euler scheme for dN = dW + [(−u − N)/(1 − s) + extra] ds on [0, 1] with
// common random numbers across t; extra = ½√t·b¹(√t N) for the disk chart.
std::vector<BridgeConvergenceRow> scaled_bridge_convergence(const std::vector<double>& t_grid,
                                                            double u, BridgeDrift drift,
                                                            std::size_t paths, int steps,
                                                            std::uint64_t seed);

// sup_{|z| ≤ zmax} |½√t·b¹(√t z)| for the unit disk chart.
double disk_drift_sup(double t, double zmax);

// Kolmogorov–Smirnov distance between a sample and N(mean, sd²).
double ks_distance_normal(std::vector<double> sample, double mean, double sd);

}  // namespace gbc::stochastic
