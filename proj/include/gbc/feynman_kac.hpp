#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gbc/exterior_algebra.hpp"
#include "gbc/models.hpp"
#include "gbc/stochastic.hpp"

namespace gbc::feynman_kac {

using exterior::GradedOperator;
using geometry::ManifoldModel;
using geometry::Point;
using stochastic::PathSample;

// Allowed drift of MQ − Z per step.
inline constexpr double kSplitTolerance = 1e-12;

class NonMonotoneLocalTime : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ProjectionPair {
  GradedOperator P;  // forms containing the normal covector
  GradedOperator Q;  // I − P

  static ProjectionPair of_dim(int dim);
};

// Ω at a point of M, and the derivation extension of H (normal row and column
// zero) at a boundary point x̄.
using OmegaField = std::function<GradedOperator(const Point&)>;
using HField = std::function<GradedOperator(const Point&)>;

OmegaField omega_field(const ManifoldModel& model);
// The H field refers to model, which must outlive it.
HField h_field(const ManifoldModel& model);
// Fields that vanish identically on Λ*ℝ^d.
OmegaField zero_omega(int dim);
HField constant_h(const GradedOperator& h);

struct MultiplicativeState {
  GradedOperator M;
  GradedOperator Z;  // tangential part
  GradedOperator Y;  // normal part, restarted from Z at each boundary visit
  std::optional<double> last_exit;
  bool hit = false;
  double max_split_defect = 0.0;  // max over steps of |MQ − Z|, M = Y + Z
};

// Interior product Π (I + ½Ω(x_k)Δt) over steps [begin, end), right-multiplied.
GradedOperator interior_product(const PathSample& path, const OmegaField& omega, std::size_t begin,
                                std::size_t end);

// Pathwise evolution of M on a path carrying local time and hit bookkeeping.
// Before the first hit M ← M(I + ½ΩΔt). At the hitting index Y jumps to 0 and
// Z = MQ stays continuous. On contact steps Z ← Z + M(−HΔl)Q, then
// Z ← Z + Z·½ΩΔt·Q, and Y restarts at 0. Between contacts Y = Z_{t*}e(t*, t)P
// with e built from the same interior products, and Z ← Z + M·½ΩΔt·Q.
MultiplicativeState evolve_state(const PathSample& path, const OmegaField& omega, const HField& h);
GradedOperator evolve_M(const PathSample& path, const OmegaField& omega, const HField& h);

struct ExpansionTerm {
  int p = 0;
  int q = 0;
  GradedOperator value;
};

// m_pq = (t^p l^q / p! q!)(−1)^q 2^{−p} Ω₀^p H₀^q Q for every p + q/2 ≤ max_order.
std::vector<ExpansionTerm> expansion_terms(double t, double l, const GradedOperator& omega0,
                                           const GradedOperator& h0, double max_order);
std::vector<ExpansionTerm> expansion_terms(const PathSample& path, const GradedOperator& omega0,
                                           const GradedOperator& h0, double max_order);

struct SupertraceEstimate {
  double t = 0.0;
  double interior = 0.0, interior_se = 0.0;
  double boundary = 0.0, boundary_se = 0.0;
  std::size_t paths = 0;
  int steps = 0;
  std::uint64_t seed = 0;
};

// q(t,x,x)·E_{t;x,x}[str(M u⁻¹); T > t] and 2q(t,x,x*)·E_{t;x,x*}[str(M u⁻¹)].
// Flat doubles (interval, halfspace) use exact Gaussian bridges with u⁻¹ = I.
// sphere2 has no boundary; its interior part uses chart bridges, polyline
// transport and the spectral heat kernel on the diagonal.
SupertraceEstimate mc_supertrace(const ManifoldModel& model, double t, const Point& x,
                                 std::size_t paths, int steps, std::uint64_t seed);

// p(t, x, x) on the round sphere of radius c: Σ (2l+1)/(4πc²) e^{−l(l+1)t/2c²}.
double sphere_heat_diagonal(double t, double c);

struct McKeanSingerReport {
  double t = 0.0;
  double interior = 0.0;          // exact: str(I) = 0 on Λ*ℝ¹
  double boundary_closed = 0.0;   // ∫ 2q(t,x,x*) dx by quadrature
  double boundary_mc = 0.0;       // x uniform on M, bridges to x*
  double boundary_mc_se = 0.0;
  double min_hit_supertrace = 0.0;  // over hitting paths
  double max_hit_supertrace = 0.0;
  // Over both path sets: bridges x → x that hit, and every bridge x → x*.
  std::size_t hitting_paths = 0;
  std::size_t paths = 0;
  int steps = 0;
  std::uint64_t seed = 0;
};

McKeanSingerReport mckean_singer_interval(const ManifoldModel& model, double t, std::size_t paths,
                                          int steps, std::uint64_t seed);

struct LimitCoefficient {
  int p = 0, q = 0;
  std::vector<double> t;
  std::vector<double> estimate;
  std::vector<double> std_error;
  double closed_form = 0.0;  // c_pq·s̄tr term of the boundary integrand, 0 off the diagonal 2p + q = d − 1
};

// 2/((2π)^{d/2} t^{(d−1)/2}) ∫₀^∞ e^{−2u²} E[str m_pq] du with frozen Ω₀, H₀ at
// x̄ and exact local time of the normal bridge from √t·u to −√t·u.
LimitCoefficient boundary_limit_coefficient(const ManifoldModel& model, const Point& xbar, int p,
                                            int q, const std::vector<double>& t_grid,
                                            std::size_t paths, int steps, std::uint64_t seed);

struct TransportMoments {
  int order = 1;
  std::vector<double> t;
  std::vector<double> moment;
  std::vector<double> std_error;
  double slope = 0.0;  // NaN when every moment is exactly 0
  double slope_se = 0.0;
  bool trivial = false;  // every moment exactly 0
};

// E‖u_t⁻¹ − I‖_F^N along chart bridges x → x, transported along the path
// projected to M, with u_t⁻¹ the transpose of the transport map.
TransportMoments parallel_correction_moments(const ManifoldModel& model, const Point& x,
                                             const std::vector<double>& t_grid, int order,
                                             std::size_t paths, int steps, std::uint64_t seed);

}  // namespace gbc::feynman_kac
