#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gbc/exterior_algebra.hpp"

namespace gbc::geometry {

using Point = Eigen::VectorXd;

// Central-difference step for metric and Christoffel derivatives.
inline constexpr double kFdStep = 1e-5;

// Sign in g_tan = δ + 2·kSigmaH·H·x¹. Fixed by the disk boundary oracle (χ = 1):
// the metric of a convex boundary shrinks as x¹ grows.
inline constexpr double kSigmaH = -1.0;
// Sign in R̄_ijkl = R_ijkl + kSigmaGauss·(H_ik H_jl − H_il H_jk). Fixed by the
// boundary of the unit 3-ball having unit sectional curvature.
inline constexpr double kSigmaGauss = 1.0;

class ChartDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// All-lower curvature tensor. R(i,j,k,l) with R(0,1,0,1) = K for constant
// curvature K in an orthonormal frame.
class CurvatureTensor {
 public:
  explicit CurvatureTensor(int dim);

  static CurvatureTensor constant_curvature(int dim, double k);

  int dim() const { return d_; }
  double operator()(int i, int j, int k, int l) const { return r_[flat(i, j, k, l)]; }
  double& at(int i, int j, int k, int l) { return r_[flat(i, j, k, l)]; }
  double max_abs() const;
  // Largest violation of antisymmetry, pair symmetry or the first Bianchi identity.
  double symmetry_defect() const;

 private:
  std::size_t flat(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * d_ + j) * d_ + k) * d_ + l;
  }
  int d_;
  std::vector<double> r_;
};

class SecondFundamentalForm {
 public:
  explicit SecondFundamentalForm(Eigen::MatrixXd h);
  int dim() const { return static_cast<int>(h_.rows()); }
  const Eigen::MatrixXd& matrix() const { return h_; }

 private:
  Eigen::MatrixXd h_;
};

// Chart (x¹, x̄) with g₁₁ = 1, g₁ⱼ = 0. For boundary charts x¹ ≥ 0 is the
// manifold and the double is realized by evaluating at |x¹|.
class SemiGeodesicChart {
 public:
  using TangentialFn = std::function<Eigen::MatrixXd(const Point&)>;
  using TangentialDerivFn = std::function<std::vector<Eigen::MatrixXd>(const Point&)>;

  // tangential returns the (d−1)×(d−1) block; derivatives (optional) returns
  // ∂_k of that block for k = 0..d−1.
  SemiGeodesicChart(int dim, bool boundary, TangentialFn tangential,
                    TangentialDerivFn derivatives, double normal_min, double normal_max);

  int dim() const { return d_; }
  bool has_boundary() const { return boundary_; }
  bool analytic() const { return static_cast<bool>(dtan_); }
  double normal_min() const { return nmin_; }
  double normal_max() const { return nmax_; }

  // Metric and derivatives at a chart point, no domain check.
  Eigen::MatrixXd raw_metric(const Point& x) const;
  std::vector<Eigen::MatrixXd> raw_derivatives(const Point& x) const;

 private:
  int d_;
  bool boundary_;
  TangentialFn tan_;
  TangentialDerivFn dtan_;
  double nmin_, nmax_;
};

// Metric on M; x¹ ≥ 0 required for boundary charts.
Eigen::MatrixXd metric_at(const SemiGeodesicChart& chart, const Point& x);
// Metric and ∂g on the double (signed x¹).
Eigen::MatrixXd double_metric_at(const SemiGeodesicChart& chart, const Point& x);
std::vector<Eigen::MatrixXd> double_metric_derivatives(const SemiGeodesicChart& chart,
                                                       const Point& x);

// bⁱ = (det g)^{-1/2} ∂_j((det g)^{1/2} g^{ji}) on the double.
Eigen::VectorXd drift_b(const SemiGeodesicChart& chart, const Point& x);

// gamma[i](j, k) = Γ^i_jk on the double.
std::vector<Eigen::MatrixXd> christoffel(const SemiGeodesicChart& chart, const Point& x);

// Coordinate-frame curvature from finite differences of Christoffel symbols.
CurvatureTensor coordinate_curvature(const SemiGeodesicChart& chart, const Point& x);

// Columns are an orthonormal frame (coordinate components) for metric g.
Eigen::MatrixXd orthonormal_frame(const Eigen::MatrixXd& g);
CurvatureTensor to_orthonormal(const CurvatureTensor& r, const Eigen::MatrixXd& g);

// Transport along a polyline; returns the map from orthonormal components at
// the first point to orthonormal components at the last point.
exterior::Endomorphism parallel_transport(const SemiGeodesicChart& chart,
                                          const std::vector<Point>& path);

// H at (0, x̄) in an orthonormal tangential frame.
SecondFundamentalForm second_fundamental_form(const SemiGeodesicChart& chart, const Point& xbar);

// R: ambient orthonormal curvature with index 0 normal.
CurvatureTensor gauss_codazzi_restrict(const CurvatureTensor& r, const SecondFundamentalForm& h);
// Inverse: tangential part of the ambient curvature from boundary data.
CurvatureTensor gauss_codazzi_lift(const CurvatureTensor& rbar, const SecondFundamentalForm& h);

// Ω = Σ R_ijkl D(E_ij)∘D(E_kl), R in an orthonormal frame.
exterior::CurvatureAction curvature_action(const CurvatureTensor& r);

}  // namespace gbc::geometry
