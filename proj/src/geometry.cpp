#include "gbc/geometry.hpp"

#include <cmath>
#include <string>

namespace gbc::geometry {

using exterior::Endomorphism;

// ------------------------------------------------------------ CurvatureTensor

CurvatureTensor::CurvatureTensor(int dim) : d_(dim) {
  if (dim < 0 || dim > exterior::kMaxDim) throw std::invalid_argument("curvature dimension");
  r_.assign(static_cast<std::size_t>(dim) * dim * dim * dim, 0.0);
}

CurvatureTensor CurvatureTensor::constant_curvature(int dim, double k) {
  CurvatureTensor r(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      if (i == j) continue;
      r.at(i, j, i, j) = k;
      r.at(i, j, j, i) = -k;
    }
  return r;
}

double CurvatureTensor::max_abs() const {
  double m = 0.0;
  for (double v : r_) m = std::max(m, std::abs(v));
  return m;
}

double CurvatureTensor::symmetry_defect() const {
  double m = 0.0;
  const CurvatureTensor& r = *this;
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j)
      for (int k = 0; k < d_; ++k)
        for (int l = 0; l < d_; ++l) {
          m = std::max(m, std::abs(r(i, j, k, l) + r(j, i, k, l)));
          m = std::max(m, std::abs(r(i, j, k, l) + r(i, j, l, k)));
          m = std::max(m, std::abs(r(i, j, k, l) - r(k, l, i, j)));
          m = std::max(m, std::abs(r(i, j, k, l) + r(j, k, i, l) + r(k, i, j, l)));
        }
  return m;
}

SecondFundamentalForm::SecondFundamentalForm(Eigen::MatrixXd h) : h_(std::move(h)) {
  if (h_.rows() != h_.cols()) throw std::invalid_argument("second fundamental form must be square");
  if (!h_.allFinite()) throw std::invalid_argument("second fundamental form must be finite");
  const double scale = std::max(1.0, h_.size() ? h_.cwiseAbs().maxCoeff() : 0.0);
  if (h_.size() && (h_ - h_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("second fundamental form must be symmetric");
}

// ---------------------------------------------------------- SemiGeodesicChart

SemiGeodesicChart::SemiGeodesicChart(int dim, bool boundary, TangentialFn tangential,
                                     TangentialDerivFn derivatives, double normal_min,
                                     double normal_max)
    : d_(dim),
      boundary_(boundary),
      tan_(std::move(tangential)),
      dtan_(std::move(derivatives)),
      nmin_(normal_min),
      nmax_(normal_max) {
  if (dim < 1 || dim > exterior::kMaxDim) throw std::invalid_argument("chart dimension");
  if (!tan_) throw std::invalid_argument("chart needs a tangential metric");
}

Eigen::MatrixXd SemiGeodesicChart::raw_metric(const Point& x) const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d_, d_);
  g(0, 0) = 1.0;
  if (d_ > 1) g.bottomRightCorner(d_ - 1, d_ - 1) = tan_(x);
  return g;
}

std::vector<Eigen::MatrixXd> SemiGeodesicChart::raw_derivatives(const Point& x) const {
  std::vector<Eigen::MatrixXd> out(d_, Eigen::MatrixXd::Zero(d_, d_));
  if (d_ == 1) return out;
  if (dtan_) {
    const auto dt = dtan_(x);
    for (int k = 0; k < d_; ++k) out[k].bottomRightCorner(d_ - 1, d_ - 1) = dt.at(k);
    return out;
  }
  for (int k = 0; k < d_; ++k) {
    Point xp = x, xm = x;
    xp[k] += kFdStep;
    xm[k] -= kFdStep;
    out[k] = (raw_metric(xp) - raw_metric(xm)) / (2.0 * kFdStep);
  }
  return out;
}

namespace {

void check_point(const SemiGeodesicChart& chart, const Point& x) {
  if (x.size() != chart.dim())
    throw std::invalid_argument("point has dimension " + std::to_string(x.size()) +
                                ", chart has " + std::to_string(chart.dim()));
  if (!x.allFinite()) throw ChartDomainError("non-finite chart point");
  const double n = chart.has_boundary() ? std::abs(x[0]) : x[0];
  if (n < chart.normal_min() || n > chart.normal_max())
    throw ChartDomainError("normal coordinate " + std::to_string(x[0]) + " outside chart");
}

Point mirror_to_m(const SemiGeodesicChart& chart, const Point& x) {
  Point y = x;
  if (chart.has_boundary()) y[0] = std::abs(y[0]);
  return y;
}

}  // namespace

Eigen::MatrixXd double_metric_at(const SemiGeodesicChart& chart, const Point& x) {
  check_point(chart, x);
  Eigen::MatrixXd g = chart.raw_metric(mirror_to_m(chart, x));
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (!g.allFinite() || llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0)
    throw ChartDomainError("metric not positive definite: chart domain violated");
  return g;
}

Eigen::MatrixXd metric_at(const SemiGeodesicChart& chart, const Point& x) {
  if (chart.has_boundary() && x.size() > 0 && x[0] < 0.0)
    throw ChartDomainError("metric_at requires x¹ ≥ 0 on a boundary chart");
  return double_metric_at(chart, x);
}

std::vector<Eigen::MatrixXd> double_metric_derivatives(const SemiGeodesicChart& chart,
                                                       const Point& x) {
  check_point(chart, x);
  auto dg = chart.raw_derivatives(mirror_to_m(chart, x));
  if (chart.has_boundary() && x[0] < 0.0) dg[0] = -dg[0];
  return dg;
}

Eigen::VectorXd drift_b(const SemiGeodesicChart& chart, const Point& x) {
  const int d = chart.dim();
  const Eigen::MatrixXd g = double_metric_at(chart, x);
  const auto dg = double_metric_derivatives(chart, x);
  const Eigen::MatrixXd gi = g.inverse();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < d; ++j) {
    const Eigen::MatrixXd t = gi * dg[j] * gi;
    const double half_log_det = 0.5 * (gi * dg[j]).trace();
    for (int i = 0; i < d; ++i) b[i] += -t(j, i) + gi(j, i) * half_log_det;
  }
  return b;
}

std::vector<Eigen::MatrixXd> christoffel(const SemiGeodesicChart& chart, const Point& x) {
  const int d = chart.dim();
  const Eigen::MatrixXd gi = double_metric_at(chart, x).inverse();
  const auto dg = double_metric_derivatives(chart, x);
  // lower[m](j,k) = ½(∂_j g_mk + ∂_k g_mj − ∂_m g_jk)
  std::vector<Eigen::MatrixXd> lower(d, Eigen::MatrixXd(d, d));
  for (int m = 0; m < d; ++m)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        lower[m](j, k) = 0.5 * (dg[j](m, k) + dg[k](m, j) - dg[m](j, k));
  std::vector<Eigen::MatrixXd> gamma(d, Eigen::MatrixXd::Zero(d, d));
  for (int i = 0; i < d; ++i)
    for (int m = 0; m < d; ++m)
      if (gi(i, m) != 0.0) gamma[i] += gi(i, m) * lower[m];
  return gamma;
}

CurvatureTensor coordinate_curvature(const SemiGeodesicChart& chart, const Point& x) {
  const int d = chart.dim();
  const Eigen::MatrixXd g = double_metric_at(chart, x);
  const auto gam = christoffel(chart, x);
  // dgam[a][i](j,k) = ∂_a Γ^i_jk
  std::vector<std::vector<Eigen::MatrixXd>> dgam(d);
  for (int a = 0; a < d; ++a) {
    Point xp = x, xm = x;
    xp[a] += kFdStep;
    xm[a] -= kFdStep;
    const auto gp = christoffel(chart, xp);
    const auto gm = christoffel(chart, xm);
    dgam[a].resize(d);
    for (int i = 0; i < d; ++i) dgam[a][i] = (gp[i] - gm[i]) / (2.0 * kFdStep);
  }
  CurvatureTensor r(d);
  // R^m_{lij} = ∂_iΓ^m_jl − ∂_jΓ^m_il + Γ^m_ia Γ^a_jl − Γ^m_ja Γ^a_il;  R_ijkl = g_km R^m_lij
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int l = 0; l < d; ++l) {
        Eigen::VectorXd rm(d);
        for (int m = 0; m < d; ++m) {
          double v = dgam[i][m](j, l) - dgam[j][m](i, l);
          for (int a = 0; a < d; ++a) v += gam[m](i, a) * gam[a](j, l) - gam[m](j, a) * gam[a](i, l);
          rm[m] = v;
        }
        for (int k = 0; k < d; ++k) r.at(i, j, k, l) = g.row(k).dot(rm);
      }
  return r;
}

Eigen::MatrixXd orthonormal_frame(const Eigen::MatrixXd& g) {
  if (g.rows() == 0) return g;
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) throw ChartDomainError("metric not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  return l.transpose().triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(g.rows(), g.cols()));
}

CurvatureTensor to_orthonormal(const CurvatureTensor& r, const Eigen::MatrixXd& g) {
  const int d = r.dim();
  const Eigen::MatrixXd f = orthonormal_frame(g);
  // Contract one slot at a time.
  CurvatureTensor cur = r;
  for (int slot = 0; slot < 4; ++slot) {
    CurvatureTensor next(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) {
            int idx[4] = {i, j, k, l};
            const int a = idx[slot];
            double v = 0.0;
            for (int s = 0; s < d; ++s) {
              idx[slot] = s;
              v += f(s, a) * cur(idx[0], idx[1], idx[2], idx[3]);
            }
            next.at(i, j, k, l) = v;
          }
    cur = std::move(next);
  }
  return cur;
}

Endomorphism parallel_transport(const SemiGeodesicChart& chart, const std::vector<Point>& path) {
  if (path.empty()) throw std::invalid_argument("parallel_transport needs a path");
  const int d = chart.dim();
  Eigen::MatrixXd v = orthonormal_frame(double_metric_at(chart, path.front()));
  auto rhs = [&](const Point& p, const Eigen::VectorXd& vel, const Eigen::MatrixXd& w) {
    const auto gam = christoffel(chart, p);
    Eigen::MatrixXd out(d, w.cols());
    for (int i = 0; i < d; ++i) out.row(i) = -(vel.transpose() * gam[i]) * w;
    return out;
  };
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const Point& a = path[k];
    const Point& b = path[k + 1];
    const Eigen::VectorXd vel = b - a;
    const Point mid = 0.5 * (a + b);
    const Eigen::MatrixXd k1 = rhs(a, vel, v);
    const Eigen::MatrixXd k2 = rhs(mid, vel, v + 0.5 * k1);
    const Eigen::MatrixXd k3 = rhs(mid, vel, v + 0.5 * k2);
    const Eigen::MatrixXd k4 = rhs(b, vel, v + k3);
    v += (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  }
  const Eigen::MatrixXd g_end = double_metric_at(chart, path.back());
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(g_end).matrixL();
  return Endomorphism(l.transpose() * v);
}

SecondFundamentalForm second_fundamental_form(const SemiGeodesicChart& chart, const Point& xbar) {
  if (!chart.has_boundary()) throw std::invalid_argument("chart has no boundary");
  const int d = chart.dim();
  if (xbar.size() != d - 1) throw std::invalid_argument("boundary point has wrong dimension");
  if (d == 1) return SecondFundamentalForm(Eigen::MatrixXd(0, 0));
  Point x(d);
  x[0] = 0.0;
  x.tail(d - 1) = xbar;
  const Eigen::MatrixXd g = metric_at(chart, x);
  const auto dg = chart.raw_derivatives(x);
  const Eigen::MatrixXd h = kSigmaH * 0.5 * dg[0].bottomRightCorner(d - 1, d - 1);
  const Eigen::MatrixXd f = orthonormal_frame(g.bottomRightCorner(d - 1, d - 1));
  Eigen::MatrixXd hon = f.transpose() * h * f;
  hon = 0.5 * (hon + hon.transpose());
  return SecondFundamentalForm(std::move(hon));
}

namespace {

CurvatureTensor gauss_codazzi(const CurvatureTensor& base, int offset,
                              const SecondFundamentalForm& h, double sign) {
  const int n = h.dim();
  const auto& hm = h.matrix();
  CurvatureTensor out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          out.at(i, j, k, l) = base(i + offset, j + offset, k + offset, l + offset) +
                               sign * (hm(i, k) * hm(j, l) - hm(i, l) * hm(j, k));
  return out;
}

}  // namespace

CurvatureTensor gauss_codazzi_restrict(const CurvatureTensor& r, const SecondFundamentalForm& h) {
  if (h.dim() != r.dim() - 1) throw std::invalid_argument("Gauss-Codazzi dimension mismatch");
  return gauss_codazzi(r, 1, h, kSigmaGauss);
}

CurvatureTensor gauss_codazzi_lift(const CurvatureTensor& rbar, const SecondFundamentalForm& h) {
  if (h.dim() != rbar.dim()) throw std::invalid_argument("Gauss-Codazzi dimension mismatch");
  return gauss_codazzi(rbar, 0, h, -kSigmaGauss);
}

exterior::CurvatureAction curvature_action(const CurvatureTensor& r) {
  const int d = r.dim();
  exterior::CurvatureAction omega(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) a(k, l) = r(i, j, k, l);
      if (a.cwiseAbs().maxCoeff() == 0.0) continue;
      omega.add(Endomorphism::elementary(d, i, j), Endomorphism(std::move(a)));
    }
  return omega;
}

}  // namespace gbc::geometry
