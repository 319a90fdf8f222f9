#include "gbc/models.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "gbc/quadrature.hpp"

namespace gbc::geometry {

namespace {

constexpr double kPi = std::numbers::pi;

using Mat = Eigen::MatrixXd;

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

ManifoldModel make_interval(double c) {
  SemiGeodesicChart chart(
      1, true, [](const Point&) { return Mat(0, 0); },
      [](const Point&) { return std::vector<Mat>{Mat(0, 0)}; }, 0.0, c);
  ManifoldModel m{"interval", 1, 1, true, c, std::move(chart)};
  m.interior_box = ChartBox{{0.0}, {c}};
  m.boundary_measure = 2.0;
  m.boundary_nodes = [](int) {
    return std::vector<BoundaryNode>{{Point(0), 1.0}, {Point(0), 1.0}};
  };
  return m;
}

ManifoldModel make_halfspace(double c) {
  SemiGeodesicChart chart(
      2, true, [](const Point&) { return scalar(1.0); },
      [](const Point&) { return std::vector<Mat>{scalar(0.0), scalar(0.0)}; }, 0.0,
      std::numeric_limits<double>::infinity());
  ManifoldModel m{"halfspace", 2, 1, false, c, std::move(chart)};
  m.boundary_measure = std::numeric_limits<double>::infinity();
  m.boundary_nodes = [](int) -> std::vector<BoundaryNode> {
    throw std::domain_error("halfspace is not compact: boundary has infinite measure");
  };
  return m;
}

// Circle-parametrized boundary, unit length density at x¹ = 0.
std::function<std::vector<BoundaryNode>(int)> circle_nodes(double c) {
  return [c](int n) {
    const auto rule = gauss_legendre(n, 0.0, 2.0 * kPi * c);
    std::vector<BoundaryNode> out;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
      out.push_back({Point::Constant(1, rule.nodes[i]), rule.weights[i]});
    return out;
  };
}

ManifoldModel make_disk(double c) {
  SemiGeodesicChart chart(
      2, true,
      [c](const Point& x) {
        const double s = (c - x[0]) / c;
        return scalar(s * s);
      },
      [c](const Point& x) {
        const double s = (c - x[0]) / c;
        return std::vector<Mat>{scalar(-2.0 * s / c), scalar(0.0)};
      },
      0.0, c);
  ManifoldModel m{"disk", 2, 1, true, c, std::move(chart)};
  m.interior_box = ChartBox{{0.0, 0.0}, {c, 2.0 * kPi * c}};
  m.boundary_measure = 2.0 * kPi * c;
  m.boundary_nodes = circle_nodes(c);
  return m;
}

SemiGeodesicChart latitude_chart(double c, bool boundary) {
  return SemiGeodesicChart(
      2, boundary,
      [c](const Point& x) {
        const double co = std::cos(x[0] / c);
        return scalar(co * co);
      },
      [c](const Point& x) {
        return std::vector<Mat>{scalar(-std::sin(2.0 * x[0] / c) / c), scalar(0.0)};
      },
      boundary ? 0.0 : -0.5 * kPi * c, 0.5 * kPi * c);
}

ManifoldModel make_hemisphere(double c) {
  ManifoldModel m{"hemisphere", 2, 1, true, c, latitude_chart(c, true)};
  m.sectional_curvature = 1.0 / (c * c);
  m.interior_box = ChartBox{{0.0, 0.0}, {0.5 * kPi * c, 2.0 * kPi * c}};
  m.boundary_measure = 2.0 * kPi * c;
  m.boundary_nodes = circle_nodes(c);
  return m;
}

ManifoldModel make_sphere2(double c) {
  ManifoldModel m{"sphere2", 2, 2, true, c, latitude_chart(c, false)};
  m.sectional_curvature = 1.0 / (c * c);
  m.interior_box = ChartBox{{-0.5 * kPi * c, 0.0}, {0.5 * kPi * c, 2.0 * kPi * c}};
  m.boundary_measure = 0.0;
  m.boundary_nodes = [](int) { return std::vector<BoundaryNode>{}; };
  return m;
}

// Round sphere of radius c in normal coordinates y around a point:
// g = f²·I + a·yyᵀ with f = c·sin(ρ/c)/ρ, a = (1 − f²)/ρ².
struct SphereNormalMetric {
  double c;

  void profile(double rho, double& f, double& fp, double& a, double& ap) const {
    const double c2 = c * c;
    if (rho < 1e-3) {
      const double r2 = rho * rho;
      f = 1.0 - r2 / (6.0 * c2) + r2 * r2 / (120.0 * c2 * c2);
      fp = -rho / (3.0 * c2) + rho * r2 / (30.0 * c2 * c2);
      a = 1.0 / (3.0 * c2) - 2.0 * r2 / (45.0 * c2 * c2);
      ap = -4.0 * rho / (45.0 * c2 * c2);
      return;
    }
    const double s = std::sin(rho / c), co = std::cos(rho / c);
    f = c * s / rho;
    fp = co / rho - c * s / (rho * rho);
    a = (1.0 - f * f) / (rho * rho);
    ap = -2.0 * f * fp / (rho * rho) - 2.0 * (1.0 - f * f) / (rho * rho * rho);
  }

  Mat metric(const Eigen::VectorXd& y) const {
    double f, fp, a, ap;
    profile(y.norm(), f, fp, a, ap);
    return f * f * Mat::Identity(y.size(), y.size()) + a * y * y.transpose();
  }

  std::vector<Mat> derivatives(const Eigen::VectorXd& y) const {
    const int n = static_cast<int>(y.size());
    const double rho = y.norm();
    double f, fp, a, ap;
    profile(rho, f, fp, a, ap);
    std::vector<Mat> out;
    for (int k = 0; k < n; ++k) {
      const double drho = rho > 0.0 ? y[k] / rho : 0.0;
      Eigen::VectorXd ek = Eigen::VectorXd::Unit(n, k);
      Mat dk = 2.0 * f * fp * drho * Mat::Identity(n, n) + ap * drho * y * y.transpose() +
               a * (ek * y.transpose() + y * ek.transpose());
      out.push_back(std::move(dk));
    }
    return out;
  }
};

ManifoldModel make_ball3(double c) {
  const SphereNormalMetric s2{c};
  SemiGeodesicChart chart(
      3, true,
      [s2, c](const Point& x) {
        const double s = (c - x[0]) / c;
        return Mat(s * s * s2.metric(x.tail(2)));
      },
      [s2, c](const Point& x) {
        const double s = (c - x[0]) / c;
        const Mat base = s2.metric(x.tail(2));
        auto tang = s2.derivatives(x.tail(2));
        std::vector<Mat> out{Mat(-2.0 * s / c * base)};
        for (auto& t : tang) out.push_back(s * s * t);
        return out;
      },
      0.0, c);
  ManifoldModel m{"ball3", 3, 1, true, c, std::move(chart)};
  m.boundary_measure = 4.0 * kPi * c * c;
  m.boundary_nodes = [c](int n) {
    const auto th = gauss_legendre(n, 0.0, kPi);
    const auto ph = gauss_legendre(n, 0.0, 2.0 * kPi);
    std::vector<BoundaryNode> out;
    for (std::size_t i = 0; i < th.nodes.size(); ++i)
      for (std::size_t j = 0; j < ph.nodes.size(); ++j) {
        Point y(2);
        y << c * th.nodes[i] * std::cos(ph.nodes[j]), c * th.nodes[i] * std::sin(ph.nodes[j]);
        out.push_back({y, th.weights[i] * ph.weights[j] * c * c * std::sin(th.nodes[i])});
      }
    return out;
  };
  return m;
}

}  // namespace

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"interval", "disk",    "hemisphere",
                                              "ball3",    "sphere2", "halfspace"};
  return names;
}

ManifoldModel make_model(std::string_view name, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("model scale must be positive and finite");
  if (name == "interval") return make_interval(scale);
  if (name == "halfspace") return make_halfspace(scale);
  if (name == "disk") return make_disk(scale);
  if (name == "hemisphere") return make_hemisphere(scale);
  if (name == "sphere2") return make_sphere2(scale);
  if (name == "ball3") return make_ball3(scale);
  std::string msg = "unknown model '" + std::string(name) + "'; registered models:";
  for (const auto& n : model_names()) msg += " " + n;
  throw UnknownModelError(msg);
}

CurvatureTensor curvature_at(const ManifoldModel& model, const Point& x) {
  double_metric_at(model.chart, x);  // domain check
  return CurvatureTensor::constant_curvature(model.dim, model.sectional_curvature);
}

SecondFundamentalForm second_fundamental_form_at(const ManifoldModel& model, const Point& xbar) {
  return second_fundamental_form(model.chart, xbar);
}

}  // namespace gbc::geometry
