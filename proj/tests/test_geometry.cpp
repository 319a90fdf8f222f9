#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gbc/geometry.hpp"
#include "gbc/models.hpp"

using namespace gbc::geometry;

namespace {

constexpr double kPi = std::numbers::pi;

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

// Interior test points for each registered model.
std::vector<Point> sample_points(const ManifoldModel& m) {
  if (m.name == "interval") return {pt({0.2}), pt({0.7})};
  if (m.name == "ball3") return {pt({0.1, 0.2, -0.3}), pt({0.4, 0.0, 0.5}), pt({0.05, -0.6, 0.1})};
  if (m.name == "sphere2") return {pt({-0.4, 1.0}), pt({0.3, 2.0}), pt({1.0, 0.1})};
  return {pt({0.1, 0.3}), pt({0.35, 1.0}), pt({0.6, 4.0})};
}

// bⁱ by central differences of (det g)^{1/2} g^{ji}, independent of the library formula.
Eigen::VectorXd drift_oracle(const SemiGeodesicChart& c, const Point& x) {
  const int d = c.dim();
  const double h = 1e-5;
  auto field = [&](const Point& y) {
    const Eigen::MatrixXd g = double_metric_at(c, y);
    return Eigen::MatrixXd(std::sqrt(g.determinant()) * g.inverse());
  };
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < d; ++j) {
    Point xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const Eigen::MatrixXd df = (field(xp) - field(xm)) / (2 * h);
    for (int i = 0; i < d; ++i) b[i] += df(j, i);
  }
  return b / std::sqrt(double_metric_at(c, x).determinant());
}

double rotation_angle(const gbc::exterior::Endomorphism& t) {
  return std::atan2(t(1, 0), t(0, 0));
}

double angle_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2 * kPi);
  return std::min(d, 2 * kPi - d);
}

}  // namespace

TEST_CASE("registry") {
  CHECK(model_names().size() == 6);
  CHECK_THROWS_AS(make_model("no-such"), UnknownModelError);
  const int expected[] = {1, 1, 1, 1, 2, 1};
  int i = 0;
  for (const auto& n : model_names()) CHECK(make_model(n).euler_characteristic == expected[i++]);
  CHECK(make_model("ball3").dim == 3);
  CHECK_FALSE(make_model("halfspace").compact);
}

TEST_CASE("semi-geodesic structure is exact") {
  for (const auto& n : model_names()) {
    const auto m = make_model(n);
    for (const auto& x : sample_points(m)) {
      const Eigen::MatrixXd g = metric_at(m.chart, x);
      CHECK(g(0, 0) == 1.0);
      for (int j = 1; j < m.dim; ++j) {
        CHECK(g(0, j) == 0.0);
        CHECK(g(j, 0) == 0.0);
      }
    }
  }
}

TEST_CASE("metric examples") {
  const auto half = make_model("halfspace");
  CHECK((metric_at(half.chart, pt({3.0, -7.0})) - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);

  const auto disk = make_model("disk");
  CHECK((metric_at(disk.chart, pt({0.0, 1.0})) - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
  CHECK(disk.chart.raw_derivatives(pt({0.0, 1.0}))[0](1, 1) == doctest::Approx(-2.0));
  CHECK(metric_at(disk.chart, pt({0.25, 0.0}))(1, 1) == doctest::Approx(0.5625));

  CHECK_THROWS_AS(metric_at(disk.chart, pt({-0.1, 0.0})), ChartDomainError);
  CHECK_THROWS_AS(metric_at(disk.chart, pt({1.5, 0.0})), ChartDomainError);
  CHECK_THROWS_AS(metric_at(disk.chart, pt({1.0, 0.0})), ChartDomainError);
  // The double accepts negative x¹ and mirrors it.
  CHECK((double_metric_at(disk.chart, pt({-0.3, 0.2})) - metric_at(disk.chart, pt({0.3, 0.2})))
            .norm() == 0.0);
}

TEST_CASE("metric expansion and volume comparison near the boundary") {
  for (const char* n : {"disk", "hemisphere", "ball3"}) {
    const auto m = make_model(n);
    const int d = m.dim;
    Point center = Point::Zero(d);
    const Eigen::MatrixXd h = second_fundamental_form_at(m, Point::Zero(d - 1)).matrix();
    double prev_ratio = 0.0;
    for (double s : {1e-2, 1e-3, 1e-4}) {
      Point x = center;
      x[0] = s;
      for (int i = 1; i < d; ++i) x[i] = 0.5 * s;
      const Eigen::MatrixXd g = metric_at(m.chart, x).bottomRightCorner(d - 1, d - 1);
      const Eigen::MatrixXd lin =
          Eigen::MatrixXd::Identity(d - 1, d - 1) + 2.0 * kSigmaH * h * x[0];
      const double ratio = (g - lin).norm() / x.squaredNorm();
      CHECK(ratio < 5.0);
      if (prev_ratio > 0.0) CHECK(ratio < 2.0 * prev_ratio + 1e-6);
      prev_ratio = ratio;

      Point xb = x;
      xb[0] = 0.0;
      const double vol = std::sqrt(metric_at(m.chart, x).determinant()) /
                         std::sqrt(metric_at(m.chart, xb).determinant());
      CHECK(std::abs(vol - 1.0) / s < 5.0);
    }
  }
}

TEST_CASE("analytic metric derivatives match finite differences") {
  for (const auto& n : model_names()) {
    const auto m = make_model(n, 1.3);
    for (Point x : sample_points(m)) {
      x *= 1.3;
      const auto dg = m.chart.raw_derivatives(x);
      for (int k = 0; k < m.dim; ++k) {
        Point xp = x, xm = x;
        xp[k] += 1e-6;
        xm[k] -= 1e-6;
        const Eigen::MatrixXd fd = (m.chart.raw_metric(xp) - m.chart.raw_metric(xm)) / 2e-6;
        CHECK((dg[k] - fd).norm() < 1e-7);
      }
    }
  }
  // Normal coordinates on the sphere near the center use a series branch.
  const auto ball = make_model("ball3");
  const Point near = pt({0.2, 3e-4, -2e-4});
  const auto dg = ball.chart.raw_derivatives(near);
  for (int k = 1; k < 3; ++k) {
    Point xp = near, xm = near;
    xp[k] += 1e-7;
    xm[k] -= 1e-7;
    const Eigen::MatrixXd fd = (ball.chart.raw_metric(xp) - ball.chart.raw_metric(xm)) / 2e-7;
    CHECK((dg[k] - fd).norm() < 1e-7);
  }
}

TEST_CASE("drift") {
  const auto half = make_model("halfspace");
  CHECK(drift_b(half.chart, pt({0.4, 1.0})).norm() == 0.0);

  const auto disk = make_model("disk");
  for (double x1 : {0.0, 0.1, 0.5, 0.9}) {
    const auto b = drift_b(disk.chart, pt({x1, 0.7}));
    CHECK(b[0] == doctest::Approx(-1.0 / (1.0 - x1)).epsilon(1e-12));
    CHECK(b[1] == 0.0);
  }

  for (const char* n : {"disk", "hemisphere", "ball3", "sphere2"}) {
    const auto m = make_model(n);
    for (const auto& x : sample_points(m)) {
      const auto b = drift_b(m.chart, x);
      CHECK((b - drift_oracle(m.chart, x)).norm() < 1e-7);
      if (m.has_boundary()) {
        Point xs = x;
        xs[0] = -x[0];
        const auto bs = drift_b(m.chart, xs);
        CHECK(std::abs(bs[0] + b[0]) < 1e-8);
        CHECK((bs.tail(m.dim - 1) - b.tail(m.dim - 1)).norm() < 1e-8);
      }
    }
  }
}

TEST_CASE("closed-form curvature") {
  CHECK(curvature_at(make_model("interval"), pt({0.5})).max_abs() == 0.0);
  const auto s2 = curvature_at(make_model("sphere2"), pt({0.1, 0.2}));
  CHECK(s2(0, 1, 0, 1) == 1.0);
  CHECK(s2(0, 1, 1, 0) == -1.0);
  CHECK(curvature_at(make_model("ball3"), pt({0.3, 0.1, 0.1})).max_abs() == 0.0);
  CHECK(curvature_at(make_model("hemisphere", 2.0), pt({0.3, 0.1}))(0, 1, 0, 1) ==
        doctest::Approx(0.25));
  for (const auto& n : model_names()) {
    const auto m = make_model(n);
    CHECK(curvature_at(m, sample_points(m).front()).symmetry_defect() == 0.0);
  }
  CHECK(CurvatureTensor::constant_curvature(4, 0.7).symmetry_defect() == 0.0);
}

TEST_CASE("finite-difference Christoffel route reproduces the closed forms") {
  for (const char* n : {"disk", "hemisphere", "sphere2", "ball3"}) {
    for (double c : {1.0, 0.7}) {
      const auto m = make_model(n, c);
      for (Point x : sample_points(m)) {
        x *= c;
        const Eigen::MatrixXd g = metric_at(m.chart, x);
        const auto coord = coordinate_curvature(m.chart, x);
        CHECK(coord.symmetry_defect() < 1e-8 / (c * c));
        const auto on = to_orthonormal(coord, g);
        const auto closed = curvature_at(m, x);
        double diff = 0.0;
        for (int i = 0; i < m.dim; ++i)
          for (int j = 0; j < m.dim; ++j)
            for (int k = 0; k < m.dim; ++k)
              for (int l = 0; l < m.dim; ++l)
                diff = std::max(diff, std::abs(on(i, j, k, l) - closed(i, j, k, l)));
        CHECK(diff < 1e-7 / (c * c));
      }
    }
  }
}

TEST_CASE("second fundamental forms") {
  CHECK(second_fundamental_form_at(make_model("hemisphere"), pt({1.0})).matrix()(0, 0) == 0.0);
  CHECK(second_fundamental_form_at(make_model("disk"), pt({2.0})).matrix()(0, 0) ==
        doctest::Approx(1.0));
  CHECK(second_fundamental_form_at(make_model("disk", 4.0), pt({2.0})).matrix()(0, 0) ==
        doctest::Approx(0.25));
  CHECK(second_fundamental_form_at(make_model("interval"), Point(0)).dim() == 0);
  const auto ball = make_model("ball3");
  for (const Point& y : {pt({0.0, 0.0}), pt({0.7, -1.1}), pt({2.5, 0.3})}) {
    const auto h = second_fundamental_form_at(ball, y).matrix();
    CHECK((h - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);
  }
  CHECK_THROWS_AS(second_fundamental_form_at(make_model("sphere2"), pt({0.0})),
                  std::invalid_argument);
}

TEST_CASE("Gauss-Codazzi restriction") {
  // H = 0: plain restriction of the tangential block.
  const auto r = CurvatureTensor::constant_curvature(3, 0.8);
  const auto rb = gauss_codazzi_restrict(r, SecondFundamentalForm(Eigen::MatrixXd::Zero(2, 2)));
  CHECK(rb(0, 1, 0, 1) == 0.8);
  CHECK(rb(0, 1, 1, 0) == -0.8);

  // Unit ball: flat interior, umbilic boundary gives the unit sphere.
  const auto ball = make_model("ball3");
  const auto sphere = gauss_codazzi_restrict(curvature_at(ball, pt({0.0, 0.3, 0.2})),
                                             second_fundamental_form_at(ball, pt({0.3, 0.2})));
  const auto unit = CurvatureTensor::constant_curvature(2, 1.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) CHECK(sphere(i, j, k, l) == doctest::Approx(unit(i, j, k, l)));

  // Disk: the boundary is a curve.
  const auto disk = make_model("disk");
  const auto curve = gauss_codazzi_restrict(curvature_at(disk, pt({0.0, 0.0})),
                                            second_fundamental_form_at(disk, pt({0.0})));
  CHECK(curve.dim() == 1);
  CHECK(curve.max_abs() == 0.0);

  // Lift inverts restrict.
  const SecondFundamentalForm h((Eigen::MatrixXd(2, 2) << 0.3, 0.1, 0.1, -0.5).finished());
  const auto back = gauss_codazzi_lift(gauss_codazzi_restrict(r, h), h);
  CHECK(back(0, 1, 0, 1) == doctest::Approx(0.8));
}

TEST_CASE("parallel transport") {
  // Flat half-space: identity along any path.
  const auto half = make_model("halfspace");
  std::vector<Point> wiggle;
  for (int k = 0; k <= 50; ++k) wiggle.push_back(pt({1.0 + 0.3 * std::sin(0.4 * k), 0.1 * k}));
  CHECK((parallel_transport(half.chart, wiggle).matrix() - Eigen::MatrixXd::Identity(2, 2))
            .norm() == 0.0);

  // Flat disk in polar-type coordinates: trivial holonomy around a loop.
  const auto disk = make_model("disk");
  std::vector<Point> loop;
  for (int k = 0; k <= 2000; ++k) {
    const double a = 2 * kPi * k / 2000.0;
    loop.push_back(pt({0.5 + 0.2 * std::cos(a), 0.3 * std::sin(a)}));
  }
  CHECK((parallel_transport(disk.chart, loop).matrix() - Eigen::MatrixXd::Identity(2, 2)).norm() <
        1e-8);

  // Latitude loop on the unit sphere at colatitude θ.
  const auto s2 = make_model("sphere2");
  for (double theta : {0.4, 1.0, 1.3}) {
    std::vector<Point> lat;
    const int n = 10000;
    for (int k = 0; k <= n; ++k) lat.push_back(pt({kPi / 2 - theta, 2 * kPi * k / n}));
    const auto t = parallel_transport(s2.chart, lat);
    const double expected = 2 * kPi * (1 - std::cos(theta));
    const double got = rotation_angle(t);
    CHECK(std::min(angle_distance(got, expected), angle_distance(-got, expected)) < 1e-3);
    CHECK((t.matrix().transpose() * t.matrix() - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-6);
  }

  // Leaving the chart mid-path is an error.
  CHECK_THROWS_AS(parallel_transport(disk.chart, {pt({0.5, 0.0}), pt({1.2, 0.0})}),
                  ChartDomainError);
}

TEST_CASE("holonomy of small loops is linear in their area") {
  // Circle of geodesic radius ~√t around a point of S²: ‖τ − I‖ ≈ √2·π t.
  const auto s2 = make_model("sphere2");
  std::vector<double> lx, ly;
  for (double t : {0.1, 0.05, 0.025}) {
    const double r = std::sqrt(t);
    std::vector<Point> loop;
    for (int k = 0; k <= 4000; ++k) {
      const double a = 2 * kPi * k / 4000.0;
      loop.push_back(pt({0.2 + r * std::cos(a), r * std::sin(a) / std::cos(0.2)}));
    }
    const auto tau = parallel_transport(s2.chart, loop);
    lx.push_back(std::log(t));
    ly.push_back(std::log((tau.matrix() - Eigen::MatrixXd::Identity(2, 2)).norm()));
  }
  const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 3; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  CHECK(sxy / sxx == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("curvature action reproduces the supertrace of the Euler form") {
  // d = 2: str Ω = 2K.
  const auto omega = gbc::exterior::apply_curvature(
      curvature_action(CurvatureTensor::constant_curvature(2, 0.6)));
  CHECK(gbc::exterior::supertrace(omega) == doctest::Approx(1.2));
}
