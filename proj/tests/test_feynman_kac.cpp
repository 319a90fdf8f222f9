#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gbc/feynman_kac.hpp"
#include "gbc/gbc_integrands.hpp"

using namespace gbc::feynman_kac;
using gbc::exterior::Endomorphism;
using gbc::exterior::supertrace;
using gbc::geometry::make_model;
using gbc::stochastic::RngStream;

namespace {

constexpr double kPi = std::numbers::pi;

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

double distance(const GradedOperator& a, const GradedOperator& b) { return (a - b).max_abs(); }

GradedOperator h_scalar(double h) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(1, 1) = h;
  return gbc::exterior::extend_derivation(Endomorphism(m));
}

PathSample prefix(const PathSample& p, std::size_t end) {
  PathSample out = p;
  out.times.resize(end + 1);
  out.coords.resize((end + 1) * p.dim);
  out.local_time.resize(end + 1);
  out.last_exit.resize(end + 1);
  if (out.first_hit && *out.first_hit > end) out.first_hit.reset();
  return out;
}

PathSample hitting_rbm(const ManifoldModel& m, const Point& x0, double t, int steps,
                       std::uint64_t stream) {
  for (std::uint64_t s = stream;; ++s) {
    RngStream rng(77, s);
    auto p = gbc::stochastic::simulate_rbm(m, x0, t, steps, rng);
    if (p.first_hit && *p.first_hit > 0) return p;
  }
}

}  // namespace

TEST_CASE("projection pair") {
  for (int d = 1; d <= 4; ++d) {
    const auto [P, Q] = ProjectionPair::of_dim(d);
    CHECK(distance(P * P, P) == 0.0);
    CHECK(distance(Q * Q, Q) == 0.0);
    CHECK((P * Q).max_abs() == 0.0);
    CHECK((Q * P).max_abs() == 0.0);
    CHECK(distance(P + Q, GradedOperator::identity(d)) == 0.0);
  }
}

TEST_CASE("trivial fields") {
  const auto half = make_model("halfspace");
  RngStream rng(1, 0);
  const auto deep = gbc::stochastic::simulate_rbm(half, pt({5.0, 0.0}), 0.01, 200, rng);
  REQUIRE(!deep.first_hit);
  CHECK(distance(evolve_M(deep, zero_omega(2), h_field(half)), GradedOperator::identity(2)) == 0.0);

  const auto interval = make_model("interval");
  int hits = 0;
  for (std::uint64_t j = 0; j < 200; ++j) {
    RngStream r(2, j);
    const auto p = gbc::stochastic::simulate_rbm(interval, pt({0.2}), 0.1, 200, r);
    const auto m = evolve_M(p, omega_field(interval), h_field(interval));
    if (p.first_hit) {
      ++hits;
      CHECK(distance(m, gbc::exterior::tangential_projection(1)) == 0.0);
      CHECK(supertrace(m) == 1.0);
    } else {
      CHECK(supertrace(m) == 0.0);
    }
  }
  CHECK(hits > 20);
}

TEST_CASE("second fundamental form damps the tangential block") {
  // dZ = −hZ dl on Λ¹-tangential; the product Π(1 − hΔl) lies between
  // e^{−hl}·e^{−h²ΣΔl²} and e^{−hl}.
  const auto half = make_model("halfspace");
  for (double h : {1.0, -0.7}) {
    const auto p = hitting_rbm(half, pt({0.05, 0.0}), 0.5, 2000, 3);
    const auto state = evolve_state(p, zero_omega(2), constant_h(h_scalar(h)));
    double sq = 0.0;
    for (std::size_t k = 0; k < p.steps(); ++k) {
      const double dl = p.local_time[k + 1] - p.local_time[k];
      sq += dl * dl;
    }
    const double l = p.final_local_time();
    const int e1 = gbc::exterior::basis_index(2, 0b10);
    const double z = state.Z.block(1)(e1, e1);
    const double upper = std::exp(-h * l), lower = upper * std::exp(-h * h * sq);
    CHECK(z <= upper * (1 + 1e-12));
    CHECK(z >= lower * (1 - 1e-12));
    CHECK(l > 0.1);
  }
}

TEST_CASE("tangential continuity and the Y + Z split") {
  const auto half = make_model("halfspace");
  const auto hemi = make_model("hemisphere");
  const auto omega = omega_field(hemi);
  const auto h = constant_h(h_scalar(0.8));
  const auto p = hitting_rbm(half, pt({0.1, 0.0}), 0.5, 400, 9);
  const std::size_t fh = *p.first_hit;
  const auto state = evolve_state(prefix(p, fh), omega, constant_h(GradedOperator::zero(2)));
  const auto pre = interior_product(p, omega, 0, fh);
  const auto Q = gbc::exterior::tangential_projection(2);
  CHECK(distance(state.Z, pre * Q) < 1e-15);
  CHECK(state.Y.max_abs() == 0.0);
  CHECK(state.hit);
  CHECK(*state.last_exit == p.times[fh]);

  const auto full = evolve_state(p, omega, h);
  CHECK(full.max_split_defect < kSplitTolerance);
  CHECK(distance(full.M, full.Y + full.Z) == 0.0);

  auto bad = p;
  bad.local_time[10] = bad.local_time[11] + 1.0;
  CHECK_THROWS_AS(evolve_M(bad, omega, h), NonMonotoneLocalTime);
}

TEST_CASE("multiplicativity on interior segments") {
  const auto half = make_model("halfspace");
  RngStream rng(3, 3);
  const auto p = gbc::stochastic::simulate_rbm(half, pt({4.0, 0.0}), 0.2, 300, rng);
  REQUIRE(!p.first_hit);
  const auto omega = omega_field(make_model("sphere2"));
  const auto a = interior_product(p, omega, 0, 120);
  const auto b = interior_product(p, omega, 120, 300);
  CHECK(distance(a * b, interior_product(p, omega, 0, 300)) < 1e-13);
  CHECK(distance(evolve_M(p, omega, h_field(half)), interior_product(p, omega, 0, 300)) < 1e-15);
}

TEST_CASE("expansion terms") {
  const auto disk = make_model("disk");
  const auto omega0 = omega_field(disk)(pt({0.0, 0.0}));
  const auto h0 = h_field(disk)(pt({0.4}));
  const auto terms = expansion_terms(0.3, 0.2, omega0, h0, 1.5);
  // (p, q) with p + q/2 ≤ 3/2: (0,0..3), (1,0..1).
  CHECK(terms.size() == 6u);
  CHECK(distance(terms.front().value, gbc::exterior::tangential_projection(2)) == 0.0);
  for (const auto& t : terms) {
    if (2 * t.p + t.q < 1) CHECK(std::abs(supertrace(t.value)) < 1e-9);
    if (t.p == 0 && t.q == 1) CHECK(supertrace(t.value) == doctest::Approx(0.2 * 1.0));
  }

  // Patodi cancellation in the interval and ball3 as well.
  for (const char* name : {"interval", "ball3"}) {
    const auto m = make_model(name);
    const int d = m.dim;
    const auto o = omega_field(m)(Point::Zero(d));
    const auto hh = h_field(m)(Point::Constant(d - 1, 0.3));
    for (const auto& t : expansion_terms(0.7, 0.4, o, hh, 3.0))
      if (2 * t.p + t.q < d - 1) CHECK(std::abs(supertrace(t.value)) < 1e-9 * t.value.trace_scale() + 1e-15);
  }
}

TEST_CASE("sum over orderings of iterated integrals") {
  // Σ over words with p dt's and q dl's of the ordered integrals equals the
  // coefficient of a^p b^q in Π(1 + aΔt + bΔl); it converges to t^p l^q/p!q!
  // with error at most (t + l)^{n−2}/(n−2)!·Σ(Δt + Δl)²/2 for n = p + q.
  const auto half = make_model("halfspace");
  const auto p = hitting_rbm(half, pt({0.02, 0.0}), 1.0, 4000, 0);
  const int kMax = 4;
  std::vector<std::vector<double>> c(kMax + 1, std::vector<double>(kMax + 1, 0.0));
  c[0][0] = 1.0;
  double sq = 0.0;
  for (std::size_t k = 0; k < p.steps(); ++k) {
    const double dt = p.times[k + 1] - p.times[k];
    const double dl = p.local_time[k + 1] - p.local_time[k];
    sq += (dt + dl) * (dt + dl);
    for (int a = kMax; a >= 0; --a)
      for (int b = kMax - a; b >= 0; --b) {
        if (a > 0) c[a][b] += c[a - 1][b] * dt;
        if (b > 0) c[a][b] += c[a][b - 1] * dl;
      }
  }
  const double t = p.times.back(), l = p.final_local_time();
  for (int a = 0; a <= kMax; ++a)
    for (int b = 0; a + b <= kMax; ++b) {
      const int n = a + b;
      const double exact = std::pow(t, a) * std::pow(l, b) / (std::tgamma(a + 1.0) * std::tgamma(b + 1.0));
      const double bound = n < 2 ? 1e-12 : std::pow(t + l, n - 2) / std::tgamma(n - 1.0) * sq / 2.0 *
                                               std::tgamma(n + 1.0) / (std::tgamma(a + 1.0) * std::tgamma(b + 1.0));
      CHECK(std::abs(c[a][b] - exact) <= bound + 1e-12);
    }
}

TEST_CASE("Monte Carlo supertrace on flat doubles") {
  const auto interval = make_model("interval");
  for (double x : {0.0, 0.1, 0.45}) {
    const auto e = mc_supertrace(interval, 0.05, pt({x}), 300, 200, 4);
    CHECK(e.interior == 0.0);
    CHECK(e.boundary_se == 0.0);
    CHECK(e.boundary == doctest::Approx(2.0 * gbc::stochastic::heat_kernel_double(
                                                   interval, 0.05, pt({x}), pt({-x})))
                            .epsilon(1e-15));
  }
  const auto half = make_model("halfspace");
  const auto e = mc_supertrace(half, 0.05, pt({0.1, 0.0}), 200, 200, 4);
  CHECK(e.interior == 0.0);
  CHECK(e.boundary == 0.0);
  CHECK_THROWS_AS(mc_supertrace(make_model("disk"), 0.05, pt({0.1, 0.0}), 10, 200, 4),
                  gbc::stochastic::UnsupportedModel);
}

TEST_CASE("closed sphere: interior supertrace approaches the Euler density") {
  const auto s2 = make_model("sphere2");
  const auto e = mc_supertrace(s2, 0.02, pt({0.0, 0.0}), 400, 200, 5);
  CHECK(e.interior == doctest::Approx(1.0 / (2.0 * kPi)).epsilon(0.1));
  CHECK(e.boundary == 0.0);
}

TEST_CASE("spectral heat kernel on the sphere") {
  CHECK(sphere_heat_diagonal(60.0, 1.0) == doctest::Approx(1.0 / (4.0 * kPi)).epsilon(1e-12));
  for (double t : {0.005, 0.01}) {
    // Small-time expansion (2πt)^{-1}(1 + S t/12) with scalar curvature S = 2.
    CHECK(sphere_heat_diagonal(t, 1.0) == doctest::Approx((1.0 + t / 6.0) / (2.0 * kPi * t)).epsilon(1e-4));
  }
  CHECK(sphere_heat_diagonal(0.04, 2.0) == doctest::Approx(sphere_heat_diagonal(0.01, 1.0) / 4.0).epsilon(1e-13));
}

TEST_CASE("McKean-Singer on the interval") {
  const auto r = mckean_singer_interval(make_model("interval"), 0.05, 4000, 200, 6);
  CHECK(r.interior == 0.0);
  CHECK(std::abs(r.boundary_closed - 1.0) < 1e-6);
  CHECK(r.boundary_mc == doctest::Approx(1.0).epsilon(0.05));
  CHECK(r.min_hit_supertrace == 1.0);
  CHECK(r.max_hit_supertrace == 1.0);
  CHECK(r.hitting_paths >= 4000u);
  CHECK_THROWS_AS(mckean_singer_interval(make_model("disk"), 0.05, 10, 200, 6),
                  gbc::stochastic::UnsupportedModel);
}

TEST_CASE("boundary limit coefficients") {
  const auto interval = make_model("interval");
  const auto c00 = boundary_limit_coefficient(interval, Point(0), 0, 0, {0.1, 0.01}, 400, 200, 1);
  CHECK(c00.closed_form == 0.5);
  for (double v : c00.estimate) CHECK(v == doctest::Approx(0.5).epsilon(1e-10));

  const auto disk = make_model("disk");
  const auto c01 = boundary_limit_coefficient(disk, pt({0.4}), 0, 1, {0.1, 0.01}, 20000, 200, 2);
  CHECK(c01.closed_form == doctest::Approx(gbc::integrands::boundary_integrand(disk, pt({0.4}))));
  CHECK(c01.closed_form == doctest::Approx(1.0 / (2.0 * kPi)));
  for (std::size_t i = 0; i < c01.t.size(); ++i)
    CHECK(std::abs(c01.estimate[i] - c01.closed_form) < 4.0 * c01.std_error[i]);

  // 2p + q above d − 1: the scaled term vanishes like t^{1/2}.
  const auto c02 = boundary_limit_coefficient(disk, pt({0.4}), 0, 2, {0.1, 0.001}, 20000, 200, 3);
  CHECK(c02.closed_form == 0.0);
  CHECK(c02.estimate[1] / c02.estimate[0] == doctest::Approx(std::sqrt(0.01)).epsilon(0.05));
  CHECK_THROWS_AS(boundary_limit_coefficient(make_model("sphere2"), pt({0.0}), 0, 1, {0.1}, 10, 200, 1),
                  std::invalid_argument);
}

TEST_CASE("parallel transport corrections") {
  const auto half = make_model("halfspace");
  const auto flat = parallel_correction_moments(half, pt({0.5, 0.0}), {0.1, 0.05}, 1, 50, 100, 1);
  CHECK(flat.trivial);
  CHECK(std::isnan(flat.slope));
  for (double m : flat.moment) CHECK(m == 0.0);

  const auto s2 = parallel_correction_moments(make_model("sphere2"), pt({0.3, 0.2}),
                                              {0.2, 0.1, 0.05, 0.025}, 1, 300, 100, 2);
  CHECK(!s2.trivial);
  CHECK(s2.slope == doctest::Approx(1.0).epsilon(0.15));
}
