#include "gbc/feynman_kac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "gbc/gbc_integrands.hpp"
#include "gbc/quadrature.hpp"

namespace gbc::feynman_kac {

using exterior::Endomorphism;
using stochastic::RngStream;

namespace {

constexpr double kPi = std::numbers::pi;

struct Running {
  std::size_t n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double std_error() const {
    return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  }
};

double factorial(int n) { return std::tgamma(n + 1.0); }

// Position on M: the double folded by x¹ ↦ |x¹|.
Point on_manifold(const PathSample& path, std::size_t k) {
  Point x = path.position(k);
  x[0] = std::abs(x[0]);
  return x;
}

Point boundary_point(const PathSample& path, std::size_t k) {
  const Point x = path.position(k);
  return x.tail(x.size() - 1);
}

GradedOperator omega_of(int dim, double sectional) {
  return exterior::apply_curvature(
      geometry::curvature_action(geometry::CurvatureTensor::constant_curvature(dim, sectional)));
}

GradedOperator h_extension(const geometry::SecondFundamentalForm& h) {
  const int d = h.dim() + 1;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(d, d);
  if (d > 1) full.bottomRightCorner(d - 1, d - 1) = h.matrix();
  return exterior::extend_derivation(Endomorphism(full));
}

bool flat_double(const ManifoldModel& model) {
  return model.name == "interval" || model.name == "halfspace";
}

}  // namespace

ProjectionPair ProjectionPair::of_dim(int dim) {
  return {exterior::normal_projection(dim), exterior::tangential_projection(dim)};
}

OmegaField omega_field(const ManifoldModel& model) {
  // Every registered model has constant sectional curvature, so Ω is the same
  // operator in every orthonormal frame.
  const GradedOperator omega = omega_of(model.dim, model.sectional_curvature);
  return [omega](const Point&) { return omega; };
}

HField h_field(const ManifoldModel& model) {
  if (!model.has_boundary()) {
    const GradedOperator zero = GradedOperator::zero(model.dim);
    return [zero](const Point&) { return zero; };
  }
  return [&chart = model.chart](const Point& xbar) {
    return h_extension(geometry::second_fundamental_form(chart, xbar));
  };
}

OmegaField zero_omega(int dim) {
  const GradedOperator zero = GradedOperator::zero(dim);
  return [zero](const Point&) { return zero; };
}

HField constant_h(const GradedOperator& h) {
  return [h](const Point&) { return h; };
}

GradedOperator interior_product(const PathSample& path, const OmegaField& omega, std::size_t begin,
                                std::size_t end) {
  if (end > path.steps() || begin > end) throw std::out_of_range("interior product range");
  const GradedOperator id = GradedOperator::identity(path.dim);
  GradedOperator m = id;
  for (std::size_t k = begin; k < end; ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    m = m * (id + omega(on_manifold(path, k)) * (0.5 * dt));
  }
  return m;
}

MultiplicativeState evolve_state(const PathSample& path, const OmegaField& omega, const HField& h) {
  const int d = path.dim;
  const std::size_t n = path.steps();
  if (path.local_time.size() != n + 1)
    throw std::invalid_argument("evolve_M needs a path with local time");
  for (std::size_t k = 0; k < n; ++k)
    if (path.local_time[k + 1] < path.local_time[k])
      throw NonMonotoneLocalTime(fmt::format("local time decreases at step {}", k));

  const GradedOperator id = GradedOperator::identity(d);
  const auto [P, Q] = ProjectionPair::of_dim(d);
  MultiplicativeState s{id, Q, P, std::nullopt, false, 0.0};
  GradedOperator restart = id;  // Z_{t*}·e(t*, t)

  auto visit = [&](std::size_t k) {
    s.Y = GradedOperator::zero(d);
    restart = s.Z;
    s.last_exit = path.times[k];
  };
  if (path.first_hit && *path.first_hit == 0) {
    s.hit = true;
    s.Z = s.M * Q;
    visit(0);
    s.M = s.Y + s.Z;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    const double dl = path.local_time[k + 1] - path.local_time[k];
    const GradedOperator half_omega = omega(on_manifold(path, k)) * (0.5 * dt);
    if (!s.hit) {
      s.M = s.M * (id + half_omega);
      s.Z = s.M * Q;
      s.Y = s.M * P;
      if (path.first_hit && *path.first_hit == k + 1) {
        // Right-continuous jump at T: Y drops to 0, Z is continuous.
        s.hit = true;
        if (dl > 0.0) s.Z = s.Z + s.M * (h(boundary_point(path, k + 1)) * -dl) * Q;
        visit(k + 1);
      }
    } else if (dl > 0.0) {
      const GradedOperator m = s.Y + s.Z;
      s.Z = s.Z + m * (h(boundary_point(path, k + 1)) * -dl) * Q;
      s.Z = s.Z + s.Z * half_omega * Q;
      visit(k + 1);
    } else {
      const GradedOperator m = s.Y + s.Z;
      s.Z = s.Z + m * half_omega * Q;
      restart = restart * (id + half_omega);
      s.Y = restart * P;
    }
    s.M = s.Y + s.Z;
    s.max_split_defect = std::max(s.max_split_defect, (s.M * Q - s.Z).max_abs());
  }
  return s;
}

GradedOperator evolve_M(const PathSample& path, const OmegaField& omega, const HField& h) {
  return evolve_state(path, omega, h).M;
}

std::vector<ExpansionTerm> expansion_terms(double t, double l, const GradedOperator& omega0,
                                           const GradedOperator& h0, double max_order) {
  const int d = omega0.dim();
  const GradedOperator Q = exterior::tangential_projection(d);
  std::vector<ExpansionTerm> out;
  for (int p = 0; p <= max_order; ++p) {
    const GradedOperator op = exterior::power(omega0, p);
    for (int q = 0; p + 0.5 * q <= max_order; ++q) {
      const double c = std::pow(t, p) * std::pow(l, q) / (factorial(p) * factorial(q)) *
                       (q % 2 == 0 ? 1.0 : -1.0) * std::pow(2.0, -p);
      out.push_back({p, q, op * exterior::power(h0, q) * Q * c});
    }
  }
  return out;
}

std::vector<ExpansionTerm> expansion_terms(const PathSample& path, const GradedOperator& omega0,
                                           const GradedOperator& h0, double max_order) {
  return expansion_terms(path.times.back(), path.final_local_time(), omega0, h0, max_order);
}

double sphere_heat_diagonal(double t, double c) {
  if (!(t > 0.0)) throw std::invalid_argument("heat kernel needs t > 0");
  double sum = 0.0;
  for (int l = 0;; ++l) {
    const double term = (2.0 * l + 1.0) / (4.0 * kPi * c * c) * std::exp(-l * (l + 1.0) * t / (2.0 * c * c));
    sum += term;
    if (l > 0 && term < 1e-17 * sum) break;
  }
  return sum;
}

SupertraceEstimate mc_supertrace(const ManifoldModel& model, double t, const Point& x,
                                 std::size_t paths, int steps, std::uint64_t seed) {
  SupertraceEstimate e;
  e.t = t;
  e.paths = paths;
  e.steps = steps;
  e.seed = seed;
  const OmegaField omega = omega_field(model);
  if (flat_double(model)) {
    if (x[0] < 0.0) throw geometry::ChartDomainError("supertrace point is not in M");
    const HField h = h_field(model);
    const Point xs = stochastic::mirror(x);
    const double qxx = stochastic::heat_kernel_double(model, t, x, x);
    const double qxs = stochastic::heat_kernel_double(model, t, x, xs);
    Running in, bd;
    for (std::size_t j = 0; j < paths; ++j) {
      RngStream rng(seed, j);
      const PathSample p = stochastic::sample_double_bridge(model, x, x, t, steps, rng);
      in.add(p.first_hit ? 0.0 : exterior::supertrace(evolve_M(p, omega, h)));
    }
    for (std::size_t j = 0; j < paths; ++j) {
      RngStream rng(seed, paths + j);
      const PathSample p = stochastic::sample_double_bridge(model, x, xs, t, steps, rng);
      bd.add(exterior::supertrace(evolve_M(p, omega, h)));
    }
    e.interior = qxx * in.mean;
    e.interior_se = qxx * in.std_error();
    e.boundary = 2.0 * qxs * bd.mean;
    e.boundary_se = 2.0 * qxs * bd.std_error();
    return e;
  }
  if (model.name != "sphere2")
    throw stochastic::UnsupportedModel(fmt::format(
        "{} has no image-sum double; supported models are interval, halfspace and sphere2",
        model.name));
  Running in;
  for (std::size_t j = 0; j < paths; ++j) {
    RngStream rng(seed, j);
    const PathSample p = stochastic::sample_chart_bridge(model, x, x, t, steps, rng);
    std::vector<Point> poly;
    for (std::size_t k = 0; k <= p.steps(); ++k) poly.push_back(p.position(k));
    const Eigen::MatrixXd tau = geometry::parallel_transport(model.chart, poly).matrix();
    const GradedOperator u_inv = exterior::extend_multiplicative(Endomorphism(tau.transpose()));
    in.add(exterior::supertrace(interior_product(p, omega, 0, p.steps()) * u_inv));
  }
  const double pxx = sphere_heat_diagonal(t, model.scale);
  e.interior = pxx * in.mean;
  e.interior_se = pxx * in.std_error();
  return e;
}

McKeanSingerReport mckean_singer_interval(const ManifoldModel& model, double t, std::size_t paths,
                                          int steps, std::uint64_t seed) {
  if (model.name != "interval")
    throw stochastic::UnsupportedModel("the McKean-Singer reconstruction runs on the interval");
  const double c = model.scale;
  McKeanSingerReport r;
  r.t = t;
  r.paths = paths;
  r.steps = steps;
  r.seed = seed;

  // Peaks of width √t/2 sit at both ends, so use composite panels.
  constexpr int kPanels = 32;
  for (int i = 0; i < kPanels; ++i) {
    const auto rule = gauss_legendre(32, c * i / kPanels, c * (i + 1) / kPanels);
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const Point x = Point::Constant(1, rule.nodes[k]);
      r.boundary_closed +=
          rule.weights[k] * 2.0 * stochastic::heat_kernel_double(model, t, x, stochastic::mirror(x));
    }
  }

  const OmegaField omega = omega_field(model);
  const HField h = h_field(model);
  Running in, bd;
  r.min_hit_supertrace = std::numeric_limits<double>::infinity();
  r.max_hit_supertrace = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < paths; ++j) {
    RngStream rng(seed, j);
    const Point x = Point::Constant(1, c * rng.uniform());
    const PathSample p = stochastic::sample_double_bridge(model, x, x, t, steps, rng);
    const double s = exterior::supertrace(evolve_M(p, omega, h));
    if (p.first_hit) {
      r.min_hit_supertrace = std::min(r.min_hit_supertrace, s);
      r.max_hit_supertrace = std::max(r.max_hit_supertrace, s);
      ++r.hitting_paths;
      in.add(0.0);
    } else {
      in.add(c * stochastic::heat_kernel_double(model, t, x, x) * s);
    }
  }
  for (std::size_t j = 0; j < paths; ++j) {
    RngStream rng(seed, paths + j);
    const Point x = Point::Constant(1, c * rng.uniform());
    const Point xs = stochastic::mirror(x);
    const PathSample p = stochastic::sample_double_bridge(model, x, xs, t, steps, rng);
    const double s = exterior::supertrace(evolve_M(p, omega, h));
    r.min_hit_supertrace = std::min(r.min_hit_supertrace, s);
    r.max_hit_supertrace = std::max(r.max_hit_supertrace, s);
    ++r.hitting_paths;
    bd.add(c * 2.0 * stochastic::heat_kernel_double(model, t, x, xs) * s);
  }
  r.interior = in.mean;
  r.boundary_mc = bd.mean;
  r.boundary_mc_se = bd.std_error();
  return r;
}

LimitCoefficient boundary_limit_coefficient(const ManifoldModel& model, const Point& xbar, int p,
                                            int q, const std::vector<double>& t_grid,
                                            std::size_t paths, int steps, std::uint64_t seed) {
  if (!model.has_boundary()) throw std::invalid_argument(model.name + " has no boundary");
  if (p < 0 || q < 0) throw std::invalid_argument("p and q must be non-negative");
  const int d = model.dim;
  if (xbar.size() != d - 1) throw std::invalid_argument("boundary point has the wrong dimension");

  const GradedOperator omega0 = omega_field(model)(Point::Zero(d));
  const GradedOperator h0 = h_field(model)(xbar);
  const GradedOperator Q = exterior::tangential_projection(d);
  const double s = exterior::supertrace(exterior::power(omega0, p) * exterior::power(h0, q) * Q);

  LimitCoefficient out;
  out.p = p;
  out.q = q;
  out.closed_form = 2 * p + q == d - 1 ? integrands::boundary_coefficient(d, p, q) * s : 0.0;

  const auto rule = gauss_legendre(stochastic::kMomentNodes, 0.0, stochastic::kMomentUpper);
  std::vector<double> f(rule.nodes.size());
  double fsum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = rule.weights[i] * std::exp(-2.0 * rule.nodes[i] * rule.nodes[i]);
    fsum += f[i];
  }
  const double coef = (q % 2 == 0 ? 1.0 : -1.0) * std::pow(2.0, -p) / (factorial(p) * factorial(q)) * s;
  std::size_t used = 0;
  for (double t : t_grid) {
    const double pre = 2.0 / (std::pow(2.0 * kPi, 0.5 * d) * std::pow(t, 0.5 * (d - 1)));
    double est = 0.0, var = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto share = static_cast<std::size_t>(std::llround(static_cast<double>(paths) * f[i] / fsum));
      const std::size_t count = std::max(stochastic::kMinPathsPerNode, share);
      const double a = std::sqrt(t) * rule.nodes[i];
      Running acc;
      for (std::size_t j = 0; j < count; ++j) {
        RngStream rng(seed, used + j);
        const double l = stochastic::flat_bridge_local_time(a, -a, t, steps, rng);
        acc.add(coef * std::pow(t, p) * std::pow(l, q));
      }
      used += count;
      est += f[i] * acc.mean;
      var += f[i] * f[i] * acc.std_error() * acc.std_error();
    }
    out.t.push_back(t);
    out.estimate.push_back(pre * est);
    out.std_error.push_back(pre * std::sqrt(var));
  }
  return out;
}

TransportMoments parallel_correction_moments(const ManifoldModel& model, const Point& x,
                                             const std::vector<double>& t_grid, int order,
                                             std::size_t paths, int steps, std::uint64_t seed) {
  if (order < 1) throw std::invalid_argument("transport moment order must be ≥ 1");
  TransportMoments out;
  out.order = order;
  const int d = model.dim;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    Running acc;
    for (std::size_t j = 0; j < paths; ++j) {
      RngStream rng(seed, i * paths + j);
      const PathSample p = stochastic::sample_chart_bridge(model, x, x, t_grid[i], steps, rng);
      std::vector<Point> poly;
      for (std::size_t k = 0; k <= p.steps(); ++k)
        poly.push_back(model.has_boundary() ? on_manifold(p, k) : p.position(k));
      const Eigen::MatrixXd tau = geometry::parallel_transport(model.chart, poly).matrix();
      acc.add(std::pow((tau.transpose() - id).norm(), order));
    }
    out.t.push_back(t_grid[i]);
    out.moment.push_back(acc.mean);
    out.std_error.push_back(acc.std_error());
  }
  out.trivial = std::all_of(out.moment.begin(), out.moment.end(),
                            [](double m) { return m == 0.0; });
  if (out.trivial) {
    out.slope = std::numeric_limits<double>::quiet_NaN();
    out.slope_se = std::numeric_limits<double>::quiet_NaN();
  } else {
    const auto fit = stochastic::loglog_fit(out.t, out.moment, out.std_error);
    out.slope = fit.slope;
    out.slope_se = fit.slope_se;
  }
  return out;
}

}  // namespace gbc::feynman_kac
