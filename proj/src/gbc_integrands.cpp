#include "gbc/gbc_integrands.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include <fmt/format.h>

#include "gbc/quadrature.hpp"

namespace gbc::integrands {

using exterior::Endomorphism;
using exterior::GradedOperator;

namespace {

constexpr double kPi = std::numbers::pi;

double factorial(int n) { return std::tgamma(n + 1.0); }

struct Matching {
  double sign;
  std::vector<std::pair<int, int>> pairs;
};

void matchings_rec(std::vector<int>& rest, Matching& cur, std::vector<Matching>& out) {
  if (rest.empty()) {
    out.push_back(cur);
    return;
  }
  const int first = rest.front();
  for (std::size_t j = 1; j < rest.size(); ++j) {
    std::vector<int> sub;
    for (std::size_t r = 1; r < rest.size(); ++r)
      if (r != j) sub.push_back(rest[r]);
    const double s = (j % 2 == 1) ? 1.0 : -1.0;
    cur.sign *= s;
    cur.pairs.emplace_back(first, rest[j]);
    matchings_rec(sub, cur, out);
    cur.pairs.pop_back();
    cur.sign *= s;
  }
}

std::vector<Matching> perfect_matchings(int d) {
  std::vector<int> all(d);
  for (int i = 0; i < d; ++i) all[i] = i;
  Matching cur{1.0, {}};
  std::vector<Matching> out;
  matchings_rec(all, cur, out);
  return out;
}

GradedOperator omega_of(const CurvatureTensor& r) {
  return exterior::apply_curvature(geometry::curvature_action(r));
}

}  // namespace

double euler_density_from_curvature(const CurvatureTensor& r) {
  const int d = r.dim();
  if (d % 2 == 1) return 0.0;
  const int m = d / 2;
  // F^{(kl)}_{ab} = R_abkl; e = (2π)^{-m} Σ_ν sgn ν · [x_1⋯x_m] Pf(Σ x_i F^{(ν_i)}).
  double total = 0.0;
  for (const auto& nu : perfect_matchings(d)) {
    std::vector<Eigen::MatrixXd> f;
    for (auto [k, l] : nu.pairs) {
      Eigen::MatrixXd fk(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) fk(a, b) = r(a, b, k, l);
      f.push_back(0.5 * (fk - fk.transpose()));
    }
    double mixed = 0.0;
    for (std::uint32_t s = 1; s < (1u << m); ++s) {
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
      int used = 0;
      for (int i = 0; i < m; ++i)
        if (s >> i & 1u) {
          sum += f[i];
          ++used;
        }
      mixed += ((m - used) % 2 == 0 ? 1.0 : -1.0) *
               exterior::pfaffian(exterior::AntisymmetricMatrix(sum));
    }
    total += nu.sign * mixed;
  }
  return total / std::pow(2.0 * kPi, m);
}

double euler_density_supertrace(const CurvatureTensor& r) {
  const int d = r.dim();
  if (d % 2 == 1) return 0.0;
  const int m = d / 2;
  return exterior::supertrace(exterior::power(omega_of(r), m)) /
         (std::pow(4.0 * kPi, m) * factorial(m));
}

double euler_form_density(const ManifoldModel& model, const Point& x) {
  if (model.dim % 2 == 1) return 0.0;
  return euler_density_from_curvature(geometry::curvature_at(model, x));
}

double boundary_coefficient(int d, int p, int q) {
  if (d < 1 || p < 0 || q < 0 || 2 * p + q != d - 1)
    throw std::invalid_argument(fmt::format(
        "boundary coefficient needs 2p + q = d - 1, got d={} p={} q={}", d, p, q));
  return (q % 2 == 0 ? 1.0 : -1.0) /
         (2.0 * std::pow(4.0 * kPi, 0.5 * (d - 1)) * factorial(p) * std::tgamma(0.5 * q + 1.0));
}

std::vector<BoundaryTerm> boundary_coefficient_table(int d) {
  std::vector<BoundaryTerm> out;
  for (int p = 0; 2 * p <= d - 1; ++p) {
    const int q = d - 1 - 2 * p;
    out.push_back({p, q, boundary_coefficient(d, p, q)});
  }
  return out;
}

BoundaryRoutes boundary_integrand_routes(const CurvatureTensor& r, const SecondFundamentalForm& h) {
  const int d = r.dim();
  if (h.dim() != d - 1) throw std::invalid_argument("second fundamental form dimension mismatch");
  const auto table = boundary_coefficient_table(d);

  // Ambient: Λ*ℝ^d with Q projecting away the normal direction e_0.
  Eigen::MatrixXd hfull = Eigen::MatrixXd::Zero(d, d);
  if (d > 1) hfull.bottomRightCorner(d - 1, d - 1) = h.matrix();
  const GradedOperator omega = omega_of(r);
  const GradedOperator dh = exterior::extend_derivation(Endomorphism(hfull));
  const GradedOperator q_proj = exterior::tangential_projection(d);
  double ambient = 0.0;
  for (const auto& t : table)
    ambient += t.coefficient *
               exterior::supertrace(exterior::power(omega, t.p) * exterior::power(dh, t.q) * q_proj);

  // Intrinsic: Λ*ℝ^{d−1}, curvature rebuilt from R̄ and H.
  double intrinsic = 0.0;
  if (d == 1) {
    intrinsic = table.front().coefficient;  // s̄tr(1) on Λ*ℝ^0
  } else {
    const CurvatureTensor rbar = geometry::gauss_codazzi_restrict(r, h);
    const CurvatureTensor rtan = geometry::gauss_codazzi_lift(rbar, h);
    const GradedOperator omega_t = omega_of(rtan);
    const GradedOperator dh_t = exterior::extend_derivation(Endomorphism(h.matrix()));
    for (const auto& t : table)
      intrinsic += t.coefficient *
                   exterior::supertrace(exterior::power(omega_t, t.p) * exterior::power(dh_t, t.q));
  }
  return {ambient, intrinsic};
}

double boundary_integrand(const CurvatureTensor& r, const SecondFundamentalForm& h) {
  const auto routes = boundary_integrand_routes(r, h);
  if (std::abs(routes.ambient - routes.intrinsic) > kRouteTolerance)
    throw ConventionError(fmt::format(
        "ambient ({:.17g}) and intrinsic ({:.17g}) boundary integrands disagree: sign "
        "conventions are inconsistent",
        routes.ambient, routes.intrinsic));
  return routes.intrinsic;
}

double boundary_integrand(const ManifoldModel& model, const Point& xbar) {
  if (!model.has_boundary()) throw std::invalid_argument(model.name + " has no boundary");
  Point x(model.dim);
  x[0] = 0.0;
  x.tail(model.dim - 1) = xbar;
  return boundary_integrand(geometry::curvature_at(model, x),
                            geometry::second_fundamental_form_at(model, xbar));
}

double interior_integral(const ManifoldModel& model, int nodes) {
  if (!model.compact)
    throw std::domain_error(model.name + " is not compact; the Euler integral diverges");
  if (model.dim % 2 == 1) return 0.0;
  if (!model.interior_box) throw std::logic_error(model.name + " has no interior chart box");
  const auto& box = *model.interior_box;
  const int d = model.dim;
  std::vector<QuadratureRule> rules;
  for (int i = 0; i < d; ++i) rules.push_back(gauss_legendre(nodes, box.lo[i], box.hi[i]));
  std::vector<int> idx(d, 0);
  double sum = 0.0;
  while (true) {
    Point x(d);
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      x[i] = rules[i].nodes[idx[i]];
      w *= rules[i].weights[idx[i]];
    }
    const double vol = std::sqrt(geometry::double_metric_at(model.chart, x).determinant());
    sum += w * vol * euler_form_density(model, x);
    int i = 0;
    while (i < d && ++idx[i] == nodes) idx[i++] = 0;
    if (i == d) break;
  }
  return sum;
}

double boundary_integral(const ManifoldModel& model, int nodes) {
  if (!model.compact) throw std::domain_error(model.name + " is not compact");
  double sum = 0.0;
  for (const auto& node : model.boundary_nodes(nodes))
    sum += node.weight * boundary_integrand(model, node.xbar);
  return sum;
}

EulerCharacteristicReport integrate_euler_characteristic(const ManifoldModel& model) {
  EulerCharacteristicReport rep;
  rep.model = model.name;
  rep.interior = interior_integral(model, 64);
  rep.boundary = boundary_integral(model, 64);
  rep.quadrature_error = std::abs(rep.interior - interior_integral(model, 32)) +
                         std::abs(rep.boundary - boundary_integral(model, 32));
  if (rep.quadrature_error > kQuadratureThreshold)
    throw std::runtime_error(fmt::format("quadrature did not converge on {}: error estimate {:.3g}",
                                         model.name, rep.quadrature_error));
  rep.total = rep.interior + rep.boundary;
  rep.expected = model.euler_characteristic;
  rep.abs_error = std::abs(rep.total - rep.expected);
  return rep;
}

nlohmann::json to_json(const EulerCharacteristicReport& r) {
  return {{"model", r.model},       {"interior", r.interior}, {"boundary", r.boundary},
          {"total", r.total},       {"expected", r.expected}, {"abs_error", r.abs_error},
          {"quadrature_error", r.quadrature_error}};
}

std::string csv_header() { return "model,interior,boundary,total,expected,abs_error"; }

std::string to_csv_row(const EulerCharacteristicReport& r) {
  return fmt::format("{},{:.17g},{:.17g},{:.17g},{},{:.17g}", r.model, r.interior, r.boundary,
                     r.total, r.expected, r.abs_error);
}

}  // namespace gbc::integrands
