#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gbc/exterior_algebra.hpp"
#include "gbc/geometry.hpp"
#include "gbc/models.hpp"

namespace gbc::integrands {

using geometry::CurvatureTensor;
using geometry::ManifoldModel;
using geometry::Point;
using geometry::SecondFundamentalForm;

// Ambient and intrinsic boundary integrands must agree to this.
inline constexpr double kRouteTolerance = 1e-8;

class ConventionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Euler form from an orthonormal-frame curvature tensor via Pfaffians.
double euler_density_from_curvature(const CurvatureTensor& r);
// Same quantity as str(Ω^m)/((4π)^m m!).
double euler_density_supertrace(const CurvatureTensor& r);
double euler_form_density(const ManifoldModel& model, const Point& x);

struct BoundaryTerm {
  int p;
  int q;
  double coefficient;
};

// (−1)^q / (2(4π)^{(d−1)/2} p! Γ(q/2+1)); requires 2p + q = d − 1.
double boundary_coefficient(int d, int p, int q);
std::vector<BoundaryTerm> boundary_coefficient_table(int d);

struct BoundaryRoutes {
  double ambient;    // Σ c_pq str(Ω^p H^q Q) on Λ*ℝ^d
  double intrinsic;  // Σ c_pq s̄tr(Ω_tan^p H^q) on Λ*ℝ^{d−1}
};

// r: ambient orthonormal curvature with index 0 normal; h: tangential frame.
BoundaryRoutes boundary_integrand_routes(const CurvatureTensor& r, const SecondFundamentalForm& h);
// Checks the routes against kRouteTolerance and returns the intrinsic value.
double boundary_integrand(const CurvatureTensor& r, const SecondFundamentalForm& h);
double boundary_integrand(const ManifoldModel& model, const Point& xbar);

struct EulerCharacteristicReport {
  std::string model;
  double interior = 0.0;
  double boundary = 0.0;
  double total = 0.0;
  int expected = 0;
  double abs_error = 0.0;
  double quadrature_error = 0.0;  // |64-node − 32-node|
};

inline constexpr double kQuadratureThreshold = 1e-9;

EulerCharacteristicReport integrate_euler_characteristic(const ManifoldModel& model);
// ∫_M e_M alone (the closed double needs twice this when ∂M is totally geodesic).
double interior_integral(const ManifoldModel& model, int nodes = 64);
double boundary_integral(const ManifoldModel& model, int nodes = 64);

nlohmann::json to_json(const EulerCharacteristicReport& r);
std::string csv_header();
std::string to_csv_row(const EulerCharacteristicReport& r);

}  // namespace gbc::integrands
