#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gbc/geometry.hpp"

namespace gbc::geometry {

class UnknownModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BoundaryNode {
  Point xbar;
  double weight;  // boundary measure carried by this node
};

struct ChartBox {
  std::vector<double> lo, hi;
};

struct ManifoldModel {
  ManifoldModel(std::string name_, int dim_, int chi, bool compact_, double scale_,
                SemiGeodesicChart chart_)
      : name(std::move(name_)),
        dim(dim_),
        euler_characteristic(chi),
        compact(compact_),
        scale(scale_),
        chart(std::move(chart_)) {}

  std::string name;
  int dim = 0;
  int euler_characteristic = 0;
  bool compact = true;
  double scale = 1.0;
  SemiGeodesicChart chart;
  // Constant sectional curvature (all registered models have one).
  double sectional_curvature = 0.0;
  // Chart box covering M up to measure zero; empty for non-compact models.
  std::optional<ChartBox> interior_box;
  // Closed-form boundary measure: number of endpoints, length or area.
  double boundary_measure = 0.0;
  // Gauss-Legendre nodes over the boundary parametrization (per axis count).
  std::function<std::vector<BoundaryNode>(int)> boundary_nodes;

  bool has_boundary() const { return chart.has_boundary(); }
};

const std::vector<std::string>& model_names();
// Metric multiplied by scale².
ManifoldModel make_model(std::string_view name, double scale = 1.0);

// Curvature in the orthonormal frame of orthonormal_frame(metric), normal index 0.
CurvatureTensor curvature_at(const ManifoldModel& model, const Point& x);
SecondFundamentalForm second_fundamental_form_at(const ManifoldModel& model, const Point& xbar);

}  // namespace gbc::geometry
