#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gbc::exterior {

inline constexpr int kMaxDim = 12;

// Number of k-subsets of a d-set.
int binomial(int n, int k);

// Basis of Λ^k ℝ^d: k-subsets of {0..d-1} as bitmasks, lexicographic order.
const std::vector<std::uint32_t>& basis(int dim, int degree);
// Position of a k-subset (bitmask) inside basis(dim, popcount(mask)).
int basis_index(int dim, std::uint32_t mask);

class Endomorphism {
 public:
  explicit Endomorphism(Eigen::MatrixXd entries);

  static Endomorphism identity(int dim);
  static Endomorphism zero(int dim);
  // E_ij: sends e_j to e_i.
  static Endomorphism elementary(int dim, int row, int col);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  Eigen::MatrixXd m_;
};

// Degree-preserving map on Λ*ℝ^d, one block per degree. dim 0 is allowed
// (Λ*ℝ^0 = ℝ in degree 0) so intrinsic boundary algebra of a 1-manifold works.
class GradedOperator {
 public:
  GradedOperator(int dim, std::vector<Eigen::MatrixXd> blocks);

  static GradedOperator identity(int dim);
  static GradedOperator zero(int dim);
  // Block-diagonal multiple of the identity per degree.
  static GradedOperator diagonal(int dim, const std::vector<double>& per_degree);

  int dim() const { return dim_; }
  const Eigen::MatrixXd& block(int degree) const { return blocks_.at(degree); }
  const std::vector<Eigen::MatrixXd>& blocks() const { return blocks_; }
  double max_abs() const;
  // Σ_k ‖block_k‖_F·√C(d,k): bound on every |Tr| entering the supertrace.
  double trace_scale() const;

  // Composition; the right operand acts first.
  GradedOperator operator*(const GradedOperator& rhs) const;
  GradedOperator operator+(const GradedOperator& rhs) const;
  GradedOperator operator-(const GradedOperator& rhs) const;
  GradedOperator operator*(double s) const;
  GradedOperator& operator+=(const GradedOperator& rhs);

 private:
  int dim_;
  std::vector<Eigen::MatrixXd> blocks_;
};

GradedOperator operator*(double s, const GradedOperator& g);
GradedOperator power(const GradedOperator& g, int n);

double supertrace(const GradedOperator& g);

// T(θ1∧θ2) = Tθ1∧θ2 + θ1∧Tθ2.
GradedOperator extend_derivation(const Endomorphism& t);
// Λ^k T: T(θ1∧θ2) = Tθ1∧Tθ2 (compound matrices).
GradedOperator extend_multiplicative(const Endomorphism& t);

// Projection onto forms without the e_0 factor, and its complement.
GradedOperator tangential_projection(int dim);
GradedOperator normal_projection(int dim);

// str(T_1⋯T_l) via the mixed-determinant coefficient. l < d gives 0,
// l > d throws.
double patodi_supertrace(std::span<const Endomorphism> ts);
// str(extend(T_1)∘⋯∘extend(T_l)) by explicit block products.
double direct_supertrace(std::span<const Endomorphism> ts);

class AntisymmetricMatrix {
 public:
  explicit AntisymmetricMatrix(Eigen::MatrixXd entries);
  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

double pfaffian(const AntisymmetricMatrix& a);

class CurvatureAction {
 public:
  explicit CurvatureAction(int dim) : dim_(dim) {}
  CurvatureAction(int dim, std::vector<std::pair<Endomorphism, Endomorphism>> pairs);

  void add(Endomorphism a, Endomorphism b);
  int dim() const { return dim_; }
  const std::vector<std::pair<Endomorphism, Endomorphism>>& pairs() const { return pairs_; }

 private:
  int dim_;
  std::vector<std::pair<Endomorphism, Endomorphism>> pairs_;
};

GradedOperator apply_curvature(const CurvatureAction& omega);

}  // namespace gbc::exterior
