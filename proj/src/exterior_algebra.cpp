#include "gbc/exterior_algebra.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gbc::exterior {

namespace {

struct BasisTables {
  // masks[d][k], index[d][mask]
  std::vector<std::vector<std::vector<std::uint32_t>>> masks;
  std::vector<std::vector<int>> index;

  BasisTables() : masks(kMaxDim + 1), index(kMaxDim + 1) {
    for (int d = 0; d <= kMaxDim; ++d) {
      masks[d].resize(d + 1);
      index[d].assign(std::size_t{1} << d, -1);
      // Recursive lexicographic enumeration.
      for (int k = 0; k <= d; ++k) {
        std::vector<int> sel(k);
        for (int i = 0; i < k; ++i) sel[i] = i;
        while (true) {
          std::uint32_t m = 0;
          for (int v : sel) m |= 1u << v;
          index[d][m] = static_cast<int>(masks[d][k].size());
          masks[d][k].push_back(m);
          int i = k - 1;
          while (i >= 0 && sel[i] == d - k + i) --i;
          if (i < 0) break;
          ++sel[i];
          for (int j = i + 1; j < k; ++j) sel[j] = sel[j - 1] + 1;
        }
      }
    }
  }
};

const BasisTables& tables() {
  static const BasisTables t;
  return t;
}

void check_dim(int d, int lo) {
  if (d < lo || d > kMaxDim)
    throw std::invalid_argument("exterior algebra dimension " + std::to_string(d) +
                                " outside [" + std::to_string(lo) + ", " +
                                std::to_string(kMaxDim) + "]");
}

double det_of(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 1.0;
  return m.partialPivLu().determinant();
}

}  // namespace

int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<int>(r);
}

const std::vector<std::uint32_t>& basis(int dim, int degree) {
  check_dim(dim, 0);
  if (degree < 0 || degree > dim) throw std::invalid_argument("degree out of range");
  return tables().masks[dim][degree];
}

int basis_index(int dim, std::uint32_t mask) {
  check_dim(dim, 0);
  if (mask >= (std::uint32_t{1} << dim)) throw std::invalid_argument("mask out of range");
  return tables().index[dim][mask];
}

// ---------------------------------------------------------------- Endomorphism

Endomorphism::Endomorphism(Eigen::MatrixXd entries) : m_(std::move(entries)) {
  if (m_.rows() != m_.cols()) throw std::invalid_argument("endomorphism must be square");
  check_dim(static_cast<int>(m_.rows()), 1);
  if (!m_.allFinite()) throw std::invalid_argument("endomorphism entries must be finite");
}

Endomorphism Endomorphism::identity(int dim) {
  check_dim(dim, 1);
  return Endomorphism(Eigen::MatrixXd::Identity(dim, dim));
}

Endomorphism Endomorphism::zero(int dim) {
  check_dim(dim, 1);
  return Endomorphism(Eigen::MatrixXd::Zero(dim, dim));
}

Endomorphism Endomorphism::elementary(int dim, int row, int col) {
  check_dim(dim, 1);
  if (row < 0 || row >= dim || col < 0 || col >= dim)
    throw std::invalid_argument("elementary index out of range");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  m(row, col) = 1.0;
  return Endomorphism(std::move(m));
}

// -------------------------------------------------------------- GradedOperator

GradedOperator::GradedOperator(int dim, std::vector<Eigen::MatrixXd> blocks)
    : dim_(dim), blocks_(std::move(blocks)) {
  check_dim(dim, 0);
  if (static_cast<int>(blocks_.size()) != dim + 1)
    throw std::invalid_argument("graded operator needs dim+1 blocks");
  for (int k = 0; k <= dim; ++k) {
    const int n = binomial(dim, k);
    if (blocks_[k].rows() != n || blocks_[k].cols() != n)
      throw std::invalid_argument("block " + std::to_string(k) + " must be " +
                                  std::to_string(n) + "x" + std::to_string(n));
  }
}

GradedOperator GradedOperator::identity(int dim) {
  return diagonal(dim, std::vector<double>(dim + 1, 1.0));
}

GradedOperator GradedOperator::zero(int dim) {
  return diagonal(dim, std::vector<double>(dim + 1, 0.0));
}

GradedOperator GradedOperator::diagonal(int dim, const std::vector<double>& per_degree) {
  check_dim(dim, 0);
  if (static_cast<int>(per_degree.size()) != dim + 1)
    throw std::invalid_argument("need one scalar per degree");
  std::vector<Eigen::MatrixXd> b;
  b.reserve(dim + 1);
  for (int k = 0; k <= dim; ++k) {
    const int n = binomial(dim, k);
    b.push_back(per_degree[k] * Eigen::MatrixXd::Identity(n, n));
  }
  return GradedOperator(dim, std::move(b));
}

double GradedOperator::max_abs() const {
  double m = 0.0;
  for (const auto& b : blocks_) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

double GradedOperator::trace_scale() const {
  double s = 0.0;
  for (const auto& b : blocks_) s += b.norm() * std::sqrt(static_cast<double>(b.rows()));
  return s;
}

GradedOperator GradedOperator::operator*(const GradedOperator& rhs) const {
  if (rhs.dim_ != dim_) throw std::invalid_argument("graded operator dimension mismatch");
  std::vector<Eigen::MatrixXd> b(dim_ + 1);
  for (int k = 0; k <= dim_; ++k) b[k].noalias() = blocks_[k] * rhs.blocks_[k];
  return GradedOperator(dim_, std::move(b));
}

GradedOperator GradedOperator::operator+(const GradedOperator& rhs) const {
  GradedOperator out = *this;
  out += rhs;
  return out;
}

GradedOperator GradedOperator::operator-(const GradedOperator& rhs) const {
  return *this + (-1.0) * rhs;
}

GradedOperator GradedOperator::operator*(double s) const {
  GradedOperator out = *this;
  for (auto& b : out.blocks_) b *= s;
  return out;
}

GradedOperator& GradedOperator::operator+=(const GradedOperator& rhs) {
  if (rhs.dim_ != dim_) throw std::invalid_argument("graded operator dimension mismatch");
  for (int k = 0; k <= dim_; ++k) blocks_[k] += rhs.blocks_[k];
  return *this;
}

GradedOperator operator*(double s, const GradedOperator& g) { return g * s; }

GradedOperator power(const GradedOperator& g, int n) {
  if (n < 0) throw std::invalid_argument("negative power");
  GradedOperator out = GradedOperator::identity(g.dim());
  for (int i = 0; i < n; ++i) out = out * g;
  return out;
}

double supertrace(const GradedOperator& g) {
  double s = 0.0;
  for (int k = 0; k <= g.dim(); ++k) s += (k % 2 == 0 ? 1.0 : -1.0) * g.block(k).trace();
  return s;
}

// ------------------------------------------------------------------ extensions

GradedOperator extend_derivation(const Endomorphism& t) {
  const int d = t.dim();
  std::vector<Eigen::MatrixXd> blocks(d + 1);
  blocks[0] = Eigen::MatrixXd::Zero(1, 1);
  for (int k = 1; k <= d; ++k) {
    const auto& masks = basis(d, k);
    const int n = static_cast<int>(masks.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (int c = 0; c < n; ++c) {
      const std::uint32_t in = masks[c];
      for (int i = 0; i < d; ++i) {
        if (!(in >> i & 1u)) continue;
        const std::uint32_t rest = in & ~(1u << i);
        for (int m = 0; m < d; ++m) {
          const double v = t(m, i);
          if (v == 0.0) continue;
          if (m == i) {
            b(c, c) += v;
            continue;
          }
          if (rest >> m & 1u) continue;
          const int lo = std::min(i, m), hi = std::max(i, m);
          const std::uint32_t between = rest & (((1u << hi) - 1u) & ~((1u << (lo + 1)) - 1u));
          const double sign = (std::popcount(between) % 2 == 0) ? 1.0 : -1.0;
          b(basis_index(d, rest | (1u << m)), c) += sign * v;
        }
      }
    }
    blocks[k] = std::move(b);
  }
  return GradedOperator(d, std::move(blocks));
}

GradedOperator extend_multiplicative(const Endomorphism& t) {
  const int d = t.dim();
  std::vector<Eigen::MatrixXd> blocks(d + 1);
  blocks[0] = Eigen::MatrixXd::Ones(1, 1);
  for (int k = 1; k <= d; ++k) {
    const auto& masks = basis(d, k);
    const int n = static_cast<int>(masks.size());
    Eigen::MatrixXd b(n, n);
    std::vector<int> ri(k), ci(k);
    for (int r = 0; r < n; ++r) {
      for (int j = 0, p = 0; j < d; ++j)
        if (masks[r] >> j & 1u) ri[p++] = j;
      for (int c = 0; c < n; ++c) {
        for (int j = 0, p = 0; j < d; ++j)
          if (masks[c] >> j & 1u) ci[p++] = j;
        Eigen::MatrixXd minor(k, k);
        for (int a = 0; a < k; ++a)
          for (int bb = 0; bb < k; ++bb) minor(a, bb) = t(ri[a], ci[bb]);
        b(r, c) = det_of(minor);
      }
    }
    blocks[k] = std::move(b);
  }
  return GradedOperator(d, std::move(blocks));
}

GradedOperator tangential_projection(int dim) {
  check_dim(dim, 1);
  std::vector<Eigen::MatrixXd> blocks(dim + 1);
  for (int k = 0; k <= dim; ++k) {
    const auto& masks = basis(dim, k);
    Eigen::VectorXd diag(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) diag[i] = (masks[i] & 1u) ? 0.0 : 1.0;
    blocks[k] = diag.asDiagonal();
  }
  return GradedOperator(dim, std::move(blocks));
}

GradedOperator normal_projection(int dim) {
  return GradedOperator::identity(dim) - tangential_projection(dim);
}

// ---------------------------------------------------------------------- Patodi

double patodi_supertrace(std::span<const Endomorphism> ts) {
  if (ts.empty()) throw std::invalid_argument("patodi_supertrace needs at least one factor");
  const int d = ts.front().dim();
  for (const auto& t : ts)
    if (t.dim() != d) throw std::invalid_argument("factors must share dimension");
  const int l = static_cast<int>(ts.size());
  if (l > d)
    throw std::invalid_argument("patodi_supertrace: l > d is outside the cancellation lemma; "
                                "use direct_supertrace");
  if (l < d) return 0.0;
  // Inclusion-exclusion over subsets extracts the coefficient of x_1⋯x_l.
  double coef = 0.0;
  for (std::uint32_t s = 1; s < (1u << l); ++s) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < l; ++i)
      if (s >> i & 1u) sum += ts[i].matrix();
    const int missing = l - std::popcount(s);
    coef += (missing % 2 == 0 ? 1.0 : -1.0) * det_of(sum);
  }
  return (d % 2 == 0 ? 1.0 : -1.0) * coef;
}

double direct_supertrace(std::span<const Endomorphism> ts) {
  if (ts.empty()) throw std::invalid_argument("direct_supertrace needs at least one factor");
  GradedOperator acc = extend_derivation(ts.front());
  for (std::size_t i = 1; i < ts.size(); ++i) acc = acc * extend_derivation(ts[i]);
  return supertrace(acc);
}

// ------------------------------------------------------------------- Pfaffian

AntisymmetricMatrix::AntisymmetricMatrix(Eigen::MatrixXd entries) : m_(std::move(entries)) {
  if (m_.rows() != m_.cols()) throw std::invalid_argument("antisymmetric matrix must be square");
  if (m_.rows() == 0 || m_.rows() % 2 != 0)
    throw std::invalid_argument("pfaffian needs a positive even dimension, got " +
                                std::to_string(m_.rows()));
  if (m_.rows() > kMaxDim) throw std::invalid_argument("antisymmetric matrix too large");
  if (!m_.allFinite()) throw std::invalid_argument("antisymmetric matrix must be finite");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if ((m_ + m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("matrix is not antisymmetric");
}

namespace {

double pf_rec(const Eigen::MatrixXd& a, std::vector<int>& idx) {
  if (idx.empty()) return 1.0;
  const int first = idx.front();
  double s = 0.0;
  for (std::size_t j = 1; j < idx.size(); ++j) {
    const double v = a(first, idx[j]);
    if (v == 0.0) continue;
    std::vector<int> sub;
    sub.reserve(idx.size() - 2);
    for (std::size_t r = 1; r < idx.size(); ++r)
      if (r != j) sub.push_back(idx[r]);
    s += ((j % 2 == 1) ? 1.0 : -1.0) * v * pf_rec(a, sub);
  }
  return s;
}

}  // namespace

double pfaffian(const AntisymmetricMatrix& a) {
  std::vector<int> idx(a.dim());
  for (int i = 0; i < a.dim(); ++i) idx[i] = i;
  return pf_rec(a.matrix(), idx);
}

// ----------------------------------------------------------- CurvatureAction

CurvatureAction::CurvatureAction(int dim,
                                 std::vector<std::pair<Endomorphism, Endomorphism>> pairs)
    : dim_(dim) {
  check_dim(dim, 1);
  for (auto& p : pairs) add(std::move(p.first), std::move(p.second));
}

void CurvatureAction::add(Endomorphism a, Endomorphism b) {
  if (a.dim() != dim_ || b.dim() != dim_)
    throw std::invalid_argument("curvature pair dimension mismatch");
  pairs_.emplace_back(std::move(a), std::move(b));
}

GradedOperator apply_curvature(const CurvatureAction& omega) {
  GradedOperator out = GradedOperator::zero(omega.dim());
  for (const auto& [a, b] : omega.pairs()) out += extend_derivation(a) * extend_derivation(b);
  return out;
}

}  // namespace gbc::exterior
