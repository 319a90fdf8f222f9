#pragma once

#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace gbc {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

template <unsigned N>
QuadratureRule legendre_on(double a, double b) {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  QuadratureRule r;
  for (std::size_t i = x.size(); i-- > 0;) {
    if (x[i] == 0.0) continue;
    r.nodes.push_back(mid - half * x[i]);
    r.weights.push_back(half * w[i]);
  }
  if (N % 2 == 1) {
    r.nodes.push_back(mid);
    r.weights.push_back(half * w[0]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    r.nodes.push_back(mid + half * x[i]);
    r.weights.push_back(half * w[i]);
  }
  return r;
}

}  // namespace detail

// Gauss-Legendre rule on [a, b], nodes in increasing order.
inline QuadratureRule gauss_legendre(int n, double a, double b) {
  switch (n) {
    case 8: return detail::legendre_on<8>(a, b);
    case 16: return detail::legendre_on<16>(a, b);
    case 24: return detail::legendre_on<24>(a, b);
    case 32: return detail::legendre_on<32>(a, b);
    case 64: return detail::legendre_on<64>(a, b);
    default: throw std::invalid_argument("unsupported Gauss-Legendre order");
  }
}

}  // namespace gbc
