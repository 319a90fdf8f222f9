#include "gbc/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "gbc/quadrature.hpp"

namespace gbc::stochastic {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;
// Bridge hitting probability exp(−2ab/h) below e^{-40} is treated as zero.
constexpr double kHitExponentCutoff = 40.0;
constexpr double kImageCutoff = 1e-16;
constexpr std::size_t kMinHits = 100;

enum class Double { line, circle };

Double double_of(const ManifoldModel& model) {
  if (model.name == "halfspace") return Double::line;
  if (model.name == "interval") return Double::circle;
  throw UnsupportedModel(fmt::format(
      "{} has no flat or image-sum double; supported models are halfspace and interval",
      model.name));
}

void check_steps(int steps) {
  if (steps < kMinSteps)
    throw StepTooCoarse(fmt::format("{} steps is too coarse; at least {} required", steps,
                                    kMinSteps));
}

// Wrap into (−c, c].
double wrap_circle(double w, double c) {
  if (w > -c && w <= c) return w;
  double r = std::fmod(w + c, 2.0 * c);
  if (r <= 0.0) r += 2.0 * c;
  return r - c;
}

// Local time at 0 of a Brownian bridge from a to b over time h, drawn from
// P(L > y) = exp(−((|a| + |b| + y)² − (a − b)²)/(2h)).
double bridge_local_time(double a, double b, double h, RngStream& rng) {
  if (a * b > 0.0 && 2.0 * a * b / h > kHitExponentCutoff) return 0.0;
  const double u = rng.uniform();
  const double y = std::sqrt((a - b) * (a - b) - 2.0 * h * std::log(u)) - std::abs(a) -
                   std::abs(b);
  return std::max(0.0, y);
}

double phi(double x, double t) { return std::exp(-x * x / (2.0 * t)) / std::sqrt(2.0 * kPi * t); }

PathSample empty_path(int dim, double t, int steps, double half_period) {
  PathSample p;
  p.dim = dim;
  p.half_period = half_period;
  p.times.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) p.times[k] = t * static_cast<double>(k) / steps;
  p.coords.assign(static_cast<std::size_t>(steps + 1) * dim, 0.0);
  return p;
}

// first_hit and last_exit from the increments of local_time.
void index_contacts(PathSample& p, bool starts_on_boundary) {
  const std::size_t n = p.times.size();
  p.last_exit.assign(n, std::nullopt);
  p.first_hit.reset();
  std::optional<std::size_t> last;
  if (starts_on_boundary) last = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && p.local_time[k] > p.local_time[k - 1]) last = k;
    p.last_exit[k] = last;
  }
  if (!p.last_exit.empty()) {
    for (std::size_t k = 0; k < n; ++k)
      if (p.last_exit[k]) {
        p.first_hit = *p.last_exit[k];
        break;
      }
  }
}

double boundary_distance(const PathSample& p, std::size_t k) {
  const double w = std::abs(p.normal(k));
  return p.half_period > 0.0 ? std::min(w, p.half_period - w) : w;
}

// Endpoints of step k relative to the boundary level nearest its start.
std::pair<double, double> step_offsets(const PathSample& p, std::size_t k) {
  const double a = p.normal(k);
  double b = p.normal(k + 1);
  if (p.half_period <= 0.0) return {a, b};
  const double c = p.half_period;
  if (b - a > c) b -= 2.0 * c;
  if (a - b > c) b += 2.0 * c;
  const double level = c * std::round(a / c);
  return {a - level, b - level};
}

struct Running {
  std::size_t n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double std_error() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

}  // namespace

std::uint64_t default_seed() {
  if (const char* s = std::getenv("GBC_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt::format("GBC_SEED must be an unsigned integer, got '{}'", s));
    }
  }
  return 20240229;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

double RngStream::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

Point PathSample::position(std::size_t k) const {
  return Eigen::Map<const Eigen::VectorXd>(coords.data() + k * dim, dim);
}

void BridgeSpec::validate() const {
  if (!(u >= 0.0)) throw std::invalid_argument(fmt::format("bridge start u must be ≥ 0, got {}", u));
  check_steps(steps);
}

Point mirror(const Point& x) {
  Point y = x;
  y[0] = -y[0];
  return y;
}

PathSample simulate_rbm(const ManifoldModel& model, const Point& x0, double t, int steps,
                        RngStream& rng) {
  check_steps(steps);
  if (!(t > 0.0)) throw std::invalid_argument("simulate_rbm needs t > 0");
  const Double kind = double_of(model);
  if (x0.size() != model.dim) throw std::invalid_argument("start point has the wrong dimension");
  const double c = kind == Double::circle ? model.scale : std::numeric_limits<double>::infinity();
  if (x0[0] < 0.0 || x0[0] > c)
    throw geometry::ChartDomainError(fmt::format("start point x¹ = {} is not in M", x0[0]));

  const int d = model.dim;
  PathSample p = empty_path(d, t, steps, kind == Double::circle ? c : 0.0);
  p.local_time.assign(steps + 1, 0.0);
  const double h = t / steps, sh = std::sqrt(h);
  for (int i = 0; i < d; ++i) p.coords[i] = x0[i];
  double x = x0[0];
  double sign = 1.0;
  for (int k = 0; k < steps; ++k) {
    // Distance to the nearer boundary point; reflect there.
    const bool far_side = kind == Double::circle && x > 0.5 * c;
    const double y = far_side ? c - x : x;
    const double b = y + sh * rng.normal();
    double dl = 0.0;
    if (!(b > 0.0 && 2.0 * y * b / h > kHitExponentCutoff)) {
      const double u = rng.uniform();
      const double m = 0.5 * (y + b - std::sqrt((y - b) * (y - b) - 2.0 * h * std::log(u)));
      dl = std::max(0.0, -m);
    }
    double xn = far_side ? c - (b + dl) : b + dl;
    if (kind == Double::circle)
      while (xn < 0.0 || xn > c) xn = xn < 0.0 ? -xn : 2.0 * c - xn;
    if (dl > 0.0) sign = rng.coin() ? 1.0 : -1.0;
    x = xn;
    const std::size_t row = static_cast<std::size_t>(k + 1) * d;
    p.coords[row] = (kind == Double::circle && x == c) ? c : sign * x;
    for (int i = 1; i < d; ++i) p.coords[row + i] = p.coords[row - d + i] + sh * rng.normal();
    p.local_time[k + 1] = p.local_time[k] + dl;
  }
  index_contacts(p, x0[0] == 0.0 || x0[0] == c);
  return p;
}

PathSample reflect_path(const PathSample& path, std::optional<std::size_t> first_hit) {
  PathSample out = path;
  if (!first_hit) return out;
  for (std::size_t k = *first_hit; k < out.times.size(); ++k) {
    double w = -out.normal(k);
    if (out.half_period > 0.0 && w == -out.half_period) w = out.half_period;
    out.normal(k) = w;
  }
  return out;
}

double heat_kernel_double(const ManifoldModel& model, double t, const Point& x, const Point& y) {
  if (!(t > 0.0)) throw std::invalid_argument("heat kernel needs t > 0");
  if (x.size() != model.dim || y.size() != model.dim)
    throw std::invalid_argument("heat kernel points have the wrong dimension");
  if (double_of(model) == Double::line)
    return std::pow(2.0 * kPi * t, -0.5 * model.dim) * std::exp(-(x - y).squaredNorm() / (2.0 * t));
  const double c = model.scale;
  const double r = y[0] - x[0];
  double sum = phi(r, t);
  for (int k = 1;; ++k) {
    const double up = phi(r + 2.0 * c * k, t), down = phi(r - 2.0 * c * k, t);
    sum += up + down;
    if (up < kImageCutoff && down < kImageCutoff) break;
  }
  return sum;
}

double neumann_kernel(const ManifoldModel& model, double t, const Point& x, const Point& y) {
  return heat_kernel_double(model, t, x, y) + heat_kernel_double(model, t, x, mirror(y));
}

PathSample sample_bridge(const BridgeSpec& spec, RngStream& rng) {
  spec.validate();
  const int n = spec.steps;
  PathSample p = empty_path(1, 1.0, n, 0.0);
  const double sh = std::sqrt(1.0 / n);
  double w = 0.0;
  for (int k = 1; k <= n; ++k) {
    w += sh * rng.normal();
    p.coords[k] = w;
  }
  const double wn = w;
  for (int k = 0; k < n; ++k)
    p.coords[k] = spec.u + p.coords[k] - p.times[k] * (wn + 2.0 * spec.u);
  p.coords[n] = -spec.u;
  p.last_exit.assign(n + 1, std::nullopt);
  return p;
}

PathSample sample_double_bridge(const ManifoldModel& model, const Point& x, const Point& y,
                                double t, int steps, RngStream& rng) {
  check_steps(steps);
  if (!(t > 0.0)) throw std::invalid_argument("bridge needs t > 0");
  const Double kind = double_of(model);
  const int d = model.dim;
  if (x.size() != d || y.size() != d) throw std::invalid_argument("bridge endpoints have the wrong dimension");
  const double c = model.scale;

  // Winding number on the circle, drawn from the image-sum weights.
  Point target = y;
  if (kind == Double::circle) {
    const double r = y[0] - x[0];
    std::vector<std::pair<int, double>> images{{0, phi(r, t)}};
    for (int k = 1;; ++k) {
      const double up = phi(r + 2.0 * c * k, t), down = phi(r - 2.0 * c * k, t);
      images.emplace_back(k, up);
      images.emplace_back(-k, down);
      if (up < kImageCutoff && down < kImageCutoff) break;
    }
    double total = 0.0;
    for (auto& [k, w] : images) total += w;
    double pick = rng.uniform() * total;
    int winding = 0;
    for (auto& [k, w] : images) {
      winding = k;
      if ((pick -= w) <= 0.0) break;
    }
    target[0] = y[0] + 2.0 * c * winding;
  }

  PathSample p = empty_path(d, t, steps, kind == Double::circle ? c : 0.0);
  p.local_time.assign(steps + 1, 0.0);
  const double h = t / steps, sh = std::sqrt(h);
  for (int i = 0; i < d; ++i) {
    double w = 0.0;
    for (int k = 1; k <= steps; ++k) {
      w += sh * rng.normal();
      p.coords[static_cast<std::size_t>(k) * d + i] = w;
    }
    const double wn = w;
    for (int k = 0; k < steps; ++k) {
      const double s = p.times[k] / t;
      auto& v = p.coords[static_cast<std::size_t>(k) * d + i];
      v = x[i] + v - s * (wn + x[i] - target[i]);
    }
    p.coords[static_cast<std::size_t>(steps) * d + i] = target[i];
  }
  for (int k = 0; k < steps; ++k) {
    const double a = p.coords[static_cast<std::size_t>(k) * d];
    const double b = p.coords[static_cast<std::size_t>(k + 1) * d];
    const double level = kind == Double::circle ? c * std::round(a / c) : 0.0;
    p.local_time[k + 1] = p.local_time[k] + bridge_local_time(a - level, b - level, h, rng);
  }
  if (kind == Double::circle) {
    for (int k = 0; k <= steps; ++k) {
      auto& v = p.coords[static_cast<std::size_t>(k) * d];
      v = wrap_circle(v, c);
    }
    p.coords[static_cast<std::size_t>(steps) * d] = wrap_circle(y[0], c);
  }
  const double x1 = std::abs(wrap_circle(x[0], kind == Double::circle ? c : 1e300));
  index_contacts(p, x1 == 0.0 || (kind == Double::circle && x1 == c));
  return p;
}

double flat_bridge_local_time(double a, double b, double t, int steps, RngStream& rng) {
  check_steps(steps);
  if (!(t > 0.0)) throw std::invalid_argument("bridge needs t > 0");
  const double h = t / steps, sh = std::sqrt(h);
  std::vector<double> w(steps + 1, 0.0);
  for (int k = 1; k <= steps; ++k) w[k] = w[k - 1] + sh * rng.normal();
  const double wn = w[steps];
  for (int k = 0; k < steps; ++k) w[k] = a + w[k] - (static_cast<double>(k) / steps) * (wn + a - b);
  w[steps] = b;
  double l = 0.0;
  for (int k = 0; k < steps; ++k) l += bridge_local_time(w[k], w[k + 1], h, rng);
  return l;
}

PathSample sample_chart_bridge(const ManifoldModel& model, const Point& x, const Point& y,
                               double t, int steps, RngStream& rng) {
  check_steps(steps);
  if (!(t > 0.0)) throw std::invalid_argument("bridge needs t > 0");
  const int d = model.dim;
  if (x.size() != d || y.size() != d) throw std::invalid_argument("bridge endpoints have the wrong dimension");
  PathSample p = empty_path(d, t, steps, 0.0);
  const double h = t / steps, sh = std::sqrt(h);
  Point cur = x;
  Eigen::VectorXd xi(d);
  for (int i = 0; i < d; ++i) p.coords[i] = x[i];
  for (int k = 0; k + 1 < steps; ++k) {
    const Eigen::MatrixXd g = geometry::double_metric_at(model.chart, cur);
    const Eigen::MatrixXd sigma = g.inverse().llt().matrixL();
    const Eigen::VectorXd b = geometry::drift_b(model.chart, cur);
    for (int i = 0; i < d; ++i) xi[i] = rng.normal();
    const double remaining = t - p.times[k];
    cur += (0.5 * b + (y - cur) / remaining) * h + sigma * xi * sh;
    for (int i = 0; i < d; ++i) p.coords[static_cast<std::size_t>(k + 1) * d + i] = cur[i];
  }
  for (int i = 0; i < d; ++i) p.coords[static_cast<std::size_t>(steps) * d + i] = y[i];
  p.last_exit.assign(steps + 1, std::nullopt);
  return p;
}

double occupation_local_time(const PathSample& path, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("occupation window must be positive");
  const std::size_t n = path.steps();
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    const double inside = (boundary_distance(path, k) < eps ? 0.5 : 0.0) +
                          (boundary_distance(path, k + 1) < eps ? 0.5 : 0.0);
    sum += dt * inside;
  }
  return sum / (2.0 * eps);
}

double occupation_local_time_coarse(const PathSample& path) {
  const std::size_t n = path.steps();
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("coarse occupation needs an even step count");
  const double h2 = path.times[2] - path.times[0];
  const double eps = kOccupationWidth * std::sqrt(h2);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; k += 2) {
    const double dt = path.times[k + 2] - path.times[k];
    const double inside = (boundary_distance(path, k) < eps ? 0.5 : 0.0) +
                          (boundary_distance(path, k + 2) < eps ? 0.5 : 0.0);
    sum += dt * inside;
  }
  return sum / (2.0 * eps);
}

double local_time_bridge(const PathSample& path) {
  const double h = path.times.back() / static_cast<double>(path.steps());
  const double fine = occupation_local_time(path, kOccupationWidth * std::sqrt(h));
  const double coarse = occupation_local_time_coarse(path);
  return (kSqrt2 * fine - coarse) / (kSqrt2 - 1.0);
}

double downcrossing_local_time(const PathSample& path) {
  const std::size_t n = path.steps();
  if (n == 0) return 0.0;
  const double h = path.times.back() / static_cast<double>(n);
  const double eps = kDowncrossingLevel * std::sqrt(h);
  // Expected number of passages from the boundary up to level ε, given the
  // grid. Boundary hits inside a step come from the bridge law; ε is only
  // monitored on the grid, hence the barrier shift. States: not yet touched
  // (below ε or armed), touched and below ε, touched and armed.
  const double d0 = boundary_distance(path, 0);
  double fresh = d0 > 0.0 && d0 < eps ? 1.0 : 0.0;
  double fresh_armed = d0 >= eps ? 1.0 : 0.0;
  double low = d0 == 0.0 ? 1.0 : 0.0;
  double armed = 0.0;
  double ups = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto [a, b] = step_offsets(path, k);
    const double dt = path.times[k + 1] - path.times[k];
    const double hit = a * b <= 0.0 ? 1.0 : std::exp(-2.0 * a * b / dt);
    low += hit * (fresh + fresh_armed + armed);
    fresh *= 1.0 - hit;
    fresh_armed *= 1.0 - hit;
    armed *= 1.0 - hit;
    if (boundary_distance(path, k + 1) >= eps) {
      ups += low;
      armed += low;
      fresh_armed += fresh;
      low = fresh = 0.0;
    }
  }
  return (eps + kBarrierShift * std::sqrt(h)) * ups;
}

double moment_closed_form(int q) {
  return std::tgamma(q + 1.0) / (std::pow(2.0, 0.5 * q + 2.0) * std::tgamma(0.5 * q + 1.0));
}

std::vector<MomentEstimate> moment_integrals(const std::vector<int>& qs, std::size_t paths,
                                             int steps, std::uint64_t seed) {
  for (int q : qs)
    if (q < 0 || q > 6) throw std::invalid_argument(fmt::format("moment order q = {} not in 0..6", q));
  check_steps(steps);
  if (steps % 2 != 0) throw std::invalid_argument("moment integral needs an even step count");

  const auto rule = gauss_legendre(kMomentNodes, 0.0, kMomentUpper);
  std::vector<double> f(rule.nodes.size());
  double fsum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double u = rule.nodes[i];
    f[i] = rule.weights[i] * std::exp(-2.0 * u * u) / std::sqrt(2.0 * kPi);
    fsum += f[i];
  }

  std::vector<MomentEstimate> out(qs.size());
  std::vector<double> var(qs.size(), 0.0);
  std::size_t used = 0;
  const bool need_mc = std::any_of(qs.begin(), qs.end(), [](int q) { return q > 0; });
  const double h = 1.0 / steps;
  for (std::size_t i = 0; need_mc && i < f.size(); ++i) {
    const auto share = static_cast<std::size_t>(std::llround(static_cast<double>(paths) * f[i] / fsum));
    const std::size_t count = std::max(kMinPathsPerNode, share);
    std::vector<Running> acc(qs.size());
    for (std::size_t j = 0; j < count; ++j) {
      RngStream rng(seed, used + j);
      const PathSample path = sample_bridge({rule.nodes[i], steps}, rng);
      const double fine = occupation_local_time(path, kOccupationWidth * std::sqrt(h));
      const double coarse = occupation_local_time_coarse(path);
      for (std::size_t a = 0; a < qs.size(); ++a) {
        // Richardson on the moment: E[f^q] and E[c^q] carry the same √step bias.
        const double z = (kSqrt2 * std::pow(fine, qs[a]) - std::pow(coarse, qs[a])) / (kSqrt2 - 1.0);
        acc[a].add(z);
      }
    }
    used += count;
    for (std::size_t a = 0; a < qs.size(); ++a) {
      out[a].estimate += f[i] * acc[a].mean;
      var[a] += f[i] * f[i] * acc[a].variance() / static_cast<double>(count);
    }
  }
  for (std::size_t a = 0; a < qs.size(); ++a) {
    auto& e = out[a];
    e.q = qs[a];
    e.closed_form = moment_closed_form(qs[a]);
    e.paths = used;
    e.steps = steps;
    e.seed = seed;
    if (qs[a] == 0) {
      // Pure Gaussian integral; no Monte Carlo.
      e.estimate = e.closed_form;
      e.std_error = 0.0;
    } else {
      e.std_error = std::sqrt(var[a]);
    }
  }
  return out;
}

MomentEstimate moment_integral(int q, std::size_t paths, int steps, std::uint64_t seed) {
  return moment_integrals({q}, paths, steps, seed).front();
}

LogLogFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& y_se) {
  const std::size_t m = x.size();
  if (m < 2 || y.size() != m || y_se.size() != m)
    throw std::invalid_argument("log-log fit needs at least two matching points");
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    xbar += std::log(x[i]) / m;
    ybar += std::log(y[i]) / m;
  }
  double sxx = 0.0, sxy = 0.0, var = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = std::log(x[i]) - xbar;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - ybar);
    const double rel = y_se[i] / y[i];
    var += dx * dx * rel * rel;
  }
  return {sxy / sxx, std::sqrt(var) / sxx};
}

std::vector<ScalingResult> local_time_scaling_check(const ManifoldModel& model, const Point& x,
                                                    const std::vector<int>& ns,
                                                    const std::vector<double>& t_grid,
                                                    std::size_t paths, int steps,
                                                    std::uint64_t seed) {
  for (int n : ns)
    if (n < 1 || n > 3) throw std::invalid_argument(fmt::format("scaling order n = {} not in 1..3", n));
  if (t_grid.size() < 2) throw std::invalid_argument("scaling check needs at least two t values");
  double_of(model);

  std::vector<ScalingResult> out(ns.size());
  for (std::size_t a = 0; a < ns.size(); ++a) out[a].n = ns[a];
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    std::vector<Running> acc(ns.size());
    std::size_t hits = 0;
    for (std::size_t j = 0; j < paths; ++j) {
      RngStream rng(seed, i * paths + j);
      const double l = sample_double_bridge(model, x, mirror(x), t, steps, rng).final_local_time();
      if (l > 0.0) ++hits;
      for (std::size_t a = 0; a < ns.size(); ++a) acc[a].add(std::pow(l, ns[a]));
    }
    if (hits < kMinHits)
      throw InsufficientHits(fmt::format("only {} of {} bridges touched the boundary at t = {}",
                                         hits, paths, t));
    for (std::size_t a = 0; a < ns.size(); ++a) {
      out[a].t.push_back(t);
      out[a].moment.push_back(acc[a].mean);
      out[a].moment_se.push_back(acc[a].std_error());
    }
  }
  for (auto& r : out) {
    const LogLogFit fit = loglog_fit(r.t, r.moment, r.moment_se);
    r.slope = fit.slope;
    r.slope_se = fit.slope_se;
  }
  return out;
}

std::vector<ReflectionCheck> reflection_identity_check(const ManifoldModel& model,
                                                       const Point& x, double t,
                                                       std::size_t paths, int steps,
                                                       std::uint64_t seed) {
  double_of(model);
  const Point xs = mirror(x);
  const double ratio = heat_kernel_double(model, t, x, xs) / heat_kernel_double(model, t, x, x);
  const char* names[] = {"1", "l_t", "l_t^2"};
  Running lhs[3], rhs[3];
  for (std::size_t j = 0; j < paths; ++j) {
    RngStream rng(seed, j);
    const PathSample e = sample_double_bridge(model, x, x, t, steps, rng);
    double l = 0.0;
    if (e.first_hit) l = reflect_path(e, e.first_hit).final_local_time();
    const double hit = e.first_hit ? 1.0 : 0.0;
    lhs[0].add(hit);
    lhs[1].add(hit * l);
    lhs[2].add(hit * l * l);
  }
  for (std::size_t j = 0; j < paths; ++j) {
    RngStream rng(seed, paths + j);
    const double l = sample_double_bridge(model, x, xs, t, steps, rng).final_local_time();
    rhs[0].add(1.0);
    rhs[1].add(l);
    rhs[2].add(l * l);
  }
  std::vector<ReflectionCheck> out;
  for (int g = 0; g < 3; ++g) {
    ReflectionCheck c;
    c.functional = names[g];
    c.lhs = lhs[g].mean;
    c.lhs_se = lhs[g].std_error();
    c.rhs = ratio * rhs[g].mean;
    c.rhs_se = ratio * rhs[g].std_error();
    c.pass = std::abs(c.lhs - c.rhs) <= 3.0 * std::hypot(c.lhs_se, c.rhs_se);
    out.push_back(c);
  }
  return out;
}

KernelSplit kernel_split_check(const ManifoldModel& model, const Point& x, double t,
                               std::size_t paths, int steps, std::uint64_t seed) {
  double_of(model);
  const double qxx = heat_kernel_double(model, t, x, x);
  const double qxs = heat_kernel_double(model, t, x, mirror(x));
  Running miss;
  for (std::size_t j = 0; j < paths; ++j) {
    RngStream rng(seed, j);
    miss.add(sample_double_bridge(model, x, x, t, steps, rng).first_hit ? 0.0 : 1.0);
  }
  KernelSplit s;
  s.neumann = qxx + qxs;
  s.no_hit_mass = miss.mean;
  s.no_hit_mass_se = miss.std_error();
  // Every bridge to x* meets the boundary, so its mass is 1.
  s.reconstructed = qxx * miss.mean + 2.0 * qxs;
  s.reconstructed_se = qxx * miss.std_error();
  return s;
}

double disk_drift_sup(double t, double zmax) {
  const double r = std::sqrt(t) * zmax;
  if (r >= 1.0) return std::numeric_limits<double>::infinity();
  return 0.5 * std::sqrt(t) / (1.0 - r);
}

std::vector<BridgeConvergenceRow> scaled_bridge_convergence(const std::vector<double>& t_grid,
                                                            double u, BridgeDrift drift,
                                                            std::size_t paths, int steps,
                                                            std::uint64_t seed) {
  if (!(u >= 0.0 && u <= 3.0)) throw std::invalid_argument(fmt::format("u = {} not in [0, 3]", u));
  check_steps(steps);
  if (steps % 2 != 0) throw std::invalid_argument("bridge convergence needs an even step count");
  const int half = steps / 2;
  const double h = 1.0 / steps, sh = std::sqrt(h);

  std::vector<std::vector<double>> mid(t_grid.size(), std::vector<double>(paths));
  std::vector<double> zmax(t_grid.size(), 0.0);
  std::vector<double> xi(half);
  for (std::size_t j = 0; j < paths; ++j) {
    RngStream rng(seed, j);
    for (auto& v : xi) v = rng.normal();
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      const double st = std::sqrt(t_grid[i]);
      double n = u;
      for (int k = 0; k < half; ++k) {
        const double s = static_cast<double>(k) / steps;
        double a = (-u - n) / (1.0 - s);
        if (drift == BridgeDrift::disk_chart) {
          // b¹ = −sgn(x¹)/(1 − |x¹|) on the doubled unit disk chart.
          const double x1 = st * n;
          if (std::abs(x1) >= 1.0)
            throw geometry::ChartDomainError("scaled path left the disk chart");
          const double b1 = x1 == 0.0 ? 0.0 : -std::copysign(1.0, x1) / (1.0 - std::abs(x1));
          a += 0.5 * st * b1;
        }
        n += a * h + sh * xi[k];
        zmax[i] = std::max(zmax[i], std::abs(n));
      }
      mid[i][j] = n;
    }
  }
  std::vector<BridgeConvergenceRow> out;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    BridgeConvergenceRow r;
    r.t = t_grid[i];
    double m = 0.0;
    for (double v : mid[i]) m += v;
    r.mean = m / static_cast<double>(paths);
    r.ks = ks_distance_normal(mid[i], 0.0, 0.5);
    r.drift_sup = drift == BridgeDrift::disk_chart ? disk_drift_sup(t_grid[i], zmax[i]) : 0.0;
    out.push_back(r);
  }
  return out;
}

double ks_distance_normal(std::vector<double> sample, double mean, double sd) {
  if (sample.empty()) throw std::invalid_argument("KS distance of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = normal_cdf((sample[i] - mean) / sd);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

}  // namespace gbc::stochastic
