#include "rwre/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <json.hpp>

#include "rwre/io.hpp"
#include "rwre/stats.hpp"

namespace rwre {

namespace {

constexpr double kPi = std::numbers::pi;

void require_elliptic(const TransitionKernel& p, const char* who) {
  if (!p.strictly_elliptic()) throw std::invalid_argument(std::string(who) + ": kernel is not strictly elliptic");
}

}  // namespace

TransitionKernel::TransitionKernel(int dim, std::span<const double> probs) : dim_(dim) {
  check_dimension(dim);
  if (probs.size() != static_cast<std::size_t>(2 * dim)) {
    throw std::invalid_argument("TransitionKernel: expected " + std::to_string(2 * dim) + " probabilities, got " +
                                std::to_string(probs.size()));
  }
  double total = 0.0;
  for (int i = 0; i < 2 * dim; ++i) {
    if (!(probs[i] >= 0.0) || probs[i] > 1.0) {
      throw std::invalid_argument("TransitionKernel: probability out of [0,1] for " + direction_name(i));
    }
    p_[i] = probs[i];
    total += probs[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("TransitionKernel: probabilities sum to " + std::to_string(total));
  }
}

TransitionKernel TransitionKernel::symmetric(int dim) {
  check_dimension(dim);
  std::array<double, kMaxDirs> p{};
  for (int i = 0; i < 2 * dim; ++i) p[i] = 1.0 / (2.0 * dim);
  return TransitionKernel(dim, std::span<const double>(p.data(), 2 * dim));
}

double TransitionKernel::min_prob() const {
  double m = 1.0;
  for (int i = 0; i < 2 * dim_; ++i) m = std::min(m, p_[i]);
  return m;
}

std::array<double, kMaxDim> TransitionKernel::drift() const {
  std::array<double, kMaxDim> d{};
  for (int a = 0; a < dim_; ++a) d[a] = p_[2 * a] - p_[2 * a + 1];
  return d;
}

TransitionKernel reverse_kernel(const TransitionKernel& p) {
  std::array<double, kMaxDirs> q{};
  for (int i = 0; i < p.num_dirs(); ++i) q[i] = p(opposite(i));
  return TransitionKernel(p.dim(), std::span<const double>(q.data(), p.num_dirs()));
}

double NStepTable::total() const { return pairwise_sum(probs_); }

NStepTable nstep_probability(const TransitionKernel& p, int n, int radius, Exec exec, bool allow_truncation) {
  if (n < 0) throw std::invalid_argument("nstep_probability: negative step count");
  if (radius < 0) throw std::invalid_argument("nstep_probability: negative radius");
  if (radius < n && !allow_truncation) {
    throw std::invalid_argument("nstep_probability: radius " + std::to_string(radius) + " < n = " +
                                std::to_string(n) + " (pass allow_truncation to accept lost mass)");
  }
  const int d = p.dim();
  const Box box = Box::centered(d, Site{}, radius);
  const auto size = static_cast<std::ptrdiff_t>(box.size());
  std::vector<double> cur(box.size(), 0.0), next(box.size(), 0.0);
  cur[box.index(Site{})] = 1.0;
  double lost = 0.0;
  const int nd = p.num_dirs();
  const int workers = worker_count();

  for (int k = 0; k < n; ++k) {
#pragma omp parallel for schedule(static) num_threads(workers) if (exec == Exec::parallel)
    for (std::ptrdiff_t idx = 0; idx < size; ++idx) {
      const Site y = box.site(static_cast<std::size_t>(idx));
      double acc = 0.0;
      for (int dir = 0; dir < nd; ++dir) {
        const int axis = dir / 2;
        const int from = y[axis] - ((dir % 2 == 0) ? 1 : -1);
        if (from < -radius || from > radius) continue;
        const std::ptrdiff_t shift = (dir % 2 == 0 ? -1 : 1) * static_cast<std::ptrdiff_t>(box.stride(axis));
        acc += p(dir) * cur[static_cast<std::size_t>(idx + shift)];
      }
      next[static_cast<std::size_t>(idx)] = acc;
    }
    if (radius <= k) {
      for (std::ptrdiff_t idx = 0; idx < size; ++idx) {
        const double m = cur[static_cast<std::size_t>(idx)];
        if (m == 0.0) continue;
        const Site y = box.site(static_cast<std::size_t>(idx));
        for (int dir = 0; dir < nd; ++dir) {
          if (!box.contains(step(y, dir))) lost += m * p(dir);
        }
      }
    }
    std::swap(cur, next);
  }
  return NStepTable(box, n, std::move(cur), lost);
}

namespace {

// log of the Binomial(n, q) mass at k, with q given through log q and log(1-q).
double log_binom_pmf(const std::vector<double>& lf, int n, int k, double q, double lq, double l1q) {
  if (k < 0 || k > n) return -INFINITY;
  if (q == 0.0) return k == 0 ? 0.0 : -INFINITY;
  if (q == 1.0) return k == n ? 0.0 : -INFINITY;
  return lf[n] - lf[k] - lf[n - k] + k * lq + (n - k) * l1q;
}

struct AxisLaw {
  double weight = 0.0;  // p(e_j) + p(-e_j)
  double up = 0.0;      // p(e_j) / weight
  double lup = 0.0, ldown = 0.0;
  int y = 0;

  // Probability that m steps along this axis end at displacement y.
  double log_reach(const std::vector<double>& lf, int m) const {
    const int ay = y < 0 ? -y : y;
    if (m < ay || ((m + y) & 1)) return -INFINITY;
    return log_binom_pmf(lf, m, (m + y) / 2, up, lup, ldown);
  }
};

}  // namespace

std::vector<double> nstep_probability_at(const TransitionKernel& p, int n_max, const Site& y) {
  if (n_max < 0) throw std::invalid_argument("nstep_probability_at: negative step count");
  const int d = p.dim();
  std::vector<double> lf(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int i = 1; i <= n_max; ++i) lf[i] = std::lgamma(static_cast<double>(i) + 1.0);

  std::vector<AxisLaw> axes(d);
  for (int j = 0; j < d; ++j) {
    AxisLaw& a = axes[j];
    a.weight = p(2 * j) + p(2 * j + 1);
    a.up = a.weight > 0.0 ? p(2 * j) / a.weight : 0.5;
    a.lup = std::log(a.up);
    a.ldown = std::log1p(-a.up);
    a.y = y[j];
  }

  // r[n] = law of the walk restricted to axes j..d-1 (renormalised) at step n.
  std::vector<double> r(static_cast<std::size_t>(n_max) + 1);
  {
    const AxisLaw& last = axes[d - 1];
    for (int n = 0; n <= n_max; ++n) {
      if (last.weight > 0.0) {
        r[n] = std::exp(last.log_reach(lf, n));
      } else {
        r[n] = (n == 0 && last.y == 0) ? 1.0 : 0.0;
      }
    }
  }
  double tail_weight = axes[d - 1].weight;
  for (int j = d - 2; j >= 0; --j) {
    const AxisLaw& a = axes[j];
    const double total = a.weight + tail_weight;
    const double q = total > 0.0 ? a.weight / total : 0.0;
    const double lq = std::log(q);
    const double l1q = std::log1p(-q);
    std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
    const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 64) num_threads(workers)
    for (int n = 0; n <= n_max; ++n) {
      // Only m within 12 standard deviations of n q contributes above 1e-31.
      const double mu = n * q;
      const double sd = std::sqrt(n * q * (1.0 - q));
      int lo = std::max(0, static_cast<int>(std::floor(mu - 12.0 * sd)) - 1);
      int hi = std::min(n, static_cast<int>(std::ceil(mu + 12.0 * sd)) + 1);
      double acc = 0.0;
      for (int m = lo; m <= hi; ++m) {
        const double rest = r[n - m];
        if (rest == 0.0) continue;
        double la = log_binom_pmf(lf, n, m, q, lq, l1q);
        if (a.weight > 0.0) {
          la += a.log_reach(lf, m);
        } else if (a.y != 0) {
          la = -INFINITY;
        }
        if (la == -INFINITY) continue;
        acc += std::exp(la) * rest;
      }
      out[n] = acc;
    }
    r = std::move(out);
    tail_weight = total;
  }
  return r;
}

namespace {

TruncatedSum summarize_partial_sums(const std::vector<double>& at_minus_x, const std::vector<double>& at_origin,
                                    double requested_tol) {
  const int n_max = static_cast<int>(at_origin.size()) - 1;
  std::vector<double> partial(at_origin.size());
  double s = 0.0;
  for (int k = 0; k <= n_max; ++k) {
    s += at_minus_x[k] - at_origin[k];
    partial[k] = s;
  }
  auto averaged = [&](int m) { return m >= 1 ? 0.5 * (partial[m] + partial[m - 1]) : partial[0]; };

  TruncatedSum out;
  out.n_max = n_max;
  out.last_partial = partial[n_max];
  out.value = averaged(n_max);
  if (n_max >= 8) {
    const double a4 = averaged(n_max / 4);
    const double a2 = averaged(n_max / 2);
    const double a1 = out.value;
    const double d_late = a1 - a2;
    const double d_early = a2 - a4;
    double tail = d_late;
    if (d_late == 0.0) {
      tail = 0.0;
    } else if (std::isfinite(d_early / d_late) && d_early / d_late > 1.0) {
      tail = d_late / (d_early / d_late - 1.0);
    }
    out.tail_estimate = tail;
  } else {
    out.tail_estimate = n_max >= 1 ? out.value - averaged(n_max - 1) : 0.0;
  }
  out.extrapolated = out.value + out.tail_estimate;
  out.tolerance = 2.0 * std::abs(out.tail_estimate) + 1e-12;
  out.converged = out.tolerance <= requested_tol;
  return out;
}

}  // namespace

TruncatedSum potential_kernel_truncated(const TransitionKernel& p, const Site& x, int n_max, double requested_tol) {
  require_elliptic(p, "potential_kernel_truncated");
  if (x == Site{}) {
    TruncatedSum zero;
    zero.n_max = n_max;
    return zero;
  }
  const auto origin = nstep_probability_at(p, n_max, Site{});
  const auto minus_x = nstep_probability_at(p, n_max, -x);
  return summarize_partial_sums(minus_x, origin, requested_tol);
}

QuadratureSpec QuadratureSpec::for_dimension(int dim) {
  switch (dim) {
    case 2: return {512, 1024};
    case 3: return {64, 128};
    default: return {16, 32};
  }
}

namespace {

// Midpoint rule on an N^d grid over [0, 2 pi)^d of
//   [pref cos(x.theta) + cos(x.theta) - 1] / (1 - 2 sum_j s_j cos theta_j).
// Rows of the first axis are independent tasks; their partial sums are
// combined pairwise in a fixed order.
double fourier_midpoint(int d, const std::array<double, kMaxDim>& s, const Site& x, double pref, int N, Exec exec) {
  const double h = 2.0 * kPi / N;
  std::vector<double> cosg(N);
  for (int i = 0; i < N; ++i) cosg[i] = std::cos((i + 0.5) * h);
  // cos and sin of x_j theta_j on the grid, per axis.
  std::vector<std::vector<double>> cx(d, std::vector<double>(N)), sx(d, std::vector<double>(N));
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < N; ++i) {
      const double t = x[j] * (i + 0.5) * h;
      cx[j][i] = std::cos(t);
      sx[j][i] = std::sin(t);
    }
  }
  std::size_t inner = 1;
  for (int j = 1; j < d; ++j) inner *= static_cast<std::size_t>(N);

  std::vector<double> rows(N);
  const int workers = worker_count();
#pragma omp parallel for schedule(static) num_threads(workers) if (exec == Exec::parallel)
  for (int i0 = 0; i0 < N; ++i0) {
    std::vector<double> buf(std::min<std::size_t>(inner, 4096));
    std::vector<double> chunks;
    std::size_t fill = 0;
    for (std::size_t t = 0; t < inner; ++t) {
      std::size_t rem = t;
      double den = 1.0 - 2.0 * s[0] * cosg[i0];
      double c = cx[0][i0], sn = sx[0][i0];
      for (int j = d - 1; j >= 1; --j) {
        const auto ij = rem % static_cast<std::size_t>(N);
        rem /= static_cast<std::size_t>(N);
        den -= 2.0 * s[j] * cosg[ij];
        // angle addition: cos(a+b), sin(a+b)
        const double nc = c * cx[j][ij] - sn * sx[j][ij];
        const double ns = sn * cx[j][ij] + c * sx[j][ij];
        c = nc;
        sn = ns;
      }
      const double num = pref == 0.0 ? (c - 1.0) : (pref * c + (c - 1.0));
      buf[fill++] = num / den;
      if (fill == buf.size()) {
        chunks.push_back(pairwise_sum(buf));
        fill = 0;
      }
    }
    if (fill) chunks.push_back(pairwise_sum(std::span<const double>(buf.data(), fill)));
    rows[i0] = pairwise_sum(chunks);
  }
  return pairwise_sum(rows) / std::pow(static_cast<double>(N), d);
}

}  // namespace

FourierValue potential_kernel_fourier(const TransitionKernel& p, const Site& x, const QuadratureSpec& quad,
                                      Exec exec) {
  const int d = p.dim();
  if (d < 2) throw std::invalid_argument("potential_kernel_fourier: dimension 1 is not supported");
  require_elliptic(p, "potential_kernel_fourier");
  const QuadratureSpec q = quad.coarse_grid == 0 && quad.fine_grid == 0 ? QuadratureSpec::for_dimension(d) : quad;
  if (q.coarse_grid < 2 || q.fine_grid <= q.coarse_grid) {
    throw std::invalid_argument("potential_kernel_fourier: need 2 <= coarse_grid < fine_grid");
  }
  FourierValue out;
  if (x == Site{}) return out;
  std::array<double, kMaxDim> s{};
  double pref = 1.0;
  for (int j = 0; j < d; ++j) {
    s[j] = std::sqrt(p(2 * j) * p(2 * j + 1));
    if (x[j] != 0) pref *= std::pow(p(2 * j + 1) / p(2 * j), 0.5 * x[j]);
  }
  pref -= 1.0;
  out.prefactor = pref;
  out.coarse = fourier_midpoint(d, s, x, pref, q.coarse_grid, exec);
  out.fine = fourier_midpoint(d, s, x, pref, q.fine_grid, exec);
  // The midpoint error decays like h^4 for these integrands; extrapolate with
  // the grid ratio and keep the raw difference as the error bar.
  const double ratio = static_cast<double>(q.fine_grid) / q.coarse_grid;
  const double r4 = std::pow(ratio, 4);
  out.value = out.fine + (out.fine - out.coarse) / (r4 - 1.0);
  out.tolerance = std::abs(out.fine - out.coarse) + 1e-13;
  return out;
}

double Ssrw2dPotential::Exact::value() const {
  using Dec = boost::multiprecision::cpp_dec_float_100;
  const Dec pi = boost::math::constants::pi<Dec>();
  const Dec r = Dec(numerator(rational)) / Dec(denominator(rational));
  const Dec q = Dec(numerator(over_pi)) / Dec(denominator(over_pi));
  return static_cast<double>(r + q / pi);
}

std::string Ssrw2dPotential::Exact::str() const {
  std::string out = rational.str();
  if (over_pi != 0) {
    out += (over_pi < 0 ? " - " : " + ");
    out += Rational(abs(over_pi)).str() + "/pi";
  }
  return out;
}

namespace {

using Exact = Ssrw2dPotential::Exact;

Exact operator*(int k, const Exact& a) { return {a.rational * k, a.over_pi * k}; }
Exact operator-(const Exact& a, const Exact& b) { return {a.rational - b.rational, a.over_pi - b.over_pi}; }

std::size_t packed(int a, int b) { return static_cast<std::size_t>(a) * (a + 1) / 2 + b; }

}  // namespace

Ssrw2dPotential::Ssrw2dPotential(int radius) : radius_(radius) {
  if (radius < 1) throw std::invalid_argument("Ssrw2dPotential: radius must be >= 1");
  table_.resize(packed(radius, radius) + 1);
  auto at = [&](int a, int b) -> Exact& { return table_[packed(a, b)]; };
  auto get = [&](int a, int b) -> const Exact& {
    // (a, b) with b possibly -1 or > a, reduced by reflection and swap.
    a = std::abs(a);
    b = std::abs(b);
    if (b > a) std::swap(a, b);
    return table_[packed(a, b)];
  };
  at(0, 0) = {0, 0};
  at(1, 0) = {-1, 0};
  at(1, 1) = {0, -4};
  for (int m = 2; m <= radius; ++m) {
    // Harmonicity at (m-1, k) solved for the value at (m, k).
    for (int k = 0; k <= m - 2; ++k) {
      at(m, k) = 4 * get(m - 1, k) - get(m - 2, k) - get(m - 1, k + 1) - get(m - 1, k - 1);
    }
    // Harmonicity at (m-1, m-1) with the swap symmetry.
    at(m, m - 1) = 2 * get(m - 1, m - 1) - get(m - 1, m - 2);
    // Diagonal: J(m, m) = -(4/pi) sum_{k<=m} 1/(2k-1).
    Rational h = 0;
    for (int k = 1; k <= m; ++k) h += Rational(1, 2 * k - 1);
    at(m, m) = {0, -4 * h};
  }
}

const Ssrw2dPotential::Exact& Ssrw2dPotential::canonical(int a, int b) const {
  a = std::abs(a);
  b = std::abs(b);
  if (b > a) std::swap(a, b);
  return table_[packed(a, b)];
}

const Ssrw2dPotential::Exact& Ssrw2dPotential::exact(const Site& x) const {
  if (x.norm_inf() > radius_) {
    throw std::out_of_range("Ssrw2dPotential: point " + x.str(2) + " outside radius " + std::to_string(radius_));
  }
  for (int a = 2; a < kMaxDim; ++a) {
    if (x[a] != 0) throw std::invalid_argument("Ssrw2dPotential: point is not two-dimensional");
  }
  return canonical(x[0], x[1]);
}

double potential_kernel_2d_ssrw(const Site& x, int radius) { return Ssrw2dPotential(radius).value(x); }

double phi_eps(const TransitionKernel& p, const Site& v) {
  require_elliptic(p, "phi_eps");
  double out = 1.0;
  for (int i = 0; i < p.dim(); ++i) {
    if (v[i] != 0) out *= std::pow(std::sqrt(p(2 * i + 1) / p(2 * i)), v[i]);
  }
  return out;
}

std::string to_string(KernelMethod m) {
  switch (m) {
    case KernelMethod::truncated_sum: return "truncated-sum";
    case KernelMethod::fourier: return "fourier";
    case KernelMethod::recursion_2d: return "recursion-2d";
  }
  return "?";
}

KernelMethod kernel_method_from_string(const std::string& s) {
  if (s == "truncated-sum") return KernelMethod::truncated_sum;
  if (s == "fourier") return KernelMethod::fourier;
  if (s == "recursion-2d") return KernelMethod::recursion_2d;
  throw std::invalid_argument("unknown kernel method '" + s + "' (expected truncated-sum, fourier, recursion-2d)");
}

PotentialKernelTable::PotentialKernelTable(TransitionKernel kernel, int radius, KernelMethod method,
                                           std::vector<double> values, std::vector<double> tolerances)
    : kernel_(kernel),
      radius_(radius),
      method_(method),
      box_(Box::centered(kernel.dim(), Site{}, radius)),
      values_(std::move(values)),
      tolerances_(std::move(tolerances)) {
  if (values_.size() != box_.size() || tolerances_.size() != box_.size()) {
    throw std::invalid_argument("PotentialKernelTable: value count does not match the box");
  }
}

double PotentialKernelTable::at(const Site& x) const {
  if (!covers(x)) throw std::out_of_range("PotentialKernelTable: point outside radius " + std::to_string(radius_));
  return values_[box_.index(x)];
}

double PotentialKernelTable::tolerance(const Site& x) const {
  if (!covers(x)) throw std::out_of_range("PotentialKernelTable: point outside radius " + std::to_string(radius_));
  return tolerances_[box_.index(x)];
}

PotentialKernelTable make_kernel_table(const TransitionKernel& p, int radius, KernelMethod method,
                                       const KernelTableOptions& opts) {
  if (radius < 0) throw std::invalid_argument("make_kernel_table: negative radius");
  const Box box = Box::centered(p.dim(), Site{}, radius);
  std::vector<double> values(box.size(), 0.0), tols(box.size(), 0.0);
  switch (method) {
    case KernelMethod::recursion_2d: {
      if (p.dim() != 2 || !(p == TransitionKernel::symmetric(2))) {
        throw std::invalid_argument("recursion-2d requires the simple symmetric kernel in d = 2");
      }
      const Ssrw2dPotential exact(std::max(radius, 1));
      for (std::size_t i = 0; i < box.size(); ++i) {
        values[i] = exact.value(box.site(i));
        tols[i] = 1e-15;
      }
      break;
    }
    case KernelMethod::fourier: {
      for (std::size_t i = 0; i < box.size(); ++i) {
        const auto f = potential_kernel_fourier(p, box.site(i), opts.quadrature, opts.exec);
        values[i] = f.value;
        tols[i] = f.tolerance;
      }
      break;
    }
    case KernelMethod::truncated_sum: {
      require_elliptic(p, "make_kernel_table");
      const auto origin = nstep_probability_at(p, opts.truncated_steps, Site{});
      for (std::size_t i = 0; i < box.size(); ++i) {
        const Site x = box.site(i);
        if (x == Site{}) continue;
        const auto ts = summarize_partial_sums(nstep_probability_at(p, opts.truncated_steps, -x), origin, 0.0);
        values[i] = ts.value;
        tols[i] = ts.tolerance;
      }
      break;
    }
  }
  return PotentialKernelTable(p, radius, method, std::move(values), std::move(tols));
}

void PotentialKernelTable::write_csv(std::ostream& out) const {
  const int d = kernel_.dim();
  for (int a = 0; a < d; ++a) out << "x" << a + 1 << ",";
  out << "J,method,tol\n";
  for (std::size_t i = 0; i < box_.size(); ++i) {
    const Site x = box_.site(i);
    for (int a = 0; a < d; ++a) out << x[a] << ",";
    out << fmt17(values_[i]) << "," << to_string(method_) << "," << fmt17(tolerances_[i]) << "\n";
  }
}

std::string PotentialKernelTable::to_json() const {
  nlohmann::json j;
  j["dimension"] = kernel_.dim();
  j["radius"] = radius_;
  j["method"] = to_string(method_);
  std::vector<double> p(kernel_.num_dirs());
  for (int e = 0; e < kernel_.num_dirs(); ++e) p[e] = kernel_(e);
  j["kernel"] = p;
  j["entries"] = nlohmann::json::array();
  for (std::size_t i = 0; i < box_.size(); ++i) {
    const Site x = box_.site(i);
    std::vector<int> xs(x.c.begin(), x.c.begin() + kernel_.dim());
    j["entries"].push_back({{"x", xs}, {"J", values_[i]}, {"tol", tolerances_[i]}});
  }
  return j.dump();
}

}  // namespace rwre
