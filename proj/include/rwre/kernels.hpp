#pragma once

#include <array>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "rwre/exec.hpp"
#include "rwre/lattice.hpp"

namespace rwre {

/// Nearest-neighbour jump probabilities p(e), e in V, in the direction order
/// of Direction::index().
class TransitionKernel {
 public:
  TransitionKernel() = default;
  TransitionKernel(int dim, std::span<const double> probs);
  TransitionKernel(int dim, std::initializer_list<double> probs)
      : TransitionKernel(dim, std::span<const double>(probs.begin(), probs.size())) {}

  static TransitionKernel symmetric(int dim);

  int dim() const { return dim_; }
  int num_dirs() const { return 2 * dim_; }
  double operator()(int dir) const { return p_[dir]; }
  std::span<const double> probs() const { return {p_.data(), static_cast<std::size_t>(2 * dim_)}; }

  double min_prob() const;
  /// Member of P_0: every direction has positive probability.
  bool strictly_elliptic() const { return min_prob() > 0.0; }
  /// sum_e e p(e).
  std::array<double, kMaxDim> drift() const;

  friend bool operator==(const TransitionKernel&, const TransitionKernel&) = default;

 private:
  int dim_ = 0;
  std::array<double, kMaxDirs> p_{};
};

/// p*(e) = p(-e).
TransitionKernel reverse_kernel(const TransitionKernel& p);

/// Exact n-step law p_n(0, .) on the box [-radius, radius]^d.
class NStepTable {
 public:
  NStepTable(Box box, int steps, std::vector<double> probs, double lost_mass)
      : box_(box), steps_(steps), probs_(std::move(probs)), lost_mass_(lost_mass) {}

  const Box& box() const { return box_; }
  int steps() const { return steps_; }
  double at(const Site& y) const { return box_.contains(y) ? probs_[box_.index(y)] : 0.0; }
  std::span<const double> values() const { return probs_; }
  double total() const;
  /// Mass that left the window (zero unless the table was explicitly truncated).
  double lost_mass() const { return lost_mass_; }

 private:
  Box box_;
  int steps_;
  std::vector<double> probs_;
  double lost_mass_;
};

/// Repeated discrete convolution of the one-step kernel on a window of the
/// given radius. A radius smaller than n is rejected unless allow_truncation
/// is set, in which case mass leaving the window is dropped and reported.
NStepTable nstep_probability(const TransitionKernel& p, int n, int radius, Exec exec = Exec::parallel,
                             bool allow_truncation = false);

/// p_k(0, y) for k = 0..n_max at a single point, from the exact factorisation
/// of a nearest-neighbour walk into per-axis binomial walks.
std::vector<double> nstep_probability_at(const TransitionKernel& p, int n_max, const Site& y);

/// Partial sum of sum_k (p_k(0,-x) - p_k(0,0)), which converges to J_{p*}(x).
struct TruncatedSum {
  int n_max = 0;
  double value = 0.0;          ///< mean of the last two partial sums
  double last_partial = 0.0;   ///< S_{n_max}
  double tail_estimate = 0.0;  ///< signed estimate of J - value from the last decade of terms
  double extrapolated = 0.0;   ///< value + tail_estimate
  double tolerance = 0.0;      ///< error bar on value
  bool converged = true;       ///< tolerance <= requested tolerance
};
TruncatedSum potential_kernel_truncated(const TransitionKernel& p, const Site& x, int n_max,
                                        double requested_tol = 1e-6);

struct QuadratureSpec {
  int coarse_grid = 0;  ///< midpoints per axis on the coarse grid (0: pick by dimension)
  int fine_grid = 0;    ///< midpoints per axis on the fine grid (0: pick by dimension)
  /// Defaults per dimension, since tensor grids grow as N^d.
  static QuadratureSpec for_dimension(int dim);
};

struct FourierValue {
  double value = 0.0;      ///< Richardson-extrapolated value
  double tolerance = 0.0;  ///< |fine - coarse|
  double coarse = 0.0;
  double fine = 0.0;
  double prefactor = 0.0;  ///< prod_j (p(-e_j)/p(e_j))^{x_j/2} - 1
};
/// J_{p*}(x) from the Fourier representation, by midpoint quadrature on two
/// tensor grids over [0, 2 pi)^d and Richardson extrapolation between them.
FourierValue potential_kernel_fourier(const TransitionKernel& p, const Site& x, const QuadratureSpec& quad = {},
                                      Exec exec = Exec::parallel);

/// Potential kernel of the two-dimensional simple symmetric walk, in exact
/// arithmetic of the form r + q/pi with rational r and q.
class Ssrw2dPotential {
 public:
  using Rational = boost::multiprecision::cpp_rational;
  struct Exact {
    Rational rational;
    Rational over_pi;
    double value() const;
    std::string str() const;
  };

  explicit Ssrw2dPotential(int radius);

  int radius() const { return radius_; }
  /// Throws std::out_of_range outside |x|_inf <= radius.
  const Exact& exact(const Site& x) const;
  double value(const Site& x) const { return exact(x).value(); }

 private:
  int radius_;
  std::vector<Exact> table_;  // (a, b) with 0 <= b <= a, packed by row
  const Exact& canonical(int a, int b) const;
};

double potential_kernel_2d_ssrw(const Site& x, int radius = 8);

/// phi(v) = prod_i (sqrt(p(-e_i)/p(e_i)))^{v_i}.
double phi_eps(const TransitionKernel& p, const Site& v);

enum class KernelMethod { truncated_sum, fourier, recursion_2d };
std::string to_string(KernelMethod m);
KernelMethod kernel_method_from_string(const std::string& s);

struct KernelTableOptions {
  int truncated_steps = 10000;
  QuadratureSpec quadrature{};
  Exec exec = Exec::parallel;
};

/// Values of J_{p*}(x) for |x|_inf <= radius. The stored kernel is the walk
/// kernel p whose n-step laws define J_{p*}.
class PotentialKernelTable {
 public:
  PotentialKernelTable(TransitionKernel kernel, int radius, KernelMethod method, std::vector<double> values,
                       std::vector<double> tolerances);

  const TransitionKernel& kernel() const { return kernel_; }
  int radius() const { return radius_; }
  KernelMethod method() const { return method_; }
  const Box& box() const { return box_; }
  bool covers(const Site& x) const { return box_.contains(x); }
  /// Throws std::out_of_range for points outside the table.
  double at(const Site& x) const;
  double tolerance(const Site& x) const;
  /// x1..xd, J, method, tol; one row per site in index order.
  void write_csv(std::ostream& out) const;
  std::string to_json() const;

 private:
  TransitionKernel kernel_;
  int radius_;
  KernelMethod method_;
  Box box_;
  std::vector<double> values_;
  std::vector<double> tolerances_;
};

PotentialKernelTable make_kernel_table(const TransitionKernel& p, int radius, KernelMethod method,
                                       const KernelTableOptions& opts = {});

}  // namespace rwre
