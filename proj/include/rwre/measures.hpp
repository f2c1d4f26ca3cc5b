#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/exec.hpp"
#include "rwre/greenfn.hpp"
#include "rwre/lattice.hpp"
#include "rwre/stats.hpp"

namespace rwre {

/// Atom index per site of B.
struct BoxConfiguration {
  std::vector<int> atoms;
};

/// The finite alphabet of configurations of omega restricted to B. Ids are
/// mixed-radix: site i contributes atoms[i] * n_atoms^i.
class ConfigurationSpace {
 public:
  ConfigurationSpace(std::vector<Site> sites, const PerturbationLaw& law);

  const std::vector<Site>& sites() const { return sites_; }
  int num_atoms() const { return n_atoms_; }
  int size() const { return size_; }
  int id(const BoxConfiguration& c) const;
  BoxConfiguration config(int id) const;
  /// P_B(c) = product of atom weights.
  double probability(int id) const { return prob_[id]; }
  /// Configuration of theta_x omega on B, i.e. the atoms at x + z, z in B.
  int id_at(const EnvironmentField& f, const Site& x) const {
    int id = 0, mult = 1;
    for (const auto& z : sites_) {
      id += f.atom_at(x + z) * mult;
      mult *= n_atoms_;
    }
    return id;
  }

 private:
  std::vector<Site> sites_;
  int n_atoms_ = 0;
  int size_ = 0;
  std::vector<double> prob_;
};

/// Empirical law of the environment seen from the walker on a box B, with
/// its ratio to the product law P_B.
struct DensityEstimate {
  std::string estimator;
  int dim = 0;
  std::vector<Site> sites;
  int num_atoms = 0;
  std::vector<double> counts;
  double total = 0.0;
  std::vector<double> p;
  std::vector<double> q_hat;
  std::vector<double> ratio;
  std::vector<double> ratio_se;  ///< delete-one jackknife over replicas or trajectory blocks
  std::vector<std::vector<double>> replica_counts;
  int replicas = 0;
  std::int64_t burn_in = 0;
  bool ld_holds = true;
  std::vector<std::string> warnings;

  int size() const { return static_cast<int>(counts.size()); }
  double mass() const;
  /// config_id, a1..an, count, q_hat, p, ratio, stderr
  void write_csv(std::ostream& out) const;
};

/// Law of the configuration at one site of B, from a joint estimate on B.
DensityEstimate marginal_density(const DensityEstimate& joint, const PerturbationLaw& law, std::size_t site);

struct WalkTrace {
  std::vector<Site> positions;  ///< X_0 .. X_n
  std::uint64_t environment_seed = 0;
  std::int64_t steps = 0;
};

WalkTrace simulate_walk(const EnvironmentField& field, const Site& start, std::int64_t n_steps, std::uint64_t walk_seed);

/// 10 / eps^2 steps, capped at 10^5 (and the cap alone when eps = 0).
std::int64_t default_burn_in(double epsilon);

/// Cesaro averages of the environmental process. Each replica draws a fresh
/// environment, walks n_steps steps and records the configuration on X_k + B
/// after burn_in steps. burn_in < 0 selects default_burn_in.
DensityEstimate cesaro_invariant_estimate(const EnvironmentField& field, const std::vector<Site>& sites,
                                          std::int64_t n_steps, std::int64_t burn_in, int n_replicas,
                                          std::uint64_t seed, Exec exec = Exec::parallel);

/// mu_delta restricted to B from geometrically killed trajectories, each in a
/// fresh environment.
struct MuDeltaEstimate {
  double delta = 0.0;
  std::int64_t n_traj = 0;
  DensityEstimate from_k1;  ///< visits k = 1..tau-1, normalised by their own total
  DensityEstimate from_k0;  ///< visits k = 0..tau-1, normalised by their own total
  /// Same counts over the fixed denominators n_traj (E[tau] - 1) and n_traj E[tau].
  std::vector<double> fixed_k1;
  std::vector<double> fixed_k0;
  double empty_fraction = 0.0;  ///< trajectories with tau = 1
};
MuDeltaEstimate mu_delta_estimate(const EnvironmentField& field, const std::vector<Site>& sites, double delta,
                                  std::int64_t n_traj, std::uint64_t seed, Exec exec = Exec::parallel);

/// Both sides of the geometric Cesaro identity for the cylinder
/// f = 1{omega on B equals configuration c}.
struct IdentityCheck {
  double delta = 0.0;
  int config_id = 0;
  double p_config = 0.0;
  Estimate green_side;  ///< sum_y E[g(0,y) f(theta_y omega)] / sum_y E[g(0,y)]
  Estimate traj_k0;     ///< E'[sum_{k=0}^{tau-1} f] / E[tau]
  Estimate traj_k1;     ///< E'[sum_{k=1}^{tau-1} f] / E[tau]
  Estimate k0_minus_k1; ///< per-trajectory difference of the two, f at the origin
  double k1_offset_predicted = 0.0;  ///< (1 - delta) P_B(c), the k = 0 term
  double max_error_bound = 0.0;      ///< largest exact-solve row bound
  int normalization_failures = 0;    ///< rows whose sum misses 1/(1-delta) beyond their bound
  int n_env = 0;
  std::int64_t n_traj = 0;
  bool k0_agrees(double n_se = 4.0) const;
  bool k1_agrees(double n_se = 4.0) const;
  /// traj_k0 - traj_k1 equals the predicted offset within n_se.
  bool k1_offset_matches(double n_se = 4.0) const;
};
IdentityCheck identity_check(const EnvironmentField& field, const std::vector<Site>& sites, int config_id,
                             double delta, int n_env, std::int64_t n_traj, std::uint64_t seed,
                             double tol = 1e-8, Exec exec = Exec::parallel);

/// omega^{A+y} on a window: rows at A + y replaced by the averaged kernel p_eps.
OmegaWindow averaged_on(const EnvironmentField& field, const Box& window, const std::vector<Site>& a_plus_y);

struct KalikowSpec {
  std::vector<Site> A{Site{}, Site{1, 0}};
  Site y{};
  std::vector<Site> zs{Site{}, Site{1, 0}};
  std::vector<double> deltas{0.9, 0.95, 0.99};
  int n_env = 100;
  double tol = 1e-4;
  double denominator_floor = 1e-12;
};

struct KalikowEstimate {
  double delta = 0.0;
  Site z;
  int dir = 0;
  Estimate j;                   ///< J_e^delta(y, z)
  double limit = 0.0;           ///< J_{p*_eps}(z + e)
  int below_floor = 0;          ///< environments with g(0, z+y) under the floor
  double max_error_bound = 0.0;
};

/// J_e^delta(y,z) for every z in spec.zs, every direction e and every delta,
/// from n_env environments, each solved exactly on omega^{A+y}.
std::vector<KalikowEstimate> kalikow_j_delta(const EnvironmentField& field, const KalikowSpec& spec,
                                             std::uint64_t seed, Exec exec = Exec::parallel);
Estimate kalikow_j_delta(const EnvironmentField& field, double delta, const Site& y, const Site& z, int dir,
                         const std::vector<Site>& A, int n_env, double tol, std::uint64_t seed);

/// c0 with the stated minimum, and with a maximum instead.
struct BallisticityConstant {
  double power_term = 0.0;  ///< 2^{3(d-1)}
  double exp_term = 0.0;    ///< exp{2(ln 90 + sum_j ln j / 2^j)}
  double as_min() const;
  double as_max() const;
};
BallisticityConstant ballisticity_constant(int dim);

struct PolynomialCheck {
  int L = 0;
  double M = 0.0;
  std::array<double, kMaxDim> direction{};
  std::int64_t n_traj = 0;
  std::int64_t back_exits = 0;   ///< exits with X_T . l < L
  std::int64_t capped = 0;       ///< trajectories that hit the step cap (not counted as exits)
  std::int64_t membership_violations = 0;
  Estimate back_exit;            ///< over completed trajectories
  double threshold = 0.0;        ///< L^{-M}
  bool below_threshold = false;
  BallisticityConstant c0;
  bool L_reaches_c0_min = false;
  bool L_reaches_c0_max = false;
  bool M_large_enough = false;   ///< M >= 15 d + 5
};

/// Exit statistics of B_L = {-L/2 <= x.l <= L, |pi_l x|_inf <= 25 L^3}.
PolynomialCheck polynomial_condition_check(const EnvironmentField& field, const std::array<double, kMaxDim>& l,
                                           int L, double M, std::int64_t n_traj, std::uint64_t seed,
                                           std::int64_t step_cap = 10'000'000, Exec exec = Exec::parallel);

struct VelocityEstimate {
  std::int64_t n_steps = 0;
  int replicas = 0;
  std::array<Estimate, kMaxDim> velocity{};     ///< X_n / n
  std::array<Estimate, kMaxDim> drift_mean{};   ///< (1/n) sum_{k<n} d(X_k, omega)
  /// max over replicas and axes of |X_n - sum_k d(X_k)| / sqrt(n); the
  /// martingale has increments of variance at most 1 per axis.
  double max_martingale_z = 0.0;
};
VelocityEstimate velocity_mc(const EnvironmentField& field, std::int64_t n_steps, int n_replicas, std::uint64_t seed,
                             Exec exec = Exec::parallel);

}  // namespace rwre
