#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rwre/kernels.hpp"
#include "rwre/lattice.hpp"
#include "rwre/rng.hpp"

namespace rwre {

using DirVector = std::array<double, kMaxDirs>;

/// Finitely supported law of the per-site fluctuation xi(0, .).
class PerturbationLaw {
 public:
  PerturbationLaw() = default;
  int dim() const { return dim_; }
  int num_dirs() const { return 2 * dim_; }
  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  const DirVector& atom(int a) const { return atoms_[a]; }
  double weight(int a) const { return weights_[a]; }
  const std::vector<double>& weights() const { return weights_; }
  /// E[xi(0, e)].
  const DirVector& mean() const { return mean_; }
  /// C_{e,e'} = Cov(xi(0,e), xi(0,e')).
  double covariance(int e, int e2) const { return cov_[e][e2]; }
  /// xi(e) - E[xi(e)] for atom a.
  double xi_bar(int a, int dir) const { return atoms_[a][dir] - mean_[dir]; }

  std::string to_json() const;

  friend PerturbationLaw make_perturbation_law(int dim, const std::vector<std::vector<double>>& atoms,
                                               const std::vector<double>& weights);

 private:
  int dim_ = 0;
  std::vector<DirVector> atoms_;
  std::vector<double> weights_;
  DirVector mean_{};
  std::array<DirVector, kMaxDirs> cov_{};
};

/// Validates shapes, entry ranges, zero row sums and weights, and precomputes
/// the mean and covariance.
PerturbationLaw make_perturbation_law(int dim, const std::vector<std::vector<double>>& atoms,
                                      const std::vector<double>& weights);

/// Law file: {"dimension": d, "atoms": [{"xi": [...2d numbers...], "w": weight}, ...]}.
PerturbationLaw perturbation_law_from_json(const std::string& text);
PerturbationLaw load_perturbation_law(const std::string& path);

/// The d = 2 law with atoms (0.75,-0.75,0.5,-0.5) and (0.75,-0.75,-0.5,0.5), weight 1/2 each.
PerturbationLaw two_atom_law();

struct SiteConfig {
  int dim = 0;
  int atom = 0;
  DirVector omega{};
  DirVector xi{};
  DirVector xi_bar{};
  /// Local drift d(x, omega) = sum_e omega(x,e) e.
  std::array<double, kMaxDim> drift() const;
};

struct LdCheck {
  bool holds = false;
  double margin = 0.0;  ///< E[d(0,omega)].e1 - epsilon
};

/// omega(x, e) = p0(e) + epsilon xi(x, e), with xi(x, .) drawn i.i.d. over sites
/// by a counter-based hash of (seed, x + offset).
class EnvironmentField {
 public:
  EnvironmentField(TransitionKernel p0, double epsilon, PerturbationLaw law, std::uint64_t seed);

  int dim() const { return p0_.dim(); }
  const TransitionKernel& p0() const { return p0_; }
  double epsilon() const { return epsilon_; }
  const PerturbationLaw& law() const { return law_; }
  std::uint64_t seed() const { return seed_; }
  const Site& offset() const { return offset_; }

  int atom_at(const Site& x) const;
  SiteConfig site_omega(const Site& x) const;
  double omega(const Site& x, int dir) const { return atom_omega_[atom_at(x)][dir]; }
  /// Transition row of atom a.
  const DirVector& atom_omega(int a) const { return atom_omega_[a]; }
  /// Cumulative transition row of atom a, for inverse-CDF stepping.
  const DirVector& atom_cdf(int a) const { return atom_cdf_[a]; }

  /// theta_v omega: site x of the result is site x + v of this field.
  EnvironmentField shifted(const Site& v) const;
  EnvironmentField with_seed(std::uint64_t seed) const;
  /// Same law, fresh environment; no reallocation, for per-trajectory loops.
  void reseed(std::uint64_t seed) { seed_ = seed; }

  double kappa() const { return p0_.min_prob() - epsilon_; }

 private:
  TransitionKernel p0_;
  double epsilon_;
  PerturbationLaw law_;
  std::uint64_t seed_;
  Site offset_{};
  std::vector<double> cum_weights_;
  std::vector<DirVector> atom_omega_;
  std::vector<DirVector> atom_cdf_;
};

/// Local drift condition: E[d(0,omega)].e1 >= epsilon.
LdCheck check_ld(const EnvironmentField& field);

/// kappa = min_e p0(e) - epsilon; throws when non-positive.
double ellipticity_kappa(const TransitionKernel& p0, double epsilon);
inline double ellipticity_kappa(const EnvironmentField& field) { return field.kappa(); }

/// p_eps(e) = p0(e) + epsilon E[xi(0,e)].
TransitionKernel p_epsilon(const TransitionKernel& p0, double epsilon, const PerturbationLaw& law);
inline TransitionKernel p_epsilon(const EnvironmentField& f) { return p_epsilon(f.p0(), f.epsilon(), f.law()); }

/// Inverse-CDF choice of a direction from a cumulative row.
inline int sample_direction(const DirVector& cdf, int num_dirs, double u) {
  for (int e = 0; e + 1 < num_dirs; ++e) {
    if (u < cdf[e]) return e;
  }
  return num_dirs - 1;
}

/// One step of the quenched walk P_{x,omega}.
inline Site walk_step(const EnvironmentField& f, const Site& x, Engine& eng) {
  return step(x, sample_direction(f.atom_cdf(f.atom_at(x)), 2 * f.dim(), uniform01(eng)));
}

}  // namespace rwre
