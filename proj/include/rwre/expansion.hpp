#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/kernels.hpp"
#include "rwre/measures.hpp"

namespace rwre {

/// 1 + eps sum_{z in B} sum_e xibar(z,e) J(z+e) for one configuration on B.
double density_first_order(const BoxConfiguration& config, const std::vector<Site>& sites,
                           const PerturbationLaw& law, double epsilon, const PotentialKernelTable& J);

/// First-order densities for every configuration of B.
struct ExpansionPrediction {
  int dim = 0;
  std::vector<Site> sites;
  int num_atoms = 0;
  double epsilon = 0.0;
  std::string kernel;  ///< which J was used, e.g. "p0" or "p_eps"
  std::vector<double> density;
  /// Average of the densities under P_B (exactly 1 up to rounding).
  double p_mean(const ConfigurationSpace& space) const;
  /// config_id, a1..an, prediction; joins the DensityEstimate CSV on config_id.
  void write_csv(std::ostream& out) const;
};
ExpansionPrediction predict_densities(const ConfigurationSpace& space, const PerturbationLaw& law, double epsilon,
                                      const PotentialKernelTable& J, std::string kernel_label);

/// Closed-form density for B = {z0, z1}, z0 = 0, z1 = e2, symmetric walk in
/// d = 2, as a function of xibar(z1, .) alone:
/// 1 - (4/pi)(xibar(e1) + xibar(-e1)) eps + (8/pi - 4) xibar(e2) eps.
double corollary2_density(const DirVector& xi_bar_z1, double epsilon, int dim = 2);

struct VelocityPrediction {
  int dim = 0;
  double epsilon = 0.0;
  std::array<double, kMaxDim> d0{};
  std::array<double, kMaxDim> d1{};
  std::array<double, kMaxDim> d2{};
  std::array<double, kMaxDim> v{};  ///< d0 + eps d1 + eps^2 d2
};

/// d2 = sum_{e,e'} e' C_{e',e} J(e), with J the table of the averaged kernel.
VelocityPrediction velocity_expansion(const TransitionKernel& p0, const PerturbationLaw& law, double epsilon,
                                      const PotentialKernelTable& J);

/// E[d(0,omega)] under the one-site first-order density, by enumerating the
/// atoms; d2 is read off as (v - d0 - eps d1) / eps^2. Needs eps > 0.
VelocityPrediction velocity_q_average(const TransitionKernel& p0, const PerturbationLaw& law, double epsilon,
                                      const PotentialKernelTable& J);

/// |J_{p*_eps}(x) - J_{p*_0}(x)| by Fourier quadrature for both kernels.
struct KernelGap {
  double epsilon = 0.0;
  double gap = 0.0;
  double tolerance = 0.0;
  std::string model;  ///< "eps-log-eps" (d = 2, symmetric p0, p_eps != p0) or "linear"
};
KernelGap j_epsilon_vs_j0_gap(const TransitionKernel& p0, const PerturbationLaw& law, double epsilon, const Site& x,
                              const QuadratureSpec& quad = {});

/// gap(eps) / gap(eps/2) implied by each rate family.
double model_gap_ratio(const std::string& model, double epsilon);

}  // namespace rwre
