#include "rwre/expansion.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rwre/io.hpp"

namespace rwre {

double density_first_order(const BoxConfiguration& config, const std::vector<Site>& sites,
                           const PerturbationLaw& law, double epsilon, const PotentialKernelTable& J) {
  if (config.atoms.size() != sites.size()) throw std::invalid_argument("density: configuration does not match B");
  const int nd = law.num_dirs();
  double s = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (int e = 0; e < nd; ++e) {
      const Site x = step(sites[i], e);
      if (!J.covers(x)) throw std::out_of_range("density: J table does not cover " + x.str(law.dim()));
      s += law.xi_bar(config.atoms[i], e) * J.at(x);
    }
  }
  return 1.0 + epsilon * s;
}

double ExpansionPrediction::p_mean(const ConfigurationSpace& space) const {
  std::vector<double> w(density.size());
  for (std::size_t c = 0; c < density.size(); ++c) w[c] = space.probability(static_cast<int>(c)) * density[c];
  return pairwise_sum(w);
}

void ExpansionPrediction::write_csv(std::ostream& out) const {
  out << "config_id";
  for (std::size_t i = 0; i < sites.size(); ++i) out << ",a" << i + 1;
  out << ",prediction\n";
  for (std::size_t c = 0; c < density.size(); ++c) {
    out << c;
    auto id = static_cast<int>(c);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      out << "," << id % num_atoms;
      id /= num_atoms;
    }
    out << "," << fmt17(density[c]) << "\n";
  }
}

ExpansionPrediction predict_densities(const ConfigurationSpace& space, const PerturbationLaw& law, double epsilon,
                                      const PotentialKernelTable& J, std::string kernel_label) {
  ExpansionPrediction p;
  p.dim = law.dim();
  p.sites = space.sites();
  p.num_atoms = space.num_atoms();
  p.epsilon = epsilon;
  p.kernel = std::move(kernel_label);
  for (int c = 0; c < space.size(); ++c) {
    p.density.push_back(density_first_order(space.config(c), space.sites(), law, epsilon, J));
  }
  return p;
}

double corollary2_density(const DirVector& xi_bar_z1, double epsilon, int dim) {
  if (dim != 2) throw std::invalid_argument("corollary2_density: only defined for d = 2");
  const double pi = std::numbers::pi;
  return 1.0 - (4.0 / pi) * (xi_bar_z1[0] + xi_bar_z1[1]) * epsilon + (8.0 / pi - 4.0) * xi_bar_z1[2] * epsilon;
}

VelocityPrediction velocity_expansion(const TransitionKernel& p0, const PerturbationLaw& law, double epsilon,
                                      const PotentialKernelTable& J) {
  const int d = p0.dim();
  const int nd = 2 * d;
  if (law.dim() != d) throw std::invalid_argument("velocity expansion: dimension mismatch");
  VelocityPrediction v;
  v.dim = d;
  v.epsilon = epsilon;
  v.d0 = p0.drift();
  for (int a = 0; a < d; ++a) v.d1[a] = law.mean()[2 * a] - law.mean()[2 * a + 1];
  for (int e2 = 0; e2 < nd; ++e2) {
    const Direction u = Direction::from_index(e2);
    double s = 0.0;
    for (int e = 0; e < nd; ++e) s += law.covariance(e2, e) * J.at(unit(e));
    v.d2[u.axis] += u.sign * s;
  }
  for (int a = 0; a < d; ++a) v.v[a] = v.d0[a] + epsilon * v.d1[a] + epsilon * epsilon * v.d2[a];
  return v;
}

VelocityPrediction velocity_q_average(const TransitionKernel& p0, const PerturbationLaw& law, double epsilon,
                                      const PotentialKernelTable& J) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("velocity_q_average: epsilon must be positive");
  const int d = p0.dim();
  const ConfigurationSpace space({Site{}}, law);
  VelocityPrediction v;
  v.dim = d;
  v.epsilon = epsilon;
  v.d0 = p0.drift();
  for (int a = 0; a < d; ++a) v.d1[a] = law.mean()[2 * a] - law.mean()[2 * a + 1];
  for (int a = 0; a < d; ++a) {
    std::vector<double> terms;
    for (int atom = 0; atom < law.num_atoms(); ++atom) {
      const double density = density_first_order(space.config(atom), space.sites(), law, epsilon, J);
      const double drift = p0(2 * a) - p0(2 * a + 1) + epsilon * (law.atom(atom)[2 * a] - law.atom(atom)[2 * a + 1]);
      terms.push_back(law.weight(atom) * density * drift);
    }
    v.v[a] = pairwise_sum(terms);
    v.d2[a] = (v.v[a] - v.d0[a] - epsilon * v.d1[a]) / (epsilon * epsilon);
  }
  return v;
}

KernelGap j_epsilon_vs_j0_gap(const TransitionKernel& p0, const PerturbationLaw& law, double epsilon, const Site& x,
                              const QuadratureSpec& quad) {
  const auto pe = p_epsilon(p0, epsilon, law);
  KernelGap g;
  g.epsilon = epsilon;
  const bool symmetric = p0 == TransitionKernel::symmetric(p0.dim());
  g.model = (p0.dim() == 2 && symmetric && !(pe == p0)) ? "eps-log-eps" : "linear";
  if (pe == p0) return g;
  const auto a = potential_kernel_fourier(pe, x, quad);
  const auto b = potential_kernel_fourier(p0, x, quad);
  g.gap = std::abs(a.value - b.value);
  g.tolerance = a.tolerance + b.tolerance;
  return g;
}

double model_gap_ratio(const std::string& model, double epsilon) {
  if (model == "linear") return 2.0;
  if (model == "eps-log-eps") return 2.0 * std::log(epsilon) / std::log(epsilon / 2.0);
  throw std::invalid_argument("unknown rate model " + model);
}

}  // namespace rwre
