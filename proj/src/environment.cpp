#include "rwre/environment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rwre/rng.hpp"

namespace rwre {

PerturbationLaw make_perturbation_law(int dim, const std::vector<std::vector<double>>& atoms,
                                      const std::vector<double>& weights) {
  check_dimension(dim);
  if (atoms.empty()) throw std::invalid_argument("perturbation law: no atoms");
  if (atoms.size() != weights.size()) throw std::invalid_argument("perturbation law: atoms/weights size mismatch");
  const int nd = 2 * dim;
  PerturbationLaw law;
  law.dim_ = dim;
  double wsum = 0.0;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    if (atoms[a].size() != static_cast<std::size_t>(nd)) {
      throw std::invalid_argument("perturbation law: atom " + std::to_string(a) + " has " +
                                  std::to_string(atoms[a].size()) + " entries, expected " + std::to_string(nd));
    }
    DirVector v{};
    double s = 0.0;
    for (int e = 0; e < nd; ++e) {
      const double x = atoms[a][e];
      if (!(x >= -1.0 && x <= 1.0)) {
        throw std::invalid_argument("perturbation law: atom " + std::to_string(a) + " entry outside [-1,1]");
      }
      v[e] = x;
      s += x;
    }
    if (std::abs(s) > 1e-12) {
      throw std::invalid_argument("perturbation law: atom " + std::to_string(a) + " sums to " + std::to_string(s) +
                                  ", not 0");
    }
    if (!(weights[a] >= 0.0)) throw std::invalid_argument("perturbation law: negative weight");
    wsum += weights[a];
    law.atoms_.push_back(v);
    law.weights_.push_back(weights[a]);
  }
  if (std::abs(wsum - 1.0) > 1e-12) throw std::invalid_argument("perturbation law: weights sum to " + std::to_string(wsum));

  for (std::size_t a = 0; a < law.atoms_.size(); ++a) {
    for (int e = 0; e < nd; ++e) law.mean_[e] += law.weights_[a] * law.atoms_[a][e];
  }
  for (std::size_t a = 0; a < law.atoms_.size(); ++a) {
    for (int e = 0; e < nd; ++e) {
      for (int f = 0; f < nd; ++f) {
        law.cov_[e][f] += law.weights_[a] * (law.atoms_[a][e] - law.mean_[e]) * (law.atoms_[a][f] - law.mean_[f]);
      }
    }
  }
  return law;
}

std::string PerturbationLaw::to_json() const {
  nlohmann::json j;
  j["dimension"] = dim_;
  j["atoms"] = nlohmann::json::array();
  for (int a = 0; a < num_atoms(); ++a) {
    std::vector<double> xi(atoms_[a].begin(), atoms_[a].begin() + num_dirs());
    j["atoms"].push_back({{"xi", xi}, {"w", weights_[a]}});
  }
  return j.dump();
}

PerturbationLaw perturbation_law_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("law file: ") + e.what());
  }
  if (!j.is_object() || !j.contains("dimension") || !j.contains("atoms") || !j["atoms"].is_array()) {
    throw std::invalid_argument("law file: expected {\"dimension\": d, \"atoms\": [...]}");
  }
  const int dim = j["dimension"].get<int>();
  std::vector<std::vector<double>> atoms;
  std::vector<double> weights;
  for (const auto& a : j["atoms"]) {
    if (!a.contains("xi") || !a.contains("w")) throw std::invalid_argument("law file: atom needs xi and w");
    atoms.push_back(a["xi"].get<std::vector<double>>());
    weights.push_back(a["w"].get<double>());
  }
  return make_perturbation_law(dim, atoms, weights);
}

PerturbationLaw load_perturbation_law(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open law file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return perturbation_law_from_json(ss.str());
}

PerturbationLaw two_atom_law() {
  return make_perturbation_law(2, {{0.75, -0.75, 0.5, -0.5}, {0.75, -0.75, -0.5, 0.5}}, {0.5, 0.5});
}

std::array<double, kMaxDim> SiteConfig::drift() const {
  std::array<double, kMaxDim> d{};
  for (int a = 0; a < dim; ++a) d[a] = omega[2 * a] - omega[2 * a + 1];
  return d;
}

double ellipticity_kappa(const TransitionKernel& p0, double epsilon) {
  const double k = p0.min_prob() - epsilon;
  if (!(k > 0.0)) {
    throw std::invalid_argument("disorder epsilon = " + std::to_string(epsilon) +
                                " is not below min p0 = " + std::to_string(p0.min_prob()) + " (kappa <= 0)");
  }
  return k;
}

EnvironmentField::EnvironmentField(TransitionKernel p0, double epsilon, PerturbationLaw law, std::uint64_t seed)
    : p0_(p0), epsilon_(epsilon), law_(std::move(law)), seed_(seed) {
  if (law_.dim() != p0_.dim()) throw std::invalid_argument("environment: law and p0 dimensions differ");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("environment: epsilon must lie in [0,1)");
  ellipticity_kappa(p0_, epsilon_);
  const int nd = p0_.num_dirs();
  double c = 0.0;
  for (int a = 0; a < law_.num_atoms(); ++a) {
    c += law_.weight(a);
    cum_weights_.push_back(c);
    DirVector row{}, cdf{};
    double s = 0.0;
    for (int e = 0; e < nd; ++e) {
      row[e] = p0_(e) + epsilon_ * law_.atom(a)[e];
      if (row[e] < 0.0) throw std::invalid_argument("environment: negative transition probability for an atom");
      s += row[e];
      cdf[e] = s;
    }
    cdf[nd - 1] = 1.0;
    atom_omega_.push_back(row);
    atom_cdf_.push_back(cdf);
  }
  cum_weights_.back() = 1.0;
}

int EnvironmentField::atom_at(const Site& x) const {
  const std::size_t n = cum_weights_.size();
  if (n == 1) return 0;
  const double u = to_unit(hash_site(seed_, x + offset_, dim()));
  for (std::size_t a = 0; a + 1 < n; ++a) {
    if (u < cum_weights_[a]) return static_cast<int>(a);
  }
  return static_cast<int>(n - 1);
}

SiteConfig EnvironmentField::site_omega(const Site& x) const {
  SiteConfig s;
  s.dim = dim();
  s.atom = atom_at(x);
  s.omega = atom_omega_[s.atom];
  for (int e = 0; e < p0_.num_dirs(); ++e) {
    s.xi[e] = law_.atom(s.atom)[e];
    s.xi_bar[e] = law_.xi_bar(s.atom, e);
  }
  return s;
}

EnvironmentField EnvironmentField::shifted(const Site& v) const {
  EnvironmentField f = *this;
  f.offset_ = offset_ + v;
  return f;
}

EnvironmentField EnvironmentField::with_seed(std::uint64_t seed) const {
  EnvironmentField f = *this;
  f.seed_ = seed;
  return f;
}

LdCheck check_ld(const EnvironmentField& field) {
  const double mean_drift = field.p0().drift()[0] + field.epsilon() * (field.law().mean()[0] - field.law().mean()[1]);
  LdCheck out;
  out.margin = mean_drift - field.epsilon();
  out.holds = out.margin >= 0.0;
  return out;
}

TransitionKernel p_epsilon(const TransitionKernel& p0, double epsilon, const PerturbationLaw& law) {
  std::vector<double> p(p0.num_dirs());
  for (int e = 0; e < p0.num_dirs(); ++e) p[e] = p0(e) + epsilon * law.mean()[e];
  return TransitionKernel(p0.dim(), p);
}

}  // namespace rwre
