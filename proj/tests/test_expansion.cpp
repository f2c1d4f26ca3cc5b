#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "rwre/expansion.hpp"

using namespace rwre;
using Catch::Approx;

namespace {

const double kPi = std::numbers::pi;

const PotentialKernelTable& sym_table() {
  static const auto t = make_kernel_table(TransitionKernel::symmetric(2), 3, KernelMethod::recursion_2d);
  return t;
}

// Random zero-sum atoms with entries in [-0.5, 0.5].
PerturbationLaw random_law(int dim, int n_atoms, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<std::vector<double>> atoms;
  std::vector<double> w;
  for (int a = 0; a < n_atoms; ++a) {
    std::vector<double> v(2 * dim);
    double s = 0.0;
    for (auto& x : v) s += (x = u(rng));
    for (auto& x : v) x -= s / (2 * dim);
    double t = 0.0;
    for (int e = 0; e + 1 < 2 * dim; ++e) t += v[e];
    v.back() = -t;
    atoms.push_back(v);
    w.push_back(u(rng) + 1.0);
  }
  double ws = 0.0;
  for (double x : w) ws += x;
  for (auto& x : w) x /= ws;
  double r = 1.0;
  for (int a = 0; a + 1 < n_atoms; ++a) r -= w[a];
  w.back() = r;
  return make_perturbation_law(dim, atoms, w);
}

}  // namespace

TEST_CASE("first-order density basics") {
  const auto law = two_atom_law();
  const std::vector<Site> b{Site{0, 1}};
  CHECK(density_first_order(BoxConfiguration{{0}}, b, law, 0.0, sym_table()) == 1.0);
  // xibar(z1, .) = (0, 0, 0.5, -0.5): 1 + eps (0.5 J(0,2) - 0.5 J(0,0))
  const double eps = 0.1;
  const double d = density_first_order(BoxConfiguration{{0}}, b, law, eps, sym_table());
  CHECK(d == Approx(1.0 + 0.5 * eps * (8.0 / kPi - 4.0)).epsilon(1e-12));
  CHECK((d - 1.0) / eps == Approx(-0.72676).margin(5e-6));

  const auto small = make_kernel_table(TransitionKernel::symmetric(2), 1, KernelMethod::recursion_2d);
  CHECK_THROWS_AS(density_first_order(BoxConfiguration{{0}}, {Site{0, 1}}, law, eps, small), std::out_of_range);
  CHECK_THROWS(density_first_order(BoxConfiguration{{0, 1}}, b, law, eps, sym_table()));
}

TEST_CASE("first-order densities average to one under the product law") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto law = random_law(2, 3, rng);
    const ConfigurationSpace space({Site{}, Site{0, 1}, Site{1, -1}}, law);
    const auto pred = predict_densities(space, law, 0.07, sym_table(), "p0");
    CHECK(pred.p_mean(space) == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("two-site closed form") {
  CHECK(corollary2_density(DirVector{}, 0.1) == 1.0);
  CHECK(corollary2_density(DirVector{0.25, 0.25, 0, -0.5}, 0.1) == Approx(1 - 0.2 / kPi).epsilon(1e-14));
  CHECK(corollary2_density(DirVector{0.25, 0.25, 0, -0.5}, 0.1) == Approx(0.936338).margin(5e-7));
  CHECK_THROWS(corollary2_density(DirVector{}, 0.1, 3));

  std::mt19937_64 rng(11);
  const std::vector<Site> b{Site{}, Site{0, 1}};
  int compared = 0;
  while (compared < 100) {
    const auto law = random_law(2, 2, rng);
    const ConfigurationSpace space(b, law);
    for (int c = 0; c < space.size() && compared < 100; ++c, ++compared) {
      const auto conf = space.config(c);
      DirVector xb{};
      for (int e = 0; e < 4; ++e) xb[e] = law.xi_bar(conf.atoms[1], e);
      CHECK(density_first_order(conf, b, law, 0.1, sym_table()) == Approx(corollary2_density(xb, 0.1)).margin(1e-12));
    }
  }
}

TEST_CASE("prediction CSV joins on configuration id") {
  const auto law = two_atom_law();
  const ConfigurationSpace space({Site{0, 1}}, law);
  const auto pred = predict_densities(space, law, 0.1, sym_table(), "p0");
  std::ostringstream out;
  pred.write_csv(out);
  CHECK(out.str().rfind("config_id,a1,prediction\n0,0,", 0) == 0);
}

TEST_CASE("velocity expansion") {
  const auto p0 = TransitionKernel::symmetric(2);
  const auto law = two_atom_law();
  const auto J = make_kernel_table(p_epsilon(p0, 0.1, law), 1, KernelMethod::fourier);
  const auto v0 = velocity_expansion(p0, law, 0.0, J);
  CHECK(v0.v[0] == 0.0);
  CHECK(v0.v[1] == 0.0);
  // d2 is along e2 with weight J(e2) - J(-e2), which vanishes for this law.
  const auto v = velocity_expansion(p0, law, 0.1, J);
  CHECK(v.d1[0] == 1.5);
  CHECK(v.d2[0] == 0.0);
  CHECK(v.d2[1] == Approx(0.0).margin(1e-12));
  CHECK(v.v[0] == Approx(0.15).epsilon(1e-15));
}

TEST_CASE("d2 agrees with the enumerated one-site average") {
  std::mt19937_64 rng(23);
  const auto p0 = TransitionKernel::symmetric(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto law = random_law(2, 3, rng);
    for (double eps : {0.05, 0.1}) {
      const auto J = make_kernel_table(p_epsilon(p0, eps, law), 1, KernelMethod::fourier);
      const auto a = velocity_expansion(p0, law, eps, J);
      const auto b = velocity_q_average(p0, law, eps, J);
      for (int k = 0; k < 2; ++k) {
        CHECK(a.d2[k] == Approx(b.d2[k]).margin(1e-10));
        CHECK(a.v[k] == Approx(b.v[k]).margin(1e-13));
      }
    }
  }
  CHECK_THROWS(velocity_q_average(p0, two_atom_law(), 0.0, sym_table()));
}

TEST_CASE("J from the averaged or the unperturbed kernel changes v at higher order") {
  const auto p0 = TransitionKernel::symmetric(2);
  const auto law = make_perturbation_law(2, {{0.6, -0.2, 0.1, -0.5}, {-0.2, 0.6, -0.1, -0.3}}, {0.5, 0.5});
  const auto J0 = make_kernel_table(p0, 1, KernelMethod::fourier);
  std::vector<double> diff;
  for (double eps : {0.04, 0.02}) {
    const auto Je = make_kernel_table(p_epsilon(p0, eps, law), 1, KernelMethod::fourier);
    const auto a = velocity_expansion(p0, law, eps, Je);
    const auto b = velocity_expansion(p0, law, eps, J0);
    diff.push_back(std::hypot(a.v[0] - b.v[0], a.v[1] - b.v[1]));
  }
  // eps^3 log eps shrinks by about 8 log(eps)/log(eps/2) ~ 6.6 when eps halves.
  CHECK(diff[0] / diff[1] > 4.0);
  CHECK(diff[0] < 0.04 * 0.04);
}

TEST_CASE("kernel gap between averaged and unperturbed walks") {
  const auto p2 = TransitionKernel::symmetric(2);
  const auto centered = make_perturbation_law(2, {{0.5, -0.5, 0, 0}, {-0.5, 0.5, 0, 0}}, {0.5, 0.5});
  const auto z = j_epsilon_vs_j0_gap(p2, centered, 0.1, Site{1, 0});
  CHECK(z.gap == 0.0);
  CHECK(z.model == "linear");

  // d = 2 drift from the symmetric walk: the ratio follows eps log eps.
  const auto law = two_atom_law();
  const auto g1 = j_epsilon_vs_j0_gap(p2, law, 0.1, Site{-1, 0});
  const auto g2 = j_epsilon_vs_j0_gap(p2, law, 0.05, Site{-1, 0});
  const auto g3 = j_epsilon_vs_j0_gap(p2, law, 0.025, Site{-1, 0});
  CHECK(g1.model == "eps-log-eps");
  CHECK(g1.gap / g2.gap == Approx(model_gap_ratio("eps-log-eps", 0.1)).margin(0.05));
  CHECK(g2.gap / g3.gap == Approx(model_gap_ratio("eps-log-eps", 0.05)).margin(0.05));
  CHECK(model_gap_ratio("eps-log-eps", 0.1) == Approx(1.5372).margin(1e-4));

  // d = 3: linear rate.
  const auto p3 = TransitionKernel::symmetric(3);
  const auto law3 = make_perturbation_law(3, {{0.75, -0.75, 0.5, -0.5, 0, 0}, {0.75, -0.75, -0.5, 0.5, 0, 0}}, {0.5, 0.5});
  const auto h1 = j_epsilon_vs_j0_gap(p3, law3, 0.1, Site{-1, 0, 0});
  const auto h2 = j_epsilon_vs_j0_gap(p3, law3, 0.05, Site{-1, 0, 0});
  const auto h3 = j_epsilon_vs_j0_gap(p3, law3, 0.025, Site{-1, 0, 0});
  CHECK(h1.model == "linear");
  CHECK(h1.gap / h2.gap > 1.7);
  CHECK(h1.gap / h2.gap < 2.3);
  CHECK(std::abs(h2.gap / h3.gap - 2.0) < std::abs(h1.gap / h2.gap - 2.0));
}
