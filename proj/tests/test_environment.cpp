#include <catch_amalgamated.hpp>

#include <cmath>

#include "rwre/environment.hpp"

using namespace rwre;
using Catch::Approx;

TEST_CASE("perturbation law validation and moments") {
  const auto zero = make_perturbation_law(2, {{0, 0, 0, 0}}, {1.0});
  for (int e = 0; e < 4; ++e) {
    CHECK(zero.mean()[e] == 0.0);
    for (int f = 0; f < 4; ++f) CHECK(zero.covariance(e, f) == 0.0);
  }
  const auto law = two_atom_law();
  CHECK(law.mean()[0] == 0.75);
  CHECK(law.mean()[1] == -0.75);
  CHECK(law.mean()[2] == 0.0);
  CHECK(law.mean()[3] == 0.0);
  CHECK(law.covariance(2, 2) == 0.25);
  CHECK(law.covariance(2, 3) == -0.25);
  CHECK(law.covariance(0, 0) == 0.0);
  CHECK(law.xi_bar(0, 2) == 0.5);
  CHECK_THROWS(make_perturbation_law(2, {{0.1, 0, 0, 0}}, {1.0}));
  CHECK_THROWS(make_perturbation_law(2, {{1.5, -1.5, 0, 0}}, {1.0}));
  CHECK_THROWS(make_perturbation_law(2, {{0, 0, 0, 0}, {0, 0, 0, 0}}, {0.7, 0.7}));
  CHECK_THROWS(make_perturbation_law(2, {{0, 0, 0}}, {1.0}));
}

TEST_CASE("law JSON round trip") {
  const auto law = two_atom_law();
  const auto back = perturbation_law_from_json(law.to_json());
  REQUIRE(back.num_atoms() == 2);
  CHECK(back.atom(1)[3] == 0.5);
  CHECK(back.weight(0) == 0.5);
  CHECK_THROWS(perturbation_law_from_json("{\"dimension\": 2}"));
  CHECK_THROWS(perturbation_law_from_json("not json"));
}

TEST_CASE("ellipticity and construction bounds") {
  const auto p0 = TransitionKernel::symmetric(2);
  CHECK(ellipticity_kappa(p0, 0.1) == Approx(0.15));
  CHECK(ellipticity_kappa(p0, 1e-9) == Approx(0.25).margin(1e-8));
  CHECK_THROWS(EnvironmentField(p0, 0.25, two_atom_law(), 1));
  const EnvironmentField f(p0, 0.1, two_atom_law(), 1);
  CHECK(f.kappa() == Approx(0.15));
}

TEST_CASE("averaged kernel") {
  const auto p0 = TransitionKernel::symmetric(2);
  const auto centered = make_perturbation_law(2, {{0.5, -0.5, 0, 0}, {-0.5, 0.5, 0, 0}}, {0.5, 0.5});
  CHECK(p_epsilon(p0, 0.1, centered) == p0);
  const auto pe = p_epsilon(p0, 0.1, two_atom_law());
  CHECK(pe(0) == Approx(0.325));
  CHECK(pe(1) == Approx(0.175));
  CHECK(pe(2) == Approx(0.25));
  CHECK(pe(3) == Approx(0.25));
}

TEST_CASE("local drift condition") {
  const auto p0 = TransitionKernel::symmetric(2);
  const auto ld = check_ld(EnvironmentField(p0, 0.1, two_atom_law(), 3));
  CHECK(ld.holds);
  CHECK(ld.margin == Approx(0.05));
  const auto centered = make_perturbation_law(2, {{0.5, -0.5, 0, 0}, {-0.5, 0.5, 0, 0}}, {0.5, 0.5});
  CHECK_FALSE(check_ld(EnvironmentField(p0, 0.1, centered, 3)).holds);
  const TransitionKernel tilted(2, {0.35, 0.15, 0.25, 0.25});
  CHECK(check_ld(EnvironmentField(tilted, 0.1, centered, 3)).holds);
  // Adding a zero-weight atom leaves the condition unchanged.
  const auto padded = make_perturbation_law(2, {{0.75, -0.75, 0.5, -0.5}, {0.75, -0.75, -0.5, 0.5}, {-1, 1, 0, 0}},
                                            {0.5, 0.5, 0.0});
  CHECK(check_ld(EnvironmentField(p0, 0.1, padded, 3)).margin == ld.margin);
}

TEST_CASE("site lookups: determinism, rows and translation") {
  const auto p0 = TransitionKernel::symmetric(2);
  const EnvironmentField f(p0, 0.1, two_atom_law(), 42);
  for (int a = -20; a <= 20; ++a) {
    for (int b = -20; b <= 20; ++b) {
      const Site x{a, b};
      const auto s = f.site_omega(x);
      CHECK(s.atom == f.site_omega(x).atom);
      double sum = 0.0;
      for (int e = 0; e < 4; ++e) {
        REQUIRE(s.omega[e] >= f.kappa() - 1e-15);
        sum += s.omega[e];
        REQUIRE(s.xi_bar[e] == s.xi[e] - f.law().mean()[e]);
      }
      REQUIRE(sum == Approx(1.0).margin(1e-15));
      const Site v{3, -7};
      REQUIRE(f.shifted(v).atom_at(x) == f.atom_at(x + v));
    }
  }
  const EnvironmentField single(p0, 0.1, make_perturbation_law(2, {{0.2, -0.1, 0, -0.1}}, {1.0}), 9);
  CHECK(single.site_omega(Site{5, 5}).omega[0] == Approx(0.27));
}

TEST_CASE("atom frequencies over a million sites match the weights") {
  const auto p0 = TransitionKernel::symmetric(2);
  const auto law = make_perturbation_law(2, {{0.5, -0.5, 0, 0}, {0, 0, 0.5, -0.5}, {0, 0, 0, 0}}, {0.2, 0.3, 0.5});
  const EnvironmentField f(p0, 0.1, law, 2024);
  std::vector<double> counts(3, 0.0);
  const int side = 1000;
  for (int a = 0; a < side; ++a) {
    for (int b = 0; b < side; ++b) counts[f.atom_at(Site{a - 500, b - 500})] += 1.0;
  }
  const double n = static_cast<double>(side) * side;
  double chi2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double expect = n * law.weight(a);
    const double sd = std::sqrt(n * law.weight(a) * (1.0 - law.weight(a)));
    CHECK(std::abs(counts[a] - expect) < 4.0 * sd);
    chi2 += (counts[a] - expect) * (counts[a] - expect) / expect;
  }
  // 2 degrees of freedom: P(chi2 > 18.4) = 1e-4.
  CHECK(chi2 < 18.4);

  // Empirical mean of xi(e1) converges at the CLT rate.
  double s = 0.0, s2 = 0.0;
  const int m = 200000;
  for (int i = 0; i < m; ++i) {
    const double x = f.site_omega(Site{i, -i / 7}).xi[0];
    s += x;
    s2 += x * x;
  }
  const double mean = s / m;
  const double var = s2 / m - mean * mean;
  CHECK(std::abs(mean - law.mean()[0]) < 4.0 * std::sqrt(var / m));
}

TEST_CASE("neighbouring sites are uncorrelated") {
  const auto p0 = TransitionKernel::symmetric(2);
  const EnvironmentField f(p0, 0.1, two_atom_law(), 77);
  const int n = 200000;
  double sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    const Site x{i % 997, i / 997};
    sxy += (f.atom_at(x) - 0.5) * (f.atom_at(step(x, 0)) - 0.5);
  }
  // Each product is +-1/4 with mean 0 under independence.
  CHECK(std::abs(sxy / n) < 4.0 * 0.25 / std::sqrt(static_cast<double>(n)));
}
