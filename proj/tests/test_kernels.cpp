#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "rwre/kernels.hpp"

using namespace rwre;
using Catch::Approx;

namespace {

const double kPi = std::numbers::pi;

TransitionKernel random_elliptic_kernel(int d, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> w(2 * d);
  double s = 0.0;
  for (auto& x : w) s += (x = u(eng));
  for (auto& x : w) x /= s;
  // absorb rounding so the sum is 1 to machine precision
  double rest = 1.0;
  for (int i = 0; i + 1 < 2 * d; ++i) rest -= w[i];
  w.back() = rest;
  return TransitionKernel(d, w);
}

}  // namespace

TEST_CASE("reverse_kernel") {
  const auto sym = TransitionKernel::symmetric(3);
  CHECK(reverse_kernel(sym) == sym);
  const TransitionKernel p(1, {0.7, 0.3});
  const auto q = reverse_kernel(p);
  CHECK(q(0) == 0.3);
  CHECK(q(1) == 0.7);
  std::mt19937_64 eng(5);
  for (int t = 0; t < 20; ++t) {
    const auto r = random_elliptic_kernel(1 + t % 4, eng);
    CHECK(reverse_kernel(reverse_kernel(r)) == r);
  }
}

TEST_CASE("transition kernel validation") {
  CHECK_THROWS(TransitionKernel(2, {0.25, 0.25, 0.25, 0.3}));
  CHECK_THROWS(TransitionKernel(2, {0.5, -0.1, 0.3, 0.3}));
  CHECK_THROWS(TransitionKernel(2, {0.5, 0.5}));
  CHECK(TransitionKernel(2, {0.5, 0.5, 0.0, 0.0}).strictly_elliptic() == false);
  CHECK(TransitionKernel::symmetric(2).strictly_elliptic());
}

TEST_CASE("n-step law: empty product and two-step enumeration") {
  const auto p = TransitionKernel::symmetric(2);
  const auto t0 = nstep_probability(p, 0, 0);
  CHECK(t0.at(Site{}) == 1.0);
  CHECK(t0.values().size() == 1u);

  // All 16 two-step paths, each with probability 1/16.
  double back_home = 0.0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      if (step(step(Site{}, a), b) == Site{}) back_home += p(a) * p(b);
    }
  }
  CHECK(back_home == 0.25);
  CHECK(nstep_probability(p, 2, 2).at(Site{}) == Approx(back_home).epsilon(1e-15));
  CHECK(nstep_probability_at(p, 2, Site{})[2] == Approx(back_home).epsilon(1e-13));
  CHECK_THROWS(nstep_probability(p, -1, 3));
  CHECK_THROWS(nstep_probability(p, 4, 3));
}

TEST_CASE("n-step law: nonnegative and stochastic for random kernels") {
  std::mt19937_64 eng(17);
  for (int t = 0; t < 12; ++t) {
    const int d = 1 + t % 3;
    const auto p = random_elliptic_kernel(d, eng);
    const int n = 3 + t;
    const auto tab = nstep_probability(p, n, n, Exec::serial);
    for (double v : tab.values()) REQUIRE(v >= 0.0);
    CHECK(tab.total() == Approx(1.0).margin(1e-13));
    CHECK(tab.lost_mass() == 0.0);
  }
}

TEST_CASE("n-step law: truncation is explicit and accounted for") {
  const auto p = TransitionKernel::symmetric(2);
  const auto tab = nstep_probability(p, 10, 3, Exec::serial, true);
  CHECK(tab.lost_mass() > 0.0);
  CHECK(tab.total() + tab.lost_mass() == Approx(1.0).margin(1e-13));
}

TEST_CASE("per-axis factorisation matches repeated convolution") {
  std::mt19937_64 eng(23);
  for (int d = 1; d <= 3; ++d) {
    const auto p = random_elliptic_kernel(d, eng);
    const int n = 14;
    std::vector<NStepTable> tables;
    for (int k = 0; k <= n; ++k) tables.push_back(nstep_probability(p, k, n, Exec::serial));
    for (const Site y : {Site{0, 0, 0}, Site{1, 0, 0}, Site{-2, 1, 0}, Site{3, -1, 2}, Site{0, 2, -2}}) {
      Site yd;
      for (int a = 0; a < d; ++a) yd[a] = y[a];
      const auto series = nstep_probability_at(p, n, yd);
      for (int k = 0; k <= n; ++k) CHECK(series[k] == Approx(tables[k].at(yd)).margin(1e-14).epsilon(1e-11));
    }
  }
}

TEST_CASE("serial and parallel convolution agree bitwise") {
  set_worker_count(3);
  std::mt19937_64 eng(3);
  const auto p = random_elliptic_kernel(2, eng);
  const auto a = nstep_probability(p, 25, 25, Exec::serial);
  const auto b = nstep_probability(p, 25, 25, Exec::parallel);
  REQUIRE(a.values().size() == b.values().size());
  for (std::size_t i = 0; i < a.values().size(); ++i) REQUIRE(a.values()[i] == b.values()[i]);
  set_worker_count(1);
}

TEST_CASE("serial and parallel quadrature agree bitwise") {
  set_worker_count(4);
  const TransitionKernel p(2, {0.3, 0.2, 0.25, 0.25});
  const QuadratureSpec q{64, 128};
  const auto a = potential_kernel_fourier(p, Site{2, 1}, q, Exec::serial);
  const auto b = potential_kernel_fourier(p, Site{2, 1}, q, Exec::parallel);
  CHECK(a.coarse == b.coarse);
  CHECK(a.fine == b.fine);
  set_worker_count(1);
}

TEST_CASE("J vanishes at the origin for every method") {
  const auto p = TransitionKernel::symmetric(2);
  CHECK(potential_kernel_truncated(p, Site{}, 100).value == 0.0);
  CHECK(potential_kernel_fourier(p, Site{}).value == 0.0);
  CHECK(potential_kernel_2d_ssrw(Site{}) == 0.0);
  const TransitionKernel drifted(3, {0.2, 0.1, 0.2, 0.2, 0.15, 0.15});
  CHECK(potential_kernel_truncated(drifted, Site{}, 100).value == 0.0);
  CHECK(potential_kernel_fourier(drifted, Site{}).value == 0.0);
}

TEST_CASE("exact 2D recursion reproduces the published table") {
  const Ssrw2dPotential j(8);
  CHECK(j.value(Site{0, 0}) == 0.0);
  CHECK(j.value(Site{1, 0}) == -1.0);
  CHECK(j.value(Site{-1, 0}) == -1.0);
  CHECK(j.value(Site{0, -1}) == -1.0);
  CHECK(j.value(Site{1, 1}) == Approx(-4.0 / kPi).epsilon(1e-15));
  CHECK(j.value(Site{-1, 1}) == Approx(-4.0 / kPi).epsilon(1e-15));
  CHECK(j.value(Site{2, 0}) == Approx(8.0 / kPi - 4.0).epsilon(1e-15));
  CHECK(j.value(Site{0, -2}) == Approx(8.0 / kPi - 4.0).epsilon(1e-15));
  CHECK(j.exact(Site{2, 0}).str() == "-4 + 8/pi");
  CHECK_THROWS_AS(j.exact(Site{9, 0}), std::out_of_range);
}

TEST_CASE("exact 2D values are harmonic away from the origin") {
  const Ssrw2dPotential j(10);
  for (int a = -9; a <= 9; ++a) {
    for (int b = -9; b <= 9; ++b) {
      if (a == 0 && b == 0) continue;
      const auto& c = j.exact(Site{a, b});
      Ssrw2dPotential::Rational r = 0, q = 0;
      for (int dir = 0; dir < 4; ++dir) {
        const auto& n = j.exact(step(Site{a, b}, dir));
        r += n.rational;
        q += n.over_pi;
      }
      REQUIRE(r == 4 * c.rational);
      REQUIRE(q == 4 * c.over_pi);
    }
  }
  // At the origin the average of the neighbours exceeds J(0) by one.
  CHECK(j.value(Site{1, 0}) * 4.0 / 4.0 - 0.0 == -1.0);
}

TEST_CASE("Fourier quadrature reproduces the published table") {
  const auto p = TransitionKernel::symmetric(2);
  const auto f02 = potential_kernel_fourier(p, Site{0, 2});
  CHECK(f02.prefactor == 0.0);
  CHECK(std::abs(f02.value - (8.0 / kPi - 4.0)) < 1e-4);
  CHECK(std::abs(f02.value - (8.0 / kPi - 4.0)) < f02.tolerance + 1e-12);
  CHECK(std::abs(potential_kernel_fourier(p, Site{1, 0}).value + 1.0) < 1e-4);
  CHECK(std::abs(potential_kernel_fourier(p, Site{1, -1}).value + 4.0 / kPi) < 1e-4);
  CHECK_THROWS(potential_kernel_fourier(TransitionKernel(1, {0.5, 0.5}), Site{1}));
  CHECK_THROWS(potential_kernel_fourier(TransitionKernel(2, {0.5, 0.5, 0.0, 0.0}), Site{1, 0}));
}

TEST_CASE("Fourier agrees with the exact recursion on the radius-4 box") {
  const auto p = TransitionKernel::symmetric(2);
  const Ssrw2dPotential exact(4);
  for (int a = 0; a <= 4; ++a) {
    for (int b = 0; b <= a; ++b) {
      const auto f = potential_kernel_fourier(p, Site{a, b});
      INFO("x = (" << a << "," << b << ")");
      CHECK(std::abs(f.value - exact.value(Site{a, b})) < 1e-4);
    }
  }
}

TEST_CASE("truncated sum in 2D approaches the table with an honest error bar") {
  const auto p = TransitionKernel::symmetric(2);
  const auto t01 = potential_kernel_truncated(p, Site{0, 1}, 10000);
  CHECK(std::abs(t01.value + 1.0) <= t01.tolerance);
  const auto t11 = potential_kernel_truncated(p, Site{1, 1}, 10000);
  CHECK(std::abs(t11.value + 4.0 / kPi) <= t11.tolerance);
  CHECK(std::abs(t11.extrapolated + 4.0 / kPi) < std::abs(t11.value + 4.0 / kPi));
  // A short sum is flagged as unconverged.
  CHECK_FALSE(potential_kernel_truncated(p, Site{1, 1}, 50, 1e-6).converged);
}

TEST_CASE("3D truncated sum and Fourier quadrature agree") {
  const auto p = TransitionKernel::symmetric(3);
  const auto t = potential_kernel_truncated(p, Site{1, 0, 0}, 10000);
  const auto f = potential_kernel_fourier(p, Site{1, 0, 0});
  INFO("truncated " << t.value << " +- " << t.tolerance << ", fourier " << f.value << " +- " << f.tolerance);
  CHECK(std::abs(t.value - f.value) <= t.tolerance + f.tolerance);
  // G(0,0) = 1 + G(e1,0) for the symmetric walk, so J(e1) = -1 in every dimension.
  CHECK(std::abs(t.value + 1.0) <= t.tolerance);
}

TEST_CASE("drifted kernels: truncated sum and Fourier agree") {
  const TransitionKernel p(2, {0.32, 0.18, 0.25, 0.25});
  for (const Site x : {Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{2, -1}}) {
    const auto t = potential_kernel_truncated(p, x, 4000);
    const auto f = potential_kernel_fourier(p, x);
    INFO(x.str(2) << " truncated " << t.value << " fourier " << f.value);
    CHECK(std::abs(t.value - f.value) <= t.tolerance + f.tolerance + 1e-9);
  }
}

TEST_CASE("phi_eps") {
  CHECK(phi_eps(TransitionKernel::symmetric(3), Site{2, -1, 5}) == Approx(1.0).epsilon(1e-15));
  const TransitionKernel p(2, {0.36, 0.16, 0.24, 0.24});
  CHECK(phi_eps(p, Site{}) == 1.0);
  CHECK(phi_eps(p, Site{2, 0}) == Approx(4.0 / 9.0).epsilon(1e-15));
  std::mt19937_64 eng(9);
  std::uniform_int_distribution<int> coord(-4, 4);
  for (int t = 0; t < 50; ++t) {
    const auto q = random_elliptic_kernel(3, eng);
    const Site u{coord(eng), coord(eng), coord(eng)};
    const Site v{coord(eng), coord(eng), coord(eng)};
    CHECK(phi_eps(q, u + v) == Approx(phi_eps(q, u) * phi_eps(q, v)).epsilon(1e-13));
  }
}

TEST_CASE("kernel tables") {
  const auto p = TransitionKernel::symmetric(2);
  const auto rec = make_kernel_table(p, 2, KernelMethod::recursion_2d);
  CHECK(rec.at(Site{0, 0}) == 0.0);
  CHECK(rec.at(Site{-2, 0}) == Approx(8.0 / kPi - 4.0));
  CHECK_THROWS_AS(rec.at(Site{3, 0}), std::out_of_range);
  CHECK_THROWS(make_kernel_table(TransitionKernel(2, {0.3, 0.2, 0.25, 0.25}), 2, KernelMethod::recursion_2d));
  CHECK(kernel_method_from_string(to_string(KernelMethod::truncated_sum)) == KernelMethod::truncated_sum);
  CHECK_THROWS(kernel_method_from_string("spline"));
}
