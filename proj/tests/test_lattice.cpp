#include <catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "rwre/lattice.hpp"
#include "rwre/rng.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

TEST_CASE("directions are 2d distinct values and negation is an involution") {
  for (int d = 1; d <= kMaxDim; ++d) {
    std::set<Site> seen;
    for (int i = 0; i < num_directions(d); ++i) {
      const Direction e = Direction::from_index(i);
      CHECK(e.index() == i);
      CHECK(-(-e) == e);
      CHECK((-e).index() == opposite(i));
      CHECK(e.site().norm1() == 1);
      seen.insert(e.site());
    }
    CHECK(seen.size() == static_cast<std::size_t>(2 * d));
  }
}

TEST_CASE("box indexing round-trips") {
  const Box box(3, Site{-2, 0, 1}, Site{1, 3, 2});
  CHECK(box.size() == 4u * 4u * 2u);
  for (std::size_t i = 0; i < box.size(); ++i) {
    CHECK(box.index(box.site(i)) == i);
    CHECK(box.contains(box.site(i)));
  }
  CHECK_FALSE(box.contains(Site{2, 0, 1}));
  CHECK(box.depth(Site{-2, 1, 1}) == 1);
  CHECK(Box::centered(2, Site{}, 3).depth(Site{}) == 4);
}

TEST_CASE("site hashing is deterministic and site dependent") {
  CHECK(hash_site(7, Site{1, 2}, 2) == hash_site(7, Site{1, 2}, 2));
  CHECK(hash_site(7, Site{1, 2}, 2) != hash_site(7, Site{2, 1}, 2));
  CHECK(hash_site(7, Site{1, 2}, 2) != hash_site(8, Site{1, 2}, 2));
}

TEST_CASE("geometric killing time has mean 1/(1-delta)") {
  auto eng = make_engine(11, stream::killing, 0);
  const double delta = 0.9;
  const int n = 200000;
  std::vector<double> taus(n);
  for (auto& t : taus) t = static_cast<double>(draw_geometric_tau(eng, delta));
  const auto est = mean_and_se(taus);
  CHECK(std::abs(est.value - 1.0 / (1.0 - delta)) < 4.0 * est.se);
  for (double t : taus) REQUIRE(t >= 1.0);
}

TEST_CASE("pairwise sum and jackknife basics") {
  std::vector<double> xs(1000);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = 0.1 * static_cast<double>(i);
  CHECK(pairwise_sum(xs) == Catch::Approx(0.1 * 999.0 * 1000.0 / 2.0).epsilon(1e-14));
  const std::vector<double> num{1, 2, 3, 4}, den{2, 2, 2, 2};
  const auto r = jackknife_ratio(num, den);
  CHECK(r.value == Catch::Approx(10.0 / 8.0));
  // For equal denominators the jackknife reduces to the usual standard error of the mean of num/den.
  const std::vector<double> ratios{0.5, 1.0, 1.5, 2.0};
  CHECK(r.se == Catch::Approx(mean_and_se(ratios).se));
}

TEST_CASE("weighted least squares recovers an exact line") {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto fit = least_squares(x, y);
  CHECK(fit.slope == Catch::Approx(2.0));
  CHECK(fit.intercept == Catch::Approx(1.0));
}
