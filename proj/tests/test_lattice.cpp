#include <gtest/gtest.h>

#include <set>
#include <unordered_set>

#include "pssim/lattice.hpp"
#include "pssim/random.hpp"

using namespace pssim;

TEST(Ball, RadiusZeroIsTheCentre) {
  const auto b = ball_sites(Site{0}, 0);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0], Site{0});
}

TEST(Ball, TwoDimensionalUnitBall) {
  const auto b = ball_sites(Site{0, 0}, 1);
  const std::set<Site> got(b.begin(), b.end());
  const std::set<Site> want{Site{0, 0}, Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}};
  EXPECT_EQ(got, want);
}

TEST(Ball, OneDimensionalOffCentre) {
  const auto b = ball_sites(Site{3}, 2);
  EXPECT_EQ(b, (std::vector<Site>{Site{1}, Site{2}, Site{3}, Site{4}, Site{5}}));
  EXPECT_EQ(ball_size(1, 2), 5u);
}

TEST(Ball, NegativeRadiusRejected) { EXPECT_THROW(ball_sites(Site{0}, -1), std::invalid_argument); }

TEST(Ball, SizesMatchEnumerationAndAreTranslationInvariant) {
  for (int d = 1; d <= 3; ++d)
    for (int k = 0; k <= 5; ++k) {
      const Site c = d == 1 ? Site{7} : d == 2 ? Site{-2, 5} : Site{1, 1, -4};
      const auto b = ball_sites(c, k);
      EXPECT_EQ(b.size(), ball_size(d, k));
      EXPECT_EQ(ball_sites(Site(d), k).size(), b.size());
      for (const auto& s : b) EXPECT_LE(l1_distance(s, c), k);
    }
  EXPECT_EQ(ball_size(2, 1), 5u);
  EXPECT_EQ(ball_size(2, 2), 13u);
  EXPECT_EQ(ball_size(3, 1), 7u);
  EXPECT_EQ(shell_size(1, 3), 2u);
}

TEST(Ball, NestedAndSorted) {
  for (int k = 0; k < 4; ++k) {
    const auto small = ball_sites(Site{0, 0}, k);
    const auto big = ball_sites(Site{0, 0}, k + 1);
    EXPECT_TRUE(std::is_sorted(small.begin(), small.end()));
    EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
  }
}

TEST(Restrict, AllDefault) {
  SparseConfiguration cfg(SpinValue::real(1.0));
  const auto local = restrict(cfg, Ball{Site{0}, 2});
  ASSERT_EQ(local.size(), 5u);
  for (const auto& [s, v] : local) EXPECT_EQ(v, SpinValue::real(1.0));
}

TEST(Restrict, PicksAssignedValues) {
  SparseConfiguration cfg;
  cfg.set(Site{0}, 1.0);
  cfg.set(Site{5}, -1.0);
  const auto local = restrict(cfg, Ball{Site{0}, 1});
  const LocalConfiguration want{{Site{-1}, SpinValue::cemetery()},
                                {Site{0}, SpinValue::real(1.0)},
                                {Site{1}, SpinValue::cemetery()}};
  EXPECT_EQ(local, want);
}

TEST(Restrict, CompositionAndIdempotence) {
  SparseConfiguration cfg;
  for (int x = -4; x <= 4; ++x) cfg.set(Site{x, x % 2}, static_cast<double>(x));
  const Ball big{Site{0, 0}, 3}, small{Site{0, 0}, 1};
  EXPECT_EQ(restrict(restrict(cfg, big), small), restrict(cfg, small));
  EXPECT_EQ(restrict(restrict(cfg, big), big), restrict(cfg, big));
}

TEST(SpinValue, CemeteryIsDistinct) {
  EXPECT_TRUE(SpinValue::cemetery().is_cemetery());
  EXPECT_FALSE(SpinValue::real(0.0).is_cemetery());
  EXPECT_NE(SpinValue::cemetery(), SpinValue::real(0.0));
  EXPECT_THROW((void)SpinValue::cemetery().value(), std::logic_error);
}

TEST(SparseConfiguration, CemeteryOnlyAsDefault) {
  SparseConfiguration cfg;
  EXPECT_TRUE(cfg.get(Site{4}).is_cemetery());
  EXPECT_THROW(cfg.set(Site{0}, SpinValue::cemetery()), std::invalid_argument);
  cfg.set(Site{0}, SpinValue::real(0.5));
  EXPECT_EQ(cfg.get(Site{0}).value(), 0.5);
}

TEST(Site, HashAndOrderConsistent) {
  std::unordered_set<Site> seen;
  for (const auto& s : ball_sites(Site{0, 0}, 4)) EXPECT_TRUE(seen.insert(s).second);
  EXPECT_TRUE(seen.count(Site{2, -2}) == 1);
  EXPECT_LT((Site{-1, 5}), (Site{0, -5}));
  EXPECT_EQ((Site{3, -1}.str()), "(3,-1)");
  EXPECT_EQ((Site{1, 2}.parity()), 1);
  EXPECT_EQ((Site{-1, -1}.parity()), 0);
}

TEST(Stream, ReproducibleAndLaneSeparated) {
  Stream a(42, 3, 0), b(42, 3, 0), c(42, 3, 1), d(42, 4, 0);
  for (int n = 0; n < 10; ++n) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
    EXPECT_NE(x, d.next());
  }
  Stream u(1);
  for (int n = 0; n < 1000; ++n) {
    const double v = u.uniform();
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}
