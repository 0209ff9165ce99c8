#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "pssim/sketch.hpp"

using namespace pssim;

namespace {

using Decomp = KalikowDecomposition<ExponentialModel>;

Decomp nn_ising(double beta, int d = 1) {
  return Decomp(ExponentialModel::ising(d, beta, InteractionKernel::nearest_neighbor(d, 1.0)));
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST(AncestorSet, PiTransformations) {
  AncestorSet c({Site{0}});
  c.apply(Site{0}, -1);
  EXPECT_TRUE(c.empty());

  AncestorSet d({Site{0}, Site{5}});
  d.apply(Site{0}, -1);
  EXPECT_EQ(d.sites(), std::vector<Site>{Site{5}});
  d.apply(Site{5}, 1);
  EXPECT_EQ(d.sites(), (std::vector<Site>{Site{4}, Site{5}, Site{6}}));
  d.apply(Site{9}, -1);  // absent site: no change
  EXPECT_EQ(d.size(), 3u);
  d.apply(Site{6}, 0);
  EXPECT_EQ(d.size(), 3u);
}

TEST(SketchStep, HomogeneousSiteChoiceIsUniform) {
  const auto dec = nn_ising(0.15);
  Stream rng(4);
  std::vector<int> hits(3, 0);
  const int n = 60000;
  for (int r = 0; r < n; ++r) {
    AncestorSet c({Site{0}, Site{10}, Site{20}});
    const auto ev = sketch_step(c, dec, rng);
    hits[static_cast<std::size_t>(ev.site[0] / 10)]++;
    EXPECT_TRUE(ev.range == -1 || ev.range == 1);
    // only the chosen site's neighbourhood changes
    if (ev.range == -1) EXPECT_EQ(c.size(), 2u);
    else EXPECT_EQ(c.size(), 5u);
  }
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(n), 1.0 / 3.0, 4.0 * std::sqrt(2.0 / 9.0 / n));
}

TEST(SketchStep, OrbitWeightedSiteChoice) {
  // Alternating field: masses differ by parity, so sites are chosen
  // proportionally to M.
  const Decomp dec(ExponentialModel::ising(1, 0.1, InteractionKernel::nearest_neighbor(1, 1.0),
                                           FieldFamily::alternating(0.0, 2.0)));
  const double m0 = dec.mass(Site{0}), m1 = dec.mass(Site{1});
  ASSERT_GT(m1, m0);
  Stream rng(12);
  int odd = 0;
  const int n = 100000;
  for (int r = 0; r < n; ++r) {
    AncestorSet c({Site{0}, Site{1}});
    odd += sketch_step(c, dec, rng).site[0] == 1;
  }
  const double p = m1 / (m0 + m1);
  EXPECT_NEAR(odd / static_cast<double>(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(BackwardSketch, ZeroBetaStopsAfterOneStep) {
  const auto dec = nn_ising(0.0);
  Stream rng(1);
  for (int r = 0; r < 100; ++r) {
    const auto rec = run_backward_sketch({Site{0}}, dec, rng);
    EXPECT_EQ(rec.n_stop, 1u);
    EXPECT_EQ(rec.events.size(), 1u);
    EXPECT_EQ(rec.events[0].range, -1);
    EXPECT_TRUE(rec.residual.empty());
    EXPECT_EQ(rec.truncation, Truncation::none);
  }
}

TEST(BackwardSketch, ReplayReproducesAncestorSets) {
  const auto dec = nn_ising(0.04, 2);
  Stream rng(99);
  for (int r = 0; r < 200; ++r) {
    const auto rec = run_backward_sketch({Site{0, 0}, Site{1, 0}}, dec, rng);
    AncestorSet c(rec.query);
    for (std::size_t n = 0; n < rec.events.size(); ++n) {
      const auto& ev = rec.events[n];
      EXPECT_EQ(ev.index, n + 1);
      ASSERT_TRUE(c.contains(ev.site));
      const auto before = c.size();
      c.apply(ev.site, ev.range);
      if (ev.range == -1) EXPECT_EQ(c.size() + 1, before);
      else EXPECT_LE(c.size(), before + ball_size(2, ev.range) - 1);
    }
    EXPECT_TRUE(c.empty());
    EXPECT_EQ(rec.n_stop, rec.events.size());
  }
}

TEST(BackwardSketch, SupercriticalRefusedUnlessCapped) {
  const auto dec = nn_ising(0.5);
  Stream rng(3);
  try {
    run_backward_sketch({Site{0}}, dec, rng);
    FAIL() << "expected refusal";
  } catch (const SupercriticalError& e) {
    EXPECT_NE(std::string(e.what()).find("2.28478"), std::string::npos) << e.what();
    EXPECT_EQ(e.code(), ExitCode::supercritical);
  }
  const auto rec = run_backward_sketch({Site{0}}, dec, rng, 25);
  EXPECT_LE(rec.n_stop, 25u);
  if (rec.truncated()) {
    EXPECT_EQ(rec.truncation, Truncation::steps);
    EXPECT_TRUE(std::isinf(rec.bias_bound));
  }
}

TEST(BackwardSketch, StepCapTruncatesWithBias) {
  const auto dec = nn_ising(0.15);
  Stream rng(8);
  int truncated = 0;
  for (int r = 0; r < 2000; ++r) {
    const auto rec = run_backward_sketch({Site{0}}, dec, rng, 3);
    if (rec.truncated()) {
      ++truncated;
      EXPECT_EQ(rec.n_stop, 3u);
      EXPECT_FALSE(rec.residual.empty());
      EXPECT_NEAR(rec.bias_bound, steps_bias_bound(dec.gamma(), 3, 1), 1e-15);
    }
  }
  EXPECT_GT(truncated, 0);
  EXPECT_THROW(run_backward_sketch({}, dec, rng), std::invalid_argument);
}

TEST(StepsBias, Arithmetic) {
  // p = 2^-10, p / (1 - p)
  EXPECT_NEAR(steps_bias_bound(0.5, 10, 1), 9.765625e-4 / (1.0 - 9.765625e-4), 1e-18);
  EXPECT_TRUE(std::isinf(steps_bias_bound(1.2, 10, 1)));
  EXPECT_TRUE(std::isinf(steps_bias_bound(0.5, 1, 4)));
}

TEST(TimedSketch, SameEventsAsUntimedOnExtinction) {
  const auto dec = nn_ising(0.15);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Stream a = replica_stream(7, seed), b = replica_stream(7, seed);
    Stream clock = replica_stream(7, seed, Lane::clock);
    const auto untimed = run_backward_sketch({Site{0}, Site{3}}, dec, a);
    const auto timed = run_backward_sketch_timed({Site{0}, Site{3}}, kInf, dec, b, clock);
    ASSERT_EQ(untimed.events.size(), timed.events.size());
    for (std::size_t n = 0; n < timed.events.size(); ++n) {
      EXPECT_EQ(untimed.events[n].site, timed.events[n].site);
      EXPECT_EQ(untimed.events[n].range, timed.events[n].range);
      if (n) EXPECT_GE(timed.events[n].time, timed.events[n - 1].time);
    }
    EXPECT_TRUE(timed.residual.empty());
    EXPECT_EQ(timed.t_stop, timed.events.empty() ? 0.0 : timed.events.back().time);
  }
}

TEST(TimedSketch, ShortHorizonMostlyEventFree) {
  const auto dec = nn_ising(0.15);
  const double t = 1e-3;
  const double m = dec.mass(Site{0});
  const int n = 200000;
  int with_event = 0;
  for (int r = 0; r < n; ++r) {
    Stream rng = replica_stream(5, r), clock = replica_stream(5, r, Lane::clock);
    const auto rec = run_backward_sketch_timed({Site{0}}, t, dec, rng, clock);
    if (rec.events.empty()) {
      EXPECT_EQ(rec.residual, std::vector<Site>{Site{0}});
      EXPECT_EQ(rec.t_stop, t);
      EXPECT_EQ(rec.truncation, Truncation::horizon);
    } else {
      ++with_event;
    }
  }
  const double p = 1.0 - std::exp(-t * m);
  EXPECT_NEAR(with_event / static_cast<double>(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(TimedSketch, RejectsNonPositiveHorizon) {
  const auto dec = nn_ising(0.15);
  Stream a(1), b(2);
  EXPECT_THROW(run_backward_sketch_timed({Site{0}}, 0.0, dec, a, b), std::invalid_argument);
  // finite horizon on a supercritical model is allowed
  const auto super = nn_ising(0.5);
  EXPECT_NO_THROW(run_backward_sketch_timed({Site{0}}, 0.5, super, a, b));
}

TEST(AncestorStatistics, PureDeathAtZeroBeta) {
  const auto dec = nn_ising(0.0);
  const std::vector<double> s{0.0, 0.1, 0.5, 1.0};
  const auto st = ancestor_statistics({Site{0}}, dec, 11, s, {0, 1}, 20000);
  EXPECT_EQ(st.extinct, st.replicas);
  EXPECT_EQ(st.mean_size[0].mean, 1.0);
  for (std::size_t h = 1; h < s.size(); ++h) {
    const double want = std::exp(-2.0 * s[h]);
    EXPECT_NEAR(st.mean_size[h].mean, want, 4.0 * std::sqrt(want * (1 - want) / 20000.0));
  }
  EXPECT_EQ(st.step_tail[0].mean, 1.0);
  EXPECT_EQ(st.step_tail[1].mean, 0.0);
}

TEST(AncestorStatistics, BoundsDominateAtBetaPointFifteen) {
  const auto dec = nn_ising(0.15);
  const double m = dec.mass(Site{0}), g = dec.gamma();
  const double rate = m * (1.0 - g);
  const std::vector<double> s{0.0, 0.1 / rate, 0.5 / rate, 1.0 / rate};
  const std::vector<std::size_t> steps{5, 10, 20};
  const auto st = ancestor_statistics({Site{0}}, dec, 2026, s, steps, 10000);
  EXPECT_EQ(st.extinct, 10000u);
  EXPECT_EQ(st.mean_size[0].mean, 1.0);
  for (std::size_t h = 0; h < s.size(); ++h)
    EXPECT_LE(st.mean_size[h].mean, std::exp(-rate * s[h]) + 3.0 * st.mean_size[h].se) << "s=" << s[h];
  for (std::size_t n = 0; n < steps.size(); ++n)
    EXPECT_LE(st.step_tail[n].mean, std::pow(g, steps[n]) + 3.0 * st.step_tail[n].se) << "N=" << steps[n];
}

TEST(AncestorStatistics, ReproducibleForFixedSeed) {
  const auto dec = nn_ising(0.15);
  const auto a = ancestor_statistics({Site{0}}, dec, 5, {0.5}, {3}, 500);
  const auto b = ancestor_statistics({Site{0}}, dec, 5, {0.5}, {3}, 500);
  EXPECT_EQ(a.mean_size[0].mean, b.mean_size[0].mean);
  EXPECT_EQ(a.step_tail[0].mean, b.step_tail[0].mean);
}
