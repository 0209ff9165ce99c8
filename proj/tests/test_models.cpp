#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pssim/models.hpp"
#include "pssim/oracle/autonormal.hpp"
#include "pssim/oracle/enumeration.hpp"

using namespace pssim;
using Gk = boost::math::quadrature::gauss_kronrod<double, 61>;

namespace {

ExponentialModel nn_ising(double beta, int d = 1) {
  return ExponentialModel::ising(d, beta, InteractionKernel::nearest_neighbor(d, 1.0));
}

SparseConfiguration neighbours(double left, double right) {
  SparseConfiguration eta;
  eta.set(Site{-1}, left);
  eta.set(Site{0}, 1.0);
  eta.set(Site{1}, right);
  return eta;
}

std::vector<double> decode(std::size_t idx, std::size_t len, const std::vector<double>& values) {
  std::vector<double> w(len);
  for (auto& x : w) {
    x = values[idx % values.size()];
    idx /= values.size();
  }
  return w;
}

}  // namespace

TEST(IsingRate, AlignedNeighbours) {
  // exp(0.5 * (1 + 1))
  EXPECT_NEAR(nn_ising(0.5).rate(Site{0}, SpinValue::real(1.0), neighbours(1, 1)), 2.718281828459045, 1e-14);
}

TEST(IsingRate, ZeroBetaIsConstant) {
  const auto m = nn_ising(0.0);
  for (double l : {-1.0, 1.0})
    for (double r : {-1.0, 1.0})
      for (double a : {-1.0, 1.0}) EXPECT_EQ(m.rate(Site{0}, SpinValue::real(a), neighbours(l, r)), 1.0);
  EXPECT_EQ(m.mass_bound(Site{0}), 2.0);
}

TEST(IsingRate, CemeteryVanishesAtMaximizer) {
  const double beta = 0.5;
  const auto m = nn_ising(beta);
  EXPECT_NEAR(m.rate(Site{0}, SpinValue::cemetery(), neighbours(1, 1)), 0.0, 1e-14);
  EXPECT_NEAR(m.mass_bound(Site{0}), 2.0 * std::cosh(2.0 * beta), 1e-14);
}

TEST(IsingRate, RejectsValuesOutsideAAndUnderspecifiedConfigurations) {
  const auto m = nn_ising(0.3);
  EXPECT_THROW(m.rate(Site{0}, SpinValue::real(0.5), neighbours(1, 1)), std::invalid_argument);
  SparseConfiguration partial;
  partial.set(Site{1}, 1.0);
  EXPECT_THROW(m.rate(Site{0}, SpinValue::real(1.0), partial), std::invalid_argument);
}

TEST(IsingRate, MassBoundMatchesEnumeration) {
  for (double beta : {0.0, 0.1, 0.15, 0.5, 1.0}) {
    const auto table = oracle::enumerate_decomposition(oracle::ising_spec(1, beta, 1.0));
    EXPECT_NEAR(nn_ising(beta).mass_bound(Site{0}), table.mass, 1e-12);
    const auto table2 = oracle::enumerate_decomposition(oracle::ising_spec(2, beta, 1.0));
    EXPECT_NEAR(nn_ising(beta, 2).mass_bound(Site{0, 0}), table2.mass, 1e-12);
  }
}

TEST(LocalInfRate, UnconditionedIsingIsWorstCase) {
  for (double beta : {0.1, 0.15, 0.7}) {
    const auto m = nn_ising(beta);
    const auto table = oracle::enumerate_decomposition(oracle::ising_spec(1, beta, 1.0));
    for (double a : {-1.0, 1.0}) {
      const double v = local_inf_rate(m, Site{0}, SpinValue::real(a), -1, std::span<const double>());
      EXPECT_NEAR(v, std::exp(-2.0 * beta), 1e-14);
      EXPECT_NEAR(v, table.cinf[0][0][a < 0 ? 0 : 1], 1e-14);
    }
    EXPECT_EQ(local_inf_rate(m, Site{0}, SpinValue::cemetery(), -1, std::span<const double>()), 0.0);
  }
}

TEST(LocalInfRate, FullConditioningReproducesRate) {
  const auto m = nn_ising(0.4);
  for (int k = 1; k <= 2; ++k)
    for (std::size_t idx = 0; idx < (std::size_t{1} << ball_size(1, k)); ++idx) {
      const auto w = decode(idx, ball_size(1, k), {-1.0, 1.0});
      SparseConfiguration eta;
      const auto& offs = ball_offsets(1, k);
      for (std::size_t n = 0; n < offs.size(); ++n) eta.set(offs[n], w[n]);
      for (auto a : {SpinValue::real(-1.0), SpinValue::real(1.0), SpinValue::cemetery()})
        EXPECT_NEAR(local_inf_rate(m, Site{0}, a, k, std::span<const double>(w)), m.rate(Site{0}, a, eta), 1e-13);
    }
}

TEST(LocalInfRate, ContinuousZeroSpinIsOne) {
  const auto m = ExponentialModel::gibbs_continuous(1, 0.8, InteractionKernel::exponential(1, 0.5, 0.5));
  Stream rng(5);
  for (int k = -1; k <= 4; ++k) {
    std::vector<double> w(k < 0 ? 0 : ball_size(1, k));
    for (auto& x : w) x = 2.0 * rng.uniform() - 1.0;
    EXPECT_EQ(m.inf_rate(Site{0}, k, 0.0, w), 1.0);
  }
}

// A signed kernel and an asymmetric three-point A: every conditional infimum
// and every alpha agrees with brute-force enumeration.
TEST(LocalInfRate, SignedKernelAgainstEnumeration) {
  const std::vector<double> values{-1.0, 0.0, 2.0}, weights{0.5, 1.0, 0.25};
  const auto kernel = InteractionKernel::table(1, {{Site{1}, 0.3}, {Site{-1}, -0.2}, {Site{2}, 0.15}, {Site{-2}, 0.1}});
  const double beta = 0.7, h = 0.1;
  const ExponentialModel m(StateSpace::finite(values, weights), kernel, beta, FieldFamily::constant(h));
  oracle::FiniteSpec spec;
  spec.d = 1;
  spec.range = 2;
  spec.values = values;
  spec.weights = weights;
  const double coupling[5] = {0.1, -0.2, 0.0, 0.3, 0.15};  // offsets -2..2
  spec.rate = [&](std::size_t a, const std::vector<std::size_t>& c) {
    double field = h;
    for (std::size_t n = 0; n < 5; ++n) field += coupling[n] * values[c[n]];
    return std::exp(beta * values[a] * field);
  };
  const auto table = oracle::enumerate_decomposition(spec);
  EXPECT_NEAR(m.mass_bound(Site{0}), table.mass, 1e-12);
  for (int k = -1; k <= 2; ++k) {
    EXPECT_NEAR(m.alpha(Site{0}, k), table.alpha[static_cast<std::size_t>(k + 1)], 1e-12) << "k=" << k;
    const auto& rows = table.cinf[static_cast<std::size_t>(k + 1)];
    const std::size_t len = k < 0 ? 0 : ball_size(1, k);
    for (std::size_t idx = 0; idx < rows.size(); ++idx) {
      const auto w = decode(idx, len, values);
      for (std::size_t a = 0; a < values.size(); ++a)
        EXPECT_NEAR(m.inf_rate(Site{0}, k, values[a], w), rows[idx][a], 1e-12);
      EXPECT_NEAR(local_inf_rate(m, Site{0}, SpinValue::cemetery(), k, std::span<const double>(w)), rows[idx][3], 1e-12);
    }
  }
}

TEST(LocalInfRate, MonotoneUnderRefinement) {
  const auto m = ExponentialModel::gibbs_continuous(1, 0.6, InteractionKernel::exponential(1, 0.7, 0.6));
  const AutonormalModel an(InteractionKernel::exponential(2, 0.05, 0.5), 0.5, FieldFamily::constant(0.2));
  Stream rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = static_cast<int>(rng.index(4)) - 1;
    std::vector<double> w1(ball_size(1, k + 1)), w2(ball_size(2, k + 1));
    for (auto& x : w1) x = 2.0 * rng.uniform() - 1.0;
    for (auto& x : w2) x = rng.uniform();
    auto inner = [&](const std::vector<double>& w, int d) {
      std::vector<double> out;
      const auto& offs = ball_offsets(d, k + 1);
      for (std::size_t n = 0; n < offs.size(); ++n)
        if (offs[n].l1_norm() <= k) out.push_back(w[n]);
      return out;
    };
    const double a = 2.0 * rng.uniform() - 1.0;
    EXPECT_LE(m.inf_rate(Site{0}, k, a, inner(w1, 1)), m.inf_rate(Site{0}, k + 1, a, w1) * (1 + 1e-12));
    const double b = rng.uniform();
    EXPECT_LE(an.inf_rate(Site{0, 0}, k, b, inner(w2, 2)), an.inf_rate(Site{0, 0}, k + 1, b, w2) * (1 + 1e-12));
    EXPECT_LE(an.inf_mass(Site{0, 0}, k, inner(w2, 2)), an.inf_mass(Site{0, 0}, k + 1, w2) + 1e-12);
  }
}

TEST(CemeteryPadding, TotalMassIsConstant) {
  const auto m = ExponentialModel::gibbs_continuous(1, 0.9, InteractionKernel::nearest_neighbor(1, 1.0));
  Stream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    SparseConfiguration eta;
    eta.set(Site{-1}, 2.0 * rng.uniform() - 1.0);
    eta.set(Site{0}, 0.0);
    eta.set(Site{1}, 2.0 * rng.uniform() - 1.0);
    const double integral =
        Gk::integrate([&](double a) { return m.rate(Site{0}, SpinValue::real(a), eta); }, -1.0, 1.0, 15, 1e-13);
    EXPECT_NEAR(integral + m.rate(Site{0}, SpinValue::cemetery(), eta), m.mass_bound(Site{0}), 1e-10);
  }
  // sup over neighbours at +-1 of int e^{a beta (x1 + x2)} da
  EXPECT_NEAR(m.mass_bound(Site{0}), 2.0 * std::sinh(1.8) / 1.8, 1e-13);
}

TEST(CemeteryPadding, InfimumOfCemeteryRateIsZero) {
  for (int d : {1, 2}) {
    const auto m = nn_ising(0.35, d);
    double best = 1e9;
    const auto& offs = ball_offsets(d, 1);
    for (std::size_t idx = 0; idx < (std::size_t{1} << offs.size()); ++idx) {
      const auto w = decode(idx, offs.size(), {-1.0, 1.0});
      SparseConfiguration eta;
      for (std::size_t n = 0; n < offs.size(); ++n) eta.set(Site(d) + offs[n], w[n]);
      best = std::min(best, m.rate(Site(d), SpinValue::cemetery(), eta));
    }
    EXPECT_NEAR(best, 0.0, 1e-13);
  }
}

TEST(Autonormal, MassBoundIsOneAndRateIsADensity) {
  const AutonormalModel m(InteractionKernel::nearest_neighbor(1, 0.3), 0.4);
  EXPECT_EQ(m.mass_bound(Site{0}), 1.0);
  SparseConfiguration eta;
  eta.set(Site{-1}, 0.9);
  eta.set(Site{0}, 0.1);
  eta.set(Site{1}, 0.7);
  const double integral =
      Gk::integrate([&](double a) { return m.rate(Site{0}, SpinValue::real(a), eta); }, 0.0, 1.0, 15, 1e-13);
  EXPECT_NEAR(integral, 1.0, 1e-12);
  EXPECT_EQ(m.rate(Site{0}, SpinValue::cemetery(), eta), 0.0);
  EXPECT_NEAR(m.rate(Site{0}, SpinValue::real(0.25), eta),
              oracle::truncated_normal_density(0.25, 0.3 * 1.6, 0.4), 1e-12);
  EXPECT_THROW(m.rate(Site{0}, SpinValue::real(1.5), eta), std::invalid_argument);
}

TEST(Autonormal, DeepTailNormalizationIsStable) {
  const AutonormalModel m(InteractionKernel::zero(1), 0.1, FieldFamily::constant(-1.0));
  SparseConfiguration eta(SpinValue::real(0.0));
  const double integral =
      Gk::integrate([&](double a) { return m.rate(Site{0}, SpinValue::real(a), eta); }, 0.0, 1.0, 20, 1e-13);
  EXPECT_NEAR(integral, 1.0, 1e-9);
  // Density ratio over the interval: exp(-(a^2 - 0)/(2 sigma^2) - a/sigma^2)
  EXPECT_NEAR(m.rate(Site{0}, SpinValue::real(0.05), eta) / m.rate(Site{0}, SpinValue::real(0.0), eta),
              std::exp(-(0.05 * 0.05 + 2 * 0.05) / (2 * 0.01)), 1e-9);
}

TEST(Autonormal, OverlapMatchesQuadrature) {
  const AutonormalModel m(InteractionKernel::zero(1), 0.35);
  for (auto [lo, hi] : std::vector<std::pair<double, double>>{{0.1, 0.4}, {-0.5, 0.2}, {0.8, 1.9}, {0.45, 0.46}, {-0.6, 1.5}})
    EXPECT_NEAR(m.overlap(lo, hi), oracle::overlap_quadrature(lo, hi, 0.35), 1e-10) << lo << "," << hi;
}

TEST(Autonormal, AlphaMatchesQuadratureOracle) {
  const auto kernel = InteractionKernel::table(1, {{Site{1}, 0.2}, {Site{-1}, 0.2}, {Site{2}, -0.1}, {Site{-2}, 0.05}});
  const AutonormalModel m(kernel, 0.45, FieldFamily::constant(0.3));
  oracle::AutonormalSpec spec{0.45, 0.3, {{1, 0.2}, {1, 0.2}, {2, -0.1}, {2, 0.05}}};
  for (int k = -1; k <= 2; ++k) EXPECT_NEAR(m.alpha(Site{0}, k), oracle::autonormal_alpha(spec, k), 1e-6) << k;
  EXPECT_EQ(m.alpha(Site{0}, 2), 1.0);
}

TEST(Samplers, InfRateDrawsFollowTheirDensity) {
  const auto g = ExponentialModel::gibbs_continuous(1, 1.2, InteractionKernel::nearest_neighbor(1, 1.0));
  const AutonormalModel an(InteractionKernel::nearest_neighbor(1, 0.4), 0.3, FieldFamily::constant(0.1));
  const std::vector<double> w1{0.3, 0.0, -0.9};
  const std::vector<double> w2{0.9, 0.5, 0.2};
  struct Case {
    std::function<double(double)> density;
    std::function<double(Stream&)> draw;
    double lo, hi;
  };
  std::vector<Case> cases{
      {[&](double a) { return g.inf_rate(Site{0}, -1, a, {}); }, [&](Stream& r) { return g.sample_inf_rate(Site{0}, -1, {}, r); }, -1, 1},
      {[&](double a) { return g.inf_rate(Site{0}, 0, a, std::vector<double>{0.0}); },
       [&](Stream& r) { return g.sample_inf_rate(Site{0}, 0, std::vector<double>{0.0}, r); }, -1, 1},
      {[&](double a) { return g.inf_rate(Site{0}, 1, a, w1); }, [&](Stream& r) { return g.sample_inf_rate(Site{0}, 1, w1, r); }, -1, 1},
      {[&](double a) { return an.inf_rate(Site{0}, -1, a, {}); }, [&](Stream& r) { return an.sample_inf_rate(Site{0}, -1, {}, r); }, 0, 1},
      {[&](double a) { return an.inf_rate(Site{0}, 1, a, w2); }, [&](Stream& r) { return an.sample_inf_rate(Site{0}, 1, w2, r); }, 0, 1},
  };
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& cs = cases[c];
    const double z = Gk::integrate(cs.density, cs.lo, cs.hi, 15, 1e-13);
    const double mean = Gk::integrate([&](double a) { return a * cs.density(a); }, cs.lo, cs.hi, 15, 1e-13) / z;
    const double second = Gk::integrate([&](double a) { return a * a * cs.density(a); }, cs.lo, cs.hi, 15, 1e-13) / z;
    Stream rng(100 + c);
    const int n = 200000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = cs.draw(rng);
      ASSERT_GE(x, cs.lo);
      ASSERT_LE(x, cs.hi);
      s += x;
    }
    const double se = std::sqrt((second - mean * mean) / n);
    EXPECT_NEAR(s / n, mean, 4 * se) << "case " << c;
  }
}

TEST(Kernel, ShellAndTailIdentities) {
  const auto nn = InteractionKernel::nearest_neighbor(2, 0.5);
  EXPECT_DOUBLE_EQ(nn.absolute_total(), 2.0);
  EXPECT_DOUBLE_EQ(nn.tail_positive(0), 2.0);
  EXPECT_DOUBLE_EQ(nn.tail_positive(1), 0.0);
  EXPECT_DOUBLE_EQ(nn.partial_positive(1), 2.0);

  const auto ex = InteractionKernel::exponential(1, 0.8, 0.5);
  EXPECT_FALSE(ex.range().has_value());
  // 2 * 0.8 * sum_{m>=1} 0.5^m = 1.6
  EXPECT_NEAR(ex.absolute_total(), 1.6, 1e-14);
  for (int k = 0; k < 10; ++k) {
    EXPECT_NEAR(ex.tail_positive(k), 1.6 * std::pow(0.5, k), 1e-14);
    EXPECT_NEAR(ex.partial_positive(k) + ex.tail_positive(k), ex.absolute_total(), 1e-14);
  }
  const auto ex2 = InteractionKernel::exponential(2, 1.0, 0.3);
  double direct = 0.0;
  for (const auto& o : ball_offsets(2, 60)) direct += ex2.coupling(o);
  EXPECT_NEAR(ex2.absolute_total(), direct, 1e-12);

  const auto pw = InteractionKernel::power_law(1, 1.0, 2.0, 3);
  EXPECT_NEAR(pw.absolute_total(), 2.0 * (1.0 + 0.25 + 1.0 / 9.0), 1e-14);
  EXPECT_EQ(*pw.range(), 3);

  const auto tb = InteractionKernel::table(1, {{Site{1}, 0.3}, {Site{-2}, -0.4}});
  EXPECT_NEAR(tb.tail_negative(1), 0.4, 1e-15);
  EXPECT_NEAR(tb.tail_negative(2), 0.0, 1e-15);
  EXPECT_NEAR(tb.signed_total(), -0.1, 1e-15);
  EXPECT_THROW(InteractionKernel::table(1, {{Site{0}, 1.0}}), std::invalid_argument);
}

TEST(Normal, TailFunctionsAreConsistent) {
  for (double z : {-5.0, -1.0, 0.0, 2.0, 8.0, 29.0})
    EXPECT_NEAR(normal::log_sf(z), std::log(0.5 * std::erfc(z / std::sqrt(2.0))), 1e-12);
  // Beyond the erfc range the asymptotic series stays finite and monotone.
  EXPECT_LT(normal::log_sf(40.0), normal::log_sf(35.0));
  EXPECT_NEAR(normal::log_sf(40.0), -804.6084420137538, 1e-6);
  EXPECT_NEAR(std::exp(normal::log_interval_mass(-1.0, 1.0)), 0.6826894921370859, 1e-14);
  EXPECT_NEAR(normal::sf_quantile_log(std::log(0.025)), 1.959963984540054, 1e-12);
  Stream rng(9);
  for (int n = 0; n < 1000; ++n) {
    const double z = normal::sample_truncated_standard(50.0, 50.5, rng);
    EXPECT_GE(z, 50.0);
    EXPECT_LE(z, 50.5);
  }
}
