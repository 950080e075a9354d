#include "lexpand/gibbs.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace lexpand;
using namespace lexpand::testing;

namespace {

const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

TransitionMatrix full_shift(std::size_t k) {
  return TransitionMatrix::from_dense(std::vector<std::vector<int>>(k, std::vector<int>(k, 1)));
}
TransitionMatrix golden_mean() { return TransitionMatrix::from_dense({{1, 1}, {1, 0}}); }

// Brute force over all k^n words, independent of the depth-first and matrix paths.
double brute_z(const TransitionMatrix& t, const ShiftPotential& phi, std::size_t l, std::size_t n) {
  const std::size_t k = t.size();
  const std::size_t window = phi.window();
  std::size_t total = 1;
  for (std::size_t q = 0; q < n; ++q) total *= k;
  double z = 0.0;
  IndexWord w(n), win(window);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t q = 0; q < n; ++q) {
      w[q] = c % k;
      c /= k;
    }
    if (w[0] != l) continue;
    bool ok = true;
    for (std::size_t q = 0; q < n && ok; ++q) ok = t(w[q], w[(q + 1) % n]);
    if (!ok) continue;
    double s = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      for (std::size_t r = 0; r < window; ++r) win[r] = w[(q + r) % n];
      s += phi(win);
    }
    z += std::exp(s);
  }
  return z;
}

// Primitive random matrix: a Hamiltonian cycle, a self-loop at 0 and random extra edges.
TransitionMatrix random_primitive(std::mt19937_64& rng, std::size_t k, double density = 0.4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<std::size_t>> rows(k);
  for (std::size_t i = 0; i < k; ++i) {
    rows[i].push_back((i + 1) % k);
    for (std::size_t j = 0; j < k; ++j)
      if (u(rng) < density) rows[i].push_back(j);
  }
  rows[0].push_back(0);
  return TransitionMatrix(std::move(rows));
}

ShiftPotential random_edge(std::mt19937_64& rng, std::size_t k, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<std::vector<double>> table(k, std::vector<double>(k));
  for (auto& row : table)
    for (auto& v : row) v = g(rng);
  return ShiftPotential::edge([table](std::size_t a, std::size_t b) { return table[a][b]; });
}

ShiftPotential geometric_tail() {
  ShiftPotential p;
  p.eval = [](const IndexWord& w) {
    double s = 0.0, f = 1.0;
    for (std::size_t k = 0; k < w.size(); ++k, f *= 0.25)
      if (w[k] == 1) s += f;
    return s;
  };
  p.modulus = [](std::size_t n) { return std::pow(4.0, 1.0 - static_cast<double>(n)) / 3.0; };
  p.eval_depth = 24;
  return p;
}

// Perron root of the dense weighted matrix by a general eigen-solver.
double dense_log_root(const TransitionMatrix& t, const ShiftPotential& phi) {
  const auto k = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j : t.rows[i]) w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(phi({i, j}));
  Eigen::EigenSolver<Eigen::MatrixXd> es(w, false);
  double r = 0.0;
  for (Eigen::Index q = 0; q < k; ++q) r = std::max(r, std::abs(es.eigenvalues()[q]));
  return std::log(r);
}

MarkovMeasure bernoulli(std::vector<double> q) {
  MarkovMeasure m;
  m.t = full_shift(q.size());
  m.p = q;
  m.pi.assign(q.size(), q);
  return m;
}

InducedMap dyadic() {
  auto s = doubling();
  auto cover = verify_locally_expanding(s);
  PartitionOptions o;
  o.epsilon = Rational(1, 8);
  o.mode = BaseMode::tiling;
  return induce(s, cover, build_markov_partition(s, cover, o));
}

}  // namespace

TEST(Variation, FirstSymbolAndConstantVanish) {
  auto t = full_shift(3);
  for (std::size_t n = 2; n < 8; ++n) {
    auto v = variation(ShiftPotential::first_symbol({0.1, -2.0, 5.0}), t, n);
    EXPECT_TRUE(v.exact);
    EXPECT_EQ(v.value(), 0.0);
    EXPECT_EQ(variation(ShiftPotential::constant(7.5), t, n).value(), 0.0);
  }
  EXPECT_THROW(variation(ShiftPotential::constant(1.0), t, 1), Error);
}

TEST(Variation, GeometricTailIsBracketed) {
  auto t = full_shift(2);
  auto phi = geometric_tail();
  for (std::size_t n = 2; n <= 8; ++n) {
    double truth = 0.0;
    for (std::size_t k = n; k < 60; ++k) truth += std::pow(0.25, static_cast<double>(k));
    auto v = variation(phi, t, n);
    EXPECT_FALSE(v.exact);
    EXPECT_NEAR(v.upper, std::pow(4.0, 1.0 - static_cast<double>(n)) / 3.0, 1e-18);
    EXPECT_NEAR(v.upper, truth, 1e-15 * truth);
    EXPECT_LE(v.lower, truth * (1.0 + 1e-12));
    // a sampled pair differing at position n already gives two thirds of the tail
    EXPECT_GE(v.lower, 0.5 * truth);
  }
}

TEST(Variation, FiniteMemoryIsExactByEnumeration) {
  auto t = full_shift(2);
  auto phi = truncate_memory(geometric_tail(), 8);
  for (std::size_t n = 2; n <= 9; ++n) {
    double truth = 0.0;
    for (std::size_t k = n; k < 8; ++k) truth += std::pow(0.25, static_cast<double>(k));
    auto v = variation(phi, t, n);
    EXPECT_TRUE(v.exact);
    EXPECT_NEAR(v.value(), truth, 1e-16) << n;
  }
}

TEST(FitHolder, ExactGeometric) {
  std::vector<double> prof;
  for (int n = 2; n <= 20; ++n) prof.push_back(3.0 * std::pow(0.5, n));
  auto f = fit_holder(prof);
  EXPECT_TRUE(f.summable);
  EXPECT_TRUE(f.holder);
  EXPECT_NEAR(f.C, 3.0, 1e-9);
  EXPECT_NEAR(f.theta, 0.5, 1e-12);
}

TEST(FitHolder, PolynomialTails) {
  std::vector<double> sq, harm;
  for (int n = 2; n <= 20; ++n) {
    sq.push_back(1.0 / (n * n));
    harm.push_back(1.0 / n);
  }
  auto a = fit_holder(sq);
  EXPECT_TRUE(a.summable);
  EXPECT_FALSE(a.holder);
  EXPECT_NEAR(a.power, 2.0, 1e-9);
  auto b = fit_holder(harm);
  EXPECT_FALSE(b.summable);
  EXPECT_FALSE(b.holder);
}

TEST(FitHolder, ZeroProfileAndShortProfile) {
  auto f = fit_holder(std::vector<double>(8, 0.0));
  EXPECT_TRUE(f.summable);
  EXPECT_TRUE(f.holder);
  EXPECT_EQ(f.C, 0.0);
  EXPECT_THROW(fit_holder({1.0, 0.5, 0.25}), Error);
}

TEST(PartitionFunction, FullShiftExamples) {
  auto t = full_shift(2);
  auto zero = ShiftPotential::constant(0.0);
  EXPECT_NEAR(std::exp(partition_function(t, zero, 1, 3).log_z), 4.0, 1e-12);
  EXPECT_NEAR(brute_z(t, zero, 1, 3), 4.0, 0.0);
  EXPECT_NEAR(std::exp(partition_function(t, zero, 0, 1).log_z), 1.0, 1e-15);
  auto half = ShiftPotential::constant(std::log(0.5));
  for (std::size_t n = 1; n <= 20; ++n) EXPECT_NEAR(partition_function(t, half, 0, n).log_z, std::log(0.5), 1e-12);
}

TEST(PartitionFunction, MatrixPathMatchesBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = random_primitive(rng, 4);
    auto phi = random_edge(rng, 4, 0.5);
    for (std::size_t n = 1; n <= 7; ++n) {
      double z = std::exp(partition_function(t, phi, 0, n).log_z);
      double b = brute_z(t, phi, 0, n);
      EXPECT_NEAR(z, b, 1e-12 * std::max(1.0, b)) << trial << " " << n;
    }
  }
}

TEST(PartitionFunction, LongMemoryPathMatchesMatrixPath) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = random_primitive(rng, 5);
    auto phi = random_edge(rng, 5);
    auto wide = truncate_memory(phi, 4);  // same values, forced through enumeration
    for (std::size_t n = 1; n <= 8; ++n) {
      auto a = partition_function(t, phi, 1, n);
      auto b = partition_function(t, wide, 1, n);
      EXPECT_EQ(a.words, 0u);
      if (std::isinf(a.log_z)) {
        EXPECT_TRUE(std::isinf(b.log_z));
        continue;
      }
      EXPECT_GT(b.words, 0u);
      EXPECT_NEAR(a.log_z, b.log_z, 1e-12);
    }
  }
}

TEST(PartitionFunction, GoldenMeanFibonacciCounts) {
  auto t = golden_mean();
  auto zero = ShiftPotential::constant(0.0);
  // (A^n)_{00} = F_{n+1}
  double f0 = 1.0, f1 = 1.0;
  for (std::size_t n = 1; n <= 14; ++n) {
    double z = std::exp(partition_function(t, zero, 0, n).log_z);
    EXPECT_NEAR(z, brute_z(t, zero, 0, n), 1e-9);
    EXPECT_NEAR(z, f1, 1e-9) << n;
    double f2 = f0 + f1;
    f0 = f1;
    f1 = f2;
  }
}

TEST(PartitionFunction, PeriodObstructionsGiveZero) {
  auto flip = TransitionMatrix::from_dense({{0, 1}, {1, 0}});
  auto zero = ShiftPotential::constant(0.0);
  EXPECT_TRUE(std::isinf(partition_function(flip, zero, 0, 3).log_z));
  auto rep = gurevich_pressure(flip, zero, 0, 16);
  EXPECT_NEAR(rep.pressure, 0.0, 1e-12);
  EXPECT_EQ(rep.fit_points, 5u);  // even n in [8, 16]
  EXPECT_FALSE(rep.mixing_certified);
  auto sink = TransitionMatrix::from_dense({{0, 1}, {0, 1}});
  try {
    gurevich_pressure(sink, zero, 0, 12);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_cycle);
  }
}

TEST(Pressure, Examples) {
  auto full = gurevich_pressure(full_shift(2), ShiftPotential::constant(0.0), 0, 16);
  EXPECT_NEAR(full.pressure, std::log(2.0), 0.01);
  EXPECT_TRUE(full.mixing_certified);
  auto half = gurevich_pressure(full_shift(2), ShiftPotential::constant(std::log(0.5)), 0, 16);
  EXPECT_NEAR(half.pressure, 0.0, 0.01);
  auto gold = gurevich_pressure(golden_mean(), ShiftPotential::constant(0.0), 0, 16);
  EXPECT_NEAR(gold.pressure, std::log(kGolden), 0.01);
  EXPECT_LT(gold.discrepancy, 0.01);
}

TEST(Pressure, BaseIndependence) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = random_primitive(rng, 6);
    auto phi = random_edge(rng, 6);
    auto rep = gurevich_pressure(t, phi, 0, 24, 3);
    ASSERT_TRUE(rep.mixing_certified);
    // 1e-10 floor: both fits are exact to rounding on long ranges
    EXPECT_LE(rep.discrepancy, 2.0 * (rep.residual + rep.residual2) + 1e-10) << trial;
  }
}

TEST(Pressure, AdditiveConstants) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = random_primitive(rng, 5);
    auto phi = random_edge(rng, 5);
    double c = std::normal_distribution<double>(0.0, 2.0)(rng);
    auto a = gurevich_pressure(t, phi, 0, 20);
    auto b = gurevich_pressure(t, phi.plus(c), 0, 20);
    EXPECT_NEAR(b.pressure - a.pressure, c, 1e-9);
    auto ga = transfer_gibbs(t, phi);
    auto gb = transfer_gibbs(t, phi.plus(c));
    EXPECT_NEAR(gb.pressure() - ga.pressure(), c, 1e-10);
    auto ca = verify_gibbs(gibbs_measure(ga), t, phi, ga.pressure(), 6);
    auto cb = verify_gibbs(gibbs_measure(gb), t, phi.plus(c), gb.pressure(), 6);
    EXPECT_NEAR(ca.B, cb.B, 1e-9 * ca.B);
  }
}

TEST(Pressure, Monotonicity) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = random_primitive(rng, 5);
    auto phi = random_edge(rng, 5);
    std::vector<std::vector<double>> bump(5, std::vector<double>(5));
    for (auto& row : bump)
      for (auto& v : row) v = u(rng);
    auto larger = ShiftPotential::edge([phi, bump](std::size_t a, std::size_t b) { return phi({a, b}) + bump[a][b]; });
    for (std::size_t n = 1; n <= 16; ++n)
      EXPECT_LE(partition_function(t, phi, 2, n).log_z, partition_function(t, larger, 2, n).log_z + 1e-12);
  }
}

TEST(Pressure, TruncationMonotonicity) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = random_primitive(rng, 7);
    auto phi = random_edge(rng, 7);
    // retain indices 0..4 only
    std::vector<std::vector<std::size_t>> rows(5);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j : t.rows[i])
        if (j < 5) rows[i].push_back(j);
    TransitionMatrix small(std::move(rows));
    for (std::size_t n = 1; n <= 14; ++n) {
      double a = partition_function(small, phi, 0, n).log_z;
      double b = partition_function(t, phi, 0, n).log_z;
      if (std::isinf(a)) continue;
      EXPECT_LE(a, b + 1e-12);
    }
  }
}

TEST(TransferGibbs, UniformBernoulli) {
  auto t = full_shift(2);
  auto op = transfer_gibbs(t, ShiftPotential::first_symbol({std::log(0.5), std::log(0.5)}));
  EXPECT_NEAR(op.pressure(), 0.0, 1e-12);
  EXPECT_LE(op.residual, 1e-12);
  auto mu = gibbs_measure(op);
  EXPECT_NEAR(mu.cylinder({0}), 0.5, 1e-12);
  EXPECT_NEAR(mu.cylinder({1, 0, 1}), 0.125, 1e-12);
}

TEST(TransferGibbs, SkewedBernoulli) {
  auto t = full_shift(2);
  auto op = transfer_gibbs(t, ShiftPotential::first_symbol({std::log(1.0 / 3.0), std::log(2.0 / 3.0)}));
  EXPECT_NEAR(op.pressure(), 0.0, 1e-12);
  auto mu = gibbs_measure(op);
  EXPECT_NEAR(mu.cylinder({0, 0}), 1.0 / 9.0, 1e-12);
  EXPECT_NEAR(mu.cylinder({1, 1}), 4.0 / 9.0, 1e-12);
  EXPECT_NEAR(mu.cylinder({0, 1, 1}), 4.0 / 27.0, 1e-12);
}

TEST(TransferGibbs, ParryMeasure) {
  auto t = golden_mean();
  auto op = transfer_gibbs(t, ShiftPotential::constant(0.0));
  EXPECT_NEAR(op.pressure(), std::log(kGolden), 1e-12);
  auto mu = gibbs_measure(op);
  // h = nu = (g, 1): p_0 = g^2 / (g^2 + 1), pi_00 = 1/g, pi_01 = 1/g^2, pi_10 = 1
  const double g = kGolden;
  EXPECT_NEAR(mu.p[0], g * g / (g * g + 1.0), 1e-12);
  EXPECT_NEAR(mu.cylinder({0, 0}), mu.p[0] / g, 1e-12);
  EXPECT_NEAR(mu.cylinder({0, 1}), mu.p[0] / (g * g), 1e-12);
  EXPECT_NEAR(mu.cylinder({1, 0}), mu.p[1], 1e-12);
  EXPECT_EQ(mu.cylinder({1, 1}), 0.0);
}

TEST(TransferGibbs, RejectsNonPrimitiveAndLongMemory) {
  auto flip = TransitionMatrix::from_dense({{0, 1}, {1, 0}});
  try {
    transfer_gibbs(flip, ShiftPotential::constant(0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::convergence_failure);
    EXPECT_NE(std::string(e.what()).find("not primitive"), std::string::npos);
  }
  EXPECT_THROW(transfer_gibbs(full_shift(2), truncate_memory(geometric_tail(), 3)), Error);
}

TEST(TransferGibbs, EigenResidualsOnRandomChains) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = random_primitive(rng, 8);
    auto phi = random_edge(rng, 8);
    auto op = transfer_gibbs(t, phi);
    EXPECT_LE(op.residual, 1e-12);
    auto mu = gibbs_measure(op);
    double mass = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      double row = 0.0;
      for (double v : mu.pi[i]) row += v;
      EXPECT_NEAR(row, 1.0, 1e-10);
      mass += mu.p[i];
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_NEAR(op.pressure(), dense_log_root(t, phi), 1e-11);
    // the half-range slope carries a second-eigenvalue bias
    EXPECT_NEAR(op.pressure(), gurevich_pressure(t, phi, 0, 24).pressure, 0.01);
  }
}

TEST(VerifyGibbs, BernoulliIsExact) {
  auto t = full_shift(2);
  auto phi = ShiftPotential::first_symbol({std::log(0.5), std::log(0.5)});
  auto cert = verify_gibbs(gibbs_measure(transfer_gibbs(t, phi)), t, phi, 0.0, 8);
  EXPECT_NEAR(cert.B, 1.0, 1e-10);
  EXPECT_FALSE(cert.infinite);
  EXPECT_TRUE(cert.complete);
  EXPECT_EQ(cert.cylinders, 510u);
}

TEST(VerifyGibbs, ParryConstantFromEigenvectors) {
  auto t = golden_mean();
  auto phi = ShiftPotential::constant(0.0);
  auto op = transfer_gibbs(t, phi);
  auto cert = verify_gibbs(gibbs_measure(op), t, phi, op.pressure(), 10);
  // ratio = lambda nu(a_0) h(a_{n-1}); extremes give B = g + 1/g = sqrt 5
  EXPECT_NEAR(cert.B, std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(cert.max_ratio, std::pow(kGolden, 3) / (kGolden * kGolden + 1.0), 1e-9);
}

TEST(VerifyGibbs, WrongPressureDriftsExponentially) {
  auto t = full_shift(2);
  auto phi = ShiftPotential::first_symbol({std::log(0.5), std::log(0.5)});
  auto mu = gibbs_measure(transfer_gibbs(t, phi));
  auto cert = verify_gibbs(mu, t, phi, 0.1, 10);
  ASSERT_EQ(cert.log_b_by_depth.size(), 10u);
  for (std::size_t d = 0; d < 10; ++d) EXPECT_NEAR(cert.log_b_by_depth[d], 0.1 * static_cast<double>(d + 1), 1e-10);
  EXPECT_NEAR(cert.B, std::exp(1.0), 1e-9);
}

TEST(VerifyGibbs, BoundedOnRandomChains) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = random_primitive(rng, 5);
    auto phi = random_edge(rng, 5);
    auto op = transfer_gibbs(t, phi);
    auto cert = verify_gibbs(gibbs_measure(op), t, phi, op.pressure(), 9);
    EXPECT_TRUE(std::isfinite(cert.B));
    // the worst ratio is reached within two steps and then stays put
    double last = cert.log_b_by_depth.back();
    EXPECT_NEAR(last, cert.log_b_by_depth[cert.log_b_by_depth.size() - 3], 1e-9);
  }
}

TEST(VerifyGibbs, ZeroMassCylinderFlagsInfinite) {
  auto t = full_shift(2);
  auto mu = bernoulli({0.5, 0.5});
  mu.pi[1] = {1.0, 0.0};
  auto cert = verify_gibbs(mu, t, ShiftPotential::constant(std::log(0.5)), 0.0, 3);
  EXPECT_TRUE(cert.infinite);
  EXPECT_TRUE(std::isinf(cert.B));
}

TEST(Equilibrium, Examples) {
  auto full = full_shift(2);
  auto half = ShiftPotential::constant(std::log(0.5));
  auto b = equilibrium_check(bernoulli({0.5, 0.5}), half, 0.0);
  EXPECT_NEAR(b.entropy, std::log(2.0), 1e-15);
  EXPECT_NEAR(b.integral, -std::log(2.0), 1e-15);
  EXPECT_NEAR(b.residual, 0.0, 1e-15);

  auto op = transfer_gibbs(golden_mean(), ShiftPotential::constant(0.0));
  auto parry = equilibrium_check(gibbs_measure(op), ShiftPotential::constant(0.0), op.pressure());
  EXPECT_NEAR(parry.entropy, std::log(kGolden), 1e-12);
  EXPECT_NEAR(parry.residual, 0.0, 1e-12);

  auto skew = equilibrium_check(bernoulli({0.25, 0.75}), half, 0.0);
  double h = -(0.25 * std::log(0.25) + 0.75 * std::log(0.75));
  EXPECT_NEAR(skew.residual, std::log(2.0) - h, 1e-15);
  EXPECT_GT(skew.residual, 0.1);
}

TEST(Equilibrium, NonInvariantInputHasWitness) {
  auto mu = bernoulli({0.5, 0.5});
  mu.pi = {{0.25, 0.75}, {0.25, 0.75}};
  try {
    equilibrium_check(mu, ShiftPotential::constant(0.0), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_invariant);
    EXPECT_NE(std::string(e.what()).find("index 0"), std::string::npos);
  }
}

TEST(Equilibrium, GibbsBeatsPerturbedMarkovMeasures) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int trial = 0; trial < 3; ++trial) {
    auto t = random_primitive(rng, 5);
    auto phi = random_edge(rng, 5);
    auto op = transfer_gibbs(t, phi);
    auto mu = gibbs_measure(op);
    EXPECT_NEAR(equilibrium_check(mu, phi, op.pressure()).residual, 0.0, 1e-10);
    for (int k = 0; k < 20; ++k) {
      MarkovMeasure other = mu;
      for (auto& row : other.pi) {
        double s = 0.0;
        for (double& v : row) s += (v *= std::exp(g(rng)));
        for (double& v : row) v /= s;
      }
      other.p = stationary_distribution(t, other.pi);
      auto rep = equilibrium_check(other, phi, op.pressure());
      EXPECT_GT(rep.residual, 1e-6) << trial << " " << k;
    }
  }
}

TEST(BlockRecoding, PreservesPeriodicSums) {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> g(0.0, 0.5);
  auto t = golden_mean();
  std::vector<double> table(8);
  for (double& v : table) v = g(rng);
  ShiftPotential phi;
  phi.memory = 3;
  phi.eval = [table](const IndexWord& w) { return table[4 * w.at(0) + 2 * w.at(1) + w.at(2)]; };
  auto rec = recode_blocks(t, 2);
  ASSERT_EQ(rec.blocks.size(), 3u);  // 00, 01, 10
  auto lifted = rec.lift(phi);
  for (std::size_t n = 1; n <= 12; ++n) {
    std::vector<double> parts;
    for (std::size_t b = 0; b < rec.blocks.size(); ++b)
      if (rec.blocks[b][0] == 0) parts.push_back(partition_function(rec.matrix, lifted, b, n).log_z);
    double lz = detail::log_sum_exp(parts);
    EXPECT_NEAR(lz, partition_function(t, phi, 0, n).log_z, 1e-12) << n;
    EXPECT_NEAR(std::exp(lz), brute_z(t, phi, 0, n), 1e-12 * std::exp(lz));
  }
  auto op = transfer_gibbs(rec.matrix, lifted);
  EXPECT_NEAR(op.pressure(), dense_log_root(rec.matrix, lifted), 1e-11);
  EXPECT_NEAR(op.pressure(), gurevich_pressure(t, phi, 0, 20).pressure, 1e-4);
}

TEST(ProjectPotential, AffineLogDerivativeIsLocallyConstant) {
  auto T = dyadic();
  auto phi = project_potential(T, [&T](std::size_t i, double x) { return -std::log(T.derivative(i, x)); }, 0.0, 1.0);
  for (std::size_t n = 2; n <= 6; ++n) EXPECT_EQ(variation(phi, T.matrix(), n, 512).value(), 0.0);
  for (std::size_t i = 0; i < T.size(); ++i) {
    double tau = static_cast<double>(T.tau(i));
    EXPECT_NEAR(phi({i, T.matrix().rows[i][0]}), -tau * std::log(2.0), 1e-15);
  }
}

TEST(ProjectPotential, CoordinateHasGeometricVariations) {
  auto T = dyadic();
  auto phi = project_potential(T, [](std::size_t, double x) { return x; }, 1.0, 1.0, 12);
  std::vector<double> bound;
  for (std::size_t n = 2; n <= 10; ++n) {
    auto v = variation(phi, T.matrix(), n, 512);
    EXPECT_LE(v.lower, v.upper);
    EXPECT_GT(v.lower, 0.0);
    bound.push_back(v.upper);
  }
  auto fit = fit_holder(bound);
  EXPECT_TRUE(fit.holder);
  EXPECT_NEAR(fit.theta, T.sigma(), 1e-9);
  // deeper evaluation moves the value by at most the modulus
  std::mt19937_64 rng(61);
  for (int k = 0; k < 100; ++k) {
    IndexWord w{static_cast<std::size_t>(rng() % T.size())};
    while (w.size() < 14) w.push_back(T.matrix().rows[w.back()][rng() % T.matrix().rows[w.back()].size()]);
    for (std::size_t n = 2; n < 14; ++n) {
      IndexWord head(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n));
      EXPECT_LE(std::fabs(phi(head) - phi(w)), phi.modulus(n) + 1e-15);
    }
  }
}

TEST(ProjectPotential, ConstantAndNonFinite) {
  auto T = dyadic();
  auto phi = project_potential(T, [](std::size_t, double) { return 2.5; }, 0.0, 1.0);
  std::mt19937_64 rng(62);
  for (int k = 0; k < 50; ++k) {
    IndexWord w{static_cast<std::size_t>(rng() % T.size())};
    while (w.size() < 6) w.push_back(T.matrix().rows[w.back()][0]);
    EXPECT_EQ(phi(w), 2.5);
  }
  try {
    project_potential(T, [](std::size_t i, double) { return i == 3 ? HUGE_VAL : 0.0; }, 0.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
    EXPECT_NE(std::string(e.what()).find("element 3"), std::string::npos);
  }
}
