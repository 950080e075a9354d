#include "lexpand/partition_io.hpp"
#include "lexpand/transition.hpp"
#include "lexpand/vitali.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace lexpand;
using namespace lexpand::testing;

namespace {

PartitionOptions tiling(Rational eps) {
  PartitionOptions o;
  o.epsilon = eps;
  o.mode = BaseMode::tiling;
  return o;
}

// Brute-force membership in B(x, n, w, eps) for y near x.
bool in_dynamical_ball(const GeneratorSystem& s, const Word& w, double x, double y, double eps) {
  double a = x, b = y;
  if (circle_distance(a, b) >= eps) return false;
  for (int sym : w) {
    a = s[sym](a);
    b = s[sym](b);
    if (circle_distance(a, b) >= eps) return false;
  }
  return true;
}

}  // namespace

TEST(DynamicalBall, DoublingExamples) {
  auto s = doubling();
  auto b = dynamical_ball(s, 0.5, {0}, 0.1);
  EXPECT_NEAR(b.lo, 0.45, 1e-15);
  EXPECT_NEAR(b.hi, 0.55, 1e-15);
  auto plain = dynamical_ball(s, 0.3, {}, 0.1);
  EXPECT_NEAR(plain.lo, 0.2, 1e-15);
  EXPECT_NEAR(plain.hi, 0.4, 1e-15);
  auto deep = dynamical_ball(s, 0.0, {0, 0, 0}, 0.1);
  EXPECT_NEAR(deep.hi - deep.center, 0.0125, 1e-15);
  EXPECT_NEAR(deep.center - deep.lo, 0.0125, 1e-15);
}

TEST(DynamicalBall, MatchesBruteForceDefinition) {
  auto s = make_system({perturbed(2, 0.01), affine(3)});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    Word w;
    for (int i = 0; i < trial % 5; ++i) w.push_back(static_cast<int>(rng() % 2));
    double x = unif(rng), eps = 0.02 + 0.05 * unif(rng);
    auto b = dynamical_ball(s, x, w, eps);
    double r = b.hi - b.lo;
    EXPECT_TRUE(in_dynamical_ball(s, w, x, b.lo + 1e-9 * r, eps));
    EXPECT_TRUE(in_dynamical_ball(s, w, x, b.hi - 1e-9 * r, eps));
    EXPECT_FALSE(in_dynamical_ball(s, w, x, b.lo - 1e-6 * r, eps));
    EXPECT_FALSE(in_dynamical_ball(s, w, x, b.hi + 1e-6 * r, eps));
    // nesting
    if (!w.empty()) {
      Word shorter(w.begin(), w.end() - 1);
      auto outer = dynamical_ball(s, x, shorter, eps);
      EXPECT_LE(outer.lo, b.lo);
      EXPECT_GE(outer.hi, b.hi);
    }
  }
}

TEST(DynamicalBall, RejectsLargeRadiusWithCover) {
  auto s = doubling();
  auto cover = verify_locally_expanding(s);
  EXPECT_THROW(dynamical_ball(s, 0.1, {0}, 0.3, &cover), Error);
}

TEST(PullBackBall, Examples) {
  auto s = doubling_tripling();
  auto a = pull_back_ball(s, 0.4, 0.1, {0}, 0.2);
  EXPECT_NEAR(a.lo, 0.15, 1e-15);
  EXPECT_NEAR(a.hi, 0.25, 1e-15);
  auto b = pull_back_ball(s, 0.3, 0.09, {1}, 0.1);
  EXPECT_NEAR(b.lo, 0.07, 1e-15);
  EXPECT_NEAR(b.hi, 0.13, 1e-15);
  auto c = pull_back_ball(s, 0.3, 0.09, {}, 0.3);
  EXPECT_NEAR(c.lo, 0.21, 1e-15);
  EXPECT_NEAR(c.hi, 0.39, 1e-15);
  try {
    pull_back_ball(s, 0.5, 0.1, {0}, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::accessibility);
  }
}

TEST(PullBackBall, ForwardImageIsTheBallProperty) {
  for (auto s : {doubling_tripling(), make_system({perturbed(2, 0.01), perturbed(3, 0.02)})}) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      Word w;
      for (int i = 0; i < 1 + trial % 6; ++i) w.push_back(static_cast<int>(rng() % 2));
      double x = unif(rng), eps = 0.01 + 0.1 * unif(rng);
      double y = apply_word(s, w, x);
      auto b = pull_back_ball(s, y, eps, w, x);
      auto [lo, hi] = image_offsets(s, b);
      EXPECT_NEAR(lo, -eps, 1e-10);
      EXPECT_NEAR(hi, eps, 1e-10);
      EXPECT_NEAR(circle_distance(push_offset(s, w, b.center, 0.0).base, y), 0.0, 1e-12);
    }
  }
}

TEST(DistortionConstant, AffineIsOne) {
  auto s = doubling_tripling();
  auto d = diameter_distortion_constant(s, verify_locally_expanding(s));
  EXPECT_EQ(d.K, 1.0);
  EXPECT_EQ(d.C, 0.0);
}

TEST(DistortionConstant, PerturbedClosedForm) {
  auto s = make_system({perturbed(2, 0.01)});
  auto cover = verify_locally_expanding(s);
  auto d = diameter_distortion_constant(s, cover);
  const double pi = std::numbers::pi;
  double C = 0.02 * pi * 2.0 * pi / (2.0 - 0.02 * pi);
  EXPECT_NEAR(d.C, C, 1e-15);
  EXPECT_NEAR(d.K, std::exp(-C * 1.0 / (1.0 - cover.sigma)), 1e-15);
  EXPECT_LE(d.K, 1.0);
  ExpandingCover tiny = cover;
  tiny.sigma = 1e-12;
  EXPECT_NEAR(diameter_distortion_constant(s, tiny).K, std::exp(-C), 1e-10);
}

TEST(VitaliFamily, DoublingCoversGrid) {
  auto s = doubling();
  auto cover = verify_locally_expanding(s);
  auto base = make_base_cover(Rational(1, 8), BaseMode::tiling);
  ASSERT_EQ(base.size(), 4u);
  auto fam = build_vitali_family(s, cover, base, 3, 8);
  EXPECT_TRUE(fam.covers_grid);
  // level L holds 4 * 2^L dyadic arcs of length 1/2^(L+2)
  std::size_t expected = 0;
  for (int L = 3; L <= 8; ++L) expected += 4u << L;
  EXPECT_EQ(fam.members.size(), expected);
  auto empty = build_vitali_family(s, cover, base, 9, 8);
  EXPECT_TRUE(empty.members.empty());
  EXPECT_FALSE(empty.covers_grid);
}

TEST(VitaliFamily, FineMembersAroundAPoint) {
  auto s = doubling();
  auto cover = verify_locally_expanding(s);
  auto base = make_base_cover(Rational(1, 8), BaseMode::tiling);
  double delta = 1e-3;
  std::size_t cap = static_cast<std::size_t>(std::ceil(std::log2(2 * base.eps() / delta)));
  auto fam = build_vitali_family(s, cover, base, 1, cap);
  bool found = false;
  for (const auto& m : fam.members)
    if (m.arc().contains_closed(0.3) && m.length() < delta) found = true;
  EXPECT_TRUE(found);
}

TEST(VitaliSelect, SingleBallTiledByPreimages) {
  auto s = doubling();
  auto cover = verify_locally_expanding(s);
  for (BaseMode mode : {BaseMode::tiling, BaseMode::overlap}) {
    auto base = make_base_cover(mode == BaseMode::tiling ? Rational(1, 8) : Rational(1, 16), mode);
    auto fam = build_vitali_family(s, cover, base, 1, 12);
    auto sel = vitali_select({base.ball(0)}, fam, 1e-3);
    EXPECT_LT(sel.uncovered, 1e-3) << to_string(mode);
    EXPECT_TRUE(sel.reached_tol);
  }
}

TEST(VitaliSelect, EmptySetSelectsNothing) {
  VitaliFamily fam;
  fam.members.push_back({{0}, 0, 0.1, 0.2});
  auto sel = vitali_select({}, fam, 1e-3);
  EXPECT_TRUE(sel.selected.empty());
}

TEST(VitaliSelect, ComplementOfBoundariesAdditivity) {
  auto s = doubling_tripling();
  auto cover = verify_locally_expanding(s);
  auto base = make_base_cover(Rational(1, 16), BaseMode::overlap);
  auto fam = build_vitali_family(s, cover, base, 1, 6);
  auto U = complement_of_boundaries(base);
  auto sel = vitali_select(U, fam, 1e-3);
  // independent accounting: sort the chosen arcs, check disjointness, sum
  std::vector<std::pair<double, double>> arcs;
  double sum = 0.0;
  for (std::size_t i : sel.selected) {
    arcs.emplace_back(fam.members[i].lo, fam.members[i].hi);
    sum += fam.members[i].length();
  }
  std::sort(arcs.begin(), arcs.end());
  for (std::size_t i = 0; i + 1 < arcs.size(); ++i) EXPECT_LE(arcs[i].second, arcs[i + 1].first + 1e-15);
  EXPECT_NEAR(sum, 1.0 - sel.uncovered, 1e-12);
  EXPECT_LT(sel.uncovered, 1e-3);
}

TEST(MarkovPartition, DoublingDyadic) {
  auto s = doubling();
  auto cover = verify_locally_expanding(s);
  auto part = build_markov_partition(s, cover, tiling(Rational(1, 8)));
  EXPECT_TRUE(part.exact);
  EXPECT_EQ(part.base.size(), 4u);
  EXPECT_EQ(part.cycle.size(), 4u);
  EXPECT_EQ(part.uncovered, 0.0);
  ASSERT_EQ(part.size(), 8u);
  for (const auto& e : part.elements) {
    EXPECT_EQ(e.tau(), 1u);
    // dyadic oracle: endpoints are multiples of 1/8 and length is 1/8
    EXPECT_EQ(boost::multiprecision::denominator(Rational(*e.exact_left * 8)), 1);
    EXPECT_EQ(*e.exact_right - *e.exact_left, Rational(1, 8));
  }
  auto t = transition_matrix(part);
  EXPECT_TRUE(verify_markov_property(part, t).ok);
  auto audit = audit_partition(part, s);
  EXPECT_TRUE(audit.disjoint);
  EXPECT_TRUE(audit.inside_components);
  EXPECT_TRUE(audit.images_exact);
  EXPECT_EQ(audit.mass, 1.0);
  // cycle elements map ball to next ball
  for (std::size_t k = 0; k < part.cycle.size(); ++k) {
    const auto& e = part[part.cycle[k]];
    EXPECT_TRUE(part.base.ball(part.cycle_balls[k]).contains(e.arc()));
    EXPECT_EQ(e.image, part.cycle_balls[(k + 1) % part.cycle.size()]);
  }
}

TEST(MarkovPartition, DecoupledHalvesFailConstructively) {
  // 2x on a chart around 0 and 2x+1/2 on a chart around 1/2 each keep the
  // halves [0,1/2] and [1/2,1]; only thin chart overlaps connect them.
  auto s = make_system({affine(2), affine(2, Rational(1, 2))}, {{1, 0}, {0, 1}});
  std::vector<Chart> charts{{Arc(0.74, 0.52), 0}, {Arc(0.24, 0.52), 1}};
  auto cover = verify_locally_expanding(s, 4096, charts, 0.2);
  auto o = tiling(Rational(1, 256));
  o.horizon = 3;
  try {
    build_markov_partition(s, cover, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::constructive_failure);
    EXPECT_NE(std::string(e.what()).find("(B_"), std::string::npos);
  }
}

TEST(MarkovPartition, DoublingTriplingOverlapAccounting) {
  auto s = doubling_tripling();
  auto cover = verify_locally_expanding(s);
  PartitionOptions o;
  o.epsilon = Rational(1, 16);
  o.tol = 1e-3;
  auto part = build_markov_partition(s, cover, o);
  EXPECT_EQ(part.base.size(), 48u);
  EXPECT_LT(part.uncovered, 1e-3);
  Rational mass = 0;
  for (const auto& e : part.elements) mass += *e.exact_right - *e.exact_left;
  EXPECT_NEAR(to_double(1 - mass), part.uncovered, 1e-15);
  auto audit = audit_partition(part, s);
  EXPECT_TRUE(audit.disjoint);
  EXPECT_TRUE(audit.inside_components);
  EXPECT_TRUE(audit.images_exact);
  auto t = transition_matrix(part);
  EXPECT_TRUE(verify_markov_property(part, t).ok);
  EXPECT_TRUE(check_fcp(t, part.cycle).ok);
  EXPECT_TRUE(check_fip(part, &s).ok);
  EXPECT_LE(t.distinct_rows(), part.base.size());
}

TEST(MarkovPartition, UncoveredMassNonincreasingInDepthCap) {
  auto s = make_system({perturbed(2, 0.01)});
  auto cover = verify_locally_expanding(s);
  double prev = 2.0;
  for (std::size_t cap : {2u, 4u, 6u, 8u, 12u}) {
    auto o = tiling(Rational(1, 16));
    o.depth_cap = cap;
    o.tol = 0.0;
    auto part = build_markov_partition(s, cover, o);
    EXPECT_LE(part.uncovered, prev);
    prev = part.uncovered;
  }
}

TEST(TransitionMatrix, RowsAreContainedElements) {
  auto s = make_system({perturbed(2, 0.01), affine(3)});
  auto cover = verify_locally_expanding(s);
  auto part = build_markov_partition(s, cover, tiling(Rational(1, 16)));
  auto t = transition_matrix(part);
  EXPECT_TRUE(t.no_empty_rows_or_columns());
  for (std::size_t i = 0; i < part.size(); ++i) {
    Arc img = part.base.ball(part[i].image);
    for (std::size_t j = 0; j < part.size(); ++j) EXPECT_EQ(t(i, j), img.contains(part[j].arc(), 1e-12));
  }
  EXPECT_LE(t.distinct_rows(), part.base.size());
  for (std::size_t k = 0; k < part.cycle.size(); ++k)
    EXPECT_TRUE(t(part.cycle[k], part.cycle[(k + 1) % part.cycle.size()]));
}

TEST(StructureChecks, Fip) {
  auto s = doubling();
  auto part = build_markov_partition(s, verify_locally_expanding(s), tiling(Rational(1, 8)));
  auto rep = check_fip(part, &s);
  EXPECT_TRUE(rep.ok);
  EXPECT_EQ(rep.images.size(), 4u);
  auto bad = part;
  bad.elements[3].right -= 0.01;  // image no longer a whole ball
  bad.elements[3].exact_right.reset();
  EXPECT_FALSE(check_fip(bad, &s).ok);
  CountableMarkovPartition empty;
  EXPECT_TRUE(check_fip(empty).ok);
}

TEST(StructureChecks, FcpAndNegativeControl) {
  auto s = doubling();
  auto part = build_markov_partition(s, verify_locally_expanding(s), tiling(Rational(1, 16)));
  auto t = transition_matrix(part);
  EXPECT_TRUE(check_fcp(t, part.cycle).ok);
  auto cycle = part.cycle;
  cycle.erase(cycle.begin() + 2);
  auto rep = check_fcp(t, cycle);
  EXPECT_FALSE(rep.ok);
  ASSERT_TRUE(rep.witness.has_value());
  auto self = TransitionMatrix::from_dense({{1}});
  EXPECT_TRUE(check_fcp(self, {0}).ok);
}

TEST(StructureChecks, Bip) {
  EXPECT_TRUE(check_bip(TransitionMatrix::from_dense({{1, 1}, {1, 1}}), {0}));
  EXPECT_FALSE(check_bip(TransitionMatrix::from_dense({{0, 1, 0}, {0, 0, 1}, {0, 0, 0}}), {0}));
  auto s = doubling_tripling();
  auto part = build_markov_partition(s, verify_locally_expanding(s), tiling(Rational(1, 16)));
  EXPECT_TRUE(check_bip(transition_matrix(part), part.cycle));
}

TEST(StructureChecks, ShiftMixing) {
  auto full = check_shift_mixing(TransitionMatrix::from_dense({{1, 1}, {1, 1}}), 10);
  EXPECT_TRUE(full.mixing);
  EXPECT_EQ(full.power, 1u);
  auto bip = check_shift_mixing(TransitionMatrix::from_dense({{0, 1}, {1, 0}}), 20);
  EXPECT_FALSE(bip.mixing);
  EXPECT_TRUE(bip.inconclusive);
  auto s = doubling();
  auto part = build_markov_partition(s, verify_locally_expanding(s), tiling(Rational(1, 16)));
  auto rep = check_shift_mixing(transition_matrix(part), 20);
  EXPECT_TRUE(rep.mixing);
  EXPECT_LE(rep.power, 5u);
}

TEST(PartitionFile, RoundTripExactAndFloat) {
  auto s = doubling_tripling();
  auto part = build_markov_partition(s, verify_locally_expanding(s), tiling(Rational(1, 16)));
  auto text = serialize_partition(part);
  auto back = parse_partition(text);
  EXPECT_EQ(serialize_partition(back), text);
  EXPECT_EQ(partition_hash(back), partition_hash(part));
  auto p = make_system({perturbed(2, 0.01)});
  auto fpart = build_markov_partition(p, verify_locally_expanding(p), tiling(Rational(1, 16)));
  auto ftext = serialize_partition(fpart);
  auto fback = parse_partition(ftext);
  ASSERT_EQ(fback.size(), fpart.size());
  for (std::size_t i = 0; i < fpart.size(); ++i) {
    EXPECT_EQ(fback[i].left, fpart[i].left);
    EXPECT_EQ(fback[i].right, fpart[i].right);
  }
  EXPECT_THROW(parse_partition("lexpand-partition 2\n"), ParseError);
}

TEST(PartitionBuild, Deterministic) {
  auto s = make_system({perturbed(2, 0.01), affine(3)});
  auto cover = verify_locally_expanding(s);
  auto a = build_markov_partition(s, cover, tiling(Rational(1, 16)));
  auto b = build_markov_partition(s, cover, tiling(Rational(1, 16)));
  EXPECT_EQ(serialize_partition(a), serialize_partition(b));
}
