#include "generators.hpp"
#include "oracles.hpp"
#include "posetlim/cutnorm.hpp"
#include "posetlim/isomorphism.hpp"
#include "test_util.hpp"

using namespace posetlim;

namespace {

StepFunction<Rational> negated(const StepFunction<Rational>& w) { return w.scaled(Rational(-1)); }

StepFunction<Rational> random_unit_step(std::size_t k, CounterRng& rng) {
  return gen::random_integer_step(k, rng, false, 7, 7).to_step();
}

}  // namespace

TEST(CutNorm, SinglePart) {
  for (double c : {0.3, -0.7, 0.0}) {
    const StepFunction<double> w({1.0}, std::vector<double>{c});
    EXPECT_DOUBLE_EQ(cut_norm(w).value, std::abs(c));
  }
}

TEST(CutNorm, UpperTriangularHalves) {
  const auto w = from_poset<Rational>(Poset::chain(2), {0, 1});
  const auto c = cut_norm(w);
  EXPECT_EQ(c.value, Rational(1, 4));
  EXPECT_EQ(c.s, (std::vector<std::size_t>{0}));
  EXPECT_EQ(c.t, (std::vector<std::size_t>{1}));
  EXPECT_TRUE(c.exact);
}

TEST(CutNorm, MatchesOracle) {
  CounterRng rng(61, 0);
  for (int trial = 0; trial < 150; ++trial) {
    const auto s = gen::random_integer_step(1 + rng.below(10), rng);
    const auto w = s.to_step();
    const auto c = cut_norm(w);
    EXPECT_EQ(c.value, oracle::cut_norm(s));
    // The reported rectangle attains the value.
    Rational sum = 0;
    for (auto i : c.s)
      for (auto j : c.t) sum += w.measure(i) * w.measure(j) * w.value(i, j);
    EXPECT_EQ(sum < 0 ? -sum : sum, c.value);
    const auto threaded = cut_norm(w, {CutNormOptions::Mode::Exact, 22, 0, 0, 3});
    EXPECT_EQ(threaded.value, c.value);
  }
}

TEST(CutNorm, SymmetryAndHomogeneity) {
  CounterRng rng(62, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto w = gen::random_integer_step(6, rng).to_step();
    const auto base = cut_norm(w).value;
    EXPECT_EQ(cut_norm(negated(w)).value, base);
    EXPECT_EQ(cut_norm(w.scaled(Rational(3, 2))).value, base * Rational(3, 2));
    EXPECT_EQ(cut_norm(w.scaled(Rational(-2, 5))).value, base * Rational(2, 5));
  }
}

TEST(CutNorm, BetweenNorms) {
  CounterRng rng(63, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = gen::random_integer_step(7, rng).to_step();
    const auto d = as_difference(w);
    EXPECT_LE(cut_norm(d).value, l1_norm(d));
    EXPECT_LE(l1_norm(d), sup_norm(d));
  }
}

TEST(CutNorm, TooManyParts) {
  CounterRng rng(64, 0);
  const auto w = gen::random_integer_step(9, rng).to_step().convert<double>();
  CutNormOptions small;
  small.max_exact_parts = 8;
  EXPECT_CODE(cut_norm(w, small), TooManyParts);
}

TEST(CutNorm, TwinPartsCompress) {
  // 30 parts, but only three distinct rows and columns.
  std::vector<double> m(30, 1.0 / 30), v(900);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 30; ++j) v[i * 30 + j] = (i / 10 < j / 10) ? 1.0 : 0.0;
  const StepFunction<double> w(m, v);
  const StepFunction<double> coarse({1.0 / 3, 1.0 / 3, 1.0 / 3}, std::vector<double>{0, 1, 1, 0, 0, 1, 0, 0, 0});
  EXPECT_NEAR(cut_norm(w).value, cut_norm(coarse).value, 1e-15);
}

TEST(CutNorm, HeuristicIsLowerBound) {
  CounterRng rng(65, 0);
  CutNormOptions heuristic;
  heuristic.mode = CutNormOptions::Mode::Heuristic;
  heuristic.trials = 8;
  for (int trial = 0; trial < 60; ++trial) {
    const auto w = gen::random_integer_step(2 + rng.below(9), rng).to_step().convert<double>();
    heuristic.seed = static_cast<std::uint64_t>(trial);
    const auto h = cut_norm(w, heuristic);
    EXPECT_FALSE(h.exact);
    EXPECT_LE(h.value, cut_norm(w).value + 1e-15);
    EXPECT_EQ(h.value, cut_norm(w, heuristic).value);
  }
}

TEST(CommonRefinement, Boundaries) {
  const StepFunction<Rational> a({Rational(1, 2), Rational(1, 2)}, std::vector<Rational>{0, 1, 0, 0});
  const StepFunction<Rational> b({Rational(1, 3), Rational(2, 3)}, std::vector<Rational>{0, 1, 0, 0});
  const auto d = common_refinement(a, b);
  EXPECT_EQ(d.measures, (std::vector<Rational>{Rational(1, 3), Rational(1, 6), Rational(1, 2)}));
  EXPECT_EQ(d.left, (std::vector<std::size_t>{0, 0, 1}));
  EXPECT_EQ(d.right, (std::vector<std::size_t>{0, 1, 1}));
  // a - b on each cell
  EXPECT_EQ(d.value(0, 1), Rational(-1));
  EXPECT_EQ(d.value(1, 2), Rational(1));
  EXPECT_EQ(d.value(0, 2), Rational(0));
  EXPECT_EQ(d.value(1, 1), Rational(0));
  EXPECT_EQ(d.value(0, 0), Rational(0));
}

TEST(CutDistance, ZeroOnSelfAndTriangle) {
  CounterRng rng(66, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto a = random_unit_step(1 + rng.below(8), rng);
    const auto b = random_unit_step(1 + rng.below(8), rng);
    const auto c = random_unit_step(1 + rng.below(8), rng);
    EXPECT_EQ(cut_distance(a, a), Rational(0));
    EXPECT_EQ(cut_distance(a, b), cut_distance(b, a));
    EXPECT_LE(cut_distance(a, c), cut_distance(a, b) + cut_distance(b, c));
    EXPECT_LE(cut_distance(a, b), l1_norm(common_refinement(a, b)));
  }
}

TEST(CutDistance, DoubleMatchesExact) {
  CounterRng rng(67, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_unit_step(5, rng);
    const auto b = random_unit_step(6, rng);
    EXPECT_NEAR(cut_distance(a.convert<double>(), b.convert<double>()), to_double(cut_distance(a, b)), 1e-12);
  }
}

TEST(ClaimCutBound, SmallPosetIsExact) {
  const auto p = Poset::from_relations(3, {{0, 1}, {0, 2}});
  const auto c = claim_cut_bound(p, PosetPartition::singletons(p, PosetPartition::trivial(p)), 4);
  EXPECT_EQ(c.distance, 0.0);
  EXPECT_DOUBLE_EQ(c.bound, 5.0 / 8);
  EXPECT_TRUE(c.holds);
}

TEST(ClaimCutBound, BlowUpCloneClasses) {
  const auto b = blow_up(Poset::chain(2), 10);
  Parts clones(2);
  for (Element x = 0; x < b.size(); ++x) clones[b.up(x).any() ? 0 : 1].push_back(x);
  const PosetPartition part(b, clones);
  const auto c = claim_cut_bound(b, part, 2);
  EXPECT_TRUE(c.holds);
  EXPECT_LE(c.distance, 1.25);
  EXPECT_EQ(c.parts, 2u);
  // Averaging the blow-up over its clone classes loses nothing.
  EXPECT_NEAR(c.distance, 0.0, 1e-15);
}

TEST(ClaimCutBound, RequiresRegularPartition) {
  const auto c = Poset::chain(8);
  EXPECT_CODE(claim_cut_bound(c, PosetPartition::trivial(c), 2), InvalidArgument);
  EXPECT_CODE(claim_cut_bound(c, PosetPartition::trivial(c), 0), InvalidArgument);
}

TEST(ClaimCutBound, HoldsOnRegularizedPosets) {
  CounterRng rng(68, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = gen::random_2d(20, rng);
    const auto r = regularize(p, PosetPartition::trivial(p), 0.25);
    const auto c = claim_cut_bound(p, r.partition, 4);
    EXPECT_TRUE(c.holds) << c.distance;
  }
}

TEST(DensityGap, Examples) {
  CounterRng rng(69, 0);
  const auto a = gen::random_kernel(4, rng);
  const auto b = gen::random_kernel(4, rng);
  const auto same = density_gap_bound(Poset::chain(3), a, a);
  EXPECT_EQ(same.gap, Rational(0));
  EXPECT_EQ(same.bound, Rational(0));
  EXPECT_TRUE(same.holds);
  const auto anti = density_gap_bound(Poset::antichain(3), a, b);
  EXPECT_EQ(anti.gap, Rational(0));
  EXPECT_EQ(anti.m, 0u);
  const StepFunction<double> bad({1.0}, std::vector<double>{-0.5});
  EXPECT_CODE(density_gap_bound(Poset::chain(2), bad, bad), ValuesOutOfRange);
}

TEST(DensityGap, BoundHoldsExactly) {
  CounterRng rng(70, 0);
  const auto patterns = enumerate_posets(3);
  for (int trial = 0; trial < 40; ++trial) {
    const auto a = gen::random_kernel(4, rng, 0.7);
    const auto b = gen::random_kernel(4, rng, 0.7);
    for (const auto& c : patterns) {
      const auto g = density_gap_bound(c.poset, a, b);
      EXPECT_TRUE(g.holds) << c.id;
      EXPECT_EQ(g.m, c.poset.comparable_pairs());
    }
  }
}
