#include <sstream>

#include "generators.hpp"
#include "oracles.hpp"
#include "posetlim/density.hpp"
#include "posetlim/step_function.hpp"
#include "posetlim/step_io.hpp"
#include "test_util.hpp"

using namespace posetlim;

namespace {

StepFunction<Rational> exact(const StepFunction<double>& w) { return w.convert<Rational>(); }

Rational binomial(std::size_t n, std::size_t k) {
  Rational r = 1;
  for (std::size_t i = 0; i < k; ++i) r = r * Rational(n - i) / Rational(i + 1);
  return r;
}

}  // namespace

TEST(StepFunction, Validation) {
  EXPECT_CODE(StepFunction<double>({0.5, 0.4}, std::vector<double>(4, 0)), InvalidMeasures);
  EXPECT_CODE(StepFunction<double>({1.5, -0.5}, std::vector<double>(4, 0)), InvalidMeasures);
  EXPECT_CODE(StepFunction<double>({1.0}, std::vector<double>(4, 0)), InvalidArgument);
  EXPECT_CODE(StepFunction<Rational>({Rational(1, 3), Rational(1, 3)}, std::vector<Rational>(4, 0)),
              InvalidMeasures);
  const StepFunction<double> near({0.5, 0.5 + 1e-10}, std::vector<double>(4, 0));
  EXPECT_NEAR(near.measure(0) + near.measure(1), 1.0, 1e-15);
  const StepFunction<double> thirds({1.0 / 3, 1.0 / 3, 1.0 / 3}, std::vector<double>(9, 0));
  EXPECT_EQ(thirds.measure(0), 1.0 / 3);
}

TEST(FromPoset, Examples) {
  const auto c2 = from_poset<double>(Poset::chain(2), {0, 1});
  EXPECT_EQ(c2.measures(), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(c2.values(), (std::vector<double>{0, 1, 0, 0}));
  const auto a2 = from_poset<double>(Poset::antichain(2), {1, 0});
  EXPECT_EQ(a2.values(), std::vector<double>(4, 0));
  const auto c3 = from_poset<Rational>(Poset::chain(3), {0, 1, 2});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(c3.value(i, j), Rational(i < j ? 1 : 0));
  EXPECT_EQ(t_step(Poset::chain(2), c3), Rational(1, 3));
  EXPECT_CODE(from_poset<double>(Poset::chain(2), {1, 0}), NotLinearExtension);
}

TEST(Average, Examples) {
  const auto c2 = from_poset<Rational>(Poset::chain(2), {0, 1});
  const auto same = average(c2, Parts{{0}, {1}});
  EXPECT_EQ(same.values(), c2.values());
  const auto one = average(c2, Parts{{0, 1}});
  ASSERT_EQ(one.parts(), 1u);
  EXPECT_EQ(one.value(0, 0), Rational(1, 4));
  EXPECT_CODE(average(c2, Parts{{1}, {0}}), NotConsecutive);
  EXPECT_CODE(average(c2, Parts{{0}}), NotConsecutive);
}

TEST(Average, ZeroMeasureBlocksGetZero) {
  const StepFunction<Rational> w({Rational(0), Rational(1)}, std::vector<Rational>{1, 1, 1, Rational(1, 2)});
  const auto a = average(w, Parts{{0}, {1}});
  EXPECT_EQ(a.value(0, 0), Rational(0));
  EXPECT_EQ(a.value(1, 1), Rational(1, 2));
}

TEST(Average, TowerProperty) {
  CounterRng rng(31, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto w = gen::random_kernel(8, rng);
    const Parts fine{{0, 1}, {2}, {3, 4, 5}, {6, 7}};
    const Parts fine_to_coarse{{0, 1}, {2, 3}};
    const Parts direct{{0, 1, 2}, {3, 4, 5, 6, 7}};
    EXPECT_EQ(average(average(w, fine), fine_to_coarse).values(), average(w, direct).values());
    // Two-chain density is bilinear in the values, so averaging keeps it.
    EXPECT_EQ(t_step(Poset::chain(2), average(w, direct)), t_step(Poset::chain(2), w));
  }
}

TEST(TStep, Examples) {
  CounterRng rng(32, 0);
  const auto w = gen::random_kernel(5, rng);
  EXPECT_EQ(t_step(Poset::antichain(3), w), Rational(1));
  EXPECT_EQ(t_step(Poset::chain(2), from_poset<Rational>(Poset::chain(2), {0, 1})), Rational(1, 4));
  for (std::size_t k : {3, 5, 8})
    for (std::size_t m : {2, 3, 4}) {
      const auto upper = from_poset<Rational>(Poset::chain(k), linear_extension(Poset::chain(k)));
      Rational km = 1;
      for (std::size_t i = 0; i < m; ++i) km *= Rational(k);
      EXPECT_EQ(t_step(Poset::chain(m), upper), binomial(k, m) / km) << k << "," << m;
    }
  const StepFunction<double> bad({1.0}, std::vector<double>{1.5});
  EXPECT_CODE(t_step(Poset::chain(2), bad), ValuesOutOfRange);
}

TEST(TStep, MatchesOracle) {
  CounterRng rng(33, 0);
  const auto patterns = enumerate_posets(4);
  for (int trial = 0; trial < 15; ++trial) {
    const auto w = gen::random_kernel(5, rng, 0.6);
    for (const auto& c : patterns) EXPECT_EQ(t_step(c.poset, w), oracle::t_step(c.poset, w)) << c.id;
    for (const auto& c : patterns) EXPECT_EQ(t_step(c.poset, w, 3), t_step(c.poset, w)) << c.id;
  }
}

TEST(TStep, EqualsPosetDensityForEncodedPosets) {
  CounterRng rng(34, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto q = gen::random_poset(7, 0.3, rng);
    const auto w = from_poset<Rational>(q, linear_extension(q));
    for (const auto& c : enumerate_posets(3)) EXPECT_EQ(t_step(c.poset, w), t_exact(c.poset, q)) << c.id;
  }
}

TEST(CheckAxioms, Examples) {
  CounterRng rng(35, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = gen::random_poset(8, 0.3, rng);
    EXPECT_TRUE(check_axioms(from_poset<double>(q, linear_extension(q))).is_kernel());
  }
  const auto third = Rational(1, 3);
  const StepFunction<Rational> path({third, third, third},
                                    std::vector<Rational>{0, Rational(1, 2), 0, 0, 0, Rational(1, 2), 0, 0, 0});
  const auto r = check_axioms(path);
  EXPECT_TRUE(r.axiom1);
  EXPECT_FALSE(r.axiom2);
  ASSERT_EQ(r.closure_violations.size(), 1u);
  EXPECT_EQ(r.closure_violations[0], std::make_tuple(std::size_t{0}, std::size_t{1}, std::size_t{2}));
  const auto diag = check_axioms(StepFunction<double>({1.0}, std::vector<double>{0.3}));
  EXPECT_FALSE(diag.axiom1);
  EXPECT_EQ(diag.order_violations.size(), 1u);
}

TEST(SamplePoset, Examples) {
  const StepFunction<double> zero({0.25, 0.75}, std::vector<double>(4, 0));
  EXPECT_EQ(sample_poset(zero, 30, 1).comparable_pairs(), 0u);

  const auto c2 = from_poset<double>(Poset::chain(2), {0, 1});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = sample_poset(c2, 4, seed);
    std::vector<std::size_t> part(4);
    for (std::size_t a = 0; a < 4; ++a) part[a] = sample_part(c2, seed, a);
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(p.precedes(a, b), part[a] < part[b]);
  }
  const StepFunction<double> bad({1.0}, std::vector<double>{0.3});
  EXPECT_CODE(sample_poset(bad, 5, 0), AxiomViolation);
}

TEST(SamplePoset, DeterministicAndAlwaysValid) {
  CounterRng rng(36, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = gen::random_kernel(4, rng, 0.7).convert<double>();
    const auto p = sample_poset(w, 25, trial);
    EXPECT_EQ(oracle::relation(p), oracle::relation(sample_poset(w, 25, trial)));
  }
}

TEST(SamplePoset, EdgeFrequencyWithinFiveSigma) {
  CounterRng rng(37, 0);
  const auto w = gen::random_kernel(4, rng, 0.7).convert<double>();
  const double expected = edge_density(w);
  const std::size_t n = 200, runs = 100;
  std::vector<double> freq;
  for (std::size_t r = 0; r < runs; ++r)
    freq.push_back(static_cast<double>(sample_poset(w, n, 1000 + r).comparable_pairs()) /
                   static_cast<double>(n * (n - 1)));
  const double mean = std::accumulate(freq.begin(), freq.end(), 0.0) / runs;
  double var = 0;
  for (double f : freq) var += (f - mean) * (f - mean);
  const double se = std::sqrt(var / (runs - 1) / runs);
  EXPECT_LE(std::abs(mean - expected), 5 * se + 1e-12);
}

TEST(StepIo, RoundTrip) {
  CounterRng rng(38, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = gen::random_kernel(5, rng);
    const auto j = to_json(w);
    const auto back = exact_step_function_from_json(j);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(back->measures(), w.measures());
    EXPECT_EQ(back->values(), w.values());
    const auto d = w.convert<double>();
    const auto dback = step_function_from_json(to_json(d));
    EXPECT_EQ(dback.measures(), d.measures());
    EXPECT_EQ(dback.values(), d.values());
  }
}

TEST(StepIo, RejectsBadShapes) {
  EXPECT_THROW(step_function_from_json(nlohmann::json::parse(R"({"measures":[0.5,0.5],"values":[[0]]})")),
               ParseError);
  EXPECT_ANY_THROW(step_function_from_json(nlohmann::json::parse(R"({"measures":[0.5,0.4],"values":[[0,0],[0,0]]})")));
  EXPECT_THROW(step_function_from_json(nlohmann::json::parse(R"({"values":[[0]]})")), ParseError);
}
