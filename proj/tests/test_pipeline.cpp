#include <filesystem>
#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "posetlim/pipeline.hpp"
#include "test_util.hpp"

using namespace posetlim;
namespace fs = std::filesystem;

namespace {

const StepFunction<double>& layered_kernel() {
  static const StepFunction<double> w({0.5, 0.5}, std::vector<double>{0, 0.5, 0, 0});
  return w;
}

ExperimentSpec kernel_spec(std::vector<std::size_t> sizes, std::size_t k_max, std::uint64_t seed) {
  ExperimentSpec spec;
  spec.kernel = layered_kernel();
  spec.sizes = std::move(sizes);
  spec.k_max = k_max;
  spec.seed = seed;
  spec.strategy = Strategy::sampled(16, seed);
  return spec;
}

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = fs::temp_directory_path() / (std::string("posetlim_") + info->test_suite_name() + "_" + info->name());
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Pipeline, LevelOneIsRelationDensity) {
  const auto trace = run(kernel_spec({30, 60}, 1, 3));
  ASSERT_EQ(trace.sizes.size(), 2u);
  for (const auto& size : trace.sizes) {
    ASSERT_EQ(size.levels.size(), 1u);
    const auto& w = size.levels[0].step;
    ASSERT_EQ(w.parts(), 1u);
    const double n = static_cast<double>(size.n);
    EXPECT_NEAR(w.value(0, 0), static_cast<double>(size.poset.comparable_pairs()) / (n * n), 1e-13);
  }
}

TEST(Pipeline, BlowUpDensitiesConstantInN) {
  ExperimentSpec spec;
  spec.source = ExperimentSpec::Source::BlowUp;
  spec.base = Poset::from_relations(3, {{0, 1}, {0, 2}});
  spec.sizes = {3, 6, 12, 24};
  spec.k_max = 2;
  const auto trace = run(spec);
  ASSERT_EQ(trace.sizes.size(), 4u);
  // W_n carries the base densities at every n, and level 1 is the relation
  // density 2/9 throughout.
  for (const auto& size : trace.sizes) {
    const auto w = from_poset<double>(size.poset, size.order);
    for (std::size_t i = 0; i < trace.pattern_ids.size(); ++i) {
      const auto cls = enumerate_posets(3)[i];
      EXPECT_NEAR(t_step(cls.poset, w), t(cls.poset, *spec.base), 1e-12) << cls.id;
    }
    for (std::size_t i = 0; i < trace.pattern_ids.size(); ++i)
      EXPECT_NEAR(size.levels[0].density[i], trace.sizes[0].levels[0].density[i], 1e-13);
  }
  for (double d : trace.deltas[0]) EXPECT_LE(d, 1e-13);
}

TEST(Pipeline, NestedLevelsAndTower) {
  const auto trace = run(kernel_spec({40, 80}, 3, 5));
  for (const auto& size : trace.sizes) {
    ASSERT_EQ(size.levels.size(), 3u);
    for (std::size_t k = 1; k < size.levels.size(); ++k) {
      EXPECT_TRUE(size.levels[k].nested);
      EXPECT_LE(size.levels[k].tower_error, 1e-12);
      EXPECT_GE(size.levels[k].parts.size(), size.levels[k - 1].parts.size());
      const auto r = is_regular_partition(size.poset, PosetPartition(size.poset, size.levels[k].parts),
                                          1.0 / static_cast<double>(k + 1), Strategy::sampled(16, 1));
      EXPECT_TRUE(r.regular);
    }
  }
  EXPECT_EQ(trace.deltas.size(), 3u);
  EXPECT_EQ(trace.deltas[2].size(), 1u);
}

TEST(Pipeline, Deterministic) {
  const auto a = run(kernel_spec({30, 60}, 3, 9));
  const auto b = run(kernel_spec({30, 60}, 3, 9));
  std::ostringstream ta, tb;
  write_trace_csv(ta, a);
  write_trace_csv(tb, b);
  EXPECT_EQ(ta.str(), tb.str());
  const auto c = run(kernel_spec({30, 60}, 3, 10));
  std::ostringstream tc;
  write_trace_csv(tc, c);
  EXPECT_NE(ta.str(), tc.str());
}

TEST(Pipeline, SpecValidation) {
  auto spec = kernel_spec({30, 20}, 2, 1);
  EXPECT_CODE(spec.validate(), InvalidArgument);
  spec = kernel_spec({30}, 2, 1);
  spec.kernel = StepFunction<double>({1.0}, std::vector<double>{0.5});
  EXPECT_CODE(spec.validate(), AxiomViolation);
  ExperimentSpec blow;
  blow.source = ExperimentSpec::Source::BlowUp;
  blow.base = Poset::chain(3);
  blow.sizes = {4};
  EXPECT_CODE(blow.validate(), InvalidArgument);
  EXPECT_THROW(ExperimentSpec::from_json(nlohmann::json::parse(R"({"source":{"type":"nope"}})")), ParseError);
  EXPECT_THROW(ExperimentSpec::from_json(nlohmann::json::parse(R"({"sizes":[1]})")), ParseError);
}

TEST(Pipeline, FromJson) {
  const auto j = nlohmann::json::parse(R"({
    "source": {"type": "kernel", "kernel": {"measures": ["1/2", "1/2"], "values": [[0, "1/2"], [0, 0]]}},
    "sizes": [20, 40], "k_max": 2, "seed": 4, "strategy": "sampled", "trials": 8, "density_size": 2})");
  const auto spec = ExperimentSpec::from_json(j);
  EXPECT_EQ(spec.source, ExperimentSpec::Source::Kernel);
  ASSERT_TRUE(spec.exact_kernel.has_value());
  EXPECT_EQ(spec.exact_kernel->value(0, 1), Rational(1, 2));
  EXPECT_EQ(spec.sizes, (std::vector<std::size_t>{20, 40}));
  EXPECT_EQ(spec.strategy.kind, Strategy::Kind::Sampled);
  EXPECT_EQ(spec.strategy.trials, 8u);
  EXPECT_EQ(spec.density_size, 2u);
  EXPECT_EQ(run(spec).pattern_ids.size(), 3u);
}

TEST(CompareToTruth, ZeroKernelGivesZeroGaps) {
  ExperimentSpec spec;
  spec.kernel = StepFunction<double>({0.5, 0.5}, std::vector<double>(4, 0));
  spec.sizes = {20, 40};
  spec.k_max = 3;
  const auto trace = run(spec);
  const auto report = compare_to_truth(trace, *spec.kernel);
  const auto classes = enumerate_posets(spec.density_size);
  for (const auto& g : report.gaps) {
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i].poset.comparable_pairs() > 0)
        EXPECT_EQ(g.gaps[i], 0.0) << classes[i].id;
      else
        EXPECT_LE(g.gaps[i], 1e-13) << classes[i].id;
    }
    ASSERT_TRUE(g.cut_distance.has_value());
    EXPECT_EQ(*g.cut_distance, 0.0);
  }
}

TEST(CompareToTruth, ChainKernelConverges) {
  ExperimentSpec spec;
  spec.kernel = from_poset<double>(Poset::chain(2), {0, 1});
  spec.sizes = {50, 200};
  spec.k_max = 3;
  spec.seed = 2;
  spec.strategy = Strategy::sampled(16, 2);
  const auto trace = run(spec);
  const auto report = compare_to_truth(trace, *spec.kernel);
  EXPECT_EQ(report.truth_density[1], 1.0);
  EXPECT_EQ(report.truth_density[2], 0.25);
  EXPECT_LT(report.at(200, 3).linf, 0.05);
}

TEST(CompareToTruth, OnlyForKernelSources) {
  ExperimentSpec spec;
  spec.source = ExperimentSpec::Source::BlowUp;
  spec.base = Poset::chain(2);
  spec.sizes = {4};
  const auto trace = run(spec);
  EXPECT_CODE(compare_to_truth(trace, layered_kernel()), TruthUnavailable);
}

TEST(Pipeline, BudgetExceededKeepsPartialTrace) {
  // Level 3 needs 16 parts at n=20 and far more at n=200 for this kernel.
  auto spec = kernel_spec({20, 200}, 3, 4);
  const auto third = 1.0 / 3;
  spec.kernel = StepFunction<double>({third, third, third}, std::vector<double>{0, 0.5, 1, 0, 0, 0.5, 0, 0, 0});
  spec.part_cap = 50;
  const auto trace = run(spec);
  ASSERT_TRUE(trace.error.has_value());
  EXPECT_EQ(trace.error_code, ErrorCode::BudgetExceeded);
  ASSERT_EQ(trace.sizes.size(), 2u);
  EXPECT_EQ(trace.sizes[0].levels.size(), 3u);
  EXPECT_TRUE(trace.sizes[1].levels.empty());
  const auto dir = scratch_dir();
  write_run_directory(dir, trace);
  EXPECT_EQ(read_json_file((dir / "summary.json").string())["status"], "partial");
  fs::remove_all(dir);
}

TEST(RunDirectory, Layout) {
  const auto dir = scratch_dir();
  auto spec = kernel_spec({20, 40}, 2, 6);
  const auto trace = run(spec);
  const auto truth = compare_to_truth(trace, *spec.kernel);
  write_run_directory(dir, trace, &truth);
  for (const char* f : {"trace.csv", "deltas.csv", "summary.json", "n20/poset.txt", "n20/order.json",
                        "n40/k1/partition.json", "n40/k1/step.json", "n40/k2/regularize.csv", "estimates/k2.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_FALSE(fs::exists(dir / "n40/k1/regularize.csv"));
  const auto summary = read_json_file((dir / "summary.json").string());
  EXPECT_EQ(summary["status"], "complete");
  EXPECT_EQ(summary["levels"].size(), 4u);
  const auto back = read_poset_file((dir / "n40/poset.txt").string());
  EXPECT_EQ(back.relations(), trace.at_size(40).poset.relations());
  const auto step = read_step_function_file((dir / "estimates/k2.json").string());
  EXPECT_EQ(step.values(), trace.at_size(40).levels[1].step.values());
  std::ifstream csv(dir / "trace.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header.rfind("n,k,parts,q,certified,t_p1.0", 0), 0u);
  EXPECT_NE(header.find("gap_linf,cut_distance"), std::string::npos);
  fs::remove_all(dir);
}
