#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <locale>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "posetlim/posetlim.hpp"

namespace posetlim::cli {

namespace detail {

inline std::ostream& numeric(std::ostream& out) {
  out.imbue(std::locale::classic());
  out.precision(17);
  return out;
}

inline std::uint64_t need_seed(const std::optional<std::uint64_t>& seed, const std::string& what) {
  if (!seed) fail(ErrorCode::InvalidArgument, what + " is stochastic and needs --seed");
  return *seed;
}

inline void check_eps(double eps) {
  if (!(eps > 0)) fail(ErrorCode::InvalidArgument, "--eps must be positive");
}

// Writes to `path`, or to `fallback` when the path is empty.
template <class F>
void emit(const std::string& path, std::ostream& fallback, F&& body) {
  if (path.empty()) {
    numeric(fallback);
    body(fallback);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  numeric(out);
  body(out);
}

inline Parts read_parts_file(const std::string& path) {
  const auto j = read_json_file(path);
  try {
    return j.get<Parts>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": partition must be a list of element lists");
  }
}

inline std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + std::to_string(xs[i]);
  return s;
}

}  // namespace detail

/// Runs the command line; returns the process exit status. 0 on success, 1
/// on domain errors, 2 on usage, I/O or parse errors.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Poset limits: densities, step kernels, regular partitions and cut norms."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
  std::string variant_name = "hom";
  std::string output;
  app.add_option("--threads", threads, "Worker threads inside library calls")->check(CLI::PositiveNumber);

  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "Seed for all randomness"); };
  auto add_output = [&](CLI::App* sub) { sub->add_option("-o,--out", output, "Output file (default stdout)"); };

  // validate
  std::string poset_path;
  auto* validate = app.add_subcommand("validate", "Parse a poset file and report its size");
  validate->add_option("poset", poset_path, "Poset file")->required();

  // hom
  std::string pattern_path, target_path;
  std::uint64_t samples = 0;
  auto* hom = app.add_subcommand("hom", "Count order-preserving maps and the density t(P,Q)");
  hom->add_option("pattern", pattern_path, "Pattern poset P")->required();
  hom->add_option("target", target_path, "Target poset Q")->required();
  hom->add_option("--variant", variant_name, "hom, injective or induced")
      ->check(CLI::IsMember({"hom", "injective", "induced"}));
  hom->add_option("--samples", samples, "Estimate by Monte Carlo with this many random maps (needs --seed)");
  add_seed(hom);

  // density
  std::size_t max_size = 3;
  auto* density = app.add_subcommand("density", "Density of every poset class up to a size, as CSV");
  density->add_option("target", target_path, "Target poset")->required();
  density->add_option("--max-size", max_size, "Largest pattern size (1..6)")->check(CLI::Range(1, 6));
  density->add_option("--variant", variant_name, "hom, injective or induced")
      ->check(CLI::IsMember({"hom", "injective", "induced"}));
  add_output(density);

  // tpw
  std::string kernel_path;
  bool exact = false;
  auto* tpw = app.add_subcommand("tpw", "Density t(P,W) of a poset in a step kernel");
  tpw->add_option("pattern", pattern_path, "Pattern poset P")->required();
  tpw->add_option("kernel", kernel_path, "Step function JSON")->required();
  tpw->add_flag("--exact", exact, "Exact rational arithmetic (JSON entries must be integers or rational strings)");

  // check-kernel
  bool strict = false;
  auto* check = app.add_subcommand("check-kernel", "Check the poset-kernel axioms of a step function");
  check->add_option("kernel", kernel_path, "Step function JSON")->required();
  check->add_flag("--strict", strict, "Exit 1 with AxiomViolation when an axiom fails");

  // sample
  std::size_t n = 0;
  auto* sample = app.add_subcommand("sample", "Sample a random poset from a step kernel");
  sample->add_option("kernel", kernel_path, "Step function JSON")->required();
  sample->add_option("--n", n, "Number of elements")->required();
  add_seed(sample);
  add_output(sample);

  // regularize
  double eps = 0;
  std::string partition_path, strategy_name = "exhaustive", trace_path;
  std::uint64_t trials = 64, budget = 0;
  bool require_certified = false;
  auto* reg = app.add_subcommand("regularize", "Refine a partition to an eps-regular poset partition");
  reg->add_option("poset", poset_path, "Poset file")->required();
  reg->add_option("--eps", eps, "Regularity parameter")->required();
  reg->add_option("--partition", partition_path, "Starting partition JSON (default: one part)");
  reg->add_option("--strategy", strategy_name, "exhaustive or sampled")
      ->check(CLI::IsMember({"exhaustive", "sampled"}));
  reg->add_option("--trials", trials, "Random restarts per pair for the sampled strategy");
  reg->add_option("--node-budget", budget, "Node cap of one exact pair search");
  reg->add_flag("--require-certified", require_certified,
                "Fail with StrategyInconclusive instead of accepting uncertified pairs");
  reg->add_option("--trace", trace_path, "Write the per-iteration trace CSV here");
  add_seed(reg);
  add_output(reg);

  // cutnorm
  std::string step_path, other_path;
  bool heuristic = false, show_sets = false;
  auto* cut = app.add_subcommand("cutnorm", "Cut norm of a step function");
  cut->add_option("step", step_path, "Step function JSON")->required();
  cut->add_flag("--heuristic", heuristic, "Alternating maximisation; prints a lower bound (needs --seed)");
  cut->add_option("--trials", trials, "Random starts for --heuristic");
  cut->add_flag("--sets", show_sets, "Also print the optimal S and T as part indices");
  add_seed(cut);

  // distance
  auto* dist = app.add_subcommand("distance", "Cut distance between two step functions");
  dist->add_option("first", step_path, "Step function JSON")->required();
  dist->add_option("second", other_path, "Step function JSON")->required();
  dist->add_flag("--heuristic", heuristic, "Alternating maximisation; prints a lower bound (needs --seed)");
  dist->add_option("--trials", trials, "Random starts for --heuristic");
  dist->add_flag("--sets", show_sets, "Also print the optimal S and T as refined-part indices");
  add_seed(dist);

  // pipeline
  std::string spec_path, run_dir;
  auto* pipe = app.add_subcommand("pipeline", "Run the nested-partition experiment and write a run directory");
  pipe->add_option("spec", spec_path, "Experiment JSON")->required();
  pipe->add_option("-o,--out", run_dir, "Run directory")->required();
  add_seed(pipe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*validate) {
      const auto p = read_poset_file(poset_path);
      out << "ok n=" << p.size() << " relations=" << p.relations().size() << " covers=" << p.covers().size()
          << '\n';
    } else if (*hom) {
      const auto p = read_poset_file(pattern_path);
      const auto q = read_poset_file(target_path);
      const auto variant = parse_variant(variant_name);
      detail::numeric(out);
      if (samples > 0) {
        if (variant != Variant::Hom) fail(ErrorCode::Unsupported, "--samples supports the hom variant only");
        const auto est = mc_t(p, q, samples, detail::need_seed(seed, "hom --samples"), threads);
        out << "estimate=" << est.value << " standard_error=" << est.standard_error << " samples=" << est.samples
            << '\n';
      } else {
        out << "count=" << to_string(hom_count(p, q, variant, threads)) << " t=" << t_exact(p, q, variant).str()
            << " value=" << t(p, q, variant, threads) << '\n';
      }
    } else if (*density) {
      const auto q = read_poset_file(target_path);
      const auto v = density_vector(q, max_size, parse_variant(variant_name), threads);
      detail::emit(output, out, [&](std::ostream& o) {
        o << "id,size,value\n";
        for (const auto& e : v.entries) o << e.id << ',' << e.size << ',' << e.value << '\n';
      });
    } else if (*tpw) {
      const auto p = read_poset_file(pattern_path);
      const auto j = read_json_file(kernel_path);
      detail::numeric(out);
      if (exact) {
        const auto w = exact_step_function_from_json(j);
        if (!w) throw ParseError(kernel_path + ": --exact needs integer or rational-string entries");
        const auto v = t_step(p, *w, threads);
        out << "t=" << v.str() << " value=" << to_double(v) << '\n';
      } else {
        out << "value=" << t_step(p, step_function_from_json(j), threads) << '\n';
      }
    } else if (*check) {
      const auto w = read_step_function_file(kernel_path);
      const auto r = check_axioms(w);
      out << "axiom1=" << (r.axiom1 ? "ok" : "fail") << " axiom2=" << (r.axiom2 ? "ok" : "fail") << '\n';
      for (auto [i, j] : r.order_violations) out << "order_violation " << i << ' ' << j << '\n';
      for (auto [i, j, l] : r.closure_violations) out << "closure_violation " << i << ' ' << j << ' ' << l << '\n';
      if (strict && !r.is_kernel()) fail(ErrorCode::AxiomViolation, "step function is not a poset kernel");
    } else if (*sample) {
      const auto w = read_step_function_file(kernel_path);
      const auto p = sample_poset(w, n, detail::need_seed(seed, "sample"));
      detail::emit(output, out, [&](std::ostream& o) { write_poset(o, p); });
    } else if (*reg) {
      detail::check_eps(eps);
      const auto p = read_poset_file(poset_path);
      const auto start = partition_path.empty() ? PosetPartition::trivial(p)
                                                : PosetPartition(p, detail::read_parts_file(partition_path));
      Strategy strategy = Strategy::exhaustive();
      if (strategy_name == "sampled") {
        strategy = Strategy::sampled(trials, detail::need_seed(seed, "regularize --strategy sampled"));
        if (budget) strategy.node_budget = budget;
      } else if (budget) {
        strategy = Strategy::exhaustive(budget);
      }
      RegularizeOptions options;
      options.require_certified = require_certified;
      const auto result = regularize(p, start, eps, strategy, options);
      detail::emit(output, out, [&](std::ostream& o) {
        o << nlohmann::json(result.partition.parts()).dump() << '\n';
      });
      if (!trace_path.empty()) {
        std::ofstream t(trace_path);
        if (!t) throw ParseError("cannot write " + trace_path);
        write_regularize_csv(t, result.trace);
      }
      if (!result.certified) err << "warning: some pairs are regular only by randomized search\n";
    } else if (*cut || *dist) {
      CutNormOptions options;
      options.threads = threads;
      if (heuristic) {
        options.mode = CutNormOptions::Mode::Heuristic;
        options.trials = trials;
        options.seed = detail::need_seed(seed, "--heuristic");
      }
      const auto w = read_step_function_file(step_path);
      const auto c = *cut ? cut_norm(w, options)
                          : cut_norm(common_refinement(w, read_step_function_file(other_path)), options);
      detail::numeric(out);
      out << (*cut ? "cut_norm=" : "cut_distance=") << c.value << (c.exact ? "" : " lower_bound") << '\n';
      if (show_sets) out << "S=" << detail::join(c.s) << "\nT=" << detail::join(c.t) << '\n';
    } else if (*pipe) {
      const auto j = read_json_file(spec_path);
      auto spec = ExperimentSpec::from_json(j, std::filesystem::path(spec_path).parent_path());
      spec.seed = detail::need_seed(seed, "pipeline");
      if (spec.strategy.kind == Strategy::Kind::Sampled) spec.strategy.seed = spec.seed;
      spec.threads = threads;
      const auto trace = run(spec);
      std::optional<TruthReport> truth;
      if (spec.source == ExperimentSpec::Source::Kernel) truth = compare_to_truth(trace, *spec.kernel, 22, threads);
      write_run_directory(run_dir, trace, truth ? &*truth : nullptr);
      detail::numeric(out);
      for (const auto& size : trace.sizes)
        for (const auto& level : size.levels) {
          out << "n=" << level.n << " k=" << level.k << " parts=" << level.parts.size();
          if (truth) out << " gap_linf=" << truth->at(level.n, level.k).linf;
          out << '\n';
        }
      if (trace.error) {
        err << "error: " << *trace.error << " (partial run written to " << run_dir << ")\n";
        return 1;
      }
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace posetlim::cli
