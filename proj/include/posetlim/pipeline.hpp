#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <locale>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "posetlim/cutnorm.hpp"
#include "posetlim/density.hpp"
#include "posetlim/partition.hpp"
#include "posetlim/poset_io.hpp"
#include "posetlim/regularity.hpp"
#include "posetlim/step_io.hpp"

namespace posetlim {

struct ExperimentSpec {
  enum class Source { Kernel, BlowUp, Files };

  Source source = Source::Kernel;
  std::optional<StepFunction<double>> kernel;
  std::optional<StepFunction<Rational>> exact_kernel;
  std::optional<Poset> base;
  std::vector<std::string> files;

  std::vector<std::size_t> sizes;
  std::size_t k_max = 1;
  std::uint64_t seed = 0;
  std::size_t part_cap = 100'000;
  /// Largest pattern size in the recorded density vectors.
  std::size_t density_size = 3;
  Strategy strategy = Strategy::exhaustive();
  unsigned threads = 1;

  void validate() const {
    if (k_max < 1) fail(ErrorCode::InvalidArgument, "k_max must be at least 1");
    if (density_size < 1 || density_size > 4) fail(ErrorCode::InvalidArgument, "density_size must be in 1..4");
    if (source == Source::Files) {
      if (files.empty()) fail(ErrorCode::InvalidArgument, "file source needs at least one poset file");
      return;
    }
    if (sizes.empty()) fail(ErrorCode::InvalidArgument, "sizes must not be empty");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] == 0) fail(ErrorCode::InvalidArgument, "sizes must be positive");
      if (i > 0 && sizes[i] <= sizes[i - 1]) fail(ErrorCode::InvalidArgument, "sizes must be increasing");
    }
    if (source == Source::Kernel) {
      if (!kernel) fail(ErrorCode::InvalidArgument, "kernel source needs a step function");
      if (!check_axioms(*kernel).is_kernel())
        fail(ErrorCode::AxiomViolation, "source step function is not a poset kernel");
    }
    if (source == Source::BlowUp) {
      if (!base || base->size() == 0) fail(ErrorCode::InvalidArgument, "blow-up source needs a nonempty base poset");
      for (std::size_t n : sizes)
        if (n % base->size() != 0)
          fail(ErrorCode::InvalidArgument,
               "size " + std::to_string(n) + " is not a multiple of the base size " + std::to_string(base->size()));
    }
  }

  /// Reads the JSON experiment format; relative paths resolve against `base_dir`.
  static ExperimentSpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    ExperimentSpec spec;
    try {
      const auto& src = j.at("source");
      const std::string type = src.at("type").get<std::string>();
      auto resolve = [&](const std::string& p) { return (base_dir / p).string(); };
      if (type == "kernel") {
        spec.source = Source::Kernel;
        const nlohmann::json k = src.contains("path") ? read_json_file(resolve(src["path"].get<std::string>()))
                                                       : src.at("kernel");
        spec.kernel = step_function_from_json(k);
        spec.exact_kernel = exact_step_function_from_json(k);
      } else if (type == "blowup") {
        spec.source = Source::BlowUp;
        if (src.contains("path")) {
          spec.base = read_poset_file(resolve(src["path"].get<std::string>()));
        } else {
          std::vector<std::pair<Element, Element>> rel;
          for (const auto& r : src.at("relations")) rel.emplace_back(r.at(0).get<Element>(), r.at(1).get<Element>());
          spec.base = Poset::from_relations(src.at("size").get<std::size_t>(), rel, RelationMode::Cover);
        }
      } else if (type == "files") {
        spec.source = Source::Files;
        for (const auto& f : src.at("files")) spec.files.push_back(resolve(f.get<std::string>()));
      } else {
        throw ParseError("unknown source type '" + type + "'");
      }
      if (j.contains("sizes")) spec.sizes = j["sizes"].get<std::vector<std::size_t>>();
      spec.k_max = j.value("k_max", std::size_t{1});
      spec.seed = j.value("seed", std::uint64_t{0});
      spec.part_cap = j.value("part_cap", spec.part_cap);
      spec.density_size = j.value("density_size", spec.density_size);
      const std::string strategy = j.value("strategy", std::string("exhaustive"));
      const std::uint64_t budget = j.value("node_budget", std::uint64_t{0});
      if (strategy == "exhaustive") {
        spec.strategy = budget ? Strategy::exhaustive(budget) : Strategy::exhaustive();
      } else if (strategy == "sampled") {
        const std::uint64_t trials = j.value("trials", std::uint64_t{64});
        spec.strategy = budget ? Strategy::sampled(trials, spec.seed, budget) : Strategy::sampled(trials, spec.seed);
      } else {
        throw ParseError("unknown strategy '" + strategy + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("experiment spec: ") + e.what());
    }
    return spec;
  }
};

/// One partition level of one poset: the (1/k)-regular partition and the
/// step function it induces.
struct LevelRecord {
  std::size_t n = 0, k = 0;
  Parts parts;                  // original element labels, in part order
  StepFunction<double> step;    // W_{n,k}
  std::vector<double> density;  // t_step of every canonical pattern
  double q = 0;
  std::size_t rounds = 0;
  std::size_t parts_before_pruning = 0;
  bool certified = true;
  bool hypothesis_holds = true;
  bool singleton_branch = false;
  bool nested = true;         // refines the previous level
  double tower_error = 0;     // max |average(W_{n,k}) - W_{n,k-1}|
  std::vector<TraceRow> trace;
};

struct SizeRecord {
  std::size_t n = 0;
  Poset poset;
  std::vector<Element> order;  // relabeling: position i holds element order[i]
  std::vector<LevelRecord> levels;
};

struct ConvergenceTrace {
  ExperimentSpec::Source source = ExperimentSpec::Source::Kernel;
  std::vector<std::string> pattern_ids;
  std::vector<SizeRecord> sizes;
  /// deltas[k-1][i]: L-infinity change of the density vector of W_{n,k}
  /// between sizes[i] and sizes[i+1].
  std::vector<std::vector<double>> deltas;
  /// Set when a run stopped early, e.g. on BudgetExceeded; the trace then
  /// holds every level finished before the failure.
  std::optional<std::string> error;
  std::optional<ErrorCode> error_code;

  const SizeRecord& at_size(std::size_t n) const {
    for (const auto& s : sizes)
      if (s.n == n) return s;
    fail(ErrorCode::InvalidArgument, "no record for n=" + std::to_string(n));
  }
};

namespace detail {

inline std::vector<double> density_of(const StepFunction<double>& w, const std::vector<PosetClass>& classes,
                                      unsigned threads) {
  std::vector<double> out;
  for (const auto& c : classes) out.push_back(t_step(c.poset, w, threads));
  return out;
}

inline double linf(const std::vector<double>& a, const std::vector<double>& b) {
  double best = 0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
  return best;
}

// Position blocks of each part along `order`; parts must occupy
// consecutive positions.
inline Parts position_blocks(const Parts& parts, const std::vector<Element>& order) {
  std::vector<std::size_t> pos(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  Parts blocks;
  std::size_t next = 0;
  for (const auto& part : parts) {
    std::vector<Element> b;
    for (Element x : part) b.push_back(pos[x]);
    std::sort(b.begin(), b.end());
    for (Element x : b)
      if (x != next++) fail(ErrorCode::NotConsecutive, "partition parts are not consecutive in the relabeling");
    blocks.push_back(std::move(b));
  }
  return blocks;
}

// Grouping of the fine parts into coarse parts, as consecutive index blocks.
inline Parts grouping(const Parts& fine, const Parts& coarse, std::size_t n) {
  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < coarse.size(); ++i)
    for (Element x : coarse[i]) owner[x] = i;
  Parts blocks(coarse.size());
  for (std::size_t f = 0; f < fine.size(); ++f) blocks[owner[fine[f].front()]].push_back(f);
  return blocks;
}

inline bool refines(const Parts& fine, const Parts& coarse, std::size_t n) {
  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < coarse.size(); ++i)
    for (Element x : coarse[i]) owner[x] = i;
  for (const auto& part : fine)
    for (Element x : part)
      if (owner[x] != owner[part.front()]) return false;
  return true;
}

inline double max_abs_diff(const StepFunction<double>& a, const StepFunction<double>& b) {
  if (a.parts() != b.parts()) return std::numeric_limits<double>::infinity();
  double best = 0;
  for (std::size_t i = 0; i < a.parts(); ++i) best = std::max(best, std::abs(a.measure(i) - b.measure(i)));
  for (std::size_t i = 0; i < a.values().size(); ++i) best = std::max(best, std::abs(a.values()[i] - b.values()[i]));
  return best;
}

inline Poset make_poset(const ExperimentSpec& spec, std::size_t index) {
  switch (spec.source) {
    case ExperimentSpec::Source::Kernel:
      return sample_poset(*spec.kernel, spec.sizes[index], counter_hash(spec.seed, 0x706f736574ULL, spec.sizes[index]));
    case ExperimentSpec::Source::BlowUp:
      return blow_up(*spec.base, spec.sizes[index] / spec.base->size());
    case ExperimentSpec::Source::Files:
      return read_poset_file(spec.files[index]);
  }
  throw std::logic_error("unknown source");
}

// Runs the k-chain for one poset. Levels are appended to `rec` as they
// finish so a failure leaves the completed ones in place.
inline void run_size(const ExperimentSpec& spec, const std::vector<PosetClass>& classes, SizeRecord& rec) {
  const Poset& p = rec.poset;
  const std::size_t n = p.size();
  std::vector<PosetPartition> chain{PosetPartition::trivial(p)};
  std::vector<RegularizeResult> results;
  RegularizeOptions options;
  options.part_cap = spec.part_cap;
  for (std::size_t k = 2; k <= spec.k_max; ++k) {
    results.push_back(regularize(p, chain.back(), 1.0 / static_cast<double>(k), spec.strategy, options));
    chain.push_back(results.back().partition);
  }
  rec.order = linear_extension(p, chain.back().parts());
  const auto wn = from_poset<double>(p, rec.order);
  for (std::size_t k = 1; k <= spec.k_max; ++k) {
    LevelRecord level;
    level.n = n;
    level.k = k;
    level.parts = chain[k - 1].without_empty_parts().parts();
    level.step = average(wn, position_blocks(level.parts, rec.order));
    level.density = density_of(level.step, classes, spec.threads);
    level.q = index(p, level.parts);
    if (k >= 2) {
      const auto& r = results[k - 2];
      level.trace = r.trace;
      level.rounds = r.trace.size();
      level.certified = r.certified;
      level.hypothesis_holds = r.hypothesis_holds;
      level.singleton_branch = r.singleton_branch;
      const auto& prev = rec.levels.back();
      level.nested = refines(level.parts, prev.parts, n);
      if (!level.nested) throw std::logic_error("regularize output does not refine its input");
      level.tower_error = max_abs_diff(average(level.step, grouping(level.parts, prev.parts, n)), prev.step);
    }
    level.parts_before_pruning = chain[k - 1].size();
    rec.levels.push_back(std::move(level));
  }
}

}  // namespace detail

/// Builds the nested chain of (1/k)-regular partitions for each poset of
/// the sequence and the step functions W_{n,k} they induce.
///
/// Level 1 is the trivial partition; level k regularizes level k-1 with
/// eps = 1/k. Elements are relabeled along a linear extension compatible
/// with the finest level, so every level's parts are consecutive intervals.
inline ConvergenceTrace run(const ExperimentSpec& spec) {
  spec.validate();
  ConvergenceTrace trace;
  trace.source = spec.source;
  const auto classes = enumerate_posets(spec.density_size);
  for (const auto& c : classes) trace.pattern_ids.push_back(c.id);
  const std::size_t count = spec.source == ExperimentSpec::Source::Files ? spec.files.size() : spec.sizes.size();
  for (std::size_t i = 0; i < count; ++i) {
    SizeRecord rec;
    rec.poset = detail::make_poset(spec, i);
    rec.n = rec.poset.size();
    if (!trace.sizes.empty() && rec.n <= trace.sizes.back().n)
      fail(ErrorCode::InvalidArgument, "poset sizes must be increasing");
    try {
      detail::run_size(spec, classes, rec);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BudgetExceeded) throw;
      trace.error = e.what();
      trace.error_code = e.code();
      trace.sizes.push_back(std::move(rec));
      break;
    }
    trace.sizes.push_back(std::move(rec));
  }
  trace.deltas.assign(spec.k_max, {});
  for (std::size_t k = 1; k <= spec.k_max; ++k)
    for (std::size_t i = 1; i < trace.sizes.size(); ++i) {
      const auto& a = trace.sizes[i - 1].levels;
      const auto& b = trace.sizes[i].levels;
      if (a.size() < k || b.size() < k) break;
      trace.deltas[k - 1].push_back(detail::linf(a[k - 1].density, b[k - 1].density));
    }
  return trace;
}

struct TruthGap {
  std::size_t n = 0, k = 0;
  std::vector<double> gaps;  // per pattern
  double linf = 0;
  std::optional<double> cut_distance;  // when exact mode is feasible
};

struct TruthReport {
  std::vector<double> truth_density;
  std::vector<TruthGap> gaps;

  const TruthGap& at(std::size_t n, std::size_t k) const {
    for (const auto& g : gaps)
      if (g.n == n && g.k == k) return g;
    fail(ErrorCode::InvalidArgument, "no gap for n=" + std::to_string(n) + ", k=" + std::to_string(k));
  }
};

/// Density gaps between every W_{n,k} and the kernel the sequence was
/// sampled from.
inline TruthReport compare_to_truth(const ConvergenceTrace& trace, const StepFunction<double>& truth,
                                    std::size_t max_cut_parts = 22, unsigned threads = 1) {
  if (trace.source != ExperimentSpec::Source::Kernel)
    fail(ErrorCode::TruthUnavailable, "the sequence was not sampled from a kernel");
  TruthReport report;
  std::vector<PosetClass> classes;
  for (const auto& c : enumerate_posets(4))
    if (std::find(trace.pattern_ids.begin(), trace.pattern_ids.end(), c.id) != trace.pattern_ids.end())
      classes.push_back(c);
  report.truth_density = detail::density_of(truth, classes, threads);
  for (const auto& size : trace.sizes)
    for (const auto& level : size.levels) {
      TruthGap g;
      g.n = level.n;
      g.k = level.k;
      for (std::size_t i = 0; i < classes.size(); ++i) g.gaps.push_back(std::abs(level.density[i] - report.truth_density[i]));
      g.linf = g.gaps.empty() ? 0.0 : *std::max_element(g.gaps.begin(), g.gaps.end());
      CutNormOptions options;
      options.max_exact_parts = max_cut_parts;
      options.threads = threads;
      try {
        g.cut_distance = cut_distance(level.step, truth, options);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::TooManyParts) throw;
      }
      report.gaps.push_back(std::move(g));
    }
  return report;
}

// ---------------------------------------------------------------------------
// Run directory

namespace detail {

inline std::ostream& csv_stream(std::ostream& out) {
  out.imbue(std::locale::classic());
  out.precision(17);
  return out;
}

inline nlohmann::json parts_json(const Parts& parts) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : parts) j.push_back(p);
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
}

}  // namespace detail

inline void write_trace_csv(std::ostream& out, const ConvergenceTrace& trace, const TruthReport* truth = nullptr) {
  detail::csv_stream(out);
  out << "n,k,parts,q,certified";
  for (const auto& id : trace.pattern_ids) out << ",t_" << id;
  if (truth) {
    for (const auto& id : trace.pattern_ids) out << ",gap_" << id;
    out << ",gap_linf,cut_distance";
  }
  out << '\n';
  for (const auto& size : trace.sizes)
    for (const auto& level : size.levels) {
      out << level.n << ',' << level.k << ',' << level.parts.size() << ',' << level.q << ','
          << (level.certified ? 1 : 0);
      for (double t : level.density) out << ',' << t;
      if (truth) {
        const auto& g = truth->at(level.n, level.k);
        for (double x : g.gaps) out << ',' << x;
        out << ',' << g.linf << ',';
        if (g.cut_distance) out << *g.cut_distance;
      }
      out << '\n';
    }
}

inline void write_regularize_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  detail::csv_stream(out);
  out << "iteration,q,irregular_pairs,parts,irregular_weight,uncertified_pairs\n";
  for (const auto& r : rows)
    out << r.iteration << ',' << r.q << ',' << r.irregular_pairs << ',' << r.parts << ',' << r.irregular_weight << ','
        << r.uncertified_pairs << '\n';
}

/// Writes every artifact of a run:
///
///   trace.csv                   one row per (n, k)
///   deltas.csv                  density changes between successive sizes
///   summary.json                status, pattern ids, per-level flags
///   n<N>/poset.txt              the poset, original labels
///   n<N>/order.json             relabeling order
///   n<N>/k<K>/partition.json    parts as element lists
///   n<N>/k<K>/step.json         W_{n,k}
///   n<N>/k<K>/regularize.csv    refinement trace (k >= 2)
///   estimates/k<K>.json         W_{n,k} for the largest finished n
inline void write_run_directory(const std::filesystem::path& dir, const ConvergenceTrace& trace,
                                const TruthReport* truth = nullptr) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "trace.csv");
    if (!out) throw ParseError("cannot write trace.csv");
    write_trace_csv(out, trace, truth);
  }
  {
    std::ofstream out(dir / "deltas.csv");
    if (!out) throw ParseError("cannot write deltas.csv");
    detail::csv_stream(out);
    out << "k,n_from,n_to,linf_delta\n";
    for (std::size_t k = 0; k < trace.deltas.size(); ++k)
      for (std::size_t i = 0; i < trace.deltas[k].size(); ++i)
        out << k + 1 << ',' << trace.sizes[i].n << ',' << trace.sizes[i + 1].n << ',' << trace.deltas[k][i] << '\n';
  }
  nlohmann::json summary;
  summary["status"] = trace.error ? "partial" : "complete";
  if (trace.error) summary["error"] = *trace.error;
  summary["patterns"] = trace.pattern_ids;
  summary["levels"] = nlohmann::json::array();
  for (const auto& size : trace.sizes) {
    const fs::path nd = dir / ("n" + std::to_string(size.n));
    fs::create_directories(nd, ec);
    if (ec) throw ParseError("cannot create " + nd.string());
    write_poset_file((nd / "poset.txt").string(), size.poset);
    detail::write_text(nd / "order.json", nlohmann::json(size.order).dump() + "\n");
    for (const auto& level : size.levels) {
      const fs::path kd = nd / ("k" + std::to_string(level.k));
      fs::create_directories(kd, ec);
      if (ec) throw ParseError("cannot create " + kd.string());
      detail::write_text(kd / "partition.json", detail::parts_json(level.parts).dump() + "\n");
      write_step_function_file((kd / "step.json").string(), level.step);
      if (!level.trace.empty()) {
        std::ofstream out(kd / "regularize.csv");
        write_regularize_csv(out, level.trace);
      }
      summary["levels"].push_back({{"n", level.n},
                                   {"k", level.k},
                                   {"parts", level.parts.size()},
                                   {"rounds", level.rounds},
                                   {"certified", level.certified},
                                   {"hypothesis_holds", level.hypothesis_holds},
                                   {"singleton_branch", level.singleton_branch},
                                   {"nested", level.nested},
                                   {"tower_error", level.tower_error}});
    }
  }
  if (!trace.sizes.empty()) {
    const fs::path ed = dir / "estimates";
    fs::create_directories(ed, ec);
    for (const auto& level : trace.sizes.back().levels)
      write_step_function_file((ed / ("k" + std::to_string(level.k) + ".json")).string(), level.step);
  }
  detail::write_text(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace posetlim
