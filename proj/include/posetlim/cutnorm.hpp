#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "posetlim/partition.hpp"
#include "posetlim/regularity.hpp"
#include "posetlim/rng.hpp"
#include "posetlim/step_function.hpp"

namespace posetlim {

/// W1 - W2 on the common refinement of their interval partitions. Cell c
/// lies inside part left[c] of W1 and part right[c] of W2. Values may be
/// negative.
template <class Scalar = double>
struct StepDifference {
  std::vector<Scalar> measures;
  std::vector<Scalar> values;
  std::vector<std::size_t> left, right;

  std::size_t parts() const noexcept { return measures.size(); }
  const Scalar& value(std::size_t i, std::size_t j) const { return values[i * parts() + j]; }
};

namespace detail {

template <class Scalar>
Scalar abs_value(const Scalar& x) {
  return x < 0 ? Scalar(-x) : x;
}

template <class Scalar>
std::vector<Scalar> boundaries(const StepFunction<Scalar>& w) {
  std::vector<Scalar> b{Scalar(0)};
  for (const auto& m : w.measures()) b.push_back(b.back() + m);
  b.back() = Scalar(1);
  return b;
}

// Index of the part whose interval contains the open cell (lo, hi); parts
// of measure zero are never chosen.
template <class Scalar>
std::size_t owner_of(const std::vector<Scalar>& bounds, const Scalar& lo, const Scalar& hi) {
  const Scalar mid = (lo + hi) / 2;
  auto it = std::upper_bound(bounds.begin(), bounds.end(), mid);
  std::size_t idx = static_cast<std::size_t>(it - bounds.begin());
  idx = std::clamp<std::size_t>(idx, 1, bounds.size() - 1) - 1;
  return idx;
}

}  // namespace detail

/// Common refinement of the two interval partitions. Boundaries closer than
/// 1e-12 are merged for floating-point scalars; exact scalars compare exactly.
template <class Scalar>
StepDifference<Scalar> common_refinement(const StepFunction<Scalar>& w1, const StepFunction<Scalar>& w2) {
  const auto b1 = detail::boundaries(w1);
  const auto b2 = detail::boundaries(w2);
  std::vector<Scalar> cuts = b1;
  cuts.insert(cuts.end(), b2.begin(), b2.end());
  std::sort(cuts.begin(), cuts.end());
  std::vector<Scalar> merged;
  for (const auto& c : cuts) {
    if constexpr (is_exact_v<Scalar>) {
      if (merged.empty() || c != merged.back()) merged.push_back(c);
    } else {
      if (merged.empty() || c - merged.back() > 1e-12) merged.push_back(c);
    }
  }
  merged.back() = Scalar(1);
  StepDifference<Scalar> d;
  for (std::size_t c = 0; c + 1 < merged.size(); ++c) {
    d.measures.push_back(merged[c + 1] - merged[c]);
    d.left.push_back(detail::owner_of(b1, merged[c], merged[c + 1]));
    d.right.push_back(detail::owner_of(b2, merged[c], merged[c + 1]));
  }
  const std::size_t k = d.measures.size();
  d.values.resize(k * k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      d.values[i * k + j] = w1.value(d.left[i], d.left[j]) - w2.value(d.right[i], d.right[j]);
  return d;
}

/// The difference of two functions on the same partition, or a single
/// function viewed as a difference against zero.
template <class Scalar>
StepDifference<Scalar> as_difference(const StepFunction<Scalar>& w) {
  StepDifference<Scalar> d{w.measures(), w.values(), {}, {}};
  for (std::size_t i = 0; i < w.parts(); ++i) {
    d.left.push_back(i);
    d.right.push_back(i);
  }
  return d;
}

template <class Scalar>
struct CutNorm {
  Scalar value{};
  /// Optimal rectangle S x T as part index lists; parts of zero measure are
  /// left out.
  std::vector<std::size_t> s, t;
  /// False for the heuristic, whose value is only a lower bound.
  bool exact = true;
};

struct CutNormOptions {
  enum class Mode { Exact, Heuristic };
  Mode mode = Mode::Exact;
  /// Exact mode refuses more effective parts than this.
  std::size_t max_exact_parts = 22;
  std::uint64_t trials = 32;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

namespace detail {

// Parts with zero measure are dropped and parts whose rows and columns
// agree everywhere are merged. Both steps leave the cut norm unchanged: for
// a fixed T the best S takes twin parts together, and vice versa.
template <class Scalar>
struct Compressed {
  std::vector<std::vector<std::size_t>> members;
  std::vector<Scalar> a;  // a[c*k+d] = M_c M_d V_cd
  std::size_t k = 0;
};

template <class Scalar>
Compressed<Scalar> compress(const std::vector<Scalar>& measures, const std::vector<Scalar>& values) {
  const std::size_t n = measures.size();
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < n; ++i)
    if (measures[i] > 0) live.push_back(i);
  auto twins = [&](std::size_t x, std::size_t y) {
    for (std::size_t j : live)
      if (values[x * n + j] != values[y * n + j] || values[j * n + x] != values[j * n + y]) return false;
    return true;
  };
  Compressed<Scalar> out;
  std::vector<std::size_t> reps;
  for (std::size_t i : live) {
    std::size_t c = 0;
    while (c < reps.size() && !twins(reps[c], i)) ++c;
    if (c == reps.size()) {
      reps.push_back(i);
      out.members.emplace_back();
    }
    out.members[c].push_back(i);
  }
  out.k = reps.size();
  std::vector<Scalar> mass(out.k, Scalar(0));
  for (std::size_t c = 0; c < out.k; ++c)
    for (std::size_t i : out.members[c]) mass[c] += measures[i];
  out.a.resize(out.k * out.k);
  for (std::size_t c = 0; c < out.k; ++c)
    for (std::size_t d = 0; d < out.k; ++d) out.a[c * out.k + d] = mass[c] * mass[d] * values[reps[c] * n + reps[d]];
  return out;
}

template <class Scalar>
struct Best {
  Scalar value{};
  std::uint64_t t_mask = 0;
  bool positive = true;
  bool set = false;
};

template <class Scalar>
CutNorm<Scalar> expand(const Compressed<Scalar>& cp, std::uint64_t s_mask, std::uint64_t t_mask, Scalar value,
                       bool exact) {
  CutNorm<Scalar> out;
  out.value = value;
  out.exact = exact;
  for (std::size_t c = 0; c < cp.k; ++c) {
    if (s_mask >> c & 1) out.s.insert(out.s.end(), cp.members[c].begin(), cp.members[c].end());
    if (t_mask >> c & 1) out.t.insert(out.t.end(), cp.members[c].begin(), cp.members[c].end());
  }
  std::sort(out.s.begin(), out.s.end());
  std::sort(out.t.begin(), out.t.end());
  return out;
}

// For every column set T the best S is read off the signs of the row sums
// r_i(T). Row sums are assembled from two precomputed halves of T.
template <class Scalar>
CutNorm<Scalar> exact_cut_norm(const Compressed<Scalar>& cp, unsigned threads) {
  const std::size_t k = cp.k;
  if (k == 0) return {};
  const std::size_t h = k / 2;
  const std::size_t lo_count = std::size_t{1} << h;
  const std::size_t hi_count = std::size_t{1} << (k - h);
  std::vector<Scalar> low(k * lo_count, Scalar(0)), high(k * hi_count, Scalar(0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t m = 1; m < lo_count; ++m) {
      const std::size_t bit = static_cast<std::size_t>(__builtin_ctzll(m));
      low[i * lo_count + m] = low[i * lo_count + (m & (m - 1))] + cp.a[i * k + bit];
    }
    for (std::size_t m = 1; m < hi_count; ++m) {
      const std::size_t bit = static_cast<std::size_t>(__builtin_ctzll(m));
      high[i * hi_count + m] = high[i * hi_count + (m & (m - 1))] + cp.a[i * k + h + bit];
    }
  }
  auto scan = [&](std::size_t hi_begin, std::size_t hi_end) {
    Best<Scalar> best;
    Scalar r;
    for (std::size_t hi = hi_begin; hi < hi_end; ++hi)
      for (std::size_t lo = 0; lo < lo_count; ++lo) {
        Scalar pos(0), neg(0);
        for (std::size_t i = 0; i < k; ++i) {
          r = low[i * lo_count + lo] + high[i * hi_count + hi];
          if (r > 0)
            pos += r;
          else if (r < 0)
            neg -= r;
        }
        const bool positive = !(neg > pos);
        const Scalar& v = positive ? pos : neg;
        if (!best.set || v > best.value) {
          best.value = v;
          best.t_mask = static_cast<std::uint64_t>(hi) << h | lo;
          best.positive = positive;
          best.set = true;
        }
      }
    return best;
  };
  Best<Scalar> best;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(hi_count)));
  if (threads == 1) {
    best = scan(0, hi_count);
  } else {
    std::vector<Best<Scalar>> partial(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] { partial[t] = scan(hi_count * t / threads, hi_count * (t + 1) / threads); });
    for (auto& th : pool) th.join();
    for (const auto& p : partial)
      if (p.set && (!best.set || p.value > best.value)) best = p;
  }
  std::uint64_t s_mask = 0;
  for (std::size_t i = 0; i < k; ++i) {
    Scalar r(0);
    for (std::size_t j = 0; j < k; ++j)
      if (best.t_mask >> j & 1) r += cp.a[i * k + j];
    if (best.positive ? r > 0 : r < 0) s_mask |= std::uint64_t{1} << i;
  }
  return expand(cp, s_mask, best.t_mask, best.value, true);
}

// Alternating maximisation: fix T, take the best S, fix S, take the best T,
// until the value stops growing. Trial 0 starts from T = everything.
template <class Scalar>
CutNorm<Scalar> heuristic_cut_norm(const Compressed<Scalar>& cp, std::uint64_t trials, std::uint64_t seed) {
  const std::size_t k = cp.k;
  CutNorm<Scalar> best;
  best.exact = false;
  if (k == 0) return best;
  std::vector<char> s_best, t_best;
  bool have = false;
  for (std::uint64_t trial = 0; trial <= trials; ++trial) {
    std::vector<char> t_in(k, 1);
    if (trial > 0) {
      CounterRng rng(seed, trial);
      for (auto& x : t_in) x = static_cast<char>(rng.next() & 1);
    }
    for (int sign = 1; sign >= -1; sign -= 2) {
      std::vector<char> tt = t_in, ss(k, 0);
      Scalar value(0);
      bool first = true;
      for (int iter = 0; iter < 200; ++iter) {
        for (std::size_t i = 0; i < k; ++i) {
          Scalar r(0);
          for (std::size_t j = 0; j < k; ++j)
            if (tt[j]) r += cp.a[i * k + j];
          ss[i] = sign > 0 ? r > 0 : r < 0;
        }
        Scalar total(0);
        for (std::size_t j = 0; j < k; ++j) {
          Scalar c(0);
          for (std::size_t i = 0; i < k; ++i)
            if (ss[i]) c += cp.a[i * k + j];
          tt[j] = sign > 0 ? c > 0 : c < 0;
          if (tt[j]) total += sign > 0 ? c : Scalar(-c);
        }
        if (!first && !(total > value)) break;
        value = total;
        first = false;
      }
      if (!have || value > best.value) {
        // Recompute S for the final T so the reported pair attains `value`.
        for (std::size_t i = 0; i < k; ++i) {
          Scalar r(0);
          for (std::size_t j = 0; j < k; ++j)
            if (tt[j]) r += cp.a[i * k + j];
          ss[i] = sign > 0 ? r > 0 : r < 0;
        }
        Scalar v(0);
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j)
            if (ss[i] && tt[j]) v += cp.a[i * k + j];
        v = abs_value(v);
        if (!have || v > best.value) {
          best.value = v;
          s_best = ss;
          t_best = tt;
          have = true;
        }
      }
    }
  }
  std::uint64_t s_mask = 0, t_mask = 0;
  for (std::size_t c = 0; c < k && c < 64; ++c) {
    if (s_best[c]) s_mask |= std::uint64_t{1} << c;
    if (t_best[c]) t_mask |= std::uint64_t{1} << c;
  }
  if (k > 64) {
    // Masks cannot carry the sets; expand directly.
    CutNorm<Scalar> out;
    out.value = best.value;
    out.exact = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (s_best[c]) out.s.insert(out.s.end(), cp.members[c].begin(), cp.members[c].end());
      if (t_best[c]) out.t.insert(out.t.end(), cp.members[c].begin(), cp.members[c].end());
    }
    std::sort(out.s.begin(), out.s.end());
    std::sort(out.t.begin(), out.t.end());
    return out;
  }
  return expand(cp, s_mask, t_mask, best.value, false);
}

template <class Scalar>
CutNorm<Scalar> cut_norm_of(const std::vector<Scalar>& measures, const std::vector<Scalar>& values,
                            const CutNormOptions& options) {
  const auto cp = compress(measures, values);
  if (options.mode == CutNormOptions::Mode::Heuristic) return heuristic_cut_norm(cp, options.trials, options.seed);
  if (cp.k > std::min<std::size_t>(options.max_exact_parts, 30))
    fail(ErrorCode::TooManyParts, std::to_string(cp.k) + " effective parts, exact mode allows " +
                                      std::to_string(std::min<std::size_t>(options.max_exact_parts, 30)));
  return exact_cut_norm(cp, options.threads);
}

}  // namespace detail

/// sup over S, T of |integral of W over S x T|. For a step function the
/// supremum is attained at unions of parts: for fixed T the integral is
/// linear in how much of each part S contains.
template <class Scalar>
CutNorm<Scalar> cut_norm(const StepFunction<Scalar>& w, const CutNormOptions& options = {}) {
  return detail::cut_norm_of(w.measures(), w.values(), options);
}

template <class Scalar>
CutNorm<Scalar> cut_norm(const StepDifference<Scalar>& d, const CutNormOptions& options = {}) {
  return detail::cut_norm_of(d.measures, d.values, options);
}

/// Cut norm of W1 - W2 on the common refinement, with no rearrangement of
/// either function.
template <class Scalar>
Scalar cut_distance(const StepFunction<Scalar>& w1, const StepFunction<Scalar>& w2,
                    const CutNormOptions& options = {}) {
  return cut_norm(common_refinement(w1, w2), options).value;
}

template <class Scalar>
Scalar l1_norm(const StepDifference<Scalar>& d) {
  Scalar total(0);
  for (std::size_t i = 0; i < d.parts(); ++i)
    for (std::size_t j = 0; j < d.parts(); ++j) total += d.measures[i] * d.measures[j] * detail::abs_value(d.value(i, j));
  return total;
}

template <class Scalar>
Scalar sup_norm(const StepDifference<Scalar>& d) {
  Scalar best(0);
  for (std::size_t i = 0; i < d.parts(); ++i)
    for (std::size_t j = 0; j < d.parts(); ++j)
      if (d.measures[i] > 0 && d.measures[j] > 0) best = std::max(best, detail::abs_value(d.value(i, j)));
  return best;
}

struct ClaimCheck {
  double distance = 0;
  double bound = 0;  // 5 / (2k)
  bool holds = false;
  std::size_t parts = 0;
};

/// Builds W_n from P along a linear extension compatible with `partition`,
/// averages it over the partition to get W_{n,k}, and compares their exact
/// cut distance with 5/(2k). The partition must be (1/k)-regular; this is
/// checked first.
inline ClaimCheck claim_cut_bound(const Poset& p, const PosetPartition& partition, std::size_t k,
                                  const Strategy& strategy = Strategy::exhaustive(),
                                  const CutNormOptions& options = {}) {
  if (k == 0) fail(ErrorCode::InvalidArgument, "k must be positive");
  const double eps = 1.0 / static_cast<double>(k);
  const auto report = is_regular_partition(p, partition, eps, strategy);
  if (!report.regular)
    fail(ErrorCode::InvalidArgument, "partition is not " + std::to_string(eps) + "-regular");
  const auto parts = partition.without_empty_parts().parts();
  const auto order = linear_extension(p, parts);
  std::vector<std::size_t> sizes;
  for (const auto& part : parts) sizes.push_back(part.size());
  const auto wn = from_poset<double>(p, order);
  const auto wnk = average(wn, blocks_from_sizes(sizes));
  ClaimCheck out;
  out.parts = parts.size();
  out.distance = cut_distance(wn, wnk, options);
  out.bound = 5.0 / (2.0 * static_cast<double>(k));
  out.holds = out.distance <= out.bound;
  return out;
}

template <class Scalar>
struct GapCheck {
  Scalar gap{};
  Scalar bound{};  // m * cut distance
  std::size_t m = 0;
  bool holds = false;
};

/// |t(P,W1) - t(P,W2)| against m ||W1 - W2||, where m is the number of
/// comparable pairs of P. Floating-point checks allow 1e-12 of rounding.
template <class Scalar>
GapCheck<Scalar> density_gap_bound(const Poset& p, const StepFunction<Scalar>& w1, const StepFunction<Scalar>& w2,
                                   const CutNormOptions& options = {}) {
  if (!w1.values_in_unit_interval() || !w2.values_in_unit_interval())
    fail(ErrorCode::ValuesOutOfRange, "density gap bound needs values in [0,1]");
  GapCheck<Scalar> out;
  out.gap = detail::abs_value(Scalar(t_step(p, w1) - t_step(p, w2)));
  out.m = p.relations().size();
  out.bound = Scalar(static_cast<long long>(out.m)) * cut_distance(w1, w2, options);
  if constexpr (is_exact_v<Scalar>)
    out.holds = out.gap <= out.bound;
  else
    out.holds = out.gap <= out.bound + 1e-12;
  return out;
}

}  // namespace posetlim
