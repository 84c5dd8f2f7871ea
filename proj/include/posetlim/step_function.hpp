#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "posetlim/error.hpp"
#include "posetlim/poset.hpp"
#include "posetlim/rational.hpp"
#include "posetlim/rng.hpp"

namespace posetlim {

/// Tolerance on the total measure of a floating-point step function.
inline constexpr double kMeasureTolerance = 1e-9;

/// A function on [0,1]^2 that is constant on the rectangles of an interval
/// partition of [0,1]. Part i is the i-th interval from the left and has
/// length measures[i]; zero-length parts are allowed.
template <class Scalar = double>
class StepFunction {
 public:
  using scalar_type = Scalar;

  StepFunction() = default;

  /// Validates shape and measures. Floating-point measures within
  /// kMeasureTolerance of summing to 1 are renormalised; exact scalars must
  /// sum to 1 exactly.
  StepFunction(std::vector<Scalar> measures, std::vector<Scalar> values)
      : measures_(std::move(measures)), values_(std::move(values)) {
    const std::size_t k = measures_.size();
    if (k == 0) fail(ErrorCode::InvalidMeasures, "step function needs at least one part");
    if (values_.size() != k * k)
      fail(ErrorCode::InvalidArgument, "value matrix must be " + std::to_string(k) + "x" + std::to_string(k));
    Scalar total = 0;
    for (const auto& m : measures_) {
      if (m < 0) fail(ErrorCode::InvalidMeasures, "negative part measure");
      total += m;
    }
    if constexpr (is_exact_v<Scalar>) {
      if (total != 1) fail(ErrorCode::InvalidMeasures, "measures sum to " + total.str() + ", not 1");
    } else {
      if (!(std::abs(total - 1) <= kMeasureTolerance))
        fail(ErrorCode::InvalidMeasures, "measures sum to " + std::to_string(total) + ", not 1");
      // Sums off by summation rounding only are left alone, so reading back
      // a written function reproduces it bit for bit.
      const double rounding = 4.0 * static_cast<double>(k) * std::numeric_limits<double>::epsilon();
      if (std::abs(total - 1) > rounding)
        for (auto& m : measures_) m /= total;
    }
  }

  StepFunction(std::vector<Scalar> measures, const std::vector<std::vector<Scalar>>& rows)
      : StepFunction(std::move(measures), flatten(rows)) {}

  /// k equal parts.
  static StepFunction uniform(std::size_t k, std::vector<Scalar> values) {
    return StepFunction(std::vector<Scalar>(k, Scalar(1) / Scalar(k)), std::move(values));
  }

  std::size_t parts() const noexcept { return measures_.size(); }
  const std::vector<Scalar>& measures() const noexcept { return measures_; }
  const Scalar& measure(std::size_t i) const { return measures_[i]; }
  const Scalar& value(std::size_t i, std::size_t j) const { return values_[i * parts() + j]; }
  const std::vector<Scalar>& values() const noexcept { return values_; }

  std::vector<std::vector<Scalar>> value_rows() const {
    std::vector<std::vector<Scalar>> rows(parts());
    for (std::size_t i = 0; i < parts(); ++i)
      rows[i].assign(values_.begin() + i * parts(), values_.begin() + (i + 1) * parts());
    return rows;
  }

  /// Same partition, values multiplied by c.
  StepFunction scaled(const Scalar& c) const {
    StepFunction out = *this;
    for (auto& v : out.values_) v *= c;
    return out;
  }

  bool values_in_unit_interval() const {
    for (const auto& v : values_)
      if (v < 0 || v > 1) return false;
    return true;
  }

  template <class Other>
  StepFunction<Other> convert() const {
    std::vector<Other> m, v;
    for (const auto& x : measures_) m.push_back(convert_scalar<Other>(x));
    for (const auto& x : values_) v.push_back(convert_scalar<Other>(x));
    return StepFunction<Other>(std::move(m), std::move(v));
  }

  friend bool operator==(const StepFunction& a, const StepFunction& b) {
    return a.measures_ == b.measures_ && a.values_ == b.values_;
  }

 private:
  template <class Other, class From>
  static Other convert_scalar(const From& x) {
    if constexpr (std::is_same_v<Other, double>) {
      return to_double(x);
    } else {
      return Other(x);
    }
  }

  static std::vector<Scalar> flatten(const std::vector<std::vector<Scalar>>& rows) {
    std::vector<Scalar> flat;
    for (const auto& r : rows) {
      if (r.size() != rows.size()) fail(ErrorCode::InvalidArgument, "value matrix is not square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return flat;
  }

  std::vector<Scalar> measures_;
  std::vector<Scalar> values_;
};

/// Encodes a poset as a 0/1 step function with |P| equal parts: part i
/// stands for order[i], and the value on (i, j) is 1 iff order[i] < order[j].
template <class Scalar = double>
StepFunction<Scalar> from_poset(const Poset& p, const std::vector<Element>& order) {
  if (!is_linear_extension(p, order))
    fail(ErrorCode::NotLinearExtension, "order is not a linear extension of the poset");
  const std::size_t n = p.size();
  if (n == 0) fail(ErrorCode::InvalidArgument, "cannot encode the empty poset");
  std::vector<Scalar> values(n * n, Scalar(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (p.precedes(order[i], order[j])) values[i * n + j] = 1;
  return StepFunction<Scalar>::uniform(n, std::move(values));
}

/// Checks that `blocks` lists 0..k-1 in increasing order, cut into
/// consecutive runs. Empty blocks are allowed.
inline void require_consecutive(const Parts& blocks, std::size_t k) {
  std::size_t next = 0;
  for (const auto& block : blocks)
    for (Element x : block) {
      if (x != next)
        fail(ErrorCode::NotConsecutive, "grouping must list parts 0.." + std::to_string(k - 1) +
                                            " in order as consecutive blocks");
      ++next;
    }
  if (next != k) fail(ErrorCode::NotConsecutive, "grouping does not cover all parts");
}

/// Conditional expectation onto a coarser interval partition: each coarse
/// value is the measure-weighted mean of the fine values over its rectangle;
/// rectangles of measure zero get value 0.
template <class Scalar>
StepFunction<Scalar> average(const StepFunction<Scalar>& w, const Parts& blocks) {
  require_consecutive(blocks, w.parts());
  const std::size_t c = blocks.size();
  std::vector<Scalar> measures(c, Scalar(0));
  for (std::size_t i = 0; i < c; ++i)
    for (Element x : blocks[i]) measures[i] += w.measure(x);
  std::vector<Scalar> values(c * c, Scalar(0));
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const Scalar area = measures[i] * measures[j];
      if (area == 0) continue;
      Scalar mass = 0;
      std::optional<Scalar> lo, hi;
      for (Element x : blocks[i])
        for (Element y : blocks[j]) {
          const Scalar cell = w.measure(x) * w.measure(y);
          if (cell == 0) continue;
          mass += cell * w.value(x, y);
          if (!lo || w.value(x, y) < *lo) lo = w.value(x, y);
          if (!hi || w.value(x, y) > *hi) hi = w.value(x, y);
        }
      // A mean lies between its extremes; clamping only removes rounding.
      values[i * c + j] = std::clamp<Scalar>(mass / area, *lo, *hi);
    }
  return StepFunction<Scalar>(std::move(measures), std::move(values));
}

/// Grouping of consecutive blocks given by their sizes.
inline Parts blocks_from_sizes(const std::vector<std::size_t>& sizes) {
  Parts blocks;
  Element next = 0;
  for (std::size_t s : sizes) {
    blocks.emplace_back();
    for (std::size_t i = 0; i < s; ++i) blocks.back().push_back(next++);
  }
  return blocks;
}

namespace detail {

template <class Scalar>
class StepDensity {
 public:
  StepDensity(const Poset& p, const StepFunction<Scalar>& w)
      : p_(p), w_(w), order_(linear_extension(p)), part_(p.size()) {
    for (std::size_t i = 0; i < w.parts(); ++i)
      if (w.measure(i) != 0) live_.push_back(i);
    preds_.resize(p.size());
    for (std::size_t d = 0; d < order_.size(); ++d)
      for (std::size_t e = 0; e < d; ++e)
        if (p.precedes(order_[e], order_[d])) preds_[d].push_back(e);
  }

  Scalar from_first(std::size_t first_part) {
    part_[0] = first_part;
    return w_.measure(first_part) * extend(1);
  }

  const std::vector<std::size_t>& live_parts() const { return live_; }

 private:
  // part_[d] is the part assigned to order_[d].
  Scalar extend(std::size_t depth) {
    if (depth == order_.size()) return Scalar(1);
    Scalar total = 0;
    for (std::size_t c : live_) {
      Scalar factor = w_.measure(c);
      for (std::size_t e : preds_[depth]) {
        const Scalar& v = w_.value(part_[e], c);
        if (v == 0) {
          factor = 0;
          break;
        }
        factor *= v;
      }
      if (factor == 0) continue;
      part_[depth] = c;
      total += factor * extend(depth + 1);
    }
    return total;
  }

  const Poset& p_;
  const StepFunction<Scalar>& w_;
  std::vector<Element> order_;
  std::vector<std::vector<std::size_t>> preds_;
  std::vector<std::size_t> part_;
  std::vector<std::size_t> live_;
};

}  // namespace detail

/// Density of a poset in a step function: the integral over [0,1]^|P| of
/// the product of W(x_a, x_b) over all relations a < b, evaluated exactly
/// as a finite sum over assignments of elements to parts.
template <class Scalar>
Scalar t_step(const Poset& p, const StepFunction<Scalar>& w, unsigned threads = 1) {
  if (!w.values_in_unit_interval())
    fail(ErrorCode::ValuesOutOfRange, "step function values must lie in [0,1]");
  if (p.size() == 0) return Scalar(1);
  detail::StepDensity<Scalar> eval(p, w);
  const auto& live = eval.live_parts();
  std::vector<Scalar> partial(live.size(), Scalar(0));
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(live.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < live.size(); ++i) partial[i] = eval.from_first(live[i]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        detail::StepDensity<Scalar> local(p, w);
        for (std::size_t i = t; i < live.size(); i += threads) partial[i] = local.from_first(live[i]);
      });
    for (auto& th : pool) th.join();
  }
  // Fixed-order reduction so the result does not depend on `threads`.
  Scalar total = 0;
  for (const auto& x : partial) total += x;
  return total;
}

struct KernelReport {
  bool axiom1 = true;
  bool axiom2 = true;
  /// Pairs (i, j) with a positive value where part i does not lie before part j.
  std::vector<std::pair<std::size_t, std::size_t>> order_violations;
  /// Triples (i, j, l) with positive values on (i, j) and (j, l) but value
  /// on (i, l) below 1.
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> closure_violations;

  bool is_kernel() const noexcept { return axiom1 && axiom2; }
};

/// Checks the two poset-kernel axioms relative to the standard order of
/// [0,1]. Parts of measure zero contain no points and are ignored.
template <class Scalar>
KernelReport check_axioms(const StepFunction<Scalar>& w) {
  KernelReport report;
  const std::size_t k = w.parts();
  for (std::size_t i = 0; i < k; ++i) {
    if (w.measure(i) == 0) continue;
    for (std::size_t j = 0; j < k; ++j)
      if (w.measure(j) != 0 && w.value(i, j) > 0 && !(i < j)) report.order_violations.emplace_back(i, j);
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (w.measure(i) == 0) continue;
    for (std::size_t j = 0; j < k; ++j) {
      if (w.measure(j) == 0 || !(w.value(i, j) > 0)) continue;
      for (std::size_t l = 0; l < k; ++l)
        if (w.measure(l) != 0 && w.value(j, l) > 0 && w.value(i, l) != 1)
          report.closure_violations.emplace_back(i, j, l);
    }
  }
  report.axiom1 = report.order_violations.empty();
  report.axiom2 = report.closure_violations.empty();
  return report;
}

/// Part index drawn by element `a` of a sample with the given seed.
template <class Scalar>
std::size_t sample_part(const StepFunction<Scalar>& w, std::uint64_t seed, std::uint64_t a) {
  const double u = to_unit(counter_hash(seed, 0, a));
  double cumulative = 0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.parts(); ++i) {
    const double m = to_double(w.measure(i));
    if (m == 0) continue;
    last = i;
    cumulative += m;
    if (u < cumulative) return i;
  }
  return last;
}

/// Random poset on n elements from a step kernel: element a lands in part i
/// with probability measures[i], and each ordered pair (a, b) is related
/// independently with probability values[part(a)][part(b)]. Every draw is
/// keyed by (seed, element) or (seed, pair), so the result is reproducible.
template <class Scalar>
Poset sample_poset(const StepFunction<Scalar>& w, std::size_t n, std::uint64_t seed) {
  if (!w.values_in_unit_interval())
    fail(ErrorCode::ValuesOutOfRange, "step function values must lie in [0,1]");
  if (const auto report = check_axioms(w); !report.is_kernel())
    fail(ErrorCode::AxiomViolation, "step function violates the poset-kernel axioms");
  std::vector<std::size_t> part(n);
  for (std::size_t a = 0; a < n; ++a) part[a] = sample_part(w, seed, a);
  std::vector<Bits> up(n, Bits(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double v = to_double(w.value(part[a], part[b]));
      if (v == 0) continue;
      const double u = to_unit(counter_hash(seed, 1, static_cast<std::uint64_t>(a) * n + b));
      if (u < v) up[a].set(b);
    }
  try {
    return Poset::from_strict_order(std::move(up));
  } catch (const Error& e) {
    // Unreachable for a kernel: axiom 1 forbids cycles and axiom 2 forces
    // every transitive consequence with probability one.
    throw std::logic_error(std::string("sampled relation is not a strict order: ") + e.what());
  }
}

/// Expected fraction of ordered pairs of distinct sampled elements that are
/// related: the integral of W over [0,1]^2.
template <class Scalar>
Scalar edge_density(const StepFunction<Scalar>& w) {
  Scalar total = 0;
  for (std::size_t i = 0; i < w.parts(); ++i)
    for (std::size_t j = 0; j < w.parts(); ++j) total += w.measure(i) * w.measure(j) * w.value(i, j);
  return total;
}

}  // namespace posetlim
