#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "posetlim/error.hpp"

namespace posetlim {

using Bits = boost::dynamic_bitset<std::uint64_t>;
using Element = std::size_t;
using Parts = std::vector<std::vector<Element>>;

enum class RelationMode {
  Cover,  // pairs generate the order; closure is taken
  Full,   // pairs are the whole order; closure must add nothing
};

/// A finite strict partial order on 0..n-1, stored as its full transitive
/// relation. Immutable once built; every factory validates irreflexivity and
/// transitivity before returning.
class Poset {
 public:
  Poset() = default;

  static Poset antichain(std::size_t n) { return Poset(std::vector<Bits>(n, Bits(n))); }

  static Poset chain(std::size_t n) {
    std::vector<Bits> up(n, Bits(n));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) up[a].set(b);
    return Poset(std::move(up));
  }

  /// Transitive closure of the relation generated by `pairs` (a precedes b).
  static Poset from_relations(std::size_t n,
                              const std::vector<std::pair<Element, Element>>& pairs,
                              RelationMode mode = RelationMode::Cover) {
    std::vector<Bits> up(n, Bits(n));
    for (auto [a, b] : pairs) {
      if (a >= n || b >= n)
        fail(ErrorCode::OutOfRange, "pair (" + std::to_string(a) + "," + std::to_string(b) +
                                        ") outside 0.." + std::to_string(n) + "-1");
      if (a == b) fail(ErrorCode::SelfLoop, "element " + std::to_string(a) + " related to itself");
      up[a].set(b);
    }
    const std::vector<Bits> given = up;
    close(up);
    for (std::size_t a = 0; a < n; ++a)
      if (up[a].test(a))
        fail(ErrorCode::Cycle, "closure forces " + std::to_string(a) + " to precede itself");
    if (mode == RelationMode::Full && up != given)
      fail(ErrorCode::NotClosed, "relation given as full but is not transitively closed");
    return Poset(std::move(up));
  }

  /// Adopts `up` as the full relation after checking it is a strict order.
  /// Throws Cycle on a reflexive entry or a 2-cycle and NotClosed when a
  /// transitive consequence is missing.
  static Poset from_strict_order(std::vector<Bits> up) {
    const std::size_t n = up.size();
    for (std::size_t a = 0; a < n; ++a) {
      if (up[a].size() != n) fail(ErrorCode::InvalidArgument, "relation matrix is not square");
      if (up[a].test(a)) fail(ErrorCode::Cycle, "element " + std::to_string(a) + " precedes itself");
    }
    for (std::size_t a = 0; a < n; ++a)
      for (auto b = up[a].find_first(); b != Bits::npos; b = up[a].find_next(b)) {
        if (up[b].test(a))
          fail(ErrorCode::Cycle, std::to_string(a) + " and " + std::to_string(b) + " precede each other");
        if (!up[b].is_subset_of(up[a]))
          fail(ErrorCode::NotClosed, "relation is not transitive at " + std::to_string(a) + "<" +
                                         std::to_string(b));
      }
    return Poset(std::move(up));
  }

  std::size_t size() const noexcept { return up_.size(); }
  bool precedes(Element a, Element b) const { return up_[a].test(b); }
  bool comparable(Element a, Element b) const { return up_[a].test(b) || up_[b].test(a); }

  /// Strict upper set {y : x < y} as a bitset.
  const Bits& up(Element x) const { return up_[x]; }
  /// Strict lower set {y : y < x} as a bitset.
  const Bits& down(Element x) const { return down_[x]; }

  /// Number of comparable pairs, i.e. edges of the comparability graph.
  std::size_t comparable_pairs() const noexcept { return pairs_; }

  std::vector<std::pair<Element, Element>> relations() const {
    std::vector<std::pair<Element, Element>> out;
    out.reserve(pairs_);
    for (std::size_t a = 0; a < size(); ++a)
      for (auto b = up_[a].find_first(); b != Bits::npos; b = up_[a].find_next(b))
        out.emplace_back(a, b);
    return out;
  }

  /// Cover relations (transitive reduction).
  std::vector<std::pair<Element, Element>> covers() const {
    std::vector<std::pair<Element, Element>> out;
    for (std::size_t a = 0; a < size(); ++a) {
      Bits implied(size());
      for (auto c = up_[a].find_first(); c != Bits::npos; c = up_[a].find_next(c)) implied |= up_[c];
      const Bits cover = up_[a] - implied;
      for (auto b = cover.find_first(); b != Bits::npos; b = cover.find_next(b)) out.emplace_back(a, b);
    }
    return out;
  }

  /// Subposet induced on `elements`, relabelled 0..k-1 in the given order.
  Poset induced(const std::vector<Element>& elements) const {
    const std::size_t k = elements.size();
    std::vector<Bits> up(k, Bits(k));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (up_[elements[i]].test(elements[j])) up[i].set(j);
    return Poset(std::move(up));
  }

  /// Relabels element `a` as `perm[a]`.
  Poset permuted(const std::vector<Element>& perm) const {
    const std::size_t n = size();
    std::vector<Bits> up(n, Bits(n));
    for (std::size_t a = 0; a < n; ++a)
      for (auto b = up_[a].find_first(); b != Bits::npos; b = up_[a].find_next(b))
        up[perm[a]].set(perm[b]);
    return Poset(std::move(up));
  }

  /// Disjoint union with no relations across the two sides.
  Poset disjoint_union(const Poset& other) const {
    const std::size_t n = size() + other.size();
    std::vector<Bits> up(n, Bits(n));
    for (std::size_t a = 0; a < size(); ++a)
      for (auto b = up_[a].find_first(); b != Bits::npos; b = up_[a].find_next(b)) up[a].set(b);
    for (std::size_t a = 0; a < other.size(); ++a)
      for (auto b = other.up_[a].find_first(); b != Bits::npos; b = other.up_[a].find_next(b))
        up[size() + a].set(size() + b);
    return Poset(std::move(up));
  }

  bool is_antichain() const noexcept { return pairs_ == 0; }

  friend bool operator==(const Poset& x, const Poset& y) { return x.up_ == y.up_; }

 private:
  explicit Poset(std::vector<Bits> up) : up_(std::move(up)) {
    const std::size_t n = up_.size();
    down_.assign(n, Bits(n));
    for (std::size_t a = 0; a < n; ++a) {
      pairs_ += up_[a].count();
      for (auto b = up_[a].find_first(); b != Bits::npos; b = up_[a].find_next(b)) down_[b].set(a);
    }
  }

  static void close(std::vector<Bits>& up) {
    const std::size_t n = up.size();
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        if (up[i].test(k)) up[i] |= up[k];
  }

  std::vector<Bits> up_;
  std::vector<Bits> down_;
  std::size_t pairs_ = 0;
};

/// Replaces every element by `k` pairwise incomparable clones; clone `c` of
/// element `a` gets index a*k + c, so clone classes are contiguous.
inline Poset blow_up(const Poset& p, std::size_t k) {
  if (k == 0) fail(ErrorCode::InvalidArgument, "blow-up factor must be positive");
  std::vector<std::pair<Element, Element>> pairs;
  for (auto [a, b] : p.relations())
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) pairs.emplace_back(a * k + i, b * k + j);
  return Poset::from_relations(p.size() * k, pairs, RelationMode::Full);
}

inline std::vector<Element> up_set(const Poset& p, Element x) {
  if (x >= p.size()) fail(ErrorCode::OutOfRange, "element " + std::to_string(x));
  std::vector<Element> out;
  for (auto y = p.up(x).find_first(); y != Bits::npos; y = p.up(x).find_next(y)) out.push_back(y);
  return out;
}

/// Checks that `parts` is a disjoint cover of the ground set in which every
/// relation between different parts goes from an earlier part to a later one.
/// Returns an empty string when valid, else a description of the violation.
inline std::string partition_violation(const Poset& p, const Parts& parts) {
  const std::size_t n = p.size();
  std::vector<std::size_t> owner(n, parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (Element x : parts[i]) {
      if (x >= n) return "element " + std::to_string(x) + " out of range";
      if (owner[x] != parts.size()) return "element " + std::to_string(x) + " in two parts";
      owner[x] = i;
    }
  for (Element x = 0; x < n; ++x)
    if (owner[x] == parts.size()) return "element " + std::to_string(x) + " not covered";
  for (Element x = 0; x < n; ++x)
    for (auto y = p.up(x).find_first(); y != Bits::npos; y = p.up(x).find_next(y))
      if (owner[x] > owner[y])
        return "backward relation " + std::to_string(x) + "<" + std::to_string(y) + " from part " +
               std::to_string(owner[x]) + " to part " + std::to_string(owner[y]);
  return {};
}

namespace detail {

inline std::vector<Element> kahn(const Poset& p, const std::vector<std::size_t>& rank) {
  const std::size_t n = p.size();
  std::vector<std::size_t> pending(n);
  using Key = std::pair<std::size_t, Element>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  for (Element x = 0; x < n; ++x) {
    pending[x] = p.down(x).count();
    if (pending[x] == 0) ready.emplace(rank[x], x);
  }
  std::vector<Element> order;
  order.reserve(n);
  while (!ready.empty()) {
    const Element x = ready.top().second;
    ready.pop();
    order.push_back(x);
    for (auto y = p.up(x).find_first(); y != Bits::npos; y = p.up(x).find_next(y))
      if (--pending[y] == 0) ready.emplace(rank[y], y);
  }
  return order;
}

}  // namespace detail

/// Linear extension choosing the lowest-index minimal element at each step.
inline std::vector<Element> linear_extension(const Poset& p) {
  return detail::kahn(p, std::vector<std::size_t>(p.size(), 0));
}

/// Linear extension in which every element of part i precedes every element
/// of part j for i < j; ties inside a part go to the lowest index.
inline std::vector<Element> linear_extension(const Poset& p, const Parts& parts) {
  if (auto why = partition_violation(p, parts); !why.empty())
    fail(ErrorCode::IncompatiblePartition, why);
  std::vector<std::size_t> rank(p.size());
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (Element x : parts[i]) rank[x] = i;
  return detail::kahn(p, rank);
}

/// True if `order` is a permutation of 0..n-1 listing a before b whenever a < b.
inline bool is_linear_extension(const Poset& p, const std::vector<Element>& order) {
  const std::size_t n = p.size();
  if (order.size() != n) return false;
  std::vector<std::size_t> pos(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (order[i] >= n || pos[order[i]] != n) return false;
    pos[order[i]] = i;
  }
  for (auto [a, b] : p.relations())
    if (pos[a] > pos[b]) return false;
  return true;
}

}  // namespace posetlim
