#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "posetlim/poset.hpp"

namespace posetlim {

/// Ordered partition of a poset's ground set in which every relation
/// between two different parts goes from the earlier part to the later one.
/// Empty parts are allowed.
class PosetPartition {
 public:
  PosetPartition() = default;

  PosetPartition(const Poset& host, Parts parts) : n_(host.size()), parts_(std::move(parts)) {
    if (auto why = partition_violation(host, parts_); !why.empty())
      fail(ErrorCode::IncompatiblePartition, why);
  }

  static PosetPartition trivial(const Poset& host) {
    Parts parts(1);
    for (Element x = 0; x < host.size(); ++x) parts[0].push_back(x);
    return PosetPartition(host, std::move(parts));
  }

  /// Singletons listed along the lowest-index linear extension compatible
  /// with `coarser`.
  static PosetPartition singletons(const Poset& host, const PosetPartition& coarser) {
    Parts parts;
    for (Element x : linear_extension(host, coarser.parts())) parts.push_back({x});
    return PosetPartition(host, std::move(parts));
  }

  std::size_t ground_size() const noexcept { return n_; }
  std::size_t size() const noexcept { return parts_.size(); }
  const Parts& parts() const noexcept { return parts_; }
  const std::vector<Element>& operator[](std::size_t i) const { return parts_[i]; }

  std::size_t nonempty_parts() const {
    return static_cast<std::size_t>(
        std::count_if(parts_.begin(), parts_.end(), [](const auto& p) { return !p.empty(); }));
  }

  std::size_t largest_part() const {
    std::size_t best = 0;
    for (const auto& p : parts_) best = std::max(best, p.size());
    return best;
  }

  /// Part index of every element.
  std::vector<std::size_t> owners() const {
    std::vector<std::size_t> owner(n_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
      for (Element x : parts_[i]) owner[x] = i;
    return owner;
  }

  PosetPartition without_empty_parts() const {
    PosetPartition out;
    out.n_ = n_;
    for (const auto& p : parts_)
      if (!p.empty()) out.parts_.push_back(p);
    return out;
  }

  /// Every part lies inside a single part of `coarser`.
  bool refines(const PosetPartition& coarser) const {
    if (coarser.n_ != n_) return false;
    const auto owner = coarser.owners();
    for (const auto& p : parts_)
      for (Element x : p)
        if (owner[x] != owner[p.front()]) return false;
    return true;
  }

  friend bool operator==(const PosetPartition& a, const PosetPartition& b) {
    return a.n_ == b.n_ && a.parts_ == b.parts_;
  }

 private:
  std::size_t n_ = 0;
  Parts parts_;
};

}  // namespace posetlim
