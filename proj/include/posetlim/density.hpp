#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "posetlim/isomorphism.hpp"
#include "posetlim/poset.hpp"
#include "posetlim/rational.hpp"
#include "posetlim/rng.hpp"

namespace posetlim {

enum class Variant { Hom, Injective, Induced };

constexpr std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Hom: return "hom";
    case Variant::Injective: return "injective";
    case Variant::Induced: return "induced";
  }
  return "hom";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "hom") return Variant::Hom;
  if (s == "injective") return Variant::Injective;
  if (s == "induced") return Variant::Induced;
  fail(ErrorCode::InvalidArgument, "unknown variant '" + std::string(s) + "'");
}

using Count = unsigned __int128;

inline std::string to_string(Count c) {
  if (c == 0) return "0";
  std::string s;
  while (c > 0) {
    s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(c % 10)));
    c /= 10;
  }
  return s;
}

namespace detail {

inline Count checked_add(Count a, Count b) {
  Count r;
  if (__builtin_add_overflow(a, b, &r)) fail(ErrorCode::Overflow, "homomorphism count exceeds 128 bits");
  return r;
}

inline Count checked_mul(Count a, Count b) {
  Count r;
  if (__builtin_mul_overflow(a, b, &r)) fail(ErrorCode::Overflow, "map count exceeds 128 bits");
  return r;
}

// Backtracking counter. Elements of the pattern are assigned in
// linear-extension order, so every constraint a < b is checked when b is
// placed, against the already fixed image of a.
class HomCounter {
 public:
  HomCounter(const Poset& pattern, const Poset& target, Variant variant)
      : p_(pattern), q_(target), variant_(variant), order_(linear_extension(pattern)),
        image_(pattern.size()) {
    const std::size_t m = q_.size();
    incomparable_.assign(m, Bits(m));
    for (Element w = 0; w < m; ++w) {
      incomparable_[w] = ~(q_.up(w) | q_.down(w));
      incomparable_[w].reset(w);
    }
  }

  /// Count of maps with the first pattern element (in extension order)
  /// sent to `first_image`.
  Count count_from(Element first_image) {
    if (p_.size() == 0) return 1;
    used_ = Bits(q_.size());
    image_[order_[0]] = first_image;
    if (p_.size() == 1) return 1;
    used_.set(first_image);
    return extend(1);
  }

  Count count_all(unsigned threads) {
    if (p_.size() == 0) return 1;
    const std::size_t m = q_.size();
    std::vector<Count> partial(m, 0);
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(m)));
    if (threads == 1) {
      for (Element w = 0; w < m; ++w) partial[w] = count_from(w);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(threads);
      for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
          try {
            HomCounter local(p_, q_, variant_);
            for (Element w = t; w < m; w += threads) partial[w] = local.count_from(w);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    Count total = 0;
    for (Count c : partial) total = checked_add(total, c);
    return total;
  }

 private:
  Bits candidates(std::size_t depth) const {
    const Element a = order_[depth];
    Bits cand(q_.size());
    cand.set();
    for (std::size_t i = 0; i < depth; ++i) {
      const Element u = order_[i];
      const Element fu = image_[u];
      if (p_.precedes(u, a)) {
        cand &= q_.up(fu);
      } else if (variant_ == Variant::Induced) {
        cand &= incomparable_[fu];
      }
    }
    if (variant_ != Variant::Hom) cand -= used_;
    return cand;
  }

  Count extend(std::size_t depth) {
    Bits cand = candidates(depth);
    if (depth + 1 == order_.size()) return cand.count();
    Count total = 0;
    const Element a = order_[depth];
    for (auto w = cand.find_first(); w != Bits::npos; w = cand.find_next(w)) {
      image_[a] = w;
      used_.set(w);
      total = checked_add(total, extend(depth + 1));
      used_.reset(w);
    }
    return total;
  }

  const Poset& p_;
  const Poset& q_;
  Variant variant_;
  std::vector<Element> order_;
  std::vector<Element> image_;
  std::vector<Bits> incomparable_;
  Bits used_;
};

}  // namespace detail

/// Number of order-preserving maps from `pattern` to `target` in the given
/// variant (all maps, injective maps, or injective maps that also reflect
/// the order).
inline Count hom_count(const Poset& pattern, const Poset& target, Variant variant = Variant::Hom,
                       unsigned threads = 1) {
  if (pattern.size() == 0 || target.size() == 0)
    fail(ErrorCode::InvalidArgument, "hom_count needs nonempty posets");
  if (variant != Variant::Hom && target.size() < pattern.size()) return 0;
  return detail::HomCounter(pattern, target, variant).count_all(threads);
}

/// Number of maps the density is normalised by: |Q|^|P| for plain
/// homomorphisms, the falling factorial |Q|(|Q|-1)... for the injective and
/// induced variants.
inline Count map_count(std::size_t pattern_size, std::size_t target_size, Variant variant) {
  Count total = 1;
  for (std::size_t i = 0; i < pattern_size; ++i) {
    const std::size_t factor = variant == Variant::Hom ? target_size : target_size - i;
    if (variant != Variant::Hom && i >= target_size) return 0;
    total = detail::checked_mul(total, factor);
  }
  return total;
}

inline Rational t_exact(const Poset& pattern, const Poset& target, Variant variant = Variant::Hom) {
  const Count total = map_count(pattern.size(), target.size(), variant);
  if (total == 0) return Rational(0);
  const Count hits = hom_count(pattern, target, variant);
  return Rational(BigInt(to_string(hits)), BigInt(to_string(total)));
}

/// Probability that a uniformly random map (or injection) preserves the order.
inline double t(const Poset& pattern, const Poset& target, Variant variant = Variant::Hom,
                unsigned threads = 1) {
  const Count total = map_count(pattern.size(), target.size(), variant);
  if (total == 0) return 0.0;
  const Count hits = hom_count(pattern, target, variant, threads);
  return static_cast<double>(static_cast<long double>(hits) / static_cast<long double>(total));
}

struct Estimate {
  double value;
  double standard_error;
  std::uint64_t samples;
};

/// Monte-Carlo estimate of the plain homomorphism density using uniform
/// random maps. Sample i draws from counter stream i, so the result is
/// independent of `threads`.
inline Estimate mc_t(const Poset& pattern, const Poset& target, std::uint64_t samples,
                     std::uint64_t seed, unsigned threads = 1) {
  if (samples == 0) fail(ErrorCode::InvalidArgument, "samples must be positive");
  if (pattern.size() == 0 || target.size() == 0)
    fail(ErrorCode::InvalidArgument, "mc_t needs nonempty posets");
  const auto relations = pattern.relations();
  const std::size_t k = pattern.size();
  const std::uint64_t m = target.size();
  auto run = [&](std::uint64_t begin, std::uint64_t step) {
    std::vector<Element> image(k);
    std::uint64_t hits = 0;
    for (std::uint64_t i = begin; i < samples; i += step) {
      CounterRng rng(seed, i);
      for (auto& x : image) x = rng.below(m);
      bool ok = true;
      for (auto [a, b] : relations)
        if (!target.precedes(image[a], image[b])) {
          ok = false;
          break;
        }
      hits += ok ? 1 : 0;
    }
    return hits;
  };
  std::uint64_t hits = 0;
  threads = std::max(1u, threads);
  if (threads == 1) {
    hits = run(0, 1);
  } else {
    std::vector<std::uint64_t> partial(threads, 0);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back([&, t] { partial[t] = run(t, threads); });
    for (auto& th : pool) th.join();
    for (auto h : partial) hits += h;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(samples)), samples};
}

struct DensityEntry {
  std::string id;
  std::size_t size;
  double value;
};

/// Densities of every canonical poset class up to `max_size` in a target.
struct DensityVector {
  std::size_t max_size = 0;
  Variant variant = Variant::Hom;
  std::vector<DensityEntry> entries;

  double at(const std::string& id) const {
    for (const auto& e : entries)
      if (e.id == id) return e.value;
    fail(ErrorCode::InvalidArgument, "no density entry '" + id + "'");
  }

  friend bool operator==(const DensityVector& x, const DensityVector& y) {
    if (x.max_size != y.max_size || x.variant != y.variant || x.entries.size() != y.entries.size())
      return false;
    for (std::size_t i = 0; i < x.entries.size(); ++i)
      if (x.entries[i].id != y.entries[i].id || x.entries[i].value != y.entries[i].value) return false;
    return true;
  }
};

inline DensityVector density_vector(const Poset& target, std::size_t max_size,
                                    Variant variant = Variant::Hom, unsigned threads = 1) {
  DensityVector out{max_size, variant, {}};
  for (const auto& cls : enumerate_posets(max_size))
    out.entries.push_back({cls.id, cls.poset.size(), t(cls.poset, target, variant, threads)});
  return out;
}

}  // namespace posetlim
