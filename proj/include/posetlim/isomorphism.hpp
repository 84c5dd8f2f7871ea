#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "posetlim/poset.hpp"

namespace posetlim {

namespace detail {

struct Signature {
  std::size_t below;
  std::size_t above;
  auto operator<=>(const Signature&) const = default;
};

inline std::vector<Signature> signatures(const Poset& p) {
  std::vector<Signature> sig(p.size());
  for (Element x = 0; x < p.size(); ++x) sig[x] = {p.down(x).count(), p.up(x).count()};
  return sig;
}

// Extends a partial isomorphism one vertex at a time; `order` lists the
// vertices of p in assignment order.
class IsoSearch {
 public:
  IsoSearch(const Poset& p, const Poset& q)
      : p_(p), q_(q), sig_p_(signatures(p)), sig_q_(signatures(q)),
        image_(p.size(), kNone), used_(q.size(), false) {
    order_.resize(p.size());
    std::iota(order_.begin(), order_.end(), Element{0});
    // Rare signatures first, then by index.
    std::map<Signature, std::size_t> freq;
    for (const auto& s : sig_p_) ++freq[s];
    std::stable_sort(order_.begin(), order_.end(), [&](Element a, Element b) {
      return freq[sig_p_[a]] < freq[sig_p_[b]];
    });
  }

  bool run() { return extend(0); }

 private:
  static constexpr Element kNone = ~Element{0};

  bool extend(std::size_t depth) {
    if (depth == order_.size()) return true;
    const Element v = order_[depth];
    for (Element w = 0; w < q_.size(); ++w) {
      if (used_[w] || sig_q_[w] != sig_p_[v]) continue;
      bool ok = true;
      for (std::size_t i = 0; i < depth && ok; ++i) {
        const Element u = order_[i];
        const Element fu = image_[u];
        ok = p_.precedes(u, v) == q_.precedes(fu, w) && p_.precedes(v, u) == q_.precedes(w, fu);
      }
      if (!ok) continue;
      image_[v] = w;
      used_[w] = true;
      if (extend(depth + 1)) return true;
      used_[w] = false;
      image_[v] = kNone;
    }
    return false;
  }

  const Poset& p_;
  const Poset& q_;
  std::vector<Signature> sig_p_, sig_q_;
  std::vector<Element> order_;
  std::vector<Element> image_;
  std::vector<bool> used_;
};

}  // namespace detail

inline bool is_isomorphic(const Poset& p, const Poset& q) {
  if (p.size() != q.size() || p.comparable_pairs() != q.comparable_pairs()) return false;
  auto sp = detail::signatures(p);
  auto sq = detail::signatures(q);
  std::sort(sp.begin(), sp.end());
  std::sort(sq.begin(), sq.end());
  if (sp != sq) return false;
  return detail::IsoSearch(p, q).run();
}

/// Row-major relation matrix packed into an integer, first entry most
/// significant, so integer order is lexicographic matrix order. n <= 8.
inline std::uint64_t relation_code(const Poset& p) {
  std::uint64_t code = 0;
  for (Element a = 0; a < p.size(); ++a)
    for (Element b = 0; b < p.size(); ++b) code = (code << 1) | (p.precedes(a, b) ? 1u : 0u);
  return code;
}

/// Relabelling of `p` whose relation matrix is lexicographically smallest.
inline Poset canonical_form(const Poset& p) {
  const std::size_t n = p.size();
  if (n > 8) fail(ErrorCode::Unsupported, "canonical form limited to 8 elements");
  std::vector<Element> sigma(n);
  std::iota(sigma.begin(), sigma.end(), Element{0});
  std::uint64_t best = ~std::uint64_t{0};
  std::vector<Element> best_sigma = sigma;
  do {
    // Candidate matrix: entry (i,j) = p.precedes(sigma[i], sigma[j]).
    std::uint64_t code = 0;
    for (Element i = 0; i < n; ++i)
      for (Element j = 0; j < n; ++j) code = (code << 1) | (p.precedes(sigma[i], sigma[j]) ? 1u : 0u);
    if (code < best) {
      best = code;
      best_sigma = sigma;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  // Element sigma[i] becomes i.
  std::vector<Element> perm(n);
  for (Element i = 0; i < n; ++i) perm[best_sigma[i]] = i;
  return p.permuted(perm);
}

/// One canonical representative per isomorphism class, for sizes 1..max_size,
/// ordered by size and then by relation code.
struct PosetClass {
  std::string id;
  Poset poset;
};

inline std::vector<PosetClass> enumerate_posets(std::size_t max_size) {
  if (max_size > 6) fail(ErrorCode::Unsupported, "enumeration supports max_size <= 6");
  std::vector<PosetClass> out;
  // Every poset on k+1 elements is a poset on k elements plus a maximal
  // element whose strict lower set is down-closed.
  std::vector<Poset> level{Poset::antichain(0)};
  for (std::size_t k = 0; k < max_size; ++k) {
    std::map<std::uint64_t, Poset> next;
    for (const Poset& base : level) {
      for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
        bool down_closed = true;
        for (Element x = 0; x < k && down_closed; ++x)
          if (mask >> x & 1u)
            for (Element y = 0; y < k; ++y)
              if (base.precedes(y, x) && !(mask >> y & 1u)) down_closed = false;
        if (!down_closed) continue;
        auto pairs = base.relations();
        for (Element x = 0; x < k; ++x)
          if (mask >> x & 1u) pairs.emplace_back(x, k);
        Poset canon = canonical_form(Poset::from_relations(k + 1, pairs, RelationMode::Full));
        next.emplace(relation_code(canon), std::move(canon));
      }
    }
    level.clear();
    std::size_t index = 0;
    for (auto& [code, poset] : next) {
      level.push_back(poset);
      out.push_back({"p" + std::to_string(k + 1) + "." + std::to_string(index++), poset});
    }
  }
  return out;
}

/// Id of the class of `p` within enumerate_posets(p.size()).
inline std::string class_id(const Poset& p) {
  const std::uint64_t code = relation_code(canonical_form(p));
  for (const auto& c : enumerate_posets(p.size()))
    if (c.poset.size() == p.size() && relation_code(c.poset) == code) return c.id;
  fail(ErrorCode::Unsupported, "no class id for poset of this size");
}

}  // namespace posetlim
