#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "posetlim/partition.hpp"
#include "posetlim/poset.hpp"
#include "posetlim/rng.hpp"

namespace posetlim {

// ---------------------------------------------------------------------------
// Pair statistics and the index

struct PairStats {
  std::size_t e = 0;  // ordered pairs (x, y) in A x B with x < y
  double d = 0;       // e / (|A||B|), 0 if a side is empty
  double q = 0;       // (|A||B| / n^2) d^2
};

namespace detail {

inline Bits mask_of(std::size_t n, const std::vector<Element>& set) {
  Bits m(n);
  for (Element x : set) {
    if (x >= n) fail(ErrorCode::OutOfRange, "element " + std::to_string(x));
    m.set(x);
  }
  return m;
}

inline std::size_t count_edges(const Poset& p, const std::vector<Element>& a, const Bits& b_mask) {
  std::size_t e = 0;
  for (Element x : a) e += (p.up(x) & b_mask).count();
  return e;
}

inline double pair_index(std::size_t e, std::size_t a, std::size_t b, std::size_t n) {
  if (a == 0 || b == 0 || n == 0) return 0.0;
  const long double ee = static_cast<long double>(e);
  return static_cast<double>(ee * ee / (static_cast<long double>(a) * b) /
                             (static_cast<long double>(n) * n));
}

}  // namespace detail

inline PairStats pair_stats(const Poset& p, const std::vector<Element>& a, const std::vector<Element>& b) {
  const Bits am = detail::mask_of(p.size(), a);
  const Bits bm = detail::mask_of(p.size(), b);
  if (am.intersects(bm)) fail(ErrorCode::NotDisjoint, "pair sets overlap");
  PairStats s;
  if (a.empty() || b.empty()) return s;
  s.e = detail::count_edges(p, a, bm);
  s.d = static_cast<double>(s.e) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  s.q = detail::pair_index(s.e, a.size(), b.size(), p.size());
  return s;
}

/// q of two families of sets: the sum of q over all cross pairs.
inline double cross_index(const Poset& p, const Parts& left, const Parts& right) {
  double total = 0;
  for (const auto& x : left)
    for (const auto& y : right) total += pair_stats(p, x, y).q;
  return total;
}

/// q of a partition: the sum of q(V_i, V_j) over i < j.
inline double index(const Poset& p, const Parts& parts) {
  std::vector<Bits> masks;
  for (const auto& part : parts) masks.push_back(detail::mask_of(p.size(), part));
  double total = 0;
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (std::size_t j = i + 1; j < parts.size(); ++j)
      total += detail::pair_index(detail::count_edges(p, parts[i], masks[j]), parts[i].size(),
                                  parts[j].size(), p.size());
  return total;
}

inline double index(const Poset& p, const PosetPartition& partition) { return index(p, partition.parts()); }

// ---------------------------------------------------------------------------
// epsilon-regularity of a pair

/// Smallest subset size allowed by the threshold |X| >= eps |A|. Products
/// within 1e-9 of an integer count as that integer, so eps = 0.3 with
/// |A| = 10 gives 3.
inline std::size_t min_subset_size(double eps, std::size_t size) {
  const double raw = std::ceil(eps * static_cast<double>(size) - 1e-9);
  return std::clamp<std::size_t>(raw < 1 ? 1 : static_cast<std::size_t>(raw), 1, std::max<std::size_t>(size, 1));
}

struct Witness {
  std::vector<Element> x;  // subset of A
  std::vector<Element> y;  // subset of B
  double gap = 0;          // |d(X,Y) - d(A,B)|
  bool above = true;       // d(X,Y) > d(A,B)
};

struct Strategy {
  enum class Kind { Exhaustive, Sampled };
  Kind kind = Kind::Exhaustive;
  /// Branch-and-bound node cap for one exact pair search.
  std::uint64_t node_budget = 50'000'000;
  /// Random restarts of the witness search (sampled mode only).
  std::uint64_t trials = 64;
  std::uint64_t seed = 0;

  static Strategy exhaustive(std::uint64_t budget = 50'000'000) {
    return {Kind::Exhaustive, budget, 0, 0};
  }
  /// Tries an exact search with a small budget first, then falls back to a
  /// randomized local search for witnesses.
  static Strategy sampled(std::uint64_t trials, std::uint64_t seed, std::uint64_t budget = 200'000) {
    return {Kind::Sampled, budget, trials, seed};
  }
};

struct PairVerdict {
  bool regular = true;
  /// False when `regular` rests on a failed random search rather than proof.
  bool certified = true;
  std::optional<Witness> witness;
  std::uint64_t nodes = 0;
};

namespace detail {

using Matrix01 = std::vector<std::vector<std::uint8_t>>;

/// Looks for s rows and t columns of a 0/1 matrix covering at least `target`
/// ones. Branch and bound over classes of identical rows; columns with
/// identical patterns are merged as well. For a fixed row set the best
/// columns are the t with the largest counts, so only rows are branched on.
class DenseBlockSearch {
 public:
  struct Result {
    bool found = false;
    bool complete = true;
    std::vector<std::size_t> rows;
    std::vector<std::size_t> cols;
    std::uint64_t nodes = 0;
  };

  DenseBlockSearch(const Matrix01& m, std::size_t s, std::size_t t, long long target, std::uint64_t budget)
      : s_(s), t_(t), target_(target), budget_(budget) {
    const std::size_t a = m.size();
    const std::size_t b = a ? m[0].size() : 0;
    // Column classes.
    std::map<std::vector<std::uint8_t>, std::size_t> col_index;
    std::vector<std::size_t> col_class(b);
    for (std::size_t j = 0; j < b; ++j) {
      std::vector<std::uint8_t> pattern(a);
      for (std::size_t i = 0; i < a; ++i) pattern[i] = m[i][j];
      auto [it, inserted] = col_index.emplace(pattern, col_members_.size());
      if (inserted) col_members_.emplace_back();
      col_members_[it->second].push_back(j);
      col_class[j] = it->second;
    }
    const std::size_t cc = col_members_.size();
    // Row classes over the reduced columns.
    std::map<std::vector<std::uint8_t>, std::size_t> row_index;
    std::vector<std::vector<std::uint8_t>> reduced;
    for (std::size_t i = 0; i < a; ++i) {
      std::vector<std::uint8_t> pattern(cc);
      for (std::size_t c = 0; c < cc; ++c) pattern[c] = m[i][col_members_[c].front()];
      auto [it, inserted] = row_index.emplace(pattern, row_members_.size());
      if (inserted) {
        row_members_.emplace_back();
        reduced.push_back(pattern);
      }
      row_members_[it->second].push_back(i);
    }
    // Sort row classes by degree, largest first.
    std::vector<std::size_t> degree(row_members_.size(), 0);
    for (std::size_t r = 0; r < row_members_.size(); ++r)
      for (std::size_t c = 0; c < cc; ++c) degree[r] += reduced[r][c] * col_members_[c].size();
    std::vector<std::size_t> perm(row_members_.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) { return degree[x] > degree[y]; });
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t r : perm) {
      members.push_back(row_members_[r]);
      adj_.push_back(reduced[r]);
      row_degree_.push_back(degree[r]);
    }
    row_members_ = std::move(members);
    col_mult_.resize(cc);
    for (std::size_t c = 0; c < cc; ++c) col_mult_[c] = col_members_[c].size();

    const std::size_t rc = row_members_.size();
    suffix_.assign(rc + 1, std::vector<std::size_t>(cc, 0));
    row_start_.assign(rc + 1, 0);
    for (std::size_t r = rc; r-- > 0;)
      for (std::size_t c = 0; c < cc; ++c)
        suffix_[r][c] = suffix_[r + 1][c] + adj_[r][c] * row_members_[r].size();
    // Prefix sums of min(t, degree) over rows expanded in class order.
    capped_prefix_.push_back(0);
    for (std::size_t r = 0; r < rc; ++r) {
      row_start_[r] = capped_prefix_.size() - 1;
      for (std::size_t k = 0; k < row_members_[r].size(); ++k)
        capped_prefix_.push_back(capped_prefix_.back() + std::min(t_, row_degree_[r]));
    }
    row_start_[rc] = capped_prefix_.size() - 1;
    count_.assign(cc, 0);
    take_.assign(rc, 0);
    hist_.assign(s_ + 1, 0);
  }

  Result run() {
    Result res;
    if (target_ <= 0) {
      // Any choice works; take the first rows and columns.
      extend_leaf_choice(res);
      return res;
    }
    if (s_ == 0 || t_ == 0) return res;
    const bool hit = search(0, s_, res);
    res.nodes = nodes_;
    res.complete = !aborted_;
    res.found = hit;
    return res;
  }

 private:
  long long top_t(const std::vector<std::size_t>& values) {
    std::fill(hist_.begin(), hist_.end(), 0);
    for (std::size_t c = 0; c < values.size(); ++c) hist_[std::min(values[c], s_)] += col_mult_[c];
    long long total = 0;
    std::size_t left = t_;
    for (std::size_t v = s_ + 1; v-- > 0 && left > 0;) {
      const std::size_t k = std::min(left, hist_[v]);
      total += static_cast<long long>(k * v);
      left -= k;
    }
    return total;
  }

  bool search(std::size_t r, std::size_t need, Result& res) {
    if (++nodes_ > budget_) {
      aborted_ = true;
      return false;
    }
    if (need == 0) {
      if (top_t(count_) >= target_) {
        record(res);
        return true;
      }
      return false;
    }
    if (r == row_members_.size()) return false;
    const std::size_t pos = row_start_[r];
    if (row_start_.back() - pos < need) return false;
    // Bound 1: every column gains at most min(need, remaining neighbours).
    std::vector<std::size_t>& opt = scratch_;
    opt.resize(count_.size());
    for (std::size_t c = 0; c < count_.size(); ++c) opt[c] = count_[c] + std::min(need, suffix_[r][c]);
    const long long ub1 = top_t(opt);
    if (ub1 < target_) return false;
    // Bound 2: current best plus the largest capped degrees still available.
    const long long ub2 =
        top_t(count_) + static_cast<long long>(capped_prefix_[pos + need] - capped_prefix_[pos]);
    if (ub2 < target_) return false;
    const std::size_t mult = row_members_[r].size();
    for (std::size_t k = std::min(need, mult) + 1; k-- > 0;) {
      if (k > 0)
        for (std::size_t c = 0; c < count_.size(); ++c) count_[c] += k * adj_[r][c];
      take_[r] = k;
      const bool hit = search(r + 1, need - k, res);
      if (k > 0)
        for (std::size_t c = 0; c < count_.size(); ++c) count_[c] -= k * adj_[r][c];
      take_[r] = 0;
      if (hit) return true;
      if (aborted_) return false;
    }
    return false;
  }

  void record(Result& res) {
    res.rows.clear();
    for (std::size_t r = 0; r < row_members_.size(); ++r)
      for (std::size_t k = 0; k < take_[r]; ++k) res.rows.push_back(row_members_[r][k]);
    std::vector<std::size_t> order(count_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return count_[x] > count_[y]; });
    res.cols.clear();
    for (std::size_t c : order)
      for (std::size_t j : col_members_[c])
        if (res.cols.size() < t_) res.cols.push_back(j);
    std::sort(res.rows.begin(), res.rows.end());
    std::sort(res.cols.begin(), res.cols.end());
  }

  void extend_leaf_choice(Result& res) {
    res.found = true;
    for (const auto& m : row_members_)
      for (std::size_t i : m)
        if (res.rows.size() < s_) res.rows.push_back(i);
    for (const auto& m : col_members_)
      for (std::size_t j : m)
        if (res.cols.size() < t_) res.cols.push_back(j);
    std::sort(res.rows.begin(), res.rows.end());
    std::sort(res.cols.begin(), res.cols.end());
  }

  std::size_t s_, t_;
  long long target_;
  std::uint64_t budget_;
  std::uint64_t nodes_ = 0;
  bool aborted_ = false;
  std::vector<std::vector<std::size_t>> row_members_;
  std::vector<std::vector<std::size_t>> col_members_;
  std::vector<std::vector<std::uint8_t>> adj_;
  std::vector<std::size_t> row_degree_;
  std::vector<std::size_t> col_mult_;
  std::vector<std::vector<std::size_t>> suffix_;
  std::vector<std::size_t> row_start_;
  std::vector<std::size_t> capped_prefix_;
  std::vector<std::size_t> count_;
  std::vector<std::size_t> take_;
  std::vector<std::size_t> hist_;
  std::vector<std::size_t> scratch_;
};

inline long double binomial_estimate(std::size_t n, std::size_t k) {
  long double r = 1;
  for (std::size_t i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

// num / den >= eps, where eps stands for the nearest simple fraction: a
// relative slack of 1e-12 keeps gaps such as exactly 1/3 at eps = 1.0/3 on
// the witness side.
inline bool gap_reaches(long long num, long long den, double eps) {
  return static_cast<long double>(num) >= static_cast<long double>(eps) * den * (1 - 1e-12L);
}

// The pair (A, B) viewed as a 0/1 matrix with thresholds for both kinds of
// witness. Integer arithmetic throughout: with E = e(A,B) and sizes a, b,
// s, t, a block with e ones deviates by (e ab - E st) / (st ab).
struct PairProblem {
  const std::vector<Element>& a;
  const std::vector<Element>& b;
  Matrix01 m;
  long long edges = 0;
  std::size_t s = 0, t = 0;
  double eps;

  PairProblem(const Poset& p, const std::vector<Element>& a_, const std::vector<Element>& b_, double eps_)
      : a(a_), b(b_), eps(eps_) {
    m.assign(a.size(), std::vector<std::uint8_t>(b.size(), 0));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j)
        if (p.precedes(a[i], b[j])) {
          m[i][j] = 1;
          ++edges;
        }
    s = min_subset_size(eps, a.size());
    t = min_subset_size(eps, b.size());
  }

  long long ab() const { return static_cast<long long>(a.size() * b.size()); }
  long long st() const { return static_cast<long long>(s * t); }

  bool deviates_up(long long e) const { return gap_reaches(e * ab() - st() * edges, st() * ab(), eps); }
  bool deviates_down(long long e) const { return gap_reaches(st() * edges - e * ab(), st() * ab(), eps); }

  /// Smallest block count deviating upwards, or nullopt.
  std::optional<long long> up_target() const {
    long long e = static_cast<long long>(std::ceil(
        (static_cast<long double>(st()) * edges + static_cast<long double>(eps) * st() * ab()) / ab()));
    e = std::clamp<long long>(e, 0, st() + 1);
    while (e > 0 && deviates_up(e - 1)) --e;
    while (e <= st() && !deviates_up(e)) ++e;
    if (e > st()) return std::nullopt;
    return e;
  }

  /// Largest block count deviating downwards, or nullopt.
  std::optional<long long> down_target() const {
    long long e = static_cast<long long>(std::floor(
        (static_cast<long double>(st()) * edges - static_cast<long double>(eps) * st() * ab()) / ab()));
    e = std::clamp<long long>(e, -1, st());
    while (e < st() && deviates_down(e + 1)) ++e;
    while (e >= 0 && !deviates_down(e)) --e;
    if (e < 0) return std::nullopt;
    return e;
  }

  double density() const { return static_cast<double>(edges) / static_cast<double>(ab()); }

  long long block_edges(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) const {
    long long e = 0;
    for (auto i : rows)
      for (auto j : cols) e += m[i][j];
    return e;
  }

  Witness make_witness(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) const {
    Witness w;
    for (auto i : rows) w.x.push_back(a[i]);
    for (auto j : cols) w.y.push_back(b[j]);
    std::sort(w.x.begin(), w.x.end());
    std::sort(w.y.begin(), w.y.end());
    const double dxy = static_cast<double>(block_edges(rows, cols)) /
                       (static_cast<double>(rows.size()) * static_cast<double>(cols.size()));
    w.gap = std::abs(dxy - density());
    w.above = dxy > density();
    return w;
  }

  Matrix01 complement() const {
    Matrix01 c = m;
    for (auto& row : c)
      for (auto& v : row) v = 1 - v;
    return c;
  }
};

struct ExactOutcome {
  std::optional<Witness> witness;
  bool complete = true;
  std::uint64_t nodes = 0;
};

inline Matrix01 transpose(const Matrix01& m) {
  if (m.empty()) return {};
  Matrix01 out(m[0].size(), std::vector<std::uint8_t>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out[j][i] = m[i][j];
  return out;
}

// Exact search for a witness: first one with density above d(A,B) + eps,
// then one below d(A,B) - eps. Only blocks of the minimum admissible size
// are examined, which suffices because shrinking a block to its best rows
// and columns moves its density away from d(A,B).
inline ExactOutcome exact_witness(const PairProblem& pb, std::uint64_t budget) {
  ExactOutcome out;
  // Branch on whichever side has fewer subsets of the required size.
  const bool flip = binomial_estimate(pb.b.size(), pb.t) < binomial_estimate(pb.a.size(), pb.s);
  auto attempt = [&](const Matrix01& mat, long long target) -> bool {
    const Matrix01 oriented = flip ? transpose(mat) : mat;
    DenseBlockSearch search(oriented, flip ? pb.t : pb.s, flip ? pb.s : pb.t, target, budget);
    auto res = search.run();
    out.nodes += res.nodes;
    if (!res.complete) out.complete = false;
    if (res.found) {
      out.witness = flip ? pb.make_witness(res.cols, res.rows) : pb.make_witness(res.rows, res.cols);
      return true;
    }
    return false;
  };
  if (auto up = pb.up_target(); up && attempt(pb.m, *up)) return out;
  if (auto down = pb.down_target(); down && attempt(pb.complement(), pb.st() - *down)) return out;
  return out;
}

// Alternating local search from random and degree-greedy starts. Sound:
// anything returned is a genuine witness.
inline std::optional<Witness> sampled_witness(const PairProblem& pb, std::uint64_t trials, std::uint64_t seed) {
  const std::size_t na = pb.a.size(), nb = pb.b.size();
  auto best_cols = [&](const std::vector<std::size_t>& rows, bool up) {
    std::vector<std::pair<long long, std::size_t>> score(nb);
    for (std::size_t j = 0; j < nb; ++j) {
      long long c = 0;
      for (auto i : rows) c += pb.m[i][j];
      score[j] = {up ? -c : c, j};
    }
    std::sort(score.begin(), score.end());
    std::vector<std::size_t> cols;
    for (std::size_t k = 0; k < pb.t; ++k) cols.push_back(score[k].second);
    return cols;
  };
  auto best_rows = [&](const std::vector<std::size_t>& cols, bool up) {
    std::vector<std::pair<long long, std::size_t>> score(na);
    for (std::size_t i = 0; i < na; ++i) {
      long long c = 0;
      for (auto j : cols) c += pb.m[i][j];
      score[i] = {up ? -c : c, i};
    }
    std::sort(score.begin(), score.end());
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < pb.s; ++k) rows.push_back(score[k].second);
    return rows;
  };
  for (int dir = 0; dir < 2; ++dir) {
    const bool up = dir == 0;
    if (up ? !pb.up_target() : !pb.down_target()) continue;
    for (std::uint64_t trial = 0; trial <= trials; ++trial) {
      std::vector<std::size_t> rows(na);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      if (trial == 0) {
        // Degree-greedy start.
        std::vector<long long> deg(na, 0);
        for (std::size_t i = 0; i < na; ++i)
          for (std::size_t j = 0; j < nb; ++j) deg[i] += pb.m[i][j];
        std::stable_sort(rows.begin(), rows.end(),
                         [&](std::size_t x, std::size_t y) { return up ? deg[x] > deg[y] : deg[x] < deg[y]; });
      } else {
        CounterRng rng(seed, trial * 2 + static_cast<std::uint64_t>(dir));
        std::shuffle(rows.begin(), rows.end(), rng);
      }
      rows.resize(pb.s);
      long long last = up ? -1 : std::numeric_limits<long long>::max();
      for (int iter = 0; iter < 64; ++iter) {
        auto cols = best_cols(rows, up);
        rows = best_rows(cols, up);
        const long long e = pb.block_edges(rows, cols);
        if (up ? pb.deviates_up(e) : pb.deviates_down(e)) return pb.make_witness(rows, cols);
        if (up ? e <= last : e >= last) break;
        last = e;
      }
    }
  }
  return std::nullopt;
}

// Spectral certificate. With D = M - d J, every block satisfies
// |e(X,Y) - d|X||Y|| <= sigma_1(D) sqrt(|X||Y|), so the deviation of any
// admissible block is at most sigma_1(D) / sqrt(st). A small margin absorbs
// eigensolver rounding.
inline bool spectral_certificate(const PairProblem& pb) {
  const std::size_t na = pb.a.size(), nb = pb.b.size();
  const double d = pb.density();
  Eigen::MatrixXd dm(na, nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) dm(i, j) = pb.m[i][j] - d;
  const Eigen::MatrixXd gram = na <= nb ? Eigen::MatrixXd(dm * dm.transpose()) : Eigen::MatrixXd(dm.transpose() * dm);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  const double sigma = std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
  const double slack = 1e-9 * (1.0 + sigma) + 1e-6 * sigma;
  return sigma + slack < pb.eps * std::sqrt(static_cast<double>(pb.st()));
}

inline std::uint64_t pair_seed(std::uint64_t seed, const std::vector<Element>& a, const std::vector<Element>& b) {
  std::uint64_t h = splitmix64(seed);
  for (Element x : a) h = splitmix64(h ^ x);
  h = splitmix64(h ^ 0xabcdefULL);
  for (Element y : b) h = splitmix64(h ^ y);
  return h;
}

}  // namespace detail

/// Decides whether (A, B) is eps-regular: |d(X,Y) - d(A,B)| < eps for all
/// X in A, Y in B with |X| >= eps|A| and |Y| >= eps|B|.
///
/// Exhaustive mode is exact and throws TooLarge if the search exceeds its
/// node budget. Sampled mode never returns a false witness, but a Regular
/// answer is only certified when its exact search finished in budget.
inline PairVerdict check_regular_pair(const Poset& p, const std::vector<Element>& a,
                                      const std::vector<Element>& b, double eps,
                                      const Strategy& strategy = Strategy::exhaustive()) {
  if (!(eps > 0)) fail(ErrorCode::InvalidArgument, "eps must be positive");
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidArgument, "pair sets must be nonempty");
  if (detail::mask_of(p.size(), a).intersects(detail::mask_of(p.size(), b)))
    fail(ErrorCode::NotDisjoint, "pair sets overlap");
  detail::PairProblem pb(p, a, b, eps);
  PairVerdict verdict;
  if (pb.edges == 0 || pb.edges == pb.ab()) return verdict;  // every sub-density equals d
  if (!pb.up_target() && !pb.down_target()) return verdict;
  if (pb.a.size() * pb.b.size() >= 64 && detail::spectral_certificate(pb)) return verdict;
  auto exact = detail::exact_witness(pb, strategy.node_budget);
  verdict.nodes = exact.nodes;
  if (exact.witness) {
    verdict.regular = false;
    verdict.witness = std::move(exact.witness);
    return verdict;
  }
  if (exact.complete) return verdict;
  if (strategy.kind == Strategy::Kind::Exhaustive)
    fail(ErrorCode::TooLarge, "exact regularity search for a " + std::to_string(a.size()) + "x" +
                                  std::to_string(b.size()) + " pair exceeded " +
                                  std::to_string(strategy.node_budget) + " nodes");
  if (auto w = detail::sampled_witness(pb, strategy.trials, detail::pair_seed(strategy.seed, a, b))) {
    verdict.regular = false;
    verdict.witness = std::move(w);
    return verdict;
  }
  verdict.certified = false;
  return verdict;
}

// ---------------------------------------------------------------------------
// Subdividing an irregular pair

struct Subdivision {
  std::vector<Element> z1, z2, z3, z4;
  /// The witness pair inside the subdivision: (z1, z4) when the density
  /// deviated upwards, (z2, z3) when it deviated downwards.
  bool above = true;
};

namespace detail {

// Repeatedly swaps a member x of `chosen` for a non-member y of `pool` with
// y < x (when `downwards`) or x < y (otherwise), lowest (x, y) first, until
// no swap applies. The result is down-closed (resp. up-closed) in `pool`.
inline std::vector<Element> push_closed(const Poset& p, const std::vector<Element>& pool,
                                        std::vector<Element> chosen, bool downwards) {
  std::vector<Element> sorted_pool = pool;
  std::sort(sorted_pool.begin(), sorted_pool.end());
  Bits in(p.size());
  for (Element x : chosen) in.set(x);
  for (;;) {
    bool swapped = false;
    for (Element x : sorted_pool) {
      if (!in.test(x)) continue;
      for (Element y : sorted_pool) {
        if (in.test(y)) continue;
        if (downwards ? p.precedes(y, x) : p.precedes(x, y)) {
          in.reset(x);
          in.set(y);
          swapped = true;
          break;
        }
      }
      if (swapped) break;
    }
    if (!swapped) break;
  }
  std::vector<Element> out;
  for (Element x : sorted_pool)
    if (in.test(x)) out.push_back(x);
  return out;
}

inline std::vector<Element> set_minus(const std::vector<Element>& whole, const std::vector<Element>& part) {
  std::vector<Element> a = whole, b = part, out;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline bool no_relation_from(const Poset& p, const std::vector<Element>& from, const std::vector<Element>& to) {
  for (Element x : from)
    for (Element y : to)
      if (p.precedes(x, y)) return false;
  return true;
}

inline bool is_subset(const std::vector<Element>& sub, const std::vector<Element>& whole) {
  std::vector<Element> a = sub, b = whole;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return std::adjacent_find(a.begin(), a.end()) == a.end() && std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace detail

/// Splits A = Z1 + Z2 and B = Z3 + Z4 along a witness of irregularity so that
/// Z2 has no relation into Z1, Z4 none into Z3, and the index of the 2x2
/// split exceeds q(A,B) by at least eps^4 |A||B| / n^2.
inline Subdivision subdivide(const Poset& p, const std::vector<Element>& a, const std::vector<Element>& b,
                             const Witness& w, double eps) {
  if (!detail::no_relation_from(p, b, a)) fail(ErrorCode::ForwardViolation, "B has a relation into A");
  if (!detail::is_subset(w.x, a) || !detail::is_subset(w.y, b))
    fail(ErrorCode::InvalidWitness, "witness sets are not subsets of the pair");
  if (w.x.empty() || w.y.empty() || static_cast<double>(w.x.size()) < eps * static_cast<double>(a.size()) - 1e-9 ||
      static_cast<double>(w.y.size()) < eps * static_cast<double>(b.size()) - 1e-9)
    fail(ErrorCode::InvalidWitness, "witness sets are below the size threshold");
  const auto whole = pair_stats(p, a, b);
  const auto sub = pair_stats(p, w.x, w.y);
  const auto ab = static_cast<long long>(a.size() * b.size());
  const auto xy = static_cast<long long>(w.x.size() * w.y.size());
  const long long num = static_cast<long long>(sub.e) * ab - static_cast<long long>(whole.e) * xy;
  if (!detail::gap_reaches(num < 0 ? -num : num, xy * ab, eps))
    fail(ErrorCode::InvalidWitness, "witness density gap is below eps");
  Subdivision out;
  out.above = num > 0;
  if (out.above) {
    // Down-close X in A and up-close Y in B; both moves keep d(X,Y) from dropping.
    out.z1 = detail::push_closed(p, a, w.x, true);
    out.z2 = detail::set_minus(a, out.z1);
    out.z4 = detail::push_closed(p, b, w.y, false);
    out.z3 = detail::set_minus(b, out.z4);
  } else {
    // Mirror image: up-close X and down-close Y, which keeps d(X,Y) from rising.
    out.z2 = detail::push_closed(p, a, w.x, false);
    out.z1 = detail::set_minus(a, out.z2);
    out.z3 = detail::push_closed(p, b, w.y, true);
    out.z4 = detail::set_minus(b, out.z3);
  }
  if (!detail::no_relation_from(p, out.z2, out.z1) || !detail::no_relation_from(p, out.z4, out.z3))
    throw std::logic_error("subdivide: swap loop ended without a closed set");
  return out;
}

// ---------------------------------------------------------------------------
// Regular partitions

struct IrregularPair {
  std::size_t i, j;
  Witness witness;
};

struct PairScan {
  std::vector<IrregularPair> irregular;
  /// Pairs (i, j) whose regularity is not certified (sampled mode).
  std::vector<std::pair<std::size_t, std::size_t>> uncertified;
  std::uint64_t nodes = 0;
};

namespace detail {

// Remembers verdicts for part pairs that survive unchanged between rounds.
class VerdictCache {
 public:
  const PairVerdict& get(const Poset& p, const std::vector<Element>& a, const std::vector<Element>& b,
                         double eps, const Strategy& strategy) {
    auto key = std::make_pair(a, b);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(std::move(key), check_regular_pair(p, a, b, eps, strategy)).first;
    return it->second;
  }

 private:
  std::map<std::pair<std::vector<Element>, std::vector<Element>>, PairVerdict> cache_;
};

inline PairScan scan_pairs(const Poset& p, const Parts& parts, double eps, const Strategy& strategy,
                           VerdictCache* cache) {
  PairScan scan;
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (std::size_t j = i + 1; j < parts.size(); ++j) {
      if (parts[i].empty() || parts[j].empty()) continue;
      PairVerdict local;
      const PairVerdict& v = cache ? cache->get(p, parts[i], parts[j], eps, strategy)
                                   : (local = check_regular_pair(p, parts[i], parts[j], eps, strategy));
      scan.nodes += v.nodes;
      if (!v.regular) {
        scan.irregular.push_back({i, j, *v.witness});
      } else if (!v.certified) {
        scan.uncertified.emplace_back(i, j);
      }
    }
  return scan;
}

}  // namespace detail

/// Pairs (i, j), i < j, that are not eps-regular. Pairs with an empty side
/// are regular.
inline PairScan irregular_pairs(const Poset& p, const PosetPartition& partition, double eps,
                                const Strategy& strategy = Strategy::exhaustive()) {
  return detail::scan_pairs(p, partition.parts(), eps, strategy, nullptr);
}

struct RegularityReport {
  bool regular = false;
  /// True unless the verdict depends on uncertified (sampled) pairs.
  bool certified = true;
  std::size_t size_cap = 0;                  // max(eps n, 1), rounded down
  std::vector<std::size_t> oversized_parts;  // parts above size_cap
  std::size_t irregular_weight = 0;          // sum of |V_i||V_j| over irregular pairs
  std::size_t uncertified_weight = 0;
  double weight_bound = 0;                   // eps * C(n, 2)
  PairScan scan;
};

namespace detail {

inline std::size_t size_cap(double eps, std::size_t n) {
  const double cap = std::max(eps * static_cast<double>(n), 1.0);
  return static_cast<std::size_t>(std::floor(cap + 1e-9));
}

inline RegularityReport assess(const Poset& p, const Parts& parts, double eps, PairScan scan) {
  const std::size_t n = p.size();
  RegularityReport r;
  r.size_cap = size_cap(eps, n);
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (parts[i].size() > r.size_cap) r.oversized_parts.push_back(i);
  for (const auto& ip : scan.irregular) r.irregular_weight += parts[ip.i].size() * parts[ip.j].size();
  for (auto [i, j] : scan.uncertified) r.uncertified_weight += parts[i].size() * parts[j].size();
  r.weight_bound = eps * static_cast<double>(n) * static_cast<double>(n > 0 ? n - 1 : 0) / 2.0;
  const bool sizes_ok = r.oversized_parts.empty();
  const bool surely = static_cast<double>(r.irregular_weight + r.uncertified_weight) <= r.weight_bound;
  const bool maybe = static_cast<double>(r.irregular_weight) <= r.weight_bound;
  r.regular = sizes_ok && maybe;
  r.certified = !sizes_ok || !maybe || surely;
  r.scan = std::move(scan);
  return r;
}

}  // namespace detail

/// Checks both conditions of an eps-regular partition: every part has at
/// most max(eps n, 1) elements, and irregular pairs cover at most
/// eps C(n,2) element pairs.
inline RegularityReport is_regular_partition(const Poset& p, const PosetPartition& partition, double eps,
                                             const Strategy& strategy = Strategy::exhaustive()) {
  return detail::assess(p, partition.parts(), eps, irregular_pairs(p, partition, eps, strategy));
}

// ---------------------------------------------------------------------------
// The refinement loop

/// Constants of the regularity bound for a given eps.
struct Schedule {
  double eps = 0;
  std::uint64_t s = 0;   // iteration bound ceil(2 / eps^5)
  std::uint64_t k0 = 0;  // initial part bound ceil(2 / eps)
  /// k_0, k_1 = k_0 2^(k_0 - 1), ...; saturates at UINT64_MAX and stops there.
  std::vector<std::uint64_t> k;
  std::uint64_t part_bound = 0;  // k_s, saturated

  explicit Schedule(double eps_) : eps(eps_) {
    if (!(eps > 0)) fail(ErrorCode::InvalidArgument, "eps must be positive");
    s = static_cast<std::uint64_t>(std::ceil(2.0 / std::pow(eps, 5) - 1e-9));
    k0 = static_cast<std::uint64_t>(std::ceil(2.0 / eps - 1e-9));
    s = std::max<std::uint64_t>(s, 1);
    k0 = std::max<std::uint64_t>(k0, 1);
    constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
    k.push_back(k0);
    for (std::uint64_t step = 0; step < s && k.back() != kMax; ++step) {
      const std::uint64_t cur = k.back();
      if (cur - 1 >= 63 || (cur << (cur - 1)) >> (cur - 1) != cur)
        k.push_back(kMax);
      else
        k.push_back(cur << (cur - 1));
    }
    part_bound = k.size() == s + 1 ? k.back() : kMax;
  }
};

/// Refines each part into consecutive blocks of a linear extension, at most
/// max(floor(eps n), 1) elements per block and as few blocks as that allows.
inline PosetPartition initial_refinement(const Poset& p, const PosetPartition& partition, double eps) {
  if (!(eps > 0)) fail(ErrorCode::InvalidArgument, "eps must be positive");
  const std::size_t n = p.size();
  const std::size_t cap = std::max<std::size_t>(detail::size_cap(eps, n), 1);
  const auto order = linear_extension(p, partition.parts());
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[order[i]] = i;
  Parts out;
  for (const auto& part : partition.parts()) {
    if (part.size() <= cap) {
      out.push_back(part);
      continue;
    }
    std::vector<Element> sorted = part;
    std::sort(sorted.begin(), sorted.end(), [&](Element x, Element y) { return pos[x] < pos[y]; });
    const std::size_t blocks = (sorted.size() + cap - 1) / cap;
    const std::size_t base = sorted.size() / blocks, extra = sorted.size() % blocks;
    std::size_t at = 0;
    for (std::size_t k = 0; k < blocks; ++k) {
      const std::size_t len = base + (k < extra ? 1 : 0);
      out.emplace_back(sorted.begin() + at, sorted.begin() + at + len);
      at += len;
    }
  }
  return PosetPartition(p, std::move(out));
}

struct TraceRow {
  std::size_t iteration = 0;
  double q = 0;
  std::size_t irregular_pairs = 0;
  std::size_t parts = 0;
  std::size_t irregular_weight = 0;
  std::size_t uncertified_pairs = 0;
};

struct RegularizeResult {
  PosetPartition partition;
  std::vector<TraceRow> trace;
  Schedule schedule;
  /// Input had at most 1/eps parts, as the regularity bound assumes.
  bool hypothesis_holds = true;
  /// The initial refinement fit in k0 parts.
  bool initial_within_k0 = true;
  /// Took the n <= 1/eps shortcut to singletons.
  bool singleton_branch = false;
  bool certified = true;
  Strategy::Kind strategy = Strategy::Kind::Exhaustive;
};

struct RegularizeOptions {
  /// Abort with BudgetExceeded if a round produces more parts than this.
  std::size_t part_cap = 100'000;
  /// Treat uncertified Regular verdicts of the sampled strategy as
  /// inconclusive instead of accepting them.
  bool require_certified = false;
};

/// Refines `partition` to an eps-regular poset partition: start from the
/// initial refinement, then repeatedly split every irregular pair along its
/// witness until the partition is eps-regular.
inline RegularizeResult regularize(const Poset& p, const PosetPartition& partition, double eps,
                                   const Strategy& strategy = Strategy::exhaustive(),
                                   const RegularizeOptions& options = {}) {
  RegularizeResult result{partition, {}, Schedule(eps)};
  result.strategy = strategy.kind;
  const std::size_t n = p.size();
  result.hypothesis_holds = static_cast<double>(partition.nonempty_parts()) <= 1.0 / eps + 1e-9;
  if (static_cast<double>(n) * eps <= 1.0 + 1e-9) {
    result.singleton_branch = true;
    result.partition = PosetPartition::singletons(p, partition);
    result.trace.push_back({0, index(p, result.partition), 0, result.partition.size(), 0, 0});
    return result;
  }
  PosetPartition current = initial_refinement(p, partition, eps);
  result.initial_within_k0 = current.nonempty_parts() <= result.schedule.k0;
  detail::VerdictCache cache;
  for (std::size_t round = 0;; ++round) {
    auto report = detail::assess(p, current.parts(), eps,
                                 detail::scan_pairs(p, current.parts(), eps, strategy, &cache));
    result.trace.push_back({round, index(p, current), report.scan.irregular.size(), current.nonempty_parts(),
                            report.irregular_weight, report.scan.uncertified.size()});
    if (report.regular) {
      if (!report.certified && options.require_certified)
        fail(ErrorCode::StrategyInconclusive,
             "sampled search found no witnesses but cannot certify " +
                 std::to_string(report.scan.uncertified.size()) + " pairs");
      result.partition = current.without_empty_parts();
      result.certified = report.certified;
      return result;
    }
    if (report.scan.irregular.empty())
      fail(ErrorCode::StrategyInconclusive, "partition is not regular but no witness was found");
    if (round >= result.schedule.s)
      throw std::logic_error("regularize: iteration bound exceeded");
    // Split every part of the working partition along each irregular pair
    // in turn; parts outside the pair are left alone.
    Parts working = current.parts();
    const Parts& frozen = current.parts();
    for (const auto& ip : report.scan.irregular) {
      const auto sub = subdivide(p, frozen[ip.i], frozen[ip.j], ip.witness, eps);
      Bits in_i = detail::mask_of(n, frozen[ip.i]);
      Bits in_j = detail::mask_of(n, frozen[ip.j]);
      Bits z1 = detail::mask_of(n, sub.z1), z3 = detail::mask_of(n, sub.z3);
      Parts next;
      next.reserve(working.size() + 2);
      for (auto& x : working) {
        if (x.empty() || !(in_i.test(x.front()) || in_j.test(x.front()))) {
          next.push_back(std::move(x));
          continue;
        }
        const Bits& first = in_i.test(x.front()) ? z1 : z3;
        std::vector<Element> lo, hi;
        for (Element e : x) (first.test(e) ? lo : hi).push_back(e);
        next.push_back(std::move(lo));
        next.push_back(std::move(hi));
      }
      working = std::move(next);
    }
    Parts pruned;
    for (auto& x : working)
      if (!x.empty()) pruned.push_back(std::move(x));
    if (pruned.size() > options.part_cap)
      fail(ErrorCode::BudgetExceeded, "refinement produced " + std::to_string(pruned.size()) +
                                          " parts, cap is " + std::to_string(options.part_cap));
    current = PosetPartition(p, std::move(pruned));
  }
}

// ---------------------------------------------------------------------------
// Counting relations from a regular partition

struct EdgePrediction {
  std::size_t actual = 0;    // e(S, T)
  double predicted = 0;      // sum over i < j of d(V_i,V_j) |V_i & S| |V_j & T|
  double bound = 0;          // 3 eps C(n, 2)
  bool holds = false;
};

/// Compares the number of relations from S to T with the count predicted
/// from part densities alone.
inline EdgePrediction predicted_edges(const Poset& p, const PosetPartition& partition, double eps,
                                      const std::vector<Element>& s, const std::vector<Element>& t) {
  const std::size_t n = p.size();
  const Bits sm = detail::mask_of(n, s);
  const Bits tm = detail::mask_of(n, t);
  EdgePrediction out;
  for (auto x = sm.find_first(); x != Bits::npos; x = sm.find_next(x)) out.actual += (p.up(x) & tm).count();
  const auto& parts = partition.parts();
  std::vector<std::size_t> in_s(parts.size()), in_t(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (Element x : parts[i]) {
      in_s[i] += sm.test(x);
      in_t[i] += tm.test(x);
    }
  long double predicted = 0;
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (std::size_t j = i + 1; j < parts.size(); ++j) {
      if (parts[i].empty() || parts[j].empty() || in_s[i] == 0 || in_t[j] == 0) continue;
      const auto st = pair_stats(p, parts[i], parts[j]);
      predicted += static_cast<long double>(st.d) * in_s[i] * in_t[j];
    }
  out.predicted = static_cast<double>(predicted);
  out.bound = 3.0 * eps * static_cast<double>(n) * static_cast<double>(n > 0 ? n - 1 : 0) / 2.0;
  out.holds = std::abs(static_cast<double>(out.actual) - out.predicted) <= out.bound;
  return out;
}

}  // namespace posetlim
