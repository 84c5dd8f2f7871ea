#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "posetlim/poset.hpp"

namespace posetlim {

// Text format: first non-comment line holds n; each later line "a b" means
// a precedes b (0-indexed). '#' starts a comment. Cover or full relations are
// both accepted; the reader closes them.

inline Poset read_poset(std::istream& in) {
  std::string line;
  long long n = -1;
  std::vector<std::pair<Element, Element>> pairs;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first)) continue;
    std::istringstream reparse(line);
    if (n < 0) {
      if (!(reparse >> n) || n < 0)
        throw ParseError("line " + std::to_string(lineno) + ": expected element count");
      std::string extra;
      if (reparse >> extra) throw ParseError("line " + std::to_string(lineno) + ": trailing data");
      continue;
    }
    long long a = 0, b = 0;
    if (!(reparse >> a >> b))
      throw ParseError("line " + std::to_string(lineno) + ": expected 'a b'");
    std::string extra;
    if (reparse >> extra) throw ParseError("line " + std::to_string(lineno) + ": trailing data");
    if (a < 0 || b < 0 || a >= n || b >= n)
      fail(ErrorCode::OutOfRange, "line " + std::to_string(lineno) + ": element outside 0.." +
                                      std::to_string(n - 1));
    pairs.emplace_back(static_cast<Element>(a), static_cast<Element>(b));
  }
  if (n < 0) throw ParseError("missing element count");
  return Poset::from_relations(static_cast<std::size_t>(n), pairs);
}

inline Poset read_poset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_poset(in);
}

/// Writes the cover relations only.
inline void write_poset(std::ostream& out, const Poset& p) {
  out << p.size() << '\n';
  for (auto [a, b] : p.covers()) out << a << ' ' << b << '\n';
}

inline void write_poset_file(const std::string& path, const Poset& p) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  write_poset(out, p);
}

}  // namespace posetlim
