#pragma once

// Brute-force reference computations for span agreement, shared by the unit
// tests and the acceptance suite. Nothing here calls into the matcher.

#include <algorithm>
#include <cstddef>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "corpus.hpp"

namespace oracle {

struct Interval {
  std::size_t start, end;
};

inline std::size_t overlap(const Interval& a, const Interval& b) {
  std::size_t n = 0;
  for (std::size_t p = a.start; p < a.end; ++p) {
    if (p >= b.start && p < b.end) ++n;
  }
  return n;
}

// Every one-to-one matching over pairs with overlap >= min_overlap is
// enumerated. Pairs are ranked by (overlap desc, a.start, b.start, a.end,
// b.end, i, j); the chosen matching is the one whose membership vector, read
// in rank order, is lexicographically greatest. Returns (i, j) pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> best_matching(
    const std::vector<Interval>& a, const std::vector<Interval>& b, std::size_t min_overlap = 1) {
  struct P {
    std::size_t i, j, ov;
  };
  std::vector<P> ranked;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto ov = overlap(a[i], b[j]);
      if (ov >= min_overlap && ov > 0) ranked.push_back({i, j, ov});
    }
  }
  auto key = [&](const P& p) {
    return std::make_tuple(-static_cast<long long>(p.ov), a[p.i].start, b[p.j].start, a[p.i].end,
                           b[p.j].end, p.i, p.j);
  };
  std::sort(ranked.begin(), ranked.end(), [&](const P& x, const P& y) { return key(x) < key(y); });

  std::vector<bool> best;
  std::vector<bool> current(ranked.size(), false);
  std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);
  // Depth-first enumeration of all matchings.
  auto rec = [&](auto&& self, std::size_t k) -> void {
    if (k == ranked.size()) {
      if (best.empty() || current > best) best = current;
      return;
    }
    const auto& p = ranked[k];
    if (!used_a[p.i] && !used_b[p.j]) {
      used_a[p.i] = used_b[p.j] = true;
      current[k] = true;
      self(self, k + 1);
      current[k] = false;
      used_a[p.i] = used_b[p.j] = false;
    }
    self(self, k + 1);
  };
  rec(rec, 0);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (best[k]) out.emplace_back(ranked[k].i, ranked[k].j);
  }
  return out;
}

// The largest number of disjoint pairs achievable, by exhaustive search.
inline std::size_t maximum_matching_size(const std::vector<Interval>& a,
                                         const std::vector<Interval>& b) {
  std::size_t best = 0;
  std::vector<bool> used(b.size(), false);
  auto rec = [&](auto&& self, std::size_t i, std::size_t count) -> void {
    if (i == a.size()) {
      best = std::max(best, count);
      return;
    }
    self(self, i + 1, count);
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (!used[j] && overlap(a[i], b[j]) > 0) {
        used[j] = true;
        self(self, i + 1, count + 1);
        used[j] = false;
      }
    }
  };
  rec(rec, 0, 0);
  return best;
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

inline double f1(const Counts& c) {
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

// Position sets as std::set, intersected by brute force.
inline Counts char_counts(const std::vector<Interval>& a, const std::vector<Interval>& b) {
  std::set<std::size_t> pa, pb;
  for (const auto& s : a) {
    for (std::size_t p = s.start; p < s.end; ++p) pa.insert(p);
  }
  for (const auto& s : b) {
    for (std::size_t p = s.start; p < s.end; ++p) pb.insert(p);
  }
  Counts c;
  for (auto p : pa) (pb.count(p) ? c.tp : c.fp)++;
  for (auto p : pb) {
    if (!pa.count(p)) ++c.fn;
  }
  return c;
}

inline double kappa_2x2(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  const double po = (a + d) / n;
  const double pe = ((a + b) / n) * ((a + c) / n) + ((c + d) / n) * ((b + d) / n);
  return (po - pe) / (1.0 - pe);
}

inline std::vector<Interval> intervals_of(const std::vector<const lqm::ErrorSpan*>& spans) {
  std::vector<Interval> out;
  for (const auto* s : spans) out.push_back({s->start, s->end});
  return out;
}

}  // namespace oracle
