#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "error.hpp"

namespace lqm::stats {

double mean(std::span<const double> x) {
  if (x.empty()) fail_validation("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail_validation("correlation: samples differ in length");
  if (x.size() < 2) return std::nullopt;
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail_validation("correlation: samples differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) fail_validation("p-value needs at least 3 observations");
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = std::abs(r) * std::sqrt(df / (1.0 - r * r));
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

double permutation_p_value(std::span<const double> x, std::span<const double> y, bool rank_based) {
  if (x.size() != y.size()) fail_validation("correlation: samples differ in length");
  if (x.size() > 10) fail(ErrorKind::usage, "exact permutation test is limited to n <= 10");
  if (x.size() < 3) fail_validation("p-value needs at least 3 observations");
  std::vector<double> xs(x.begin(), x.end());
  std::vector<double> ys(y.begin(), y.end());
  if (rank_based) {
    xs = average_ranks(xs);
    ys = average_ranks(ys);
  }
  const auto observed = pearson(xs, ys);
  if (!observed) fail_validation("correlation undefined for a constant sample");
  // Compare with a small tolerance so permutations that reproduce the observed
  // statistic exactly are not lost to rounding.
  const double threshold = std::abs(*observed) - 1e-12;
  std::vector<std::size_t> perm(ys.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> permuted(ys.size());
  std::size_t total = 0, extreme = 0;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) permuted[i] = ys[perm[i]];
    const auto r = pearson(xs, permuted);
    ++total;
    if (r && std::abs(*r) >= threshold) ++extreme;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) fail_validation("percentile of an empty sample");
  if (p <= 0.0 || p > 100.0) fail(ErrorKind::usage, "percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  // p * n first: for integral p the quotient is exact when it is an integer.
  auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

}  // namespace lqm::stats
