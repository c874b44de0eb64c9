#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lqm::stats {

double mean(std::span<const double> x);

/// Pearson correlation; absent when either variable has zero variance or the
/// inputs have fewer than two points. Throws on length mismatch.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> x);

/// Pearson on average ranks.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// Two-sided p-value of a correlation coefficient via t = r sqrt((n-2)/(1-r^2))
/// with n-2 degrees of freedom. Requires n >= 3.
double correlation_p_value(double r, std::size_t n);

/// Exact two-sided permutation p-value: the share of all n! pairings whose
/// |statistic| reaches the observed one. Limited to n <= 10.
double permutation_p_value(std::span<const double> x, std::span<const double> y, bool rank_based);

/// Nearest-rank percentile: sorted[ceil(p/100 * n) - 1]. Throws when empty.
double nearest_rank_percentile(std::vector<double> values, double p);

}  // namespace lqm::stats
