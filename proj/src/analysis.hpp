#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "json.hpp"
#include "scoring.hpp"

namespace lqm {

bool is_english(std::string_view lang);

/// Restricts the segments (and their spans) an analysis looks at.
struct ScopeFilter {
  /// "SRC->TGT", or the classes "DA->EN" (English target) / "EN->DA" (English
  /// source). Case-insensitive; "→" is accepted for "->".
  std::optional<std::string> direction;
  std::optional<std::string> model;
  std::optional<std::string> dialect;
  std::optional<std::string> annotator;  // span-count analyses only

  bool admits(const Segment& s) const;
  nlohmann::ordered_json to_json() const;
};

enum class DistributionLevel { category, error_type, subcategory };
std::optional<DistributionLevel> parse_distribution_level(std::string_view s);
std::string_view to_string(DistributionLevel level);

struct DistributionRow {
  std::string key;                  // path key or model id
  std::vector<std::string> labels;  // display labels per level; "---" if absent
  std::size_t count = 0;
  double rate = 0.0;                // percent of total count
  double weighted = 0.0;            // severity-weighted mass
  double weighted_rate = 0.0;       // percent of total mass
};

struct DistributionTable {
  std::string grouping;  // category | error_type | subcategory | model
  std::vector<DistributionRow> rows;  // count desc, then key
  std::size_t total = 0;
  double total_weighted = 0.0;
};

DistributionTable error_distribution(const Corpus& corpus, std::span<const AnnotationSet> sets,
                                     const TaxonomySchema& schema, DistributionLevel level,
                                     const ScopeFilter& filter, const WeightScheme& scheme = {});

/// One table per direction (sorted), rows over model ids.
std::vector<std::pair<std::string, DistributionTable>> model_attribution(
    const Corpus& corpus, std::span<const AnnotationSet> sets, const ScopeFilter& filter,
    const WeightScheme& scheme = {});

struct DashboardRow {
  std::string direction;
  std::optional<std::string> dialect;
  DistributionTable models;      // Part I
  DistributionTable categories;  // Part II
};

std::vector<DashboardRow> dashboard(const Corpus& corpus, std::span<const AnnotationSet> sets,
                                    const TaxonomySchema& schema, const ScopeFilter& filter,
                                    const WeightScheme& scheme = {});

struct CorrelationReport {
  std::size_t n = 0;
  std::optional<double> pearson_r;
  std::optional<double> spearman_rho;
  std::optional<double> p_pearson;
  std::optional<double> p_spearman;
  std::string p_method;  // "t" or "permutation"
  std::string reason;    // why a coefficient is absent
};

/// Requires at least 3 pairs.
CorrelationReport correlate(std::span<const double> x, std::span<const double> y,
                            bool exact_permutation = false);

struct AlignedScores {
  std::vector<std::string> segment_ids;
  std::vector<double> automatic;
  std::vector<double> human;
  std::size_t unpaired_human = 0;
  std::size_t unpaired_automatic = 0;
};

/// Pairs per-segment automatic scores with per-segment LQM scores by id, in
/// corpus order, keeping segments the filter admits.
AlignedScores align_scores(const Corpus& corpus, const ScoreReport& lqm,
                           std::span<const std::pair<std::string, double>> automatic,
                           const ScopeFilter& filter);

enum class Bucket { short_, medium, long_ };
inline constexpr std::array<Bucket, 3> kBuckets = {Bucket::short_, Bucket::medium, Bucket::long_};
std::string_view to_string(Bucket b);

struct BucketCell {
  std::string direction;
  std::string model_id;
  Bucket bucket = Bucket::short_;
  std::size_t n_segments = 0;
  std::optional<double> micro;  // absent for an empty cell
};

struct RankStabilityRow {
  std::string direction;
  std::size_t n_models = 0;
  // (short, medium), (medium, long), (short, long)
  std::array<std::optional<double>, 3> rho;
};

struct RankStability {
  std::vector<RankStabilityRow> rows;  // sorted by direction
  std::array<std::optional<double>, 3> mean;
  std::array<std::size_t, 3> n_defined{};
};

inline constexpr std::array<std::pair<Bucket, Bucket>, 3> kBucketPairs = {
    std::pair{Bucket::short_, Bucket::medium}, std::pair{Bucket::medium, Bucket::long_},
    std::pair{Bucket::short_, Bucket::long_}};

RankStability rank_stability(std::span<const BucketCell> cells);

struct BucketReport {
  double q33 = 0.0;
  double q66 = 0.0;
  std::array<std::size_t, 3> sizes{};
  std::vector<BucketCell> cells;  // sorted by (direction, model, bucket)
  RankStability stability;
};

BucketReport length_buckets(const Corpus& corpus, const ScoreReport& lqm, const ScopeFilter& filter);

nlohmann::ordered_json to_json(const DistributionTable& t);
nlohmann::ordered_json to_json(std::span<const DashboardRow> rows);
nlohmann::ordered_json to_json(const CorrelationReport& r);
nlohmann::ordered_json to_json(const BucketReport& r);

}  // namespace lqm
