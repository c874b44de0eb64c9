#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "json.hpp"

namespace lqm {

struct WeightScheme {
  double minor = 1.0;
  double major = 5.0;
  double critical = 25.0;
  double type_weight = 1.0;

  double weight(Severity s) const;

  /// {"severity_weights": {"minor": .., "major": .., "critical": ..},
  ///  "type_weight": ..}; omitted keys keep their defaults.
  static WeightScheme from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;

  friend bool operator==(const WeightScheme&, const WeightScheme&) = default;
};

/// Number of maximal runs of non-whitespace scalars.
std::size_t token_length(std::string_view text);

/// Sum of weight(severity) * type_weight, accumulated in span order.
double error_mass(std::span<const ErrorSpan* const> spans, const WeightScheme& scheme);

/// max(0, 100 * (1 - mass / length)). Throws when length is 0.
double normalized_score(double mass, std::size_t length);

double segment_score(const Segment& segment, std::span<const ErrorSpan* const> spans,
                     const WeightScheme& scheme);

struct SegmentMass {
  double mass = 0.0;
  std::size_t length = 0;
};

/// max(0, 100 * (1 - sum(mass) / sum(length))) over a non-empty group.
double micro_score(std::span<const SegmentMass> group);

struct SegmentScore {
  std::string segment_id;
  std::string model_id;
  std::string direction;
  std::size_t length = 0;
  std::size_t n_spans = 0;
  double mass = 0.0;
  double score = 0.0;
  std::optional<std::string> annotator_id;  // whose spans were scored
};

struct GroupScore {
  std::string direction;
  std::string model_id;
  std::size_t n_segments = 0;
  std::size_t n_spans = 0;
  double total_mass = 0.0;
  std::size_t total_length = 0;
  double macro_mean = 0.0;
  double micro_score = 0.0;
};

struct ScoreOptions {
  /// Score only this annotator's spans. Otherwise each segment takes the spans
  /// of the lexicographically first annotator that covered it.
  std::optional<std::string> annotator;
  /// Drop segments that no selected annotator covered.
  bool covered_only = false;
};

struct ScoreReport {
  WeightScheme scheme;
  ScoreOptions options;
  std::vector<SegmentScore> segments;  // corpus order
  std::vector<GroupScore> groups;      // sorted by (direction, model_id)
};

/// Selects, per segment, the spans that scoring uses (see ScoreOptions).
struct SpanSelection {
  std::optional<std::string> annotator_id;
  std::vector<const ErrorSpan*> spans;
};
std::vector<std::optional<SpanSelection>> select_spans(const Corpus& corpus,
                                                       std::span<const AnnotationSet> sets,
                                                       const ScoreOptions& options);

ScoreReport score_report(const Corpus& corpus, std::span<const AnnotationSet> sets,
                         const WeightScheme& scheme, const ScoreOptions& options = {});

nlohmann::ordered_json to_json(const ScoreReport& report);

}  // namespace lqm
