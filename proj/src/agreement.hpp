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

namespace lqm {

struct MatchedPair {
  const ErrorSpan* a = nullptr;
  const ErrorSpan* b = nullptr;
  std::size_t overlap = 0;
};

struct SpanMatching {
  std::vector<MatchedPair> pairs;
  std::vector<const ErrorSpan*> unmatched_a;
  std::vector<const ErrorSpan*> unmatched_b;
};

std::size_t overlap_chars(const ErrorSpan& a, const ErrorSpan& b);

/// Greedy one-to-one matching of spans on one segment. Candidate pairs are
/// taken by overlap descending, then A.start, B.start, A.end, B.end and input
/// position ascending; a pair is accepted when both spans are still free and
/// the overlap is at least `min_overlap`.
SpanMatching match_spans(std::span<const ErrorSpan* const> a, std::span<const ErrorSpan* const> b,
                         std::size_t min_overlap = 1);

enum class MatchMode { overlap, exact };

struct DetectionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  /// 2TP / (2TP + FP + FN); absent when all three are zero.
  std::optional<double> f1() const;
};

/// Character-position TP/FP/FN pooled over segments. Both sets must cover the
/// same segment ids.
DetectionCounts char_counts(const AnnotationSet& a, const AnnotationSet& b, const Corpus& corpus);
DetectionCounts span_counts(MatchMode mode, const AnnotationSet& a, const AnnotationSet& b,
                            std::size_t min_overlap = 1);

std::optional<double> char_f1(const AnnotationSet& a, const AnnotationSet& b, const Corpus& corpus);
std::optional<double> span_f1(MatchMode mode, const AnnotationSet& a, const AnnotationSet& b,
                              std::size_t min_overlap = 1);

enum class LabelCriterion { category, severity, category_severity, fine_type, span_type_severity };

inline constexpr std::array<LabelCriterion, 5> kLabelCriteria = {
    LabelCriterion::category, LabelCriterion::severity, LabelCriterion::category_severity,
    LabelCriterion::fine_type, LabelCriterion::span_type_severity};

std::string_view to_string(LabelCriterion c);
std::string label_of(const ErrorSpan& span, LabelCriterion c);

struct KappaResult {
  std::optional<double> kappa;
  double p_o = 0.0;
  double p_e = 0.0;
  std::string reason;  // set when kappa is absent
};

/// Cohen's kappa over paired labels.
KappaResult cohen_kappa(std::span<const std::pair<std::string, std::string>> labels);

struct LabelAgreement {
  LabelCriterion criterion = LabelCriterion::category;
  std::size_t n_pairs = 0;
  std::size_t n_agree = 0;
  /// n_agree / n_pairs over matched pairs.
  std::optional<double> matched_agreement;
  /// 2 * n_agree / (|A| + |B|): a matched pair only counts when the labels agree.
  std::optional<double> f1;
  KappaResult kappa;
};

LabelAgreement label_agreement(std::span<const MatchedPair> pairs, LabelCriterion c,
                               std::size_t n_spans_a, std::size_t n_spans_b);

struct AgreementReport {
  std::string annotator_a;
  std::string annotator_b;
  std::size_t min_overlap = 1;
  std::size_t n_items = 0;
  std::size_t n_spans_a = 0;
  std::size_t n_spans_b = 0;
  DetectionCounts chars;
  DetectionCounts overlap_spans;
  DetectionCounts exact_spans;
  std::vector<LabelAgreement> labels;
};

/// Restricts both sets to the segments both annotators covered and computes
/// every metric there. Throws when no segment is doubly covered.
AgreementReport agreement_report(const AnnotationSet& a, const AnnotationSet& b,
                                 const Corpus& corpus, const TaxonomySchema& schema,
                                 std::size_t min_overlap = 1);

nlohmann::ordered_json to_json(const AgreementReport& report);

}  // namespace lqm
