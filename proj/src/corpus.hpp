#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "taxonomy.hpp"

namespace lqm {

enum class Severity { minor, major, critical };

std::string_view to_string(Severity s);
std::optional<Severity> parse_severity(std::string_view text);

/// Dialect names accepted in segment records.
std::span<const std::string_view> known_dialects();

struct Segment {
  std::string segment_id;
  std::string source_lang;
  std::string target_lang;
  std::optional<std::string> dialect;
  std::string model_id;
  std::string source_text;
  std::string target_text;
  std::optional<std::string> reference_text;
  /// Fields beyond the documented set (e.g. pretokenized arrays), kept verbatim.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  /// Target length in Unicode scalar values.
  std::size_t target_scalars = 0;

  std::string direction() const { return source_lang + "->" + target_lang; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct ErrorSpan {
  std::string span_id;
  std::string segment_id;
  std::string annotator_id;
  std::size_t start = 0;  // scalar offset, inclusive
  std::size_t end = 0;    // scalar offset, exclusive
  TaxonomyPath path;
  Severity severity = Severity::minor;
  std::optional<std::string> note;
  std::optional<std::string> span_text;

  std::size_t length() const { return end - start; }
  friend bool operator==(const ErrorSpan&, const ErrorSpan&) = default;
};

/// Everything one annotator produced. A covered segment may have no spans.
struct AnnotationSet {
  std::string annotator_id;
  std::string taxonomy_name;
  std::vector<ErrorSpan> spans;
  std::set<std::string> segments_covered;
  std::map<std::string, std::string> segment_notes;

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Segment> segments);

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  const Segment* find(std::string_view id) const;

 private:
  std::vector<Segment> segments_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parses one segment record (already-decoded JSON); `where` prefixes errors.
Segment parse_segment(const nlohmann::json& record, const std::string& where);
nlohmann::ordered_json segment_to_json(const Segment& s);

Corpus read_segments(std::string_view jsonl, const std::string& source_name = "segments");
std::string write_segments(const Corpus& corpus);

/// Validates one span against its segment and the schema; throws with `where`.
void validate_span(const ErrorSpan& span, const Segment& segment, const TaxonomySchema& schema,
                   const std::string& where);

/// Parses a span record. Records without span fields are coverage markers;
/// those return std::nullopt.
std::optional<ErrorSpan> parse_span_record(const nlohmann::json& record, const std::string& where,
                                           std::string* segment_id, std::string* annotator_id,
                                           std::optional<std::string>* segment_note);
nlohmann::ordered_json span_to_json(const ErrorSpan& s);

/// One AnnotationSet per annotator, sorted by annotator id.
std::vector<AnnotationSet> read_annotations(std::string_view jsonl, const Corpus& corpus,
                                            const TaxonomySchema& schema,
                                            const std::string& source_name = "annotations");
std::string write_annotations(std::span<const AnnotationSet> sets);

std::string read_file(const std::string& path);
/// Writes through a temporary file and renames, so readers never observe a
/// partial file.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace lqm
