#include "corpus.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <fcntl.h>
#include <unistd.h>

#include "error.hpp"
#include "unicode.hpp"

namespace lqm {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 7> kDialects = {
    "Egyptian", "Emirati", "Jordanian", "Mauritanian", "Moroccan", "Palestinian", "Yemeni"};

constexpr std::array<std::string_view, 8> kSegmentFields = {
    "segment_id", "source_lang", "target_lang", "dialect",
    "model_id",   "source_text", "target_text", "reference_text"};

constexpr std::array<std::string_view, 11> kSpanFields = {
    "span_id", "segment_id",  "annotator_id", "start", "end",      "category",
    "error_type", "subcategory", "severity",  "note",  "span_text"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& arr, std::string_view v) {
  for (auto a : arr) {
    if (a == v) return true;
  }
  return false;
}

const json* field(const json& rec, const char* name) {
  const auto it = rec.find(name);
  if (it == rec.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string required_string(const json& rec, const char* name, const std::string& where) {
  const json* f = field(rec, name);
  if (f == nullptr) fail_validation(where + ": missing field '" + name + "'");
  if (!f->is_string()) fail_validation(where + ": field '" + name + "' must be a string");
  return f->get<std::string>();
}

std::optional<std::string> optional_string(const json& rec, const char* name,
                                           const std::string& where) {
  const json* f = field(rec, name);
  if (f == nullptr) return std::nullopt;
  if (!f->is_string()) fail_validation(where + ": field '" + name + "' must be a string");
  return f->get<std::string>();
}

std::size_t required_offset(const json& rec, const char* name, const std::string& where) {
  const json* f = field(rec, name);
  if (f == nullptr) fail_validation(where + ": missing field '" + name + "'");
  if (!f->is_number_integer() || (f->is_number_integer() && f->get<long long>() < 0)) {
    fail_validation(where + ": field '" + name + "' must be a non-negative integer");
  }
  return f->get<std::size_t>();
}

std::string normalized(const std::string& text, const std::string& where, const char* name) {
  try {
    return unicode::nfc(text);
  } catch (const Error& e) {
    fail_validation(where + ": field '" + name + "': " + e.what());
  }
}

template <typename Fn>
void for_each_record(std::string_view jsonl, const std::string& source_name, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t eol = jsonl.find('\n', pos);
    if (eol == std::string_view::npos) eol = jsonl.size();
    std::string_view line = jsonl.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_validation(where + ": malformed JSON record (" + e.what() + ")");
    }
    if (!rec.is_object()) fail_validation(where + ": record must be a JSON object");
    fn(rec, where);
  }
}

}  // namespace

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::minor: return "minor";
    case Severity::major: return "major";
    case Severity::critical: return "critical";
  }
  return "minor";
}

std::optional<Severity> parse_severity(std::string_view text) {
  if (text == "minor") return Severity::minor;
  if (text == "major") return Severity::major;
  if (text == "critical") return Severity::critical;
  return std::nullopt;
}

std::span<const std::string_view> known_dialects() { return kDialects; }

Corpus::Corpus(std::vector<Segment> segments) : segments_(std::move(segments)) {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (!index_.emplace(segments_[i].segment_id, i).second) {
      fail_validation("duplicate segment_id '" + segments_[i].segment_id + "'");
    }
  }
}

const Segment* Corpus::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &segments_[it->second];
}

Segment parse_segment(const json& rec, const std::string& where) {
  Segment s;
  s.segment_id = required_string(rec, "segment_id", where);
  if (s.segment_id.empty()) fail_validation(where + ": empty segment_id");
  s.source_lang = required_string(rec, "source_lang", where);
  s.target_lang = required_string(rec, "target_lang", where);
  s.dialect = optional_string(rec, "dialect", where);
  if (s.dialect && !contains(kDialects, *s.dialect)) {
    fail_validation(where + ": unknown dialect '" + *s.dialect + "'");
  }
  s.model_id = required_string(rec, "model_id", where);
  s.source_text = normalized(required_string(rec, "source_text", where), where, "source_text");
  s.target_text = normalized(required_string(rec, "target_text", where), where, "target_text");
  if (auto ref = optional_string(rec, "reference_text", where)) {
    s.reference_text = normalized(*ref, where, "reference_text");
  }
  const auto scalars = unicode::decode(s.target_text);
  if (unicode::split_whitespace(scalars).empty()) {
    fail_validation(where + ": empty target_text in segment '" + s.segment_id + "'");
  }
  s.target_scalars = scalars.size();
  for (const auto& [key, value] : rec.items()) {
    if (!contains(kSegmentFields, key)) s.extra[key] = value;
  }
  return s;
}

ordered_json segment_to_json(const Segment& s) {
  ordered_json j;
  j["segment_id"] = s.segment_id;
  j["source_lang"] = s.source_lang;
  j["target_lang"] = s.target_lang;
  j["dialect"] = s.dialect ? ordered_json(*s.dialect) : ordered_json(nullptr);
  j["model_id"] = s.model_id;
  j["source_text"] = s.source_text;
  j["target_text"] = s.target_text;
  if (s.reference_text) j["reference_text"] = *s.reference_text;
  for (const auto& [key, value] : s.extra.items()) j[key] = value;
  return j;
}

Corpus read_segments(std::string_view jsonl, const std::string& source_name) {
  std::vector<Segment> segments;
  std::unordered_set<std::string> ids;
  for_each_record(jsonl, source_name, [&](const json& rec, const std::string& where) {
    Segment s = parse_segment(rec, where);
    if (!ids.insert(s.segment_id).second) {
      fail_validation(where + ": duplicate segment_id '" + s.segment_id + "'");
    }
    segments.push_back(std::move(s));
  });
  return Corpus(std::move(segments));
}

std::string write_segments(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.segments()) {
    out += segment_to_json(s).dump();
    out += '\n';
  }
  return out;
}

void validate_span(const ErrorSpan& span, const Segment& segment, const TaxonomySchema& schema,
                   const std::string& where) {
  if (span.start >= span.end || span.end > segment.target_scalars) {
    fail_validation(where + ": span '" + span.span_id + "' [" + std::to_string(span.start) +
                    ", " + std::to_string(span.end) + ") is out of bounds for segment '" +
                    segment.segment_id + "' of length " +
                    std::to_string(segment.target_scalars));
  }
  const PathCheck check = schema.check(span.path);
  if (!check.valid) {
    fail_validation(where + ": span '" + span.span_id + "' has invalid taxonomy path (" +
                    check.error + ")");
  }
  if (span.span_text) {
    const std::string actual = unicode::substr(segment.target_text, span.start, span.end);
    if (actual != *span.span_text) {
      fail_validation(where + ": span '" + span.span_id + "' span_text does not match the " +
                      "target substring at [" + std::to_string(span.start) + ", " +
                      std::to_string(span.end) + ")");
    }
  }
}

std::optional<ErrorSpan> parse_span_record(const json& rec, const std::string& where,
                                           std::string* segment_id, std::string* annotator_id,
                                           std::optional<std::string>* segment_note) {
  for (const auto& [key, value] : rec.items()) {
    if (!contains(kSpanFields, key)) fail_validation(where + ": unknown field '" + key + "'");
  }
  *segment_id = required_string(rec, "segment_id", where);
  *annotator_id = required_string(rec, "annotator_id", where);
  if (annotator_id->empty()) fail_validation(where + ": empty annotator_id");

  bool any_span_field = false;
  for (const char* f : {"span_id", "start", "end", "category", "error_type", "subcategory",
                        "severity", "span_text"}) {
    if (rec.contains(f)) any_span_field = true;
  }
  if (!any_span_field) {
    *segment_note = optional_string(rec, "note", where);
    return std::nullopt;
  }

  ErrorSpan s;
  s.segment_id = *segment_id;
  s.annotator_id = *annotator_id;
  s.span_id = required_string(rec, "span_id", where);
  if (s.span_id.empty()) fail_validation(where + ": empty span_id");
  s.start = required_offset(rec, "start", where);
  s.end = required_offset(rec, "end", where);
  s.path.category = required_string(rec, "category", where);
  s.path.error_type = optional_string(rec, "error_type", where);
  s.path.subcategory = optional_string(rec, "subcategory", where);
  const std::string severity = required_string(rec, "severity", where);
  const auto sev = parse_severity(severity);
  if (!sev) {
    fail_validation(where + ": span '" + s.span_id + "' has unknown severity '" + severity + "'");
  }
  s.severity = *sev;
  if (auto note = optional_string(rec, "note", where)) s.note = normalized(*note, where, "note");
  if (auto text = optional_string(rec, "span_text", where)) {
    s.span_text = normalized(*text, where, "span_text");
  }
  return s;
}

ordered_json span_to_json(const ErrorSpan& s) {
  ordered_json j;
  j["span_id"] = s.span_id;
  j["segment_id"] = s.segment_id;
  j["annotator_id"] = s.annotator_id;
  j["start"] = s.start;
  j["end"] = s.end;
  j["category"] = s.path.category;
  if (s.path.error_type) j["error_type"] = *s.path.error_type;
  if (s.path.subcategory) j["subcategory"] = *s.path.subcategory;
  j["severity"] = std::string(to_string(s.severity));
  if (s.note) j["note"] = *s.note;
  if (s.span_text) j["span_text"] = *s.span_text;
  return j;
}

std::vector<AnnotationSet> read_annotations(std::string_view jsonl, const Corpus& corpus,
                                            const TaxonomySchema& schema,
                                            const std::string& source_name) {
  std::map<std::string, AnnotationSet> sets;
  std::unordered_set<std::string> span_ids;
  std::set<std::pair<std::string, std::string>> coverage_records;

  for_each_record(jsonl, source_name, [&](const json& rec, const std::string& where) {
    std::string segment_id;
    std::string annotator_id;
    std::optional<std::string> segment_note;
    auto span = parse_span_record(rec, where, &segment_id, &annotator_id, &segment_note);
    const Segment* seg = corpus.find(segment_id);
    if (seg == nullptr) fail_validation(where + ": unknown segment_id '" + segment_id + "'");

    auto& set = sets[annotator_id];
    if (set.annotator_id.empty()) {
      set.annotator_id = annotator_id;
      set.taxonomy_name = schema.name();
    }
    set.segments_covered.insert(segment_id);
    if (!span) {
      if (!coverage_records.emplace(annotator_id, segment_id).second) {
        fail_validation(where + ": repeated coverage record for segment '" + segment_id +
                        "' by annotator '" + annotator_id + "'");
      }
      if (segment_note) set.segment_notes[segment_id] = normalized(*segment_note, where, "note");
      return;
    }
    if (!span_ids.insert(span->span_id).second) {
      fail_validation(where + ": duplicate span_id '" + span->span_id + "'");
    }
    validate_span(*span, *seg, schema, where);
    set.spans.push_back(std::move(*span));
  });

  std::vector<AnnotationSet> out;
  out.reserve(sets.size());
  for (auto& [id, set] : sets) out.push_back(std::move(set));
  return out;
}

std::string write_annotations(std::span<const AnnotationSet> sets) {
  std::string out;
  for (const auto& set : sets) {
    std::set<std::string> with_spans;
    for (const auto& s : set.spans) {
      out += span_to_json(s).dump();
      out += '\n';
      with_spans.insert(s.segment_id);
    }
    for (const auto& seg : set.segments_covered) {
      const auto note = set.segment_notes.find(seg);
      if (with_spans.count(seg) && note == set.segment_notes.end()) continue;
      ordered_json j;
      j["segment_id"] = seg;
      j["annotator_id"] = set.annotator_id;
      if (note != set.segment_notes.end()) j["note"] = note->second;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(ErrorKind::io, "error reading '" + path + "'");
  return buf.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) fail(ErrorKind::io, "cannot create '" + tmp + "'");
  std::size_t written = 0;
  while (written < content.size()) {
    const ssize_t n = ::write(fd, content.data() + written, content.size() - written);
    if (n < 0) {
      ::close(fd);
      ::unlink(tmp.c_str());
      fail(ErrorKind::io, "error writing '" + tmp + "'");
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    ::unlink(tmp.c_str());
    fail(ErrorKind::io, "error flushing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    ::unlink(tmp.c_str());
    fail(ErrorKind::io, "cannot rename '" + tmp + "' to '" + path + "'");
  }
}

}  // namespace lqm
