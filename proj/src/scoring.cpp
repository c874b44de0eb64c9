#include "scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "error.hpp"
#include "unicode.hpp"

namespace lqm {

namespace {

double weight_value(const nlohmann::json& v, const std::string& name) {
  if (!v.is_number()) fail_validation("weights: '" + name + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d) || d < 0.0) {
    fail_validation("weights: '" + name + "' must be a finite non-negative number");
  }
  return d;
}

}  // namespace

double WeightScheme::weight(Severity s) const {
  switch (s) {
    case Severity::minor: return minor;
    case Severity::major: return major;
    case Severity::critical: return critical;
  }
  return 0.0;
}

WeightScheme WeightScheme::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail_validation("weights: expected a JSON object");
  WeightScheme w;
  for (const auto& [key, value] : j.items()) {
    if (key == "type_weight") {
      w.type_weight = weight_value(value, key);
    } else if (key == "severity_weights") {
      if (!value.is_object()) fail_validation("weights: 'severity_weights' must be an object");
      for (const auto& [sev, v] : value.items()) {
        const auto parsed = parse_severity(sev);
        if (!parsed) fail_validation("weights: unknown severity '" + sev + "'");
        const double d = weight_value(v, sev);
        switch (*parsed) {
          case Severity::minor: w.minor = d; break;
          case Severity::major: w.major = d; break;
          case Severity::critical: w.critical = d; break;
        }
      }
    } else {
      fail_validation("weights: unknown key '" + key + "'");
    }
  }
  return w;
}

nlohmann::ordered_json WeightScheme::to_json() const {
  nlohmann::ordered_json j;
  j["severity_weights"] = {{"minor", minor}, {"major", major}, {"critical", critical}};
  j["type_weight"] = type_weight;
  return j;
}

std::size_t token_length(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (char32_t c : unicode::decode(text)) {
    const bool space = unicode::is_space(c);
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

double error_mass(std::span<const ErrorSpan* const> spans, const WeightScheme& scheme) {
  double mass = 0.0;
  for (const ErrorSpan* s : spans) mass += scheme.weight(s->severity) * scheme.type_weight;
  return mass;
}

double normalized_score(double mass, std::size_t length) {
  if (length == 0) fail_validation("cannot score a segment of length 0");
  return std::max(0.0, 100.0 * (1.0 - mass / static_cast<double>(length)));
}

double segment_score(const Segment& segment, std::span<const ErrorSpan* const> spans,
                     const WeightScheme& scheme) {
  const std::size_t length = token_length(segment.target_text);
  if (length == 0) fail_validation("segment '" + segment.segment_id + "' has no tokens");
  return normalized_score(error_mass(spans, scheme), length);
}

double micro_score(std::span<const SegmentMass> group) {
  if (group.empty()) fail_validation("micro score of an empty group");
  double mass = 0.0;
  std::size_t length = 0;
  for (const auto& g : group) {
    mass += g.mass;
    length += g.length;
  }
  return normalized_score(mass, length);
}

std::vector<std::optional<SpanSelection>> select_spans(const Corpus& corpus,
                                                       std::span<const AnnotationSet> sets,
                                                       const ScoreOptions& options) {
  // Sets arrive sorted by annotator id from the reader; sort defensively so the
  // "first annotator" rule never depends on caller order.
  std::vector<const AnnotationSet*> order;
  for (const auto& s : sets) {
    if (!options.annotator || s.annotator_id == *options.annotator) order.push_back(&s);
  }
  std::sort(order.begin(), order.end(), [](const AnnotationSet* a, const AnnotationSet* b) {
    return a->annotator_id < b->annotator_id;
  });

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.size(); ++i) index[corpus.segments()[i].segment_id] = i;

  std::vector<std::optional<SpanSelection>> out(corpus.size());
  for (const AnnotationSet* set : order) {
    for (const auto& seg : set->segments_covered) {
      const auto it = index.find(seg);
      if (it == index.end()) {
        fail_validation("annotator '" + set->annotator_id + "' covers unknown segment '" + seg +
                        "'");
      }
      if (!out[it->second]) out[it->second] = SpanSelection{set->annotator_id, {}};
    }
    for (const auto& span : set->spans) {
      const auto it = index.find(span.segment_id);
      if (it == index.end()) {
        fail_validation("span '" + span.span_id + "' references unknown segment '" +
                        span.segment_id + "'");
      }
      auto& sel = out[it->second];
      if (!sel) sel = SpanSelection{set->annotator_id, {}};
      if (sel->annotator_id == set->annotator_id) sel->spans.push_back(&span);
    }
  }
  return out;
}

ScoreReport score_report(const Corpus& corpus, std::span<const AnnotationSet> sets,
                         const WeightScheme& scheme, const ScoreOptions& options) {
  ScoreReport report;
  report.scheme = scheme;
  report.options = options;
  if (options.annotator &&
      std::none_of(sets.begin(), sets.end(),
                   [&](const AnnotationSet& s) { return s.annotator_id == *options.annotator; })) {
    fail(ErrorKind::usage, "no annotations from annotator '" + *options.annotator + "'");
  }

  const auto selection = select_spans(corpus, sets, options);
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<std::size_t>> groups;

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& seg = corpus.segments()[i];
    const auto& sel = selection[i];
    if (options.covered_only && !sel) continue;
    SegmentScore s;
    s.segment_id = seg.segment_id;
    s.model_id = seg.model_id;
    s.direction = seg.direction();
    s.length = token_length(seg.target_text);
    if (s.length == 0) fail_validation("segment '" + seg.segment_id + "' has no tokens");
    if (sel) {
      s.annotator_id = sel->annotator_id;
      s.n_spans = sel->spans.size();
      s.mass = error_mass(sel->spans, scheme);
    }
    s.score = normalized_score(s.mass, s.length);
    groups[{s.direction, s.model_id}].push_back(report.segments.size());
    report.segments.push_back(std::move(s));
  }

  for (const auto& [key, members] : groups) {
    GroupScore g;
    g.direction = key.first;
    g.model_id = key.second;
    g.n_segments = members.size();
    double score_sum = 0.0;
    std::vector<SegmentMass> masses;
    masses.reserve(members.size());
    for (std::size_t m : members) {
      const auto& s = report.segments[m];
      score_sum += s.score;
      g.n_spans += s.n_spans;
      g.total_mass += s.mass;
      g.total_length += s.length;
      masses.push_back({s.mass, s.length});
    }
    g.macro_mean = score_sum / static_cast<double>(members.size());
    g.micro_score = micro_score(masses);
    report.groups.push_back(std::move(g));
  }
  return report;
}

nlohmann::ordered_json to_json(const ScoreReport& report) {
  using json = nlohmann::ordered_json;
  json j;
  j["scheme"] = report.scheme.to_json();
  j["annotator"] = report.options.annotator ? json(*report.options.annotator) : json(nullptr);
  j["covered_only"] = report.options.covered_only;
  json segs = json::object();
  for (const auto& s : report.segments) {
    json e;
    e["score"] = s.score;
    e["error_mass"] = s.mass;
    e["length"] = s.length;
    e["n_spans"] = s.n_spans;
    e["model_id"] = s.model_id;
    e["direction"] = s.direction;
    e["annotator_id"] = s.annotator_id ? json(*s.annotator_id) : json(nullptr);
    segs[s.segment_id] = std::move(e);
  }
  j["per_segment"] = std::move(segs);
  json groups = json::array();
  for (const auto& g : report.groups) {
    json e;
    e["direction"] = g.direction;
    e["model_id"] = g.model_id;
    e["n_segments"] = g.n_segments;
    e["n_spans"] = g.n_spans;
    e["total_error_mass"] = g.total_mass;
    e["total_length"] = g.total_length;
    e["macro_mean"] = g.macro_mean;
    e["micro_score"] = g.micro_score;
    groups.push_back(std::move(e));
  }
  j["per_group"] = std::move(groups);
  return j;
}

}  // namespace lqm
