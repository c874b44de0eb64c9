#include "agreement.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "error.hpp"

namespace lqm {

namespace {

using SpansBySegment = std::map<std::string, std::vector<const ErrorSpan*>>;

SpansBySegment by_segment(const AnnotationSet& set) {
  SpansBySegment out;
  for (const auto& seg : set.segments_covered) out[seg];
  for (const auto& s : set.spans) out[s.segment_id].push_back(&s);
  return out;
}

void require_same_coverage(const AnnotationSet& a, const AnnotationSet& b) {
  if (a.segments_covered == b.segments_covered) return;
  std::string ids;
  std::size_t listed = 0;
  std::size_t total = 0;
  auto note = [&](const std::string& id, const std::string& who) {
    ++total;
    if (listed++ < 20) ids += (ids.empty() ? "" : ", ") + id + " (only " + who + ")";
  };
  for (const auto& id : a.segments_covered) {
    if (!b.segments_covered.count(id)) note(id, a.annotator_id);
  }
  for (const auto& id : b.segments_covered) {
    if (!a.segments_covered.count(id)) note(id, b.annotator_id);
  }
  if (total > 20) ids += ", ... " + std::to_string(total - 20) + " more";
  fail_validation("annotators '" + a.annotator_id + "' and '" + b.annotator_id +
                  "' cover different segments: " + ids);
}

AnnotationSet restricted(const AnnotationSet& set, const std::set<std::string>& keep) {
  AnnotationSet out;
  out.annotator_id = set.annotator_id;
  out.taxonomy_name = set.taxonomy_name;
  for (const auto& s : set.spans) {
    if (keep.count(s.segment_id)) out.spans.push_back(s);
  }
  for (const auto& id : set.segments_covered) {
    if (keep.count(id)) out.segments_covered.insert(id);
  }
  for (const auto& [id, note] : set.segment_notes) {
    if (keep.count(id)) out.segment_notes.emplace(id, note);
  }
  return out;
}

}  // namespace

std::size_t overlap_chars(const ErrorSpan& a, const ErrorSpan& b) {
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end, b.end);
  return hi > lo ? hi - lo : 0;
}

SpanMatching match_spans(std::span<const ErrorSpan* const> a, std::span<const ErrorSpan* const> b,
                         std::size_t min_overlap) {
  struct Candidate {
    std::size_t ia, ib, overlap;
  };
  const std::size_t threshold = std::max<std::size_t>(min_overlap, 1);
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const std::size_t ov = overlap_chars(*a[i], *b[j]);
      if (ov >= threshold) candidates.push_back({i, j, ov});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& x, const Candidate& y) {
    return std::make_tuple(y.overlap, a[x.ia]->start, b[x.ib]->start, a[x.ia]->end,
                           b[x.ib]->end, x.ia, x.ib) <
           std::make_tuple(x.overlap, a[y.ia]->start, b[y.ib]->start, a[y.ia]->end,
                           b[y.ib]->end, y.ia, y.ib);
  });

  SpanMatching m;
  std::vector<bool> used_a(a.size(), false);
  std::vector<bool> used_b(b.size(), false);
  for (const auto& c : candidates) {
    if (used_a[c.ia] || used_b[c.ib]) continue;
    used_a[c.ia] = used_b[c.ib] = true;
    m.pairs.push_back({a[c.ia], b[c.ib], c.overlap});
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!used_a[i]) m.unmatched_a.push_back(a[i]);
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (!used_b[j]) m.unmatched_b.push_back(b[j]);
  }
  return m;
}

std::optional<double> DetectionCounts::f1() const {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

DetectionCounts char_counts(const AnnotationSet& a, const AnnotationSet& b, const Corpus& corpus) {
  require_same_coverage(a, b);
  const auto sa = by_segment(a);
  const auto sb = by_segment(b);
  DetectionCounts c;
  for (const auto& [seg_id, spans_a] : sa) {
    const Segment* seg = corpus.find(seg_id);
    if (seg == nullptr) fail_validation("unknown segment '" + seg_id + "'");
    std::vector<unsigned char> marks(seg->target_scalars, 0);
    for (const ErrorSpan* s : spans_a) {
      for (std::size_t p = s->start; p < s->end && p < marks.size(); ++p) marks[p] |= 1;
    }
    for (const ErrorSpan* s : sb.at(seg_id)) {
      for (std::size_t p = s->start; p < s->end && p < marks.size(); ++p) marks[p] |= 2;
    }
    for (unsigned char m : marks) {
      if (m == 3) {
        ++c.tp;
      } else if (m == 1) {
        ++c.fp;
      } else if (m == 2) {
        ++c.fn;
      }
    }
  }
  return c;
}

DetectionCounts span_counts(MatchMode mode, const AnnotationSet& a, const AnnotationSet& b,
                            std::size_t min_overlap) {
  require_same_coverage(a, b);
  const auto sa = by_segment(a);
  const auto sb = by_segment(b);
  DetectionCounts c;
  for (const auto& [seg_id, spans_a] : sa) {
    const auto& spans_b = sb.at(seg_id);
    const auto m = match_spans(spans_a, spans_b, min_overlap);
    std::size_t tp = 0;
    for (const auto& p : m.pairs) {
      if (mode == MatchMode::overlap || (p.a->start == p.b->start && p.a->end == p.b->end)) ++tp;
    }
    c.tp += tp;
    c.fp += spans_a.size() - tp;
    c.fn += spans_b.size() - tp;
  }
  return c;
}

std::optional<double> char_f1(const AnnotationSet& a, const AnnotationSet& b,
                              const Corpus& corpus) {
  return char_counts(a, b, corpus).f1();
}

std::optional<double> span_f1(MatchMode mode, const AnnotationSet& a, const AnnotationSet& b,
                              std::size_t min_overlap) {
  return span_counts(mode, a, b, min_overlap).f1();
}

std::string_view to_string(LabelCriterion c) {
  switch (c) {
    case LabelCriterion::category: return "category";
    case LabelCriterion::severity: return "severity";
    case LabelCriterion::category_severity: return "category+severity";
    case LabelCriterion::fine_type: return "fine_type";
    case LabelCriterion::span_type_severity: return "span+type+severity";
  }
  return "";
}

std::string label_of(const ErrorSpan& span, LabelCriterion c) {
  const std::string sev(to_string(span.severity));
  switch (c) {
    case LabelCriterion::category: return span.path.category;
    case LabelCriterion::severity: return sev;
    case LabelCriterion::category_severity: return span.path.category + "|" + sev;
    case LabelCriterion::fine_type: return span.path.key();
    case LabelCriterion::span_type_severity:
      return std::to_string(span.start) + ":" + std::to_string(span.end) + "|" + span.path.key() +
             "|" + sev;
  }
  return {};
}

KappaResult cohen_kappa(std::span<const std::pair<std::string, std::string>> labels) {
  KappaResult r;
  if (labels.empty()) {
    r.reason = "no matched pairs";
    return r;
  }
  std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (const auto& [la, lb] : labels) {
    ++marginals[la].first;
    ++marginals[lb].second;
    if (la == lb) ++agree;
  }
  const double n = static_cast<double>(labels.size());
  r.p_o = static_cast<double>(agree) / n;
  double pe = 0.0;
  for (const auto& [label, counts] : marginals) {
    pe += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  }
  r.p_e = pe;
  if (marginals.size() == 1) {
    r.p_e = 1.0;
    r.reason = "both annotators used a single label; chance agreement is 1";
    return r;
  }
  r.kappa = (r.p_o - r.p_e) / (1.0 - r.p_e);
  return r;
}

LabelAgreement label_agreement(std::span<const MatchedPair> pairs, LabelCriterion c,
                               std::size_t n_spans_a, std::size_t n_spans_b) {
  LabelAgreement out;
  out.criterion = c;
  out.n_pairs = pairs.size();
  std::vector<std::pair<std::string, std::string>> labels;
  labels.reserve(pairs.size());
  for (const auto& p : pairs) {
    labels.emplace_back(label_of(*p.a, c), label_of(*p.b, c));
    if (labels.back().first == labels.back().second) ++out.n_agree;
  }
  if (!pairs.empty()) {
    out.matched_agreement = static_cast<double>(out.n_agree) / static_cast<double>(out.n_pairs);
  }
  if (n_spans_a + n_spans_b > 0) {
    out.f1 = 2.0 * static_cast<double>(out.n_agree) / static_cast<double>(n_spans_a + n_spans_b);
  }
  out.kappa = cohen_kappa(labels);
  return out;
}

AgreementReport agreement_report(const AnnotationSet& a, const AnnotationSet& b,
                                 const Corpus& corpus, const TaxonomySchema& schema,
                                 std::size_t min_overlap) {
  if (min_overlap == 0) fail(ErrorKind::usage, "min_overlap must be at least 1");
  std::set<std::string> both;
  std::set_intersection(a.segments_covered.begin(), a.segments_covered.end(),
                        b.segments_covered.begin(), b.segments_covered.end(),
                        std::inserter(both, both.end()));
  if (both.empty()) {
    fail_validation("annotators '" + a.annotator_id + "' and '" + b.annotator_id +
                    "' share no annotated segments");
  }
  const AnnotationSet ra = restricted(a, both);
  const AnnotationSet rb = restricted(b, both);
  for (const auto* set : {&ra, &rb}) {
    for (const auto& s : set->spans) {
      const Segment* seg = corpus.find(s.segment_id);
      if (seg == nullptr) fail_validation("unknown segment '" + s.segment_id + "'");
      validate_span(s, *seg, schema, "annotator '" + set->annotator_id + "'");
    }
  }

  AgreementReport r;
  r.annotator_a = a.annotator_id;
  r.annotator_b = b.annotator_id;
  r.min_overlap = min_overlap;
  r.n_items = both.size();
  r.n_spans_a = ra.spans.size();
  r.n_spans_b = rb.spans.size();
  r.chars = char_counts(ra, rb, corpus);
  r.overlap_spans = span_counts(MatchMode::overlap, ra, rb, min_overlap);
  r.exact_spans = span_counts(MatchMode::exact, ra, rb, min_overlap);

  std::vector<MatchedPair> pairs;
  const auto sa = by_segment(ra);
  const auto sb = by_segment(rb);
  for (const auto& [seg_id, spans_a] : sa) {
    const auto m = match_spans(spans_a, sb.at(seg_id), min_overlap);
    pairs.insert(pairs.end(), m.pairs.begin(), m.pairs.end());
  }
  for (LabelCriterion c : kLabelCriteria) {
    r.labels.push_back(label_agreement(pairs, c, r.n_spans_a, r.n_spans_b));
  }
  return r;
}

nlohmann::ordered_json to_json(const AgreementReport& r) {
  using json = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  auto detection = [&](const DetectionCounts& c) {
    json j;
    j["f1"] = opt(c.f1());
    j["tp"] = c.tp;
    j["fp"] = c.fp;
    j["fn"] = c.fn;
    return j;
  };
  json j;
  j["annotator_a"] = r.annotator_a;
  j["annotator_b"] = r.annotator_b;
  j["min_overlap"] = r.min_overlap;
  j["n_items"] = r.n_items;
  j["n_spans_a"] = r.n_spans_a;
  j["n_spans_b"] = r.n_spans_b;
  j["char_f1"] = opt(r.chars.f1());
  j["overlap_span_f1"] = opt(r.overlap_spans.f1());
  j["exact_span_f1"] = opt(r.exact_spans.f1());
  j["detection"] = {{"char", detection(r.chars)},
                    {"overlap_span", detection(r.overlap_spans)},
                    {"exact_span", detection(r.exact_spans)}};
  json label_f1 = json::object();
  json matched = json::object();
  json kappa = json::object();
  json kappa_detail = json::object();
  for (const auto& l : r.labels) {
    const std::string key(to_string(l.criterion));
    label_f1[key] = opt(l.f1);
    matched[key] = opt(l.matched_agreement);
    kappa[key] = opt(l.kappa.kappa);
    json d;
    d["n_pairs"] = l.n_pairs;
    d["n_agree"] = l.n_agree;
    d["p_o"] = l.n_pairs ? json(l.kappa.p_o) : json(nullptr);
    d["p_e"] = l.n_pairs ? json(l.kappa.p_e) : json(nullptr);
    if (!l.kappa.kappa) d["reason"] = l.kappa.reason;
    kappa_detail[key] = std::move(d);
  }
  j["label_f1"] = std::move(label_f1);
  j["label_matched_agreement"] = std::move(matched);
  j["kappa"] = std::move(kappa);
  j["label_detail"] = std::move(kappa_detail);
  return j;
}

}  // namespace lqm
