#include "analysis.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_map>

#include "error.hpp"
#include "stats.hpp"

namespace lqm {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string canonical_direction(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, 3, "\xE2\x86\x92") == 0) {  // U+2192
      out += "->";
      i += 3;
    } else if (s[i] == ' ') {
      ++i;
    } else {
      out += s[i++];
    }
  }
  return upper(out);
}

std::vector<std::string> level_labels(const TaxonomySchema& schema, const TaxonomyPath& p,
                                      DistributionLevel level) {
  auto label = [&](const std::optional<std::string>& id) -> std::string {
    if (!id) return "---";
    const TaxonomyNode* n = schema.find(*id);
    return n ? n->label : *id;
  };
  std::vector<std::string> out{label(p.category)};
  if (level != DistributionLevel::category) out.push_back(label(p.error_type));
  if (level == DistributionLevel::subcategory) out.push_back(label(p.subcategory));
  return out;
}

std::string level_key(const TaxonomyPath& p, DistributionLevel level) {
  TaxonomyPath cut = p;
  if (level != DistributionLevel::subcategory) cut.subcategory.reset();
  if (level == DistributionLevel::category) cut.error_type.reset();
  return cut.key();
}

struct Tally {
  std::vector<std::string> labels;
  std::size_t count = 0;
  double weighted = 0.0;
};

DistributionTable finish(std::string grouping, std::map<std::string, Tally> tallies) {
  DistributionTable t;
  t.grouping = std::move(grouping);
  for (const auto& [key, tally] : tallies) {
    t.total += tally.count;
    t.total_weighted += tally.weighted;
  }
  for (auto& [key, tally] : tallies) {
    DistributionRow r;
    r.key = key;
    r.labels = std::move(tally.labels);
    r.count = tally.count;
    r.weighted = tally.weighted;
    r.rate = t.total ? 100.0 * static_cast<double>(r.count) / static_cast<double>(t.total) : 0.0;
    r.weighted_rate = t.total_weighted > 0.0 ? 100.0 * r.weighted / t.total_weighted : 0.0;
    t.rows.push_back(std::move(r));
  }
  std::stable_sort(t.rows.begin(), t.rows.end(), [](const DistributionRow& a, const DistributionRow& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.key < b.key;
  });
  return t;
}

template <typename Fn>
void for_each_span(const Corpus& corpus, std::span<const AnnotationSet> sets,
                   const ScopeFilter& filter, Fn&& fn) {
  for (const auto& set : sets) {
    if (filter.annotator && set.annotator_id != *filter.annotator) continue;
    for (const auto& span : set.spans) {
      const Segment* seg = corpus.find(span.segment_id);
      if (seg == nullptr) {
        fail_validation("span '" + span.span_id + "' references unknown segment '" +
                        span.segment_id + "'");
      }
      if (filter.admits(*seg)) fn(span, *seg);
    }
  }
}

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

bool is_english(std::string_view lang) {
  const std::string u = upper(lang);
  return u == "EN" || u == "ENG" || u == "ENGLISH";
}

bool ScopeFilter::admits(const Segment& s) const {
  if (model && s.model_id != *model) return false;
  if (dialect && (!s.dialect || *s.dialect != *dialect)) return false;
  if (direction) {
    const std::string want = canonical_direction(*direction);
    if (want == "DA->EN") {
      if (!is_english(s.target_lang) || is_english(s.source_lang)) return false;
    } else if (want == "EN->DA") {
      if (!is_english(s.source_lang) || is_english(s.target_lang)) return false;
    } else if (canonical_direction(s.direction()) != want) {
      return false;
    }
  }
  return true;
}

nlohmann::ordered_json ScopeFilter::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (direction) j["direction"] = *direction;
  if (model) j["model"] = *model;
  if (dialect) j["dialect"] = *dialect;
  if (annotator) j["annotator"] = *annotator;
  return j;
}

std::optional<DistributionLevel> parse_distribution_level(std::string_view s) {
  if (s == "category") return DistributionLevel::category;
  if (s == "error_type") return DistributionLevel::error_type;
  if (s == "subcategory") return DistributionLevel::subcategory;
  return std::nullopt;
}

std::string_view to_string(DistributionLevel level) {
  switch (level) {
    case DistributionLevel::category: return "category";
    case DistributionLevel::error_type: return "error_type";
    case DistributionLevel::subcategory: return "subcategory";
  }
  return "";
}

DistributionTable error_distribution(const Corpus& corpus, std::span<const AnnotationSet> sets,
                                     const TaxonomySchema& schema, DistributionLevel level,
                                     const ScopeFilter& filter, const WeightScheme& scheme) {
  std::map<std::string, Tally> tallies;
  for_each_span(corpus, sets, filter, [&](const ErrorSpan& span, const Segment&) {
    auto& t = tallies[level_key(span.path, level)];
    if (t.labels.empty()) t.labels = level_labels(schema, span.path, level);
    ++t.count;
    t.weighted += scheme.weight(span.severity) * scheme.type_weight;
  });
  return finish(std::string(to_string(level)), std::move(tallies));
}

std::vector<std::pair<std::string, DistributionTable>> model_attribution(
    const Corpus& corpus, std::span<const AnnotationSet> sets, const ScopeFilter& filter,
    const WeightScheme& scheme) {
  std::map<std::string, std::map<std::string, Tally>> per_direction;
  for_each_span(corpus, sets, filter, [&](const ErrorSpan& span, const Segment& seg) {
    auto& t = per_direction[seg.direction()][seg.model_id];
    if (t.labels.empty()) t.labels = {seg.model_id};
    ++t.count;
    t.weighted += scheme.weight(span.severity) * scheme.type_weight;
  });
  std::vector<std::pair<std::string, DistributionTable>> out;
  for (auto& [direction, tallies] : per_direction) {
    out.emplace_back(direction, finish("model", std::move(tallies)));
  }
  return out;
}

std::vector<DashboardRow> dashboard(const Corpus& corpus, std::span<const AnnotationSet> sets,
                                    const TaxonomySchema& schema, const ScopeFilter& filter,
                                    const WeightScheme& scheme) {
  std::map<std::string, std::set<std::optional<std::string>>> dialects;
  for (const auto& seg : corpus.segments()) {
    if (filter.admits(seg)) dialects[seg.direction()].insert(seg.dialect);
  }
  std::vector<DashboardRow> out;
  for (auto& [direction, models] : model_attribution(corpus, sets, filter, scheme)) {
    DashboardRow row;
    row.direction = direction;
    const auto& d = dialects[direction];
    if (d.size() == 1) row.dialect = *d.begin();
    row.models = std::move(models);
    ScopeFilter narrowed = filter;
    narrowed.direction = direction;
    row.categories =
        error_distribution(corpus, sets, schema, DistributionLevel::category, narrowed, scheme);
    out.push_back(std::move(row));
  }
  return out;
}

CorrelationReport correlate(std::span<const double> x, std::span<const double> y,
                            bool exact_permutation) {
  if (x.size() != y.size()) fail_validation("correlation: samples differ in length");
  if (x.size() < 3) {
    fail_validation("correlation needs at least 3 paired observations, got " +
                    std::to_string(x.size()));
  }
  CorrelationReport r;
  r.n = x.size();
  r.pearson_r = stats::pearson(x, y);
  r.spearman_rho = stats::spearman(x, y);
  if (!r.pearson_r || !r.spearman_rho) r.reason = "zero variance in at least one variable";
  if (exact_permutation) {
    r.p_method = "permutation";
    if (r.pearson_r) r.p_pearson = stats::permutation_p_value(x, y, false);
    if (r.spearman_rho) r.p_spearman = stats::permutation_p_value(x, y, true);
  } else {
    r.p_method = "t";
    if (r.pearson_r) r.p_pearson = stats::correlation_p_value(*r.pearson_r, r.n);
    if (r.spearman_rho) r.p_spearman = stats::correlation_p_value(*r.spearman_rho, r.n);
  }
  return r;
}

AlignedScores align_scores(const Corpus& corpus, const ScoreReport& lqm,
                           std::span<const std::pair<std::string, double>> automatic,
                           const ScopeFilter& filter) {
  std::unordered_map<std::string, double> autos;
  for (const auto& [id, score] : automatic) {
    if (corpus.find(id) == nullptr) {
      fail_validation("automatic scores reference unknown segment '" + id + "'");
    }
    autos[id] = score;
  }
  AlignedScores out;
  std::size_t matched_autos = 0;
  for (const auto& s : lqm.segments) {
    const Segment* seg = corpus.find(s.segment_id);
    if (!filter.admits(*seg)) continue;
    const auto it = autos.find(s.segment_id);
    if (it == autos.end()) {
      ++out.unpaired_human;
      continue;
    }
    ++matched_autos;
    out.segment_ids.push_back(s.segment_id);
    out.automatic.push_back(it->second);
    out.human.push_back(s.score);
  }
  std::size_t autos_in_scope = 0;
  for (const auto& [id, score] : autos) {
    if (filter.admits(*corpus.find(id))) ++autos_in_scope;
  }
  out.unpaired_automatic = autos_in_scope - matched_autos;
  return out;
}

std::string_view to_string(Bucket b) {
  switch (b) {
    case Bucket::short_: return "short";
    case Bucket::medium: return "medium";
    case Bucket::long_: return "long";
  }
  return "";
}

RankStability rank_stability(std::span<const BucketCell> cells) {
  // direction -> model -> micro per bucket
  std::map<std::string, std::map<std::string, std::array<std::optional<double>, 3>>> table;
  for (const auto& c : cells) {
    table[c.direction][c.model_id][static_cast<std::size_t>(c.bucket)] = c.micro;
  }
  RankStability out;
  std::array<double, 3> sums{};
  for (const auto& [direction, models] : table) {
    RankStabilityRow row;
    row.direction = direction;
    row.n_models = models.size();
    for (std::size_t k = 0; k < kBucketPairs.size(); ++k) {
      const auto [bx, by] = kBucketPairs[k];
      std::vector<double> x, y;
      for (const auto& [model, scores] : models) {
        const auto& sx = scores[static_cast<std::size_t>(bx)];
        const auto& sy = scores[static_cast<std::size_t>(by)];
        if (sx && sy) {
          x.push_back(*sx);
          y.push_back(*sy);
        }
      }
      if (x.size() >= 2) row.rho[k] = stats::spearman(x, y);
      if (row.rho[k]) {
        sums[k] += *row.rho[k];
        ++out.n_defined[k];
      }
    }
    out.rows.push_back(std::move(row));
  }
  for (std::size_t k = 0; k < 3; ++k) {
    if (out.n_defined[k]) out.mean[k] = sums[k] / static_cast<double>(out.n_defined[k]);
  }
  return out;
}

BucketReport length_buckets(const Corpus& corpus, const ScoreReport& lqm, const ScopeFilter& filter) {
  std::vector<const SegmentScore*> scope;
  for (const auto& s : lqm.segments) {
    if (filter.admits(*corpus.find(s.segment_id))) scope.push_back(&s);
  }
  if (scope.size() < 3) {
    fail_validation("length buckets need at least 3 segments in scope, got " +
                    std::to_string(scope.size()));
  }
  std::vector<double> lengths;
  lengths.reserve(scope.size());
  for (const auto* s : scope) lengths.push_back(static_cast<double>(s->length));

  BucketReport r;
  r.q33 = stats::nearest_rank_percentile(lengths, 33.0);
  r.q66 = stats::nearest_rank_percentile(lengths, 66.0);

  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::map<Key, std::vector<SegmentMass>> groups;
  std::set<std::pair<std::string, std::string>> combos;
  for (const auto* s : scope) {
    const double len = static_cast<double>(s->length);
    const Bucket b = len <= r.q33 ? Bucket::short_ : len <= r.q66 ? Bucket::medium : Bucket::long_;
    ++r.sizes[static_cast<std::size_t>(b)];
    groups[{s->direction, s->model_id, static_cast<std::size_t>(b)}].push_back({s->mass, s->length});
    combos.emplace(s->direction, s->model_id);
  }
  for (const auto& [direction, model] : combos) {
    for (Bucket b : kBuckets) {
      BucketCell c;
      c.direction = direction;
      c.model_id = model;
      c.bucket = b;
      const auto it = groups.find({direction, model, static_cast<std::size_t>(b)});
      if (it != groups.end()) {
        c.n_segments = it->second.size();
        c.micro = micro_score(it->second);
      }
      r.cells.push_back(std::move(c));
    }
  }
  r.stability = rank_stability(r.cells);
  return r;
}

nlohmann::ordered_json to_json(const DistributionTable& t) {
  using json = nlohmann::ordered_json;
  json j;
  j["grouping"] = t.grouping;
  j["total"] = t.total;
  j["total_weighted"] = t.total_weighted;
  json rows = json::array();
  for (const auto& r : t.rows) {
    json e;
    e["key"] = r.key;
    e["labels"] = r.labels;
    e["count"] = r.count;
    e["rate"] = r.rate;
    e["weighted"] = r.weighted;
    e["weighted_rate"] = r.weighted_rate;
    rows.push_back(std::move(e));
  }
  j["rows"] = std::move(rows);
  return j;
}

nlohmann::ordered_json to_json(std::span<const DashboardRow> rows) {
  using json = nlohmann::ordered_json;
  json out = json::array();
  for (const auto& r : rows) {
    json e;
    e["direction"] = r.direction;
    e["dialect"] = r.dialect ? json(*r.dialect) : json(nullptr);
    e["model_contribution"] = to_json(r.models);
    e["category_distribution"] = to_json(r.categories);
    out.push_back(std::move(e));
  }
  return out;
}

nlohmann::ordered_json to_json(const CorrelationReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["pearson_r"] = opt(r.pearson_r);
  j["spearman_rho"] = opt(r.spearman_rho);
  j["p_values"] = {{"method", r.p_method}, {"pearson", opt(r.p_pearson)}, {"spearman", opt(r.p_spearman)}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

nlohmann::ordered_json to_json(const BucketReport& r) {
  using json = nlohmann::ordered_json;
  json j;
  j["percentile_method"] = "nearest-rank";
  j["cutoffs"] = {{"q33", r.q33}, {"q66", r.q66}};
  j["sizes"] = {{"short", r.sizes[0]}, {"medium", r.sizes[1]}, {"long", r.sizes[2]}};
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"direction", c.direction},
                     {"model_id", c.model_id},
                     {"bucket", std::string(to_string(c.bucket))},
                     {"n_segments", c.n_segments},
                     {"micro_score", opt(c.micro)}});
  }
  j["cells"] = std::move(cells);
  json rows = json::array();
  for (const auto& row : r.stability.rows) {
    rows.push_back({{"direction", row.direction},
                    {"n_models", row.n_models},
                    {"short_medium", opt(row.rho[0])},
                    {"medium_long", opt(row.rho[1])},
                    {"short_long", opt(row.rho[2])}});
  }
  j["rank_stability"] = {{"per_direction", std::move(rows)},
                         {"mean", {{"short_medium", opt(r.stability.mean[0])},
                                   {"medium_long", opt(r.stability.mean[1])},
                                   {"short_long", opt(r.stability.mean[2])}}},
                         {"n_defined", {{"short_medium", r.stability.n_defined[0]},
                                        {"medium_long", r.stability.n_defined[1]},
                                        {"short_long", r.stability.n_defined[2]}}}};
  return j;
}

}  // namespace lqm
