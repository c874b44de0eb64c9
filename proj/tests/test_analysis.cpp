#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "analysis.hpp"
#include "error.hpp"
#include "support.hpp"

using namespace lqm;
using testing::make_segment;
using testing::make_span;

namespace {

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

AnnotationSet set_of(std::string annotator, std::vector<ErrorSpan> spans) {
  AnnotationSet a;
  a.annotator_id = std::move(annotator);
  a.taxonomy_name = "LQM";
  for (auto& s : spans) {
    s.annotator_id = a.annotator_id;
    a.segments_covered.insert(s.segment_id);
  }
  a.spans = std::move(spans);
  return a;
}

ErrorSpan with_path(ErrorSpan s, TaxonomyPath p) {
  s.path = std::move(p);
  return s;
}

}  // namespace

TEST_CASE("direction filter classes") {
  const auto da_en = make_segment("a", "x", "m", "EGY", "ENG");
  const auto en_da = make_segment("b", "x", "m", "ENG", "MOR");
  ScopeFilter f;
  f.direction = "da->en";
  CHECK(f.admits(da_en));
  CHECK_FALSE(f.admits(en_da));
  f.direction = "EN→DA";
  CHECK(f.admits(en_da));
  CHECK_FALSE(f.admits(da_en));
  f.direction = "ENG->MOR";
  CHECK(f.admits(en_da));
  f.direction.reset();
  f.model = "other";
  CHECK_FALSE(f.admits(da_en));
}

TEST_CASE("distribution levels and rates") {
  const auto s1 = make_segment("s1", words(10));
  const auto s2 = make_segment("s2", words(10), "m2");
  Corpus corpus({s1, s2});
  const auto& schema = builtin_lqm();
  std::vector<ErrorSpan> spans = {
      make_span("a", s1, 0, 2),
      make_span("b", s1, 3, 4, Severity::major),
      with_path(make_span("c", s2, 0, 2), {"semantics", "lexical-semantics", {}}),
      with_path(make_span("d", s2, 3, 5, Severity::critical), {"orthography", "punctuation", {}}),
  };
  std::vector<AnnotationSet> sets = {set_of("A", spans)};

  const auto cat = error_distribution(corpus, sets, schema, DistributionLevel::category, {});
  REQUIRE(cat.rows.size() == 2);
  CHECK(cat.rows[0].key == "semantics");
  CHECK(cat.rows[0].count == 3);
  CHECK(cat.rows[0].rate == doctest::Approx(75.0));
  CHECK(cat.rows[1].weighted == 25.0);
  CHECK(cat.total_weighted == 32.0);

  const auto sub = error_distribution(corpus, sets, schema, DistributionLevel::subcategory, {});
  REQUIRE(sub.rows.size() == 3);
  CHECK(sub.rows[0].key == "semantics/lexical-semantics/named-entity");
  CHECK(sub.rows[0].count == 2);
  // Ties on count fall back to the key.
  CHECK(sub.rows[1].key == "orthography/punctuation");
  CHECK(sub.rows[1].labels.size() == 3);
  CHECK(sub.rows[1].labels[2] == "---");

  ScopeFilter only_m2;
  only_m2.model = "m2";
  CHECK(error_distribution(corpus, sets, schema, DistributionLevel::category, only_m2).total == 2);
  ScopeFilter other;
  other.annotator = "B";
  const auto empty = error_distribution(corpus, sets, schema, DistributionLevel::category, other);
  CHECK(empty.rows.empty());
  CHECK(empty.total == 0);
}

TEST_CASE("rates sum to 100 on random corpora") {
  testing::Rng rng(99);
  const auto& schema = builtin_lqm();
  const auto leaves = schema.leaves(Layer::diagnostic);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Segment> segs;
    const std::size_t n = testing::uniform(rng, 1, 12);
    for (std::size_t i = 0; i < n; ++i) {
      segs.push_back(make_segment("s" + std::to_string(i), words(8), "m" + std::to_string(i % 3)));
    }
    Corpus corpus(segs);
    std::vector<ErrorSpan> spans;
    const std::size_t k = testing::uniform(rng, 1, 40);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& seg = segs[testing::uniform(rng, 0, n - 1)];
      auto s = make_span("x" + std::to_string(j), seg, 0, 1,
                         static_cast<Severity>(testing::uniform(rng, 0, 2)));
      s.path = leaves[testing::uniform(rng, 0, leaves.size() - 1)];
      spans.push_back(s);
    }
    std::vector<AnnotationSet> sets = {set_of("A", spans)};
    for (auto level : {DistributionLevel::category, DistributionLevel::error_type,
                       DistributionLevel::subcategory}) {
      const auto t = error_distribution(corpus, sets, schema, level, {});
      double rate = 0, wrate = 0;
      std::size_t count = 0;
      for (const auto& r : t.rows) {
        rate += r.rate;
        wrate += r.weighted_rate;
        count += r.count;
      }
      CHECK(count == k);
      CHECK(rate == doctest::Approx(100.0));
      CHECK(wrate == doctest::Approx(100.0));
    }
    for (const auto& [dir, t] : model_attribution(corpus, sets, {})) {
      double rate = 0;
      for (const auto& r : t.rows) rate += r.rate;
      CHECK(rate == doctest::Approx(100.0));
    }
  }
}

TEST_CASE("uniform errors over six models give equal shares") {
  std::vector<Segment> segs;
  std::vector<ErrorSpan> spans;
  for (int m = 0; m < 6; ++m) {
    for (int i = 0; i < 3; ++i) {
      segs.push_back(make_segment("s" + std::to_string(m) + std::to_string(i), words(5),
                                  "model" + std::to_string(m)));
      spans.push_back(make_span("e" + std::to_string(m) + std::to_string(i), segs.back(), 0, 1));
    }
  }
  Corpus corpus(segs);
  std::vector<AnnotationSet> sets = {set_of("A", spans)};
  const auto rows = dashboard(corpus, sets, builtin_lqm(), {});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].direction == "EGY->ENG");
  REQUIRE(rows[0].models.rows.size() == 6);
  for (const auto& r : rows[0].models.rows) CHECK(r.rate == doctest::Approx(100.0 / 6.0));
  CHECK(rows[0].categories.rows.size() == 1);
  CHECK(rows[0].categories.rows[0].rate == 100.0);
}

TEST_CASE("correlate") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {2, 4, 6, 8, 11};
  const auto r = correlate(x, y);
  CHECK(*r.spearman_rho == 1.0);
  CHECK(r.p_method == "t");
  CHECK(*r.p_spearman == 0.0);
  const auto p = correlate(x, y, true);
  CHECK(*p.p_spearman == doctest::Approx(2.0 / 120.0));
  const std::vector<double> flat = {3, 3, 3, 3, 3};
  const auto absent = correlate(x, flat);
  CHECK_FALSE(absent.pearson_r.has_value());
  CHECK_FALSE(absent.reason.empty());
  CHECK(to_json(absent)["pearson_r"].is_null());
  CHECK_THROWS_AS(correlate(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("align_scores pairs by id within scope") {
  const auto s1 = make_segment("s1", words(4));
  const auto s2 = make_segment("s2", words(4), "m2");
  const auto s3 = make_segment("s3", words(4));
  Corpus corpus({s1, s2, s3});
  std::vector<AnnotationSet> sets = {set_of("A", {make_span("a", s1, 0, 1)})};
  const auto lqm = score_report(corpus, sets, {});
  std::vector<std::pair<std::string, double>> bleu = {{"s3", 40.0}, {"s1", 10.0}, {"s2", 5.0}};
  ScopeFilter f;
  f.model = "m";
  const auto aligned = align_scores(corpus, lqm, bleu, f);
  CHECK(aligned.segment_ids == std::vector<std::string>{"s1", "s3"});
  CHECK(aligned.automatic == std::vector<double>{10.0, 40.0});
  CHECK(aligned.human == std::vector<double>{75.0, 100.0});
  std::vector<std::pair<std::string, double>> bad = {{"nope", 1.0}};
  CHECK_THROWS_AS(align_scores(corpus, lqm, bad, {}), Error);
}

TEST_CASE("length buckets partition the scope") {
  testing::Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Segment> segs;
    const std::size_t n = testing::uniform(rng, 3, 60);
    for (std::size_t i = 0; i < n; ++i) {
      segs.push_back(make_segment("s" + std::to_string(i), words(testing::uniform(rng, 1, 30)),
                                  "m" + std::to_string(i % 4)));
    }
    Corpus corpus(segs);
    const auto lqm = score_report(corpus, {}, {});
    const auto b = length_buckets(corpus, lqm, {});
    CHECK(b.sizes[0] + b.sizes[1] + b.sizes[2] == n);
    CHECK(b.q33 <= b.q66);
    std::size_t cell_total = 0;
    for (const auto& c : b.cells) cell_total += c.n_segments;
    CHECK(cell_total == n);
    std::size_t at_most_q33 = 0, above_q66 = 0;
    for (const auto& s : lqm.segments) {
      at_most_q33 += static_cast<double>(s.length) <= b.q33;
      above_q66 += static_cast<double>(s.length) > b.q66;
    }
    CHECK(at_most_q33 == b.sizes[0]);
    CHECK(above_q66 == b.sizes[2]);
  }
  Corpus tiny({make_segment("a", "x"), make_segment("b", "y")});
  CHECK_THROWS_AS(length_buckets(tiny, score_report(tiny, {}, {}), {}), Error);
}

TEST_CASE("rank stability against the closed form") {
  auto cells_for = [](const std::vector<double>& short_scores, const std::vector<double>& long_scores) {
    std::vector<BucketCell> cells;
    for (std::size_t m = 0; m < short_scores.size(); ++m) {
      cells.push_back({"D", "m" + std::to_string(m), Bucket::short_, 1, short_scores[m]});
      cells.push_back({"D", "m" + std::to_string(m), Bucket::medium, 0, std::nullopt});
      cells.push_back({"D", "m" + std::to_string(m), Bucket::long_, 1, long_scores[m]});
    }
    return cells;
  };
  const std::vector<double> up = {10, 20, 30, 40, 50, 60};
  const std::vector<double> down = {60, 50, 40, 30, 20, 10};
  auto rs = rank_stability(cells_for(up, down));
  REQUIRE(rs.rows.size() == 1);
  CHECK(*rs.rows[0].rho[2] == doctest::Approx(-1.0));
  CHECK_FALSE(rs.rows[0].rho[0].has_value());
  CHECK(rs.n_defined[2] == 1);
  CHECK_FALSE(rs.mean[0].has_value());

  // One adjacent swap: sum d^2 = 2, rho = 1 - 6*2/(n(n^2-1)).
  const std::vector<double> swapped = {10, 20, 40, 30, 50, 60};
  rs = rank_stability(cells_for(up, swapped));
  const double n = 6;
  CHECK(*rs.rows[0].rho[2] == doctest::Approx(1.0 - 12.0 / (n * (n * n - 1))).epsilon(1e-12));
}

TEST_CASE("bucket report on a controlled corpus") {
  // Two models, lengths 1..9 each; model a is perfect, model b has one minor
  // error per segment, so b ranks below a in every bucket.
  std::vector<Segment> segs;
  std::vector<ErrorSpan> spans;
  for (int len = 1; len <= 9; ++len) {
    segs.push_back(make_segment("a" + std::to_string(len), words(len), "a"));
    segs.push_back(make_segment("b" + std::to_string(len), words(len), "b"));
    spans.push_back(make_span("e" + std::to_string(len), segs.back(), 0, 1));
  }
  Corpus corpus(segs);
  std::vector<AnnotationSet> sets = {set_of("A", spans)};
  const auto lqm = score_report(corpus, sets, {});
  const auto b = length_buckets(corpus, lqm, {});
  CHECK(b.q33 == 3);
  CHECK(b.q66 == 6);
  CHECK(b.sizes == std::array<std::size_t, 3>{6, 6, 6});
  CHECK(b.cells.size() == 6);
  for (std::size_t k = 0; k < 3; ++k) CHECK(*b.stability.mean[k] == doctest::Approx(1.0));
  const auto j = to_json(b);
  CHECK(j["cells"][3]["model_id"] == "b");
  // Model b short bucket: lengths 1,2,3 with one minor error each.
  CHECK(j["cells"][3]["micro_score"].get<double>() == doctest::Approx(50.0));
}
