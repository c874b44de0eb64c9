#include "doctest.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include "httplib.h"

#include "agreement.hpp"
#include "server/http.hpp"
#include "server/store.hpp"
#include "support.hpp"

using namespace lqm;
using json = nlohmann::json;

namespace {

class Running {
 public:
  explicit Running(std::string data_dir, std::optional<std::string> admin = std::nullopt)
      : server_(server::ServerOptions{std::move(data_dir), "127.0.0.1", 0, std::move(admin)}) {
    port_ = server_.bind();
    thread_ = std::thread([this] { server_.run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  ~Running() {
    server_.stop();
    thread_.join();
  }

  httplib::Client& client() { return *client_; }

 private:
  server::HttpServer server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

json segment_record(const std::string& id, const std::string& target, const std::string& model = "m1") {
  return {{"segment_id", id},       {"source_lang", "ENG"},   {"target_lang", "EGY"},
          {"dialect", "Egyptian"},  {"model_id", model},      {"source_text", "source " + id},
          {"target_text", target}};
}

json project_payload(std::size_t n, json annotators, double overlap = 0.0) {
  json segs = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "s%03zu", i);
    segs.push_back(segment_record(id, "كلمة واحدة اثنان ثلاثة " + std::to_string(i)));
  }
  return {{"segments", segs}, {"annotators", std::move(annotators)}, {"overlap_fraction", overlap}};
}

json span(std::size_t start, std::size_t end, const std::string& severity = "minor",
          json path = {{"category", "semantics"}, {"error_type", "lexical-semantics"}, {"subcategory", "named-entity"}}) {
  json s = path;
  s["start"] = start;
  s["end"] = end;
  s["severity"] = severity;
  return s;
}

httplib::Headers auth(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

std::string create(httplib::Client& c, const json& payload, const httplib::Headers& h = {}) {
  auto r = c.Post("/projects", h, payload.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 201);
  return body_of(r)["project_id"];
}

httplib::Result put(httplib::Client& c, const std::string& project, const std::string& seg, const std::string& ann,
                    const json& body, const httplib::Headers& h = {}) {
  return c.Put("/projects/" + project + "/segments/" + seg + "/annotations?annotator=" + ann, h, body.dump(),
               "application/json");
}

}  // namespace

TEST_CASE("project creation and idempotency") {
  testing::TempDir dir;
  Running srv(dir.str());
  auto& c = srv.client();

  json payload = project_payload(5, {"a", "b"});
  payload["client_token"] = "create-1";
  const auto id = create(c, payload);

  auto again = c.Post("/projects", payload.dump(), "application/json");
  REQUIRE(again);
  CHECK(again->status == 200);
  CHECK(body_of(again)["project_id"] == id);
  CHECK(body_of(again)["created"] == false);

  json changed = payload;
  changed["overlap_fraction"] = 0.5;
  auto clash = c.Post("/projects", changed.dump(), "application/json");
  CHECK(clash->status == 409);

  json empty = project_payload(0, {"a"});
  empty["segments"] = json::array();
  auto rejected = c.Post("/projects", empty.dump(), "application/json");
  CHECK(rejected->status == 400);
  CHECK(body_of(rejected)["error"]["kind"] == "validation");

  json unknown = project_payload(1, {"a"});
  unknown["colour"] = "red";
  CHECK(c.Post("/projects", unknown.dump(), "application/json")->status == 400);
  CHECK(c.Post("/projects", "{not json", "application/json")->status == 400);

  json bad_segment = project_payload(2, {"a"});
  bad_segment["segments"][1]["target_text"] = "";
  auto r = c.Post("/projects", bad_segment.dump(), "application/json");
  CHECK(r->status == 400);
  CHECK(body_of(r)["error"]["message"].get<std::string>().find("segments[1]") != std::string::npos);
}

TEST_CASE("next, save, conflict and completion") {
  testing::TempDir dir;
  Running srv(dir.str());
  auto& c = srv.client();
  const auto id = create(c, project_payload(2, {"a"}));

  auto next = body_of(c.Get("/projects/" + id + "/next?annotator=a"));
  CHECK(next["status"] == "assigned");
  CHECK(next["segment"]["segment_id"] == "s000");
  CHECK(next["version"] == 0);

  json save = {{"spans", {span(0, 4, "major"), span(5, 10)}}, {"expected_version", 0}};
  auto r = put(c, id, "s000", "a", save);
  REQUIRE(r->status == 200);
  CHECK(body_of(r)["version"] == 1);
  CHECK(body_of(r)["spans"].size() == 2);
  CHECK(body_of(r)["spans"][0]["span_id"] == "s000/a/1");

  // A second tab still holding version 0.
  json stale = {{"spans", {span(0, 2)}}, {"expected_version", 0}};
  r = put(c, id, "s000", "a", stale);
  CHECK(r->status == 409);
  CHECK(body_of(r)["current"]["version"] == 1);
  CHECK(body_of(r)["current"]["spans"].size() == 2);
  auto stored = body_of(c.Get("/projects/" + id + "/segments/s000/annotations?annotator=a"));
  CHECK(stored["version"] == 1);
  CHECK(stored["spans"].size() == 2);

  // Invalid spans are rejected and nothing changes.
  json bad = {{"spans", {span(0, 999)}}, {"expected_version", 1}};
  r = put(c, id, "s000", "a", bad);
  CHECK(r->status == 400);
  CHECK(body_of(r)["error"]["message"].get<std::string>().find("out of bounds") != std::string::npos);
  json wrong_path = {{"spans", {span(0, 2, "minor", {{"category", "semantics"}})}}, {"expected_version", 1}};
  CHECK(put(c, id, "s000", "a", wrong_path)->status == 400);
  CHECK(body_of(c.Get("/projects/" + id + "/segments/s000/annotations?annotator=a"))["version"] == 1);

  next = body_of(c.Get("/projects/" + id + "/next?annotator=a"));
  CHECK(next["segment"]["segment_id"] == "s001");
  json error_free = {{"spans", json::array()}, {"note", "source audio unclear"}, {"expected_version", 0}};
  CHECK(put(c, id, "s001", "a", error_free)->status == 200);
  next = body_of(c.Get("/projects/" + id + "/next?annotator=a"));
  CHECK(next["status"] == "complete");
  CHECK(next["done"] == 2);

  auto progress = body_of(c.Get("/projects/" + id + "/progress"));
  CHECK(progress["annotators"][0]["assigned"] == 2);
  CHECK(progress["annotators"][0]["done"] == 2);
  CHECK(progress["annotators"][0]["spans"] == 2);
  CHECK(progress["annotators"][0]["flagged"] == 1);

  CHECK(c.Get("/projects/" + id + "/next?annotator=zed")->status == 404);
  CHECK(c.Get("/projects/nope/next?annotator=a")->status == 404);
  CHECK(c.Get("/projects/" + id + "/next")->status == 400);
  CHECK(put(c, id, "s999", "a", save)->status == 404);
}

TEST_CASE("client tokens make saves idempotent") {
  testing::TempDir dir;
  Running srv(dir.str());
  auto& c = srv.client();
  const auto id = create(c, project_payload(1, {"a"}));
  json save = {{"spans", {span(0, 3)}}, {"expected_version", 0}, {"client_token", "t-1"}};
  auto first = put(c, id, "s000", "a", save);
  REQUIRE(first->status == 200);
  auto retry = put(c, id, "s000", "a", save);
  REQUIRE(retry->status == 200);
  CHECK(body_of(retry)["replayed"] == true);
  CHECK(body_of(retry)["version"] == 1);
  json other = save;
  other["spans"] = json::array();
  CHECK(put(c, id, "s000", "a", other)->status == 409);
}

TEST_CASE("layer enforcement") {
  testing::TempDir dir;
  Running srv(dir.str());
  auto& c = srv.client();
  json payload = project_payload(1, {"a"});
  payload["layer"] = "lightweight";
  const auto id = create(c, payload);
  json deep = {{"spans", {span(0, 2)}}, {"expected_version", 0}};
  CHECK(put(c, id, "s000", "a", deep)->status == 400);
  json light = {{"spans", {span(0, 2, "minor", {{"category", "semantics"}, {"error_type", "lexical-semantics"}})}},
                {"expected_version", 0}};
  CHECK(put(c, id, "s000", "a", light)->status == 200);

  const auto diag = create(c, project_payload(1, {"a"}));
  CHECK(put(c, diag, "s000", "a", light)->status == 400);
  CHECK(put(c, diag, "s000", "a", deep)->status == 200);
}

TEST_CASE("bearer tokens") {
  testing::TempDir dir;
  Running srv(dir.str(), "admin-secret");
  auto& c = srv.client();
  json payload = project_payload(2, {{{"annotator_id", "a"}, {"token", "tok-a"}}, {{"annotator_id", "b"}, {"token", "tok-b"}}});
  CHECK(c.Post("/projects", payload.dump(), "application/json")->status == 401);
  CHECK(c.Post("/projects", auth("tok-a"), payload.dump(), "application/json")->status == 403);
  const auto id = create(c, payload, auth("admin-secret"));

  CHECK(c.Get("/projects/" + id + "/next?annotator=a")->status == 401);
  CHECK(c.Get("/projects/" + id + "/next?annotator=a", auth("tok-b"))->status == 403);
  CHECK(c.Get("/projects/" + id + "/next?annotator=a", auth("tok-a"))->status == 200);
  json save = {{"spans", json::array()}, {"expected_version", 0}};
  CHECK(put(c, id, "s000", "a", save, auth("tok-b"))->status == 403);
  CHECK(put(c, id, "s000", "a", save, auth("tok-a"))->status == 200);
  CHECK(c.Get("/projects/" + id + "/export")->status == 401);
  CHECK(c.Get("/projects/" + id + "/export", auth("tok-b"))->status == 200);
  CHECK(c.Get("/projects/" + id + "/progress", auth("admin-secret"))->status == 200);
  CHECK(c.Get("/taxonomies/LQM")->status == 200);
}

TEST_CASE("taxonomy endpoint") {
  testing::TempDir dir;
  Running srv(dir.str());
  auto& c = srv.client();
  const auto lqm = body_of(c.Get("/taxonomies/lqm"));
  CHECK(lqm["name"] == "LQM");
  auto file = c.Get("/taxonomies/MQM?format=file");
  REQUIRE(file->status == 200);
  CHECK(TaxonomySchema::parse(file->body).structurally_equal(builtin_mqm()));
  CHECK(c.Get("/taxonomies/other")->status == 404);
}

TEST_CASE("doubly annotated share follows the overlap fraction") {
  testing::TempDir dir;
  Running srv(dir.str());
  auto& c = srv.client();
  for (const std::size_t roster : {2u, 3u, 6u}) {
    const std::size_t n = 50;
    json annotators = json::array();
    for (std::size_t i = 0; i < roster; ++i) annotators.push_back("ann" + std::to_string(i));
    const auto id = create(c, project_payload(n, annotators, 0.4));
    std::map<std::string, std::set<std::string>> got;
    for (const auto& a : annotators) {
      const std::string ann = a.get<std::string>();
      for (;;) {
        auto next = body_of(c.Get("/projects/" + id + "/next?annotator=" + ann));
        if (next["status"] == "complete") break;
        const std::string seg = next["segment"]["segment_id"];
        got[ann].insert(seg);
        REQUIRE(put(c, id, seg, ann, {{"spans", json::array()}, {"expected_version", 0}})->status == 200);
      }
    }
    std::map<std::string, std::size_t> times;
    for (const auto& [ann, segs] : got) {
      for (const auto& s : segs) ++times[s];
    }
    CHECK(times.size() == n);
    std::size_t doubly = 0;
    for (const auto& [s, k] : times) {
      CHECK(k <= 2);
      doubly += k == 2;
    }
    CHECK(doubly == 20);
    if (roster == 2) {
      std::vector<std::string> both;
      std::set_intersection(got["ann0"].begin(), got["ann0"].end(), got["ann1"].begin(), got["ann1"].end(),
                            std::back_inserter(both));
      CHECK(both.size() == 20);
      CHECK(both.front() == "s000");
      CHECK(both.back() == "s019");
    }
  }
}

TEST_CASE("export round trip and fixed point") {
  testing::TempDir dir;
  std::string first_segments, first_annotations;
  std::string id;
  json saved_a, saved_b;
  {
    Running srv(dir.str());
    auto& c = srv.client();
    id = create(c, project_payload(4, {"a", "b"}, 1.0));
    CHECK(body_of(c.Get("/projects/" + id + "/export"))["annotations_jsonl"] == "");

    saved_a = {{"spans", {span(0, 4, "critical"), span(5, 10)}}, {"note", "check"}, {"expected_version", 0}};
    saved_b = {{"spans", {span(1, 4, "major")}}, {"expected_version", 0}};
    REQUIRE(put(c, id, "s000", "a", saved_a)->status == 200);
    REQUIRE(put(c, id, "s000", "b", saved_b)->status == 200);
    REQUIRE(put(c, id, "s001", "a", {{"spans", json::array()}, {"expected_version", 0}})->status == 200);
    REQUIRE(put(c, id, "s001", "b", {{"spans", {span(2, 6)}}, {"expected_version", 0}})->status == 200);

    first_segments = c.Get("/projects/" + id + "/export?file=segments")->body;
    first_annotations = c.Get("/projects/" + id + "/export?file=annotations")->body;
    CHECK(c.Get("/projects/" + id + "/export?file=annotations")->body == first_annotations);

    const Corpus corpus = read_segments(first_segments);
    const auto sets = read_annotations(first_annotations, corpus, builtin_lqm());
    REQUIRE(sets.size() == 2);
    CHECK(sets[0].spans.size() == 2);
    CHECK(sets[0].spans[0].severity == Severity::critical);
    CHECK(sets[0].spans[1].start == 5);
    CHECK(sets[0].segment_notes.at("s000") == "check");
    CHECK(sets[0].segments_covered == std::set<std::string>{"s000", "s001"});
    CHECK(sets[1].spans.size() == 2);

    // The export feeds agreement directly.
    const auto report = agreement_report(sets[0], sets[1], corpus, builtin_lqm());
    CHECK(report.n_items == 2);

    // Import into a new project, export again.
    json imported = {{"segments", json::array()}, {"annotators", {"a", "b"}}, {"annotations", json::array()}};
    for (const auto& line : {first_segments, first_annotations}) {
      std::size_t pos = 0;
      while (pos < line.size()) {
        const auto nl = line.find('\n', pos);
        const auto rec = json::parse(line.substr(pos, nl - pos));
        (rec.contains("target_text") ? imported["segments"] : imported["annotations"]).push_back(rec);
        pos = nl + 1;
      }
    }
    const auto copy = create(c, imported);
    CHECK(c.Get("/projects/" + copy + "/export?file=segments")->body == first_segments);
    CHECK(c.Get("/projects/" + copy + "/export?file=annotations")->body == first_annotations);
  }
  // Byte-stable across a restart.
  Running srv(dir.str());
  CHECK(srv.client().Get("/projects/" + id + "/export?file=segments")->body == first_segments);
  CHECK(srv.client().Get("/projects/" + id + "/export?file=annotations")->body == first_annotations);
}

TEST_CASE("store recovery: compaction and torn log tail") {
  testing::TempDir dir;
  std::string id;
  std::map<std::string, json> expected;
  {
    server::Store store(dir.str());
    id = store.create(project_payload(40, {"a"})).first;
    auto* p = store.find(id);
    testing::Rng rng(3);
    std::map<std::string, std::uint64_t> versions;
    for (std::uint64_t i = 0; i < server::Project::kCompactEvery + 50; ++i) {
      char seg[16];
      std::snprintf(seg, sizeof seg, "s%03zu", testing::uniform(rng, 0, 39));
      server::SaveRequest r;
      r.segment_id = seg;
      r.annotator_id = "a";
      r.expected_version = versions[seg];
      const std::size_t start = testing::uniform(rng, 0, 5);
      r.spans = json::array({span(start, start + testing::uniform(rng, 1, 4))});
      const auto out = p->save(r);
      REQUIRE(out.kind == server::SaveOutcome::Kind::saved);
      versions[seg] = out.version;
    }
    for (const auto& [key, k] : p->snapshot()->keys) expected[key.first] = {k->version, span_to_json(k->spans[0])};
  }
  const auto project_dir = dir.path() / "projects" / id;
  CHECK(std::filesystem::file_size(project_dir / "log.jsonl") > 0);
  {
    std::ofstream torn(project_dir / "log.jsonl", std::ios::app | std::ios::binary);
    torn << R"({"seq":99999,"segment_id":"s0)";
  }
  server::Store reopened(dir.str());
  auto* p = reopened.find(id);
  REQUIRE(p != nullptr);
  const auto state = p->snapshot();
  REQUIRE(state->keys.size() == expected.size());
  for (const auto& [key, k] : state->keys) {
    CHECK(json{k->version, span_to_json(k->spans[0])} == expected[key.first]);
  }
  // The torn record was cut away; the log is clean again.
  const auto text = read_file((project_dir / "log.jsonl").string());
  CHECK((text.empty() || text.back() == '\n'));
}

TEST_CASE("concurrent writers") {
  testing::TempDir dir;
  Running srv(dir.str());
  const auto id = create(srv.client(), project_payload(8, {"a", "b", "c", "d"}));
  std::atomic<int> ok{0}, conflicts{0};
  std::vector<std::thread> threads;
  // Different keys never contend; the same key admits exactly one writer per version.
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", srv.client().port());
      const std::string ann = std::string(1, static_cast<char>('a' + t % 4));
      auto r = put(c, id, "s000", ann, {{"spans", {span(0, 1 + t % 3)}}, {"expected_version", 0}});
      if (r && r->status == 200) ++ok;
      if (r && r->status == 409) ++conflicts;
    });
  }
  for (auto& th : threads) th.join();
  CHECK(ok == 4);
  CHECK(conflicts == 4);
}
