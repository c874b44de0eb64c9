#include "lqm/lqm.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "agreement.hpp"
#include "analysis.hpp"
#include "autometric.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "reports.hpp"
#include "scoring.hpp"
#include "server/http.hpp"
#include "server/store.hpp"
#include "taxonomy.hpp"

struct lqm_taxonomy {
  std::shared_ptr<const lqm::TaxonomySchema> schema;
};

struct lqm_corpus {
  lqm::Corpus corpus;
};

struct lqm_annotations {
  std::vector<lqm::AnnotationSet> sets;
};

struct lqm_server {
  std::unique_ptr<lqm::server::HttpServer> server;
};

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

thread_local std::string last_error;

lqm_status status_of(lqm::ErrorKind kind) {
  switch (kind) {
    case lqm::ErrorKind::validation: return LQM_ERR_VALIDATION;
    case lqm::ErrorKind::usage: return LQM_ERR_USAGE;
    case lqm::ErrorKind::io: return LQM_ERR_IO;
    case lqm::ErrorKind::not_found: return LQM_ERR_NOT_FOUND;
    case lqm::ErrorKind::conflict: return LQM_ERR_CONFLICT;
    case lqm::ErrorKind::internal: return LQM_ERR_INTERNAL;
  }
  return LQM_ERR_INTERNAL;
}

template <typename Fn>
lqm_status guard(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return LQM_OK;
  } catch (const lqm::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    last_error = std::string("malformed JSON: ") + e.what();
    return LQM_ERR_VALIDATION;
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return LQM_ERR_IO;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return LQM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return LQM_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) lqm::fail(lqm::ErrorKind::usage, std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void emit(const ordered_json& j, char** out) {
  require(out, "out");
  *out = dup(j.dump(2) + "\n");
}

json parse_options(const char* options_json) {
  if (options_json == nullptr || *options_json == '\0') return json::object();
  json j = json::parse(options_json);
  if (!j.is_object()) lqm::fail(lqm::ErrorKind::usage, "options must be a JSON object");
  return j;
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) lqm::fail(lqm::ErrorKind::usage, std::string("option '") + key + "' must be a string");
  return j[key].get<std::string>();
}

lqm::WeightScheme weights_from(const json& opts) {
  if (const auto path = opt_string(opts, "weights_path")) {
    const std::string text = lqm::read_file(*path);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      lqm::fail_validation(*path + ": malformed JSON: " + e.what());
    }
    try {
      return lqm::WeightScheme::from_json(j);
    } catch (const lqm::Error& e) {
      lqm::fail(e.kind(), *path + ": " + e.what());
    }
  }
  if (opts.contains("weights")) return lqm::WeightScheme::from_json(opts["weights"]);
  return {};
}

const std::vector<lqm::AnnotationSet>& sets_of(const lqm_annotations* a) {
  static const std::vector<lqm::AnnotationSet> none;
  return a ? a->sets : none;
}

}  // namespace

extern "C" {

const char* lqm_version(void) { return "1.0.0"; }

const char* lqm_last_error(void) { return last_error.c_str(); }

const char* lqm_status_name(lqm_status status) {
  switch (status) {
    case LQM_OK: return "ok";
    case LQM_ERR_VALIDATION: return "validation";
    case LQM_ERR_USAGE: return "usage";
    case LQM_ERR_IO: return "io";
    case LQM_ERR_NOT_FOUND: return "not_found";
    case LQM_ERR_CONFLICT: return "conflict";
    case LQM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void lqm_string_free(char* s) { std::free(s); }

lqm_status lqm_taxonomy_builtin(const char* name, lqm_taxonomy** out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    const lqm::TaxonomySchema* s = lqm::builtin_taxonomy(name);
    if (s == nullptr) lqm::fail(lqm::ErrorKind::not_found, std::string("unknown taxonomy '") + name + "'");
    // Built-ins live for the whole process.
    *out = new lqm_taxonomy{std::shared_ptr<const lqm::TaxonomySchema>(s, [](const lqm::TaxonomySchema*) {})};
  });
}

lqm_status lqm_taxonomy_parse(const char* text, size_t len, lqm_taxonomy** out) {
  return guard([&] {
    require(text, "text");
    require(out, "out");
    *out = new lqm_taxonomy{
        std::make_shared<const lqm::TaxonomySchema>(lqm::TaxonomySchema::parse(std::string_view(text, len)))};
  });
}

lqm_status lqm_taxonomy_load(const char* path, lqm_taxonomy** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    const std::string text = lqm::read_file(path);
    try {
      *out = new lqm_taxonomy{std::make_shared<const lqm::TaxonomySchema>(lqm::TaxonomySchema::parse(text))};
    } catch (const lqm::Error& e) {
      lqm::fail(e.kind(), std::string(path) + ": " + e.what());
    }
  });
}

lqm_status lqm_taxonomy_to_json(const lqm_taxonomy* t, char** out) {
  return guard([&] {
    require(t, "taxonomy");
    emit(t->schema->to_json(), out);
  });
}

void lqm_taxonomy_free(lqm_taxonomy* t) { delete t; }

lqm_status lqm_corpus_parse(const char* jsonl, size_t len, const char* source_name, lqm_corpus** out) {
  return guard([&] {
    require(jsonl, "jsonl");
    require(out, "out");
    *out = new lqm_corpus{lqm::read_segments(std::string_view(jsonl, len), source_name ? source_name : "segments")};
  });
}

lqm_status lqm_corpus_load(const char* path, lqm_corpus** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new lqm_corpus{lqm::read_segments(lqm::read_file(path), path)};
  });
}

size_t lqm_corpus_size(const lqm_corpus* c) { return c ? c->corpus.size() : 0; }

void lqm_corpus_free(lqm_corpus* c) { delete c; }

lqm_status lqm_annotations_parse(const char* jsonl, size_t len, const char* source_name, const lqm_corpus* c,
                                 const lqm_taxonomy* t, lqm_annotations** out) {
  return guard([&] {
    require(jsonl, "jsonl");
    require(c, "corpus");
    require(t, "taxonomy");
    require(out, "out");
    *out = new lqm_annotations{lqm::read_annotations(std::string_view(jsonl, len), c->corpus, *t->schema,
                                                     source_name ? source_name : "annotations")};
  });
}

lqm_status lqm_annotations_load(const char* path, const lqm_corpus* c, const lqm_taxonomy* t,
                                lqm_annotations** out) {
  return guard([&] {
    require(path, "path");
    require(c, "corpus");
    require(t, "taxonomy");
    require(out, "out");
    *out = new lqm_annotations{lqm::read_annotations(lqm::read_file(path), c->corpus, *t->schema, path)};
  });
}

size_t lqm_annotations_span_count(const lqm_annotations* a) {
  std::size_t n = 0;
  for (const auto& s : sets_of(a)) n += s.spans.size();
  return n;
}

void lqm_annotations_free(lqm_annotations* a) { delete a; }

lqm_status lqm_validate_summary(const lqm_corpus* c, const lqm_annotations* a, char** out) {
  return guard([&] {
    require(c, "corpus");
    ordered_json j;
    j["valid"] = true;
    j["segments"] = c->corpus.size();
    std::map<std::string, std::size_t> directions;
    for (const auto& s : c->corpus.segments()) ++directions[s.direction()];
    j["directions"] = directions;
    if (a != nullptr) {
      std::set<std::string> erroneous;
      ordered_json annotators = ordered_json::array();
      for (const auto& set : a->sets) {
        for (const auto& s : set.spans) erroneous.insert(s.segment_id);
        annotators.push_back({{"annotator_id", set.annotator_id},
                              {"spans", set.spans.size()},
                              {"segments_covered", set.segments_covered.size()},
                              {"notes", set.segment_notes.size()}});
      }
      j["spans"] = lqm_annotations_span_count(a);
      j["segments_with_errors"] = erroneous.size();
      j["annotators"] = std::move(annotators);
    }
    emit(j, out);
  });
}

lqm_status lqm_score(const lqm_corpus* c, const lqm_annotations* a, const char* options_json, char** out) {
  return guard([&] {
    require(c, "corpus");
    const json opts = parse_options(options_json);
    lqm::ScoreOptions options;
    options.annotator = opt_string(opts, "annotator");
    options.covered_only = opts.value("covered_only", false);
    emit(lqm::to_json(lqm::score_report(c->corpus, sets_of(a), weights_from(opts), options)), out);
  });
}

lqm_status lqm_iaa(const lqm_corpus* c, const lqm_annotations* a, const lqm_taxonomy* t, const char* annotator_a,
                   const char* annotator_b, size_t min_overlap, char** out) {
  return guard([&] {
    require(c, "corpus");
    require(a, "annotations");
    require(t, "taxonomy");
    require(annotator_a, "annotator_a");
    require(annotator_b, "annotator_b");
    if (std::string_view(annotator_a) == annotator_b) {
      lqm::fail(lqm::ErrorKind::usage, "agreement needs two different annotators");
    }
    if (min_overlap == 0) lqm::fail(lqm::ErrorKind::usage, "min_overlap must be at least 1");
    auto find = [&](const char* id) -> const lqm::AnnotationSet& {
      for (const auto& s : a->sets) {
        if (s.annotator_id == id) return s;
      }
      lqm::fail(lqm::ErrorKind::usage, std::string("annotator '") + id + "' has no annotations");
    };
    emit(lqm::to_json(lqm::agreement_report(find(annotator_a), find(annotator_b), c->corpus, *t->schema,
                                            min_overlap)),
         out);
  });
}

lqm_status lqm_bleu(const lqm_corpus* c, const char* hyp_field, const char* tokenizer, int lowercase, char** out) {
  return guard([&] {
    require(c, "corpus");
    const auto tok = lqm::TokenizerSpec::parse(tokenizer ? tokenizer : "whitespace", lowercase != 0);
    emit(lqm::to_json(lqm::corpus_bleu_table(c->corpus, hyp_field ? hyp_field : "target_text", tok)), out);
  });
}

lqm_status lqm_analyze(const lqm_corpus* c, const lqm_annotations* a, const lqm_taxonomy* t, const char* report,
                       const char* options_json, const char* bleu_json, char** out) {
  return guard([&] {
    require(c, "corpus");
    require(t, "taxonomy");
    require(report, "report");
    const json opts = parse_options(options_json);
    lqm::ScopeFilter filter;
    filter.direction = opt_string(opts, "direction");
    filter.model = opt_string(opts, "model");
    filter.dialect = opt_string(opts, "dialect");
    filter.annotator = opt_string(opts, "annotator");
    const lqm::WeightScheme scheme = weights_from(opts);
    const auto& sets = sets_of(a);
    const std::string kind = report;

    ordered_json j;
    j["report"] = kind;
    j["scope"] = filter.to_json();
    if (kind == "dist") {
      const auto level_name = opt_string(opts, "level").value_or("subcategory");
      const auto level = lqm::parse_distribution_level(level_name);
      if (!level) lqm::fail(lqm::ErrorKind::usage, "unknown level '" + level_name + "'");
      j["distribution"] = lqm::to_json(lqm::error_distribution(c->corpus, sets, *t->schema, *level, filter, scheme));
    } else if (kind == "attrib") {
      const auto rows = lqm::dashboard(c->corpus, sets, *t->schema, filter, scheme);
      j["dashboard"] = lqm::to_json(std::span<const lqm::DashboardRow>(rows));
    } else if (kind == "corr" || kind == "buckets") {
      lqm::ScoreOptions so;
      so.annotator = filter.annotator;
      const auto scores = lqm::score_report(c->corpus, sets, scheme, so);
      j["scheme"] = scheme.to_json();
      if (kind == "buckets") {
        j["buckets"] = lqm::to_json(lqm::length_buckets(c->corpus, scores, filter));
      } else {
        if (bleu_json == nullptr) lqm::fail(lqm::ErrorKind::usage, "the corr report needs BLEU scores");
        const json bleu = json::parse(bleu_json);
        const auto automatic = lqm::bleu_scores_from_json(bleu);
        const auto aligned = lqm::align_scores(c->corpus, scores, automatic, filter);
        const bool exact = opts.value("exact", false);
        j["automatic_metric"] = {{"metric", bleu.value("metric", "bleu")},
                                 {"tokenizer", bleu.value("tokenizer", "")},
                                 {"hyp_field", bleu.value("hyp_field", "")}};
        j["unpaired_lqm"] = aligned.unpaired_human;
        j["unpaired_automatic"] = aligned.unpaired_automatic;
        j["correlation"] = lqm::to_json(lqm::correlate(aligned.automatic, aligned.human, exact));
      }
    } else {
      lqm::fail(lqm::ErrorKind::usage, "unknown report '" + kind + "' (expected dist, attrib, corr or buckets)");
    }
    emit(j, out);
  });
}

lqm_status lqm_render_table(const char* kind, const char* report_json, char** out) {
  return guard([&] {
    require(kind, "kind");
    require(report_json, "report_json");
    require(out, "out");
    const auto j = ordered_json::parse(report_json);
    *out = dup(lqm::reports::render(kind, j));
  });
}

lqm_status lqm_write_file(const char* path, const char* data, size_t len) {
  return guard([&] {
    require(path, "path");
    require(data, "data");
    lqm::write_file_atomic(path, std::string_view(data, len));
  });
}

lqm_status lqm_export_project(const char* data_dir, const char* project_id, const char* out_dir) {
  return guard([&] {
    require(data_dir, "data_dir");
    require(project_id, "project_id");
    require(out_dir, "out_dir");
    const auto dir = std::filesystem::path(data_dir) / "projects" / project_id;
    if (!std::filesystem::is_directory(dir)) {
      lqm::fail(lqm::ErrorKind::not_found, std::string("unknown project '") + project_id + "' in " + data_dir);
    }
    const auto project = lqm::server::Project::open(dir.string());
    const auto files = project->export_files();
    std::filesystem::create_directories(out_dir);
    lqm::write_file_atomic((std::filesystem::path(out_dir) / "segments.jsonl").string(), files.segments_jsonl);
    lqm::write_file_atomic((std::filesystem::path(out_dir) / "annotations.jsonl").string(), files.annotations_jsonl);
  });
}

lqm_status lqm_server_create(const char* options_json, lqm_server** out) {
  return guard([&] {
    require(out, "out");
    const json opts = parse_options(options_json);
    lqm::server::ServerOptions o;
    const auto dir = opt_string(opts, "data_dir");
    if (!dir) lqm::fail(lqm::ErrorKind::usage, "server needs a data_dir");
    o.data_dir = *dir;
    o.host = opt_string(opts, "host").value_or("127.0.0.1");
    o.port = opts.value("port", 8080);
    if (o.port < 0 || o.port > 65535) lqm::fail(lqm::ErrorKind::usage, "port out of range");
    o.admin_token = opt_string(opts, "admin_token");
    *out = new lqm_server{std::make_unique<lqm::server::HttpServer>(std::move(o))};
  });
}

lqm_status lqm_server_bind(lqm_server* s, int* port) {
  return guard([&] {
    require(s, "server");
    const int p = s->server->bind();
    if (port) *port = p;
  });
}

lqm_status lqm_server_run(lqm_server* s) {
  return guard([&] {
    require(s, "server");
    s->server->run();
  });
}

void lqm_server_stop(lqm_server* s) {
  if (s) s->server->stop();
}

void lqm_server_free(lqm_server* s) { delete s; }

}  // extern "C"
