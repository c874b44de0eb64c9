#include "server/http.hpp"

#include "httplib.h"

#include "error.hpp"
#include "server/store.hpp"
#include "taxonomy.hpp"

namespace lqm::server {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
    case ErrorKind::usage: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::io:
    case ErrorKind::internal: return 500;
  }
  return 500;
}

std::string_view kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::usage: return "usage";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::io: return "io";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

void send(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  ordered_json body;
  body["error"] = {{"kind", kind}, {"message", message}};
  send(res, status, body);
}

bool same_token(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  return diff == 0;
}

std::optional<std::string> bearer(const httplib::Request& req) {
  const auto h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  return h.substr(prefix.size());
}

ordered_json key_state_json(const std::string& segment_id, const std::string& annotator_id,
                            const std::shared_ptr<const KeyState>& k) {
  ordered_json j;
  j["segment_id"] = segment_id;
  j["annotator_id"] = annotator_id;
  j["version"] = k ? k->version : 0;
  ordered_json spans = ordered_json::array();
  if (k) {
    for (const auto& s : k->spans) spans.push_back(span_to_json(s));
  }
  j["spans"] = std::move(spans);
  j["note"] = k && k->note ? ordered_json(*k->note) : ordered_json(nullptr);
  return j;
}

// Thrown from handlers to produce a non-JSON-error status.
struct HttpFailure {
  int status;
  std::string kind;
  std::string message;
};

}  // namespace

struct HttpServer::Impl {
  ServerOptions options;
  std::unique_ptr<Store> store;
  httplib::Server http;

  bool is_admin(const httplib::Request& req) const {
    const auto token = bearer(req);
    return options.admin_token && token && same_token(*token, *options.admin_token);
  }

  Project& project(const httplib::Request& req) const {
    Project* p = store->find(req.path_params.at("id"));
    if (p == nullptr) fail(ErrorKind::not_found, "unknown project '" + req.path_params.at("id") + "'");
    return *p;
  }

  std::string annotator_param(const httplib::Request& req) const {
    if (!req.has_param("annotator") || req.get_param_value("annotator").empty()) {
      fail(ErrorKind::usage, "missing 'annotator' query parameter");
    }
    return req.get_param_value("annotator");
  }

  void authorize_annotator(const Project& p, const std::string& annotator, const httplib::Request& req) const {
    if (is_admin(req)) return;
    const RosterEntry* m = p.config().member(annotator);
    if (m == nullptr) fail(ErrorKind::not_found, "annotator '" + annotator + "' is not on the roster");
    if (!m->token && !options.admin_token) return;
    const auto token = bearer(req);
    if (!token) throw HttpFailure{401, "unauthorized", "missing bearer token"};
    if (!m->token || !same_token(*token, *m->token)) {
      throw HttpFailure{403, "forbidden", "token does not belong to annotator '" + annotator + "'"};
    }
  }

  void authorize_reader(const Project& p, const httplib::Request& req) const {
    if (is_admin(req)) return;
    const auto token = bearer(req);
    bool any_token = options.admin_token.has_value();
    for (const auto& m : p.config().roster) {
      if (!m.token) continue;
      any_token = true;
      if (token && same_token(*token, *m.token)) return;
    }
    if (!any_token) return;
    throw HttpFailure{token ? 403 : 401, token ? "forbidden" : "unauthorized",
                      token ? "token is not valid for this project" : "missing bearer token"};
  }

  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const HttpFailure& f) {
        send_error(res, f.status, f.kind, f.message);
      } catch (const Error& e) {
        send_error(res, status_for(e.kind()), kind_name(e.kind()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "validation", std::string("malformed JSON: ") + e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    http.set_payload_max_length(std::size_t{256} << 20);

    http.Post("/projects", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (options.admin_token && !is_admin(req)) {
        throw HttpFailure{bearer(req) ? 403 : 401, "unauthorized", "project creation needs the admin token"};
      }
      const auto [id, created] = store->create(json::parse(req.body));
      send(res, created ? 201 : 200, ordered_json{{"project_id", id}, {"created", created}});
    }));

    http.Get("/projects/:id/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
      Project& p = project(req);
      const std::string annotator = annotator_param(req);
      authorize_annotator(p, annotator, req);
      const auto state = p.snapshot();
      const auto& assigned = p.assignment(annotator);
      std::size_t done = 0;
      const std::string* next = nullptr;
      std::size_t position = 0;
      for (std::size_t i = 0; i < assigned.size(); ++i) {
        const auto k = state->find({assigned[i], annotator});
        if (k && k->version > 0) {
          ++done;
        } else if (next == nullptr) {
          next = &assigned[i];
          position = i;
        }
      }
      ordered_json body;
      if (next == nullptr) {
        body["status"] = "complete";
        body["done"] = done;
        body["assigned"] = assigned.size();
      } else {
        body["status"] = "assigned";
        body["position"] = position;
        body["done"] = done;
        body["assigned"] = assigned.size();
        body["segment"] = segment_to_json(*p.corpus().find(*next));
        const auto k = key_state_json(*next, annotator, state->find({*next, annotator}));
        body["version"] = k["version"];
        body["spans"] = k["spans"];
        body["note"] = k["note"];
      }
      send(res, 200, body);
    }));

    http.Get("/projects/:id/segments/:sid/annotations",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               Project& p = project(req);
               const std::string annotator = annotator_param(req);
               authorize_annotator(p, annotator, req);
               const auto& sid = req.path_params.at("sid");
               if (p.corpus().find(sid) == nullptr) fail(ErrorKind::not_found, "unknown segment '" + sid + "'");
               send(res, 200, key_state_json(sid, annotator, p.snapshot()->find({sid, annotator})));
             }));

    http.Put("/projects/:id/segments/:sid/annotations",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               Project& p = project(req);
               const std::string annotator = annotator_param(req);
               authorize_annotator(p, annotator, req);
               const json body = json::parse(req.body);
               if (!body.is_object()) fail_validation("request body must be a JSON object");
               for (const auto& [key, value] : body.items()) {
                 if (key != "spans" && key != "note" && key != "expected_version" && key != "client_token") {
                   fail_validation("unknown field '" + key + "'");
                 }
               }
               SaveRequest r;
               r.segment_id = req.path_params.at("sid");
               r.annotator_id = annotator;
               if (!body.contains("expected_version") || !body["expected_version"].is_number_unsigned()) {
                 fail_validation("'expected_version' must be a non-negative integer");
               }
               r.expected_version = body["expected_version"].get<std::uint64_t>();
               r.spans = body.value("spans", json::array());
               if (body.contains("note") && !body["note"].is_null()) {
                 if (!body["note"].is_string()) fail_validation("'note' must be a string");
                 r.note = body["note"].get<std::string>();
               }
               if (body.contains("client_token")) {
                 if (!body["client_token"].is_string()) fail_validation("'client_token' must be a string");
                 r.client_token = body["client_token"].get<std::string>();
               }
               const SaveOutcome out = p.save(r);
               auto state = key_state_json(r.segment_id, annotator, out.current);
               if (out.kind == SaveOutcome::Kind::conflict) {
                 ordered_json err;
                 err["error"] = {{"kind", "conflict"},
                                 {"message", "expected version " + std::to_string(r.expected_version) +
                                                 " but the stored version is " + std::to_string(out.version)}};
                 err["current"] = std::move(state);
                 send(res, 409, err);
                 return;
               }
               state["replayed"] = out.kind == SaveOutcome::Kind::replayed;
               send(res, 200, state);
             }));

    http.Get("/projects/:id/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
      Project& p = project(req);
      authorize_reader(p, req);
      const ExportFiles files = p.export_files();
      const std::string which = req.has_param("file") ? req.get_param_value("file") : "";
      if (which == "segments") {
        res.set_content(files.segments_jsonl, "application/x-ndjson");
      } else if (which == "annotations") {
        res.set_content(files.annotations_jsonl, "application/x-ndjson");
      } else if (which.empty()) {
        send(res, 200, ordered_json{{"segments_jsonl", files.segments_jsonl},
                                    {"annotations_jsonl", files.annotations_jsonl}});
      } else {
        fail(ErrorKind::usage, "'file' must be 'segments' or 'annotations'");
      }
    }));

    http.Get("/projects/:id/progress", guarded([this](const httplib::Request& req, httplib::Response& res) {
      Project& p = project(req);
      authorize_reader(p, req);
      ordered_json rows = ordered_json::array();
      for (const auto& a : p.progress()) {
        rows.push_back({{"annotator_id", a.annotator_id},
                        {"assigned", a.assigned},
                        {"done", a.done},
                        {"spans", a.spans},
                        {"flagged", a.flagged}});
      }
      send(res, 200,
           ordered_json{{"project_id", p.config().project_id},
                        {"layer", std::string(to_string(p.config().layer))},
                        {"segments", p.corpus().size()},
                        {"annotators", std::move(rows)}});
    }));

    http.Get("/taxonomies/:name", guarded([](const httplib::Request& req, httplib::Response& res) {
      const TaxonomySchema* schema = builtin_taxonomy(req.path_params.at("name"));
      if (schema == nullptr) fail(ErrorKind::not_found, "unknown taxonomy '" + req.path_params.at("name") + "'");
      if (req.has_param("format") && req.get_param_value("format") == "file") {
        res.set_content(schema->serialize(), "text/plain; charset=utf-8");
        return;
      }
      send(res, 200, schema->to_json());
    }));

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, "not_found", "no such endpoint");
    });
  }
};

HttpServer::HttpServer(ServerOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind() {
  impl_->store = std::make_unique<Store>(impl_->options.data_dir);
  impl_->routes();
  int port = 0;
  if (impl_->options.port == 0) {
    port = impl_->http.bind_to_any_port(impl_->options.host);
  } else if (impl_->http.bind_to_port(impl_->options.host, impl_->options.port)) {
    port = impl_->options.port;
  } else {
    port = -1;
  }
  if (port <= 0) {
    fail(ErrorKind::io, "cannot listen on " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  return port;
}

void HttpServer::run() { impl_->http.listen_after_bind(); }

void HttpServer::stop() { impl_->http.stop(); }

}  // namespace lqm::server
