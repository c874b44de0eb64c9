#include "server/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>

#include "error.hpp"
#include "unicode.hpp"

namespace lqm::server {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void fsync_path(const std::string& path, bool directory) {
  const int fd = ::open(path.c_str(), (directory ? O_RDONLY | O_DIRECTORY : O_RDONLY) | O_CLOEXEC);
  if (fd < 0) fail(ErrorKind::io, "cannot open '" + path + "' for sync");
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) fail(ErrorKind::io, "fsync failed on '" + path + "'");
}

void write_durable(const std::string& path, std::string_view content) {
  write_file_atomic(path, content);
  fsync_path(fs::path(path).parent_path().string(), true);
}

std::string required_str(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) fail_validation(where + ": '" + key + "' must be a string");
  return it->get<std::string>();
}

// Best effort: drop a partly written record so it is not replayed later.
void rollback_log(int fd, off_t size) {
  if (size >= 0 && ::ftruncate(fd, size) != 0) {
    std::cerr << "lqm: cannot roll back a partial log record\n";
  }
}

// Lightweight projects label category and error type only; diagnostic ones
// need a leaf.
bool layer_accepts(Layer layer, const TaxonomySchema& schema, const TaxonomyPath& path) {
  const PathCheck check = schema.check(path);
  if (layer == Layer::lightweight) return check.lightweight_complete && !path.subcategory;
  return check.diagnostic_complete;
}

ordered_json state_record(const Key& key, const KeyState& s) {
  ordered_json j;
  j["type"] = "state";
  j["segment_id"] = key.first;
  j["annotator_id"] = key.second;
  j["version"] = s.version;
  if (s.note) j["note"] = *s.note;
  ordered_json spans = ordered_json::array();
  for (const auto& sp : s.spans) spans.push_back(span_to_json(sp));
  j["spans"] = std::move(spans);
  return j;
}

std::vector<ErrorSpan> spans_from_records(const json& arr, const std::string& where) {
  std::vector<ErrorSpan> out;
  if (!arr.is_array()) fail_validation(where + ": 'spans' must be an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    std::string seg, ann;
    std::optional<std::string> note;
    const std::string w = where + ": spans[" + std::to_string(i) + "]";
    if (!arr[i].is_object()) fail_validation(w + ": expected a JSON object");
    auto span = parse_span_record(arr[i], w, &seg, &ann, &note);
    if (!span) fail_validation(w + ": record has no span fields");
    out.push_back(std::move(*span));
  }
  return out;
}

ProjectConfig parse_config(const json& j) {
  ProjectConfig c;
  c.project_id = required_str(j, "project_id", "project.json");
  c.taxonomy_name = required_str(j, "taxonomy", "project.json");
  c.layer = *parse_layer(required_str(j, "layer", "project.json"));
  for (const auto& r : j.at("annotators")) {
    RosterEntry e;
    e.annotator_id = r.at("annotator_id").get<std::string>();
    if (r.contains("token")) e.token = r.at("token").get<std::string>();
    c.roster.push_back(std::move(e));
  }
  c.overlap_fraction = j.at("overlap_fraction").get<double>();
  if (j.contains("client_token")) c.client_token = j.at("client_token").get<std::string>();
  c.payload_hash = j.at("payload_hash").get<std::string>();
  return c;
}

ordered_json config_json(const ProjectConfig& c) {
  ordered_json j;
  j["project_id"] = c.project_id;
  j["taxonomy"] = c.taxonomy_name;
  j["layer"] = std::string(to_string(c.layer));
  ordered_json roster = ordered_json::array();
  for (const auto& r : c.roster) {
    ordered_json e;
    e["annotator_id"] = r.annotator_id;
    if (r.token) e["token"] = *r.token;
    roster.push_back(std::move(e));
  }
  j["annotators"] = std::move(roster);
  j["overlap_fraction"] = c.overlap_fraction;
  if (c.client_token) j["client_token"] = *c.client_token;
  j["payload_hash"] = c.payload_hash;
  return j;
}

const std::set<std::string> kCreateFields = {"client_token", "taxonomy",         "layer",
                                             "segments",     "annotators",       "overlap_fraction",
                                             "annotations"};

}  // namespace

std::string digest(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const RosterEntry* ProjectConfig::member(std::string_view annotator_id) const {
  for (const auto& r : roster) {
    if (r.annotator_id == annotator_id) return &r;
  }
  return nullptr;
}

std::shared_ptr<const KeyState> ProjectState::find(const Key& key) const {
  const auto it = keys.find(key);
  return it == keys.end() ? nullptr : it->second;
}

std::unique_ptr<Project> Project::create(const std::string& dir, const std::string& project_id,
                                         const json& payload) {
  if (!payload.is_object()) fail_validation("project payload must be a JSON object");
  for (const auto& [key, value] : payload.items()) {
    if (!kCreateFields.count(key)) fail_validation("unknown field '" + key + "'");
  }
  ProjectConfig config;
  config.project_id = project_id;
  config.taxonomy_name = payload.value("taxonomy", std::string("LQM"));
  const TaxonomySchema* schema = builtin_taxonomy(config.taxonomy_name);
  if (schema == nullptr) fail_validation("unknown taxonomy '" + config.taxonomy_name + "'");
  config.taxonomy_name = schema->name();
  const auto layer = parse_layer(payload.value("layer", std::string("diagnostic")));
  if (!layer) fail_validation("layer must be 'lightweight' or 'diagnostic'");
  config.layer = *layer;
  if (payload.contains("client_token")) {
    if (!payload["client_token"].is_string()) fail_validation("'client_token' must be a string");
    config.client_token = payload["client_token"].get<std::string>();
  }
  if (payload.contains("overlap_fraction")) {
    const auto& f = payload["overlap_fraction"];
    if (!f.is_number() || f.get<double>() < 0.0 || f.get<double>() > 1.0) {
      fail_validation("'overlap_fraction' must be a number in [0, 1]");
    }
    config.overlap_fraction = f.get<double>();
  }

  const auto annotators = payload.find("annotators");
  if (annotators == payload.end() || !annotators->is_array() || annotators->empty()) {
    fail_validation("'annotators' must be a non-empty array");
  }
  for (std::size_t i = 0; i < annotators->size(); ++i) {
    const auto& a = (*annotators)[i];
    const std::string where = "annotators[" + std::to_string(i) + "]";
    RosterEntry e;
    if (a.is_string()) {
      e.annotator_id = a.get<std::string>();
    } else if (a.is_object()) {
      for (const auto& [key, value] : a.items()) {
        if (key != "annotator_id" && key != "token") fail_validation(where + ": unknown field '" + key + "'");
      }
      e.annotator_id = required_str(a, "annotator_id", where);
      if (a.contains("token")) e.token = required_str(a, "token", where);
    } else {
      fail_validation(where + ": expected a string or an object");
    }
    if (e.annotator_id.empty()) fail_validation(where + ": empty annotator_id");
    if (config.member(e.annotator_id)) fail_validation(where + ": duplicate annotator '" + e.annotator_id + "'");
    config.roster.push_back(std::move(e));
  }

  const auto segments = payload.find("segments");
  if (segments == payload.end() || !segments->is_array() || segments->empty()) {
    fail_validation("'segments' must be a non-empty array");
  }
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < segments->size(); ++i) {
    segs.push_back(parse_segment((*segments)[i], "segments[" + std::to_string(i) + "]"));
  }
  Corpus corpus(std::move(segs));

  std::vector<AnnotationSet> initial;
  if (payload.contains("annotations")) {
    const auto& recs = payload["annotations"];
    if (!recs.is_array()) fail_validation("'annotations' must be an array");
    std::string jsonl;
    for (const auto& r : recs) jsonl += r.dump() + "\n";
    initial = read_annotations(jsonl, corpus, *schema, "annotations");
    for (const auto& set : initial) {
      if (!config.member(set.annotator_id)) {
        fail_validation("annotations: annotator '" + set.annotator_id + "' is not on the roster");
      }
      for (const auto& s : set.spans) {
        if (!layer_accepts(config.layer, *schema, s.path)) {
          fail_validation("annotations: span '" + s.span_id + "' is not a " +
                          std::string(to_string(config.layer)) + " label");
        }
      }
    }
  }

  json hashed = payload;
  hashed.erase("client_token");
  config.payload_hash = digest(hashed.dump());

  // Write everything into a sibling directory, then rename it into place.
  const std::string tmp = dir + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_file_atomic(tmp + "/segments.jsonl", write_segments(corpus));
  std::string snapshot = ordered_json{{"type", "snapshot"}, {"last_seq", 0}}.dump() + "\n";
  for (const auto& set : initial) {
    std::map<std::string, KeyState> keys;
    for (const auto& seg : set.segments_covered) {
      auto& k = keys[seg];
      k.version = 1;
      const auto note = set.segment_notes.find(seg);
      if (note != set.segment_notes.end()) k.note = note->second;
    }
    for (const auto& s : set.spans) keys[s.segment_id].spans.push_back(s);
    for (const auto& [seg, k] : keys) snapshot += state_record({seg, set.annotator_id}, k).dump() + "\n";
  }
  write_file_atomic(tmp + "/snapshot.jsonl", snapshot);
  write_file_atomic(tmp + "/log.jsonl", "");
  write_file_atomic(tmp + "/project.json", config_json(config).dump(2) + "\n");
  fsync_path(tmp, true);
  fs::rename(tmp, dir);
  fsync_path(fs::path(dir).parent_path().string(), true);
  return open(dir);
}

std::unique_ptr<Project> Project::open(const std::string& dir) {
  std::unique_ptr<Project> p(new Project());
  p->dir_ = dir;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().filename().string().find(".tmp.") != std::string::npos) fs::remove(entry.path());
  }
  p->config_ = parse_config(json::parse(read_file(dir + "/project.json")));
  p->corpus_ = read_segments(read_file(dir + "/segments.jsonl"), dir + "/segments.jsonl");
  p->schema_ = builtin_taxonomy(p->config_.taxonomy_name);
  if (p->schema_ == nullptr) fail(ErrorKind::io, dir + ": unknown taxonomy '" + p->config_.taxonomy_name + "'");
  p->compute_assignment();

  auto state = std::make_shared<ProjectState>();
  const std::string snap_path = dir + "/snapshot.jsonl";
  if (fs::exists(snap_path)) {
    const std::string text = read_file(snap_path);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      const std::string where = snap_path + ":" + std::to_string(++line_no);
      const json rec = json::parse(text.substr(pos, nl - pos));
      pos = nl + 1;
      const auto type = rec.at("type").get<std::string>();
      if (type == "snapshot") {
        state->last_seq = rec.at("last_seq").get<std::uint64_t>();
      } else if (type == "state") {
        const Key key{rec.at("segment_id").get<std::string>(), rec.at("annotator_id").get<std::string>()};
        KeyState k;
        k.version = rec.at("version").get<std::uint64_t>();
        if (rec.contains("note")) k.note = rec.at("note").get<std::string>();
        k.spans = spans_from_records(rec.at("spans"), where);
        p->validate_spans(key, k.spans, *state, where);
        p->apply(*state, key, std::move(k), std::nullopt, "", state->last_seq);
      } else if (type == "receipt") {
        state->receipts[rec.at("client_token").get<std::string>()] =
            SaveReceipt{rec.at("payload_hash").get<std::string>(), rec.at("segment_id").get<std::string>(),
                        rec.at("annotator_id").get<std::string>(), rec.at("version").get<std::uint64_t>()};
      } else {
        fail(ErrorKind::io, where + ": unknown record type '" + type + "'");
      }
    }
  }
  p->replay(dir + "/log.jsonl", *state);
  p->state_ = std::move(state);
  p->open_log();
  return p;
}

Project::~Project() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

void Project::compute_assignment() {
  const auto& segs = corpus_.segments();
  const std::size_t n = segs.size();
  const std::size_t r = config_.roster.size();
  // Round the shared block up; the epsilon keeps exact products like 0.4 * 10 at 4.
  const auto shared = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(config_.overlap_fraction * static_cast<double>(n) - 1e-9)));
  for (const auto& m : config_.roster) assignment_[m.annotator_id];
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = segs[i].segment_id;
    if (i < shared) {
      assignment_[config_.roster[i % r].annotator_id].push_back(id);
      if (r > 1) assignment_[config_.roster[(i + 1) % r].annotator_id].push_back(id);
    } else {
      assignment_[config_.roster[(i - shared) % r].annotator_id].push_back(id);
    }
  }
}

const std::vector<std::string>& Project::assignment(const std::string& annotator_id) const {
  const auto it = assignment_.find(annotator_id);
  if (it == assignment_.end()) fail(ErrorKind::not_found, "annotator '" + annotator_id + "' is not on the roster");
  return it->second;
}

std::shared_ptr<const ProjectState> Project::snapshot() const { return std::atomic_load(&state_); }

void Project::validate_spans(const Key& key, const std::vector<ErrorSpan>& spans, const ProjectState& state,
                             const std::string& where) const {
  const Segment* seg = corpus_.find(key.first);
  if (seg == nullptr) fail(ErrorKind::not_found, where + ": unknown segment '" + key.first + "'");
  std::set<std::string> ids;
  for (const auto& s : spans) {
    if (s.segment_id != key.first || s.annotator_id != key.second) {
      fail_validation(where + ": span '" + s.span_id + "' belongs to a different segment or annotator");
    }
    validate_span(s, *seg, *schema_, where);
    if (!layer_accepts(config_.layer, *schema_, s.path)) {
      fail_validation(where + ": span '" + s.span_id + "' is not a " + std::string(to_string(config_.layer)) +
                      " label");
    }
    if (!ids.insert(s.span_id).second) fail_validation(where + ": duplicate span_id '" + s.span_id + "'");
    const auto owner = state.span_owner.find(s.span_id);
    if (owner != state.span_owner.end() && owner->second != key) {
      fail_validation(where + ": span_id '" + s.span_id + "' is already used in segment '" +
                      owner->second.first + "'");
    }
  }
}

std::vector<ErrorSpan> Project::parse_spans(const SaveRequest& r) const {
  if (!r.spans.is_array()) fail_validation("'spans' must be an array");
  json records = json::array();
  for (std::size_t i = 0; i < r.spans.size(); ++i) {
    json rec = r.spans[i];
    const std::string where = "spans[" + std::to_string(i) + "]";
    if (!rec.is_object()) fail_validation(where + ": expected a JSON object");
    for (const auto& [field, value] : {std::pair{"segment_id", r.segment_id}, {"annotator_id", r.annotator_id}}) {
      if (!rec.contains(field)) {
        rec[field] = value;
      } else if (rec[field] != value) {
        fail_validation(where + ": " + field + " does not match the request");
      }
    }
    if (!rec.contains("span_id")) rec["span_id"] = r.segment_id + "/" + r.annotator_id + "/" + std::to_string(i + 1);
    records.push_back(std::move(rec));
  }
  return spans_from_records(records, "request");
}

void Project::apply(ProjectState& state, const Key& key, KeyState next, const std::optional<std::string>& token,
                    const std::string& hash, std::uint64_t seq) const {
  if (const auto old = state.find(key)) {
    for (const auto& s : old->spans) state.span_owner.erase(s.span_id);
  }
  for (const auto& s : next.spans) state.span_owner[s.span_id] = key;
  if (token) state.receipts[*token] = SaveReceipt{hash, key.first, key.second, next.version};
  state.keys[key] = std::make_shared<const KeyState>(std::move(next));
  state.last_seq = std::max(state.last_seq, seq);
}

void Project::replay(const std::string& log_path, ProjectState& state) {
  if (!fs::exists(log_path)) return;
  const std::string text = read_file(log_path);
  std::size_t pos = 0;
  std::size_t good = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const bool last = nl == std::string::npos || nl + 1 == text.size();
    const std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    const std::string where = log_path + ":" + std::to_string(++line_no);
    json rec;
    try {
      if (nl == std::string::npos) throw std::runtime_error("unterminated");
      rec = json::parse(line);
    } catch (const std::exception&) {
      // A torn tail is a write that was never acknowledged.
      if (last) break;
      fail(ErrorKind::io, where + ": corrupt log record");
    }
    pos = nl + 1;
    good = pos;
    const auto seq = rec.at("seq").get<std::uint64_t>();
    if (seq <= state.last_seq) continue;
    const Key key{rec.at("segment_id").get<std::string>(), rec.at("annotator_id").get<std::string>()};
    KeyState k;
    k.version = rec.at("version").get<std::uint64_t>();
    if (rec.contains("note")) k.note = rec.at("note").get<std::string>();
    k.spans = spans_from_records(rec.at("spans"), where);
    validate_spans(key, k.spans, state, where);
    std::optional<std::string> token;
    if (rec.contains("client_token")) token = rec.at("client_token").get<std::string>();
    apply(state, key, std::move(k), token, rec.value("payload_hash", std::string()), seq);
    since_compaction_++;
  }
  if (good < text.size()) fs::resize_file(log_path, good);
}

void Project::open_log() {
  if (log_fd_ >= 0) ::close(log_fd_);
  const std::string path = dir_ + "/log.jsonl";
  log_fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (log_fd_ < 0) fail(ErrorKind::io, "cannot open '" + path + "'");
}

void Project::append_log(const std::string& line) {
  const off_t before = ::lseek(log_fd_, 0, SEEK_END);
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(log_fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      rollback_log(log_fd_, before);
      fail(ErrorKind::io, "cannot append to the project log");
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fdatasync(log_fd_) != 0) {
    rollback_log(log_fd_, before);
    fail(ErrorKind::io, "cannot flush the project log");
  }
}

void Project::compact(const ProjectState& state) {
  std::string out = ordered_json{{"type", "snapshot"}, {"last_seq", state.last_seq}}.dump() + "\n";
  for (const auto& [key, k] : state.keys) out += state_record(key, *k).dump() + "\n";
  for (const auto& [token, r] : state.receipts) {
    ordered_json j;
    j["type"] = "receipt";
    j["client_token"] = token;
    j["payload_hash"] = r.payload_hash;
    j["segment_id"] = r.segment_id;
    j["annotator_id"] = r.annotator_id;
    j["version"] = r.version;
    out += j.dump() + "\n";
  }
  write_durable(dir_ + "/snapshot.jsonl", out);
  // Records up to last_seq are skipped on replay, so a crash between the two
  // renames is harmless.
  write_durable(dir_ + "/log.jsonl", "");
  open_log();
  since_compaction_ = 0;
}

SaveOutcome Project::save(const SaveRequest& r) {
  std::lock_guard lock(write_mutex_);
  const auto state = snapshot();
  if (corpus_.find(r.segment_id) == nullptr) {
    fail(ErrorKind::not_found, "unknown segment '" + r.segment_id + "'");
  }
  if (!config_.member(r.annotator_id)) {
    fail(ErrorKind::not_found, "annotator '" + r.annotator_id + "' is not on the roster");
  }
  const Key key{r.segment_id, r.annotator_id};

  json hashed = {{"segment_id", r.segment_id},
                 {"annotator_id", r.annotator_id},
                 {"spans", r.spans},
                 {"note", r.note ? json(*r.note) : json(nullptr)},
                 {"expected_version", r.expected_version}};
  const std::string hash = digest(hashed.dump());
  if (r.client_token) {
    const auto it = state->receipts.find(*r.client_token);
    if (it != state->receipts.end()) {
      if (it->second.payload_hash != hash) {
        fail(ErrorKind::conflict, "client_token '" + *r.client_token + "' was already used for a different save");
      }
      return {SaveOutcome::Kind::replayed, it->second.version,
              state->find({it->second.segment_id, it->second.annotator_id})};
    }
  }

  const auto current = state->find(key);
  const std::uint64_t version = current ? current->version : 0;
  if (r.expected_version != version) return {SaveOutcome::Kind::conflict, version, current};

  KeyState next;
  next.version = version + 1;
  next.spans = parse_spans(r);
  validate_spans(key, next.spans, *state, "request");
  if (r.note) next.note = unicode::nfc(*r.note);

  const std::uint64_t seq = state->last_seq + 1;
  ordered_json rec = state_record(key, next);
  rec.erase("type");
  ordered_json line;
  line["seq"] = seq;
  for (auto& [k, v] : rec.items()) line[k] = v;
  if (r.client_token) {
    line["client_token"] = *r.client_token;
    line["payload_hash"] = hash;
  }
  append_log(line.dump() + "\n");

  auto published = std::make_shared<ProjectState>(*state);
  apply(*published, key, next, r.client_token, hash, seq);
  std::shared_ptr<const ProjectState> frozen = published;
  std::atomic_store(&state_, frozen);

  if (++since_compaction_ >= kCompactEvery) {
    try {
      compact(*frozen);
    } catch (const std::exception& e) {
      // The save is already durable in the log; compaction retries next time.
      std::cerr << "lqm: snapshot compaction failed: " << e.what() << "\n";
    }
  }
  return {SaveOutcome::Kind::saved, next.version, frozen->find(key)};
}

std::vector<AnnotatorProgress> Project::progress() const {
  const auto state = snapshot();
  std::vector<AnnotatorProgress> out;
  for (const auto& m : config_.roster) {
    AnnotatorProgress p;
    p.annotator_id = m.annotator_id;
    const auto& assigned = assignment(m.annotator_id);
    p.assigned = assigned.size();
    for (const auto& seg : assigned) {
      const auto k = state->find({seg, m.annotator_id});
      if (k && k->version > 0) ++p.done;
    }
    for (const auto& [key, k] : state->keys) {
      if (key.second != m.annotator_id || k->version == 0) continue;
      p.spans += k->spans.size();
      if (k->note && !k->note->empty()) ++p.flagged;
    }
    out.push_back(std::move(p));
  }
  return out;
}

ExportFiles Project::export_files() const {
  const auto state = snapshot();
  std::map<std::string, AnnotationSet> sets;
  for (const auto& seg : corpus_.segments()) {
    for (const auto& m : config_.roster) {
      const auto k = state->find({seg.segment_id, m.annotator_id});
      if (!k || k->version == 0) continue;
      auto& set = sets[m.annotator_id];
      set.annotator_id = m.annotator_id;
      set.taxonomy_name = schema_->name();
      set.segments_covered.insert(seg.segment_id);
      if (k->note) set.segment_notes[seg.segment_id] = *k->note;
      set.spans.insert(set.spans.end(), k->spans.begin(), k->spans.end());
    }
  }
  std::vector<AnnotationSet> ordered;
  for (auto& [id, set] : sets) ordered.push_back(std::move(set));
  return {write_segments(corpus_), write_annotations(ordered)};
}

Store::Store(std::string data_dir) : data_dir_(std::move(data_dir)) {
  const fs::path root = fs::path(data_dir_) / "projects";
  fs::create_directories(root);
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory()) continue;
    if (name.size() > 4 && name.ends_with(".tmp")) {
      fs::remove_all(entry.path());
      continue;
    }
    projects_[name] = Project::open(entry.path().string());
  }
}

std::pair<std::string, bool> Store::create(const json& payload) {
  std::lock_guard lock(mutex_);
  if (payload.is_object() && payload.contains("client_token") && payload["client_token"].is_string()) {
    const auto token = payload["client_token"].get<std::string>();
    json hashed = payload;
    hashed.erase("client_token");
    const std::string hash = digest(hashed.dump());
    for (const auto& [id, p] : projects_) {
      if (p->config().client_token == token) {
        if (p->config().payload_hash != hash) {
          fail(ErrorKind::conflict, "client_token '" + token + "' was already used for a different project");
        }
        return {id, false};
      }
    }
  }
  std::size_t n = projects_.size() + 1;
  std::string id;
  do {
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%06zu", n++);
    id = buf;
  } while (projects_.count(id) || fs::exists(fs::path(data_dir_) / "projects" / id));
  projects_[id] = Project::create((fs::path(data_dir_) / "projects" / id).string(), id, payload);
  return {id, true};
}

Project* Store::find(const std::string& project_id) const {
  std::lock_guard lock(mutex_);
  const auto it = projects_.find(project_id);
  return it == projects_.end() ? nullptr : it->second.get();
}

}  // namespace lqm::server
