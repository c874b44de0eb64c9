#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "json.hpp"
#include "taxonomy.hpp"

namespace lqm::server {

struct RosterEntry {
  std::string annotator_id;
  std::optional<std::string> token;
};

struct ProjectConfig {
  std::string project_id;
  std::string taxonomy_name;
  Layer layer = Layer::diagnostic;
  std::vector<RosterEntry> roster;
  double overlap_fraction = 0.0;
  std::optional<std::string> client_token;
  std::string payload_hash;

  const RosterEntry* member(std::string_view annotator_id) const;
};

/// Spans and note of one (segment, annotator) key.
struct KeyState {
  std::uint64_t version = 0;
  std::vector<ErrorSpan> spans;
  std::optional<std::string> note;
};

struct SaveReceipt {
  std::string payload_hash;
  std::string segment_id;
  std::string annotator_id;
  std::uint64_t version = 0;
};

using Key = std::pair<std::string, std::string>;  // (segment_id, annotator_id)

/// Immutable view of a project's annotations. Writers publish a new one.
struct ProjectState {
  std::uint64_t last_seq = 0;
  std::map<Key, std::shared_ptr<const KeyState>> keys;
  std::map<std::string, Key> span_owner;
  std::map<std::string, SaveReceipt> receipts;  // by client token

  std::shared_ptr<const KeyState> find(const Key& key) const;
};

struct SaveRequest {
  std::string segment_id;
  std::string annotator_id;
  nlohmann::json spans = nlohmann::json::array();
  std::optional<std::string> note;
  std::uint64_t expected_version = 0;
  std::optional<std::string> client_token;
};

struct SaveOutcome {
  enum class Kind { saved, replayed, conflict } kind = Kind::saved;
  std::uint64_t version = 0;
  std::shared_ptr<const KeyState> current;
};

struct AnnotatorProgress {
  std::string annotator_id;
  std::size_t assigned = 0;
  std::size_t done = 0;
  std::size_t spans = 0;
  std::size_t flagged = 0;
};

struct ExportFiles {
  std::string segments_jsonl;
  std::string annotations_jsonl;
};

/// Stable 64-bit FNV-1a digest, hex encoded.
std::string digest(std::string_view bytes);

class Project {
 public:
  /// Validates the creation payload and persists a new project under `dir`.
  static std::unique_ptr<Project> create(const std::string& dir, const std::string& project_id,
                                         const nlohmann::json& payload);
  /// Loads a project, replaying its log on top of the last snapshot.
  static std::unique_ptr<Project> open(const std::string& dir);

  ~Project();
  Project(const Project&) = delete;
  Project& operator=(const Project&) = delete;

  const ProjectConfig& config() const { return config_; }
  const Corpus& corpus() const { return corpus_; }
  const TaxonomySchema& schema() const { return *schema_; }
  const std::vector<std::string>& assignment(const std::string& annotator_id) const;

  std::shared_ptr<const ProjectState> snapshot() const;

  SaveOutcome save(const SaveRequest& request);
  std::vector<AnnotatorProgress> progress() const;
  ExportFiles export_files() const;

  /// Saves between snapshot compactions.
  static constexpr std::uint64_t kCompactEvery = 256;

 private:
  Project() = default;

  void compute_assignment();
  void validate_spans(const Key& key, const std::vector<ErrorSpan>& spans, const ProjectState& state,
                      const std::string& where) const;
  std::vector<ErrorSpan> parse_spans(const SaveRequest& r) const;
  void append_log(const std::string& line);
  void compact(const ProjectState& state);
  void open_log();
  void replay(const std::string& log_path, ProjectState& state);
  void apply(ProjectState& state, const Key& key, KeyState next, const std::optional<std::string>& token,
             const std::string& hash, std::uint64_t seq) const;

  std::string dir_;
  ProjectConfig config_;
  Corpus corpus_;
  const TaxonomySchema* schema_ = nullptr;
  std::map<std::string, std::vector<std::string>> assignment_;
  std::shared_ptr<const ProjectState> state_;
  std::mutex write_mutex_;
  int log_fd_ = -1;
  std::uint64_t since_compaction_ = 0;
};

/// All projects under a data directory.
class Store {
 public:
  explicit Store(std::string data_dir);

  /// Returns the project id and whether this call created it. A repeated
  /// client token with the same payload returns the existing project.
  std::pair<std::string, bool> create(const nlohmann::json& payload);
  Project* find(const std::string& project_id) const;

 private:
  std::string data_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Project>> projects_;
};

}  // namespace lqm::server
