#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"

namespace testing {

inline std::string fixture_path(std::string_view name) {
  return std::string(LQM_FIXTURES_DIR) + "/" + std::string(name);
}

// Deliberately naive UTF-8 walk, independent of the library decoder; assumes
// well-formed input.
inline std::vector<std::string> scalars_of(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t n = 1;
    if (lead >= 0xF0) {
      n = 4;
    } else if (lead >= 0xE0) {
      n = 3;
    } else if (lead >= 0xC0) {
      n = 2;
    }
    out.emplace_back(s.substr(i, n));
    i += n;
  }
  return out;
}

inline std::string slice(std::string_view s, std::size_t start, std::size_t end) {
  const auto cs = scalars_of(s);
  std::string out;
  for (std::size_t i = start; i < end; ++i) out += cs.at(i);
  return out;
}

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline lqm::Segment make_segment(std::string id, std::string target, std::string model = "m",
                                 std::string src = "EGY", std::string tgt = "ENG") {
  nlohmann::json rec = {{"segment_id", std::move(id)},
                        {"source_lang", std::move(src)},
                        {"target_lang", std::move(tgt)},
                        {"dialect", nullptr},
                        {"model_id", std::move(model)},
                        {"source_text", "src"},
                        {"target_text", std::move(target)}};
  return lqm::parse_segment(rec, "test");
}

inline lqm::ErrorSpan make_span(std::string id, const lqm::Segment& seg, std::size_t start,
                                std::size_t end, lqm::Severity sev = lqm::Severity::minor,
                                std::string annotator = "A") {
  lqm::ErrorSpan s;
  s.span_id = std::move(id);
  s.segment_id = seg.segment_id;
  s.annotator_id = std::move(annotator);
  s.start = start;
  s.end = end;
  s.path = {"semantics", "lexical-semantics", "named-entity"};
  s.severity = sev;
  return s;
}

}  // namespace testing

#include <filesystem>

namespace testing {

/// A fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lqm-test-" + std::to_string(rd()) + "-" + std::to_string(++counter));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
