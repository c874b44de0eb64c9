#include "autometric.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "error.hpp"
#include "unicode.hpp"

namespace lqm {

namespace {

constexpr char32_t kWordMarker = U'▁';

std::string tokens_field(const std::string& field) {
  constexpr std::string_view suffix = "_text";
  if (field.size() > suffix.size() &&
      field.compare(field.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return field.substr(0, field.size() - suffix.size()) + "_tokens";
  }
  return field + "_tokens";
}

std::vector<std::string> token_array(const Segment& seg, const std::string& field,
                                     const TokenizerSpec& tok) {
  const std::string key = tokens_field(field);
  const auto it = seg.extra.find(key);
  if (it == seg.extra.end() || it->is_null()) {
    fail_validation("segment '" + seg.segment_id + "' has no '" + key + "' token array");
  }
  if (!it->is_array()) fail_validation("segment '" + seg.segment_id + "': '" + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& t : *it) {
    if (!t.is_string()) {
      fail_validation("segment '" + seg.segment_id + "': '" + key + "' must hold strings");
    }
    std::string s = unicode::nfc(t.get<std::string>());
    if (tok.lowercase) s = unicode::encode(unicode::lowercase(unicode::decode(s)));
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<std::string> text_field(const Segment& seg, const std::string& field) {
  if (field == "target_text") return seg.target_text;
  if (field == "source_text") return seg.source_text;
  if (field == "reference_text") return seg.reference_text;
  const auto it = seg.extra.find(field);
  if (it == seg.extra.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail_validation("segment '" + seg.segment_id + "': '" + field + "' must be a string");
  return unicode::nfc(it->get<std::string>());
}

}  // namespace

SubwordVocabulary SubwordVocabulary::parse(std::string_view text) {
  SubwordVocabulary v;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab != std::string::npos) line.resize(tab);
    if (line.empty()) continue;
    std::u32string piece;
    try {
      piece = unicode::decode(unicode::nfc(line));
    } catch (const Error& e) {
      fail_validation("vocabulary line " + std::to_string(line_no) + ": " + e.what());
    }
    v.max_len_ = std::max(v.max_len_, piece.size());
    v.pieces_.insert(std::move(piece));
  }
  if (v.pieces_.empty()) fail_validation("subword vocabulary is empty");
  return v;
}

std::vector<std::string> SubwordVocabulary::segment(std::u32string_view word) const {
  std::u32string marked;
  marked.reserve(word.size() + 1);
  marked.push_back(kWordMarker);
  marked.append(word);
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < marked.size()) {
    std::size_t take = 1;
    for (std::size_t len = std::min(max_len_, marked.size() - i); len >= 1; --len) {
      if (pieces_.count(marked.substr(i, len))) {
        take = len;
        break;
      }
    }
    out.push_back(unicode::encode(std::u32string_view(marked).substr(i, take)));
    i += take;
  }
  return out;
}

TokenizerSpec TokenizerSpec::parse(std::string_view spec, bool lowercase) {
  TokenizerSpec t;
  t.lowercase = lowercase;
  if (spec == "whitespace") {
    t.mode = Mode::whitespace;
  } else if (spec == "pretok") {
    t.mode = Mode::pretokenized;
  } else if (spec.substr(0, 8) == "subword:" && spec.size() > 8) {
    t.mode = Mode::subword;
    t.vocabulary_path = std::string(spec.substr(8));
    t.vocabulary =
        std::make_shared<SubwordVocabulary>(SubwordVocabulary::parse(read_file(t.vocabulary_path)));
  } else {
    fail(ErrorKind::usage,
         "unknown tokenizer '" + std::string(spec) + "' (expected whitespace, pretok or subword:FILE)");
  }
  return t;
}

std::string TokenizerSpec::describe() const {
  std::string s;
  switch (mode) {
    case Mode::whitespace: s = "whitespace"; break;
    case Mode::pretokenized: s = "pretok"; break;
    case Mode::subword: s = "subword:" + vocabulary_path; break;
  }
  return s;
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerSpec& tok) {
  if (tok.mode == TokenizerSpec::Mode::pretokenized) {
    fail(ErrorKind::usage, "pretokenized mode reads token arrays, not text");
  }
  std::u32string scalars = unicode::decode(unicode::nfc(text));
  if (tok.lowercase) scalars = unicode::lowercase(scalars);
  std::vector<std::string> out;
  for (const auto& word : unicode::split_whitespace(scalars)) {
    if (tok.mode == TokenizerSpec::Mode::subword) {
      for (auto& piece : tok.vocabulary->segment(word)) out.push_back(std::move(piece));
    } else {
      out.push_back(unicode::encode(word));
    }
  }
  return out;
}

BleuScore sentence_bleu(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  if (hyp.empty()) fail_validation("BLEU: hypothesis has no tokens");
  if (ref.empty()) fail_validation("BLEU: reference has no tokens");
  BleuScore b;
  b.hyp_len = hyp.size();
  b.ref_len = ref.size();

  for (int n = 1; n <= kBleuMaxOrder; ++n) {
    const auto count_ngrams = [n](const std::vector<std::string>& toks) {
      std::map<std::vector<std::string>, std::size_t> counts;
      for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
      }
      return counts;
    };
    const auto hc = count_ngrams(hyp);
    const auto rc = count_ngrams(ref);
    std::size_t matches = 0;
    for (const auto& [gram, count] : hc) {
      const auto it = rc.find(gram);
      if (it != rc.end()) matches += std::min(count, it->second);
    }
    b.matches[n - 1] = matches;
    b.totals[n - 1] = hyp.size() >= static_cast<std::size_t>(n) ? hyp.size() - n + 1 : 0;
  }

  b.effective_order = 0;
  double smooth = 1.0;
  for (int n = 1; n <= kBleuMaxOrder; ++n) {
    if (b.totals[n - 1] == 0) break;
    b.effective_order = n;
    if (b.matches[n - 1] > 0) {
      b.precisions[n - 1] =
          static_cast<double>(b.matches[n - 1]) / static_cast<double>(b.totals[n - 1]);
    } else if (n == 1) {
      b.precisions[0] = 0.0;
    } else {
      smooth *= 2.0;
      b.precisions[n - 1] = 1.0 / (smooth * static_cast<double>(b.totals[n - 1]));
    }
  }

  b.brevity_penalty =
      b.hyp_len < b.ref_len
          ? std::exp(1.0 - static_cast<double>(b.ref_len) / static_cast<double>(b.hyp_len))
          : 1.0;
  if (b.precisions[0] == 0.0) {
    b.score = 0.0;
    return b;
  }
  double log_sum = 0.0;
  for (int n = 1; n <= b.effective_order; ++n) log_sum += std::log(b.precisions[n - 1]);
  b.score = 100.0 * b.brevity_penalty * std::exp(log_sum / b.effective_order);
  b.score = std::clamp(b.score, 0.0, 100.0);
  return b;
}

BleuScore sentence_bleu(std::string_view hyp, std::string_view ref, const TokenizerSpec& tok) {
  return sentence_bleu(tokenize(hyp, tok), tokenize(ref, tok));
}

BleuReport corpus_bleu_table(const Corpus& corpus, const std::string& hyp_field,
                             const TokenizerSpec& tok) {
  BleuReport report;
  report.hyp_field = hyp_field;
  report.tokenizer = tok;
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& seg : corpus.segments()) {
    std::vector<std::string> hyp, ref;
    if (tok.mode == TokenizerSpec::Mode::pretokenized) {
      hyp = token_array(seg, hyp_field, tok);
      ref = token_array(seg, "reference_text", tok);
    } else {
      const auto h = text_field(seg, hyp_field);
      if (!h) fail_validation("segment '" + seg.segment_id + "' has no hypothesis field '" + hyp_field + "'");
      if (!seg.reference_text) fail_validation("segment '" + seg.segment_id + "' has no reference_text");
      hyp = tokenize(*h, tok);
      ref = tokenize(*seg.reference_text, tok);
    }
    if (hyp.empty()) fail_validation("segment '" + seg.segment_id + "': empty hypothesis");
    if (ref.empty()) fail_validation("segment '" + seg.segment_id + "': empty reference");
    SegmentBleu s{seg.segment_id, seg.model_id, seg.direction(), sentence_bleu(hyp, ref)};
    groups[{s.direction, s.model_id}].push_back(s.bleu.score);
    report.segments.push_back(std::move(s));
  }
  for (const auto& [key, scores] : groups) {
    double sum = 0.0;
    for (double v : scores) sum += v;
    report.groups.push_back({key.first, key.second, scores.size(), sum / static_cast<double>(scores.size())});
  }
  return report;
}

nlohmann::ordered_json to_json(const BleuReport& report) {
  using json = nlohmann::ordered_json;
  json j;
  j["metric"] = "sentence_bleu";
  j["max_order"] = kBleuMaxOrder;
  j["smoothing"] = "exp";
  j["effective_order"] = true;
  j["tokenizer"] = report.tokenizer.describe();
  j["lowercase"] = report.tokenizer.lowercase;
  j["hyp_field"] = report.hyp_field;
  json segs = json::object();
  for (const auto& s : report.segments) {
    json e;
    e["score"] = s.bleu.score;
    e["precisions"] = s.bleu.precisions;
    e["matches"] = s.bleu.matches;
    e["totals"] = s.bleu.totals;
    e["brevity_penalty"] = s.bleu.brevity_penalty;
    e["hyp_len"] = s.bleu.hyp_len;
    e["ref_len"] = s.bleu.ref_len;
    e["effective_order"] = s.bleu.effective_order;
    e["model_id"] = s.model_id;
    e["direction"] = s.direction;
    segs[s.segment_id] = std::move(e);
  }
  j["per_segment"] = std::move(segs);
  json groups = json::array();
  for (const auto& g : report.groups) {
    groups.push_back({{"direction", g.direction},
                      {"model_id", g.model_id},
                      {"n_segments", g.n_segments},
                      {"mean_bleu", g.mean}});
  }
  j["per_group"] = std::move(groups);
  return j;
}

std::vector<std::pair<std::string, double>> bleu_scores_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("per_segment") || !j["per_segment"].is_object()) {
    fail_validation("BLEU report: missing 'per_segment' object");
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [id, entry] : j["per_segment"].items()) {
    if (!entry.is_object() || !entry.contains("score") || !entry["score"].is_number()) {
      fail_validation("BLEU report: segment '" + id + "' has no numeric score");
    }
    out.emplace_back(id, entry["score"].get<double>());
  }
  return out;
}

}  // namespace lqm
