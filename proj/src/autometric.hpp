#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"
#include "json.hpp"

namespace lqm {

/// Greedy longest-match subword segmenter. Pieces that begin a word carry the
/// "▁" (U+2581) marker, as in sentencepiece vocabularies.
class SubwordVocabulary {
 public:
  /// One piece per line; anything after a tab is ignored.
  static SubwordVocabulary parse(std::string_view text);

  std::vector<std::string> segment(std::u32string_view word) const;
  std::size_t size() const { return pieces_.size(); }

 private:
  std::unordered_set<std::u32string> pieces_;
  std::size_t max_len_ = 0;
};

struct TokenizerSpec {
  enum class Mode { whitespace, pretokenized, subword };
  Mode mode = Mode::whitespace;
  bool lowercase = false;
  std::string vocabulary_path;  // subword only
  std::shared_ptr<const SubwordVocabulary> vocabulary;

  /// "whitespace", "pretok" or "subword:PATH"; loads the vocabulary.
  static TokenizerSpec parse(std::string_view spec, bool lowercase = false);
  std::string describe() const;
};

/// Tokenizes running text. Pretokenized mode cannot tokenize raw text.
std::vector<std::string> tokenize(std::string_view text, const TokenizerSpec& tok);

inline constexpr int kBleuMaxOrder = 4;

struct BleuScore {
  double score = 0.0;
  std::array<double, kBleuMaxOrder> precisions{};  // smoothed, in [0, 1]
  std::array<std::size_t, kBleuMaxOrder> matches{};
  std::array<std::size_t, kBleuMaxOrder> totals{};
  double brevity_penalty = 1.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  int effective_order = kBleuMaxOrder;
};

/// Sentence BLEU over token sequences. Orders beyond the hypothesis length are
/// dropped; zero higher-order precisions are smoothed exponentially; a zero
/// unigram precision yields 0. Throws when either side is empty.
BleuScore sentence_bleu(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);
BleuScore sentence_bleu(std::string_view hyp, std::string_view ref, const TokenizerSpec& tok);

struct SegmentBleu {
  std::string segment_id;
  std::string model_id;
  std::string direction;
  BleuScore bleu;
};

struct GroupBleu {
  std::string direction;
  std::string model_id;
  std::size_t n_segments = 0;
  double mean = 0.0;
};

struct BleuReport {
  std::string hyp_field;
  TokenizerSpec tokenizer;
  std::vector<SegmentBleu> segments;  // corpus order
  std::vector<GroupBleu> groups;      // sorted by (direction, model_id)
};

/// Hypothesis from `hyp_field`, reference from reference_text (or the
/// `<stem>_tokens` arrays in pretokenized mode).
BleuReport corpus_bleu_table(const Corpus& corpus, const std::string& hyp_field,
                             const TokenizerSpec& tok);

nlohmann::ordered_json to_json(const BleuReport& report);

/// Reads the per-segment scores of a BLEU report (as written by to_json).
std::vector<std::pair<std::string, double>> bleu_scores_from_json(const nlohmann::json& j);

}  // namespace lqm
