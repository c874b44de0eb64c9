#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

// Plain-text tables rendered from the JSON reports. Rates use one decimal,
// scores two; JSON keeps full precision.
namespace lqm::reports {

std::string render_scores(const nlohmann::ordered_json& score_report);
std::string render_bleu(const nlohmann::ordered_json& bleu_report);
std::string render_iaa(const nlohmann::ordered_json& agreement_report);
std::string render_distribution(const nlohmann::ordered_json& distribution);
std::string render_dashboard(const nlohmann::ordered_json& dashboard_rows);
std::string render_correlation(const nlohmann::ordered_json& correlation);
std::string render_buckets(const nlohmann::ordered_json& bucket_report);

/// Dispatches on the "report" key written by the analysis entry points and
/// on the shape of score/bleu/iaa reports.
std::string render(std::string_view kind, const nlohmann::ordered_json& report);

}  // namespace lqm::reports
