#pragma once

// Private helpers shared by the translation units that speak JSON.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "aep/nn.hpp"

namespace aep::detail {

nlohmann::json network_to_json(const nn::NetworkParameters& params);
nn::NetworkParameters network_from_json(const nlohmann::json& j);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace aep::detail

#include "aep/evaluation.hpp"

namespace aep::detail {

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
nlohmann::json curve_to_json(const TradeoffCurve& curve);
TradeoffCurve curve_from_json(const nlohmann::json& j);

}  // namespace aep::detail

#include "aep/ingestion.hpp"

namespace aep::detail {

nlohmann::json manifest_to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const nlohmann::json& j);

}  // namespace aep::detail
