#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "aep/nn.hpp"

namespace aep::nn {

inline constexpr std::string_view kCheckpointFormat = "aep-network";
inline constexpr int kCheckpointVersion = 1;

/// JSON checkpoint. Layout (version 1):
///
///   {
///     "format": "aep-network", "version": 1,
///     "seed": <uint64>, "temperature": <double>,
///     "l2_scale": <double>, "dropout_reg_scale": <double>,
///     "layers": [ { "fan_in": n, "fan_out": m, "activation": "relu"|"identity",
///                   "weights": [n*m doubles, row-major], "bias": [m doubles] } ],
///     "dropout_logits": [ one per layer after the first, or empty ]
///   }
///
/// Doubles are printed with round-trip precision, so a load reproduces the
/// parameters bit for bit.
std::string serialize_network(const NetworkParameters& params);
NetworkParameters deserialize_network(std::string_view text);

void save_checkpoint(const NetworkParameters& params, const std::filesystem::path& path);
NetworkParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace aep::nn
