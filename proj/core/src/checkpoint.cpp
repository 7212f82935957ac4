#include "aep/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "aep/error.hpp"
#include "json_detail.hpp"

namespace aep {
namespace detail {

using nlohmann::json;

json network_to_json(const nn::NetworkParameters& params) {
  json layers = json::array();
  for (const auto& layer : params.layers) {
    layers.push_back({
        {"fan_in", layer.fan_in()},
        {"fan_out", layer.fan_out()},
        {"activation", layer.activation == nn::Activation::relu ? "relu" : "identity"},
        {"weights", std::vector<double>(layer.weights.values().begin(), layer.weights.values().end())},
        {"bias", layer.bias},
    });
  }
  return {
      {"format", nn::kCheckpointFormat},
      {"version", nn::kCheckpointVersion},
      {"seed", params.seed},
      {"temperature", params.temperature},
      {"l2_scale", params.l2_scale},
      {"dropout_reg_scale", params.dropout_reg_scale},
      {"layers", std::move(layers)},
      {"dropout_logits", params.dropout_logits},
  };
}

nn::NetworkParameters network_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != nn::kCheckpointFormat) {
      throw FormatError("not a network checkpoint");
    }
    if (j.at("version").get<int>() != nn::kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version " + j.at("version").dump());
    }
    nn::NetworkParameters params;
    params.seed = j.at("seed").get<std::uint64_t>();
    params.temperature = j.at("temperature").get<double>();
    params.l2_scale = j.at("l2_scale").get<double>();
    params.dropout_reg_scale = j.at("dropout_reg_scale").get<double>();
    for (const auto& jl : j.at("layers")) {
      nn::DenseLayer layer;
      const auto fan_in = jl.at("fan_in").get<std::size_t>();
      const auto fan_out = jl.at("fan_out").get<std::size_t>();
      layer.weights = Matrix(fan_in, fan_out, jl.at("weights").get<std::vector<double>>());
      layer.bias = jl.at("bias").get<std::vector<double>>();
      const auto act = jl.at("activation").get<std::string>();
      if (act == "relu") {
        layer.activation = nn::Activation::relu;
      } else if (act == "identity") {
        layer.activation = nn::Activation::identity;
      } else {
        throw FormatError("unknown activation '" + act + "'");
      }
      params.layers.push_back(std::move(layer));
    }
    params.dropout_logits = j.at("dropout_logits").get<std::vector<double>>();
    params.validate();
    return params;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed network checkpoint: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

namespace nn {

std::string serialize_network(const NetworkParameters& params) {
  return detail::network_to_json(params).dump(1);
}

NetworkParameters deserialize_network(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return detail::network_from_json(j);
}

void save_checkpoint(const NetworkParameters& params, const std::filesystem::path& path) {
  detail::write_file(path, serialize_network(params) + "\n");
}

NetworkParameters load_checkpoint(const std::filesystem::path& path) {
  return deserialize_network(detail::read_file(path));
}

}  // namespace nn
}  // namespace aep
