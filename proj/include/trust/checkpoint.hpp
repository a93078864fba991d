#pragma once

// Checkpoint layout: "TRSTMLP1", u64 LE header length, JSON header
// {layer_dims, dropout_rate, seed}, then for each layer the weight matrix
// (row-major) followed by its bias, all as LE IEEE-754 doubles.

#include <string>
#include <string_view>

#include "trust/binary_io.hpp"
#include "trust/nn.hpp"

namespace trust {

inline constexpr std::string_view kCheckpointMagic = "TRSTMLP1";

inline std::string encode_checkpoint(const Mlp& model) {
  model.validate();
  std::string out(kCheckpointMagic);
  nlohmann::json header = {{"layer_dims", model.config.layer_dims},
                           {"dropout_rate", model.config.dropout_rate},
                           {"seed", model.config.seed}};
  io::put_json_header(out, header);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    io::put_doubles(out, model.weights[l].values());
    io::put_doubles(out, model.biases[l]);
  }
  return out;
}

inline Mlp decode_checkpoint(std::span<const char> bytes) {
  io::Reader in(bytes);
  auto magic = in.take(kCheckpointMagic.size());
  if (std::string_view(magic.data(), magic.size()) != kCheckpointMagic) {
    throw FormatError("not a checkpoint: bad magic");
  }
  const auto header = in.get_json_header();
  MlpConfig cfg;
  try {
    cfg.layer_dims = header.at("layer_dims").get<std::vector<std::size_t>>();
    cfg.dropout_rate = header.at("dropout_rate").get<double>();
    cfg.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }

  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < cfg.layer_dims.size(); ++l) {
    expected += (cfg.layer_dims[l] * cfg.layer_dims[l + 1] + cfg.layer_dims[l + 1]) * 8;
  }
  if (in.remaining() != expected) {
    throw FormatError("checkpoint payload is " + std::to_string(in.remaining()) +
                      " bytes, expected " + std::to_string(expected));
  }

  Mlp model;
  model.config = cfg;
  for (std::size_t l = 0; l + 1 < cfg.layer_dims.size(); ++l) {
    Matrix w(cfg.layer_dims[l + 1], cfg.layer_dims[l]);
    for (auto& v : w.values()) v = in.get_double();
    Vector b(cfg.layer_dims[l + 1]);
    for (auto& v : b) v = in.get_double();
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  return model;
}

inline void save_checkpoint(const Mlp& model, const std::string& path) {
  io::write_file(path, encode_checkpoint(model));
}

inline Mlp load_checkpoint(const std::string& path) {
  const auto bytes = io::read_file(path);
  return decode_checkpoint(bytes);
}

}  // namespace trust
