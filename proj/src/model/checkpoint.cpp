// SPDX-License-Identifier: Apache-2.0

#include "wsa/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <json.hpp>

#include "wsa/core/io.hpp"

namespace wsa::model {

using nlohmann::json;

std::string serialize_checkpoint(const SepModel& model) {
  json tensors = json::array();
  std::string blob;
  for (const auto& [name, t] : model.parameters()) {
    const std::size_t offset = blob.size();
    for (float v : t->data()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
    tensors.push_back({{"name", name},
                       {"shape", t->shape()},
                       {"dtype", "f32"},
                       {"byte_offset", offset},
                       {"byte_len", blob.size() - offset}});
  }
  const json manifest = {{"format_version", checkpoint_format_version},
                         {"config", json::parse(to_json(model.config))},
                         {"tensors", tensors}};
  return manifest.dump() + "\n" + blob;
}

SepModel deserialize_checkpoint(std::string_view bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw CheckpointTruncatedError("checkpoint manifest is not terminated");
  const std::string_view blob = bytes.substr(newline + 1);

  json manifest;
  try {
    manifest = json::parse(bytes.substr(0, newline));
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("format_version") || !manifest.contains("config") ||
      !manifest.contains("tensors") || !manifest.at("tensors").is_array()) {
    throw CheckpointFormatError("checkpoint manifest lacks format_version, config or tensors");
  }
  if (!manifest.at("format_version").is_number_integer() ||
      manifest.at("format_version").get<int>() != checkpoint_format_version) {
    throw CheckpointVersionError("unsupported checkpoint format_version " + manifest.at("format_version").dump() +
                                 " (expected " + std::to_string(checkpoint_format_version) + ")");
  }

  SepModel model = make_model<float>(model_config_from_json(manifest.at("config").dump()));
  auto params = model.parameters();
  const json& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) {
    throw CheckpointShapeError("checkpoint lists " + std::to_string(tensors.size()) + " tensors, config implies " +
                               std::to_string(params.size()));
  }

  std::size_t expected_offset = 0;
  try {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const json& entry = tensors[i];
      const auto& [name, tensor] = params[i];
      const auto entry_name = entry.at("name").get<std::string>();
      if (entry_name != name) {
        throw CheckpointShapeError("checkpoint tensor " + std::to_string(i) + " is \"" + entry_name +
                                   "\", expected \"" + name + "\"");
      }
      const auto shape = entry.at("shape").get<Shape>();
      if (shape != tensor->shape()) {
        throw CheckpointShapeError("tensor " + name + " has shape " + shape_string(shape) + ", config implies " +
                                   shape_string(tensor->shape()));
      }
      if (entry.at("dtype").get<std::string>() != "f32") {
        throw CheckpointFormatError("tensor " + name + " has unsupported dtype " + entry.at("dtype").dump());
      }
      const auto offset = entry.at("byte_offset").get<std::size_t>();
      const auto len = entry.at("byte_len").get<std::size_t>();
      if (len != 4 * tensor->size()) {
        throw CheckpointShapeError("tensor " + name + ": byte_len mismatch (" + std::to_string(len) +
                                   " bytes for shape " + shape_string(shape) + ")");
      }
      if (offset != expected_offset) {
        throw CheckpointFormatError("tensor " + name + " starts at byte " + std::to_string(offset) +
                                    ", expected " + std::to_string(expected_offset) + " (tensors must be contiguous)");
      }
      if (offset + len > blob.size()) {
        throw CheckpointTruncatedError("checkpoint truncated: tensor " + name + " needs bytes up to " +
                                       std::to_string(offset + len) + ", file has " + std::to_string(blob.size()));
      }
      for (std::size_t k = 0; k < tensor->size(); ++k) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
          bits |= std::uint32_t(static_cast<unsigned char>(blob[offset + 4 * k + b])) << (8 * b);
        }
        (*tensor)[k] = std::bit_cast<float>(bits);
      }
      expected_offset += len;
    }
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("malformed tensor entry: ") + e.what());
  }
  if (blob.size() != expected_offset) {
    throw CheckpointFormatError("checkpoint has " + std::to_string(blob.size() - expected_offset) +
                                " trailing bytes after the last tensor");
  }
  return model;
}

void save_checkpoint(const SepModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

SepModel load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace wsa::model
