// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "wsa/model/model.hpp"

// File layout: one line of JSON
//   {"format_version": 1, "config": {...},
//    "tensors": [{"name", "shape", "dtype": "f32", "byte_offset", "byte_len"}, ...]}
// terminated by '\n', followed by the tensors' little-endian f32 data.
// byte_offset is relative to the first byte after the newline; tensors are
// stored contiguously in parameter order.
namespace wsa::model {

inline constexpr int checkpoint_format_version = 1;

class CheckpointVersionError : public IoError {
 public:
  using IoError::IoError;
};

// Manifest disagrees with the shapes implied by its own config (including
// byte_len values that do not match a tensor's shape).
class CheckpointShapeError : public DimensionError {
 public:
  using DimensionError::DimensionError;
};

// Fewer data bytes than the manifest declares.
class CheckpointTruncatedError : public IoError {
 public:
  using IoError::IoError;
};

// Anything else malformed: bad JSON, missing fields, gaps between tensors,
// trailing bytes.
class CheckpointFormatError : public IoError {
 public:
  using IoError::IoError;
};

std::string serialize_checkpoint(const SepModel& model);
SepModel deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const SepModel& model, const std::filesystem::path& path);
SepModel load_checkpoint(const std::filesystem::path& path);

}  // namespace wsa::model
