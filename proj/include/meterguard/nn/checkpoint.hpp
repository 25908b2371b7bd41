#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "meterguard/nn/tensor.hpp"

namespace meterguard::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nested JSON arrays following the tensor shape; a rank-0 tensor is a number.
nlohmann::json tensor_to_nested(const Tensor& t);
Tensor tensor_from_nested(const nlohmann::json& j, const Shape& shape);

/// Checkpoint document:
///   {"format": "meterguard-checkpoint", "version": 1, "architecture": {...},
///    "parameters": [{"name", "shape", "values"}...], "seed": n, "training": {...}}
nlohmann::json make_checkpoint(const nlohmann::json& architecture,
                               std::span<Parameter* const> params, std::uint64_t seed,
                               const nlohmann::json& training);

/// Copies checkpoint values into `params`. Throws CheckpointError when the
/// architecture descriptor differs from `architecture` or any parameter is
/// missing or misshapen.
void load_checkpoint(const nlohmann::json& checkpoint, const nlohmann::json& architecture,
                     std::span<Parameter* const> params);

/// Dumps a JSON document to disk (pretty-printed, trailing newline).
void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace meterguard::nn
