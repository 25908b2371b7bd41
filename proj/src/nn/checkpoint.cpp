#include "meterguard/nn/checkpoint.hpp"

#include <fstream>

namespace meterguard::nn {

namespace {

nlohmann::json nest(const double* data, const Shape& shape, std::size_t axis) {
  if (axis == shape.size()) return *data;
  nlohmann::json arr = nlohmann::json::array();
  std::size_t stride = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) stride *= shape[a];
  for (std::size_t i = 0; i < shape[axis]; ++i) arr.push_back(nest(data + i * stride, shape, axis + 1));
  return arr;
}

void unnest(const nlohmann::json& j, const Shape& shape, std::size_t axis, std::vector<double>& out) {
  if (axis == shape.size()) {
    if (!j.is_number()) throw CheckpointError("checkpoint value is not a number");
    out.push_back(j.get<double>());
    return;
  }
  if (!j.is_array() || j.size() != shape[axis]) {
    throw CheckpointError("checkpoint array does not match shape " + shape_string(shape));
  }
  for (const auto& e : j) unnest(e, shape, axis + 1, out);
}

}  // namespace

nlohmann::json tensor_to_nested(const Tensor& t) { return nest(t.data(), t.shape(), 0); }

Tensor tensor_from_nested(const nlohmann::json& j, const Shape& shape) {
  std::vector<double> data;
  data.reserve(shape_size(shape));
  unnest(j, shape, 0, data);
  return Tensor(shape, std::move(data));
}

nlohmann::json make_checkpoint(const nlohmann::json& architecture,
                               std::span<Parameter* const> params, std::uint64_t seed,
                               const nlohmann::json& training) {
  nlohmann::json ps = nlohmann::json::array();
  for (const Parameter* p : params) {
    ps.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"values", tensor_to_nested(p->value)}});
  }
  return {{"format", "meterguard-checkpoint"},
          {"version", 1},
          {"architecture", architecture},
          {"parameters", ps},
          {"seed", seed},
          {"training", training}};
}

void load_checkpoint(const nlohmann::json& ckpt, const nlohmann::json& architecture,
                     std::span<Parameter* const> params) {
  if (ckpt.value("format", "") != "meterguard-checkpoint") {
    throw CheckpointError("not a meterguard checkpoint");
  }
  if (!ckpt.contains("architecture") || ckpt.at("architecture") != architecture) {
    throw CheckpointError("checkpoint architecture does not match the model");
  }
  const auto& stored = ckpt.at("parameters");
  if (stored.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(stored.size()) +
                          " parameters, model has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = stored.at(i);
    Parameter& p = *params[i];
    if (entry.at("name").get<std::string>() != p.name) {
      throw CheckpointError("checkpoint parameter '" + entry.at("name").get<std::string>() +
                            "' where '" + p.name + "' was expected");
    }
    const Shape shape = entry.at("shape").get<Shape>();
    if (shape != p.value.shape()) {
      throw CheckpointError("parameter '" + p.name + "' has shape " + shape_string(shape) +
                            ", model expects " + shape_string(p.value.shape()));
    }
    p.value = tensor_from_nested(entry.at("values"), shape);
    p.grad = Tensor(shape);
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("invalid JSON in '" + path + "': " + e.what());
  }
}

}  // namespace meterguard::nn
