#include "cactus/checkpoint.hpp"

#include <fstream>

#include "cactus/binio.hpp"

namespace cactus {

void write_params(std::ostream& os, const ModelParams& params) {
  binio::put_magic(os, "CMP1");
  binio::put_u32(os, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    binio::put_u32(os, static_cast<std::uint32_t>(l.in_dim()));
    binio::put_u32(os, static_cast<std::uint32_t>(l.out_dim()));
    binio::put_u8(os, static_cast<std::uint8_t>(l.activation));
  }
  for (const auto& l : params.layers) {
    for (double w : l.weight.data()) binio::put_f64(os, w);
    for (double b : l.bias) binio::put_f64(os, b);
  }
}

ModelParams read_params(std::istream& is) {
  binio::expect_magic(is, "CMP1");
  const std::uint32_t count = binio::get_u32(is, "layer count");
  if (count == 0 || count > 1024) throw DataError("implausible layer count " + std::to_string(count));
  ModelParams p;
  p.layers.resize(count);
  for (auto& l : p.layers) {
    const std::uint32_t in = binio::get_u32(is, "layer in_dim");
    const std::uint32_t out = binio::get_u32(is, "layer out_dim");
    const std::uint8_t act = binio::get_u8(is, "layer activation");
    if (act > 1) throw DataError("unknown activation tag " + std::to_string(act));
    if (in == 0 || out == 0) throw DataError("zero layer width in checkpoint");
    l.weight = Mat(in, out);
    l.bias.assign(out, 0.0);
    l.activation = static_cast<Activation>(act);
  }
  for (auto& l : p.layers) {
    for (auto& w : l.weight.data()) w = binio::get_f64(is, "weights");
    for (auto& b : l.bias) b = binio::get_f64(is, "biases");
  }
  check_chain(p);
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_params(os, params);
  if (!os) throw DataError("write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  return read_params(is);
}

void save_optimizer_state(const std::filesystem::path& path, const OptimizerState& state) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  binio::put_magic(os, "CMO1");
  binio::put_u8(os, static_cast<std::uint8_t>(state.kind));
  binio::put_f64(os, state.lr);
  binio::put_f64(os, state.beta1);
  binio::put_f64(os, state.beta2);
  binio::put_f64(os, state.epsilon);
  binio::put_u64(os, state.step);
  write_params(os, state.first_moment);
  write_params(os, state.second_moment);
  if (!os) throw DataError("write failed: " + path.string());
}

OptimizerState load_optimizer_state(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open optimizer state " + path.string());
  binio::expect_magic(is, "CMO1");
  OptimizerState s;
  const auto kind = binio::get_u8(is, "optimizer kind");
  if (kind > 1) throw DataError("unknown optimizer kind");
  s.kind = static_cast<OptimizerKind>(kind);
  s.lr = binio::get_f64(is, "lr");
  s.beta1 = binio::get_f64(is, "beta1");
  s.beta2 = binio::get_f64(is, "beta2");
  s.epsilon = binio::get_f64(is, "epsilon");
  s.step = binio::get_u64(is, "step");
  s.first_moment = read_params(is);
  s.second_moment = read_params(is);
  check_same_shape(s.first_moment, s.second_moment, "optimizer state");
  return s;
}

}  // namespace cactus
