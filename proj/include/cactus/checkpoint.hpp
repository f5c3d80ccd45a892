#pragma once

#include <filesystem>
#include <iosfwd>

#include "cactus/model.hpp"
#include "cactus/optim.hpp"

namespace cactus {

// "CMP1" checkpoint: magic, u32 layer count, then per layer u32 in_dim, u32 out_dim,
// u8 activation; then per layer the row-major weights followed by the bias, all as
// little-endian f64.
void write_params(std::ostream& os, const ModelParams& params);
ModelParams read_params(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

// "CMO1" optimizer state: magic, u8 kind, f64 lr/beta1/beta2/epsilon, u64 step, then the
// two moment tensors as embedded CMP1 blocks.
void save_optimizer_state(const std::filesystem::path& path, const OptimizerState& state);
OptimizerState load_optimizer_state(const std::filesystem::path& path);

}  // namespace cactus
