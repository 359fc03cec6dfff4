#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "msct/autograd.hpp"
#include "msct/layers.hpp"

namespace msct {

/*** MSCTWTS1 container: magic, u32 version, u64 architecture fingerprint
 * (FNV-1a of the arch spec string), u32 block count, then named blocks of
 * name length + UTF-8 name, u8 dtype (0 = f64), u8 ndim, u64 dims,
 * little-endian payload. Blocks keep the order they were written in. */
struct WeightsFile {
    std::uint64_t fingerprint = 0;
    std::vector<std::pair<std::string, Tensor>> blocks;
};

void write_weights(const std::string& path, const std::string& arch_spec,
                   const std::vector<Param*>& params);
WeightsFile read_weights(const std::string& path);

// Verifies the fingerprint against arch_spec and copies blocks into params,
// matching by name. Missing/extra blocks and shape mismatches are errors.
void load_weights(const std::string& path, const std::string& arch_spec,
                  const std::vector<Param*>& params);

struct LossRecord {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

void write_loss_history(const std::string& path, const std::vector<LossRecord>& history);
std::vector<LossRecord> read_loss_history(const std::string& path);

}  // namespace msct
