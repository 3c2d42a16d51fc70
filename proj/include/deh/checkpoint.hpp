#pragma once

// Checkpoint file:
//
//   bytes 0..7   "DEHCKPT1"
//   bytes 8..11  manifest length L, u32 little-endian
//   next L bytes manifest text: the config (key = value lines), a line
//                "--- tensors <count> <total>", then one line per tensor
//                "<name> <offset> <d0>x<d1>..."
//   remainder    <total> parameters, binary64 little-endian, in offset order

#include <filesystem>

#include "deh/config.hpp"

namespace deh {

inline constexpr char kCheckpointMagic[] = "DEHCKPT1";

struct Checkpoint {
  ExperimentConfig config;
  std::vector<double> params;
};

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config,
                     std::span<const double> params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace deh
