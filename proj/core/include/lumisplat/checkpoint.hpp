#pragma once

#include <filesystem>

#include "lumisplat/trainer.hpp"

namespace lumisplat {

// Binary checkpoint of the full training state (model, optimizer moments,
// refinement accumulators). Byte layout is documented in
// docs/checkpoint_format.md; identical states serialize to identical bytes.
void save_checkpoint(const std::filesystem::path& path, const TrainerState& state);

// Restores everything save_checkpoint wrote. Optimizer group names/rates are
// not stored; the caller re-applies its config afterwards. Throws DataError
// on malformed files.
void load_checkpoint(const std::filesystem::path& path, TrainerState& state);

}  // namespace lumisplat
