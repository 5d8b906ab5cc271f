#pragma once

#include <filesystem>

#include "lumisplat/trainer.hpp"

namespace lumisplat {

// Plain-text `key = value` training configuration. `#` starts a comment,
// blank lines are skipped, unknown keys are rejected. Every TrainConfig,
// LossConfig, and RefineConfig default is overridable.
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

}  // namespace lumisplat
