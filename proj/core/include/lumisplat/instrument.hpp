#pragma once

#include <cstdint>

namespace lumisplat::instrument {

// Evaluation counters for the enhancement path. Test-time rendering must not
// touch curves, matrices or generators; these counters make that checkable.
struct Counters {
  std::uint64_t curve_applications = 0;
  std::uint64_t matrix_maps = 0;
  std::uint64_t generator_forwards = 0;
};

Counters snapshot();
void reset();

void count_curve_application();
void count_matrix_map();
void count_generator_forward();

}  // namespace lumisplat::instrument
