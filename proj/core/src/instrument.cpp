#include "lumisplat/instrument.hpp"

namespace lumisplat::instrument {

namespace {
Counters g_counters;
}

Counters snapshot() { return g_counters; }

void reset() { g_counters = Counters{}; }

void count_curve_application() { ++g_counters.curve_applications; }
void count_matrix_map() { ++g_counters.matrix_maps; }
void count_generator_forward() { ++g_counters.generator_forwards; }

}  // namespace lumisplat::instrument
