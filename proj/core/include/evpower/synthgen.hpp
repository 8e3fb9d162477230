#pragma once

#include <cstdint>
#include <vector>

#include "evpower/series.hpp"

namespace evpower {

/// Synthetic drive cycle: idle, ramp, dithered hold, sinusoidal cruise and
/// braking segments, speeds clamped to [0, 35] m/s. Deterministic per seed.
DriveCycle generate_drive_cycle(std::uint64_t seed, double duration_s,
                                const std::string& name);

/// Smooth two-tone grade profile clamped to [-0.20, 0.20]; `amplitude`
/// scales the swing (0 gives a flat road).
GradeProfile generate_grade_profile(std::uint64_t seed, double duration_s,
                                    double amplitude, const std::string& name);

/// The three reference grade profiles used for comparisons: flat 0%, a
/// gentle +/-2% band, and a -20%..15% sweep.
std::vector<GradeProfile> canonical_grade_profiles(double duration_s);

}  // namespace evpower
