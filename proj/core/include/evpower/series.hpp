#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace evpower {

enum class SignalUnit { MetersPerSecond, Newton, GradeFraction, Watt };

/// Uniformly sampled signal. Everything entering the windowing pipeline is
/// resampled to 10 Hz first.
struct SampledSeries {
  std::vector<double> values;
  double sample_rate_hz = 10.0;
  SignalUnit unit = SignalUnit::MetersPerSecond;
};

struct DriveCycle {
  std::string name;
  SampledSeries speed;  // m/s, non-negative
};

struct GradeProfile {
  std::string name;
  SampledSeries grade;  // rise/run fraction, within [-0.20, 0.20]
};

/// Linear interpolation of (t, y) samples onto the uniform 10 Hz grid
/// spanning [t.front(), t.back()].
std::vector<double> resample_to_10hz(const std::vector<double>& t,
                                     const std::vector<double>& y);

/// CSV columns `time_s,speed_mps`, strictly increasing time.
DriveCycle load_cycle_csv(const std::filesystem::path& path);
/// CSV columns `time_s,grade_pct`; percent is converted to fraction.
GradeProfile load_grade_csv(const std::filesystem::path& path);

void save_cycle_csv(const DriveCycle& cycle, const std::filesystem::path& path);
void save_grade_csv(const GradeProfile& profile, const std::filesystem::path& path);

}  // namespace evpower
