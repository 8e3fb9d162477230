#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evpower/series.hpp"

namespace evpower {

inline constexpr int kWindowLen = 100;  // 10 s at 10 Hz

/// Battery-power min/max used to map outputs into [0, 1].
struct NormStats {
  double min_w = 0.0;
  double max_w = 0.0;
};

/// Aligned 10-second quadruple of input signals plus battery power.
struct Window {
  std::vector<double> v_sp;    // m/s
  std::vector<double> t_eff;   // N
  std::vector<double> r_el;    // grade fraction
  std::vector<double> p_batt;  // W (or [0,1] once the owning Dataset is normalized)
  std::string source_cycle;
  int start_index = 0;
};

struct Dataset {
  std::vector<Window> windows;
  // Present iff p_batt values are normalized with these stats.
  std::optional<NormStats> output_norm;
  std::string provenance;  // free-form JSON carried through persistence
};

/// Cuts four equal-length 10 Hz series into consecutive non-overlapping
/// 100-sample windows; a trailing remainder shorter than one window is
/// dropped.
std::vector<Window> partition_windows(const SampledSeries& v_sp,
                                      const SampledSeries& t_eff,
                                      const SampledSeries& r_el,
                                      const SampledSeries& p_batt,
                                      const std::string& source_name);

/// Maps every p_batt sample through (p - min) / (max - min) using the
/// dataset-global extrema and records them in output_norm.
Dataset normalize_output(const Dataset& dataset);
/// Inverse of normalize_output using the stored stats.
Dataset denormalize_output(const Dataset& dataset);

inline double normalize_power(double watts, const NormStats& s) {
  return (watts - s.min_w) / (s.max_w - s.min_w);
}
inline double denormalize_power(double unit, const NormStats& s) {
  return unit * (s.max_w - s.min_w) + s.min_w;
}

/// Seeded shuffle, then first ceil(fraction * m) windows to train and the
/// rest to validation. Both splits are normalized with stats computed from
/// the training split only.
std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset,
                                            double train_fraction,
                                            std::uint64_t seed);

/// Binary container: JSON header + little-endian float32 blob of windows in
/// (window, signal, sample) order with signals ordered v_sp, t_eff, r_el,
/// p_batt.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace evpower
