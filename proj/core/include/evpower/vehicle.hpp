#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "evpower/series.hpp"

namespace evpower {

inline constexpr double kGravity = 9.81;  // m/s^2

/// Longitudinal-dynamics parameters. Defaults are the Nissan Leaf 2013.
struct VehicleParams {
  double mass_kg = 1498.0;
  double drag_coeff = 0.29;
  double frontal_area_m2 = 2.27;
  double wheel_radius_m = 0.3162;
  double rolling_resist_coeff = 0.015;
  double rotating_mass_factor = 1.1;  // delta, >= 1
};

struct PowertrainParams {
  double eta_te = 0.9;        // transmission efficiency
  double eta_e = 0.8;         // driving efficiency
  double eta_m = 0.9;         // motor efficiency
  double air_density = 1.2;   // kg/m^3
  double p_accessory_w = 150.0;
};

/// Knobs that keep the synthetic ground truth from being trivially equal to
/// the physics baseline.
struct OracleConfig {
  double noise_std_w = 0.0;
  double efficiency_ripple_amp = 0.0;  // in [0, 0.2)
  std::uint64_t seed = 0;
};

void validate(const VehicleParams& vp);
void validate(const PowertrainParams& pt);
void validate(const OracleConfig& cfg);

/// Total longitudinal force demand: aerodynamic drag + rolling resistance
/// (gated to v > 0) + hill climb + linear acceleration + rotating inertia.
double tractive_effort(double v, double a, double grade,
                       const VehicleParams& vp, const PowertrainParams& pt);

/// Speed-dependent fraction of braking energy the motor can recover.
double regen_fraction(double v);

/// Instantaneous battery power demand; negative net power means charging.
double yang_power(double v, double a, double grade,
                  const VehicleParams& vp, const PowertrainParams& pt);

/// Forward-difference acceleration at 10 Hz; the last sample repeats.
std::vector<double> accelerations(const std::vector<double>& speed);

/// Physics-based ground-truth power generator: yang_power with a
/// speed-dependent multiplicative ripple on eta_e plus seeded Gaussian noise.
SampledSeries synth_power_oracle(const DriveCycle& cycle,
                                 const GradeProfile& grade,
                                 const OracleConfig& cfg,
                                 const VehicleParams& vp,
                                 const PowertrainParams& pt);

/// Reads vehicle/powertrain parameters from a JSON file; any field not
/// present keeps its default.
void load_vehicle_json(const std::filesystem::path& path,
                       VehicleParams& vp, PowertrainParams& pt);
void save_vehicle_json(const std::filesystem::path& path,
                       const VehicleParams& vp, const PowertrainParams& pt);

}  // namespace evpower
