#include "evpower/vehicle.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "evpower/errors.hpp"
#include "evpower/rng.hpp"

namespace evpower {

using nlohmann::json;

void validate(const VehicleParams& vp) {
  if (vp.mass_kg <= 0 || vp.frontal_area_m2 <= 0 || vp.wheel_radius_m <= 0 ||
      vp.rolling_resist_coeff <= 0)
    throw Error(Errc::InvalidArgument, "vehicle parameters must be strictly positive");
  if (!(vp.drag_coeff > 0 && vp.drag_coeff < 1))
    throw Error(Errc::InvalidArgument, "drag_coeff must be in (0, 1)");
  if (vp.rotating_mass_factor < 1.0)
    throw Error(Errc::InvalidArgument, "rotating_mass_factor must be >= 1");
}

void validate(const PowertrainParams& pt) {
  auto eff_ok = [](double e) { return e > 0.0 && e <= 1.0; };
  if (!eff_ok(pt.eta_te) || !eff_ok(pt.eta_e) || !eff_ok(pt.eta_m))
    throw Error(Errc::InvalidArgument, "efficiencies must be in (0, 1]");
  if (pt.air_density <= 0)
    throw Error(Errc::InvalidArgument, "air_density must be positive");
}

void validate(const OracleConfig& cfg) {
  if (cfg.noise_std_w < 0)
    throw Error(Errc::InvalidArgument, "noise_std_w must be >= 0");
  if (cfg.efficiency_ripple_amp < 0 || cfg.efficiency_ripple_amp >= 0.2)
    throw Error(Errc::InvalidArgument, "efficiency_ripple_amp must be in [0, 0.2)");
}

double tractive_effort(double v, double a, double grade,
                       const VehicleParams& vp, const PowertrainParams& pt) {
  double f_ad = 0.5 * pt.air_density * vp.drag_coeff * vp.frontal_area_m2 * v * v;
  double f_rr = v > 0.0 ? vp.mass_kg * kGravity * vp.rolling_resist_coeff : 0.0;
  double f_hc = vp.mass_kg * kGravity * grade;
  double f_la = vp.mass_kg * a;
  double f_wa = (vp.rotating_mass_factor - 1.0) * vp.mass_kg * a;
  return f_ad + f_rr + f_hc + f_la + f_wa;
}

double regen_fraction(double v) {
  if (v < 5.0) return 0.5 * v / 5.0;
  return 0.5 + 0.3 * (v - 5.0) / 20.0;
}

double yang_power(double v, double a, double grade,
                  const VehicleParams& vp, const PowertrainParams& pt) {
  double force = vp.rotating_mass_factor * vp.mass_kg * a +
                 vp.mass_kg * kGravity * (vp.rolling_resist_coeff + grade) +
                 0.5 * pt.air_density * vp.drag_coeff * vp.frontal_area_m2 * v * v;
  if (force >= 0.0) {
    return v * force / (pt.eta_te * pt.eta_e) + pt.p_accessory_w;
  }
  return regen_fraction(v) * v * pt.eta_te * pt.eta_m * force + pt.p_accessory_w;
}

std::vector<double> accelerations(const std::vector<double>& speed) {
  std::vector<double> a(speed.size(), 0.0);
  if (speed.size() < 2) return a;
  for (std::size_t i = 0; i + 1 < speed.size(); ++i)
    a[i] = (speed[i + 1] - speed[i]) * 10.0;
  a.back() = a[speed.size() - 2];
  return a;
}

SampledSeries synth_power_oracle(const DriveCycle& cycle,
                                 const GradeProfile& grade,
                                 const OracleConfig& cfg,
                                 const VehicleParams& vp,
                                 const PowertrainParams& pt) {
  validate(vp);
  validate(pt);
  validate(cfg);
  const std::vector<double>& v = cycle.speed.values;
  const std::vector<double>& g = grade.grade.values;
  if (v.size() != g.size())
    throw Error(Errc::LengthMismatch,
                "cycle '" + cycle.name + "' (" + std::to_string(v.size()) +
                    " samples) vs grade '" + grade.name + "' (" +
                    std::to_string(g.size()) + " samples)");
  std::vector<double> a = accelerations(v);
  Rng rng(cfg.seed);
  SampledSeries out;
  out.sample_rate_hz = 10.0;
  out.unit = SignalUnit::Watt;
  out.values.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    PowertrainParams rippled = pt;
    rippled.eta_e = pt.eta_e *
        (1.0 + cfg.efficiency_ripple_amp * std::sin(2.0 * M_PI * v[i] / 30.0));
    double p = yang_power(v[i], a[i], g[i], vp, rippled);
    if (cfg.noise_std_w > 0.0) p += rng.normal(0.0, cfg.noise_std_w);
    out.values[i] = p;
  }
  return out;
}

void load_vehicle_json(const std::filesystem::path& path,
                       VehicleParams& vp, PowertrainParams& pt) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  vp.mass_kg = j.value("vehicle_weight_kg", vp.mass_kg);
  vp.drag_coeff = j.value("aerodynamic_drag_coefficient", vp.drag_coeff);
  vp.frontal_area_m2 = j.value("frontal_area_m2", vp.frontal_area_m2);
  vp.wheel_radius_m = j.value("wheel_radius_m", vp.wheel_radius_m);
  vp.rolling_resist_coeff = j.value("rolling_resistance_coefficient", vp.rolling_resist_coeff);
  vp.rotating_mass_factor = j.value("rotating_mass_factor", vp.rotating_mass_factor);
  pt.eta_te = j.value("transmission_efficiency", pt.eta_te);
  pt.eta_e = j.value("driving_efficiency", pt.eta_e);
  pt.eta_m = j.value("motor_efficiency", pt.eta_m);
  pt.air_density = j.value("air_density_kg_m3", pt.air_density);
  pt.p_accessory_w = j.value("accessory_power_w", pt.p_accessory_w);
  validate(vp);
  validate(pt);
}

void save_vehicle_json(const std::filesystem::path& path,
                       const VehicleParams& vp, const PowertrainParams& pt) {
  json j = {
      {"vehicle_weight_kg", vp.mass_kg},
      {"aerodynamic_drag_coefficient", vp.drag_coeff},
      {"frontal_area_m2", vp.frontal_area_m2},
      {"wheel_radius_m", vp.wheel_radius_m},
      {"rolling_resistance_coefficient", vp.rolling_resist_coeff},
      {"rotating_mass_factor", vp.rotating_mass_factor},
      {"transmission_efficiency", pt.eta_te},
      {"driving_efficiency", pt.eta_e},
      {"motor_efficiency", pt.eta_m},
      {"air_density_kg_m3", pt.air_density},
      {"accessory_power_w", pt.p_accessory_w},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for write: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace evpower
