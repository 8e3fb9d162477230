#include "evpower/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "evpower/errors.hpp"
#include "evpower/rng.hpp"

namespace evpower {

namespace {

constexpr double kDt = 0.1;
constexpr double kMaxSpeed = 35.0;

}  // namespace

DriveCycle generate_drive_cycle(std::uint64_t seed, double duration_s,
                                const std::string& name) {
  if (duration_s < 20.0)
    throw Error(Errc::InvalidArgument, "cycle duration must be at least 20 s");
  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * 10.0));
  Rng rng(seed);
  std::vector<double> v;
  v.reserve(n);

  double speed = 0.0;
  // start from standstill so start-of-movement jerk phases exist
  std::size_t idle0 = static_cast<std::size_t>(rng.uniform(30, 80));
  for (std::size_t i = 0; i < idle0 && v.size() < n; ++i) v.push_back(0.0);

  while (v.size() < n) {
    double pick = rng.u01();
    if (pick < 0.30) {  // ramp toward a new target speed
      double target = rng.uniform(2.0, 34.0);
      double rate = target > speed ? rng.uniform(0.4, 1.6) : rng.uniform(0.6, 2.2);
      std::size_t steps = static_cast<std::size_t>(
          std::ceil(std::abs(target - speed) / (rate * kDt)));
      double step = (target - speed) / static_cast<double>(std::max<std::size_t>(steps, 1));
      for (std::size_t i = 0; i < steps && v.size() < n; ++i) {
        speed = std::clamp(speed + step, 0.0, kMaxSpeed);
        v.push_back(speed);
      }
    } else if (pick < 0.55) {  // hold with a gentle dither, never flat
      std::size_t steps = static_cast<std::size_t>(rng.uniform(80, 300));
      double amp = rng.uniform(0.15, 0.45);
      double freq = rng.uniform(0.12, 0.40);
      double phase = rng.uniform(0.0, 2.0 * M_PI);
      double base = speed;
      for (std::size_t i = 0; i < steps && v.size() < n; ++i) {
        double t = static_cast<double>(i) * kDt;
        speed = std::clamp(base + amp * std::sin(2.0 * M_PI * freq * t + phase),
                           0.0, kMaxSpeed);
        v.push_back(speed);
      }
    } else if (pick < 0.73) {  // sinusoidal cruise
      double amp = std::min(rng.uniform(1.0, 4.0), std::max(0.5, speed - 0.5));
      double period = rng.uniform(15.0, 50.0);
      double cycles = rng.uniform(1.0, 2.0);
      std::size_t steps = static_cast<std::size_t>(period * cycles / kDt);
      double base = speed;
      for (std::size_t i = 0; i < steps && v.size() < n; ++i) {
        double t = static_cast<double>(i) * kDt;
        speed = std::clamp(base + amp * std::sin(2.0 * M_PI * t / period), 0.0, kMaxSpeed);
        v.push_back(speed);
      }
    } else if (pick < 0.88 && speed > 1.0) {  // brake to a stop and idle
      double rate = rng.uniform(0.6, 2.4);
      while (speed > 0.0 && v.size() < n) {
        speed = std::max(0.0, speed - rate * kDt);
        v.push_back(speed);
      }
      std::size_t idle = static_cast<std::size_t>(rng.uniform(20, 100));
      for (std::size_t i = 0; i < idle && v.size() < n; ++i) v.push_back(0.0);
    } else {  // short coast with mild deceleration
      std::size_t steps = static_cast<std::size_t>(rng.uniform(30, 120));
      for (std::size_t i = 0; i < steps && v.size() < n; ++i) {
        speed = std::max(0.0, speed - 0.08 * kDt * speed);
        v.push_back(speed);
      }
    }
  }
  // finish with a braking tail so end-of-brake jerk phases exist
  std::size_t tail = std::min<std::size_t>(n / 10, 200);
  double rate = 1.2;
  for (std::size_t i = n - tail; i < n; ++i) {
    double prev = i == 0 ? 0.0 : v[i - 1];
    v[i] = std::max(0.0, prev - rate * kDt);
  }

  DriveCycle cycle;
  cycle.name = name;
  cycle.speed.values = std::move(v);
  cycle.speed.sample_rate_hz = 10.0;
  cycle.speed.unit = SignalUnit::MetersPerSecond;
  return cycle;
}

GradeProfile generate_grade_profile(std::uint64_t seed, double duration_s,
                                    double amplitude, const std::string& name) {
  if (amplitude < 0.0 || amplitude > 0.20)
    throw Error(Errc::InvalidArgument, "grade amplitude must be in [0, 0.20]");
  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * 10.0));
  Rng rng(seed);
  double t1 = rng.uniform(150.0, 400.0);
  double t2 = rng.uniform(40.0, 120.0);
  double p1 = rng.uniform(0.0, 2.0 * M_PI);
  double p2 = rng.uniform(0.0, 2.0 * M_PI);
  GradeProfile profile;
  profile.name = name;
  profile.grade.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) * kDt;
    double g = amplitude * (0.65 * std::sin(2.0 * M_PI * t / t1 + p1) +
                            0.35 * std::sin(2.0 * M_PI * t / t2 + p2));
    profile.grade.values[i] = std::clamp(g, -0.20, 0.20);
  }
  profile.grade.sample_rate_hz = 10.0;
  profile.grade.unit = SignalUnit::GradeFraction;
  return profile;
}

std::vector<GradeProfile> canonical_grade_profiles(double duration_s) {
  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * 10.0));
  std::vector<GradeProfile> profiles(3);

  profiles[0].name = "grade_flat";
  profiles[0].grade.values.assign(n, 0.0);

  profiles[1].name = "grade_band2";
  profiles[1].grade.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) * kDt;
    profiles[1].grade.values[i] = 0.02 * std::sin(2.0 * M_PI * t / 150.0);
  }

  profiles[2].name = "grade_sweep";
  profiles[2].grade.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) * kDt;
    double ramp = -0.20 + 0.35 * t / duration_s;
    double g = ramp + 0.015 * std::sin(2.0 * M_PI * t / 90.0);
    profiles[2].grade.values[i] = std::clamp(g, -0.20, 0.15);
  }

  for (GradeProfile& p : profiles) {
    p.grade.sample_rate_hz = 10.0;
    p.grade.unit = SignalUnit::GradeFraction;
  }
  return profiles;
}

}  // namespace evpower
