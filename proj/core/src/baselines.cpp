#include "evpower/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "evpower/errors.hpp"
#include "evpower/vehicle.hpp"

namespace evpower {

using nlohmann::json;

double galvin_power(double v, double a, const GalvinCoeffs& coeffs) {
  if (v < 0) throw Error(Errc::InvalidArgument, "galvin_power: negative speed");
  return coeffs.r * v + coeffs.s * v * v + coeffs.t * v * v * v + coeffs.u * v * a;
}

std::vector<double> galvin_power_series(const std::vector<double>& speed,
                                        const GalvinCoeffs& coeffs) {
  std::vector<double> a = accelerations(speed);
  std::vector<double> p(speed.size());
  for (std::size_t i = 0; i < speed.size(); ++i) p[i] = galvin_power(speed[i], a[i], coeffs);
  return p;
}

MlrCoeffs load_mlr_coeffs_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  MlrCoeffs c;
  const char* keys[7] = {"b1", "b2", "b3", "b4", "b5", "b6", "b7"};
  double* slots[7] = {&c.b1, &c.b2, &c.b3, &c.b4, &c.b5, &c.b6, &c.b7};
  for (int i = 0; i < 7; ++i) {
    if (!j.contains(keys[i]))
      throw Error(Errc::MissingCoeffs,
                  path.string() + ": missing regression coefficient '" + keys[i] + "'");
    *slots[i] = j.at(keys[i]).get<double>();
  }
  return c;
}

CmfSplit cmf(std::span<const double> speeds, double delta_s) {
  if (speeds.size() < 2)
    throw Error(Errc::TooFewSamples, "cmf needs at least 2 speed samples");
  if (delta_s <= 0.0) {
    bool all_zero = std::all_of(speeds.begin(), speeds.end(),
                                [](double v) { return v == 0.0; });
    if (all_zero) return {};  // stationary segment contributes nothing
    throw Error(Errc::DegenerateSegment, "cmf: zero segment distance with motion");
  }
  CmfSplit out;
  for (std::size_t i = 1; i < speeds.size(); ++i) {
    double d = speeds[i] * speeds[i] - speeds[i - 1] * speeds[i - 1];
    if (d >= 0) {
      out.pos += d / delta_s;
    } else {
      out.neg += -d / delta_s;
    }
  }
  return out;
}

std::vector<SegmentEnergy> decauwer_segment_energies(std::span<const double> speed,
                                                     std::span<const double> grade,
                                                     const MlrCoeffs& coeffs,
                                                     double segment_len_s) {
  if (speed.size() != grade.size())
    throw Error(Errc::LengthMismatch, "speed/grade lengths differ");
  if (speed.empty()) throw Error(Errc::TooFewSamples, "empty trip");
  if (segment_len_s <= 0) throw Error(Errc::InvalidArgument, "segment length must be positive");

  const double dt = 0.1;  // 10 Hz
  const std::size_t seg_n = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(segment_len_s / dt)));
  std::vector<SegmentEnergy> segments;
  for (std::size_t lo = 0; lo < speed.size(); lo += seg_n) {
    std::size_t hi = std::min(speed.size(), lo + seg_n);
    if (hi - lo < 2) break;  // a trailing single sample has no extent
    std::span<const double> v = speed.subspan(lo, hi - lo);
    std::span<const double> g = grade.subspan(lo, hi - lo);

    SegmentEnergy seg;
    seg.duration_s = static_cast<double>(v.size()) * dt;
    double mean_v = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    seg.distance_m = mean_v * seg.duration_s;

    double sq_speed_sum = 0.0;  // wind speed is zero
    for (double vi : v) sq_speed_sum += vi * vi;

    CmfSplit c{};
    if (seg.distance_m > 0.0) c = cmf(v, seg.distance_m);

    double h_pos = 0.0, h_neg = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double dh = g[i] * v[i] * dt;  // grade times per-step distance
      if (dh >= 0) {
        h_pos += dh;
      } else {
        h_neg += -dh;
      }
    }

    seg.energy = coeffs.b1 * seg.distance_m + coeffs.b2 * sq_speed_sum * seg.distance_m +
                 coeffs.b3 * c.pos * seg.distance_m + coeffs.b4 * c.neg * seg.distance_m +
                 coeffs.b5 * h_pos + coeffs.b6 * h_neg + coeffs.b7 * seg.duration_s;
    segments.push_back(seg);
  }
  if (segments.empty()) throw Error(Errc::TooFewSamples, "trip shorter than one segment");
  return segments;
}

double decauwer_trip_energy(std::span<const double> speed, std::span<const double> grade,
                            const MlrCoeffs& coeffs, double segment_len_s) {
  double total = 0.0;
  for (const SegmentEnergy& s : decauwer_segment_energies(speed, grade, coeffs, segment_len_s))
    total += s.energy;
  return total;
}

int feature_dim(FeatureSchema schema) {
  return schema == FeatureSchema::Alvarez14 ? 14 : 137;
}

namespace {

std::pair<double, double> mean_var(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, var / static_cast<double>(xs.size())};
}

}  // namespace

std::vector<double> window_features(std::span<const double> speed,
                                    std::span<const double> grade,
                                    FeatureSchema schema) {
  if (speed.size() != grade.size())
    throw Error(Errc::LengthMismatch, "speed/grade lengths differ");
  if (speed.size() < 3)
    throw Error(Errc::TooShortTrip, "need at least 3 samples to derive jerk features");

  std::vector<double> v(speed.begin(), speed.end());
  std::vector<double> a = accelerations(v);
  std::vector<double> jerk = accelerations(a);  // second forward difference

  // Jerk phases: start-of-movement, cruise-tracking, start-of-brake,
  // end-of-brake.
  std::vector<double> acc_pos, acc_neg, smj, ctj, sbj, ebj;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (a[i] > 0) acc_pos.push_back(a[i]);
    if (a[i] < 0) acc_neg.push_back(a[i]);
    if (a[i] > 0 && v[i] < 0.5) smj.push_back(jerk[i]);
    if (std::abs(a[i]) < 0.1) ctj.push_back(jerk[i]);
    if (i > 0 && a[i] < 0 && a[i - 1] >= 0) sbj.push_back(jerk[i]);
    if (a[i] < 0 && v[i] < 0.5) ebj.push_back(jerk[i]);
  }

  std::vector<double> features;
  features.reserve(static_cast<std::size_t>(feature_dim(schema)));
  for (const auto* group : {&v, &acc_pos, &acc_neg, &smj, &ctj, &sbj, &ebj}) {
    auto [m, var] = mean_var(*group);
    features.push_back(m);
    features.push_back(var);
  }
  if (schema == FeatureSchema::Felipe137) {
    std::vector<double> g(grade.begin(), grade.end());
    auto [gm, gv] = mean_var(g);
    features.push_back(gm);
    features.push_back(gv);
    features.resize(137, 0.0);  // route features unavailable in this data
  }
  return features;
}

ShallowModel fit_shallow(const std::vector<std::vector<double>>& features,
                         const std::vector<double>& trip_energy,
                         FeatureSchema schema, double ridge_lambda) {
  if (features.size() < 2)
    throw Error(Errc::TooShortTrip, "fit_shallow needs at least 2 training trips");
  if (features.size() != trip_energy.size())
    throw Error(Errc::LengthMismatch, "feature/target counts differ");
  const std::size_t d = static_cast<std::size_t>(feature_dim(schema));
  for (const auto& f : features)
    if (f.size() != d) throw Error(Errc::LengthMismatch, "feature vector has wrong length");

  // Normal equations with an intercept column, solved by Cholesky.
  const std::size_t m = d + 1;
  std::vector<double> ata(m * m, 0.0);
  std::vector<double> aty(m, 0.0);
  for (std::size_t r = 0; r < features.size(); ++r) {
    auto x = [&](std::size_t j) { return j < d ? features[r][j] : 1.0; };
    for (std::size_t i = 0; i < m; ++i) {
      aty[i] += x(i) * trip_energy[r];
      for (std::size_t j = i; j < m; ++j) ata[i * m + j] += x(i) * x(j);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    ata[i * m + i] += ridge_lambda;
    for (std::size_t j = 0; j < i; ++j) ata[i * m + j] = ata[j * m + i];
  }

  // In-place Cholesky factorization ata = L L^T.
  std::vector<double>& a = ata;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * m + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * m + k] * a[j * m + k];
      if (i == j) {
        if (s <= 0.0)
          throw Error(Errc::SingularSystem,
                      "fit_shallow: collinear features (enable the ridge term)");
        a[i * m + i] = std::sqrt(s);
      } else {
        a[i * m + j] = s / a[j * m + j];
      }
    }
  }
  // Solve L z = aty, then L^T w = z.
  std::vector<double> w(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = aty[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * m + k] * w[k];
    w[i] = s / a[i * m + i];
  }
  for (std::size_t ii = m; ii-- > 0;) {
    double s = w[ii];
    for (std::size_t k = ii + 1; k < m; ++k) s -= a[k * m + ii] * w[k];
    w[ii] = s / a[ii * m + ii];
  }

  ShallowModel model;
  model.schema = schema;
  model.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d));
  model.bias = w[d];
  return model;
}

double predict_shallow(const ShallowModel& model, std::span<const double> features) {
  if (features.size() != model.weights.size())
    throw Error(Errc::LengthMismatch, "feature vector does not match the fitted schema");
  double y = model.bias;
  for (std::size_t i = 0; i < features.size(); ++i) y += model.weights[i] * features[i];
  return y;
}

}  // namespace evpower
