#include "evpower/estimators.hpp"

#include <cmath>

#include "evpower/encoders.hpp"
#include "evpower/errors.hpp"

namespace evpower {

CnnEstimator::CnnEstimator(Checkpoint ckpt, VehicleParams vp, PowertrainParams pt,
                           std::string display_name)
    : ckpt_(std::move(ckpt)), vp_(vp), pt_(pt), name_(std::move(display_name)) {
  if (!ckpt_.output_norm)
    throw Error(Errc::InvalidArgument,
                "checkpoint carries no output normalization stats; cannot predict watts");
  if (ckpt_.encoder.empty())
    throw Error(Errc::InvalidArgument, "checkpoint does not name its encoder");
  encoder_ = encoder_from_name(ckpt_.encoder);
  norm_ = *ckpt_.output_norm;
  net_ = std::make_unique<Network<float>>(ckpt_);
  if (name_.empty()) name_ = ckpt_.spec.name + "_" + ckpt_.encoder;
}

ModelOutput CnnEstimator::predict(const TestCell& cell) const {
  const std::vector<double>& v = cell.cycle.speed.values;
  const std::vector<double>& g = cell.grade.grade.values;
  if (v.size() != g.size() || v.size() != cell.p_actual.size())
    throw Error(Errc::LengthMismatch, "test cell signals are not aligned");
  std::vector<double> a = accelerations(v);

  auto ws = net_->make_workspace();
  ModelOutput out;
  out.power = std::vector<double>(v.size(), 0.0);
  const std::size_t m = v.size() / kWindowLen;
  for (std::size_t k = 0; k < m; ++k) {
    Window w;
    const std::size_t lo = k * kWindowLen;
    w.v_sp.assign(v.begin() + static_cast<std::ptrdiff_t>(lo),
                  v.begin() + static_cast<std::ptrdiff_t>(lo + kWindowLen));
    w.r_el.assign(g.begin() + static_cast<std::ptrdiff_t>(lo),
                  g.begin() + static_cast<std::ptrdiff_t>(lo + kWindowLen));
    w.t_eff.resize(kWindowLen);
    for (int i = 0; i < kWindowLen; ++i) {
      std::size_t s = lo + static_cast<std::size_t>(i);
      w.t_eff[static_cast<std::size_t>(i)] = tractive_effort(v[s], a[s], g[s], vp_, pt_);
    }
    w.p_batt.assign(kWindowLen, 0.0);
    Tensor3<float> img = encode_window(w, encoder_);
    std::span<const float> pred = net_->forward(img.data, ws);
    for (int i = 0; i < kWindowLen; ++i)
      (*out.power)[lo + static_cast<std::size_t>(i)] =
          denormalize_power(static_cast<double>(pred[static_cast<std::size_t>(i)]), norm_);
  }
  return out;
}

ModelOutput YangEstimator::predict(const TestCell& cell) const {
  const std::vector<double>& v = cell.cycle.speed.values;
  const std::vector<double>& g = cell.grade.grade.values;
  std::vector<double> a = accelerations(v);
  ModelOutput out;
  out.power = std::vector<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    (*out.power)[i] = yang_power(v[i], a[i], g[i], vp_, pt_);
  return out;
}

ModelOutput GalvinEstimator::predict(const TestCell& cell) const {
  ModelOutput out;
  out.power = galvin_power_series(cell.cycle.speed.values, coeffs_);
  return out;
}

ModelOutput DeCauwerEstimator::predict(const TestCell& cell) const {
  auto segments = decauwer_segment_energies(cell.cycle.speed.values,
                                            cell.grade.grade.values, coeffs_,
                                            segment_len_s_);
  ModelOutput out;
  out.power = std::vector<double>(cell.cycle.speed.values.size(), 0.0);
  std::size_t pos = 0;
  for (const SegmentEnergy& seg : segments) {
    std::size_t n = static_cast<std::size_t>(std::llround(seg.duration_s * 10.0));
    double mean_power = seg.energy / seg.duration_s;
    for (std::size_t i = 0; i < n && pos < out.power->size(); ++i, ++pos)
      (*out.power)[pos] = mean_power;
  }
  // any trailing samples keep the last segment's mean power
  for (; pos < out.power->size(); ++pos)
    (*out.power)[pos] = segments.back().energy / segments.back().duration_s;
  return out;
}

ModelOutput ShallowEstimator::predict(const TestCell& cell) const {
  std::vector<double> features = window_features(
      cell.cycle.speed.values, cell.grade.grade.values, model_.schema);
  ModelOutput out;
  out.trip_energy_j = predict_shallow(model_, features);
  return out;
}

TestCell make_test_cell(const DriveCycle& cycle, const GradeProfile& grade,
                        const OracleConfig& oracle, const VehicleParams& vp,
                        const PowertrainParams& pt) {
  if (cycle.speed.values.size() != grade.grade.values.size())
    throw Error(Errc::LengthMismatch,
                "cycle '" + cycle.name + "' and grade '" + grade.name +
                    "' have different lengths");
  const std::size_t full = cycle.speed.values.size() / kWindowLen * kWindowLen;
  if (full == 0)
    throw Error(Errc::TooShort, "cell shorter than one window");
  TestCell cell;
  cell.cycle = cycle;
  cell.grade = grade;
  cell.cycle.speed.values.resize(full);
  cell.grade.grade.values.resize(full);
  SampledSeries p = synth_power_oracle(cell.cycle, cell.grade, oracle, vp, pt);
  cell.p_actual = std::move(p.values);
  return cell;
}

ShallowModel fit_shallow_on_trips(const std::vector<TestCell>& trips, FeatureSchema schema,
                                  double ridge_lambda) {
  std::vector<std::vector<double>> features;
  std::vector<double> energy;
  for (const TestCell& t : trips) {
    features.push_back(window_features(t.cycle.speed.values, t.grade.grade.values, schema));
    double e = 0.0;
    for (std::size_t i = 1; i < t.p_actual.size(); ++i)
      e += 0.05 * (t.p_actual[i - 1] + t.p_actual[i]);  // trapezoid at 0.1 s
    energy.push_back(e);
  }
  return fit_shallow(features, energy, schema, ridge_lambda);
}

}  // namespace evpower
