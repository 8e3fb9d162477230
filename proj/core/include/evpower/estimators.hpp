#pragma once

// Concrete PowerEstimator adapters used by the comparison harness: the
// trained network plus the physics and regression baselines.

#include <memory>

#include "evpower/baselines.hpp"
#include "evpower/cnn.hpp"
#include "evpower/evaluation.hpp"
#include "evpower/vehicle.hpp"

namespace evpower {

/// Windows the cell's signals, encodes them with the checkpoint's encoder,
/// and denormalizes the network output with the stored training stats.
class CnnEstimator : public PowerEstimator {
 public:
  CnnEstimator(Checkpoint ckpt, VehicleParams vp, PowertrainParams pt,
               std::string display_name = {});
  std::string name() const override { return name_; }
  ModelOutput predict(const TestCell& cell) const override;

 private:
  Checkpoint ckpt_;
  std::unique_ptr<Network<float>> net_;
  EncoderKind encoder_;
  NormStats norm_;
  VehicleParams vp_;
  PowertrainParams pt_;
  std::string name_;
};

class YangEstimator : public PowerEstimator {
 public:
  YangEstimator(VehicleParams vp, PowertrainParams pt) : vp_(vp), pt_(pt) {}
  std::string name() const override { return "yang"; }
  ModelOutput predict(const TestCell& cell) const override;

 private:
  VehicleParams vp_;
  PowertrainParams pt_;
};

class GalvinEstimator : public PowerEstimator {
 public:
  explicit GalvinEstimator(GalvinCoeffs coeffs = {}) : coeffs_(coeffs) {}
  std::string name() const override { return "galvin"; }
  ModelOutput predict(const TestCell& cell) const override;

 private:
  GalvinCoeffs coeffs_;
};

/// Per-sample power as each segment's mean power (segment energy over
/// segment duration).
class DeCauwerEstimator : public PowerEstimator {
 public:
  explicit DeCauwerEstimator(MlrCoeffs coeffs, double segment_len_s = 10.0)
      : coeffs_(coeffs), segment_len_s_(segment_len_s) {}
  std::string name() const override { return "decauwer"; }
  ModelOutput predict(const TestCell& cell) const override;

 private:
  MlrCoeffs coeffs_;
  double segment_len_s_;
};

/// Trip-total regressor on window feature statistics; emits one scalar per
/// cell, so it carries no per-sample metrics.
class ShallowEstimator : public PowerEstimator {
 public:
  ShallowEstimator(ShallowModel model, std::string display_name)
      : model_(std::move(model)), name_(std::move(display_name)) {}
  std::string name() const override { return name_; }
  ModelOutput predict(const TestCell& cell) const override;

 private:
  ShallowModel model_;
  std::string name_;
};

/// Emits the cell's own ground truth; a harness self-check.
class IdentityEstimator : public PowerEstimator {
 public:
  std::string name() const override { return "identity_oracle"; }
  ModelOutput predict(const TestCell& cell) const override {
    ModelOutput out;
    out.power = cell.p_actual;
    return out;
  }
};

/// Builds one evaluation cell: ground-truth power from the synthetic oracle,
/// trimmed to whole windows.
TestCell make_test_cell(const DriveCycle& cycle, const GradeProfile& grade,
                        const OracleConfig& oracle, const VehicleParams& vp,
                        const PowertrainParams& pt);

/// Fits a feature-statistics regressor on (cycle, grade) training trips with
/// oracle trip energies as the target.
ShallowModel fit_shallow_on_trips(const std::vector<TestCell>& trips, FeatureSchema schema,
                                  double ridge_lambda = 1e-6);

}  // namespace evpower
