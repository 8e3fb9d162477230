#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace evpower {

/// Multivariate power model P = r V + s V^2 + t V^3 + u V A. Defaults are
/// the published NissanSV coefficients.
struct GalvinCoeffs {
  double r = 479.1;
  double s = -18.93;
  double t = 0.7876;
  double u = 1507.0;
};

double galvin_power(double v, double a, const GalvinCoeffs& coeffs);

/// Per-sample power over a speed trace, using the shared forward-difference
/// acceleration at 10 Hz.
std::vector<double> galvin_power_series(const std::vector<double>& speed,
                                        const GalvinCoeffs& coeffs);

/// Segment-level MLR coefficients. There are no defaults: they must come
/// from configuration.
struct MlrCoeffs {
  double b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0, b7 = 0;
};

MlrCoeffs load_mlr_coeffs_json(const std::filesystem::path& path);

/// Sum of |v_i^2 - v_{i-1}^2| per distance, split by the sign of the
/// squared-speed change.
struct CmfSplit {
  double pos = 0.0;
  double neg = 0.0;
};
CmfSplit cmf(std::span<const double> speeds, double delta_s);

struct SegmentEnergy {
  double energy = 0.0;      // model units per segment
  double distance_m = 0.0;
  double duration_s = 0.0;
};

/// Splits the trip into fixed-duration segments and evaluates the
/// seven-term regression on each; wind speed is 0 and the temperature
/// scaling term is fixed at 1.
std::vector<SegmentEnergy> decauwer_segment_energies(std::span<const double> speed,
                                                     std::span<const double> grade,
                                                     const MlrCoeffs& coeffs,
                                                     double segment_len_s = 10.0);
double decauwer_trip_energy(std::span<const double> speed, std::span<const double> grade,
                            const MlrCoeffs& coeffs, double segment_len_s = 10.0);

enum class FeatureSchema { Alvarez14, Felipe137 };

int feature_dim(FeatureSchema schema);

/// Trip statistics for the shallow regressors: mean and variance of speed,
/// positive/negative acceleration, and the four jerk phases; the wide
/// schema appends road-grade stats and zero-fills the route features that
/// do not exist in this data.
std::vector<double> window_features(std::span<const double> speed,
                                    std::span<const double> grade,
                                    FeatureSchema schema);

struct ShallowModel {
  std::vector<double> weights;
  double bias = 0.0;
  FeatureSchema schema = FeatureSchema::Alvarez14;
};

/// Least-squares fit of trip-total energy on features, with a small ridge
/// term for conditioning (lambda = 0 disables it and collinear features
/// then raise SingularSystem).
ShallowModel fit_shallow(const std::vector<std::vector<double>>& features,
                         const std::vector<double>& trip_energy,
                         FeatureSchema schema, double ridge_lambda = 1e-6);

double predict_shallow(const ShallowModel& model, std::span<const double> features);

}  // namespace evpower
