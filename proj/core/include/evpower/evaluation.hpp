#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evpower/series.hpp"

namespace evpower {

double rmse(std::span<const double> actual, std::span<const double> est);
double mae(std::span<const double> actual, std::span<const double> est);
/// Pearson correlation; both series need nonzero variance.
double corr(std::span<const double> actual, std::span<const double> est);
/// |integral(actual) - integral(est)| / |integral(actual)| * 100, trapezoidal.
double energy_deviation(std::span<const double> p_act, std::span<const double> p_est,
                        double dt = 0.1);

struct MetricSet {
  double rmse = 0.0;
  double mae = 0.0;
  double corr = 0.0;
  double e_dev_pct = 0.0;
};

struct FoldResult {
  int fold = 0;
  MetricSet metrics;
};

/// Cyclic k-fold plan: windows are shuffled once, cut into k partitions,
/// and fold j validates on partitions {j, j+1, j+2} (mod k) while training
/// on the rest, so every partition validates exactly 3 times when k = 10.
struct KfoldPlan {
  int k = 0;
  std::vector<std::vector<int>> partitions;          // window indices per partition
  std::vector<std::vector<int>> val_partitions;      // partition ids per fold
  std::vector<int> train_indices(int fold) const;
  std::vector<int> val_indices(int fold) const;
};
KfoldPlan kfold_plan(int m, int k, std::uint64_t seed);

struct TTestResult {
  double mean_a = 0, mean_b = 0;
  double var_a = 0, var_b = 0;   // sample variances
  double pooled_var = 0;
  double t_stat = 0;
  int df = 0;
  double p_one_tail = 0;
  double t_critical = 0;
  bool reject_null = false;
};

/// Two-sample equal-variance t-test; one-tailed p from the Student CDF
/// evaluated through the regularized incomplete beta function.
TTestResult pooled_ttest(std::span<const double> a, std::span<const double> b,
                         double alpha = 0.05);

double reg_incomplete_beta(double a, double b, double x);
/// P(T > t) for Student's t with df degrees of freedom.
double student_t_sf(double t, int df);
double t_critical_one_tail(int df, double alpha);

// --- comparison harness ------------------------------------------------

/// One evaluation cell: a drive cycle paired with a grade profile plus the
/// oracle's ground-truth power (already trimmed to whole windows).
struct TestCell {
  DriveCycle cycle;
  GradeProfile grade;
  std::vector<double> p_actual;  // W
};

struct ModelOutput {
  std::optional<std::vector<double>> power;  // per-sample watts
  std::optional<double> trip_energy_j;       // trip-total models
};

class PowerEstimator {
 public:
  virtual ~PowerEstimator() = default;
  virtual std::string name() const = 0;
  virtual ModelOutput predict(const TestCell& cell) const = 0;
};

struct ModelReportRow {
  std::string model;
  std::optional<double> rmse, mae, corr;  // absent for trip-only models
  double mean_e_dev_pct = 0.0;
  double avg_pred_time_s = 0.0;
};

struct EvalReport {
  std::vector<ModelReportRow> rows;
};

/// Evaluates every estimator on every cell; writes report.csv plus one
/// cumulative-energy curve CSV per cell into out_dir (empty path disables
/// file output). Per-sample metrics are pooled across cells.
EvalReport run_comparison(const std::vector<std::unique_ptr<PowerEstimator>>& models,
                          const std::vector<TestCell>& cells,
                          const std::filesystem::path& out_dir);

void save_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace evpower
