#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "evpower/errors.hpp"
#include "evpower/evaluation.hpp"
#include "evpower/rng.hpp"

using namespace evpower;

TEST_CASE("rmse basics and hand value") {
  std::vector<double> a = {1, 2, 3};
  CHECK(rmse(a, a) == 0.0);
  std::vector<double> b = {3, 4, 5};
  CHECK(rmse(a, b) == doctest::Approx(2.0));
  std::vector<double> z = {0, 0}, e = {3, 4};
  CHECK(rmse(z, e) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
  CHECK(rmse(z, e) == doctest::Approx(3.5355).epsilon(1e-4));
}

TEST_CASE("mae basics and hand value") {
  std::vector<double> a = {1, 2, 3, 4};
  CHECK(mae(a, a) == 0.0);
  std::vector<double> alt = {2, 1, 4, 3};
  CHECK(mae(a, alt) == doctest::Approx(1.0));
  std::vector<double> z = {0, 0}, e = {3, 4};
  CHECK(mae(z, e) == doctest::Approx(3.5));
}

TEST_CASE("corr affine invariance and sign") {
  Rng rng(51);
  std::vector<double> x(200);
  for (double& v : x) v = rng.uniform(-10, 10);
  CHECK(corr(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  CHECK(corr(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  std::vector<double> affine(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) affine[i] = 3.5 * x[i] - 7.0;
  CHECK(corr(x, affine) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> flat(x.size(), 2.0);
  try {
    corr(x, flat);
    FAIL("expected ZeroVariance");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroVariance);
  }
}

TEST_CASE("rmse dominates mae") {
  Rng rng(52);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(100), b(100);
    for (std::size_t i = 0; i < 100; ++i) {
      a[i] = rng.uniform(-100, 100);
      b[i] = rng.uniform(-100, 100);
    }
    CHECK(rmse(a, b) >= mae(a, b) - 1e-12);
  }
}

TEST_CASE("energy_deviation identities") {
  std::vector<double> p(101, 1000.0);
  CHECK(energy_deviation(p, p) == 0.0);

  std::vector<double> scaled(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) scaled[i] = 1.1 * p[i];
  CHECK(energy_deviation(p, scaled) == doctest::Approx(10.0).epsilon(1e-9));

  std::vector<double> est(p.size(), 900.0);
  CHECK(energy_deviation(p, est) == doctest::Approx(10.0).epsilon(1e-12));

  // scale awareness: multiplying both series by c leaves it unchanged
  Rng rng(53);
  std::vector<double> act(300), pred(300);
  for (std::size_t i = 0; i < act.size(); ++i) {
    act[i] = rng.uniform(100, 5000);
    pred[i] = act[i] + rng.uniform(-200, 200);
  }
  double base = energy_deviation(act, pred);
  for (double c : {3.0, -2.0, 0.25}) {
    std::vector<double> act_c(act.size()), pred_c(act.size());
    for (std::size_t i = 0; i < act.size(); ++i) {
      act_c[i] = c * act[i];
      pred_c[i] = c * pred[i];
    }
    CHECK(energy_deviation(act_c, pred_c) == doctest::Approx(base).epsilon(1e-9));
  }

  std::vector<double> zero(10, 0.0);
  try {
    energy_deviation(zero, zero);
    FAIL("expected ZeroEnergy");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroEnergy);
  }
}

TEST_CASE("kfold plan structure at k = 10") {
  KfoldPlan plan = kfold_plan(105, 10, 9);
  REQUIRE(plan.k == 10);

  // every partition validates exactly 3 times over the 10 folds
  std::vector<int> val_appearances(10, 0);
  for (int fold = 0; fold < 10; ++fold) {
    CHECK(plan.val_partitions[static_cast<std::size_t>(fold)].size() == 3);
    for (int p : plan.val_partitions[static_cast<std::size_t>(fold)])
      ++val_appearances[static_cast<std::size_t>(p)];
  }
  for (int count : val_appearances) CHECK(count == 3);

  // per fold: train and validation are disjoint and cover all windows
  for (int fold = 0; fold < 10; ++fold) {
    auto tr = plan.train_indices(fold);
    auto va = plan.val_indices(fold);
    std::set<int> all(tr.begin(), tr.end());
    for (int i : va) all.insert(i);
    CHECK(all.size() == 105);
    CHECK(tr.size() + va.size() == 105);
  }

  // determinism
  KfoldPlan again = kfold_plan(105, 10, 9);
  CHECK(again.partitions == plan.partitions);
}

TEST_CASE("kfold rejects too few windows") {
  try {
    kfold_plan(9, 10, 1);
    FAIL("expected TooFewWindows");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooFewWindows);
  }
}

TEST_CASE("incomplete beta matches reference identities") {
  // I_x(1, 1) = x
  for (double x : {0.1, 0.5, 0.9})
    CHECK(reg_incomplete_beta(1, 1, x) == doctest::Approx(x).epsilon(1e-12));
  // I_x(2, 2) = x^2 (3 - 2x)
  for (double x : {0.2, 0.7})
    CHECK(reg_incomplete_beta(2, 2, x) ==
          doctest::Approx(x * x * (3 - 2 * x)).epsilon(1e-12));
  CHECK(reg_incomplete_beta(3.5, 1.25, 0.0) == 0.0);
  CHECK(reg_incomplete_beta(3.5, 1.25, 1.0) == 1.0);
}

TEST_CASE("student t tail probabilities") {
  // With 1 dof the t distribution is Cauchy: P(T > 1) = 1/4.
  CHECK(student_t_sf(1.0, 1) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(student_t_sf(0.0, 7) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(student_t_sf(-1.0, 1) == doctest::Approx(0.75).epsilon(1e-9));
  // Large dof approaches the normal tail: P(Z > 1.96) ~ 0.025.
  CHECK(student_t_sf(1.96, 100000) == doctest::Approx(0.025).epsilon(1e-3));
}

TEST_CASE("one-tailed t critical value at 18 dof") {
  double t_crit = t_critical_one_tail(18, 0.05);
  CHECK(t_crit == doctest::Approx(1.734).epsilon(0.001 / 1.734));
  // round trip: the tail probability at the critical value is alpha
  CHECK(student_t_sf(t_crit, 18) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("pooled t-test identical samples") {
  std::vector<double> a = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  TTestResult r = pooled_ttest(a, a);
  CHECK(r.t_stat == doctest::Approx(0.0));
  CHECK(!r.reject_null);
  CHECK(r.df == 18);
  CHECK(r.t_critical == doctest::Approx(1.734).epsilon(1e-3));
}

TEST_CASE("pooled t-test pooled variance matches hand arithmetic on 3+3") {
  std::vector<double> a = {1, 2, 3};  // mean 2, sample var 1
  std::vector<double> b = {2, 4, 6};  // mean 4, sample var 4
  TTestResult r = pooled_ttest(a, b);
  CHECK(r.mean_a == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(r.mean_b == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(r.var_a == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.var_b == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(r.pooled_var == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(r.df == 4);
  double expected_t = (2.0 - 4.0) / std::sqrt(2.5 * (2.0 / 3.0));
  CHECK(r.t_stat == doctest::Approx(expected_t).epsilon(1e-12));
}

TEST_CASE("pooled t-test detects a clear separation") {
  Rng rng(54);
  std::vector<double> a(10), b(10);
  for (std::size_t i = 0; i < 10; ++i) {
    double noise = rng.uniform(-0.01, 0.01);
    b[i] = 1.0 + noise;
    a[i] = 2.0 + rng.uniform(-0.01, 0.01);
  }
  TTestResult r = pooled_ttest(a, b);
  CHECK(r.t_stat > 10.0);
  CHECK(r.p_one_tail < 1e-4);
  CHECK(r.reject_null);
}

TEST_CASE("pooled t-test rejects degenerate samples") {
  std::vector<double> a = {1.0};
  std::vector<double> b = {1.0, 2.0};
  try {
    pooled_ttest(a, b);
    FAIL("expected DegenerateSample");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateSample);
  }
}

namespace {

// Test doubles for the comparison harness.
class OracleEstimator : public PowerEstimator {
 public:
  std::string name() const override { return "oracle"; }
  ModelOutput predict(const TestCell& cell) const override {
    ModelOutput out;
    out.power = cell.p_actual;
    return out;
  }
};

class BiasedEstimator : public PowerEstimator {
 public:
  std::string name() const override { return "biased"; }
  ModelOutput predict(const TestCell& cell) const override {
    ModelOutput out;
    std::vector<double> p = cell.p_actual;
    for (double& v : p) v = 1.1 * v;
    out.power = std::move(p);
    return out;
  }
};

class TripOnlyEstimator : public PowerEstimator {
 public:
  std::string name() const override { return "trip_only"; }
  ModelOutput predict(const TestCell& cell) const override {
    ModelOutput out;
    double e = 0.0;
    for (std::size_t i = 1; i < cell.p_actual.size(); ++i)
      e += 0.05 * (cell.p_actual[i - 1] + cell.p_actual[i]);
    out.trip_energy_j = 1.2 * e;
    return out;
  }
};

std::vector<TestCell> make_cells() {
  Rng rng(55);
  std::vector<TestCell> cells;
  for (int c = 0; c < 2; ++c) {
    TestCell cell;
    cell.cycle.name = "cycle" + std::to_string(c);
    cell.grade.name = "grade" + std::to_string(c);
    cell.cycle.speed.values.assign(400, 10.0);
    cell.grade.grade.values.assign(400, 0.0);
    cell.p_actual.resize(400);
    for (double& p : cell.p_actual) p = rng.uniform(500, 5000);
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace

TEST_CASE("run_comparison scores the identity oracle perfectly") {
  std::vector<std::unique_ptr<PowerEstimator>> models;
  models.push_back(std::make_unique<OracleEstimator>());
  models.push_back(std::make_unique<BiasedEstimator>());
  models.push_back(std::make_unique<TripOnlyEstimator>());
  auto cells = make_cells();
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "evpower_report";
  fs::remove_all(dir);
  EvalReport report = run_comparison(models, cells, dir);
  REQUIRE(report.rows.size() == 3);

  const ModelReportRow& oracle = report.rows[0];
  CHECK(oracle.mean_e_dev_pct == doctest::Approx(0.0));
  CHECK(*oracle.rmse == doctest::Approx(0.0));
  CHECK(*oracle.corr == doctest::Approx(1.0));

  const ModelReportRow& biased = report.rows[1];
  CHECK(biased.mean_e_dev_pct == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(*biased.rmse >= *biased.mae);

  const ModelReportRow& trip = report.rows[2];
  CHECK(!trip.rmse.has_value());
  CHECK(!trip.mae.has_value());
  CHECK(!trip.corr.has_value());
  CHECK(trip.mean_e_dev_pct == doctest::Approx(20.0).epsilon(1e-9));

  CHECK(fs::exists(dir / "report.csv"));
  CHECK(fs::exists(dir / "energy_curve_cycle0_grade0.csv"));

  // trip-only models appear as NA in report.csv
  std::ifstream in(dir / "report.csv");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.find("trip_only,NA,NA,NA") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("run_comparison output is reproducible apart from timing") {
  std::vector<std::unique_ptr<PowerEstimator>> models;
  models.push_back(std::make_unique<BiasedEstimator>());
  auto cells = make_cells();
  namespace fs = std::filesystem;
  fs::path dir1 = fs::temp_directory_path() / "evpower_rep1";
  fs::path dir2 = fs::temp_directory_path() / "evpower_rep2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  run_comparison(models, cells, dir1);
  run_comparison(models, cells, dir2);

  auto strip_timing = [](const fs::path& p) {
    std::ifstream in(p);
    std::string line, out;
    while (std::getline(in, line)) {
      out += line.substr(0, line.rfind(','));
      out += '\n';
    }
    return out;
  };
  CHECK(strip_timing(dir1 / "report.csv") == strip_timing(dir2 / "report.csv"));

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };
  CHECK(slurp(dir1 / "energy_curve_cycle0_grade0.csv") ==
        slurp(dir2 / "energy_curve_cycle0_grade0.csv"));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}
