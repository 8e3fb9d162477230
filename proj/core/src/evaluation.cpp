#include "evpower/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "evpower/errors.hpp"
#include "evpower/rng.hpp"

namespace evpower {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(Errc::LengthMismatch, "series lengths differ");
  if (a.empty()) throw Error(Errc::LengthMismatch, "empty series");
}

}  // namespace

double rmse(std::span<const double> actual, std::span<const double> est) {
  check_pair(actual, est);
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    double d = actual[i] - est[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(actual.size()));
}

double mae(std::span<const double> actual, std::span<const double> est) {
  check_pair(actual, est);
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) acc += std::abs(actual[i] - est[i]);
  return acc / static_cast<double>(actual.size());
}

double corr(std::span<const double> actual, std::span<const double> est) {
  check_pair(actual, est);
  const double n = static_cast<double>(actual.size());
  double ma = std::accumulate(actual.begin(), actual.end(), 0.0) / n;
  double me = std::accumulate(est.begin(), est.end(), 0.0) / n;
  double sae = 0.0, saa = 0.0, see = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    double da = actual[i] - ma;
    double de = est[i] - me;
    sae += da * de;
    saa += da * da;
    see += de * de;
  }
  if (saa == 0.0 || see == 0.0)
    throw Error(Errc::ZeroVariance, "correlation undefined for a constant series");
  return sae / std::sqrt(saa * see);
}

namespace {

double trapezoid(std::span<const double> y, double dt) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * dt;
}

}  // namespace

double energy_deviation(std::span<const double> p_act, std::span<const double> p_est,
                        double dt) {
  check_pair(p_act, p_est);
  double e_act = trapezoid(p_act, dt);
  double e_est = trapezoid(p_est, dt);
  if (e_act == 0.0)
    throw Error(Errc::ZeroEnergy, "actual energy integrates to zero");
  return std::abs(e_act - e_est) / std::abs(e_act) * 100.0;
}

std::vector<int> KfoldPlan::train_indices(int fold) const {
  std::vector<int> out;
  const auto& vp = val_partitions[static_cast<std::size_t>(fold)];
  for (int p = 0; p < k; ++p) {
    if (std::find(vp.begin(), vp.end(), p) != vp.end()) continue;
    const auto& part = partitions[static_cast<std::size_t>(p)];
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<int> KfoldPlan::val_indices(int fold) const {
  std::vector<int> out;
  for (int p : val_partitions[static_cast<std::size_t>(fold)]) {
    const auto& part = partitions[static_cast<std::size_t>(p)];
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

KfoldPlan kfold_plan(int m, int k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidArgument, "k must be at least 2");
  if (m < k) throw Error(Errc::TooFewWindows,
                         std::to_string(m) + " windows cannot fill " + std::to_string(k) +
                             " partitions");
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  KfoldPlan plan;
  plan.k = k;
  plan.partitions.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < m; ++i)
    plan.partitions[static_cast<std::size_t>(i % k)].push_back(order[static_cast<std::size_t>(i)]);

  // 3 of 10 partitions validate per fold; scale the count for other k.
  int n_val = std::max(1, (3 * k) / 10);
  plan.val_partitions.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j)
    for (int s = 0; s < n_val; ++s)
      plan.val_partitions[static_cast<std::size_t>(j)].push_back((j + s) % k);
  return plan;
}

// --- Student's t machinery ----------------------------------------------

double reg_incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0)
    throw Error(Errc::InvalidArgument, "incomplete beta requires positive parameters");
  if (x < 0.0 || x > 1.0)
    throw Error(Errc::InvalidArgument, "incomplete beta requires x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  // Continued fraction (Lentz) converges fastest for x below
  // (a+1)/(a+b+2); beyond that use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
  // The strict inequality keeps the boundary case from recursing forever.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - reg_incomplete_beta(b, a, 1.0 - x);

  const double ln_front = a * std::log(x) + b * std::log(1.0 - x) - std::log(a) -
                          (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  const double front = std::exp(ln_front);

  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-12;
  double f = 1.0, c = 1.0, d = 0.0;
  for (int i = 0; i <= 500; ++i) {
    int m = i / 2;
    double numerator;
    if (i == 0) {
      numerator = 1.0;
    } else if (i % 2 == 0) {
      numerator = m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    } else {
      numerator = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    }
    d = 1.0 + numerator * d;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = 1.0 + numerator / c;
    if (std::abs(c) < tiny) c = tiny;
    double delta = c * d;
    f *= delta;
    if (std::abs(1.0 - delta) < eps) return front * (f - 1.0);
  }
  throw Error(Errc::NoConvergence, "incomplete beta continued fraction did not converge");
}

double student_t_sf(double t, int df) {
  if (df < 1) throw Error(Errc::InvalidArgument, "degrees of freedom must be >= 1");
  double x = static_cast<double>(df) / (df + t * t);
  double half_tail = 0.5 * reg_incomplete_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? half_tail : 1.0 - half_tail;
}

double t_critical_one_tail(int df, double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw Error(Errc::InvalidArgument, "alpha must be in (0, 0.5)");
  double lo = 0.0, hi = 1.0;
  while (student_t_sf(hi, df) > alpha) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (student_t_sf(mid, df) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12) break;
  }
  return 0.5 * (lo + hi);
}

TTestResult pooled_ttest(std::span<const double> a, std::span<const double> b,
                         double alpha) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(Errc::DegenerateSample, "each sample needs at least 2 observations");
  auto sample_stats = [](std::span<const double> s) {
    double n = static_cast<double>(s.size());
    double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
    double var = 0.0;
    for (double x : s) var += (x - mean) * (x - mean);
    return std::pair{mean, var / (n - 1.0)};
  };
  TTestResult r;
  auto [ma, va] = sample_stats(a);
  auto [mb, vb] = sample_stats(b);
  r.mean_a = ma;
  r.mean_b = mb;
  r.var_a = va;
  r.var_b = vb;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  r.df = static_cast<int>(na + nb) - 2;
  r.pooled_var = ((na - 1.0) * va + (nb - 1.0) * vb) / static_cast<double>(r.df);
  if (r.pooled_var <= 0.0)
    throw Error(Errc::DegenerateSample, "pooled variance is zero");
  r.t_stat = (ma - mb) / std::sqrt(r.pooled_var * (1.0 / na + 1.0 / nb));
  r.p_one_tail = student_t_sf(r.t_stat, r.df);
  r.t_critical = t_critical_one_tail(r.df, alpha);
  r.reject_null = r.t_stat > r.t_critical;
  return r;
}

// --- comparison harness ---------------------------------------------------

namespace {

std::vector<double> cumulative_energy(std::span<const double> p, double dt) {
  std::vector<double> e(p.size(), 0.0);
  for (std::size_t i = 1; i < p.size(); ++i)
    e[i] = e[i - 1] + 0.5 * (p[i - 1] + p[i]) * dt;
  return e;
}

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return out;
}

}  // namespace

EvalReport run_comparison(const std::vector<std::unique_ptr<PowerEstimator>>& models,
                          const std::vector<TestCell>& cells,
                          const std::filesystem::path& out_dir) {
  if (models.empty()) throw Error(Errc::InvalidArgument, "no models to compare");
  if (cells.empty()) throw Error(Errc::InvalidArgument, "no test cells");

  EvalReport report;
  const double dt = 0.1;
  std::vector<std::vector<std::vector<double>>> curves(cells.size());

  for (const auto& model : models) {
    ModelReportRow row;
    row.model = model->name();
    std::vector<double> pooled_act, pooled_est;
    double e_dev_sum = 0.0;
    double seconds = 0.0;
    bool per_sample = true;

    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const TestCell& cell = cells[ci];
      auto t0 = std::chrono::steady_clock::now();
      ModelOutput out = model->predict(cell);
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      double e_act = trapezoid(cell.p_actual, dt);
      if (e_act == 0.0) throw Error(Errc::ZeroEnergy, "cell has zero actual energy");
      if (out.power) {
        if (out.power->size() != cell.p_actual.size())
          throw Error(Errc::LengthMismatch, row.model + ": prediction length mismatch");
        pooled_act.insert(pooled_act.end(), cell.p_actual.begin(), cell.p_actual.end());
        pooled_est.insert(pooled_est.end(), out.power->begin(), out.power->end());
        e_dev_sum += energy_deviation(cell.p_actual, *out.power, dt);
        curves[ci].push_back(cumulative_energy(*out.power, dt));
      } else if (out.trip_energy_j) {
        per_sample = false;
        e_dev_sum += std::abs(e_act - *out.trip_energy_j) / std::abs(e_act) * 100.0;
        curves[ci].emplace_back();  // trip-only models have no curve
      } else {
        throw Error(Errc::InvalidArgument, row.model + " produced no output");
      }
    }

    row.mean_e_dev_pct = e_dev_sum / static_cast<double>(cells.size());
    row.avg_pred_time_s = seconds / static_cast<double>(cells.size());
    if (per_sample) {
      row.rmse = rmse(pooled_act, pooled_est);
      row.mae = mae(pooled_act, pooled_est);
      row.corr = corr(pooled_act, pooled_est);
    }
    report.rows.push_back(std::move(row));
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    save_report_csv(report, out_dir / "report.csv");
    char buf[64];
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const TestCell& cell = cells[ci];
      std::filesystem::path p = out_dir / ("energy_curve_" + sanitize(cell.cycle.name) +
                                           "_" + sanitize(cell.grade.name) + ".csv");
      std::ofstream out(p, std::ios::trunc);
      if (!out) throw Error(Errc::IoError, "cannot open for write: " + p.string());
      out << "t";
      out << ",actual_J";
      for (const auto& model : models) out << "," << sanitize(model->name()) << "_J";
      out << "\n";
      std::vector<double> actual = cumulative_energy(cell.p_actual, dt);
      for (std::size_t i = 0; i < actual.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.1f,%.9g", dt * static_cast<double>(i), actual[i]);
        out << buf;
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
          const auto& curve = curves[ci][mi];
          if (curve.empty()) {
            out << ",NA";
          } else {
            std::snprintf(buf, sizeof buf, ",%.9g", curve[i]);
            out << buf;
          }
        }
        out << "\n";
      }
    }
  }
  return report;
}

void save_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for write: " + path.string());
  out << "model,rmse_w,mae_w,corr,mean_e_dev_pct,avg_pred_time_s\n";
  char buf[64];
  auto cell = [&](const std::optional<double>& v) {
    if (!v) return std::string("NA");
    std::snprintf(buf, sizeof buf, "%.9g", *v);
    return std::string(buf);
  };
  for (const ModelReportRow& r : report.rows) {
    out << r.model << "," << cell(r.rmse) << "," << cell(r.mae) << "," << cell(r.corr);
    std::snprintf(buf, sizeof buf, ",%.9g,%.6g", r.mean_e_dev_pct, r.avg_pred_time_s);
    out << buf << "\n";
  }
}

}  // namespace evpower
