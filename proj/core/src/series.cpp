#include "evpower/series.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evpower/errors.hpp"

namespace evpower {

std::vector<double> resample_to_10hz(const std::vector<double>& t,
                                     const std::vector<double>& y) {
  if (t.size() != y.size())
    throw Error(Errc::LengthMismatch, "time/value column lengths differ");
  if (t.empty()) throw Error(Errc::EmptyFile, "no samples to resample");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1]))
      throw Error(Errc::NonMonotonicTime,
                  "time must be strictly increasing (row " + std::to_string(i + 1) + ")");
  }
  double span = t.back() - t.front();
  std::size_t n = static_cast<std::size_t>(std::floor(span * 10.0 + 1e-9)) + 1;
  std::vector<double> out(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double tk = t.front() + 0.1 * static_cast<double>(k);
    while (seg + 2 < t.size() && t[seg + 1] < tk) ++seg;
    double t0 = t[seg], t1 = t[seg + 1 < t.size() ? seg + 1 : seg];
    if (t.size() == 1 || tk <= t0) {
      out[k] = y[seg];
    } else if (tk >= t1) {
      out[k] = y[seg + 1 < t.size() ? seg + 1 : seg];
    } else {
      double w = (tk - t0) / (t1 - t0);
      out[k] = y[seg] * (1.0 - w) + y[seg + 1] * w;
    }
  }
  return out;
}

namespace {

struct CsvColumns {
  std::vector<double> t;
  std::vector<double> y;
};

CsvColumns read_two_column_csv(const std::filesystem::path& path,
                               const std::string& expect_header) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::EmptyFile, "empty file: " + path.string());
  // Tolerate CR line endings and surrounding spaces in the header.
  std::erase(line, '\r');
  std::erase(line, ' ');
  if (line != expect_header)
    throw Error(Errc::ParseError, path.string() + ": expected header '" +
                                      expect_header + "', got '" + line + "'");
  CsvColumns cols;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    std::erase(line, '\r');
    if (line.empty()) continue;
    double a = 0.0, b = 0.0;
    char extra = 0;
    int matched = std::sscanf(line.c_str(), "%lf,%lf %c", &a, &b, &extra);
    if (matched != 2)
      throw Error(Errc::ParseError,
                  path.string() + ": malformed row " + std::to_string(row));
    if (!std::isfinite(a) || !std::isfinite(b))
      throw Error(Errc::ParseError,
                  path.string() + ": non-finite value at row " + std::to_string(row));
    cols.t.push_back(a);
    cols.y.push_back(b);
  }
  if (cols.t.empty()) throw Error(Errc::EmptyFile, "no data rows in " + path.string());
  return cols;
}

}  // namespace

DriveCycle load_cycle_csv(const std::filesystem::path& path) {
  CsvColumns cols = read_two_column_csv(path, "time_s,speed_mps");
  for (std::size_t i = 0; i < cols.y.size(); ++i) {
    if (cols.y[i] < 0.0)
      throw Error(Errc::ParseError,
                  path.string() + ": negative speed at row " + std::to_string(i + 2));
  }
  DriveCycle cycle;
  cycle.name = path.stem().string();
  cycle.speed.values = resample_to_10hz(cols.t, cols.y);
  cycle.speed.sample_rate_hz = 10.0;
  cycle.speed.unit = SignalUnit::MetersPerSecond;
  return cycle;
}

GradeProfile load_grade_csv(const std::filesystem::path& path) {
  CsvColumns cols = read_two_column_csv(path, "time_s,grade_pct");
  for (std::size_t i = 0; i < cols.y.size(); ++i) {
    if (cols.y[i] < -20.0 - 1e-9 || cols.y[i] > 20.0 + 1e-9)
      throw Error(Errc::ParseError, path.string() + ": grade_pct outside [-20, 20] at row " +
                                        std::to_string(i + 2));
  }
  GradeProfile profile;
  profile.name = path.stem().string();
  profile.grade.values = resample_to_10hz(cols.t, cols.y);
  for (double& g : profile.grade.values) g /= 100.0;
  profile.grade.sample_rate_hz = 10.0;
  profile.grade.unit = SignalUnit::GradeFraction;
  return profile;
}

namespace {

void save_two_column_csv(const std::filesystem::path& path, const char* header,
                         const std::vector<double>& values, double scale) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for write: " + path.string());
  out << header << "\n";
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.1f,%.9g", 0.1 * static_cast<double>(i),
                  values[i] * scale);
    out << buf << "\n";
  }
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

}  // namespace

void save_cycle_csv(const DriveCycle& cycle, const std::filesystem::path& path) {
  save_two_column_csv(path, "time_s,speed_mps", cycle.speed.values, 1.0);
}

void save_grade_csv(const GradeProfile& profile, const std::filesystem::path& path) {
  save_two_column_csv(path, "time_s,grade_pct", profile.grade.values, 100.0);
}

}  // namespace evpower
