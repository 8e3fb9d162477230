#include "evpower/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "binfile.hpp"
#include "evpower/errors.hpp"
#include "evpower/rng.hpp"

namespace evpower {

using nlohmann::json;

namespace {

void check_series(const SampledSeries& s, const char* name) {
  if (s.sample_rate_hz != 10.0)
    throw Error(Errc::InvalidArgument, std::string(name) + " is not sampled at 10 Hz");
  for (double v : s.values) {
    if (!std::isfinite(v))
      throw Error(Errc::InvalidArgument, std::string(name) + " contains non-finite values");
  }
}

}  // namespace

std::vector<Window> partition_windows(const SampledSeries& v_sp,
                                      const SampledSeries& t_eff,
                                      const SampledSeries& r_el,
                                      const SampledSeries& p_batt,
                                      const std::string& source_name) {
  const std::size_t n = v_sp.values.size();
  if (t_eff.values.size() != n || r_el.values.size() != n || p_batt.values.size() != n)
    throw Error(Errc::LengthMismatch, "series lengths differ for " + source_name);
  check_series(v_sp, "v_sp");
  check_series(t_eff, "t_eff");
  check_series(r_el, "r_el");
  check_series(p_batt, "p_batt");
  if (n < kWindowLen)
    throw Error(Errc::TooShort, source_name + ": " + std::to_string(n) +
                                    " samples, need at least " + std::to_string(kWindowLen));
  const std::size_t m = n / kWindowLen;
  std::vector<Window> windows;
  windows.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    Window w;
    w.source_cycle = source_name;
    w.start_index = static_cast<int>(k * kWindowLen);
    auto slice = [&](const std::vector<double>& src) {
      return std::vector<double>(src.begin() + w.start_index,
                                 src.begin() + w.start_index + kWindowLen);
    };
    w.v_sp = slice(v_sp.values);
    w.t_eff = slice(t_eff.values);
    w.r_el = slice(r_el.values);
    w.p_batt = slice(p_batt.values);
    windows.push_back(std::move(w));
  }
  return windows;
}

namespace {

NormStats power_extrema(const std::vector<Window>& windows) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Window& w : windows) {
    for (double p : w.p_batt) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  return {lo, hi};
}

void apply_norm(Dataset& ds, const NormStats& stats) {
  if (!(stats.max_w > stats.min_w))
    throw Error(Errc::DegenerateRange, "p_batt range is degenerate (max == min)");
  for (Window& w : ds.windows)
    for (double& p : w.p_batt) p = normalize_power(p, stats);
  ds.output_norm = stats;
}

}  // namespace

Dataset normalize_output(const Dataset& dataset) {
  if (dataset.windows.empty()) throw Error(Errc::EmptyDataset, "cannot normalize an empty dataset");
  if (dataset.output_norm)
    throw Error(Errc::InvalidArgument, "dataset is already normalized");
  Dataset out = dataset;
  apply_norm(out, power_extrema(out.windows));
  return out;
}

Dataset denormalize_output(const Dataset& dataset) {
  if (!dataset.output_norm)
    throw Error(Errc::InvalidArgument, "dataset has no normalization stats");
  Dataset out = dataset;
  const NormStats stats = *out.output_norm;
  for (Window& w : out.windows)
    for (double& p : w.p_batt) p = denormalize_power(p, stats);
  out.output_norm.reset();
  return out;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset,
                                            double train_fraction,
                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(Errc::InvalidArgument, "train_fraction must be in (0, 1)");
  if (dataset.windows.empty()) throw Error(Errc::EmptyDataset, "cannot split an empty dataset");
  if (dataset.output_norm)
    throw Error(Errc::InvalidArgument, "split expects an un-normalized dataset");

  const std::size_t m = dataset.windows.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t n_train =
      static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(m)));
  if (n_train == 0 || n_train >= m)
    throw Error(Errc::EmptySplit, "split would leave an empty train or validation set");

  Dataset train, val;
  train.provenance = dataset.provenance;
  val.provenance = dataset.provenance;
  train.windows.reserve(n_train);
  val.windows.reserve(m - n_train);
  for (std::size_t i = 0; i < m; ++i) {
    (i < n_train ? train : val).windows.push_back(dataset.windows[order[i]]);
  }
  const NormStats stats = power_extrema(train.windows);
  apply_norm(train, stats);
  apply_norm(val, stats);
  return {std::move(train), std::move(val)};
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  json header;
  header["windows"] = dataset.windows.size();
  header["signals"] = {"v_sp", "t_eff", "r_el", "p_batt"};
  header["window_len"] = kWindowLen;
  if (dataset.output_norm) {
    header["output_norm"] = {{"min_w", dataset.output_norm->min_w},
                             {"max_w", dataset.output_norm->max_w}};
  } else {
    header["output_norm"] = nullptr;
  }
  header["provenance"] = dataset.provenance;

  std::vector<std::string> sources;
  std::vector<int> source_idx, start_idx;
  for (const Window& w : dataset.windows) {
    auto it = std::find(sources.begin(), sources.end(), w.source_cycle);
    if (it == sources.end()) {
      sources.push_back(w.source_cycle);
      it = std::prev(sources.end());
    }
    source_idx.push_back(static_cast<int>(it - sources.begin()));
    start_idx.push_back(w.start_index);
  }
  header["sources"] = sources;
  header["source_idx"] = source_idx;
  header["start_index"] = start_idx;

  std::vector<float> blob;
  blob.reserve(dataset.windows.size() * 4 * kWindowLen);
  for (const Window& w : dataset.windows) {
    for (const auto* sig : {&w.v_sp, &w.t_eff, &w.r_el, &w.p_batt})
      for (double v : *sig) blob.push_back(static_cast<float>(v));
  }
  binfile::write_file(path, "EVDS", header.dump(), blob);
}

Dataset load_dataset(const std::filesystem::path& path) {
  binfile::Loaded file = binfile::read_file(path, "EVDS");
  json header;
  try {
    header = json::parse(file.header_json);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, path.string() + ": bad header: " + e.what());
  }
  Dataset ds;
  const std::size_t m = header.at("windows").get<std::size_t>();
  if (file.blob.size() != m * 4 * kWindowLen)
    throw Error(Errc::CorruptFile,
                path.string() + ": blob size does not match window count");
  if (!header.at("output_norm").is_null()) {
    ds.output_norm = NormStats{header["output_norm"].at("min_w").get<double>(),
                               header["output_norm"].at("max_w").get<double>()};
  }
  ds.provenance = header.value("provenance", std::string{});
  auto sources = header.at("sources").get<std::vector<std::string>>();
  auto source_idx = header.at("source_idx").get<std::vector<int>>();
  auto start_idx = header.at("start_index").get<std::vector<int>>();
  if (source_idx.size() != m || start_idx.size() != m)
    throw Error(Errc::CorruptFile, path.string() + ": window metadata length mismatch");

  ds.windows.resize(m);
  const float* p = file.blob.data();
  for (std::size_t i = 0; i < m; ++i) {
    Window& w = ds.windows[i];
    const int si = source_idx[i];
    if (si < 0 || si >= static_cast<int>(sources.size()))
      throw Error(Errc::CorruptFile, path.string() + ": bad source index");
    w.source_cycle = sources[static_cast<std::size_t>(si)];
    w.start_index = start_idx[i];
    for (auto* sig : {&w.v_sp, &w.t_eff, &w.r_el, &w.p_batt}) {
      sig->resize(kWindowLen);
      for (int k = 0; k < kWindowLen; ++k) (*sig)[static_cast<std::size_t>(k)] = *p++;
    }
  }
  return ds;
}

}  // namespace evpower
