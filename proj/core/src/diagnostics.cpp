#include "evpower/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "evpower/cnn.hpp"
#include "evpower/errors.hpp"
#include "evpower/threadpool.hpp"

namespace evpower {

namespace {

struct BinRowHash {
  std::size_t operator()(const std::vector<std::int32_t>& row) const noexcept {
    // FNV-1a over the raw bin indices; collisions are resolved by the map's
    // key equality, so symbols stay exact.
    std::uint64_t h = 1469598103934665603ull;
    for (std::int32_t v : row) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

// Generic row source: get(i, j) returns coordinate j of sample i.
template <typename Get>
DiscretizedVariable discretize_rows(std::size_t n, std::size_t dim, int n_bins, Get get) {
  if (n < 2) throw Error(Errc::TooFewSamples, "discretize needs at least 2 samples");
  if (dim == 0) throw Error(Errc::InvalidArgument, "discretize: zero-dimensional samples");
  if (n_bins < 1) throw Error(Errc::InvalidArgument, "discretize: n_bins must be >= 1");

  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      double v = get(i, j);
      if (!std::isfinite(v))
        throw Error(Errc::InvalidArgument, "discretize: non-finite sample value");
      lo[j] = std::min(lo[j], v);
      hi[j] = std::max(hi[j], v);
    }
  }
  std::vector<double> scale(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j)
    if (hi[j] > lo[j]) scale[j] = static_cast<double>(n_bins) / (hi[j] - lo[j]);

  DiscretizedVariable out;
  out.n_bins_per_dim = n_bins;
  out.symbols.resize(n);
  std::unordered_map<std::vector<std::int32_t>, int, BinRowHash> ids;
  std::vector<std::int32_t> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      if (scale[j] == 0.0) {
        row[j] = 0;
      } else {
        auto b = static_cast<std::int32_t>((get(i, j) - lo[j]) * scale[j]);
        row[j] = std::min(b, static_cast<std::int32_t>(n_bins - 1));
      }
    }
    auto [it, inserted] = ids.try_emplace(row, static_cast<int>(ids.size()));
    out.symbols[i] = it->second;
  }
  return out;
}

std::vector<std::int64_t> symbol_counts(const DiscretizedVariable& x) {
  int max_sym = 0;
  for (int s : x.symbols) {
    if (s < 0) throw Error(Errc::InvalidArgument, "negative symbol");
    max_sym = std::max(max_sym, s);
  }
  std::vector<std::int64_t> counts(static_cast<std::size_t>(max_sym) + 1, 0);
  for (int s : x.symbols) ++counts[static_cast<std::size_t>(s)];
  return counts;
}

}  // namespace

DiscretizedVariable discretize(const std::vector<std::vector<double>>& samples, int n_bins) {
  if (samples.size() < 2) throw Error(Errc::TooFewSamples, "discretize needs at least 2 samples");
  const std::size_t dim = samples.front().size();
  for (const auto& s : samples)
    if (s.size() != dim)
      throw Error(Errc::LengthMismatch, "discretize: inconsistent sample dimensions");
  return discretize_rows(samples.size(), dim, n_bins,
                         [&](std::size_t i, std::size_t j) { return samples[i][j]; });
}

double entropy(const DiscretizedVariable& x) {
  if (x.symbols.empty()) throw Error(Errc::TooFewSamples, "entropy of an empty variable");
  const double n = static_cast<double>(x.symbols.size());
  const double log_n = std::log(n);
  double h = 0.0;
  for (std::int64_t c : symbol_counts(x)) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / n;
    h += p * (log_n - std::log(static_cast<double>(c)));
  }
  return h;
}

double mutual_information(const DiscretizedVariable& x, const DiscretizedVariable& y) {
  if (x.symbols.size() != y.symbols.size())
    throw Error(Errc::LengthMismatch, "mutual_information: sample counts differ");
  if (x.symbols.empty()) throw Error(Errc::TooFewSamples, "mutual_information: no samples");
  const double n = static_cast<double>(x.symbols.size());
  std::vector<std::int64_t> cx = symbol_counts(x);
  std::vector<std::int64_t> cy = symbol_counts(y);
  std::unordered_map<std::uint64_t, std::int64_t> joint;
  joint.reserve(x.symbols.size());
  const std::uint64_t width = cy.size();
  for (std::size_t i = 0; i < x.symbols.size(); ++i) {
    std::uint64_t key = static_cast<std::uint64_t>(x.symbols[i]) * width +
                        static_cast<std::uint64_t>(y.symbols[i]);
    ++joint[key];
  }
  const double log_n = std::log(n);
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    std::int64_t a = cx[static_cast<std::size_t>(key / width)];
    std::int64_t b = cy[static_cast<std::size_t>(key % width)];
    double p = static_cast<double>(c) / n;
    mi += p * (std::log(static_cast<double>(c)) + log_n -
               std::log(static_cast<double>(a)) - std::log(static_cast<double>(b)));
  }
  return mi < 0.0 ? 0.0 : mi;  // plug-in MI is non-negative; clear rounding dust
}

double nmi(const DiscretizedVariable& x, const DiscretizedVariable& y) {
  double hx = entropy(x);
  double hy = entropy(y);
  if (hx <= 0.0 || hy <= 0.0)
    throw Error(Errc::DegenerateEntropy, "nmi: a variable has zero entropy");
  return mutual_information(x, y) / std::sqrt(hx * hy);
}

std::vector<NMIRecord> layer_nmi_sweep(
    const std::vector<std::pair<int, Checkpoint>>& snapshots,
    const EncodedDataset& probe, int n_bins, ThreadPool* pool) {
  if (snapshots.empty())
    throw Error(Errc::InvalidArgument, "layer_nmi_sweep: no snapshots");
  const std::size_t n = static_cast<std::size_t>(probe.count);
  if (n < 2) throw Error(Errc::TooFewSamples, "layer_nmi_sweep: need at least 2 probe windows");

  DiscretizedVariable dx = discretize_rows(
      n, EncodedDataset::kImageFloats, n_bins,
      [&](std::size_t i, std::size_t j) { return static_cast<double>(probe.image(static_cast<int>(i))[j]); });
  DiscretizedVariable dy = discretize_rows(
      n, static_cast<std::size_t>(kWindowLen), n_bins,
      [&](std::size_t i, std::size_t j) { return static_cast<double>(probe.target(static_cast<int>(i))[j]); });

  std::vector<NMIRecord> records;
  for (const auto& [epoch, ckpt] : snapshots) {
    Network<float> net(ckpt);
    std::vector<int> tracked;
    for (std::size_t li = 0; li < net.spec().layers.size(); ++li) {
      LayerKind k = net.spec().layers[li].kind;
      if (k == LayerKind::Conv || k == LayerKind::MaxPool || k == LayerKind::Fc)
        tracked.push_back(static_cast<int>(li));
    }
    // One forward per probe window, keeping every tracked activation row.
    std::vector<std::vector<float>> acts(tracked.size());
    for (std::size_t t = 0; t < tracked.size(); ++t)
      acts[t].resize(n * static_cast<std::size_t>(net.shapes()[static_cast<std::size_t>(tracked[t])].count()));

    const int n_workers = pool ? pool->size() : 1;
    std::vector<typename Network<float>::Workspace> workspaces;
    for (int w = 0; w < n_workers; ++w) workspaces.push_back(net.make_workspace());
    auto work = [&](std::size_t i, int worker) {
      auto& ws = workspaces[static_cast<std::size_t>(worker)];
      net.forward(probe.image(static_cast<int>(i)), ws);
      for (std::size_t t = 0; t < tracked.size(); ++t) {
        const auto& a = ws.acts[static_cast<std::size_t>(tracked[t])];
        std::copy(a.begin(), a.end(), acts[t].begin() + static_cast<std::ptrdiff_t>(i * a.size()));
      }
    };
    if (pool) {
      pool->parallel_for(n, work);
    } else {
      for (std::size_t i = 0; i < n; ++i) work(i, 0);
    }

    for (std::size_t t = 0; t < tracked.size(); ++t) {
      const std::size_t dim =
          static_cast<std::size_t>(net.shapes()[static_cast<std::size_t>(tracked[t])].count());
      DiscretizedVariable dl = discretize_rows(
          n, dim, n_bins,
          [&](std::size_t i, std::size_t j) { return static_cast<double>(acts[t][i * dim + j]); });
      NMIRecord rec;
      rec.epoch = epoch;
      rec.layer_index = tracked[t];
      rec.layer = layer_label(net.spec(), tracked[t]);
      rec.nmi_input = nmi(dx, dl);
      rec.nmi_output = nmi(dl, dy);
      records.push_back(rec);
    }
  }
  return records;
}

void save_nmi_csv(const std::vector<NMIRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for write: " + path.string());
  out << "epoch,layer_index,layer,nmi_input,nmi_output\n";
  char buf[160];
  for (const NMIRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%.9g,%.9g", r.epoch, r.layer_index,
                  r.layer.c_str(), r.nmi_input, r.nmi_output);
    out << buf << "\n";
  }
}

GradStats grad_stats(int epoch, int layer_index,
                     const std::vector<std::vector<double>>& batch_grads,
                     double weight_l2_norm) {
  if (batch_grads.size() < 2)
    throw Error(Errc::TooFewBatches, "grad_stats needs at least 2 batches");
  if (!(weight_l2_norm > 0.0))
    throw Error(Errc::InvalidArgument, "grad_stats: weight norm must be positive");
  const std::size_t dim = batch_grads.front().size();
  for (const auto& g : batch_grads)
    if (g.size() != dim)
      throw Error(Errc::LengthMismatch, "grad_stats: inconsistent gradient lengths");
  const double nb = static_cast<double>(batch_grads.size());

  double mean_sq_sum = 0.0;
  double std_sum = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    double s = 0.0, s2 = 0.0;
    for (const auto& g : batch_grads) {
      s += g[j];
      s2 += g[j] * g[j];
    }
    double mean = s / nb;
    double var = s2 / nb - mean * mean;
    mean_sq_sum += mean * mean;
    std_sum += std::sqrt(var > 0.0 ? var : 0.0);
  }
  GradStats out;
  out.epoch = epoch;
  out.layer_index = layer_index;
  out.mean_norm = std::sqrt(mean_sq_sum) / weight_l2_norm;
  out.std_norm = (std_sum / static_cast<double>(dim)) / weight_l2_norm;
  return out;
}

}  // namespace evpower
