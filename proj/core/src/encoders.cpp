#include "evpower/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "binfile.hpp"
#include "evpower/errors.hpp"
#include "evpower/threadpool.hpp"

namespace evpower {

using nlohmann::json;

const char* encoder_name(EncoderKind kind) noexcept {
  switch (kind) {
    case EncoderKind::Gaf: return "gaf";
    case EncoderKind::Cov: return "cov";
    case EncoderKind::Eig: return "eig";
  }
  return "?";
}

EncoderKind encoder_from_name(const std::string& name) {
  if (name == "gaf") return EncoderKind::Gaf;
  if (name == "cov") return EncoderKind::Cov;
  if (name == "eig") return EncoderKind::Eig;
  throw Error(Errc::InvalidArgument, "unknown encoder '" + name + "' (use gaf|cov|eig)");
}

std::vector<double> normalize_signal(std::span<const double> x) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : x) {
    if (!std::isfinite(v))
      throw Error(Errc::InvalidArgument, "normalize_signal: non-finite input");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> out(x.size(), 0.0);
  if (!(hi > lo)) return out;  // constant signal maps to zeros
  double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = ((x[i] - hi) + (x[i] - lo)) * inv;
    out[i] = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

std::vector<double> gaf(std::span<const double> xhat) {
  const std::size_t n = xhat.size();
  std::vector<double> root(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (xhat[i] < -1.0 || xhat[i] > 1.0)
      throw Error(Errc::InvalidArgument, "gaf input outside [-1, 1]");
    root[i] = std::sqrt(std::max(0.0, 1.0 - xhat[i] * xhat[i]));
  }
  std::vector<double> g(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g[i * n + j] = xhat[i] * xhat[j] - root[i] * root[j];
  return g;
}

std::vector<double> covariance_channel(std::span<const double> xhat) {
  const std::size_t n = xhat.size();
  // A constant signal has exactly zero deviations; computing its mean in
  // floating point would leave rounding dust in the outer product.
  bool constant = std::all_of(xhat.begin(), xhat.end(),
                              [&](double v) { return v == xhat.front(); });
  if (constant) return std::vector<double>(n * n, 0.0);
  double mean = std::accumulate(xhat.begin(), xhat.end(), 0.0) / static_cast<double>(n);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = xhat[i] - mean;
  std::vector<double> c(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = d[i] * d[j];
  return c;
}

EighResult jacobi_eigh(std::span<const double> sym, int n) {
  if (n <= 0 || sym.size() != static_cast<std::size_t>(n) * n)
    throw Error(Errc::ShapeMismatch, "jacobi_eigh: matrix size mismatch");
  std::vector<double> a(sym.begin(), sym.end());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(a[i * n + j] - a[j * n + i]) > 1e-9)
        throw Error(Errc::NotSymmetric, "jacobi_eigh: input not symmetric within 1e-9");

  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[i * n + i] = 1.0;

  auto off_diag_fro = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += 2.0 * a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
  };

  constexpr double kTol = 1e-10;
  constexpr int kMaxSweeps = 100;
  bool converged = off_diag_fro() < kTol;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a[p * n + q];
        if (apq == 0.0) continue;
        double app = a[p * n + p];
        double aqq = a[q * n + q];
        // Rotation angle per the stable Rutishauser formulation.
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a[k * n + p];
          double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a[p * n + k];
          double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (int k = 0; k < n; ++k) {
          double vkp = v[k * n + p];
          double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
    converged = off_diag_fro() < kTol;
  }
  if (!converged)
    throw Error(Errc::NoConvergence, "jacobi_eigh: no convergence within 100 sweeps");

  // Stable sort by descending eigenvalue, then enforce the sign convention.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return a[x * n + x] > a[y * n + y]; });

  EighResult result;
  result.n = n;
  result.eigenvalues.resize(static_cast<std::size_t>(n));
  result.eigenvectors.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int jj = 0; jj < n; ++jj) {
    int src = order[jj];
    result.eigenvalues[jj] = a[src * n + src];
    int arg = 0;
    double best = -1.0;
    for (int k = 0; k < n; ++k) {
      double mag = std::abs(v[k * n + src]);
      if (mag > best) {
        best = mag;
        arg = k;
      }
    }
    double flip = v[arg * n + src] < 0.0 ? -1.0 : 1.0;
    for (int k = 0; k < n; ++k) result.eigenvectors[k * n + jj] = flip * v[k * n + src];
  }
  return result;
}

std::vector<double> eigen_channel(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> c = covariance_channel(x);
  // Eigenvectors are invariant to positive scaling; rescale so the Jacobi
  // convergence threshold is meaningful for signals of any physical
  // magnitude.
  double max_abs = 0.0;
  for (double e : c) max_abs = std::max(max_abs, std::abs(e));
  if (max_abs > 0.0) {
    for (double& e : c) e /= max_abs;
  }
  EighResult eig = jacobi_eigh(c, static_cast<int>(n));
  double lo = *std::min_element(eig.eigenvectors.begin(), eig.eigenvectors.end());
  double hi = *std::max_element(eig.eigenvectors.begin(), eig.eigenvectors.end());
  std::vector<double> out(n * n, 0.5);
  if (hi > lo) {
    double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < n * n; ++i) out[i] = (eig.eigenvectors[i] - lo) * inv;
  }
  return out;
}

namespace {

// Min-max rescale into [0, 1]; flat input becomes 0.5.
void rescale_unit(std::vector<double>& m) {
  auto [lo_it, hi_it] = std::minmax_element(m.begin(), m.end());
  double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    std::fill(m.begin(), m.end(), 0.5);
    return;
  }
  double inv = 1.0 / (hi - lo);
  for (double& e : m) e = (e - lo) * inv;
}

std::vector<double> encode_channel(std::span<const double> signal, EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Gaf: {
      std::vector<double> g = gaf(normalize_signal(signal));
      rescale_unit(g);
      return g;
    }
    case EncoderKind::Cov: {
      std::vector<double> c = covariance_channel(normalize_signal(signal));
      rescale_unit(c);
      return c;
    }
    case EncoderKind::Eig:
      return eigen_channel(signal);
  }
  throw Error(Errc::InvalidArgument, "bad encoder kind");
}

}  // namespace

Tensor3<float> encode_window(const Window& window, EncoderKind kind) {
  if (window.v_sp.size() != kWindowLen || window.t_eff.size() != kWindowLen ||
      window.r_el.size() != kWindowLen)
    throw Error(Errc::ShapeMismatch, "window signals must have length 100");
  const std::span<const double> channels[3] = {window.v_sp, window.t_eff, window.r_el};
  Tensor3<float> img(kWindowLen, kWindowLen, 3);
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> m = encode_channel(channels[ch], kind);
    for (int r = 0; r < kWindowLen; ++r)
      for (int col = 0; col < kWindowLen; ++col)
        img.at(r, col, ch) = static_cast<float>(m[static_cast<std::size_t>(r) * kWindowLen + col]);
  }
  return img;
}

EncodedDataset encode_dataset(const Dataset& dataset, EncoderKind kind, ThreadPool* pool) {
  if (dataset.windows.empty()) throw Error(Errc::EmptyDataset, "nothing to encode");
  EncodedDataset out;
  out.encoder = kind;
  out.count = static_cast<int>(dataset.windows.size());
  out.output_norm = dataset.output_norm;
  out.provenance = dataset.provenance;
  out.images.resize(static_cast<std::size_t>(out.count) * EncodedDataset::kImageFloats);
  out.targets.resize(static_cast<std::size_t>(out.count) * kWindowLen);

  auto encode_one = [&](std::size_t i, int) {
    const Window& w = dataset.windows[i];
    Tensor3<float> img = encode_window(w, kind);
    std::copy(img.data.begin(), img.data.end(),
              out.images.begin() + static_cast<std::ptrdiff_t>(i * EncodedDataset::kImageFloats));
    for (int k = 0; k < kWindowLen; ++k)
      out.targets[i * kWindowLen + static_cast<std::size_t>(k)] =
          static_cast<float>(w.p_batt[static_cast<std::size_t>(k)]);
  };
  if (pool) {
    pool->parallel_for(dataset.windows.size(), encode_one);
  } else {
    for (std::size_t i = 0; i < dataset.windows.size(); ++i) encode_one(i, 0);
  }
  return out;
}

void save_encoded(const EncodedDataset& encoded, const std::filesystem::path& path) {
  json header;
  header["encoder"] = encoder_name(encoded.encoder);
  header["windows"] = encoded.count;
  header["image_shape"] = {kWindowLen, kWindowLen, 3};
  header["target_len"] = kWindowLen;
  if (encoded.output_norm) {
    header["output_norm"] = {{"min_w", encoded.output_norm->min_w},
                             {"max_w", encoded.output_norm->max_w}};
  } else {
    header["output_norm"] = nullptr;
  }
  header["provenance"] = encoded.provenance;
  header["images_offset"] = 0;
  header["targets_offset"] = encoded.images.size();

  std::vector<float> blob;
  blob.reserve(encoded.images.size() + encoded.targets.size());
  // (window, channel, row, col) on disk.
  for (int i = 0; i < encoded.count; ++i) {
    std::span<const float> img = encoded.image(i);
    for (int ch = 0; ch < 3; ++ch)
      for (int r = 0; r < kWindowLen; ++r)
        for (int col = 0; col < kWindowLen; ++col)
          blob.push_back(img[(static_cast<std::size_t>(r) * kWindowLen + col) * 3 +
                             static_cast<std::size_t>(ch)]);
  }
  blob.insert(blob.end(), encoded.targets.begin(), encoded.targets.end());
  binfile::write_file(path, "EVEN", header.dump(), blob);
}

EncodedDataset load_encoded(const std::filesystem::path& path) {
  binfile::Loaded file = binfile::read_file(path, "EVEN");
  json header;
  try {
    header = json::parse(file.header_json);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, path.string() + ": bad header: " + e.what());
  }
  EncodedDataset out;
  out.encoder = encoder_from_name(header.at("encoder").get<std::string>());
  out.count = header.at("windows").get<int>();
  if (!header.at("output_norm").is_null()) {
    out.output_norm = NormStats{header["output_norm"].at("min_w").get<double>(),
                                header["output_norm"].at("max_w").get<double>()};
  }
  out.provenance = header.value("provenance", std::string{});
  const std::size_t n_img = static_cast<std::size_t>(out.count) * EncodedDataset::kImageFloats;
  const std::size_t n_tgt = static_cast<std::size_t>(out.count) * kWindowLen;
  if (file.blob.size() != n_img + n_tgt)
    throw Error(Errc::CorruptFile, path.string() + ": blob size mismatch");
  out.images.resize(n_img);
  out.targets.assign(file.blob.begin() + static_cast<std::ptrdiff_t>(n_img), file.blob.end());
  const float* p = file.blob.data();
  for (int i = 0; i < out.count; ++i) {
    float* img = out.images.data() + static_cast<std::size_t>(i) * EncodedDataset::kImageFloats;
    for (int ch = 0; ch < 3; ++ch)
      for (int r = 0; r < kWindowLen; ++r)
        for (int col = 0; col < kWindowLen; ++col)
          img[(static_cast<std::size_t>(r) * kWindowLen + col) * 3 +
              static_cast<std::size_t>(ch)] = *p++;
  }
  return out;
}

}  // namespace evpower
