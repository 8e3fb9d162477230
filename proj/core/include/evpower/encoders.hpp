#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evpower/dataset.hpp"
#include "evpower/tensor.hpp"

namespace evpower {

class ThreadPool;

enum class EncoderKind { Gaf, Cov, Eig };

const char* encoder_name(EncoderKind kind) noexcept;
EncoderKind encoder_from_name(const std::string& name);

/// Min-max map into [-1, 1]: ((x - max) + (x - min)) / (max - min).
/// A constant signal maps to all zeros.
std::vector<double> normalize_signal(std::span<const double> x);

/// Gramian Angular Field of a [-1, 1] signal:
/// G = xhat xhat^T - sqrt(1 - xhat^2) sqrt(1 - xhat^2)^T, so that
/// G_ij = cos(arccos xhat_i + arccos xhat_j). Returned n x n row-major.
std::vector<double> gaf(std::span<const double> xhat);

/// Deviation outer product d d^T with d = xhat - mean(xhat): symmetric,
/// positive semidefinite, rank <= 1.
std::vector<double> covariance_channel(std::span<const double> xhat);

struct EighResult {
  int n = 0;
  std::vector<double> eigenvalues;   // descending
  std::vector<double> eigenvectors;  // n x n row-major; column j pairs with eigenvalues[j]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Columns are
/// sorted by descending eigenvalue; each column is flipped so its
/// largest-magnitude entry (lowest index on ties) is non-negative.
EighResult jacobi_eigh(std::span<const double> sym, int n);

/// Eigenvector image of the raw (un-normalized) deviation outer product,
/// min-max rescaled into [0, 1] per matrix.
std::vector<double> eigen_channel(std::span<const double> x);

/// Applies the chosen per-channel pipeline to (v_sp, t_eff, r_el) and stacks
/// the three 100x100 channel matrices into one image. GAF and covariance
/// channels are min-max rescaled to [0, 1] per channel afterwards; a flat
/// channel maps to the constant 0.5.
Tensor3<float> encode_window(const Window& window, EncoderKind kind);

/// Windowed dataset after encoding; what the network trains on.
struct EncodedDataset {
  EncoderKind encoder = EncoderKind::Cov;
  int count = 0;
  // count x (100 x 100 x 3) images, (row, col, channel) within each window.
  std::vector<float> images;
  // count x 100 targets (p_batt in the owning dataset's units).
  std::vector<float> targets;
  std::optional<NormStats> output_norm;
  std::string provenance;

  static constexpr std::size_t kImageFloats =
      static_cast<std::size_t>(kWindowLen) * kWindowLen * 3;

  std::span<const float> image(int i) const {
    return {images.data() + static_cast<std::size_t>(i) * kImageFloats, kImageFloats};
  }
  std::span<const float> target(int i) const {
    return {targets.data() + static_cast<std::size_t>(i) * kWindowLen,
            static_cast<std::size_t>(kWindowLen)};
  }
};

EncodedDataset encode_dataset(const Dataset& dataset, EncoderKind kind,
                              ThreadPool* pool = nullptr);

/// JSON header + float32 blob; images serialized in (window, channel, row,
/// col) order followed by the target section.
void save_encoded(const EncodedDataset& encoded, const std::filesystem::path& path);
EncodedDataset load_encoded(const std::filesystem::path& path);

}  // namespace evpower
