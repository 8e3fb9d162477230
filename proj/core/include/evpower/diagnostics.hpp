#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace evpower {

struct Checkpoint;       // cnn.hpp
struct EncodedDataset;   // encoders.hpp
class ThreadPool;

/// One integer symbol per sample after per-coordinate uniform binning.
struct DiscretizedVariable {
  std::vector<int> symbols;
  int n_bins_per_dim = 5000;
};

/// Bins every coordinate uniformly over its observed [min, max] into
/// n_bins intervals (a flat coordinate maps to bin 0), then assigns each
/// distinct bin tuple a dense id in first-seen order.
DiscretizedVariable discretize(const std::vector<std::vector<double>>& samples,
                               int n_bins = 5000);

double entropy(const DiscretizedVariable& x);

/// Plug-in estimate of I(X;Y) in nats over the empirical joint counts.
double mutual_information(const DiscretizedVariable& x, const DiscretizedVariable& y);

/// I(X;Y) / sqrt(H(X) H(Y)), in [0, 1].
double nmi(const DiscretizedVariable& x, const DiscretizedVariable& y);

struct NMIRecord {
  int epoch = 0;
  int layer_index = 0;
  std::string layer;
  double nmi_input = 0.0;
  double nmi_output = 0.0;
};

/// For every weight snapshot and every tracked layer (convs, pools, fc),
/// computes NMI between the layer's activations over the probe set and the
/// encoded input X / target Y, all discretized at n_bins.
std::vector<NMIRecord> layer_nmi_sweep(
    const std::vector<std::pair<int, Checkpoint>>& snapshots,
    const EncodedDataset& probe, int n_bins = 5000, ThreadPool* pool = nullptr);

void save_nmi_csv(const std::vector<NMIRecord>& records, const std::filesystem::path& path);

struct GradStats {
  int epoch = 0;
  int layer_index = 0;
  double mean_norm = 0.0;
  double std_norm = 0.0;
};

/// Per-layer gradient statistics across the batches of one epoch:
/// mean_norm = ||mean over batches||_2 / ||w||_2, std_norm = mean
/// per-coordinate std across batches / ||w||_2.
GradStats grad_stats(int epoch, int layer_index,
                     const std::vector<std::vector<double>>& batch_grads,
                     double weight_l2_norm);

}  // namespace evpower
