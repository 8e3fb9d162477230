#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evpower/dataset.hpp"
#include "evpower/diagnostics.hpp"
#include "evpower/encoders.hpp"
#include "evpower/network.hpp"
#include "evpower/tensor.hpp"

namespace evpower {

class ThreadPool;

/// Serialized network state. output_norm/encoder travel with the weights so
/// a checkpoint is enough to produce denormalized watt predictions.
struct Checkpoint {
  NetworkSpec spec;
  std::vector<std::vector<float>> weights;  // indexed by layer, empty for non-parametric layers
  std::vector<std::vector<float>> biases;
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<NormStats> output_norm;
  std::string encoder;
};

/// Uniform init on [-s, s) with s = 1/sqrt(kw*kh*numInPl); the fully
/// connected layer uses kw = kh = 1 and its fan-in. Biases start at zero.
Checkpoint init_weights(const NetworkSpec& spec, std::uint64_t seed);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

double mse_loss(std::span<const double> pred, std::span<const double> target);

template <typename T>
struct GradBuffers {
  std::vector<std::vector<T>> w;
  std::vector<std::vector<T>> b;
  void zero();
  void add(const GradBuffers& other);
  void scale(T factor);
};

/// Runtime engine for one checkpointed network. T is float for training
/// throughput and double for finite-difference verification.
template <typename T>
class Network {
 public:
  explicit Network(const Checkpoint& ckpt);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<ShapeInfo>& shapes() const { return shapes_; }

  struct Workspace {
    std::vector<T> input;
    std::vector<std::vector<T>> acts;    // per-layer outputs
    std::vector<std::vector<int>> pool_argmax;
    std::vector<std::vector<T>> grads;   // per-layer activation gradients
    std::vector<std::vector<T>> cols;    // per-conv im2col patches, filled by forward
    std::vector<T> dcol;
    std::vector<unsigned char> row_used;
  };
  Workspace make_workspace() const;

  /// Runs the network; the returned span aliases ws and stays valid until
  /// the next call with the same workspace.
  std::span<const T> forward(std::span<const float> image, Workspace& ws) const;

  /// Forward + loss + reverse pass. Accumulates parameter gradients into
  /// `grad` (caller zeroes) and returns the sample's MSE.
  double forward_backward(std::span<const float> image, std::span<const float> target,
                          Workspace& ws, GradBuffers<T>& grad) const;

  void sgd_step(const GradBuffers<T>& mean_grad, T lr);

  GradBuffers<T> make_grad_buffers() const;
  Checkpoint to_checkpoint(int epoch, double train_loss, double val_loss) const;

  std::vector<std::vector<T>>& mutable_weights() { return weights_; }
  const std::vector<std::vector<T>>& layer_weights() const { return weights_; }
  const std::vector<std::vector<T>>& layer_biases() const { return biases_; }

 private:
  struct ConvPlan {
    int in_h, in_w, in_c, out_h, out_w, oc, k, stride, pad;
    std::size_t patch;      // k*k*in_c
    std::size_t patch_p;    // patch rounded up to the SIMD step
    std::size_t positions;  // out_h*out_w
  };

  void conv_forward(int layer, const std::vector<T>& in, std::vector<T>& out,
                    std::vector<T>& col) const;
  void conv_backward(int layer, const std::vector<T>& dy, const std::vector<T>& col,
                     std::vector<T>* dx, std::vector<T>& dcol,
                     std::vector<unsigned char>& row_used, GradBuffers<T>& grad) const;

  NetworkSpec spec_;
  std::vector<ShapeInfo> shapes_;
  std::vector<ConvPlan> conv_plans_;  // indexed by layer (unused slots default)
  std::vector<std::vector<T>> weights_, biases_;
  Checkpoint meta_;  // carries output_norm / encoder through to_checkpoint
};

struct TrainConfig {
  double lr0 = 0.01;
  int batch_size = 64;
  int max_epochs = 2000;
  double lr_decay_per_epoch = 0.999;
  std::uint64_t seed = 0;
  int val_every = 10;       // validation cadence (epoch 1 is always validated)
  int snapshot_every = 0;   // 0 disables weight snapshots
  bool collect_grad_stats = true;
};

struct TrainHistory {
  std::vector<double> train_mse;                   // per epoch
  std::vector<double> lr;                          // per epoch
  std::vector<std::pair<int, double>> val_mse;     // (epoch, mse)
  std::vector<GradStats> grad_stats;               // per epoch x parametric layer
  std::vector<std::pair<int, Checkpoint>> snapshots;
};

struct TrainResult {
  Checkpoint best;  // lowest validation MSE seen
  TrainHistory history;
};

/// Mini-batch SGD on mean squared error: shuffled batches, per-batch step
/// w <- w - lr * mean-gradient, learning rate multiplied by the decay after
/// every epoch. Per-sample work within a batch fans out over `pool`; results
/// are bit-identical for any thread count.
template <typename T>
TrainResult train(const EncodedDataset& train_set, const EncodedDataset& val_set,
                  const NetworkSpec& spec, const TrainConfig& cfg,
                  ThreadPool* pool = nullptr);

void save_history_csv(const TrainHistory& history, const std::filesystem::path& path);
void save_grad_stats_csv(const TrainHistory& history, const NetworkSpec& spec,
                         const std::filesystem::path& path);

}  // namespace evpower
