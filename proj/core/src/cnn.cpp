#include "evpower/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "binfile.hpp"
#include "ckernels.hpp"
#include "evpower/errors.hpp"
#include "evpower/rng.hpp"
#include "evpower/threadpool.hpp"

namespace evpower {

using nlohmann::json;

namespace {

std::size_t weight_count(const LayerSpec& l, const ShapeInfo& in_shape) {
  switch (l.kind) {
    case LayerKind::Conv:
      return static_cast<std::size_t>(l.out_channels) * l.kernel * l.kernel * in_shape.c;
    case LayerKind::Fc:
      return static_cast<std::size_t>(l.out_units) * in_shape.count();
    default:
      return 0;
  }
}

std::size_t bias_count(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Conv: return static_cast<std::size_t>(l.out_channels);
    case LayerKind::Fc: return static_cast<std::size_t>(l.out_units);
    default: return 0;
  }
}

ShapeInfo input_shape_of(const std::vector<ShapeInfo>& shapes, int layer,
                         int in_h = 100, int in_w = 100, int in_c = 3) {
  return layer == 0 ? ShapeInfo{in_h, in_w, in_c} : shapes[static_cast<std::size_t>(layer) - 1];
}

}  // namespace

Checkpoint init_weights(const NetworkSpec& spec, std::uint64_t seed) {
  std::vector<ShapeInfo> shapes = validate_spec(spec);
  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.weights.resize(spec.layers.size());
  ckpt.biases.resize(spec.layers.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    ShapeInfo in = input_shape_of(shapes, static_cast<int>(i));
    std::size_t nw = weight_count(l, in);
    if (nw == 0) continue;
    double s;
    if (l.kind == LayerKind::Conv) {
      s = 1.0 / std::sqrt(static_cast<double>(l.kernel) * l.kernel * in.c);
    } else {
      s = 1.0 / std::sqrt(static_cast<double>(in.count()));  // kw = kh = 1
    }
    ckpt.weights[i].resize(nw);
    for (float& w : ckpt.weights[i])
      w = static_cast<float>(s * (2.0 * rng.u01() - 1.0));
    ckpt.biases[i].assign(bias_count(l), 0.0f);
  }
  return ckpt;
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw Error(Errc::LengthMismatch, "mse_loss: prediction/target lengths differ");
  if (pred.empty()) throw Error(Errc::LengthMismatch, "mse_loss: empty inputs");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

template <typename T>
void GradBuffers<T>::zero() {
  for (auto& v : w) std::fill(v.begin(), v.end(), T(0));
  for (auto& v : b) std::fill(v.begin(), v.end(), T(0));
}

template <typename T>
void GradBuffers<T>::add(const GradBuffers& other) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w[i].size(); ++j) w[i][j] += other.w[i][j];
    for (std::size_t j = 0; j < b[i].size(); ++j) b[i][j] += other.b[i][j];
  }
}

template <typename T>
void GradBuffers<T>::scale(T factor) {
  for (auto& v : w)
    for (T& x : v) x *= factor;
  for (auto& v : b)
    for (T& x : v) x *= factor;
}

template <typename T>
Network<T>::Network(const Checkpoint& ckpt) : spec_(ckpt.spec), meta_(ckpt) {
  meta_.weights.clear();
  meta_.biases.clear();
  shapes_ = validate_spec(spec_);
  if (ckpt.weights.size() != spec_.layers.size() || ckpt.biases.size() != spec_.layers.size())
    throw Error(Errc::SpecMismatch, "checkpoint weight arrays do not match the layer list");
  weights_.resize(spec_.layers.size());
  biases_.resize(spec_.layers.size());
  conv_plans_.resize(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    ShapeInfo in = input_shape_of(shapes_, static_cast<int>(i));
    std::size_t nw = weight_count(l, in);
    std::size_t nb = bias_count(l);
    if (ckpt.weights[i].size() != nw || ckpt.biases[i].size() != nb)
      throw Error(Errc::SpecMismatch, "checkpoint weight sizes do not match the spec");
    weights_[i].assign(ckpt.weights[i].begin(), ckpt.weights[i].end());
    biases_[i].assign(ckpt.biases[i].begin(), ckpt.biases[i].end());
    if (l.kind == LayerKind::Conv) {
      const ShapeInfo& out = shapes_[i];
      std::size_t patch = static_cast<std::size_t>(l.kernel) * l.kernel * in.c;
      std::size_t patch_p = kern::pad_patch<T>(patch);
      conv_plans_[i] = ConvPlan{in.h, in.w, in.c, out.h, out.w, l.out_channels,
                                l.kernel, l.stride, l.padding, patch, patch_p,
                                static_cast<std::size_t>(out.h) * out.w};
      // Tail slack lets the last weight row tolerate the kernel reading a
      // full padded patch; the extra lanes always meet zero col entries.
      weights_[i].resize(nw + (patch_p - patch), T(0));
    }
  }
}

template <typename T>
typename Network<T>::Workspace Network<T>::make_workspace() const {
  Workspace ws;
  ws.input.resize(100 * 100 * 3);
  ws.acts.resize(spec_.layers.size());
  ws.grads.resize(spec_.layers.size());
  ws.pool_argmax.resize(spec_.layers.size());
  ws.cols.resize(spec_.layers.size());
  std::size_t max_col = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    std::size_t n = static_cast<std::size_t>(shapes_[i].count());
    ws.acts[i].resize(n);
    ws.grads[i].resize(n);
    if (spec_.layers[i].kind == LayerKind::MaxPool) ws.pool_argmax[i].resize(n);
    if (spec_.layers[i].kind == LayerKind::Conv) {
      // Zero-initialized so the padded tail of every patch row stays zero.
      std::size_t col_n = conv_plans_[i].patch_p * conv_plans_[i].positions;
      ws.cols[i].assign(col_n, T(0));
      max_col = std::max(max_col, col_n);
    }
  }
  ws.dcol.resize(max_col);
  std::size_t max_pos = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i)
    if (spec_.layers[i].kind == LayerKind::Conv)
      max_pos = std::max(max_pos, conv_plans_[i].positions);
  ws.row_used.resize(max_pos);
  return ws;
}

namespace {

// Gathers sliding patches into rows of `col`, one padded row of length
// patch_p per output position, zero padding outside the input. The padded
// tail lanes [patch, patch_p) are never written and must already be zero.
template <typename T>
void im2col(const T* in, int h, int w, int c, int k, int stride, int pad,
            int out_h, int out_w, std::size_t patch_p, T* col) {
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      T* row = col + (static_cast<std::size_t>(oy) * out_w + ox) * patch_p;
      for (int ky = 0; ky < k; ++ky) {
        int iy = oy * stride - pad + ky;
        T* dst = row + static_cast<std::size_t>(ky) * k * c;
        if (iy < 0 || iy >= h) {
          std::fill(dst, dst + static_cast<std::size_t>(k) * c, T(0));
          continue;
        }
        // In-bounds columns of the patch row form one contiguous span.
        int kx0 = std::max(0, pad - ox * stride);
        int kx1 = std::min(k, w + pad - ox * stride);
        if (kx0 > 0) std::fill(dst, dst + static_cast<std::size_t>(kx0) * c, T(0));
        if (kx1 < k)
          std::fill(dst + static_cast<std::size_t>(kx1) * c,
                    dst + static_cast<std::size_t>(k) * c, T(0));
        if (kx1 > kx0) {
          const T* s = in + (static_cast<std::size_t>(iy) * w + (ox * stride - pad + kx0)) * c;
          std::copy(s, s + static_cast<std::size_t>(kx1 - kx0) * c,
                    dst + static_cast<std::size_t>(kx0) * c);
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int h, int w, int c, int k, int stride, int pad,
                int out_h, int out_w, std::size_t patch_p,
                const unsigned char* row_used, T* __restrict dx) {
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      if (!row_used[static_cast<std::size_t>(oy) * out_w + ox]) continue;
      const T* row = col + (static_cast<std::size_t>(oy) * out_w + ox) * patch_p;
      int kx0 = std::max(0, pad - ox * stride);
      int kx1 = std::min(k, w + pad - ox * stride);
      if (kx1 <= kx0) continue;
      const std::size_t span = static_cast<std::size_t>(kx1 - kx0) * c;
      for (int ky = 0; ky < k; ++ky) {
        int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        const T* __restrict s = row + (static_cast<std::size_t>(ky) * k + kx0) * c;
        T* __restrict d = dx + (static_cast<std::size_t>(iy) * w + (ox * stride - pad + kx0)) * c;
#pragma omp simd
        for (std::size_t t = 0; t < span; ++t) d[t] += s[t];
      }
    }
  }
}

}  // namespace

template <typename T>
void Network<T>::conv_forward(int layer, const std::vector<T>& in, std::vector<T>& out,
                              std::vector<T>& col) const {
  const ConvPlan& p = conv_plans_[static_cast<std::size_t>(layer)];
  im2col(in.data(), p.in_h, p.in_w, p.in_c, p.k, p.stride, p.pad, p.out_h, p.out_w,
         p.patch_p, col.data());
  kern::conv_gemm_forward(col.data(), p.positions, p.patch, p.patch_p,
                          weights_[static_cast<std::size_t>(layer)].data(),
                          biases_[static_cast<std::size_t>(layer)].data(), p.oc,
                          out.data());
}

template <typename T>
void Network<T>::conv_backward(int layer, const std::vector<T>& dy,
                               const std::vector<T>& col, std::vector<T>* dx,
                               std::vector<T>& dcol, std::vector<unsigned char>& row_used,
                               GradBuffers<T>& grad) const {
  const ConvPlan& p = conv_plans_[static_cast<std::size_t>(layer)];
  kern::conv_gemm_backward(col.data(), dy.data(), p.positions, p.patch, p.patch_p,
                           weights_[static_cast<std::size_t>(layer)].data(), p.oc,
                           grad.w[static_cast<std::size_t>(layer)].data(),
                           grad.b[static_cast<std::size_t>(layer)].data(),
                           dx ? dcol.data() : nullptr,
                           dx ? row_used.data() : nullptr);
  if (dx) {
    std::fill(dx->begin(), dx->end(), T(0));
    col2im_add(dcol.data(), p.in_h, p.in_w, p.in_c, p.k, p.stride, p.pad, p.out_h,
               p.out_w, p.patch_p, row_used.data(), dx->data());
  }
}

template <typename T>
std::span<const T> Network<T>::forward(std::span<const float> image, Workspace& ws) const {
  if (image.size() != ws.input.size())
    throw Error(Errc::ShapeMismatch, "input image must be 100x100x3");
  for (std::size_t i = 0; i < image.size(); ++i) ws.input[i] = static_cast<T>(image[i]);

  const std::vector<T>* cur = &ws.input;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    std::vector<T>& out = ws.acts[i];
    switch (l.kind) {
      case LayerKind::Conv:
        conv_forward(static_cast<int>(i), *cur, out, ws.cols[i]);
        break;
      case LayerKind::Tanh:
        kern::tanh_forward(cur->data(), out.data(), cur->size());
        break;
      case LayerKind::MaxPool: {
        ShapeInfo in = input_shape_of(shapes_, static_cast<int>(i));
        const ShapeInfo& os = shapes_[i];
        const int ps = l.pool_size;
        std::vector<int>& argmax = ws.pool_argmax[i];
        for (int oy = 0; oy < os.h; ++oy) {
          for (int ox = 0; ox < os.w; ++ox) {
            for (int ch = 0; ch < os.c; ++ch) {
              int best_idx = (oy * ps * in.w + ox * ps) * in.c + ch;
              T best = (*cur)[static_cast<std::size_t>(best_idx)];
              for (int ky = 0; ky < ps; ++ky) {
                for (int kx = (ky == 0 ? 1 : 0); kx < ps; ++kx) {
                  int idx = ((oy * ps + ky) * in.w + (ox * ps + kx)) * in.c + ch;
                  T v = (*cur)[static_cast<std::size_t>(idx)];
                  if (v > best) {  // first index in scan order wins ties
                    best = v;
                    best_idx = idx;
                  }
                }
              }
              std::size_t o = (static_cast<std::size_t>(oy) * os.w + ox) * os.c + ch;
              out[o] = best;
              argmax[o] = best_idx;
            }
          }
        }
        break;
      }
      case LayerKind::Flatten:
        // (row, col, channel) memory order is already the flattened order.
        std::copy(cur->begin(), cur->end(), out.begin());
        break;
      case LayerKind::Fc: {
        const std::size_t in_n = cur->size();
        const T* wts = weights_[i].data();
        for (std::size_t u = 0; u < out.size(); ++u) {
          const T* wrow = wts + u * in_n;
          T acc = biases_[i][u];
#pragma omp simd reduction(+ : acc)
          for (std::size_t t = 0; t < in_n; ++t) acc += wrow[t] * (*cur)[t];
          out[u] = acc;
        }
        break;
      }
    }
    cur = &out;
  }
  return {cur->data(), cur->size()};
}

template <typename T>
double Network<T>::forward_backward(std::span<const float> image,
                                    std::span<const float> target, Workspace& ws,
                                    GradBuffers<T>& grad) const {
  std::span<const T> pred = forward(image, ws);
  if (target.size() != pred.size())
    throw Error(Errc::ShapeMismatch, "target length must match network output");
  const std::size_t n_out = pred.size();

  double loss = 0.0;
  std::vector<T>& dout = ws.grads.back();
  for (std::size_t i = 0; i < n_out; ++i) {
    double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    loss += d * d;
    dout[i] = static_cast<T>(2.0 * d / static_cast<double>(n_out));
  }
  loss /= static_cast<double>(n_out);

  for (int i = static_cast<int>(spec_.layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& l = spec_.layers[static_cast<std::size_t>(i)];
    const std::vector<T>& dy = ws.grads[static_cast<std::size_t>(i)];
    const std::vector<T>& x =
        i == 0 ? ws.input : ws.acts[static_cast<std::size_t>(i) - 1];
    std::vector<T>* dx = i == 0 ? nullptr : &ws.grads[static_cast<std::size_t>(i) - 1];
    switch (l.kind) {
      case LayerKind::Conv:
        // Patches were cached by the forward pass.
        conv_backward(i, dy, ws.cols[static_cast<std::size_t>(i)], dx, ws.dcol,
                      ws.row_used, grad);
        break;
      case LayerKind::Tanh: {
        if (!dx) break;  // first layer: no upstream gradient needed
        const std::vector<T>& y = ws.acts[static_cast<std::size_t>(i)];
        for (std::size_t t = 0; t < dy.size(); ++t)
          (*dx)[t] = dy[t] * (T(1) - y[t] * y[t]);
        break;
      }
      case LayerKind::MaxPool: {
        if (!dx) break;
        std::fill(dx->begin(), dx->end(), T(0));
        const std::vector<int>& argmax = ws.pool_argmax[static_cast<std::size_t>(i)];
        for (std::size_t o = 0; o < dy.size(); ++o)
          (*dx)[static_cast<std::size_t>(argmax[o])] += dy[o];
        break;
      }
      case LayerKind::Flatten:
        if (dx) std::copy(dy.begin(), dy.end(), dx->begin());
        break;
      case LayerKind::Fc: {
        const std::size_t in_n = x.size();
        const T* wts = weights_[static_cast<std::size_t>(i)].data();
        T* dw = grad.w[static_cast<std::size_t>(i)].data();
        T* db = grad.b[static_cast<std::size_t>(i)].data();
        if (dx) std::fill(dx->begin(), dx->end(), T(0));
        for (std::size_t u = 0; u < dy.size(); ++u) {
          const T g = dy[u];
          db[u] += g;
          T* dwrow = dw + u * in_n;
          const T* wrow = wts + u * in_n;
#pragma omp simd
          for (std::size_t t = 0; t < in_n; ++t) dwrow[t] += g * x[t];
          if (dx) {
            T* dxp = dx->data();
#pragma omp simd
            for (std::size_t t = 0; t < in_n; ++t) dxp[t] += g * wrow[t];
          }
        }
        break;
      }
    }
  }
  return loss;
}

template <typename T>
void Network<T>::sgd_step(const GradBuffers<T>& mean_grad, T lr) {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    for (std::size_t j = 0; j < weights_[i].size(); ++j)
      weights_[i][j] -= lr * mean_grad.w[i][j];
    for (std::size_t j = 0; j < biases_[i].size(); ++j)
      biases_[i][j] -= lr * mean_grad.b[i][j];
  }
}

template <typename T>
GradBuffers<T> Network<T>::make_grad_buffers() const {
  GradBuffers<T> g;
  g.w.resize(weights_.size());
  g.b.resize(biases_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    g.w[i].assign(weights_[i].size(), T(0));
    g.b[i].assign(biases_[i].size(), T(0));
  }
  return g;
}

template <typename T>
Checkpoint Network<T>::to_checkpoint(int epoch, double train_loss, double val_loss) const {
  Checkpoint ckpt = meta_;
  ckpt.spec = spec_;
  ckpt.epoch = epoch;
  ckpt.train_loss = train_loss;
  ckpt.val_loss = val_loss;
  ckpt.weights.resize(weights_.size());
  ckpt.biases.resize(biases_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    ShapeInfo in = input_shape_of(shapes_, static_cast<int>(i));
    std::size_t nw = weight_count(spec_.layers[i], in);  // drop tail slack
    ckpt.weights[i].assign(weights_[i].begin(),
                           weights_[i].begin() + static_cast<std::ptrdiff_t>(nw));
    ckpt.biases[i].assign(biases_[i].begin(), biases_[i].end());
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Training

template <typename T>
TrainResult train(const EncodedDataset& train_set, const EncodedDataset& val_set,
                  const NetworkSpec& spec, const TrainConfig& cfg, ThreadPool* pool) {
  if (train_set.count == 0 || val_set.count == 0)
    throw Error(Errc::EmptyDataset, "train and validation sets must be non-empty");
  if (cfg.lr0 < 0 || cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.val_every < 1)
    throw Error(Errc::InvalidArgument, "bad training configuration");

  Checkpoint init = init_weights(spec, cfg.seed);
  init.output_norm = train_set.output_norm;
  init.encoder = encoder_name(train_set.encoder);
  Network<T> net(init);

  const int n_workers = pool ? pool->size() : 1;
  std::vector<typename Network<T>::Workspace> workspaces;
  for (int t = 0; t < n_workers; ++t) workspaces.push_back(net.make_workspace());

  const int batch = cfg.batch_size;
  std::vector<GradBuffers<T>> slot_grads;
  for (int s = 0; s < batch; ++s) slot_grads.push_back(net.make_grad_buffers());
  GradBuffers<T> mean_grad = net.make_grad_buffers();
  std::vector<double> slot_loss(static_cast<std::size_t>(batch), 0.0);

  std::vector<int> parametric_layers;
  std::vector<std::size_t> logical_nw;  // weight counts without kernel slack
  {
    std::vector<ShapeInfo> shapes = validate_spec(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      if (spec.layers[i].kind == LayerKind::Conv || spec.layers[i].kind == LayerKind::Fc) {
        parametric_layers.push_back(static_cast<int>(i));
        logical_nw.push_back(weight_count(spec.layers[i], input_shape_of(shapes, static_cast<int>(i))));
      }
    }
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(train_set.count));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(cfg.seed + 1);

  auto run_batch = [&](std::size_t lo, std::size_t hi) {
    const std::size_t n = hi - lo;
    auto work = [&](std::size_t s, int worker) {
      std::size_t idx = order[lo + s];
      slot_grads[s].zero();
      slot_loss[s] = net.forward_backward(train_set.image(static_cast<int>(idx)),
                                          train_set.target(static_cast<int>(idx)),
                                          workspaces[static_cast<std::size_t>(worker)],
                                          slot_grads[s]);
    };
    if (pool) {
      pool->parallel_for(n, work);
    } else {
      for (std::size_t s = 0; s < n; ++s) work(s, 0);
    }
    mean_grad.zero();
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < n; ++s) {  // fixed order keeps results thread-count independent
      mean_grad.add(slot_grads[s]);
      loss_sum += slot_loss[s];
    }
    mean_grad.scale(T(1) / static_cast<T>(n));
    return loss_sum;
  };

  std::vector<double> val_loss_slots(static_cast<std::size_t>(val_set.count), 0.0);
  auto validate = [&]() {
    auto work = [&](std::size_t i, int worker) {
      auto& ws = workspaces[static_cast<std::size_t>(worker)];
      std::span<const T> pred = net.forward(val_set.image(static_cast<int>(i)), ws);
      std::span<const float> tgt = val_set.target(static_cast<int>(i));
      double acc = 0.0;
      for (std::size_t k = 0; k < pred.size(); ++k) {
        double d = static_cast<double>(pred[k]) - static_cast<double>(tgt[k]);
        acc += d * d;
      }
      val_loss_slots[i] = acc / static_cast<double>(pred.size());
    };
    if (pool) {
      pool->parallel_for(val_loss_slots.size(), work);
    } else {
      for (std::size_t i = 0; i < val_loss_slots.size(); ++i) work(i, 0);
    }
    double s = 0.0;
    for (double v : val_loss_slots) s += v;
    return s / static_cast<double>(val_loss_slots.size());
  };

  TrainResult result;
  result.history.train_mse.reserve(static_cast<std::size_t>(cfg.max_epochs));
  double lr = cfg.lr0;
  double best_val = std::numeric_limits<double>::infinity();

  if (cfg.snapshot_every > 0)
    result.history.snapshots.emplace_back(0, net.to_checkpoint(0, 0.0, 0.0));

  std::vector<std::vector<std::vector<double>>> epoch_grads(parametric_layers.size());

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (auto& g : epoch_grads) g.clear();

    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(batch)) {
      std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(batch));
      epoch_loss += run_batch(lo, hi);
      ++n_batches;
      net.sgd_step(mean_grad, static_cast<T>(lr));
      if (cfg.collect_grad_stats) {
        for (std::size_t pl = 0; pl < parametric_layers.size(); ++pl) {
          const auto& gw = mean_grad.w[static_cast<std::size_t>(parametric_layers[pl])];
          epoch_grads[pl].emplace_back(gw.begin(),
                                       gw.begin() + static_cast<std::ptrdiff_t>(logical_nw[pl]));
        }
      }
    }
    result.history.train_mse.push_back(epoch_loss / static_cast<double>(order.size()));
    result.history.lr.push_back(lr);

    if (cfg.collect_grad_stats && n_batches >= 2) {
      for (std::size_t pl = 0; pl < parametric_layers.size(); ++pl) {
        int li = parametric_layers[pl];
        const auto& wts = net.layer_weights()[static_cast<std::size_t>(li)];
        double norm = 0.0;
        for (std::size_t j = 0; j < logical_nw[pl]; ++j)
          norm += static_cast<double>(wts[j]) * static_cast<double>(wts[j]);
        result.history.grad_stats.push_back(
            grad_stats(epoch, li, epoch_grads[pl], std::sqrt(norm)));
      }
    }

    if (epoch == 1 || epoch % cfg.val_every == 0) {
      double vl = validate();
      result.history.val_mse.emplace_back(epoch, vl);
      if (vl < best_val) {
        best_val = vl;
        result.best = net.to_checkpoint(epoch, result.history.train_mse.back(), vl);
      }
    }
    if (cfg.snapshot_every > 0 && epoch % cfg.snapshot_every == 0) {
      result.history.snapshots.emplace_back(
          epoch, net.to_checkpoint(epoch, result.history.train_mse.back(), 0.0));
    }
    lr *= cfg.lr_decay_per_epoch;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint persistence

namespace {

json layer_to_json(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Conv:
      return {{"kind", "conv"}, {"out_channels", l.out_channels}, {"kernel", l.kernel},
              {"stride", l.stride}, {"padding", l.padding}};
    case LayerKind::Tanh: return {{"kind", "tanh"}};
    case LayerKind::MaxPool:
      return {{"kind", "maxpool"}, {"size", l.pool_size}, {"stride", l.pool_stride}};
    case LayerKind::Flatten: return {{"kind", "flatten"}};
    case LayerKind::Fc: return {{"kind", "fc"}, {"out_units", l.out_units}};
  }
  throw Error(Errc::InvalidArgument, "bad layer kind");
}

LayerSpec layer_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "conv")
    return LayerSpec::conv(j.at("out_channels").get<int>(), j.at("stride").get<int>(),
                           j.at("padding").get<int>(), j.at("kernel").get<int>());
  if (kind == "tanh") return LayerSpec::tanh();
  if (kind == "maxpool") return LayerSpec::maxpool(j.at("size").get<int>(), j.at("stride").get<int>());
  if (kind == "flatten") return LayerSpec::flatten();
  if (kind == "fc") return LayerSpec::fc(j.at("out_units").get<int>());
  throw Error(Errc::CorruptFile, "unknown layer kind '" + kind + "'");
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json header;
  header["spec"]["name"] = ckpt.spec.name;
  header["spec"]["layers"] = json::array();
  for (const LayerSpec& l : ckpt.spec.layers) header["spec"]["layers"].push_back(layer_to_json(l));
  header["epoch"] = ckpt.epoch;
  header["train_loss"] = ckpt.train_loss;
  header["val_loss"] = ckpt.val_loss;
  if (ckpt.output_norm) {
    header["output_norm"] = {{"min_w", ckpt.output_norm->min_w},
                             {"max_w", ckpt.output_norm->max_w}};
  } else {
    header["output_norm"] = nullptr;
  }
  header["encoder"] = ckpt.encoder;

  std::vector<float> blob;
  json sections = json::array();
  for (std::size_t i = 0; i < ckpt.weights.size(); ++i) {
    if (ckpt.weights[i].empty()) continue;
    json sec;
    sec["layer"] = i;
    sec["weights_offset"] = blob.size();
    sec["weights_count"] = ckpt.weights[i].size();
    blob.insert(blob.end(), ckpt.weights[i].begin(), ckpt.weights[i].end());
    sec["bias_offset"] = blob.size();
    sec["bias_count"] = ckpt.biases[i].size();
    blob.insert(blob.end(), ckpt.biases[i].begin(), ckpt.biases[i].end());
    sections.push_back(sec);
  }
  header["sections"] = sections;
  binfile::write_file(path, "EVCK", header.dump(), blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  binfile::Loaded file = binfile::read_file(path, "EVCK");
  json header;
  try {
    header = json::parse(file.header_json);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, path.string() + ": bad header: " + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.spec.name = header.at("spec").at("name").get<std::string>();
    for (const json& jl : header.at("spec").at("layers"))
      ckpt.spec.layers.push_back(layer_from_json(jl));
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.train_loss = header.at("train_loss").get<double>();
    ckpt.val_loss = header.at("val_loss").get<double>();
    if (!header.at("output_norm").is_null())
      ckpt.output_norm = NormStats{header["output_norm"].at("min_w").get<double>(),
                                   header["output_norm"].at("max_w").get<double>()};
    ckpt.encoder = header.value("encoder", std::string{});
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, path.string() + ": bad header: " + e.what());
  }

  std::vector<ShapeInfo> shapes = validate_spec(ckpt.spec);
  ckpt.weights.assign(ckpt.spec.layers.size(), {});
  ckpt.biases.assign(ckpt.spec.layers.size(), {});

  // Truncation is file corruption; a complete blob whose sizes disagree
  // with the declared spec is a spec mismatch.
  std::size_t claimed_end = 0;
  for (const json& sec : header.at("sections")) {
    claimed_end = std::max(claimed_end, sec.at("weights_offset").get<std::size_t>() +
                                            sec.at("weights_count").get<std::size_t>());
    claimed_end = std::max(claimed_end, sec.at("bias_offset").get<std::size_t>() +
                                            sec.at("bias_count").get<std::size_t>());
  }
  if (file.blob.size() < claimed_end)
    throw Error(Errc::CorruptFile, path.string() + ": weight blob is truncated");

  for (const json& sec : header.at("sections")) {
    std::size_t layer = sec.at("layer").get<std::size_t>();
    if (layer >= ckpt.spec.layers.size())
      throw Error(Errc::SpecMismatch, path.string() + ": section for nonexistent layer");
    ShapeInfo in = input_shape_of(shapes, static_cast<int>(layer));
    std::size_t nw = weight_count(ckpt.spec.layers[layer], in);
    std::size_t nb = bias_count(ckpt.spec.layers[layer]);
    if (sec.at("weights_count").get<std::size_t>() != nw ||
        sec.at("bias_count").get<std::size_t>() != nb)
      throw Error(Errc::SpecMismatch,
                  path.string() + ": weight sizes do not match the declared spec");
    std::size_t wo = sec.at("weights_offset").get<std::size_t>();
    std::size_t bo = sec.at("bias_offset").get<std::size_t>();
    ckpt.weights[layer].assign(file.blob.begin() + static_cast<std::ptrdiff_t>(wo),
                               file.blob.begin() + static_cast<std::ptrdiff_t>(wo + nw));
    ckpt.biases[layer].assign(file.blob.begin() + static_cast<std::ptrdiff_t>(bo),
                              file.blob.begin() + static_cast<std::ptrdiff_t>(bo + nb));
  }
  for (std::size_t i = 0; i < ckpt.spec.layers.size(); ++i) {
    ShapeInfo in = input_shape_of(shapes, static_cast<int>(i));
    if (ckpt.weights[i].size() != weight_count(ckpt.spec.layers[i], in))
      throw Error(Errc::SpecMismatch, path.string() + ": missing weights for layer " +
                                          std::to_string(i));
  }
  return ckpt;
}

void save_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for write: " + path.string());
  out << "epoch,train_mse,val_mse,lr\n";
  std::size_t vi = 0;
  char buf[128];
  for (std::size_t e = 0; e < history.train_mse.size(); ++e) {
    int epoch = static_cast<int>(e) + 1;
    std::string val;
    if (vi < history.val_mse.size() && history.val_mse[vi].first == epoch) {
      std::snprintf(buf, sizeof buf, "%.9g", history.val_mse[vi].second);
      val = buf;
      ++vi;
    }
    std::snprintf(buf, sizeof buf, "%d,%.9g,%s,%.9g", epoch, history.train_mse[e],
                  val.c_str(), history.lr[e]);
    out << buf << "\n";
  }
}

void save_grad_stats_csv(const TrainHistory& history, const NetworkSpec& spec,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for write: " + path.string());
  out << "epoch,layer_index,layer,mean_norm,std_norm\n";
  char buf[160];
  for (const GradStats& gs : history.grad_stats) {
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%.9g,%.9g", gs.epoch, gs.layer_index,
                  layer_label(spec, gs.layer_index).c_str(), gs.mean_norm, gs.std_norm);
    out << buf << "\n";
  }
}

template struct GradBuffers<float>;
template struct GradBuffers<double>;
template class Network<float>;
template class Network<double>;
template TrainResult train<float>(const EncodedDataset&, const EncodedDataset&,
                                  const NetworkSpec&, const TrainConfig&, ThreadPool*);
template TrainResult train<double>(const EncodedDataset&, const EncodedDataset&,
                                   const NetworkSpec&, const TrainConfig&, ThreadPool*);

}  // namespace evpower
