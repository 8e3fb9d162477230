#pragma once

#include <string>
#include <vector>

namespace evpower {

enum class LayerKind { Conv, Tanh, MaxPool, Flatten, Fc };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  // conv
  int out_channels = 0;
  int kernel = 5;
  int stride = 1;
  int padding = 0;
  // maxpool (stride equals size; pooling windows do not overlap)
  int pool_size = 0;
  int pool_stride = 0;
  // fc
  int out_units = 0;

  static LayerSpec conv(int out_channels, int stride, int padding, int kernel = 5);
  static LayerSpec tanh();
  static LayerSpec maxpool(int size, int stride);
  static LayerSpec flatten();
  static LayerSpec fc(int out_units);
};

struct NetworkSpec {
  std::string name;
  std::vector<LayerSpec> layers;
};

/// The two reference architectures. Both take 100x100x3 and emit 100 values.
NetworkSpec cnn7_spec();
NetworkSpec cnn9_spec();
NetworkSpec spec_from_name(const std::string& name);

/// ((in - kernel + 2*padding) / stride) + 1 with floor division, the
/// convention under which a 100-wide input with 5/2/2 maps to 50.
int conv_out_size(int in, int kernel, int padding, int stride);

struct ShapeInfo {
  int h = 0, w = 0, c = 0;  // c == 0 marks a flattened 1-D stage of length h
  bool flat() const { return c == 0; }
  long long count() const {
    return flat() ? h : static_cast<long long>(h) * w * c;
  }
};

/// Shape after every layer (index aligned with spec.layers). Throws
/// InvalidGeometry / ShapeMismatch when the plan is inconsistent; enforces
/// that pooling tiles its input exactly and the final output length is 100.
std::vector<ShapeInfo> validate_spec(const NetworkSpec& spec,
                                     int in_h = 100, int in_w = 100, int in_c = 3);

/// Convs, pools, flatten and fc count as tracked layers; tanh does not.
int tracked_layer_count(const NetworkSpec& spec);

/// Human-readable layer label, e.g. "conv1", "pool2", "fc".
std::string layer_label(const NetworkSpec& spec, int layer_index);

}  // namespace evpower
