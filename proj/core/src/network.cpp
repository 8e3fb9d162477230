#include "evpower/network.hpp"

#include "evpower/errors.hpp"

namespace evpower {

LayerSpec LayerSpec::conv(int out_channels, int stride, int padding, int kernel) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.out_channels = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  return l;
}

LayerSpec LayerSpec::tanh() {
  LayerSpec l;
  l.kind = LayerKind::Tanh;
  return l;
}

LayerSpec LayerSpec::maxpool(int size, int stride) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool;
  l.pool_size = size;
  l.pool_stride = stride;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::Flatten;
  return l;
}

LayerSpec LayerSpec::fc(int out_units) {
  LayerSpec l;
  l.kind = LayerKind::Fc;
  l.out_units = out_units;
  return l;
}

NetworkSpec cnn7_spec() {
  NetworkSpec spec;
  spec.name = "CNN7";
  spec.layers = {
      LayerSpec::conv(12, 2, 2), LayerSpec::tanh(),
      LayerSpec::conv(9, 1, 2),  LayerSpec::tanh(),
      LayerSpec::maxpool(2, 2),
      LayerSpec::conv(6, 1, 2),  LayerSpec::tanh(),
      LayerSpec::maxpool(5, 5),
      LayerSpec::flatten(),
      LayerSpec::fc(100),
  };
  return spec;
}

NetworkSpec cnn9_spec() {
  NetworkSpec spec;
  spec.name = "CNN9";
  spec.layers = {
      LayerSpec::conv(12, 2, 2), LayerSpec::tanh(),
      LayerSpec::conv(10, 1, 2), LayerSpec::tanh(),
      LayerSpec::maxpool(2, 2),
      LayerSpec::conv(8, 1, 2),  LayerSpec::tanh(),
      LayerSpec::conv(6, 1, 2),  LayerSpec::tanh(),
      LayerSpec::maxpool(5, 5),
      LayerSpec::conv(4, 1, 2),  LayerSpec::tanh(),
      LayerSpec::flatten(),
      LayerSpec::fc(100),
  };
  return spec;
}

NetworkSpec spec_from_name(const std::string& name) {
  if (name == "CNN7" || name == "cnn7") return cnn7_spec();
  if (name == "CNN9" || name == "cnn9") return cnn9_spec();
  throw Error(Errc::InvalidArgument, "unknown architecture '" + name + "' (use cnn7|cnn9)");
}

int conv_out_size(int in, int kernel, int padding, int stride) {
  if (in <= 0 || kernel <= 0 || stride <= 0 || padding < 0)
    throw Error(Errc::InvalidGeometry, "conv_out_size: non-positive geometry");
  int span = in - kernel + 2 * padding;
  if (span < 0)
    throw Error(Errc::InvalidGeometry, "conv_out_size: kernel larger than padded input");
  return span / stride + 1;
}

std::vector<ShapeInfo> validate_spec(const NetworkSpec& spec,
                                     int in_h, int in_w, int in_c) {
  if (spec.layers.empty())
    throw Error(Errc::InvalidArgument, "network has no layers");
  std::vector<ShapeInfo> shapes;
  shapes.reserve(spec.layers.size());
  ShapeInfo cur{in_h, in_w, in_c};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::Conv: {
        if (cur.flat())
          throw Error(Errc::ShapeMismatch, "conv after flatten");
        if (l.out_channels <= 0 || l.kernel <= 0)
          throw Error(Errc::InvalidGeometry, "conv layer with non-positive size");
        cur = {conv_out_size(cur.h, l.kernel, l.padding, l.stride),
               conv_out_size(cur.w, l.kernel, l.padding, l.stride), l.out_channels};
        break;
      }
      case LayerKind::Tanh:
        break;
      case LayerKind::MaxPool: {
        if (cur.flat())
          throw Error(Errc::ShapeMismatch, "maxpool after flatten");
        if (l.pool_size <= 0 || l.pool_stride != l.pool_size)
          throw Error(Errc::InvalidGeometry, "maxpool stride must equal its size");
        if (cur.h % l.pool_size != 0 || cur.w % l.pool_size != 0)
          throw Error(Errc::InvalidGeometry, "maxpool does not tile its input");
        cur = {cur.h / l.pool_size, cur.w / l.pool_size, cur.c};
        break;
      }
      case LayerKind::Flatten:
        if (cur.flat())
          throw Error(Errc::ShapeMismatch, "flatten after flatten");
        cur = {static_cast<int>(cur.count()), 0, 0};
        break;
      case LayerKind::Fc:
        if (!cur.flat())
          throw Error(Errc::ShapeMismatch, "fc requires a flattened input");
        if (l.out_units <= 0)
          throw Error(Errc::InvalidGeometry, "fc layer with non-positive width");
        cur = {l.out_units, 0, 0};
        break;
    }
    shapes.push_back(cur);
  }
  if (!shapes.back().flat() || shapes.back().h != 100)
    throw Error(Errc::ShapeMismatch, "network must end with exactly 100 outputs");
  return shapes;
}

int tracked_layer_count(const NetworkSpec& spec) {
  int n = 0;
  for (const LayerSpec& l : spec.layers)
    if (l.kind != LayerKind::Tanh) ++n;
  return n;
}

std::string layer_label(const NetworkSpec& spec, int layer_index) {
  if (layer_index < 0 || layer_index >= static_cast<int>(spec.layers.size()))
    throw Error(Errc::InvalidArgument, "layer index out of range");
  int conv_no = 0, pool_no = 0, fc_no = 0;
  for (int i = 0; i <= layer_index; ++i) {
    switch (spec.layers[static_cast<std::size_t>(i)].kind) {
      case LayerKind::Conv: ++conv_no; break;
      case LayerKind::MaxPool: ++pool_no; break;
      case LayerKind::Fc: ++fc_no; break;
      default: break;
    }
  }
  switch (spec.layers[static_cast<std::size_t>(layer_index)].kind) {
    case LayerKind::Conv: return "conv" + std::to_string(conv_no);
    case LayerKind::MaxPool: return "pool" + std::to_string(pool_no);
    case LayerKind::Fc: return fc_no > 1 ? "fc" + std::to_string(fc_no) : "fc";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Tanh: return "tanh";
  }
  return "?";
}

}  // namespace evpower
