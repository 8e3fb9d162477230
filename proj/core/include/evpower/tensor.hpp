#pragma once

#include <cstddef>
#include <vector>

namespace evpower {

/// Dense rank-3 array, row-major in (row, col, channel) order so that the
/// channel index is contiguous.
template <typename T>
struct Tensor3 {
  int h = 0, w = 0, c = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int h_, int w_, int c_)
      : h(h_), w(w_), c(c_),
        data(static_cast<std::size_t>(h_) * w_ * c_, T{}) {}

  std::size_t size() const { return data.size(); }

  T& at(int r, int col, int ch) {
    return data[(static_cast<std::size_t>(r) * w + col) * c + ch];
  }
  T at(int r, int col, int ch) const {
    return data[(static_cast<std::size_t>(r) * w + col) * c + ch];
  }
};

}  // namespace evpower
