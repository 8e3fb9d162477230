#pragma once

// SIMD microkernels for the convolution engine. Patch rows are padded with
// zeros to a vector-width multiple, so the zero lanes drop out of every
// accumulation and the kernels never need scalar remainders over the patch.

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace evpower::kern {

template <typename T>
struct VecTraits;

template <>
struct VecTraits<float> {
  typedef float V __attribute__((vector_size(64), aligned(4), may_alias));
  typedef int IV __attribute__((vector_size(64)));
  static constexpr int lanes = 16;
  static inline float sum(V v) {
    v += __builtin_shuffle(v, IV{8, 9, 10, 11, 12, 13, 14, 15, 8, 9, 10, 11, 12, 13, 14, 15});
    v += __builtin_shuffle(v, IV{4, 5, 6, 7, 4, 5, 6, 7, 4, 5, 6, 7, 4, 5, 6, 7});
    v += __builtin_shuffle(v, IV{2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3, 2, 3});
    v += __builtin_shuffle(v, IV{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
    return v[0];
  }
};

template <>
struct VecTraits<double> {
  typedef double V __attribute__((vector_size(64), aligned(8), may_alias));
  typedef long long IV __attribute__((vector_size(64)));
  static constexpr int lanes = 8;
  static inline double sum(V v) {
    v += __builtin_shuffle(v, IV{4, 5, 6, 7, 4, 5, 6, 7});
    v += __builtin_shuffle(v, IV{2, 3, 2, 3, 2, 3, 2, 3});
    v += __builtin_shuffle(v, IV{1, 1, 1, 1, 1, 1, 1, 1});
    return v[0];
  }
};

template <typename T>
using Vec = typename VecTraits<T>::V;

template <typename T>
inline Vec<T> vload(const T* p) {
  return *reinterpret_cast<const Vec<T>*>(p);
}

template <typename T>
inline void vstore(T* p, Vec<T> v) {
  *reinterpret_cast<Vec<T>*>(p) = v;
}

template <typename T>
inline std::size_t pad_patch(std::size_t patch) {
  const std::size_t step = 2 * VecTraits<T>::lanes;
  return (patch + step - 1) / step * step;
}

/// out[pos][oc] = bias[oc] + dot(col_row(pos), w_row(oc)). Weight rows have
/// logical stride `patch`; reads past a row's end land in the next row (or
/// the caller-provided tail slack) and meet zero col lanes, contributing
/// nothing.
template <typename T>
void conv_gemm_forward(const T* col, std::size_t positions, std::size_t patch,
                       std::size_t patch_p, const T* w, const T* bias, int oc_n,
                       T* out) {
  using V = Vec<T>;
  constexpr int L = VecTraits<T>::lanes;
  for (std::size_t pos = 0; pos < positions; ++pos) {
    const T* crow = col + pos * patch_p;
    T* orow = out + pos * static_cast<std::size_t>(oc_n);
    int oc = 0;
    for (; oc + 4 <= oc_n; oc += 4) {
      const T* w0 = w + static_cast<std::size_t>(oc) * patch;
      const T* w1 = w0 + patch;
      const T* w2 = w1 + patch;
      const T* w3 = w2 + patch;
      V a00{}, a01{}, a10{}, a11{}, a20{}, a21{}, a30{}, a31{};
      std::size_t t = 0;
      for (; t + 2 * L <= patch_p; t += 2 * L) {
        V x0 = vload(crow + t), x1 = vload(crow + t + L);
        a00 += x0 * vload(w0 + t);
        a01 += x1 * vload(w0 + t + L);
        a10 += x0 * vload(w1 + t);
        a11 += x1 * vload(w1 + t + L);
        a20 += x0 * vload(w2 + t);
        a21 += x1 * vload(w2 + t + L);
        a30 += x0 * vload(w3 + t);
        a31 += x1 * vload(w3 + t + L);
      }
      orow[oc] = VecTraits<T>::sum(a00 + a01) + bias[oc];
      orow[oc + 1] = VecTraits<T>::sum(a10 + a11) + bias[oc + 1];
      orow[oc + 2] = VecTraits<T>::sum(a20 + a21) + bias[oc + 2];
      orow[oc + 3] = VecTraits<T>::sum(a30 + a31) + bias[oc + 3];
    }
    for (; oc < oc_n; ++oc) {
      const T* wr = w + static_cast<std::size_t>(oc) * patch;
      V a0{}, a1{};
      std::size_t t = 0;
      for (; t + 2 * L <= patch_p; t += 2 * L) {
        a0 += vload(crow + t) * vload(wr + t);
        a1 += vload(crow + t + L) * vload(wr + t + L);
      }
      orow[oc] = VecTraits<T>::sum(a0 + a1) + bias[oc];
    }
  }
}

/// Accumulates dW += dY^T col and db += column sums of dY; when dcol is
/// non-null also fills dcol[pos] = sum_oc dY[pos][oc] * w_row(oc). Rows
/// whose entire gradient is zero (common below a maxpool) are skipped and
/// flagged in row_used so col2im can skip them too.
template <typename T>
void conv_gemm_backward(const T* col, const T* dy, std::size_t positions,
                        std::size_t patch, std::size_t patch_p, const T* w,
                        int oc_n, T* dw, T* db, T* dcol,
                        unsigned char* row_used) {
  using V = Vec<T>;
  constexpr int L = VecTraits<T>::lanes;
  for (std::size_t pos = 0; pos < positions; ++pos) {
    const T* crow = col + pos * patch_p;
    const T* dyrow = dy + pos * static_cast<std::size_t>(oc_n);
    bool any = false;
    for (int oc = 0; oc < oc_n; ++oc) {
      db[oc] += dyrow[oc];
      any |= dyrow[oc] != T(0);
    }
    if (row_used) row_used[pos] = any;
    if (!any) continue;
    T* drow = dcol ? dcol + pos * patch_p : nullptr;
    if (drow) {
      for (std::size_t t = 0; t < patch_p; t += L) vstore(drow + t, V{});
    }
    // Mostly-zero rows (gradients scattered back through a maxpool) go
    // through the per-channel path so zero channels cost nothing.
    int nonzero = 0;
    for (int oc = 0; oc < oc_n; ++oc) nonzero += dyrow[oc] != T(0);
    int oc = 0;
    for (; nonzero * 2 > oc_n && oc + 4 <= oc_n; oc += 4) {
      const T g0 = dyrow[oc], g1 = dyrow[oc + 1], g2 = dyrow[oc + 2], g3 = dyrow[oc + 3];
      if (g0 == T(0) && g1 == T(0) && g2 == T(0) && g3 == T(0)) continue;
      T* d0 = dw + static_cast<std::size_t>(oc) * patch;
      T* d1 = d0 + patch;
      T* d2 = d1 + patch;
      T* d3 = d2 + patch;
      const T* w0 = w + static_cast<std::size_t>(oc) * patch;
      const T* w1 = w0 + patch;
      const T* w2 = w1 + patch;
      const T* w3 = w2 + patch;
      V gv0{}, gv1{}, gv2{}, gv3{};
      gv0 += g0;
      gv1 += g1;
      gv2 += g2;
      gv3 += g3;
      if (drow) {
        for (std::size_t t = 0; t < patch_p; t += L) {
          V x = vload(crow + t);
          vstore(d0 + t, vload(d0 + t) + gv0 * x);
          vstore(d1 + t, vload(d1 + t) + gv1 * x);
          vstore(d2 + t, vload(d2 + t) + gv2 * x);
          vstore(d3 + t, vload(d3 + t) + gv3 * x);
          V acc = gv0 * vload(w0 + t) + gv1 * vload(w1 + t) + gv2 * vload(w2 + t) +
                  gv3 * vload(w3 + t);
          vstore(drow + t, vload(drow + t) + acc);
        }
      } else {
        for (std::size_t t = 0; t < patch_p; t += L) {
          V x = vload(crow + t);
          vstore(d0 + t, vload(d0 + t) + gv0 * x);
          vstore(d1 + t, vload(d1 + t) + gv1 * x);
          vstore(d2 + t, vload(d2 + t) + gv2 * x);
          vstore(d3 + t, vload(d3 + t) + gv3 * x);
        }
      }
    }
    for (; oc < oc_n; ++oc) {
      const T g = dyrow[oc];
      if (g == T(0)) continue;
      T* dwr = dw + static_cast<std::size_t>(oc) * patch;
      const T* wr = w + static_cast<std::size_t>(oc) * patch;
      V gv{};
      gv += g;
      if (drow) {
        for (std::size_t t = 0; t < patch_p; t += L) {
          vstore(dwr + t, vload(dwr + t) + gv * vload(crow + t));
          vstore(drow + t, vload(drow + t) + gv * vload(wr + t));
        }
      } else {
        for (std::size_t t = 0; t < patch_p; t += L) {
          vstore(dwr + t, vload(dwr + t) + gv * vload(crow + t));
        }
      }
    }
  }
}

/// tanh(x) = (1 - e^{-2x}) / (1 + e^{-2x}), sign-folded so the exponent is
/// always negative. The float path evaluates e^{-2|x|} as 2^z with a
/// seventh-order polynomial for 2^r, accurate to ~2e-6 absolute; the loop
/// body lives here so the compiler vectorizes it. The double path keeps the
/// libm exponential for gradient-check accuracy.
inline void tanh_forward(const float* src, float* dst, std::size_t n) {
  using VF = VecTraits<float>::V;
  using VI = VecTraits<float>::IV;
  constexpr int L = VecTraits<float>::lanes;
  constexpr float kLog2e2 = -2.8853900817779268f;  // -2 * log2(e)
  const VF clamp = VF{} - 25.0f;
  const VF one = VF{} + 1.0f;
  std::size_t i = 0;
  for (; i + L <= n; i += L) {
    VF x = vload(src + i);
    VI xb = reinterpret_cast<VI&>(x);
    VI axb = xb & 0x7fffffff;
    VF ax = reinterpret_cast<VF&>(axb);
    VF z = ax * kLog2e2;
    VI above = z > clamp;  // lanes of -1 where no clamping needed
    VI zb = (reinterpret_cast<VI&>(z) & above) | (reinterpret_cast<const VI&>(clamp) & ~above);
    z = reinterpret_cast<VF&>(zb);
    VI ti = __builtin_convertvector(z, VI);  // truncation toward zero
    VF tf = __builtin_convertvector(ti, VF);
    VF nf = tf + __builtin_convertvector(tf > z, VF);  // floor: -1 where truncated up
    VF r = z - nf;
    VF p = one +
           r * (0.6931471806f +
                r * (0.2402265070f +
                     r * (0.0555041087f +
                          r * (0.0096181291f +
                               r * (0.0013333558f +
                                    r * (1.540353e-4f + r * 1.525273e-5f))))));
    VI eb = (__builtin_convertvector(nf, VI) + 127) << 23;
    VF e = reinterpret_cast<VF&>(eb) * p;
    VF th = (one - e) / (one + e);
    VI signed_th = (reinterpret_cast<VI&>(th) & 0x7fffffff) | (xb & ~0x7fffffff);
    vstore(dst + i, reinterpret_cast<VF&>(signed_th));
  }
  for (; i < n; ++i) {  // scalar tail, same operation sequence as the lanes
    float x = src[i];
    float ax = std::fabs(x);
    float z = ax * kLog2e2;
    z = z > -25.0f ? z : -25.0f;
    float tf = static_cast<float>(static_cast<int>(z));
    float nf = tf > z ? tf - 1.0f : tf;
    float r = z - nf;
    float p = 1.0f +
              r * (0.6931471806f +
                   r * (0.2402265070f +
                        r * (0.0555041087f +
                             r * (0.0096181291f +
                                  r * (0.0013333558f +
                                       r * (1.540353e-4f + r * 1.525273e-5f))))));
    float e = __builtin_bit_cast(float, (static_cast<int>(nf) + 127) << 23) * p;
    float th = (1.0f - e) / (1.0f + e);
    dst[i] = x < 0.0f ? -th : th;
  }
}

inline void tanh_forward(const double* src, double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double x = src[i];
    double e = std::exp(-2.0 * std::fabs(x));
    double th = (1.0 - e) / (1.0 + e);
    dst[i] = x < 0.0 ? -th : th;
  }
}

}  // namespace evpower::kern
