#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "evpower/encoders.hpp"
#include "evpower/errors.hpp"
#include "evpower/rng.hpp"

using namespace evpower;

namespace {

std::vector<double> random_signal(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform(lo, hi);
  return x;
}

Window random_window(Rng& rng) {
  Window w;
  w.v_sp = random_signal(rng, 100, 0, 30);
  w.t_eff = random_signal(rng, 100, -2000, 2000);
  w.r_el = random_signal(rng, 100, -0.2, 0.2);
  w.p_batt = random_signal(rng, 100, -5000, 20000);
  w.source_cycle = "rand";
  return w;
}

}  // namespace

TEST_CASE("normalize_signal endpoint algebra") {
  std::vector<double> x = {0, 5, 10};
  auto xhat = normalize_signal(x);
  CHECK(xhat[0] == doctest::Approx(-1.0));
  CHECK(xhat[1] == doctest::Approx(0.0));
  CHECK(xhat[2] == doctest::Approx(1.0));
}

TEST_CASE("normalize_signal of a constant is all zeros") {
  std::vector<double> x(100, 7.3);
  auto xhat = normalize_signal(x);
  for (double v : xhat) CHECK(v == 0.0);
}

TEST_CASE("normalize_signal is invariant under positive affine maps") {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    auto x = random_signal(rng, 100, -50, 50);
    double a = rng.uniform(0.1, 10.0);
    double b = rng.uniform(-100, 100);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
    auto xh = normalize_signal(x);
    auto yh = normalize_signal(y);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(xh[i] == doctest::Approx(yh[i]).epsilon(1e-9));
  }
}

TEST_CASE("gaf of the zero signal is uniformly -1") {
  std::vector<double> zeros(100, 0.0);
  auto g = gaf(zeros);
  for (double v : g) CHECK(v == doctest::Approx(-1.0));
}

TEST_CASE("gaf of the all-ones signal is uniformly +1") {
  std::vector<double> ones(100, 1.0);
  auto g = gaf(ones);
  for (double v : g) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("gaf matches the trigonometric identity") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto xhat = normalize_signal(random_signal(rng, 100, -10, 10));
    auto g = gaf(xhat);
    double max_err = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      for (std::size_t j = 0; j < 100; ++j) {
        double ref = std::cos(std::acos(xhat[i]) + std::acos(xhat[j]));
        max_err = std::max(max_err, std::abs(g[i * 100 + j] - ref));
      }
    }
    CHECK(max_err < 1e-9);
  }
}

TEST_CASE("gaf diagonal identity and symmetry") {
  Rng rng(6);
  auto xhat = normalize_signal(random_signal(rng, 100, 0, 1));
  auto g = gaf(xhat);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(g[i * 100 + i] ==
          doctest::Approx(2.0 * xhat[i] * xhat[i] - 1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < i; ++j) CHECK(g[i * 100 + j] == g[j * 100 + i]);
  }
  for (double v : g) {
    CHECK(v >= -1.0 - 1e-12);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("gaf diagonal determines |xhat|") {
  Rng rng(7);
  auto xhat = normalize_signal(random_signal(rng, 100, -3, 3));
  auto g = gaf(xhat);
  for (std::size_t i = 0; i < 100; ++i) {
    double mag = std::sqrt((g[i * 100 + i] + 1.0) / 2.0);
    CHECK(mag == doctest::Approx(std::abs(xhat[i])).epsilon(1e-7));
  }
}

TEST_CASE("covariance_channel of constant input is all zeros") {
  std::vector<double> x(100, 0.4);
  for (double v : covariance_channel(x)) CHECK(v == 0.0);
}

TEST_CASE("covariance_channel equals the brute-force outer product") {
  Rng rng(8);
  auto xhat = normalize_signal(random_signal(rng, 100, -5, 5));
  double mean = std::accumulate(xhat.begin(), xhat.end(), 0.0) / 100.0;
  auto c = covariance_channel(xhat);
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = 0; j < 100; ++j)
      CHECK(c[i * 100 + j] ==
            doctest::Approx((xhat[i] - mean) * (xhat[j] - mean)).epsilon(1e-12));
  // exact symmetry by construction
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(c[i * 100 + j] == c[j * 100 + i]);
}

TEST_CASE("covariance_channel is positive semidefinite with near-zero grand sum") {
  Rng rng(9);
  auto xhat = normalize_signal(random_signal(rng, 100, -5, 5));
  auto c = covariance_channel(xhat);
  EighResult eig = jacobi_eigh(c, 100);
  for (double ev : eig.eigenvalues) CHECK(ev >= -1e-12);
  // rank <= 1: second eigenvalue is numerically zero
  CHECK(std::abs(eig.eigenvalues[1]) < 1e-10);
  double grand = std::accumulate(c.begin(), c.end(), 0.0);
  CHECK(std::abs(grand) < 1e-12);  // row sums cancel since sum(d) = 0
}

TEST_CASE("jacobi_eigh on the identity") {
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[static_cast<std::size_t>(i) * 4 + i] = 1.0;
  EighResult r = jacobi_eigh(eye, 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(r.eigenvalues[static_cast<std::size_t>(i)] == doctest::Approx(1.0));
    for (int j = 0; j < 4; ++j)
      CHECK(r.eigenvectors[static_cast<std::size_t>(i) * 4 + j] ==
            doctest::Approx(i == j ? 1.0 : 0.0));
  }
}

TEST_CASE("jacobi_eigh sorts a diagonal matrix descending") {
  std::vector<double> m = {3, 0, 0, 0, 1, 0, 0, 0, 2};
  EighResult r = jacobi_eigh(m, 3);
  CHECK(r.eigenvalues[0] == doctest::Approx(3.0));
  CHECK(r.eigenvalues[1] == doctest::Approx(2.0));
  CHECK(r.eigenvalues[2] == doctest::Approx(1.0));
  // columns are the permuted unit vectors e1, e3, e2
  CHECK(r.eigenvectors[0 * 3 + 0] == doctest::Approx(1.0));
  CHECK(r.eigenvectors[2 * 3 + 1] == doctest::Approx(1.0));
  CHECK(r.eigenvectors[1 * 3 + 2] == doctest::Approx(1.0));
}

TEST_CASE("jacobi_eigh residual and orthonormality on random symmetric matrices") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10;
    std::vector<double> m(n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        double v = rng.uniform(-1, 1);
        m[static_cast<std::size_t>(i) * n + j] = v;
        m[static_cast<std::size_t>(j) * n + i] = v;
      }
    EighResult r = jacobi_eigh(m, n);
    double max_resid = 0.0, max_ortho = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double av = 0.0, vtv = 0.0;
        for (int k = 0; k < n; ++k) {
          av += m[static_cast<std::size_t>(i) * n + k] *
                r.eigenvectors[static_cast<std::size_t>(k) * n + j];
          vtv += r.eigenvectors[static_cast<std::size_t>(k) * n + i] *
                 r.eigenvectors[static_cast<std::size_t>(k) * n + j];
        }
        max_resid = std::max(max_resid,
                             std::abs(av - r.eigenvectors[static_cast<std::size_t>(i) * n + j] *
                                               r.eigenvalues[static_cast<std::size_t>(j)]));
        max_ortho = std::max(max_ortho, std::abs(vtv - (i == j ? 1.0 : 0.0)));
      }
    }
    CHECK(max_resid < 1e-6);
    CHECK(max_ortho < 1e-8);
    // descending order
    for (int j = 1; j < n; ++j)
      CHECK(r.eigenvalues[static_cast<std::size_t>(j - 1)] >=
            r.eigenvalues[static_cast<std::size_t>(j)]);
    // sign convention: largest-magnitude entry of every column is >= 0
    for (int j = 0; j < n; ++j) {
      int arg = 0;
      double best = -1.0;
      for (int k = 0; k < n; ++k) {
        double mag = std::abs(r.eigenvectors[static_cast<std::size_t>(k) * n + j]);
        if (mag > best) {
          best = mag;
          arg = k;
        }
      }
      CHECK(r.eigenvectors[static_cast<std::size_t>(arg) * n + j] >= 0.0);
    }
  }
}

TEST_CASE("jacobi_eigh rejects asymmetric input") {
  std::vector<double> m = {1, 2, 0, 1};
  try {
    jacobi_eigh(m, 2);
    FAIL("expected NotSymmetric");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotSymmetric);
  }
}

TEST_CASE("eigen_channel of a constant signal is the identity image") {
  std::vector<double> x(100, 2.5);
  auto e = eigen_channel(x);
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = 0; j < 100; ++j)
      CHECK(e[i * 100 + j] == doctest::Approx(i == j ? 1.0 : 0.0));
}

TEST_CASE("eigen_channel attains 0 and 1 and stays in range") {
  Rng rng(12);
  auto x = random_signal(rng, 100, -1000, 3000);  // physical magnitudes
  auto e = eigen_channel(x);
  double lo = 2.0, hi = -2.0;
  for (double v : e) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(1.0));
}

TEST_CASE("first eigenvector of the rank-1 covariance aligns with the deviations") {
  Rng rng(13);
  auto x = random_signal(rng, 100, -10, 50);
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / 100.0;
  std::vector<double> d(100);
  for (std::size_t i = 0; i < 100; ++i) d[i] = x[i] - mean;

  auto c = covariance_channel(x);
  double max_abs = 0.0;
  for (double v : c) max_abs = std::max(max_abs, std::abs(v));
  for (double& v : c) v /= max_abs;  // same scaling eigen_channel applies
  EighResult r = jacobi_eigh(c, 100);

  double dot = 0.0, dn = 0.0, vn = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    double vi = r.eigenvectors[i * 100 + 0];
    dot += d[i] * vi;
    dn += d[i] * d[i];
    vn += vi * vi;
  }
  double cosine = std::abs(dot) / std::sqrt(dn * vn);
  CHECK(cosine > 1.0 - 1e-8);
}

TEST_CASE("encode_window bounds, shape and determinism") {
  Rng rng(14);
  Window w = random_window(rng);
  for (EncoderKind kind : {EncoderKind::Gaf, EncoderKind::Cov, EncoderKind::Eig}) {
    Tensor3<float> img = encode_window(w, kind);
    CHECK(img.h == 100);
    CHECK(img.w == 100);
    CHECK(img.c == 3);
    for (float v : img.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      CHECK(std::isfinite(v));
    }
    Tensor3<float> img2 = encode_window(w, kind);
    CHECK(img.data == img2.data);  // bit-identical
  }
}

TEST_CASE("encode_window maps a flat channel to 0.5 for cov") {
  Rng rng(15);
  Window w = random_window(rng);
  for (double& g : w.r_el) g = 0.05;  // constant grade
  Tensor3<float> img = encode_window(w, EncoderKind::Cov);
  bool ch0_varies = false, ch1_varies = false;
  for (int r = 0; r < 100; ++r)
    for (int c = 0; c < 100; ++c) {
      CHECK(img.at(r, c, 2) == 0.5f);
      ch0_varies |= img.at(r, c, 0) != img.at(0, 0, 0);
      ch1_varies |= img.at(r, c, 1) != img.at(0, 0, 1);
    }
  CHECK(ch0_varies);
  CHECK(ch1_varies);
}

TEST_CASE("encode_window never produces NaN, including degenerate windows") {
  Rng rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    Window w = random_window(rng);
    if (trial % 2 == 0)
      for (double& v : w.v_sp) v = 3.0;  // degenerate speed channel
    for (EncoderKind kind : {EncoderKind::Gaf, EncoderKind::Cov, EncoderKind::Eig}) {
      Tensor3<float> img = encode_window(w, kind);
      for (float v : img.data) CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("encoded dataset round-trips through its file format") {
  namespace fs = std::filesystem;
  Rng rng(17);
  Dataset ds;
  for (int i = 0; i < 3; ++i) {
    Window w = random_window(rng);
    w.start_index = i * 100;
    ds.windows.push_back(w);
  }
  ds = normalize_output(ds);
  EncodedDataset enc = encode_dataset(ds, EncoderKind::Gaf);
  fs::path p = fs::temp_directory_path() / "evpower_encoded.bin";
  save_encoded(enc, p);
  EncodedDataset loaded = load_encoded(p);
  CHECK(loaded.count == 3);
  CHECK(loaded.encoder == EncoderKind::Gaf);
  CHECK(loaded.images == enc.images);
  CHECK(loaded.targets == enc.targets);
  REQUIRE(loaded.output_norm.has_value());
  CHECK(loaded.output_norm->min_w == enc.output_norm->min_w);
  fs::remove(p);
}
