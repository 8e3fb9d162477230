#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "evpower/cnn.hpp"
#include "evpower/errors.hpp"
#include "evpower/network.hpp"
#include "evpower/rng.hpp"
#include "evpower/threadpool.hpp"

using namespace evpower;

TEST_CASE("conv_out_size follows the floor formula") {
  CHECK(conv_out_size(100, 5, 2, 2) == 50);
  CHECK(conv_out_size(50, 5, 2, 1) == 50);
  CHECK(conv_out_size(26, 5, 2, 2) == 13);
  CHECK(conv_out_size(25, 5, 2, 2) == 13);
  CHECK_THROWS_AS(conv_out_size(0, 5, 2, 2), Error);
  CHECK_THROWS_AS(conv_out_size(3, 5, 0, 1), Error);  // kernel larger than padded input
}

TEST_CASE("cnn7 shape plan matches the published progression") {
  NetworkSpec spec = cnn7_spec();
  auto shapes = validate_spec(spec);
  // conv(12,s2,p2) tanh conv(9) tanh pool2 conv(6) tanh pool5 flatten fc
  CHECK(shapes[0].h == 50);
  CHECK(shapes[0].c == 12);
  CHECK(shapes[2].h == 50);
  CHECK(shapes[2].c == 9);
  CHECK(shapes[4].h == 25);
  CHECK(shapes[4].c == 9);
  CHECK(shapes[5].h == 25);
  CHECK(shapes[5].c == 6);
  CHECK(shapes[7].h == 5);
  CHECK(shapes[7].c == 6);
  CHECK(shapes[8].h == 150);
  CHECK(shapes[8].flat());
  CHECK(shapes[9].h == 100);
  CHECK(tracked_layer_count(spec) == 7);
}

TEST_CASE("cnn9 shape plan ends at 100 with 9 tracked layers") {
  NetworkSpec spec = cnn9_spec();
  auto shapes = validate_spec(spec);
  CHECK(shapes.back().h == 100);
  CHECK(tracked_layer_count(spec) == 9);
  // flatten input is 5x5x4 = 100
  CHECK(shapes[shapes.size() - 2].h == 100);
}

TEST_CASE("validate_spec rejects bad geometry") {
  NetworkSpec spec = cnn7_spec();
  spec.layers[4] = LayerSpec::maxpool(3, 3);  // 50 % 3 != 0
  CHECK_THROWS_AS(validate_spec(spec), Error);

  NetworkSpec spec2 = cnn7_spec();
  spec2.layers.back() = LayerSpec::fc(64);  // must end at 100
  CHECK_THROWS_AS(validate_spec(spec2), Error);
}

TEST_CASE("init_weights draws uniformly within the fan-in bound") {
  NetworkSpec spec = cnn7_spec();
  Checkpoint ckpt = init_weights(spec, 123);
  double s1 = 1.0 / std::sqrt(5.0 * 5.0 * 3.0);
  CHECK(s1 == doctest::Approx(0.11547).epsilon(1e-4));
  for (float w : ckpt.weights[0]) {
    CHECK(w >= -s1);
    CHECK(w < s1);
  }
  for (float b : ckpt.biases[0]) CHECK(b == 0.0f);
  // FC bound uses its fan-in of 150
  double s_fc = 1.0 / std::sqrt(150.0);
  for (float w : ckpt.weights.back()) {
    CHECK(w >= -s_fc);
    CHECK(w < s_fc);
  }

  Checkpoint again = init_weights(spec, 123);
  CHECK(again.weights[0] == ckpt.weights[0]);
  Checkpoint other = init_weights(spec, 124);
  CHECK(other.weights[0] != ckpt.weights[0]);
}

TEST_CASE("init_weights empirical mean is centered") {
  // One conv layer with many draws: 12*5*5*3 = 900 per seed; pool seeds.
  NetworkSpec spec = cnn7_spec();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    Checkpoint ckpt = init_weights(spec, seed);
    for (float w : ckpt.weights[0]) {
      sum += w;
      ++count;
    }
  }
  REQUIRE(count >= 100000);
  double s1 = 1.0 / std::sqrt(75.0);
  CHECK(std::abs(sum / static_cast<double>(count)) < 0.01 * s1);
}

TEST_CASE("mse_loss basics") {
  std::vector<double> a = {1, 2, 3};
  CHECK(mse_loss(a, a) == 0.0);
  std::vector<double> b = {2, 3, 4};
  CHECK(mse_loss(a, b) == doctest::Approx(1.0));
  std::vector<double> p = {0, 1}, t = {1, 1};
  CHECK(mse_loss(p, t) == doctest::Approx(0.5));
  std::vector<double> shorter = {1.0};
  CHECK_THROWS_AS(mse_loss(a, shorter), Error);
}

namespace {

std::vector<float> random_image(Rng& rng) {
  std::vector<float> img(100 * 100 * 3);
  for (float& v : img) v = static_cast<float>(rng.u01());
  return img;
}

std::vector<float> random_target(Rng& rng) {
  std::vector<float> t(100);
  for (float& v : t) v = static_cast<float>(rng.u01());
  return t;
}

}  // namespace

TEST_CASE("forward with all-zero weights yields all zeros") {
  NetworkSpec spec = cnn7_spec();
  Checkpoint ckpt = init_weights(spec, 1);
  for (auto& w : ckpt.weights) std::fill(w.begin(), w.end(), 0.0f);
  Network<double> net(ckpt);
  auto ws = net.make_workspace();
  Rng rng(2);
  auto img = random_image(rng);
  auto out = net.forward(img, ws);
  REQUIRE(out.size() == 100);
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("constant input stays constant through maxpool") {
  NetworkSpec spec;
  spec.name = "pool-probe";
  spec.layers = {LayerSpec::maxpool(2, 2), LayerSpec::maxpool(5, 5),
                 LayerSpec::flatten(), LayerSpec::fc(100)};
  Checkpoint ckpt = init_weights(spec, 3);
  Network<double> net(ckpt);
  auto ws = net.make_workspace();
  std::vector<float> img(100 * 100 * 3, 0.37f);
  net.forward(img, ws);
  for (double v : ws.acts[1]) CHECK(v == doctest::Approx(0.37).epsilon(1e-7));
}

TEST_CASE("tanh activations stay inside (-1, 1)") {
  NetworkSpec spec = cnn7_spec();
  Checkpoint ckpt = init_weights(spec, 17);
  Network<float> net(ckpt);
  auto ws = net.make_workspace();
  Rng rng(18);
  auto img = random_image(rng);
  net.forward(img, ws);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind != LayerKind::Tanh) continue;
    for (float v : ws.acts[i]) {
      CHECK(v > -1.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("float tanh path matches libm tanh closely") {
  NetworkSpec spec;
  spec.name = "tanh-probe";
  spec.layers = {LayerSpec::maxpool(10, 10), LayerSpec::tanh(),
                 LayerSpec::flatten(), LayerSpec::fc(100)};
  Checkpoint ckpt = init_weights(spec, 4);
  Network<float> net(ckpt);
  auto ws = net.make_workspace();
  Rng rng(5);
  std::vector<float> img(100 * 100 * 3);
  for (float& v : img) v = static_cast<float>(rng.uniform(-8, 8));
  net.forward(img, ws);
  for (std::size_t i = 0; i < ws.acts[1].size(); ++i) {
    double ref = std::tanh(static_cast<double>(ws.acts[0][i]));
    CHECK(std::abs(static_cast<double>(ws.acts[1][i]) - ref) < 5e-6);
  }
}

TEST_CASE("single FC layer gradient equals the closed form") {
  NetworkSpec spec;
  spec.name = "fc-only";
  spec.layers = {LayerSpec::maxpool(10, 10), LayerSpec::flatten(), LayerSpec::fc(100)};
  Checkpoint ckpt = init_weights(spec, 6);
  Network<double> net(ckpt);
  auto ws = net.make_workspace();
  auto grad = net.make_grad_buffers();
  Rng rng(7);
  auto img = random_image(rng);
  auto tgt = random_target(rng);
  net.forward_backward(img, tgt, ws, grad);

  // dL/dW[u][t] = 2/N * (pred_u - tgt_u) * x_t with x the flattened input.
  const auto& x = ws.acts[1];
  const auto& pred = ws.acts[2];
  for (std::size_t u = 0; u < 100; u += 13) {
    double coeff = 2.0 / 100.0 * (pred[u] - static_cast<double>(tgt[u]));
    for (std::size_t t = 0; t < x.size(); t += 29) {
      CHECK(grad.w[2][u * x.size() + t] ==
            doctest::Approx(coeff * x[t]).epsilon(1e-10));
    }
    CHECK(grad.b[2][u] == doctest::Approx(coeff).epsilon(1e-10));
  }
}

TEST_CASE("zero loss implies zero gradients") {
  NetworkSpec spec;
  spec.name = "fc-only";
  spec.layers = {LayerSpec::maxpool(10, 10), LayerSpec::flatten(), LayerSpec::fc(100)};
  Checkpoint ckpt = init_weights(spec, 8);
  // The float engine's own output is exactly representable as a target.
  Network<float> net(ckpt);
  auto ws = net.make_workspace();
  auto grad = net.make_grad_buffers();
  Rng rng(9);
  auto img = random_image(rng);
  auto out = net.forward(img, ws);
  std::vector<float> tgt(out.begin(), out.end());
  double loss = net.forward_backward(img, tgt, ws, grad);
  CHECK(loss == 0.0);
  for (const auto& layer : grad.w)
    for (float g : layer) CHECK(g == 0.0f);
}

TEST_CASE("backward matches central finite differences on a small conv net") {
  // Small but complete: conv, tanh, pool, flatten, fc -- all layer kinds.
  NetworkSpec spec;
  spec.name = "fd-probe";
  spec.layers = {LayerSpec::conv(4, 2, 2), LayerSpec::tanh(), LayerSpec::maxpool(5, 5),
                 LayerSpec::conv(2, 1, 2), LayerSpec::tanh(), LayerSpec::maxpool(2, 2),
                 LayerSpec::flatten(), LayerSpec::fc(100)};
  auto shapes = validate_spec(spec);
  REQUIRE(shapes.back().h == 100);

  Checkpoint ckpt = init_weights(spec, 10);
  Network<double> net(ckpt);
  auto ws = net.make_workspace();
  auto grad = net.make_grad_buffers();
  Rng rng(11);
  auto img = random_image(rng);
  auto tgt = random_target(rng);
  net.forward_backward(img, tgt, ws, grad);

  auto loss_at = [&](Network<double>& n) {
    auto pred = n.forward(img, ws);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      double d = pred[i] - static_cast<double>(tgt[i]);
      acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
  };

  // Max-pooling kinks the loss; a central difference is only a derivative
  // estimate when the pooling switches stay put between the two
  // evaluations, so kink-straddling samples are skipped.
  const double h = 1e-3;
  Rng pick(12);
  int checked = 0, skipped = 0;
  for (std::size_t layer = 0; layer < spec.layers.size(); ++layer) {
    std::size_t nw = ckpt.weights[layer].size();
    if (nw == 0) continue;
    for (int s = 0; s < 60; ++s) {
      std::size_t j = pick.index(nw);
      double saved = net.mutable_weights()[layer][j];
      net.mutable_weights()[layer][j] = saved + h;
      double up = loss_at(net);
      auto argmax_plus = ws.pool_argmax;
      net.mutable_weights()[layer][j] = saved - h;
      double down = loss_at(net);
      bool flipped = argmax_plus != ws.pool_argmax;
      net.mutable_weights()[layer][j] = saved;
      if (flipped) {
        ++skipped;
        continue;
      }
      double fd = (up - down) / (2.0 * h);
      double bp = grad.w[layer][j];
      if (std::abs(bp) > 1e-6) {
        CHECK(std::abs(fd - bp) / std::abs(bp) < 1e-3);
        ++checked;
      }
    }
  }
  CHECK(checked > 60);
  INFO("skipped ", skipped, " kink-straddling samples");
}

TEST_CASE("training with zero learning rate leaves weights unchanged") {
  Rng rng(13);
  Dataset ds;
  for (int i = 0; i < 12; ++i) {
    Window w;
    w.v_sp.resize(100);
    w.t_eff.resize(100);
    w.r_el.resize(100);
    w.p_batt.resize(100);
    for (int k = 0; k < 100; ++k) {
      w.v_sp[static_cast<std::size_t>(k)] = rng.uniform(0, 30);
      w.t_eff[static_cast<std::size_t>(k)] = rng.uniform(-500, 500);
      w.r_el[static_cast<std::size_t>(k)] = rng.uniform(-0.1, 0.1);
      w.p_batt[static_cast<std::size_t>(k)] = rng.uniform(0, 10000);
    }
    w.start_index = 100 * i;
    w.source_cycle = "toy";
    ds.windows.push_back(w);
  }
  auto [tr, val] = split_train_val(ds, 0.7, 1);
  EncodedDataset etr = encode_dataset(tr, EncoderKind::Cov);
  EncodedDataset eval_set = encode_dataset(val, EncoderKind::Cov);

  TrainConfig cfg;
  cfg.lr0 = 0.0;
  cfg.max_epochs = 1;
  cfg.seed = 5;
  TrainResult res = train<float>(etr, eval_set, cnn7_spec(), cfg);
  CHECK(res.history.train_mse.size() == 1);
  Checkpoint fresh = init_weights(cnn7_spec(), 5);
  CHECK(res.best.weights[0] == fresh.weights[0]);
  CHECK(res.best.weights.back() == fresh.weights.back());
  CHECK(res.best.encoder == "cov");
  REQUIRE(res.best.output_norm.has_value());

  SUBCASE("training is deterministic, independent of thread count") {
    TrainConfig cfg2;
    cfg2.lr0 = 0.01;
    cfg2.max_epochs = 3;
    cfg2.seed = 7;
    TrainResult a = train<float>(etr, eval_set, cnn7_spec(), cfg2);
    ThreadPool pool(2);
    TrainResult b = train<float>(etr, eval_set, cnn7_spec(), cfg2, &pool);
    CHECK(a.history.train_mse == b.history.train_mse);
    CHECK(a.best.weights == b.best.weights);
    CHECK(a.best.epoch == b.best.epoch);
  }

  SUBCASE("learning rate decays monotonically") {
    TrainConfig cfg3;
    cfg3.lr0 = 0.01;
    cfg3.max_epochs = 5;
    cfg3.lr_decay_per_epoch = 0.9;
    cfg3.seed = 2;
    TrainResult r = train<float>(etr, eval_set, cnn7_spec(), cfg3);
    REQUIRE(r.history.lr.size() == 5);
    for (std::size_t e = 1; e < r.history.lr.size(); ++e)
      CHECK(r.history.lr[e] < r.history.lr[e - 1]);
    // validation at epoch 1 plus every 10th -> only epoch 1 here
    REQUIRE(!r.history.val_mse.empty());
    CHECK(r.history.val_mse.front().first == 1);
  }
}

TEST_CASE("checkpoint save/load round-trip preserves forward outputs bit-exactly") {
  namespace fs = std::filesystem;
  NetworkSpec spec = cnn7_spec();
  Checkpoint ckpt = init_weights(spec, 14);
  ckpt.epoch = 12;
  ckpt.train_loss = 0.5;
  ckpt.val_loss = 0.75;
  ckpt.output_norm = NormStats{-100.0, 900.0};
  ckpt.encoder = "gaf";
  fs::path p = fs::temp_directory_path() / "evpower_ckpt.bin";
  save_checkpoint(ckpt, p);
  Checkpoint loaded = load_checkpoint(p);
  CHECK(loaded.epoch == 12);
  CHECK(loaded.encoder == "gaf");
  REQUIRE(loaded.output_norm.has_value());
  CHECK(loaded.output_norm->max_w == 900.0);

  Network<float> a(ckpt), b(loaded);
  auto wa = a.make_workspace(), wb = b.make_workspace();
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    auto img = random_image(rng);
    auto oa = a.forward(img, wa);
    auto ob = b.forward(img, wb);
    for (std::size_t i = 0; i < oa.size(); ++i) CHECK(oa[i] == ob[i]);
  }
  fs::remove(p);
}

TEST_CASE("checkpoint loader distinguishes truncation from spec mismatch") {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / "evpower_ckpt_bad.bin";
  Checkpoint ckpt = init_weights(cnn7_spec(), 16);
  save_checkpoint(ckpt, p);

  // Truncated file -> CorruptFile.
  fs::path trunc = fs::temp_directory_path() / "evpower_ckpt_trunc.bin";
  {
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out(trunc, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 200));
  }
  try {
    load_checkpoint(trunc);
    FAIL("expected CorruptFile");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CorruptFile);
  }

  // CNN9-sized weights with a CNN7 header -> SpecMismatch.
  Checkpoint mixed = init_weights(cnn9_spec(), 16);
  mixed.spec = cnn7_spec();
  fs::path spec_bad = fs::temp_directory_path() / "evpower_ckpt_spec.bin";
  save_checkpoint(mixed, spec_bad);
  try {
    load_checkpoint(spec_bad);
    FAIL("expected SpecMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SpecMismatch);
  }
  fs::remove(p);
  fs::remove(trunc);
  fs::remove(spec_bad);
}
