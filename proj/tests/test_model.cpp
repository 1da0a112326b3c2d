#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fewdp/dataset.hpp"
#include "fewdp/model.hpp"
#include "fewdp/rng.hpp"

using namespace fewdp;

namespace {

std::vector<double> random_vec(Philox& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.next_gaussian();
  return v;
}

// model with every parameter randomly perturbed, for gradient checks
ModelState random_model(int in, int hidden, int feat, int classes, ParamMode mode, uint64_t seed) {
  ModelState m = make_model(in, hidden, feat, classes, mode, seed);
  Philox rng = Philox::stream(seed, "perturb", 1);
  auto jiggle = [&](std::vector<double>& v, double s) {
    for (auto& x : v) x += s * rng.next_gaussian();
  };
  jiggle(m.gamma1, 0.2);
  jiggle(m.beta1, 0.2);
  jiggle(m.gamma2, 0.2);
  jiggle(m.beta2, 0.2);
  jiggle(m.head_w, 0.5);
  jiggle(m.head_b, 0.5);
  return m;
}

// independently coded straight-line forward pass (no shared kernels)
std::vector<double> naive_forward(const ModelState& m, const std::vector<double>& x) {
  auto dense = [](const std::vector<double>& w, const std::vector<double>& b, int rows, int cols,
                  const std::vector<double>& in) {
    std::vector<double> out(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      double acc = b[static_cast<std::size_t>(r)];
      for (int c = 0; c < cols; ++c)
        acc += w[static_cast<std::size_t>(r) * cols + c] * in[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = acc;
    }
    return out;
  };
  auto z1 = dense(m.w1, m.b1, m.hidden, m.in_dim, x);
  for (int i = 0; i < m.hidden; ++i) {
    z1[i] = m.gamma1[i] * z1[i] + m.beta1[i];
    if (z1[i] < 0) z1[i] = 0;
  }
  auto z2 = dense(m.w2, m.b2, m.feature_dim, m.hidden, z1);
  for (int i = 0; i < m.feature_dim; ++i) {
    z2[i] = m.gamma2[i] * z2[i] + m.beta2[i];
    if (z2[i] < 0) z2[i] = 0;
  }
  auto logits = dense(m.head_w, m.head_b, m.classes, m.feature_dim, z2);
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0;
  for (auto& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
  return logits;
}

bool near_kink(const ModelState& m, const std::vector<double>& x, double margin) {
  ForwardTrace t;
  forward_trace(m, x, t);
  for (double v : t.f1)
    if (std::fabs(v) < margin) return true;
  for (double v : t.f2)
    if (std::fabs(v) < margin) return true;
  return false;
}

}  // namespace

TEST_CASE("film_apply arithmetic") {
  const std::vector<double> a{1, -1}, ones{1, 1}, zeros{0, 0}, twos{2, 2};
  CHECK(film_apply(a, ones, zeros) == a);
  CHECK(film_apply(a, twos, ones) == std::vector<double>{3, -1});
  const std::vector<double> a3{1, 2, 3};
  CHECK_THROWS_AS(film_apply(a3, ones, zeros), std::invalid_argument);

  Philox rng = Philox::stream(5, "film", 0);
  const auto av = random_vec(rng, 64);
  const auto gv = random_vec(rng, 64);
  const auto bv = random_vec(rng, 64);
  const auto out = film_apply(av, gv, bv);
  for (std::size_t i = 0; i < 64; ++i)
    CHECK(out[i] == doctest::Approx(gv[i] * av[i] + bv[i]).epsilon(1e-15));
}

TEST_CASE("fresh head gives uniform class probabilities") {
  const ModelState m = make_model(8, 6, 5, 4, ParamMode::head, 1);
  Philox rng = Philox::stream(6, "x", 0);
  const auto x = random_vec(rng, 8);
  const auto p = forward(m, x);
  for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  const auto wrong = random_vec(rng, 7);
  CHECK_THROWS_AS(forward(m, wrong), std::invalid_argument);
  CHECK_THROWS_AS(per_example_grad(m, x, 4), std::invalid_argument);
}

TEST_CASE("probabilities sum to one") {
  Philox rng = Philox::stream(7, "x", 0);
  for (int rep = 0; rep < 20; ++rep) {
    const ModelState m = random_model(10, 8, 6, 5, ParamMode::all, 100 + rep);
    const auto x = random_vec(rng, 10);
    const auto p = forward(m, x);
    double sum = 0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("identity film equals the film-free forward bit for bit") {
  const ModelState m = make_model(12, 9, 7, 5, ParamMode::film, 3);  // gamma=1, beta=0
  Philox rng = Philox::stream(8, "x", 0);
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = random_vec(rng, 12);
    const auto a = forward(m, x);
    const auto b = forward_plain(m, x);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("forward matches an independently coded recomputation") {
  Philox rng = Philox::stream(9, "x", 0);
  for (int rep = 0; rep < 10; ++rep) {
    const ModelState m = random_model(10, 8, 6, 4, ParamMode::all, 200 + rep);
    const auto x = random_vec(rng, 10);
    const auto a = forward(m, x);
    const auto b = naive_forward(m, x);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("head gradient at zero logits is (p - onehot) outer features") {
  const int C = 4;
  ModelState m = make_model(8, 6, 5, C, ParamMode::head, 11);
  Philox rng = Philox::stream(10, "x", 0);
  const auto x = random_vec(rng, 8);
  ForwardTrace t;
  forward_trace(m, x, t);
  const int y = 2;
  const auto g = per_example_grad(m, x, y);
  CHECK(g.size() == static_cast<std::size_t>(C * 5 + C));
  for (int c = 0; c < C; ++c) {
    const double dc = (c == y ? 1.0 / C - 1.0 : 1.0 / C);
    for (int j = 0; j < 5; ++j)
      CHECK(g[static_cast<std::size_t>(c * 5 + j)] == doctest::Approx(dc * t.a2[j]).epsilon(1e-12));
    CHECK(g[static_cast<std::size_t>(C * 5 + c)] == doctest::Approx(dc).epsilon(1e-12));
  }
}

TEST_CASE("gradients agree with central finite differences") {
  Philox rng = Philox::stream(12, "fd", 0);
  const double step = 1e-4;
  int states = 0;
  for (uint64_t seed = 0; states < 15; ++seed) {
    for (ParamMode mode : {ParamMode::head, ParamMode::film, ParamMode::all}) {
      ModelState m = random_model(6, 5, 4, 3, mode, 300 + seed);
      const auto x = random_vec(rng, 6);
      const int y = static_cast<int>(seed % 3);
      if (near_kink(m, x, 1e-3)) continue;
      const auto g = per_example_grad(m, x, y);
      auto theta = get_trainable(m);
      for (std::size_t i = 0; i < theta.size(); i += 7) {  // probe a subset of coordinates
        auto plus = theta, minus = theta;
        plus[i] += step;
        minus[i] -= step;
        ModelState mp = m, mm = m;
        set_trainable(mp, plus);
        set_trainable(mm, minus);
        const double fd = (cross_entropy(mp, x, y) - cross_entropy(mm, x, y)) / (2 * step);
        const double tol = 1e-5 * std::max(1.0, std::fabs(fd));
        CHECK(std::fabs(g[i] - fd) <= tol);
      }
      ++states;
    }
  }
}

TEST_CASE("head gradient coordinates are a suffix of the all gradient") {
  Philox rng = Philox::stream(13, "sub", 0);
  ModelState all_m = random_model(7, 6, 5, 4, ParamMode::all, 55);
  ModelState head_m = all_m;
  head_m.mode = ParamMode::head;
  ModelState film_m = all_m;
  film_m.mode = ParamMode::film;
  const auto x = random_vec(rng, 7);
  const auto g_all = per_example_grad(all_m, x, 1);
  const auto g_head = per_example_grad(head_m, x, 1);
  const auto g_film = per_example_grad(film_m, x, 1);
  const std::size_t off_h = g_all.size() - g_head.size();
  for (std::size_t i = 0; i < g_head.size(); ++i) CHECK(g_head[i] == g_all[off_h + i]);
  const std::size_t off_f = g_all.size() - g_film.size();
  for (std::size_t i = 0; i < g_film.size(); ++i) CHECK(g_film[i] == g_all[off_f + i]);
}

TEST_CASE("learnable parameter counts") {
  // two hidden layers of width 64, feature dim 64, 10 classes
  ModelState m = make_model(32, 64, 64, 10, ParamMode::film, 1);
  CHECK(count_learnable(m) == 650 + 256);
  m.mode = ParamMode::head;
  CHECK(count_learnable(m) == 650);
  m.mode = ParamMode::all;
  CHECK(count_learnable(m) ==
        static_cast<std::size_t>(64 * 32 + 64 + 64 * 64 + 64 + 256 + 650));

  const ArchDescriptor r50{23.5e6, 11648, 2048, 10};
  CHECK(count_learnable(r50, ParamMode::film) == 11648 + 2048 * 10 + 10);
  CHECK(count_learnable(r50, ParamMode::head) == 2048 * 10 + 10);
  CHECK(count_learnable(r50, ParamMode::all) == 23.5e6 + 2048 * 10 + 10);
}

TEST_CASE("capacity is monotone in mode") {
  for (int hidden : {1, 4, 16}) {
    ModelState m = make_model(5, hidden, 3, 3, ParamMode::head, 2);
    const auto head = count_learnable(m);
    m.mode = ParamMode::film;
    const auto film = count_learnable(m);
    m.mode = ParamMode::all;
    const auto all = count_learnable(m);
    CHECK(head < film);
    CHECK(film < all);
  }
}

TEST_CASE("task sampling is deterministic in the seed") {
  SyntheticTaskSpec spec;
  spec.seed = 77;
  spec.shift = 0.4;
  const auto a = sample_few_shot(spec, 3, 2, 9);
  const auto b = sample_few_shot(spec, 3, 2, 9);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  const ModelState m1 = make_model(4, 3, 3, 2, ParamMode::all, 5);
  const ModelState m2 = make_model(4, 3, 3, 2, ParamMode::all, 5);
  CHECK(m1.w1 == m2.w1);
  CHECK(m1.w2 == m2.w2);
}

TEST_CASE("zero shift reproduces the pretraining distribution") {
  SyntheticTaskSpec spec;
  spec.seed = 31;
  spec.shift = 0.0;
  const auto shifted = task_means(spec, true);
  const auto source = task_means(spec, false);
  for (std::size_t c = 0; c < shifted.size(); ++c)
    for (std::size_t j = 0; j < shifted[c].size(); ++j) CHECK(shifted[c][j] == source[c][j]);
}

TEST_CASE("dataset invariants are validated") {
  SyntheticTaskSpec spec;
  auto ds = sample_few_shot(spec, 3, 2, 1);
  ds.validate();
  CHECK(ds.count_of(Split::train) == static_cast<std::size_t>(spec.classes * 3));
  auto bad = ds;
  bad.labels[0] = 99;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  auto bad2 = ds;
  bad2.split.pop_back();
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}

TEST_CASE("stratified holdout keeps splits disjoint and stratified") {
  SyntheticTaskSpec spec;
  auto ds = sample_few_shot(spec, 10, 0, 2);
  stratified_holdout(ds, 0.3, 4);
  for (int c = 0; c < spec.classes; ++c) {
    std::size_t tr = 0, va = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] != c) continue;
      if (ds.split[i] == Split::train) ++tr;
      if (ds.split[i] == Split::val) ++va;
    }
    CHECK(tr == 7);
    CHECK(va == 3);
  }
}

TEST_CASE("fold_film preserves the forward function") {
  ModelState m = random_model(6, 5, 4, 3, ParamMode::all, 90);
  Philox rng = Philox::stream(14, "fold", 0);
  const auto x = random_vec(rng, 6);
  const auto before = forward(m, x);
  fold_film(m);
  for (double g : m.gamma1) CHECK(g == 1.0);
  for (double b : m.beta2) CHECK(b == 0.0);
  const auto after = forward(m, x);
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
}
