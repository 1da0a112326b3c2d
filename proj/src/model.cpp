#include "fewdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "fewdp/dataset.hpp"
#include "fewdp/kernels.hpp"
#include "fewdp/rng.hpp"

namespace fewdp {

const char* mode_name(ParamMode m) {
  switch (m) {
    case ParamMode::head: return "head";
    case ParamMode::film: return "film";
    case ParamMode::all: return "all";
  }
  return "unknown";
}

ParamMode mode_from_name(std::string_view name) {
  if (name == "head") return ParamMode::head;
  if (name == "film") return ParamMode::film;
  if (name == "all") return ParamMode::all;
  throw std::invalid_argument("unknown parameter mode: " + std::string(name));
}

ModelState make_model(int in_dim, int hidden, int feature_dim, int classes, ParamMode mode,
                      uint64_t seed) {
  if (in_dim < 1 || hidden < 1 || feature_dim < 1 || classes < 2)
    throw std::invalid_argument("make_model: bad architecture dimensions");
  ModelState m;
  m.in_dim = in_dim;
  m.hidden = hidden;
  m.feature_dim = feature_dim;
  m.classes = classes;
  m.mode = mode;
  Philox rng = Philox::stream(seed, "model-init", 0);
  auto he_init = [&](std::vector<double>& w, int rows, int cols) {
    w.resize(static_cast<std::size_t>(rows) * cols);
    const double s = std::sqrt(2.0 / cols);
    for (auto& x : w) x = s * rng.next_gaussian();
  };
  he_init(m.w1, hidden, in_dim);
  m.b1.assign(static_cast<std::size_t>(hidden), 0.0);
  he_init(m.w2, feature_dim, hidden);
  m.b2.assign(static_cast<std::size_t>(feature_dim), 0.0);
  m.gamma1.assign(static_cast<std::size_t>(hidden), 1.0);
  m.beta1.assign(static_cast<std::size_t>(hidden), 0.0);
  m.gamma2.assign(static_cast<std::size_t>(feature_dim), 1.0);
  m.beta2.assign(static_cast<std::size_t>(feature_dim), 0.0);
  m.head_w.assign(static_cast<std::size_t>(classes) * feature_dim, 0.0);
  m.head_b.assign(static_cast<std::size_t>(classes), 0.0);
  return m;
}

std::vector<double> film_apply(std::span<const double> a, std::span<const double> gamma,
                               std::span<const double> beta) {
  if (a.size() != gamma.size() || a.size() != beta.size())
    throw std::invalid_argument("film_apply: length mismatch");
  std::vector<double> out(a.size());
  kernels::film(a, gamma, beta, out);
  return out;
}

namespace {

void matvec(std::span<const double> w, int rows, int cols, std::span<const double> x,
            std::span<const double> bias, std::span<double> out) {
  for (int r = 0; r < rows; ++r) {
    out[static_cast<std::size_t>(r)] =
        kernels::table(kernels::active_isa())
            .dot(w.data() + static_cast<std::size_t>(r) * cols, x.data(), static_cast<std::size_t>(cols)) +
        bias[static_cast<std::size_t>(r)];
  }
}

void softmax(std::span<const double> logits, std::span<double> probs) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
}

void check_input(const ModelState& m, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(m.in_dim))
    throw std::invalid_argument("forward: input has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(m.in_dim));
}

}  // namespace

void forward_trace(const ModelState& m, std::span<const double> x, ForwardTrace& t) {
  check_input(m, x);
  const auto h = static_cast<std::size_t>(m.hidden);
  const auto f = static_cast<std::size_t>(m.feature_dim);
  const auto c = static_cast<std::size_t>(m.classes);
  t.z1.resize(h); t.f1.resize(h); t.a1.resize(h);
  t.z2.resize(f); t.f2.resize(f); t.a2.resize(f);
  t.logits.resize(c); t.probs.resize(c);
  matvec(m.w1, m.hidden, m.in_dim, x, m.b1, t.z1);
  kernels::film(t.z1, m.gamma1, m.beta1, t.f1);
  kernels::relu(t.f1, t.a1);
  matvec(m.w2, m.feature_dim, m.hidden, t.a1, m.b2, t.z2);
  kernels::film(t.z2, m.gamma2, m.beta2, t.f2);
  kernels::relu(t.f2, t.a2);
  matvec(m.head_w, m.classes, m.feature_dim, t.a2, m.head_b, t.logits);
  softmax(t.logits, t.probs);
}

std::vector<double> forward(const ModelState& m, std::span<const double> x) {
  ForwardTrace t;
  forward_trace(m, x, t);
  return t.probs;
}

std::vector<double> forward_plain(const ModelState& m, std::span<const double> x) {
  check_input(m, x);
  std::vector<double> z1(static_cast<std::size_t>(m.hidden)), a1(z1.size());
  std::vector<double> z2(static_cast<std::size_t>(m.feature_dim)), a2(z2.size());
  std::vector<double> logits(static_cast<std::size_t>(m.classes)), probs(logits.size());
  matvec(m.w1, m.hidden, m.in_dim, x, m.b1, z1);
  kernels::relu(z1, a1);
  matvec(m.w2, m.feature_dim, m.hidden, a1, m.b2, z2);
  kernels::relu(z2, a2);
  matvec(m.head_w, m.classes, m.feature_dim, a2, m.head_b, logits);
  softmax(logits, probs);
  return probs;
}

double cross_entropy(const ModelState& m, std::span<const double> x, int y) {
  if (y < 0 || y >= m.classes) throw std::invalid_argument("cross_entropy: label out of range");
  ForwardTrace t;
  forward_trace(m, x, t);
  double mx = t.logits[0];
  for (double v : t.logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : t.logits) sum += std::exp(v - mx);
  return mx + std::log(sum) - t.logits[static_cast<std::size_t>(y)];
}

int predict(const ModelState& m, std::span<const double> x) {
  const auto p = forward(m, x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double accuracy(const ModelState& m, const FewShotDataset& data,
                std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  std::size_t hit = 0;
  for (auto i : indices)
    if (predict(m, data.row(i)) == data.labels[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(indices.size());
}

namespace {

struct Blocks {
  std::size_t dense, film, head;
};

Blocks block_sizes(const ModelState& m) {
  const auto h = static_cast<std::size_t>(m.hidden);
  const auto f = static_cast<std::size_t>(m.feature_dim);
  const auto c = static_cast<std::size_t>(m.classes);
  const auto in = static_cast<std::size_t>(m.in_dim);
  return {h * in + h + f * h + f, 2 * (h + f), c * f + c};
}

}  // namespace

std::size_t trainable_count(const ModelState& m) {
  const Blocks b = block_sizes(m);
  switch (m.mode) {
    case ParamMode::head: return b.head;
    case ParamMode::film: return b.film + b.head;
    case ParamMode::all: return b.dense + b.film + b.head;
  }
  return 0;
}

std::size_t count_learnable(const ModelState& m) { return trainable_count(m); }

double count_learnable(const ArchDescriptor& a, ParamMode mode) {
  const double head = static_cast<double>(a.feature_dim) * a.classes + a.classes;
  switch (mode) {
    case ParamMode::head: return head;
    case ParamMode::film: return a.film_params + head;
    case ParamMode::all: return a.backbone_params + head;
  }
  return 0;
}

namespace {

template <typename F>
void visit_trainable(const ModelState& m, F&& f) {
  if (m.mode == ParamMode::all) {
    f(m.w1); f(m.b1); f(m.w2); f(m.b2);
  }
  if (m.mode == ParamMode::all || m.mode == ParamMode::film) {
    f(m.gamma1); f(m.beta1); f(m.gamma2); f(m.beta2);
  }
  f(m.head_w); f(m.head_b);
}

template <typename F>
void visit_trainable_mut(ModelState& m, F&& f) {
  if (m.mode == ParamMode::all) {
    f(m.w1); f(m.b1); f(m.w2); f(m.b2);
  }
  if (m.mode == ParamMode::all || m.mode == ParamMode::film) {
    f(m.gamma1); f(m.beta1); f(m.gamma2); f(m.beta2);
  }
  f(m.head_w); f(m.head_b);
}

}  // namespace

std::vector<double> get_trainable(const ModelState& m) {
  std::vector<double> out;
  out.reserve(trainable_count(m));
  visit_trainable(m, [&](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); });
  return out;
}

void set_trainable(ModelState& m, std::span<const double> v) {
  if (v.size() != trainable_count(m)) throw std::invalid_argument("set_trainable: size mismatch");
  std::size_t off = 0;
  visit_trainable_mut(m, [&](std::vector<double>& dst) {
    std::copy(v.begin() + off, v.begin() + off + dst.size(), dst.begin());
    off += dst.size();
  });
}

void add_to_trainable(ModelState& m, std::span<const double> step) {
  if (step.size() != trainable_count(m)) throw std::invalid_argument("add_to_trainable: size mismatch");
  std::size_t off = 0;
  visit_trainable_mut(m, [&](std::vector<double>& dst) {
    kernels::add(dst, step.subspan(off, dst.size()));
    off += dst.size();
  });
}

void per_example_grad(const ModelState& m, std::span<const double> x, int y, ForwardTrace& t,
                      std::span<double> out) {
  if (y < 0 || y >= m.classes) throw std::invalid_argument("per_example_grad: label out of range");
  if (out.size() != trainable_count(m))
    throw std::invalid_argument("per_example_grad: output size mismatch");
  forward_trace(m, x, t);
  const auto h = static_cast<std::size_t>(m.hidden);
  const auto f = static_cast<std::size_t>(m.feature_dim);
  const auto c = static_cast<std::size_t>(m.classes);
  const auto in = static_cast<std::size_t>(m.in_dim);

  // d loss / d logits
  std::vector<double> du(t.probs);
  du[static_cast<std::size_t>(y)] -= 1.0;

  // backprop to features
  std::vector<double> da2(f, 0.0);
  for (std::size_t r = 0; r < c; ++r)
    kernels::axpy(du[r], std::span<const double>(m.head_w.data() + r * f, f), da2);

  std::vector<double> df2(f), dz2(f);
  for (std::size_t i = 0; i < f; ++i) df2[i] = t.f2[i] > 0.0 ? da2[i] : 0.0;
  for (std::size_t i = 0; i < f; ++i) dz2[i] = df2[i] * m.gamma2[i];

  std::vector<double> da1(h, 0.0);
  for (std::size_t r = 0; r < f; ++r)
    kernels::axpy(dz2[r], std::span<const double>(m.w2.data() + r * h, h), da1);

  std::vector<double> df1(h), dz1(h);
  for (std::size_t i = 0; i < h; ++i) df1[i] = t.f1[i] > 0.0 ? da1[i] : 0.0;
  for (std::size_t i = 0; i < h; ++i) dz1[i] = df1[i] * m.gamma1[i];

  std::size_t off = 0;
  auto emit = [&](auto&& fill, std::size_t len) {
    fill(out.subspan(off, len));
    off += len;
  };

  if (m.mode == ParamMode::all) {
    emit([&](std::span<double> g) {  // w1: dz1 outer x
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t j = 0; j < in; ++j) g[r * in + j] = dz1[r] * x[j];
    }, h * in);
    emit([&](std::span<double> g) { std::copy(dz1.begin(), dz1.end(), g.begin()); }, h);
    emit([&](std::span<double> g) {  // w2: dz2 outer a1
      for (std::size_t r = 0; r < f; ++r)
        for (std::size_t j = 0; j < h; ++j) g[r * h + j] = dz2[r] * t.a1[j];
    }, f * h);
    emit([&](std::span<double> g) { std::copy(dz2.begin(), dz2.end(), g.begin()); }, f);
  }
  if (m.mode == ParamMode::all || m.mode == ParamMode::film) {
    emit([&](std::span<double> g) {
      for (std::size_t i = 0; i < h; ++i) g[i] = df1[i] * t.z1[i];
    }, h);
    emit([&](std::span<double> g) { std::copy(df1.begin(), df1.end(), g.begin()); }, h);
    emit([&](std::span<double> g) {
      for (std::size_t i = 0; i < f; ++i) g[i] = df2[i] * t.z2[i];
    }, f);
    emit([&](std::span<double> g) { std::copy(df2.begin(), df2.end(), g.begin()); }, f);
  }
  emit([&](std::span<double> g) {  // head_w: du outer a2
    for (std::size_t r = 0; r < c; ++r)
      for (std::size_t j = 0; j < f; ++j) g[r * f + j] = du[r] * t.a2[j];
  }, c * f);
  emit([&](std::span<double> g) { std::copy(du.begin(), du.end(), g.begin()); }, c);
}

std::vector<double> per_example_grad(const ModelState& m, std::span<const double> x, int y) {
  std::vector<double> g(trainable_count(m));
  ForwardTrace t;
  per_example_grad(m, x, y, t, g);
  return g;
}

void fold_film(ModelState& m) {
  const auto h = static_cast<std::size_t>(m.hidden);
  const auto f = static_cast<std::size_t>(m.feature_dim);
  const auto in = static_cast<std::size_t>(m.in_dim);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t j = 0; j < in; ++j) m.w1[r * in + j] *= m.gamma1[r];
    m.b1[r] = m.gamma1[r] * m.b1[r] + m.beta1[r];
  }
  for (std::size_t r = 0; r < f; ++r) {
    for (std::size_t j = 0; j < h; ++j) m.w2[r * h + j] *= m.gamma2[r];
    m.b2[r] = m.gamma2[r] * m.b2[r] + m.beta2[r];
  }
  std::fill(m.gamma1.begin(), m.gamma1.end(), 1.0);
  std::fill(m.beta1.begin(), m.beta1.end(), 0.0);
  std::fill(m.gamma2.begin(), m.gamma2.end(), 1.0);
  std::fill(m.beta2.begin(), m.beta2.end(), 0.0);
}

void zero_head(ModelState& m) {
  std::fill(m.head_w.begin(), m.head_w.end(), 0.0);
  std::fill(m.head_b.begin(), m.head_b.end(), 0.0);
}

}  // namespace fewdp
