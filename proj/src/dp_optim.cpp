#include "fewdp/dp_optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fewdp/kernels.hpp"
#include "fewdp/threading.hpp"

namespace fewdp {

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_name(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer: " + std::string(name));
}

void DpOptimConfig::validate() const {
  if (!(clip > 0.0)) throw std::invalid_argument("optim: clip must be > 0");
  if (!(expected_batch >= 1.0)) throw std::invalid_argument("optim: expected batch must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("optim: learning rate must be > 0");
  if (epochs < 0) throw std::invalid_argument("optim: epochs must be >= 0");
  if (sigma < 0.0) throw std::invalid_argument("optim: sigma must be >= 0");
}

std::vector<std::size_t> poisson_batch(std::span<const std::size_t> candidates, double q,
                                       Philox& rng) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("poisson_batch: q must be in [0, 1]");
  std::vector<std::size_t> out;
  for (std::size_t idx : candidates)
    if (rng.next_double() < q) out.push_back(idx);
  return out;
}

std::vector<double> clip_grad(std::vector<double> g, double clip) {
  if (!(clip > 0.0)) throw std::invalid_argument("clip_grad: clip must be > 0");
  const double nrm = kernels::norm2(g);
  if (nrm > clip) kernels::scale(g, clip / nrm);
  return g;
}

namespace {

constexpr std::size_t kGradChunk = 16;

// Sum of clipped per-example gradients, accumulated over fixed-size chunks so
// the result is identical for any worker count.
std::vector<double> sum_clipped_grads(const ModelState& model, const FewShotDataset& data,
                                      std::span<const std::size_t> batch, double clip,
                                      double* max_clipped_norm) {
  const std::size_t p = trainable_count(model);
  const std::size_t n_chunks = batch.empty() ? 0 : (batch.size() + kGradChunk - 1) / kGradChunk;
  std::vector<double> partials(n_chunks * p, 0.0);
  std::vector<double> chunk_max(n_chunks, 0.0);
  parallel_for(batch.size(), kGradChunk, [&](std::size_t b, std::size_t e) {
    const std::size_t ci = b / kGradChunk;
    std::span<double> acc(partials.data() + ci * p, p);
    ForwardTrace trace;
    std::vector<double> g(p);
    for (std::size_t i = b; i < e; ++i) {
      const std::size_t row = batch[i];
      per_example_grad(model, data.row(row), data.labels[row], trace, g);
      const double nrm = kernels::norm2(g);
      const double f = (std::isfinite(clip) && nrm > clip) ? clip / nrm : 1.0;
      kernels::axpy(f, g, acc);
      chunk_max[ci] = std::max(chunk_max[ci], nrm * f);
    }
  });
  std::vector<double> sum(p, 0.0);
  for (std::size_t ci = 0; ci < n_chunks; ++ci)
    kernels::add(sum, std::span<const double>(partials.data() + ci * p, p));
  if (max_clipped_norm) {
    double mx = 0.0;
    for (double v : chunk_max) mx = std::max(mx, v);
    *max_clipped_norm = mx;
  }
  return sum;
}

void apply_gradient(ModelState& model, std::vector<double>& grad, const DpOptimConfig& cfg,
                    OptimizerState& opt) {
  const std::size_t p = grad.size();
  if (cfg.optimizer == OptimizerKind::sgd) {
    kernels::scale(grad, -cfg.lr);
    add_to_trainable(model, grad);
    return;
  }
  if (opt.m1.size() != p) {
    opt.m1.assign(p, 0.0);
    opt.m2.assign(p, 0.0);
    opt.t = 0;
  }
  ++opt.t;
  const double b1 = cfg.adam.beta1;
  const double b2 = cfg.adam.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.t));
  std::vector<double> step(p);
  for (std::size_t i = 0; i < p; ++i) {
    opt.m1[i] = b1 * opt.m1[i] + (1.0 - b1) * grad[i];
    opt.m2[i] = b2 * opt.m2[i] + (1.0 - b2) * grad[i] * grad[i];
    step[i] = -cfg.lr * (opt.m1[i] / c1) / (std::sqrt(opt.m2[i] / c2) + cfg.adam.eps);
  }
  add_to_trainable(model, step);
}

}  // namespace

StepDiag dp_step(ModelState& model, const FewShotDataset& data,
                 std::span<const std::size_t> batch, const DpOptimConfig& cfg,
                 OptimizerState& opt, Philox& noise_rng) {
  cfg.validate();
  StepDiag diag;
  diag.realized_batch = batch.size();
  std::vector<double> grad =
      sum_clipped_grads(model, data, batch, cfg.clip, &diag.max_clipped_norm);
  if (cfg.check_clip && diag.max_clipped_norm > cfg.clip * (1.0 + 1e-12))
    throw std::logic_error("dp_step: clipped gradient norm " +
                           std::to_string(diag.max_clipped_norm) + " exceeds bound " +
                           std::to_string(cfg.clip));
  if (cfg.sigma > 0.0) {
    const double noise_std = cfg.sigma * cfg.clip;
    for (auto& g : grad) g += noise_std * noise_rng.next_gaussian();
  }
  kernels::scale(grad, 1.0 / cfg.expected_batch);
  apply_gradient(model, grad, cfg, opt);
  return diag;
}

long steps_per_epoch(std::size_t n, double expected_batch) {
  const double b = std::min<double>(expected_batch, static_cast<double>(n));
  return static_cast<long>(std::ceil(static_cast<double>(n) / b));
}

TrainResult train(ModelState& model, const FewShotDataset& data,
                  std::span<const std::size_t> train_indices, const DpOptimConfig& cfg,
                  const std::optional<PrivacySpec>& privacy, uint64_t seed) {
  cfg.validate();
  if (train_indices.empty()) throw std::invalid_argument("train: empty training split");
  const std::size_t n = train_indices.size();
  DpOptimConfig eff = cfg;
  eff.expected_batch = std::min<double>(cfg.expected_batch, static_cast<double>(n));
  const long per_epoch = steps_per_epoch(n, eff.expected_batch);
  TrainResult result;
  OptimizerState opt;

  if (privacy.has_value()) {
    if (privacy->sigma > 0.0) eff.sigma = privacy->sigma;
    if (!(eff.sigma > 0.0))
      throw std::invalid_argument("train: private mode requires a calibrated noise multiplier");
    if (privacy->clip > 0.0) eff.clip = privacy->clip;
    const double q = eff.expected_batch / static_cast<double>(n);
    for (int epoch = 0; epoch < eff.epochs; ++epoch) {
      for (long s = 0; s < per_epoch; ++s) {
        const auto step_id = static_cast<uint64_t>(result.steps);
        Philox batch_rng = Philox::stream(seed, "poisson", step_id);
        Philox noise_rng = Philox::stream(seed, "noise", step_id);
        const auto batch = poisson_batch(train_indices, q, batch_rng);
        dp_step(model, data, batch, eff, opt, noise_rng);
        ++result.steps;
      }
    }
    return result;
  }

  // non-private: shuffled mini-batches, mean gradient, no clip, no noise
  std::vector<std::size_t> order(train_indices.begin(), train_indices.end());
  const std::size_t b = static_cast<std::size_t>(eff.expected_batch);
  for (int epoch = 0; epoch < eff.epochs; ++epoch) {
    Philox shuffle_rng = Philox::stream(seed, "shuffle", static_cast<uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
    for (std::size_t off = 0; off < order.size(); off += b) {
      const std::size_t len = std::min(b, order.size() - off);
      std::span<const std::size_t> batch(order.data() + off, len);
      std::vector<double> grad = sum_clipped_grads(
          model, data, batch, std::numeric_limits<double>::infinity(), nullptr);
      kernels::scale(grad, 1.0 / static_cast<double>(len));
      apply_gradient(model, grad, eff, opt);
      ++result.steps;
    }
  }
  return result;
}

TrainResult train(ModelState& model, const FewShotDataset& data, Split split,
                  const DpOptimConfig& cfg, const std::optional<PrivacySpec>& privacy,
                  uint64_t seed) {
  const auto idx = data.indices_of(split);
  return train(model, data, idx, cfg, privacy, seed);
}

}  // namespace fewdp
