#include "fewdp/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fewdp/kernels.hpp"
#include "fewdp/threading.hpp"

namespace fewdp {

ShardDistribution distribution_from_name(std::string_view name) {
  if (name == "iid") return ShardDistribution::iid;
  if (name == "heterogeneous") return ShardDistribution::heterogeneous;
  throw std::invalid_argument("unknown shard distribution: " + std::string(name));
}

const char* distribution_name(ShardDistribution d) {
  return d == ShardDistribution::iid ? "iid" : "heterogeneous";
}

namespace {

double sample_gamma(Philox& rng, double alpha) {
  if (alpha < 1.0) {
    const double u = rng.next_double_open();
    return sample_gamma(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.next_gaussian();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_double_open();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

void shuffle_indices(std::vector<std::size_t>& idx, Philox& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
}

}  // namespace

std::vector<ClientShard> shard_clients(const FewShotDataset& data, int n_clients,
                                       ShardDistribution dist, double dirichlet_alpha,
                                       std::size_t max_per_client, uint64_t seed) {
  if (n_clients < 1) throw ShardError("shard_clients: need at least one client");
  auto train_idx = data.indices_of(Split::train);
  if (static_cast<std::size_t>(n_clients) > train_idx.size())
    throw ShardError("shard_clients: " + std::to_string(n_clients) + " clients exceed " +
                     std::to_string(train_idx.size()) + " training examples");

  std::vector<ClientShard> shards(static_cast<std::size_t>(n_clients));
  for (int i = 0; i < n_clients; ++i) shards[static_cast<std::size_t>(i)].client_id = i;

  if (dist == ShardDistribution::iid) {
    Philox rng = Philox::stream(seed, "shard-iid", 0);
    shuffle_indices(train_idx, rng);
    for (std::size_t i = 0; i < train_idx.size(); ++i)
      shards[i % static_cast<std::size_t>(n_clients)].indices.push_back(train_idx[i]);
  } else {
    // per class, split the examples among clients by Dirichlet proportions
    for (int c = 0; c < data.classes; ++c) {
      std::vector<std::size_t> cls;
      for (std::size_t i : train_idx)
        if (data.labels[i] == c) cls.push_back(i);
      if (cls.empty()) continue;
      Philox rng = Philox::stream(seed, "shard-dirichlet", static_cast<uint64_t>(c));
      shuffle_indices(cls, rng);
      std::vector<double> w(static_cast<std::size_t>(n_clients));
      double tot = 0.0;
      for (auto& x : w) {
        x = sample_gamma(rng, dirichlet_alpha);
        tot += x;
      }
      // largest-remainder apportionment of |cls| examples
      std::vector<std::size_t> count(w.size(), 0);
      std::vector<std::pair<double, std::size_t>> frac;
      std::size_t assigned = 0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double share = w[k] / tot * static_cast<double>(cls.size());
        count[k] = static_cast<std::size_t>(std::floor(share));
        assigned += count[k];
        frac.emplace_back(share - std::floor(share), k);
      }
      std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (std::size_t r = 0; assigned < cls.size(); ++r, ++assigned) count[frac[r].second] += 1;
      std::size_t off = 0;
      for (std::size_t k = 0; k < count.size(); ++k) {
        for (std::size_t j = 0; j < count[k]; ++j) shards[k].indices.push_back(cls[off + j]);
        off += count[k];
      }
    }
    // no client may end up empty: take from the largest shard
    for (auto& s : shards) {
      if (!s.indices.empty()) continue;
      auto richest = std::max_element(shards.begin(), shards.end(), [](const auto& a, const auto& b) {
        return a.indices.size() < b.indices.size();
      });
      if (richest->indices.size() <= 1) throw ShardError("shard_clients: not enough data to cover clients");
      s.indices.push_back(richest->indices.back());
      richest->indices.pop_back();
    }
  }
  for (auto& s : shards)
    if (s.indices.size() > max_per_client) s.indices.resize(max_per_client);
  return shards;
}

double adaptive_clip_update(double clip, double unclipped_fraction, double quantile, double lr) {
  return clip * std::exp(-lr * (unclipped_fraction - quantile));
}

std::vector<double> local_update(const FewShotDataset& data, const ClientShard& client,
                                 const ModelState& global, int local_epochs, int local_batch,
                                 double client_lr, uint64_t seed) {
  if (client.indices.empty()) throw std::invalid_argument("local_update: client has no data");
  const std::vector<double> before = get_trainable(global);
  if (local_epochs == 0) return std::vector<double>(before.size(), 0.0);
  ModelState model = global;
  DpOptimConfig cfg;
  cfg.lr = client_lr;
  cfg.expected_batch = local_batch;
  cfg.epochs = local_epochs;
  cfg.optimizer = OptimizerKind::sgd;
  train(model, data, client.indices, cfg, std::nullopt, seed);
  std::vector<double> delta = get_trainable(model);
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= before[i];
  return delta;
}

void aggregate_round(ServerState& server, std::span<const std::vector<double>> cohort_deltas,
                     bool dp, Philox& rng) {
  if (cohort_deltas.empty()) throw std::invalid_argument("aggregate_round: cohort is empty");
  const std::size_t p = trainable_count(server.global);
  for (const auto& d : cohort_deltas)
    if (d.size() != p) throw std::invalid_argument("aggregate_round: delta size mismatch");
  if (dp && !(server.ledger.sigma > 0.0))
    throw std::invalid_argument("aggregate_round: dp is on but no noise multiplier is calibrated");

  const double bound = server.clip.clip;
  const std::size_t m_exec = cohort_deltas.size();
  std::vector<double> sum(p, 0.0);
  std::size_t unclipped = 0;
  for (const auto& d : cohort_deltas) {
    const double nrm = kernels::norm2(d);
    double f = 1.0;
    if (dp && nrm > bound) f = bound / nrm;
    if (nrm <= bound) ++unclipped;
    kernels::axpy(f, d, sum);
  }
  kernels::scale(sum, 1.0 / static_cast<double>(m_exec));
  if (dp) {
    const long m_acc = server.accounting_cohort > 0 ? server.accounting_cohort
                                                    : static_cast<long>(m_exec);
    const double noise_std = server.ledger.sigma * bound / static_cast<double>(m_acc);
    for (auto& x : sum) x += noise_std * rng.next_gaussian();
  }

  if (server.optimizer == OptimizerKind::sgd) {
    kernels::scale(sum, server.server_lr);
    add_to_trainable(server.global, sum);
  } else {
    if (server.m1.size() != p) {
      server.m1.assign(p, 0.0);
      server.m2.assign(p, 0.0);
      server.adam_t = 0;
    }
    ++server.adam_t;
    const double b1 = server.adam.beta1;
    const double b2 = server.adam.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(server.adam_t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(server.adam_t));
    std::vector<double> step(p);
    for (std::size_t i = 0; i < p; ++i) {
      const double g = -sum[i];  // negated aggregate drives the server optimizer
      server.m1[i] = b1 * server.m1[i] + (1.0 - b1) * g;
      server.m2[i] = b2 * server.m2[i] + (1.0 - b2) * g * g;
      step[i] = -server.server_lr * (server.m1[i] / c1) / (std::sqrt(server.m2[i] / c2) + server.adam.eps);
    }
    add_to_trainable(server.global, step);
  }

  if (server.adaptive_clip) {
    double frac = static_cast<double>(unclipped);
    if (dp && server.clip.count_noise_std > 0.0)
      frac += server.clip.count_noise_std * rng.next_gaussian();
    frac /= static_cast<double>(m_exec);
    server.clip.clip = adaptive_clip_update(server.clip.clip, frac, server.clip.quantile,
                                            server.clip.lr);
  }
  ++server.round;
}

double comm_cost(const ModelState& model, ParamMode mode) {
  ModelState probe = model;
  probe.mode = mode;
  return static_cast<double>(trainable_count(probe));
}

double comm_cost(const ArchDescriptor& arch, ParamMode mode) { return count_learnable(arch, mode); }

FedResult fed_train(const SyntheticTaskSpec& task, const ModelState& pretrained,
                    const FedConfig& cfg, uint64_t seed) {
  if (cfg.cohort > cfg.n_clients)
    throw std::invalid_argument("fed_train: cohort exceeds client count");
  const FewShotDataset data = sample_few_shot(task, cfg.shots, cfg.test_per_class, seed);
  const auto shards = shard_clients(data, cfg.n_clients, cfg.distribution, cfg.dirichlet_alpha,
                                    cfg.client_cap, seed);
  const auto test_idx = data.indices_of(Split::test);

  ServerState server;
  server.global = pretrained;
  server.global.mode = cfg.mode;
  zero_head(server.global);
  server.optimizer = cfg.server_optimizer;
  server.adam = cfg.server_adam;
  server.server_lr = cfg.server_lr;
  server.adaptive_clip = cfg.adaptive_clip;
  server.clip.clip = cfg.clip_init;
  server.clip.quantile = cfg.clip_quantile;
  server.clip.lr = cfg.clip_lr;

  const bool dp = cfg.epsilon.has_value() && std::isfinite(*cfg.epsilon);
  if (dp) {
    const long m_acc = cfg.accounting_cohort.value_or(cfg.cohort);
    server.accounting_cohort = m_acc;
    const double n = static_cast<double>(cfg.n_clients);
    const double delta = cfg.delta_override.value_or(std::pow(n, -1.1));
    const double q = static_cast<double>(m_acc) / n;
    server.ledger.sigma =
        calibrate_sigma(PrivacyBudget{*cfg.epsilon, delta}, q, cfg.rounds, cfg.accountant);
    server.ledger.q = q;
    server.ledger.delta = delta;
    server.ledger.rounds = cfg.rounds;
    server.ledger.epsilon_target = *cfg.epsilon;
    server.clip.count_noise_std = static_cast<double>(cfg.cohort) / 20.0;
  }

  const double payload = comm_cost(server.global, cfg.mode);
  FedResult res;
  res.log.reserve(static_cast<std::size_t>(cfg.rounds));
  std::vector<int> ids(static_cast<std::size_t>(cfg.n_clients));
  std::iota(ids.begin(), ids.end(), 0);

  for (int r = 0; r < cfg.rounds; ++r) {
    // uniform cohort without replacement
    Philox crng = Philox::stream(seed, "cohort", static_cast<uint64_t>(r));
    for (int k = 0; k < cfg.cohort; ++k) {
      const auto j = k + static_cast<int>(crng.next_below(static_cast<uint64_t>(cfg.n_clients - k)));
      std::swap(ids[static_cast<std::size_t>(k)], ids[static_cast<std::size_t>(j)]);
    }
    std::vector<std::vector<double>> deltas(static_cast<std::size_t>(cfg.cohort));
    parallel_for(static_cast<std::size_t>(cfg.cohort), 1, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const int cid = ids[k];
        deltas[k] = local_update(
            data, shards[static_cast<std::size_t>(cid)], server.global, cfg.local_epochs,
            cfg.local_batch, cfg.client_lr,
            Philox::mix64(seed ^ 0x666564ULL) + static_cast<uint64_t>(r) * cfg.n_clients +
                static_cast<uint64_t>(cid));
      }
    });
    Philox nrng = Philox::stream(seed, "fed-noise", static_cast<uint64_t>(r));
    aggregate_round(server, deltas, dp, nrng);
    res.log.push_back(FedRoundLog{server.round, accuracy(server.global, data, test_idx),
                                  server.clip.clip, payload});
  }

  res.final_accuracy = res.log.empty() ? 0.0 : res.log.back().accuracy;
  res.ledger = server.ledger;
  if (dp)
    res.realized_epsilon = account_epsilon(
        cfg.accountant, MechanismParams{server.ledger.sigma, server.ledger.q, server.ledger.rounds},
        server.ledger.delta);
  res.global = std::move(server.global);
  return res;
}

}  // namespace fewdp
