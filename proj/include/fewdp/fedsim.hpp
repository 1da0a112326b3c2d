#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fewdp/accountant.hpp"
#include "fewdp/dataset.hpp"
#include "fewdp/dp_optim.hpp"
#include "fewdp/model.hpp"

namespace fewdp {

class ShardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ShardDistribution { iid, heterogeneous };
ShardDistribution distribution_from_name(std::string_view name);
const char* distribution_name(ShardDistribution d);

struct ClientShard {
  int client_id = 0;
  std::vector<std::size_t> indices;  // rows of the shared dataset
};

// Disjoint shards covering the dataset's train split (up to max_per_client).
// Heterogeneous mode allocates each class across clients by Dirichlet
// proportions; every client ends up with at least one example.
std::vector<ClientShard> shard_clients(const FewShotDataset& data, int n_clients,
                                       ShardDistribution dist, double dirichlet_alpha,
                                       std::size_t max_per_client, uint64_t seed);

struct AdaptiveClipState {
  double clip = 1.0;
  double quantile = 0.1;       // target fraction of unclipped clients
  double lr = 0.2;             // geometric step size
  double count_noise_std = 0.0;
};

// B * exp(-lr * (unclipped_fraction - quantile))
double adaptive_clip_update(double clip, double unclipped_fraction, double quantile, double lr);

struct PrivacyLedger {
  double sigma = 0.0;
  double q = 0.0;  // accounting cohort / N
  double delta = 0.0;
  long rounds = 0;
  std::optional<double> epsilon_target;
};

struct ServerState {
  ModelState global;
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamParams adam{0.9, 0.99, 1e-3};
  std::vector<double> m1, m2;
  long adam_t = 0;
  double server_lr = 1.0;
  long round = 0;
  AdaptiveClipState clip;
  bool adaptive_clip = false;
  long accounting_cohort = 0;  // noise priced for this cohort size
  PrivacyLedger ledger;
};

// One local training pass; returns the trainable-coordinate delta
// (local-trained params minus global params).
std::vector<double> local_update(const FewShotDataset& data, const ClientShard& client,
                                 const ModelState& global, int local_epochs, int local_batch,
                                 double client_lr, uint64_t seed);

// Clips each delta to the current bound, averages (adding Gaussian noise when
// dp is on), applies the server optimizer, and updates the adaptive clip from
// the (optionally noised) unclipped fraction.
void aggregate_round(ServerState& server, std::span<const std::vector<double>> cohort_deltas,
                     bool dp, Philox& rng);

struct FedConfig {
  int rounds = 50;
  int cohort = 10;
  std::optional<int> accounting_cohort;  // simulated-noise-level override
  int n_clients = 20;
  int shots = 40;           // task examples per class pooled across clients
  int test_per_class = 100;
  ShardDistribution distribution = ShardDistribution::iid;
  double dirichlet_alpha = 0.5;
  std::size_t client_cap = 512;
  int local_epochs = 2;
  int local_batch = 16;
  double client_lr = 0.05;
  double server_lr = 0.1;
  OptimizerKind server_optimizer = OptimizerKind::adam;  // FedADAM
  AdamParams server_adam{0.9, 0.99, 1e-3};
  ParamMode mode = ParamMode::film;
  std::optional<double> epsilon;         // user-level target; delta = N^-1.1
  std::optional<double> delta_override;
  bool adaptive_clip = true;
  double clip_init = 1.0;
  double clip_quantile = 0.1;
  double clip_lr = 0.2;
  AccountantKind accountant = AccountantKind::rdp;
};

struct FedRoundLog {
  long round = 0;
  double accuracy = 0.0;
  double clip = 0.0;
  double payload = 0.0;  // parameters per client-server interaction
};

struct FedResult {
  ModelState global;
  std::vector<FedRoundLog> log;
  double final_accuracy = 0.0;
  PrivacyLedger ledger;
  double realized_epsilon = 0.0;  // 0 when non-private
};

FedResult fed_train(const SyntheticTaskSpec& task, const ModelState& pretrained,
                    const FedConfig& cfg, uint64_t seed);

// Trainable parameters exchanged per client-server interaction.
double comm_cost(const ModelState& model, ParamMode mode);
double comm_cost(const ArchDescriptor& arch, ParamMode mode);

}  // namespace fewdp
