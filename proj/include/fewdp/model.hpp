#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fewdp {

// Which parameter subset trains during fine-tuning.
enum class ParamMode { head, film, all };

const char* mode_name(ParamMode m);
ParamMode mode_from_name(std::string_view name);

// Parameter counts of a reference architecture, for payload/count queries
// that do not need concrete weights.
struct ArchDescriptor {
  double backbone_params = 0;  // includes the film sites
  double film_params = 0;
  int feature_dim = 0;  // backbone output dimension
  int classes = 0;
};

// Two dense layers with rectifier nonlinearity, a per-channel scale/offset
// pair after each pre-activation, and a linear classifier head.
struct ModelState {
  int in_dim = 0;
  int hidden = 0;
  int feature_dim = 0;
  int classes = 0;
  ParamMode mode = ParamMode::head;

  std::vector<double> w1, b1;          // hidden x in_dim, hidden
  std::vector<double> gamma1, beta1;   // hidden
  std::vector<double> w2, b2;          // feature_dim x hidden, feature_dim
  std::vector<double> gamma2, beta2;   // feature_dim
  std::vector<double> head_w, head_b;  // classes x feature_dim, classes
};

// Fresh model: random backbone, gamma=1, beta=0, head=0.
ModelState make_model(int in_dim, int hidden, int feature_dim, int classes, ParamMode mode,
                      uint64_t seed);

// out = gamma * a + beta, elementwise. Throws on length mismatch.
std::vector<double> film_apply(std::span<const double> a, std::span<const double> gamma,
                               std::span<const double> beta);

struct ForwardTrace {
  std::vector<double> z1, f1, a1;  // pre-film, pre-relu, post-relu
  std::vector<double> z2, f2, a2;
  std::vector<double> logits, probs;
};

// Class probabilities (softmax over head logits).
std::vector<double> forward(const ModelState& m, std::span<const double> x);
void forward_trace(const ModelState& m, std::span<const double> x, ForwardTrace& t);

// Forward pass with the scale/offset stage skipped entirely, for the
// identity-parameter equivalence check.
std::vector<double> forward_plain(const ModelState& m, std::span<const double> x);

double cross_entropy(const ModelState& m, std::span<const double> x, int y);
int predict(const ModelState& m, std::span<const double> x);
double accuracy(const ModelState& m, const struct FewShotDataset& data,
                std::span<const std::size_t> indices);

std::size_t trainable_count(const ModelState& m);
std::size_t count_learnable(const ModelState& m);
double count_learnable(const ArchDescriptor& a, ParamMode mode);

// Flattened trainable parameters, ordered so that the head block is a common
// suffix of every mode and the film block a suffix of mode all:
//   head: [head_w, head_b]
//   film: [gamma1, beta1, gamma2, beta2, head_w, head_b]
//   all:  [w1, b1, w2, b2, gamma1, beta1, gamma2, beta2, head_w, head_b]
std::vector<double> get_trainable(const ModelState& m);
void set_trainable(ModelState& m, std::span<const double> v);
void add_to_trainable(ModelState& m, std::span<const double> step);

// Gradient of cross-entropy at (x, y) over the trainable subset only.
std::vector<double> per_example_grad(const ModelState& m, std::span<const double> x, int y);
void per_example_grad(const ModelState& m, std::span<const double> x, int y, ForwardTrace& t,
                      std::span<double> out);

// Folds the scale/offset parameters into the dense weights (exact function
// composition) and resets them to identity; used after pretraining so
// fine-tuning starts from gamma=1, beta=0, head=0.
void fold_film(ModelState& m);
void zero_head(ModelState& m);

}  // namespace fewdp
