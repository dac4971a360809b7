// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdd/diffusion.hpp"
#include "mdd/hsa.hpp"
#include "mdd/nn.hpp"

namespace mdd {

// Small trainable conditional denoiser predicting the clean-token
// distribution p(u0 | u_t, t, c). Each residual block mixes a width-3
// temporal window so the network can express dependencies between adjacent
// positions. The output head has K columns only: the mask token carries no
// structural mass in p(u0).
struct ToyDenoiser {
  int K = 0;
  int hidden = 0;
  int cond_dim = 0;
  int T = 0;

  Param token_embedding;  // (K+1) x h
  Linear cond_proj;       // cond_dim -> h; the null condition contributes zero
  struct Block {
    Linear mix;  // 3h -> 2h over [x_{i-1}; x_i; x_{i+1}]
    Linear out;  // 2h -> h, added residually
  };
  std::vector<Block> blocks;
  Linear head;  // h -> K, zero-initialized so the untrained model is uniform

  ToyDenoiser() = default;
  ToyDenoiser(int K, int hidden, int cond_dim, int T, int n_blocks, Rng& rng);

  std::vector<Param*> params();
  Eigen::VectorXd time_embedding(int t) const;  // sinusoidal, width h
};

// Row-stochastic n x K distribution over clean tokens.
CategoricalState predict_x0(const ToyDenoiser& net, const TokenSequence& u_t, int t,
                            const ConditionEmbedding& c);

// The x0-parameterized reverse kernel: mixes the analytic posterior with a
// clean-token distribution, p(u_{t-1} | u_t) = sum_{u0} q(u_{t-1} | u_t, u0)
// px0(u0). Rows of px0 are n x K; the result is n x (K+1).
CategoricalState compose_reverse(const CategoricalState& px0, const TokenSequence& u_t, int t,
                                 const NoiseSchedule& s);

// p(u_{t-1} | u_t, c): predict_x0 composed with the analytic posterior.
CategoricalState model_reverse(const ToyDenoiser& net, const TokenSequence& u_t, int t,
                               const ConditionEmbedding& c, const NoiseSchedule& s);

// One training example: clean tokens plus the caption condition. The
// condition is either a precomputed embedding or raw layer features (the
// latter lets gradients reach the HSA aggregator during joint training).
struct TrainingExample {
  TokenSequence u0;
  std::string source = "curated";  // "curated" | "wild"
  std::optional<ConditionEmbedding> condition;
  std::optional<LayerFeatureSet> condition_features;
};

struct TrainLossBreakdown {
  double total = 0, kl = 0, aux = 0;
};

struct DenoiserTrainConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 4.5e-2;
  double lambda_aux = 0.01;
  std::map<std::string, double> sigma_map = {{"curated", 0.1}, {"wild", 0.3}};
  // Optional linear lr decay: when total_steps > 0 the rate anneals to
  // lr * lr_final_factor by the last step.
  int total_steps = 0;
  double lr_final_factor = 0.05;
};

// Owns the denoiser (and optionally the HSA aggregator) parameters for the
// duration of training; one trainer per parameter set.
class DiffusionTrainer {
 public:
  DiffusionTrainer(ToyDenoiser net, const DenoiserTrainConfig& config);
  DiffusionTrainer(ToyDenoiser net, AggregatorParams hsa, const DenoiserTrainConfig& config);

  // Sample t ~ U(1,T) and u_t ~ q(u_t|u0) per example, apply per-source
  // condition dropout, take one gradient-descent step on
  // vlb + lambda_aux * CE(predict_x0, u0) averaged over the batch.
  TrainLossBreakdown train_step(const std::vector<TrainingExample>& batch, const NoiseSchedule& s,
                                Rng& rng);

  const ToyDenoiser& net() const { return net_; }
  ToyDenoiser& net() { return net_; }
  bool has_hsa() const { return hsa_.has_value(); }
  const AggregatorParams& hsa() const { return *hsa_; }
  AggregatorParams& hsa() { return *hsa_; }
  const DenoiserTrainConfig& config() const { return config_; }

  // Loss + gradients for one fixed corrupted example (no sampling); used by
  // the finite-difference check. Gradients accumulate in the parameters.
  TrainLossBreakdown example_loss_and_grad(const TrainingExample& ex, const TokenSequence& u_t,
                                           int t, bool drop_condition, const NoiseSchedule& s);

 private:
  ToyDenoiser net_;
  std::optional<AggregatorParams> hsa_;
  DenoiserTrainConfig config_;
  SgdMomentum opt_;
  std::vector<Param*> all_params_;
  int steps_taken_ = 0;
};

// Max relative error between analytic gradients and central finite
// differences (step 1e-4) over every parameter entry; the denominator is
// floored at 0.01 to keep near-zero gradients from dominating.
double gradient_check(DiffusionTrainer& trainer, const TrainingExample& ex,
                      const TokenSequence& u_t, int t, bool drop_condition,
                      const NoiseSchedule& s);

// "MDN1" checkpoint: JSON header (h, K, T, cond_dim, block count, HSA and
// provider configuration) plus f32 parameter blobs.
struct DenoiserCheckpoint {
  ToyDenoiser net;
  std::optional<AggregatorParams> hsa;
  std::vector<int> provider_layers;
  std::vector<int> provider_widths;
  uint64_t provider_seed = 0;
  std::string schedule_profile = "mask-and-replace";
};

void save_denoiser_checkpoint(const DenoiserCheckpoint& ckpt, const std::string& path);
DenoiserCheckpoint load_denoiser_checkpoint(const std::string& path);

}  // namespace mdd
