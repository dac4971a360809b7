// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mdd/motion.hpp"
#include "mdd/nn.hpp"
#include "mdd/rng.hpp"
#include "mdd/types.hpp"

namespace mdd {

// K learned embedding vectors with the EMA statistics that move them toward
// the means of their assigned encoder outputs.
struct Codebook {
  Eigen::MatrixXd entries;    // K x d
  Eigen::VectorXd ema_counts; // K
  Eigen::MatrixXd ema_sums;   // K x d

  int size() const { return static_cast<int>(entries.rows()); }
  int dim() const { return static_cast<int>(entries.cols()); }
  void validate() const;

  static Codebook init(int K, int d, Rng& rng, double stddev = 1.0);
};

struct QuantizationResult {
  TokenSequence tokens;      // argmin over the distances matrix, ties to lowest index
  Eigen::MatrixXd z_q;       // n x d nearest entries
  Eigen::MatrixXd distances; // n x K Euclidean distances
};

// Nearest-entry lookup per row of z.
QuantizationResult quantize(const Eigen::MatrixXd& z, const Codebook& book);

struct VqLossTerms {
  double total = 0, recon = 0, embed = 0, commit = 0;
};

// recon = mean |m - m_tilde|; embed = ||z - sg[z_q]||_F; commit =
// beta * ||sg[z] - z_q||_F. Stop-gradients are honored by the training code:
// embed drives the encoder, commit is reported only (the codebook is
// EMA-updated, not gradient-updated).
VqLossTerms vq_loss(const Eigen::MatrixXd& m, const Eigen::MatrixXd& m_tilde,
                    const Eigen::MatrixXd& z, const Eigen::MatrixXd& z_q, double beta);

// counts_k <- lambda * counts_k + (1-lambda) * |assigned|;
// sums_k   <- lambda * sums_k   + (1-lambda) * sum of assigned rows;
// entry_k  <- sums_k / max(counts_k, eps).
Codebook ema_update(const Codebook& book, const Eigen::MatrixXd& z, const TokenSequence& tokens,
                    double decay);

// Re-seed codes whose EMA usage fell below the threshold from rows of the
// recent batch z; returns the updated book and the number of resets.
std::pair<Codebook, int> reset_dead_codes(const Codebook& book, const Eigen::MatrixXd& z,
                                          double usage_threshold, Rng& rng);

// Two strided temporal blocks each way; downsample rate 1/4.
struct VqModel {
  int in_dim = 0;
  int hidden = 32;
  int code_dim = 0;

  StridedAffine enc1, enc2;   // stride-2 each
  StridedAffine dec1, dec2;   // stride-1, after x2 upsampling
  Eigen::VectorXd feat_mean;  // input normalization (identity when empty)
  Eigen::VectorXd feat_std;

  static constexpr int kDownsample = 4;  // 1/eta

  VqModel() = default;
  VqModel(int in_dim, int hidden, int code_dim, Rng& rng);

  double eta() const { return 1.0 / kDownsample; }
  std::vector<Param*> params();

  Eigen::MatrixXd normalize(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& m) const;

  // m (N x in_dim) -> z (ceil(N/4) x code_dim), on normalized features.
  Eigen::MatrixXd encode(const Eigen::MatrixXd& m) const;
  // z_q -> reconstruction (4n x in_dim), denormalized.
  Eigen::MatrixXd decode(const Eigen::MatrixXd& z_q) const;
};

TokenSequence encode_to_tokens(const MotionClip& clip, const VqModel& model, const Codebook& book);
MotionClip decode_from_tokens(const TokenSequence& u, const VqModel& model, const Codebook& book);

struct VqTrainConfig {
  int codebook_size = 512;
  int code_dim = 512;
  int hidden = 64;
  double beta = 0.25;
  // Scale on the embed term's encoder gradient. The reported loss keeps the
  // plain Frobenius norms; at toy scale their unit-norm gradient swamps the
  // mean-L1 reconstruction signal unless damped.
  double embed_weight = 0.05;
  double ema_decay = 0.99;
  double reset_threshold = 1.0;
  int reset_every = 20;
  int steps = 2000;
  int batch_size = 8;
  double lr = 1e-3;
  double lr_final_factor = 0.05;  // linear decay to lr * factor by the last step
  double momentum = 0.9;
  double weight_decay = 4.5e-2;
  double holdout_fraction = 0.1;
  bool normalize = true;
  uint64_t seed = 0;
};

struct VqTrainResult {
  VqModel model;
  Codebook book;
  std::vector<double> loss_curve;     // total loss per step
  double holdout_recon_l1 = 0.0;      // mean |m - m~| on held-out clips
};

// Gradient-descent training with straight-through quantization, EMA codebook
// updates and periodic dead-code reset. Bitwise deterministic per seed.
VqTrainResult train_toy_vq(const std::vector<MotionClip>& corpus, const VqTrainConfig& config);

// "MVQ1" checkpoint: JSON header (K, d, eta, layer shapes, blob offsets)
// followed by little-endian f32 parameter blobs.
void save_vq_checkpoint(const VqModel& model, const Codebook& book, const std::string& path);
std::pair<VqModel, Codebook> load_vq_checkpoint(const std::string& path);

}  // namespace mdd
