// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdd/nn.hpp"
#include "mdd/rng.hpp"

namespace mdd {

// Aggregated text condition, or the null condition used for unconditional
// denoising.
struct ConditionEmbedding {
  Eigen::VectorXd c;
  bool null = false;

  static ConditionEmbedding none() {
    ConditionEmbedding e;
    e.null = true;
    return e;
  }
  void validate() const {
    if (!null && !c.allFinite()) throw DataError("ConditionEmbedding: non-finite");
  }
};

// One feature vector per selected encoder layer.
struct LayerFeatureSet {
  std::map<int, Eigen::VectorXd> features;
};

// Layered text-encoder contract: any backend that can produce one vector per
// layer in S can drive the aggregator.
class LayeredTextProvider {
 public:
  virtual ~LayeredTextProvider() = default;
  virtual std::vector<int> layer_set() const = 0;
  virtual int width(int layer) const = 0;
  virtual LayerFeatureSet embed(const std::vector<std::string>& tokens) const = 0;
};

// Desk-scale provider: depth i (1-based position of the layer in S) pools
// i-grams of the token sequence; each distinct gram maps to a deterministic
// seeded pseudorandom vector and grams are mean-pooled. Depth 1 is thus a
// bag-of-words embedding and higher depths are order-sensitive.
class NgramHashProvider : public LayeredTextProvider {
 public:
  NgramHashProvider(std::vector<int> layers, std::vector<int> widths, uint64_t seed);

  std::vector<int> layer_set() const override { return layers_; }
  int width(int layer) const override;
  LayerFeatureSet embed(const std::vector<std::string>& tokens) const override;
  uint64_t seed() const { return seed_; }
  const std::vector<int>& widths() const { return widths_; }

  static NgramHashProvider default_provider(uint64_t seed = 7, int width = 64);

 private:
  std::vector<int> layers_;
  std::vector<int> widths_;
  uint64_t seed_;
};

// "EMB1"-backed provider: precomputed per-text layer features produced by an
// external embedding backend.
class Emb1Provider : public LayeredTextProvider {
 public:
  explicit Emb1Provider(const std::string& path);

  std::vector<int> layer_set() const override { return layers_; }
  int width(int layer) const override;
  LayerFeatureSet embed(const std::vector<std::string>& tokens) const override;

 private:
  std::vector<int> layers_;
  std::vector<int> widths_;
  std::map<std::string, LayerFeatureSet> records_;
};

void save_emb1(const std::string& path, const std::vector<int>& layers,
               const std::vector<int>& widths,
               const std::vector<std::pair<std::string, LayerFeatureSet>>& records);

// Per-layer scalar weight plus a two-affine projection block.
struct LayerMlp {
  Linear in;   // width -> 2 * cond_dim
  Linear out;  // 2 * cond_dim -> cond_dim
};

struct AggregatorParams {
  std::vector<int> layer_set;
  Param weights;  // |S| x 1 learnable a_i
  std::vector<LayerMlp> mlps;
  int cond_dim = 0;

  static AggregatorParams init(const std::vector<int>& layers, const std::vector<int>& widths,
                               int cond_dim, Rng& rng);
  std::vector<Param*> params();
};

// c = sum_i a_i * F_i(feats[i]).
ConditionEmbedding aggregate(const AggregatorParams& params, const LayerFeatureSet& feats);

// Forward pass that keeps intermediates so gradients can flow back into the
// weights and projection blocks during joint training.
struct AggregateTrace {
  std::vector<Eigen::MatrixXd> layer_in;      // 1 x width
  std::vector<Eigen::MatrixXd> hidden_pre;    // 1 x 2*cond_dim (post linear)
  std::vector<Eigen::MatrixXd> hidden_act;    // tanh output
  std::vector<Eigen::MatrixXd> projected;     // 1 x cond_dim, F_i(feats)
  Eigen::VectorXd c;
};

AggregateTrace aggregate_forward(const AggregatorParams& params, const LayerFeatureSet& feats);
void aggregate_backward(AggregatorParams& params, const AggregateTrace& trace,
                        const Eigen::VectorXd& dc);

}  // namespace mdd
