// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mdd/denoiser.hpp"
#include "mdd/diffusion.hpp"
#include "mdd/hsa.hpp"
#include "mdd/vq.hpp"

namespace mdd {

struct GuidanceConfig {
  double scale = 2.0;  // s >= 0; 2 favors consistency, 1 favors diversity
  int steps = 100;     // inference chain length
  uint64_t seed = 0;

  void validate() const {
    if (scale < 0.0) throw DataError("GuidanceConfig: scale must be >= 0");
    if (steps < 1) throw DataError("GuidanceConfig: steps must be >= 1");
  }
};

// p~ = (1+s) p_cond - s p_uncond, negatives clamped to 0, rows renormalized.
CategoricalState apply_guidance(const CategoricalState& p_cond, const CategoricalState& p_uncond,
                                double s);

// Per position argmax_k(log p_k + G_k) with independent standard Gumbel
// noise. Zero-probability entries are never sampled. The returned sequence
// treats the last column as the mask category.
TokenSequence gumbel_sample(const CategoricalState& state, Rng& rng);

// Reverse-process generation of n tokens. Starts from the chain's terminal
// state (all-mask for mask-and-replace schedules, uniform tokens otherwise)
// and walks t = T..1 with hybrid guidance when cfg.scale > 0 and a condition
// is present.
TokenSequence generate(const ToyDenoiser& net, const ConditionEmbedding& cond,
                       const GuidanceConfig& cfg, int n, const NoiseSchedule& s);

// Everything needed to run text -> motion end to end.
struct PipelineBundle {
  VqModel vq;
  Codebook book;
  ToyDenoiser denoiser;
  std::optional<AggregatorParams> hsa;
  std::shared_ptr<LayeredTextProvider> provider;
  std::string schedule_profile = "mask-and-replace";
};

// provider -> aggregate -> generate -> decode_from_tokens. `token_count`
// selects the output duration (frames = token_count / eta). Empty text means
// the null condition.
MotionClip generate_motion(const std::vector<std::string>& text_tokens,
                           const PipelineBundle& bundle, const GuidanceConfig& cfg,
                           int token_count);

}  // namespace mdd
