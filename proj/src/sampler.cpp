// SPDX-License-Identifier: Apache-2.0
#include "mdd/sampler.hpp"

#include <cmath>

namespace mdd {

CategoricalState apply_guidance(const CategoricalState& p_cond, const CategoricalState& p_uncond,
                                double s) {
  if (s < 0.0) throw DataError("apply_guidance: scale must be >= 0");
  if (p_cond.probs.rows() != p_uncond.probs.rows() ||
      p_cond.probs.cols() != p_uncond.probs.cols())
    throw DataError("apply_guidance: shape mismatch");

  CategoricalState out;
  out.probs = ((1.0 + s) * p_cond.probs - s * p_uncond.probs).cwiseMax(0.0);
  for (Eigen::Index i = 0; i < out.probs.rows(); ++i) {
    const double z = out.probs.row(i).sum();
    if (z <= 0.0)
      throw NumericalError("apply_guidance: all mass clamped away at position " +
                           std::to_string(i));
    out.probs.row(i) /= z;
  }
  return out;
}

TokenSequence gumbel_sample(const CategoricalState& state, Rng& rng) {
  state.validate();
  const int n = state.length();
  const int C = state.categories();
  TokenSequence out;
  out.codebook_size = C - 1;  // last column is the mask category
  out.tokens.resize(n);
  for (int i = 0; i < n; ++i) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < C; ++k) {
      const double p = state.probs(i, k);
      if (p <= 0.0) continue;  // structural zeros are never sampled
      const double score = std::log(p) + rng.gumbel();
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    out.tokens[i] = best;
  }
  return out;
}

TokenSequence generate(const ToyDenoiser& net, const ConditionEmbedding& cond,
                       const GuidanceConfig& cfg, int n, const NoiseSchedule& s) {
  cfg.validate();
  if (n < 1) throw DataError("generate: n must be >= 1");
  if (s.K != net.K) throw DataError("generate: schedule K mismatch");
  Rng rng(cfg.seed);

  // Terminal state of the forward chain.
  TokenSequence u = TokenSequence::full_mask(n, s.K);
  if (s.cum_gamma(s.T) < 1.0 - 1e-6)
    for (int& tok : u.tokens) tok = rng.uniform_int(s.K);

  const bool guided = cfg.scale > 0.0 && !cond.null;
  for (int t = s.T; t >= 1; --t) {
    CategoricalState p = model_reverse(net, u, t, cond, s);
    if (guided) {
      const CategoricalState pu = model_reverse(net, u, t, ConditionEmbedding::none(), s);
      p = apply_guidance(p, pu, cfg.scale);
    }
    u = gumbel_sample(p, rng);
  }
  if (u.has_mask())
    throw NumericalError("generate: mask tokens survived to t=0; schedule violates the "
                         "terminal condition");
  return u;
}

MotionClip generate_motion(const std::vector<std::string>& text_tokens,
                           const PipelineBundle& bundle, const GuidanceConfig& cfg,
                           int token_count) {
  cfg.validate();
  ConditionEmbedding cond = ConditionEmbedding::none();
  if (!text_tokens.empty()) {
    if (!bundle.provider || !bundle.hsa)
      throw DataError("generate_motion: text given but no provider/aggregator in bundle");
    cond = aggregate(*bundle.hsa, bundle.provider->embed(text_tokens));
  }
  const NoiseSchedule s = build_schedule(cfg.steps, bundle.denoiser.K, bundle.schedule_profile);
  const TokenSequence u0 = generate(bundle.denoiser, cond, cfg, token_count, s);
  return decode_from_tokens(u0, bundle.vq, bundle.book);
}

}  // namespace mdd
