// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mdd/rng.hpp"
#include "mdd/types.hpp"

namespace mdd {

// Forward corruption chain over K codes plus the absorbing mask category.
// Per step t (1-based), a non-mask token keeps its value with probability
// alpha_t + beta_t/K, moves to each other code with probability beta_t/K and
// becomes mask with probability gamma_t = 1 - alpha_t - beta_t. The mask
// state is absorbing. The "uniform" profile has gamma == 0, i.e. the pure
// uniform-resampling chain.
struct NoiseSchedule {
  int T = 0;
  int K = 0;
  std::string profile;
  Eigen::VectorXd alpha;  // size T, index t-1
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd bar_alpha;  // cumulative products, size T
  Eigen::VectorXd bar_gamma;  // cumulative mask mass: 1 - prod(1 - gamma_i)

  int mask_id() const { return K; }

  // Cumulatives with the t = 0 convention (clean data): cum_alpha(0) = 1,
  // cum_gamma(0) = 0.
  double cum_alpha(int t) const { return t == 0 ? 1.0 : bar_alpha[t - 1]; }
  double cum_gamma(int t) const { return t == 0 ? 0.0 : bar_gamma[t - 1]; }
  // Per-code uniform-leak mass accumulated up to step t.
  double cum_leak_each(int t) const {
    return (1.0 - cum_alpha(t) - cum_gamma(t)) / static_cast<double>(K);
  }

  void validate() const;

  nlohmann::json to_json() const;
  static NoiseSchedule from_json(const nlohmann::json& j);
};

// Profiles: "mask-and-replace" (default; fully masked at T) and "uniform"
// (gamma == 0; fully uniform at T).
NoiseSchedule build_schedule(int T, int K, const std::string& profile = "mask-and-replace");

// (K+1) x (K+1) row-stochastic matrix Q_t: row u holds q(u_t = k | u_{t-1} = u).
Eigen::MatrixXd transition_matrix(const NoiseSchedule& s, int t);

// One forward step: each position resampled independently from its row of Q_t.
TokenSequence forward_sample(const TokenSequence& u_prev, const NoiseSchedule& s, int t, Rng& rng);

// Closed-form marginal q(u_t | u_0) per position. t = 0 returns one-hot(u0).
CategoricalState marginal(const TokenSequence& u0, const NoiseSchedule& s, int t);

// Sampled corruption straight to step t: u_t ~ q(u_t | u_0).
TokenSequence sample_marginal(const TokenSequence& u0, const NoiseSchedule& s, int t, Rng& rng);

// Per-position Bayes posterior q(u_{t-1} | u_t, u_0) for t >= 1.
CategoricalState posterior(const TokenSequence& u_t, const TokenSequence& u0,
                           const NoiseSchedule& s, int t);

// Variational-bound term at step t, summed over positions:
//   t = 0      : negative log-likelihood of u0 under the model distribution
//   1 <= t < T : KL(q(u_{t-1} | u_t, u0) || model_posterior)
//   t = T      : prior term KL(q(u_T | u0) || p(u_T)), a constant reported
//                for completeness (0 when the chain terminates fully masked).
double vlb_loss(const CategoricalState& model_posterior, const TokenSequence& u_t,
                const TokenSequence& u0, const NoiseSchedule& s, int t);

// KL(q || p) over one categorical row with p floored at 1e-30.
double kl_divergence_row(const Eigen::VectorXd& q, const Eigen::VectorXd& p);

}  // namespace mdd
