// SPDX-License-Identifier: Apache-2.0
#include "mdd/diffusion.hpp"

#include <cmath>

namespace mdd {

namespace {
constexpr double kProbFloor = 1e-30;

void check_t(const NoiseSchedule& s, int t, int lo) {
  if (t < lo || t > s.T)
    throw DataError("diffusion: step t=" + std::to_string(t) + " outside [" +
                    std::to_string(lo) + "," + std::to_string(s.T) + "]");
}
}  // namespace

void NoiseSchedule::validate() const {
  if (T < 1) throw DataError("NoiseSchedule: T < 1");
  if (K < 2) throw DataError("NoiseSchedule: K < 2");
  for (int i = 0; i < T; ++i) {
    const double a = alpha[i], b = beta[i], g = gamma[i];
    if (a < 0 || a > 1 || b < 0 || b > 1 || g < 0 || g > 1)
      throw DataError("NoiseSchedule: probability outside [0,1] at t=" + std::to_string(i + 1));
    if (std::abs(a + b + g - 1.0) > 1e-12)
      throw DataError("NoiseSchedule: alpha+beta+gamma != 1 at t=" + std::to_string(i + 1));
    if (i > 0) {
      if (bar_alpha[i] > bar_alpha[i - 1] + 1e-15)
        throw DataError("NoiseSchedule: bar_alpha not non-increasing");
      if (1.0 - bar_gamma[i] > 1.0 - bar_gamma[i - 1] + 1e-15)
        throw DataError("NoiseSchedule: residual non-mask mass not non-increasing");
    }
  }
  // Terminal condition per profile: fully masked vs fully uniform.
  if (profile == "mask-and-replace" && bar_gamma[T - 1] < 1.0 - 1e-6)
    throw DataError("NoiseSchedule: mask-and-replace chain does not end fully masked");
  if (profile == "uniform" && bar_alpha[T - 1] > 1e-6)
    throw DataError("NoiseSchedule: uniform chain does not end at the uniform distribution");
}

nlohmann::json NoiseSchedule::to_json() const {
  nlohmann::json j;
  j["T"] = T;
  j["K"] = K;
  j["profile"] = profile;
  j["alpha"] = std::vector<double>(alpha.data(), alpha.data() + T);
  j["beta"] = std::vector<double>(beta.data(), beta.data() + T);
  j["gamma"] = std::vector<double>(gamma.data(), gamma.data() + T);
  return j;
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
  NoiseSchedule s;
  s.T = j.at("T").get<int>();
  s.K = j.at("K").get<int>();
  s.profile = j.at("profile").get<std::string>();
  const auto a = j.at("alpha").get<std::vector<double>>();
  const auto b = j.at("beta").get<std::vector<double>>();
  const auto g = j.at("gamma").get<std::vector<double>>();
  if (static_cast<int>(a.size()) != s.T || static_cast<int>(b.size()) != s.T ||
      static_cast<int>(g.size()) != s.T)
    throw DataError("NoiseSchedule: per-step arrays must have length T");
  s.alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), s.T);
  s.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), s.T);
  s.gamma = Eigen::Map<const Eigen::VectorXd>(g.data(), s.T);
  s.bar_alpha.resize(s.T);
  s.bar_gamma.resize(s.T);
  double pa = 1.0, pg = 1.0;
  for (int i = 0; i < s.T; ++i) {
    pa *= s.alpha[i];
    pg *= 1.0 - s.gamma[i];
    s.bar_alpha[i] = pa;
    s.bar_gamma[i] = 1.0 - pg;
  }
  s.validate();
  return s;
}

NoiseSchedule build_schedule(int T, int K, const std::string& profile) {
  if (T < 1) throw DataError("build_schedule: T < 1");
  if (K < 2) throw DataError("build_schedule: K < 2");
  NoiseSchedule s;
  s.T = T;
  s.K = K;
  s.profile = profile;
  s.alpha.resize(T);
  s.beta.resize(T);
  s.gamma.resize(T);
  s.bar_alpha.resize(T);
  s.bar_gamma.resize(T);

  const double Td = static_cast<double>(T);
  if (profile == "mask-and-replace") {
    // Cumulative targets: mask mass t/T (reaching 1 at T) plus a small
    // uniform leak 0.1 * (t/T)(1 - t/T) * K/(K-1) shared over the codes.
    const double leak_coef = 0.1 * static_cast<double>(K) / static_cast<double>(K - 1);
    double prev_bar_alpha = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double x = static_cast<double>(t) / Td;
      const double bar_gamma_t = x;
      const double bar_alpha_t = (1.0 - x) * (1.0 - leak_coef * x);
      s.bar_alpha[t - 1] = bar_alpha_t;
      s.bar_gamma[t - 1] = bar_gamma_t;
      s.gamma[t - 1] = 1.0 / static_cast<double>(T - t + 1);
      s.alpha[t - 1] = prev_bar_alpha > 0.0 ? bar_alpha_t / prev_bar_alpha : 0.0;
      s.beta[t - 1] = 1.0 - s.alpha[t - 1] - s.gamma[t - 1];
      if (s.beta[t - 1] < 0.0 && s.beta[t - 1] > -1e-12) s.beta[t - 1] = 0.0;
      prev_bar_alpha = bar_alpha_t;
    }
  } else if (profile == "uniform") {
    // Pure uniform-resampling chain: bar_alpha_t = 1 - t/T, no mask moves.
    double prev_bar_alpha = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double bar_alpha_t = 1.0 - static_cast<double>(t) / Td;
      s.bar_alpha[t - 1] = bar_alpha_t;
      s.bar_gamma[t - 1] = 0.0;
      s.gamma[t - 1] = 0.0;
      s.alpha[t - 1] = prev_bar_alpha > 0.0 ? bar_alpha_t / prev_bar_alpha : 0.0;
      s.beta[t - 1] = 1.0 - s.alpha[t - 1];
      prev_bar_alpha = bar_alpha_t;
    }
  } else {
    throw DataError("build_schedule: unknown profile '" + profile + "'");
  }
  s.validate();
  return s;
}

Eigen::MatrixXd transition_matrix(const NoiseSchedule& s, int t) {
  check_t(s, t, 1);
  const int K = s.K;
  const double a = s.alpha[t - 1], b = s.beta[t - 1], g = s.gamma[t - 1];
  Eigen::MatrixXd Q = Eigen::MatrixXd::Constant(K + 1, K + 1, b / K);
  for (int u = 0; u < K; ++u) {
    Q(u, u) = a + b / K;
    Q(u, K) = g;
  }
  Q.row(K).setZero();
  Q(K, K) = 1.0;  // absorbing mask
  return Q;
}

TokenSequence forward_sample(const TokenSequence& u_prev, const NoiseSchedule& s, int t,
                             Rng& rng) {
  check_t(s, t, 1);
  u_prev.validate();
  if (u_prev.codebook_size != s.K)
    throw DataError("forward_sample: sequence K does not match schedule K");
  const double a = s.alpha[t - 1], b = s.beta[t - 1], g = s.gamma[t - 1];
  TokenSequence out = u_prev;
  for (int& tok : out.tokens) {
    if (tok == s.mask_id()) continue;  // absorbing
    const double u = rng.uniform();
    if (u < a) continue;                          // keep
    if (u < a + b) tok = rng.uniform_int(s.K);    // uniform replace (may re-hit)
    else if (g > 0.0) tok = s.mask_id();          // mask in
    else tok = rng.uniform_int(s.K);              // gamma == 0: remaining mass is uniform
  }
  return out;
}

CategoricalState marginal(const TokenSequence& u0, const NoiseSchedule& s, int t) {
  check_t(s, t, 0);
  u0.validate();
  if (u0.codebook_size != s.K) throw DataError("marginal: sequence K does not match schedule K");
  if (u0.has_mask()) throw DataError("marginal: u0 must be mask-free");
  const int n = u0.length();
  CategoricalState st;
  st.probs = Eigen::MatrixXd::Zero(n, s.K + 1);
  if (t == 0) {
    for (int i = 0; i < n; ++i) st.probs(i, u0.tokens[i]) = 1.0;
    return st;
  }
  const double keep = s.cum_alpha(t);
  const double leak = s.cum_leak_each(t);
  const double mask = s.cum_gamma(t);
  for (int i = 0; i < n; ++i) {
    st.probs.row(i).head(s.K).setConstant(leak);
    st.probs(i, u0.tokens[i]) += keep;
    st.probs(i, s.K) = mask;
  }
  return st;
}

TokenSequence sample_marginal(const TokenSequence& u0, const NoiseSchedule& s, int t, Rng& rng) {
  check_t(s, t, 0);
  if (t == 0) return u0;
  const double keep = s.cum_alpha(t);
  const double mask = s.cum_gamma(t);
  TokenSequence out = u0;
  for (int& tok : out.tokens) {
    const double u = rng.uniform();
    if (u < keep) continue;
    if (u < keep + mask) tok = s.mask_id();
    else tok = rng.uniform_int(s.K);
  }
  return out;
}

CategoricalState posterior(const TokenSequence& u_t, const TokenSequence& u0,
                           const NoiseSchedule& s, int t) {
  check_t(s, t, 1);
  u_t.validate();
  u0.validate();
  if (u_t.length() != u0.length()) throw DataError("posterior: length mismatch");
  if (u_t.codebook_size != s.K || u0.codebook_size != s.K)
    throw DataError("posterior: sequence K does not match schedule K");
  if (u0.has_mask()) throw DataError("posterior: u0 must be mask-free");

  const int n = u_t.length();
  const int K = s.K;
  const double a = s.alpha[t - 1], b = s.beta[t - 1], g = s.gamma[t - 1];
  const double keep_prev = s.cum_alpha(t - 1);
  const double leak_prev = s.cum_leak_each(t - 1);
  const double mask_prev = s.cum_gamma(t - 1);

  CategoricalState st;
  st.probs.resize(n, K + 1);
  Eigen::VectorXd row(K + 1);
  for (int i = 0; i < n; ++i) {
    const int ut = u_t.tokens[i];
    const int x0 = u0.tokens[i];
    // q(u_{t-1} = k | u0), the closed-form marginal at step t-1.
    row.head(K).setConstant(leak_prev);
    row[x0] += keep_prev;
    row[K] = mask_prev;
    // Times q(u_t | u_{t-1} = k).
    for (int k = 0; k < K; ++k) {
      const double step = (ut == K) ? g : (ut == k ? a + b / K : b / K);
      row[k] *= step;
    }
    row[K] *= (ut == K) ? 1.0 : 0.0;
    const double Z = row.sum();
    if (Z <= 0.0)
      throw NumericalError("posterior: impossible (u_t, u0) pair under schedule at position " +
                           std::to_string(i));
    st.probs.row(i) = row / Z;
  }
  return st;
}

double kl_divergence_row(const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
  double kl = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    if (q[k] <= 0.0) continue;
    kl += q[k] * (std::log(q[k]) - std::log(std::max(p[k], kProbFloor)));
  }
  return kl;
}

double vlb_loss(const CategoricalState& model_posterior, const TokenSequence& u_t,
                const TokenSequence& u0, const NoiseSchedule& s, int t) {
  check_t(s, t, 0);
  u0.validate();
  const int n = u0.length();

  if (t == 0) {
    // Reconstruction term: -log p(u0) under the model distribution.
    if (model_posterior.length() != n) throw DataError("vlb_loss: shape mismatch");
    double nll = 0.0;
    for (int i = 0; i < n; ++i)
      nll -= std::log(std::max(model_posterior.probs(i, u0.tokens[i]), kProbFloor));
    return nll;
  }

  if (t == s.T) {
    // Prior term KL(q(u_T | u0) || p(u_T)); p(u_T) is the chain's terminal
    // distribution: point mass on mask (mask-and-replace) or uniform over
    // the K codes (uniform profile).
    const CategoricalState qT = marginal(u0, s, s.T);
    Eigen::VectorXd prior = Eigen::VectorXd::Zero(s.K + 1);
    if (s.profile == "uniform")
      prior.head(s.K).setConstant(1.0 / s.K);
    else
      prior[s.K] = 1.0;
    double kl = 0.0;
    for (int i = 0; i < n; ++i) kl += kl_divergence_row(qT.probs.row(i), prior);
    return kl;
  }

  const CategoricalState q = posterior(u_t, u0, s, t);
  if (model_posterior.length() != n || model_posterior.categories() != q.categories())
    throw DataError("vlb_loss: model posterior shape mismatch");
  double kl = 0.0;
  for (int i = 0; i < n; ++i)
    kl += kl_divergence_row(q.probs.row(i), model_posterior.probs.row(i));
  return kl;
}

}  // namespace mdd
