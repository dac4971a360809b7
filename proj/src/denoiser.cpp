// SPDX-License-Identifier: Apache-2.0
#include "mdd/denoiser.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "mdd/binio.hpp"

namespace mdd {

namespace {

constexpr double kProbFloor = 1e-30;

// Centered width-3 windows with zero padding at the sequence ends.
Eigen::MatrixXd gather3(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), h = x.cols();
  Eigen::MatrixXd win = Eigen::MatrixXd::Zero(n, 3 * h);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i > 0) win.block(i, 0, 1, h) = x.row(i - 1);
    win.block(i, h, 1, h) = x.row(i);
    if (i + 1 < n) win.block(i, 2 * h, 1, h) = x.row(i + 1);
  }
  return win;
}

Eigen::MatrixXd scatter3(const Eigen::MatrixXd& dwin, Eigen::Index h) {
  const Eigen::Index n = dwin.rows();
  Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(n, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i > 0) dx.row(i - 1) += dwin.block(i, 0, 1, h);
    dx.row(i) += dwin.block(i, h, 1, h);
    if (i + 1 < n) dx.row(i + 1) += dwin.block(i, 2 * h, 1, h);
  }
  return dx;
}

// Marginal likelihood q(u_t = ut | u0 = x0) from the cumulative masses.
inline double marginal_prob(const NoiseSchedule& s, int t, int ut, int x0) {
  if (ut == s.K) return s.cum_gamma(t);
  const double leak = s.cum_leak_each(t);
  return ut == x0 ? s.cum_alpha(t) + leak : leak;
}

// Single-step likelihood q(u_t = ut | u_{t-1} = k).
inline double step_prob(const NoiseSchedule& s, int t, int ut, int k) {
  const double a = s.alpha[t - 1], b = s.beta[t - 1], g = s.gamma[t - 1];
  if (k == s.K) return ut == s.K ? 1.0 : 0.0;
  if (ut == s.K) return g;
  return ut == k ? a + b / s.K : b / s.K;
}

struct ForwardCache {
  Eigen::MatrixXd x0_input;               // assembled input, n x h
  std::vector<Eigen::MatrixXd> block_in;  // x entering each block
  std::vector<Eigen::MatrixXd> win;       // gathered windows
  std::vector<Eigen::MatrixXd> act;       // tanh(mix(win))
  Eigen::MatrixXd final_x;
  Eigen::MatrixXd px0;  // n x K
};

ForwardCache forward_px0(const ToyDenoiser& net, const TokenSequence& u_t, int t,
                         const Eigen::VectorXd* cond /* nullptr for null condition */) {
  const int n = u_t.length();
  ForwardCache fc;
  fc.x0_input.resize(n, net.hidden);
  const Eigen::VectorXd te = net.time_embedding(t);
  Eigen::VectorXd ce = Eigen::VectorXd::Zero(net.hidden);
  if (cond) ce = net.cond_proj.forward(cond->transpose()).row(0).transpose();
  for (int i = 0; i < n; ++i)
    fc.x0_input.row(i) =
        net.token_embedding.value.row(u_t.tokens[i]) + te.transpose() + ce.transpose();

  Eigen::MatrixXd x = fc.x0_input;
  for (const auto& block : net.blocks) {
    fc.block_in.push_back(x);
    Eigen::MatrixXd win = gather3(x);
    Eigen::MatrixXd act = tanh_forward(block.mix.forward(win));
    x = x + block.out.forward(act);
    fc.win.push_back(std::move(win));
    fc.act.push_back(std::move(act));
  }
  fc.final_x = x;
  fc.px0 = softmax_rows(net.head.forward(x));
  return fc;
}

// Backward from dL/dpx0 into all network parameters. Returns dL/dcond (zero
// sized when cond was null).
Eigen::VectorXd backward_px0(ToyDenoiser& net, const TokenSequence& u_t,
                             const Eigen::VectorXd* cond, const ForwardCache& fc,
                             const Eigen::MatrixXd& dpx0) {
  const Eigen::MatrixXd dlogits = softmax_backward(fc.px0, dpx0);
  Eigen::MatrixXd dx = net.head.backward(fc.final_x, dlogits);
  for (int b = static_cast<int>(net.blocks.size()) - 1; b >= 0; --b) {
    auto& block = net.blocks[b];
    const Eigen::MatrixXd dact = block.out.backward(fc.act[b], dx);
    const Eigen::MatrixXd dmix = tanh_backward(fc.act[b], dact);
    const Eigen::MatrixXd dwin = block.mix.backward(fc.win[b], dmix);
    dx += scatter3(dwin, net.hidden);
  }
  for (int i = 0; i < u_t.length(); ++i)
    net.token_embedding.grad.row(u_t.tokens[i]) += dx.row(i);
  if (!cond) return Eigen::VectorXd();
  const Eigen::MatrixXd dce = dx.colwise().sum();  // broadcast add -> sum
  const Eigen::MatrixXd dc = net.cond_proj.backward(cond->transpose(), dce);
  return dc.row(0).transpose();
}

}  // namespace

ToyDenoiser::ToyDenoiser(int K_, int hidden_, int cond_dim_, int T_, int n_blocks, Rng& rng)
    : K(K_), hidden(hidden_), cond_dim(cond_dim_), T(T_) {
  if (hidden % 2 != 0) throw DataError("ToyDenoiser: hidden width must be even");
  token_embedding = Param("den.tok", K + 1, hidden);
  token_embedding.init_normal(rng, 0.1);
  cond_proj = Linear("den.cond", cond_dim, hidden);
  cond_proj.init(rng, 1.0 / std::sqrt(static_cast<double>(cond_dim)));
  for (int b = 0; b < n_blocks; ++b) {
    Block blk;
    blk.mix = Linear("den.b" + std::to_string(b) + ".mix", 3 * hidden, 2 * hidden);
    blk.out = Linear("den.b" + std::to_string(b) + ".out", 2 * hidden, hidden);
    blk.mix.init(rng, 1.0 / std::sqrt(3.0 * hidden));
    blk.out.init(rng, 1.0 / std::sqrt(2.0 * hidden));
    blocks.push_back(std::move(blk));
  }
  head = Linear("den.head", hidden, K);  // zero init: uniform p(u0) before training
}

std::vector<Param*> ToyDenoiser::params() {
  std::vector<Param*> out{&token_embedding};
  for (Param* p : cond_proj.params()) out.push_back(p);
  for (auto& b : blocks) {
    for (Param* p : b.mix.params()) out.push_back(p);
    for (Param* p : b.out.params()) out.push_back(p);
  }
  for (Param* p : head.params()) out.push_back(p);
  return out;
}

Eigen::VectorXd ToyDenoiser::time_embedding(int t) const {
  Eigen::VectorXd e(hidden);
  const int half = hidden / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * (2.0 * i / hidden));
    e[2 * i] = std::sin(t * freq);
    e[2 * i + 1] = std::cos(t * freq);
  }
  return e;
}

CategoricalState predict_x0(const ToyDenoiser& net, const TokenSequence& u_t, int t,
                            const ConditionEmbedding& c) {
  u_t.validate();
  if (u_t.codebook_size != net.K) throw DataError("predict_x0: K mismatch");
  if (t < 1 || t > net.T) throw DataError("predict_x0: t outside [1,T]");
  c.validate();
  const Eigen::VectorXd* cond = (!c.null) ? &c.c : nullptr;
  if (cond && c.c.size() != net.cond_dim) throw DataError("predict_x0: cond_dim mismatch");
  CategoricalState st;
  st.probs = forward_px0(net, u_t, t, cond).px0;
  return st;
}

CategoricalState compose_reverse(const CategoricalState& px0, const TokenSequence& u_t, int t,
                                 const NoiseSchedule& s) {
  if (px0.categories() != s.K || px0.length() != u_t.length())
    throw DataError("compose_reverse: px0 shape mismatch");
  const int n = u_t.length();
  const int K = s.K;
  const double keep_prev = s.cum_alpha(t - 1);
  const double leak_prev = s.cum_leak_each(t - 1);
  const double mask_prev = s.cum_gamma(t - 1);

  CategoricalState out;
  out.probs.resize(n, K + 1);
  for (int i = 0; i < n; ++i) {
    const int ut = u_t.tokens[i];
    // Mixture over x0 of the per-x0 posterior rows; grouped by the shared
    // structure of the closed-form marginals so each row costs O(K).
    double W = 0.0;
    Eigen::VectorXd w(K);
    for (int x0 = 0; x0 < K; ++x0) {
      const double Z = marginal_prob(s, t, ut, x0);
      w[x0] = px0.probs(i, x0) / std::max(Z, kProbFloor);
      W += w[x0];
    }
    if (!std::isfinite(W))
      throw NumericalError("model_reverse: u_t incompatible with schedule at position " +
                           std::to_string(i));
    for (int k = 0; k < K; ++k)
      out.probs(i, k) = step_prob(s, t, ut, k) * (leak_prev * W + keep_prev * w[k]);
    out.probs(i, K) = (ut == K ? 1.0 : 0.0) * mask_prev * W;
  }
  return out;
}

CategoricalState model_reverse(const ToyDenoiser& net, const TokenSequence& u_t, int t,
                               const ConditionEmbedding& c, const NoiseSchedule& s) {
  if (s.K != net.K) throw DataError("model_reverse: schedule K mismatch");
  return compose_reverse(predict_x0(net, u_t, t, c), u_t, t, s);
}

DiffusionTrainer::DiffusionTrainer(ToyDenoiser net, const DenoiserTrainConfig& config)
    : net_(std::move(net)), config_(config) {
  opt_ = SgdMomentum{config_.lr, config_.momentum, config_.weight_decay};
  all_params_ = net_.params();
}

DiffusionTrainer::DiffusionTrainer(ToyDenoiser net, AggregatorParams hsa,
                                   const DenoiserTrainConfig& config)
    : net_(std::move(net)), hsa_(std::move(hsa)), config_(config) {
  opt_ = SgdMomentum{config_.lr, config_.momentum, config_.weight_decay};
  all_params_ = net_.params();
  for (Param* p : hsa_->params()) all_params_.push_back(p);
}

TrainLossBreakdown DiffusionTrainer::example_loss_and_grad(const TrainingExample& ex,
                                                           const TokenSequence& u_t, int t,
                                                           bool drop_condition,
                                                           const NoiseSchedule& s) {
  ex.u0.validate();
  if (ex.u0.has_mask()) throw DataError("train: u0 must be mask-free");
  const int n = ex.u0.length();
  const int K = net_.K;

  // Resolve the condition. Raw layer features route gradients into the
  // aggregator; a precomputed embedding is treated as fixed.
  std::optional<AggregateTrace> hsa_trace;
  Eigen::VectorXd cond_value;
  const Eigen::VectorXd* cond = nullptr;
  if (!drop_condition) {
    if (ex.condition_features && hsa_) {
      hsa_trace = aggregate_forward(*hsa_, *ex.condition_features);
      cond_value = hsa_trace->c;
      cond = &cond_value;
    } else if (ex.condition && !ex.condition->null) {
      cond_value = ex.condition->c;
      cond = &cond_value;
    }
  }

  ForwardCache fc = forward_px0(net_, u_t, t, cond);
  Eigen::MatrixXd dpx0 = Eigen::MatrixXd::Zero(n, K);
  TrainLossBreakdown breakdown;

  // Variational term. At t = T it is the constant prior KL: reported, no
  // parameter gradient.
  double vlb;
  if (t == s.T) {
    vlb = vlb_loss(CategoricalState{}, u_t, ex.u0, s, t);
  } else {
    const CategoricalState q = posterior(u_t, ex.u0, s, t);
    const double keep_prev = s.cum_alpha(t - 1);
    const double leak_prev = s.cum_leak_each(t - 1);
    const double mask_prev = s.cum_gamma(t - 1);
    vlb = 0.0;
    for (int i = 0; i < n; ++i) {
      const int ut = u_t.tokens[i];
      double W = 0.0;
      Eigen::VectorXd w(K), Z(K);
      for (int x0 = 0; x0 < K; ++x0) {
        Z[x0] = std::max(marginal_prob(s, t, ut, x0), kProbFloor);
        w[x0] = fc.px0(i, x0) / Z[x0];
        W += w[x0];
      }
      Eigen::VectorXd p(K + 1);
      for (int k = 0; k < K; ++k)
        p[k] = step_prob(s, t, ut, k) * (leak_prev * W + keep_prev * w[k]);
      p[K] = (ut == K ? 1.0 : 0.0) * mask_prev * W;

      vlb += kl_divergence_row(q.probs.row(i), p);

      // dL/dp then dL/dpx0 through the mixture structure.
      Eigen::VectorXd dp = Eigen::VectorXd::Zero(K + 1);
      for (int k = 0; k <= K; ++k)
        if (q.probs(i, k) > 0.0 && p[k] > kProbFloor) dp[k] = -q.probs(i, k) / p[k];
      double S1 = 0.0;
      for (int k = 0; k < K; ++k) S1 += dp[k] * step_prob(s, t, ut, k);
      const double Smask = dp[K] * (ut == K ? 1.0 : 0.0);
      for (int x0 = 0; x0 < K; ++x0)
        dpx0(i, x0) += (leak_prev * S1 + keep_prev * dp[x0] * step_prob(s, t, ut, x0) +
                        mask_prev * Smask) /
                       Z[x0];
    }
  }
  breakdown.kl = vlb;

  // Auxiliary clean-token cross entropy, active at every t.
  if (config_.lambda_aux > 0.0) {
    for (int i = 0; i < n; ++i) {
      const double p = fc.px0(i, ex.u0.tokens[i]);
      breakdown.aux -= config_.lambda_aux * std::log(std::max(p, kProbFloor));
      if (p > kProbFloor) dpx0(i, ex.u0.tokens[i]) -= config_.lambda_aux / p;
    }
  }
  breakdown.total = breakdown.kl + breakdown.aux;

  const Eigen::VectorXd dc = backward_px0(net_, u_t, cond, fc, dpx0);
  if (hsa_trace && dc.size() > 0) aggregate_backward(*hsa_, *hsa_trace, dc);
  return breakdown;
}

TrainLossBreakdown DiffusionTrainer::train_step(const std::vector<TrainingExample>& batch,
                                                const NoiseSchedule& s, Rng& rng) {
  if (batch.empty()) throw DataError("train_step: empty batch");
  for (Param* p : all_params_) p->zero_grad();

  TrainLossBreakdown out;
  for (const TrainingExample& ex : batch) {
    const auto it = config_.sigma_map.find(ex.source);
    if (it == config_.sigma_map.end())
      throw DataError("train_step: no dropout probability for source '" + ex.source + "'");
    const int t = 1 + rng.uniform_int(s.T);
    const TokenSequence u_t = sample_marginal(ex.u0, s, t, rng);
    const bool drop = rng.uniform() < it->second;
    const TrainLossBreakdown loss = example_loss_and_grad(ex, u_t, t, drop, s);
    out.total += loss.total;
    out.kl += loss.kl;
    out.aux += loss.aux;
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.total *= scale;
  out.kl *= scale;
  out.aux *= scale;
  if (!std::isfinite(out.total)) throw NumericalError("train_step: loss diverged");
  for (Param* p : all_params_) p->grad *= scale;
  if (config_.total_steps > 1) {
    const double progress =
        std::min(1.0, static_cast<double>(steps_taken_) / (config_.total_steps - 1));
    opt_.lr = config_.lr * (1.0 - (1.0 - config_.lr_final_factor) * progress);
  }
  ++steps_taken_;
  opt_.step(all_params_);
  return out;
}

double gradient_check(DiffusionTrainer& trainer, const TrainingExample& ex,
                      const TokenSequence& u_t, int t, bool drop_condition,
                      const NoiseSchedule& s) {
  std::vector<Param*> params = trainer.net().params();
  if (trainer.has_hsa())
    for (Param* p : trainer.hsa().params()) params.push_back(p);

  for (Param* p : params) p->zero_grad();
  trainer.example_loss_and_grad(ex, u_t, t, drop_condition, s);
  std::vector<Eigen::MatrixXd> analytic;
  for (Param* p : params) analytic.push_back(p->grad);

  const double h = 1e-4;
  double max_rel = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param* p = params[pi];
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const double saved = p->value(r, c);
        p->value(r, c) = saved + h;
        const double lp = trainer.example_loss_and_grad(ex, u_t, t, drop_condition, s).total;
        p->value(r, c) = saved - h;
        const double lm = trainer.example_loss_and_grad(ex, u_t, t, drop_condition, s).total;
        p->value(r, c) = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double ga = analytic[pi](r, c);
        const double denom = std::max({std::abs(ga), std::abs(numeric), 1e-2});
        max_rel = std::max(max_rel, std::abs(ga - numeric) / denom);
      }
    }
  }
  return max_rel;
}

namespace {

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> checkpoint_mats(
    ToyDenoiser& net, AggregatorParams* hsa) {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> mats;
  for (Param* p : net.params()) mats.emplace_back(p->name, &p->value);
  if (hsa)
    for (Param* p : hsa->params()) mats.emplace_back(p->name, &p->value);
  return mats;
}

}  // namespace

void save_denoiser_checkpoint(const DenoiserCheckpoint& ckpt, const std::string& path) {
  DenoiserCheckpoint copy = ckpt;  // params() is non-const
  const auto mats = checkpoint_mats(copy.net, copy.hsa ? &*copy.hsa : nullptr);

  nlohmann::json header;
  header["format"] = "MDN1";
  header["h"] = ckpt.net.hidden;
  header["K"] = ckpt.net.K;
  header["T"] = ckpt.net.T;
  header["cond_dim"] = ckpt.net.cond_dim;
  header["blocks"] = static_cast<int>(ckpt.net.blocks.size());
  header["schedule_profile"] = ckpt.schedule_profile;
  header["provider"] = {{"layers", ckpt.provider_layers},
                        {"widths", ckpt.provider_widths},
                        {"seed", ckpt.provider_seed}};
  if (ckpt.hsa) {
    std::vector<int> widths;
    for (size_t i = 0; i < ckpt.hsa->layer_set.size(); ++i)
      widths.push_back(static_cast<int>(ckpt.hsa->mlps[i].in.W.value.cols()));
    header["hsa"] = {{"layers", ckpt.hsa->layer_set},
                     {"widths", widths},
                     {"cond_dim", ckpt.hsa->cond_dim}};
  }
  uint64_t offset = 0;
  nlohmann::json blobs = nlohmann::json::array();
  for (const auto& [name, m] : mats) {
    blobs.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}, {"offset", offset}});
    offset += static_cast<uint64_t>(m->size()) * 4;
  }
  header["blobs"] = blobs;

  BinaryWriter w(path);
  w.magic("MDN1");
  const std::string h = header.dump();
  w.u32(static_cast<uint32_t>(h.size()));
  w.bytes(h);
  for (const auto& [name, m] : mats) w.f32_matrix(*m);
  w.close();
}

DenoiserCheckpoint load_denoiser_checkpoint(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("MDN1");
  const uint32_t hlen = r.u32();
  const nlohmann::json header = nlohmann::json::parse(r.bytes(hlen));
  if (header.at("format") != "MDN1") throw DataError(path + ": wrong checkpoint kind");

  DenoiserCheckpoint ckpt;
  Rng rng(0);
  ckpt.net = ToyDenoiser(header.at("K").get<int>(), header.at("h").get<int>(),
                         header.at("cond_dim").get<int>(), header.at("T").get<int>(),
                         header.at("blocks").get<int>(), rng);
  ckpt.schedule_profile = header.at("schedule_profile").get<std::string>();
  ckpt.provider_layers = header.at("provider").at("layers").get<std::vector<int>>();
  ckpt.provider_widths = header.at("provider").at("widths").get<std::vector<int>>();
  ckpt.provider_seed = header.at("provider").at("seed").get<uint64_t>();
  if (header.contains("hsa")) {
    ckpt.hsa = AggregatorParams::init(header.at("hsa").at("layers").get<std::vector<int>>(),
                                      header.at("hsa").at("widths").get<std::vector<int>>(),
                                      header.at("hsa").at("cond_dim").get<int>(), rng);
  }

  std::map<std::string, Eigen::MatrixXd> blobs;
  for (const auto& b : header.at("blobs"))
    blobs[b.at("name").get<std::string>()] =
        r.f32_matrix(b.at("rows").get<Eigen::Index>(), b.at("cols").get<Eigen::Index>());

  auto restore = [&](std::vector<Param*> params) {
    for (Param* p : params) {
      auto it = blobs.find(p->name);
      if (it == blobs.end()) throw DataError(path + ": missing blob " + p->name);
      if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
        throw DataError(path + ": blob shape mismatch for " + p->name);
      p->value = it->second;
    }
  };
  restore(ckpt.net.params());
  if (ckpt.hsa) restore(ckpt.hsa->params());
  return ckpt;
}

}  // namespace mdd
