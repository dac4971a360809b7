// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mdd/denoiser.hpp"
#include "mdd/synth.hpp"

using namespace mdd;

namespace {

TokenSequence seq(std::vector<int> tokens, int K) {
  TokenSequence u;
  u.tokens = std::move(tokens);
  u.codebook_size = K;
  return u;
}

ConditionEmbedding cond_of(const Eigen::VectorXd& v) {
  ConditionEmbedding c;
  c.c = v;
  return c;
}

TrainingExample example_with_features(const TokenSequence& u0, const AggregatorParams& hsa,
                                      Rng& rng) {
  TrainingExample ex;
  ex.u0 = u0;
  LayerFeatureSet f;
  for (size_t i = 0; i < hsa.layer_set.size(); ++i) {
    Eigen::VectorXd v(hsa.mlps[i].in.W.value.cols());
    for (int c = 0; c < v.size(); ++c) v[c] = rng.normal();
    f.features[hsa.layer_set[i]] = v;
  }
  ex.condition_features = f;
  return ex;
}

}  // namespace

TEST_CASE("untrained denoiser with a zero head predicts uniform rows") {
  Rng rng(1);
  const ToyDenoiser net(6, 16, 4, 5, 2, rng);  // head is zero-initialized
  const TokenSequence u = seq({0, 6, 3}, 6);
  const CategoricalState px0 = predict_x0(net, u, 2, ConditionEmbedding::none());
  CHECK(px0.categories() == 6);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 6; ++k)
      CHECK(px0.probs(i, k) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("predict_x0 is deterministic and validates t") {
  Rng rng(2);
  ToyDenoiser net(5, 16, 4, 4, 2, rng);
  net.head.W.init_normal(rng, 0.3);
  const TokenSequence u = seq({1, 4, 0, 5}, 5);
  const ConditionEmbedding c = cond_of(Eigen::VectorXd::LinSpaced(4, -1.0, 1.0));
  const CategoricalState a = predict_x0(net, u, 3, c);
  const CategoricalState b = predict_x0(net, u, 3, c);
  CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() == 0.0);
  a.validate();
  CHECK_THROWS_AS(predict_x0(net, u, 0, c), DataError);
  CHECK_THROWS_AS(predict_x0(net, u, 5, c), DataError);
}

TEST_CASE("compose_reverse with a point-mass x0 prediction equals the true posterior") {
  const int K = 4, T = 3;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  const TokenSequence u0 = seq({2, 0, 3}, K);
  Rng chain(7);
  for (int t = 1; t <= T; ++t) {
    const TokenSequence ut = sample_marginal(u0, s, t, chain);
    CategoricalState px0;
    px0.probs = Eigen::MatrixXd::Zero(ut.length(), K);
    for (int i = 0; i < ut.length(); ++i) px0.probs(i, u0.tokens[i]) = 1.0;
    const CategoricalState got = compose_reverse(px0, ut, t, s);
    const CategoricalState post = posterior(ut, u0, s, t);
    for (int i = 0; i < ut.length(); ++i)
      for (int k = 0; k <= K; ++k)
        CHECK(got.probs(i, k) == doctest::Approx(post.probs(i, k)).epsilon(1e-12));
  }
}

TEST_CASE("model_reverse matches the direct mixture oracle within 1e-12") {
  Rng rng(5);
  const int K = 3, T = 2;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  ToyDenoiser net(K, 16, 4, T, 2, rng);
  net.head.W.init_normal(rng, 0.5);
  net.head.b.value.col(0) = Eigen::VectorXd::LinSpaced(K, -0.2, 0.2);
  const ConditionEmbedding c = cond_of(Eigen::VectorXd::LinSpaced(4, 0.0, 1.0));

  Rng chain(11);
  const TokenSequence u0 = seq({1, 2, 0, 1}, K);
  for (int t = 1; t <= T; ++t) {
    const TokenSequence ut = sample_marginal(u0, s, t, chain);
    const CategoricalState px0 = predict_x0(net, ut, t, c);
    const CategoricalState got = model_reverse(net, ut, t, c, s);
    for (int i = 0; i < ut.length(); ++i) {
      Eigen::VectorXd mix = Eigen::VectorXd::Zero(K + 1);
      for (int x0 = 0; x0 < K; ++x0) {
        const CategoricalState p1 = posterior(seq({ut.tokens[i]}, K), seq({x0}, K), s, t);
        mix += px0.probs(i, x0) * p1.probs.row(0).transpose();
      }
      for (int k = 0; k <= K; ++k)
        CHECK(got.probs(i, k) == doctest::Approx(mix[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("model_reverse rows sum to 1 within 1e-9 on random instances") {
  Rng rng(7);
  const int K = 8, T = 6;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  ToyDenoiser net(K, 16, 6, T, 2, rng);
  net.head.W.init_normal(rng, 0.4);
  Rng chain(13);
  const ConditionEmbedding c = cond_of(Eigen::VectorXd::Ones(6));
  for (int trial = 0; trial < 20; ++trial) {
    TokenSequence u0;
    u0.codebook_size = K;
    for (int i = 0; i < 10; ++i) u0.tokens.push_back(chain.uniform_int(K));
    const int t = 1 + chain.uniform_int(T);
    const TokenSequence ut = sample_marginal(u0, s, t, chain);
    const CategoricalState p = model_reverse(net, ut, t, c, s);
    for (int i = 0; i < p.length(); ++i)
      CHECK(p.probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("condition dropout rate stays within 3-sigma of sigma") {
  Rng rng(17);
  const double sigma = 0.3;
  const int N = 10000;
  int dropped = 0;
  for (int i = 0; i < N; ++i) dropped += rng.uniform() < sigma ? 1 : 0;
  const double rate = static_cast<double>(dropped) / N;
  const double bound = 3.0 * std::sqrt(sigma * (1.0 - sigma) / N);
  CHECK(std::abs(rate - sigma) <= bound);
}

TEST_CASE("train_step with sigma=1 always trains unconditionally") {
  Rng rng(19);
  const int K = 4, T = 3;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  ToyDenoiser net(K, 16, 4, T, 1, rng);
  AggregatorParams hsa = AggregatorParams::init({7}, {6}, 4, rng);
  DenoiserTrainConfig cfg;
  cfg.sigma_map = {{"curated", 1.0}, {"wild", 1.0}};
  DiffusionTrainer trainer(std::move(net), std::move(hsa), cfg);

  Rng data_rng(23);
  std::vector<TrainingExample> batch;
  for (int i = 0; i < 4; ++i)
    batch.push_back(example_with_features(seq({0, 1, 2, 3}, K), trainer.hsa(), data_rng));

  // With every condition dropped the HSA parameters never receive gradient
  // (decoupled weight decay still moves their values).
  Rng step_rng(29);
  trainer.train_step(batch, s, step_rng);
  double hsa_grad = 0.0;
  for (Param* p : trainer.hsa().params()) hsa_grad += p->grad.cwiseAbs().sum();
  CHECK(hsa_grad == 0.0);
  double net_grad = 0.0;
  for (Param* p : trainer.net().params()) net_grad += p->grad.cwiseAbs().sum();
  CHECK(net_grad > 0.0);  // the unconditional path still trains
}

TEST_CASE("train_step loss sequence is deterministic per seed") {
  Rng rng(31);
  const int K = 5, T = 4;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  Rng data_rng(37);

  auto run = [&](uint64_t sd) {
    Rng init(41);
    ToyDenoiser net(K, 16, 4, T, 1, init);
    AggregatorParams hsa = AggregatorParams::init({7}, {6}, 4, init);
    DiffusionTrainer trainer(std::move(net), std::move(hsa), DenoiserTrainConfig{});
    Rng d(sd + 100);
    std::vector<TrainingExample> batch;
    for (int i = 0; i < 3; ++i)
      batch.push_back(example_with_features(seq({0, 2, 4, 1}, K), trainer.hsa(), d));
    Rng step(sd);
    std::vector<double> losses;
    for (int step_i = 0; step_i < 10; ++step_i)
      losses.push_back(trainer.train_step(batch, s, step).total);
    return losses;
  };
  const auto a = run(7), b = run(7), c = run(8);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("train_step rejects an empty batch and unknown sources") {
  Rng rng(43);
  const int K = 4, T = 2;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  ToyDenoiser net(K, 16, 4, T, 1, rng);
  DiffusionTrainer trainer(std::move(net), DenoiserTrainConfig{});
  Rng step(1);
  CHECK_THROWS_AS(trainer.train_step({}, s, step), DataError);
  TrainingExample ex;
  ex.u0 = seq({0, 1}, K);
  ex.source = "scraped";
  CHECK_THROWS_AS(trainer.train_step({ex}, s, step), DataError);
}

TEST_CASE("vlb branch at t=T contributes no parameter gradient") {
  Rng rng(47);
  const int K = 4, T = 3;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  ToyDenoiser net(K, 16, 4, T, 1, rng);
  net.head.W.init_normal(rng, 0.3);
  DenoiserTrainConfig cfg;
  cfg.lambda_aux = 0.0;  // isolate the vlb term
  DiffusionTrainer trainer(std::move(net), cfg);

  TrainingExample ex;
  ex.u0 = seq({0, 1, 2, 3}, K);
  const TokenSequence uT = TokenSequence::full_mask(4, K);
  for (Param* p : trainer.net().params()) p->zero_grad();
  trainer.example_loss_and_grad(ex, uT, T, true, s);
  double grad_norm = 0.0;
  for (Param* p : trainer.net().params()) grad_norm += p->grad.cwiseAbs().sum();
  CHECK(grad_norm == 0.0);
}

TEST_CASE("gradient check: linear-only head is exact") {
  Rng rng(53);
  const int K = 4, T = 3;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  // Zero blocks: the network is embedding + head, linear in the head.
  ToyDenoiser net(K, 8, 4, T, 0, rng);
  DenoiserTrainConfig cfg;
  DiffusionTrainer trainer(std::move(net), cfg);
  TrainingExample ex;
  ex.u0 = seq({0, 3, 1}, K);
  Rng chain(59);
  const TokenSequence ut = sample_marginal(ex.u0, s, 2, chain);
  const double err = gradient_check(trainer, ex, ut, 2, true, s);
  // Softmax + mixture keeps it nonlinear in the head weights, but central
  // differences on a smooth exp are ~1e-8 accurate at h = 1e-4.
  CHECK(err < 1e-6);
}

TEST_CASE("gradient check: full network with HSA condition") {
  Rng rng(61);
  const int K = 5, T = 4;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  double worst = 0.0;
  for (uint64_t sd = 0; sd < 10; ++sd) {
    Rng init(100 + sd);
    ToyDenoiser net(K, 8, 4, T, 2, init);
    net.head.W.init_normal(init, 0.3);
    AggregatorParams hsa = AggregatorParams::init({7, 9}, {5, 5}, 4, init);
    DiffusionTrainer trainer(std::move(net), std::move(hsa), DenoiserTrainConfig{});
    Rng d(200 + sd);
    TrainingExample ex = example_with_features(seq({0, 2, 4, 1, 3}, K), trainer.hsa(), d);
    const int t = 1 + static_cast<int>(sd % (T - 1));  // cover 1..T-1
    const TokenSequence ut = sample_marginal(ex.u0, s, t, d);
    worst = std::max(worst, gradient_check(trainer, ex, ut, t, false, s));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("gradient of the aux term is near zero at its optimum") {
  // When predict_x0 already puts almost-unit mass on u0 the aux
  // cross-entropy sits at a stationary point: its head gradient vanishes.
  Rng rng(67);
  const int K = 3, T = 2;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  ToyDenoiser net(K, 8, 4, T, 0, rng);
  // Saturate the head toward class 0 from the token embedding of the mask.
  net.token_embedding.value.setZero();
  net.token_embedding.value.col(0).setConstant(1.0);
  net.head.W.value.setZero();
  net.head.W.value(0, 0) = 60.0;  // logit 60 for class 0
  DenoiserTrainConfig cfg;
  cfg.lambda_aux = 1.0;
  DiffusionTrainer trainer(std::move(net), cfg);
  TrainingExample ex;
  ex.u0 = seq({0, 0}, K);
  const TokenSequence u1 = seq({0, 0}, K);
  for (Param* p : trainer.net().params()) p->zero_grad();
  const TrainLossBreakdown loss = trainer.example_loss_and_grad(ex, u1, 1, true, s);
  CHECK(loss.aux == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(trainer.net().head.W.grad.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("denoiser checkpoint round trips through MDN1") {
  Rng rng(71);
  const int K = 6, T = 5;
  ToyDenoiser net(K, 16, 8, T, 2, rng);
  net.head.W.init_normal(rng, 0.2);
  AggregatorParams hsa = AggregatorParams::init({7, 9}, {12, 12}, 8, rng);
  DenoiserCheckpoint ckpt;
  ckpt.net = net;
  ckpt.hsa = hsa;
  ckpt.provider_layers = {7, 9};
  ckpt.provider_widths = {12, 12};
  ckpt.provider_seed = 77;
  ckpt.schedule_profile = "mask-and-replace";
  save_denoiser_checkpoint(ckpt, "dn_test.mdn1");
  DenoiserCheckpoint loaded = load_denoiser_checkpoint("dn_test.mdn1");
  CHECK(loaded.net.K == K);
  CHECK(loaded.net.T == T);
  CHECK(loaded.provider_seed == 77);
  CHECK(loaded.schedule_profile == "mask-and-replace");
  REQUIRE(loaded.hsa.has_value());

  // f32 rounding only.
  const TokenSequence u = seq({0, 5, 6, 2}, K);
  const ConditionEmbedding c = ConditionEmbedding::none();
  const CategoricalState a = predict_x0(net, u, 2, c);
  const CategoricalState b = predict_x0(loaded.net, u, 2, c);
  CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() <= 1e-5);
  std::remove("dn_test.mdn1");
}

TEST_CASE("trained toy denoiser beats the uniform baseline by 20 percent") {
  // Bigram corpus; after a short run the average NLL of the true u0 under
  // predict_x0 must sit well below log K.
  Rng rng(73);
  const int K = 8, T = 6, n = 12;
  const NoiseSchedule s = build_schedule(T, K, "mask-and-replace");
  const Eigen::MatrixXd P = bigram_matrix(K, 0);
  const Eigen::VectorXd pi = stationary_distribution(P);

  Rng data_rng(79);
  std::vector<TrainingExample> corpus;
  for (int i = 0; i < 256; ++i) {
    TrainingExample ex;
    ex.u0 = sample_bigram_sequence(P, pi, n, data_rng);
    corpus.push_back(std::move(ex));
  }

  Rng init(83);
  ToyDenoiser net(K, 32, 4, T, 2, init);
  DenoiserTrainConfig cfg;
  cfg.lr = 5e-3;
  cfg.lambda_aux = 0.05;
  DiffusionTrainer trainer(std::move(net), cfg);

  Rng step_rng(89);
  std::vector<TrainingExample> batch(16);
  for (int step = 0; step < 800; ++step) {
    for (int b = 0; b < 16; ++b) batch[b] = corpus[step_rng.uniform_int(256)];
    trainer.train_step(batch, s, step_rng);
  }

  // Average NLL of u0 under predict_x0 at a mid-range t.
  double nll = 0.0;
  int count = 0;
  Rng eval_rng(97);
  for (int i = 0; i < 64; ++i) {
    const TrainingExample& ex = corpus[i];
    const int t = 1 + eval_rng.uniform_int(T / 2);
    const TokenSequence ut = sample_marginal(ex.u0, s, t, eval_rng);
    const CategoricalState px0 =
        predict_x0(trainer.net(), ut, t, ConditionEmbedding::none());
    for (int p = 0; p < n; ++p) {
      nll -= std::log(std::max(px0.probs(p, ex.u0.tokens[p]), 1e-30));
      ++count;
    }
  }
  nll /= count;
  const double uniform_nll = std::log(static_cast<double>(K));
  CHECK(nll < 0.8 * uniform_nll);
}
