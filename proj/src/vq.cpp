// SPDX-License-Identifier: Apache-2.0
#include "mdd/vq.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "mdd/binio.hpp"

namespace mdd {

namespace {
constexpr double kCountFloor = 1e-12;
constexpr double kNormFloor = 1e-12;
}  // namespace

void Codebook::validate() const {
  if (size() < 2) throw DataError("Codebook: K < 2");
  if (!entries.allFinite() || !ema_sums.allFinite() || !ema_counts.allFinite())
    throw DataError("Codebook: non-finite state");
  if ((ema_counts.array() < 0.0).any()) throw DataError("Codebook: negative EMA count");
  if (ema_counts.size() != size() || ema_sums.rows() != size() || ema_sums.cols() != dim())
    throw DataError("Codebook: EMA shape mismatch");
}

Codebook Codebook::init(int K, int d, Rng& rng, double stddev) {
  Codebook book;
  book.entries.resize(K, d);
  for (int k = 0; k < K; ++k)
    for (int c = 0; c < d; ++c) book.entries(k, c) = stddev * rng.normal();
  book.ema_counts = Eigen::VectorXd::Ones(K);
  book.ema_sums = book.entries;
  return book;
}

QuantizationResult quantize(const Eigen::MatrixXd& z, const Codebook& book) {
  book.validate();
  if (!z.allFinite()) throw DataError("quantize: non-finite input");
  if (z.cols() != book.dim())
    throw DataError("quantize: z width " + std::to_string(z.cols()) + " != codebook dim " +
                    std::to_string(book.dim()));
  const int n = static_cast<int>(z.rows());
  const int K = book.size();

  QuantizationResult res;
  res.distances.resize(n, K);
  res.z_q.resize(n, book.dim());
  res.tokens.codebook_size = K;
  res.tokens.tokens.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k)
      res.distances(i, k) = (z.row(i) - book.entries.row(k)).norm();
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (res.distances(i, k) < res.distances(i, best)) best = k;  // lowest-index tie-break
    res.tokens.tokens[i] = best;
    res.z_q.row(i) = book.entries.row(best);
  }
  return res;
}

VqLossTerms vq_loss(const Eigen::MatrixXd& m, const Eigen::MatrixXd& m_tilde,
                    const Eigen::MatrixXd& z, const Eigen::MatrixXd& z_q, double beta) {
  if (m.rows() != m_tilde.rows() || m.cols() != m_tilde.cols())
    throw DataError("vq_loss: reconstruction shape mismatch");
  if (z.rows() != z_q.rows() || z.cols() != z_q.cols())
    throw DataError("vq_loss: latent shape mismatch");
  VqLossTerms terms;
  terms.recon = (m - m_tilde).cwiseAbs().mean();
  terms.embed = (z - z_q).norm();
  terms.commit = beta * (z - z_q).norm();
  terms.total = terms.recon + terms.embed + terms.commit;
  return terms;
}

Codebook ema_update(const Codebook& book, const Eigen::MatrixXd& z, const TokenSequence& tokens,
                    double decay) {
  book.validate();
  if (decay <= 0.0 || decay >= 1.0) throw DataError("ema_update: decay must be in (0,1)");
  if (tokens.length() != z.rows()) throw DataError("ema_update: token/row count mismatch");
  if (tokens.codebook_size != book.size()) throw DataError("ema_update: K mismatch");
  if (tokens.has_mask()) throw DataError("ema_update: mask token in assignments");

  const int K = book.size();
  Eigen::VectorXd batch_counts = Eigen::VectorXd::Zero(K);
  Eigen::MatrixXd batch_sums = Eigen::MatrixXd::Zero(K, book.dim());
  for (int i = 0; i < tokens.length(); ++i) {
    batch_counts[tokens.tokens[i]] += 1.0;
    batch_sums.row(tokens.tokens[i]) += z.row(i);
  }

  Codebook out = book;
  out.ema_counts = decay * book.ema_counts + (1.0 - decay) * batch_counts;
  out.ema_sums = decay * book.ema_sums + (1.0 - decay) * batch_sums;
  for (int k = 0; k < K; ++k)
    out.entries.row(k) = out.ema_sums.row(k) / std::max(out.ema_counts[k], kCountFloor);
  return out;
}

std::pair<Codebook, int> reset_dead_codes(const Codebook& book, const Eigen::MatrixXd& z,
                                          double usage_threshold, Rng& rng) {
  book.validate();
  if (z.rows() < 1) throw DataError("reset_dead_codes: empty batch");
  Codebook out = book;
  int resets = 0;
  for (int k = 0; k < book.size(); ++k) {
    if (book.ema_counts[k] >= usage_threshold) continue;
    const int pick = rng.uniform_int(static_cast<int>(z.rows()));
    out.entries.row(k) = z.row(pick);
    out.ema_sums.row(k) = z.row(pick);
    out.ema_counts[k] = 1.0;
    ++resets;
  }
  return {out, resets};
}

VqModel::VqModel(int in_dim_, int hidden_, int code_dim_, Rng& rng)
    : in_dim(in_dim_), hidden(hidden_), code_dim(code_dim_) {
  enc1 = StridedAffine("enc1", 4, 2, in_dim, hidden);
  enc2 = StridedAffine("enc2", 4, 2, hidden, code_dim);
  dec1 = StridedAffine("dec1", 5, 1, code_dim, hidden);
  dec2 = StridedAffine("dec2", 5, 1, hidden, in_dim);
  enc1.init(rng, 1.0 / std::sqrt(4.0 * in_dim));
  enc2.init(rng, 1.0 / std::sqrt(4.0 * hidden));
  dec1.init(rng, 1.0 / std::sqrt(5.0 * code_dim));
  dec2.init(rng, 1.0 / std::sqrt(5.0 * hidden));
}

std::vector<Param*> VqModel::params() {
  std::vector<Param*> out;
  for (auto* layer : {&enc1, &enc2, &dec1, &dec2})
    for (Param* p : layer->params()) out.push_back(p);
  return out;
}

Eigen::MatrixXd VqModel::normalize(const Eigen::MatrixXd& m) const {
  if (feat_mean.size() == 0) return m;
  return (m.rowwise() - feat_mean.transpose()).array().rowwise() /
         feat_std.transpose().array();
}

Eigen::MatrixXd VqModel::denormalize(const Eigen::MatrixXd& m) const {
  if (feat_mean.size() == 0) return m;
  return (m.array().rowwise() * feat_std.transpose().array()).matrix().rowwise() +
         feat_mean.transpose();
}

Eigen::MatrixXd VqModel::encode(const Eigen::MatrixXd& m) const {
  if (m.cols() != in_dim) throw DataError("VqModel::encode: feature width mismatch");
  if (m.rows() < 1) throw DataError("VqModel::encode: empty clip");
  const Eigen::MatrixXd h = tanh_forward(enc1.forward(normalize(m)));
  return enc2.forward(h);
}

Eigen::MatrixXd VqModel::decode(const Eigen::MatrixXd& z_q) const {
  if (z_q.cols() != code_dim) throw DataError("VqModel::decode: latent width mismatch");
  const Eigen::MatrixXd h = tanh_forward(dec1.forward(upsample2(z_q)));
  return denormalize(dec2.forward(upsample2(h)));
}

TokenSequence encode_to_tokens(const MotionClip& clip, const VqModel& model,
                               const Codebook& book) {
  clip.validate();
  if (clip.frame_count() < VqModel::kDownsample)
    throw DataError("encode_to_tokens: clip shorter than one stride window");
  const Eigen::MatrixXd z = model.encode(clip.features);
  return quantize(z, book).tokens;
}

MotionClip decode_from_tokens(const TokenSequence& u, const VqModel& model, const Codebook& book) {
  u.validate();
  if (u.codebook_size != book.size()) throw DataError("decode_from_tokens: K mismatch");
  if (u.has_mask())
    throw DataError("decode_from_tokens: mask token present; sampling must finish first");
  Eigen::MatrixXd z_q(u.length(), book.dim());
  for (int i = 0; i < u.length(); ++i) z_q.row(i) = book.entries.row(u.tokens[i]);
  MotionClip clip;
  clip.features = model.decode(z_q);
  clip.fps = kCanonicalFps;
  return clip;
}

VqTrainResult train_toy_vq(const std::vector<MotionClip>& corpus, const VqTrainConfig& config) {
  if (corpus.empty()) throw DataError("train_toy_vq: empty corpus");
  const int in_dim = corpus.front().width();
  for (const auto& c : corpus)
    if (c.width() != in_dim) throw DataError("train_toy_vq: inconsistent feature widths");

  Rng rng(config.seed);

  // Held-out split from the tail of a shuffled index list.
  std::vector<int> order(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) order[i] = static_cast<int>(i);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  int holdout = static_cast<int>(std::floor(config.holdout_fraction * corpus.size()));
  holdout = std::min(holdout, static_cast<int>(corpus.size()) - 1);
  const int train_n = static_cast<int>(corpus.size()) - holdout;

  VqTrainResult res;
  res.model = VqModel(in_dim, config.hidden, config.code_dim, rng);

  if (config.normalize) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(in_dim);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(in_dim);
    double total = 0.0;
    for (int idx = 0; idx < train_n; ++idx) {
      const auto& f = corpus[order[idx]].features;
      mean += f.colwise().sum().transpose();
      sq += f.array().square().colwise().sum().matrix().transpose();
      total += static_cast<double>(f.rows());
    }
    mean /= total;
    res.model.feat_mean = mean;
    res.model.feat_std =
        ((sq / total - mean.array().square().matrix()).cwiseMax(1e-8)).cwiseSqrt();
  }

  res.book = Codebook::init(config.codebook_size, config.code_dim, rng, 0.1);

  SgdMomentum opt{config.lr, config.momentum, config.weight_decay};
  auto params = res.model.params();

  for (int step = 0; step < config.steps; ++step) {
    for (Param* p : params) p->zero_grad();
    double step_loss = 0.0;
    Eigen::MatrixXd batch_z;       // stacked latents for EMA + reset
    std::vector<int> batch_tokens;

    for (int b = 0; b < config.batch_size; ++b) {
      const MotionClip& clip = corpus[order[rng.uniform_int(train_n)]];
      const Eigen::MatrixXd m = res.model.normalize(clip.features);

      // Forward (on normalized features; recon loss lives in that space).
      const Eigen::MatrixXd e1 = res.model.enc1.forward(m);
      const Eigen::MatrixXd h1 = tanh_forward(e1);
      const Eigen::MatrixXd z = res.model.enc2.forward(h1);
      const QuantizationResult q = quantize(z, res.book);
      // Straight-through: decode z_q, copy the gradient onto z.
      const Eigen::MatrixXd u1 = upsample2(q.z_q);
      const Eigen::MatrixXd d1 = res.model.dec1.forward(u1);
      const Eigen::MatrixXd hd = tanh_forward(d1);
      const Eigen::MatrixXd u2 = upsample2(hd);
      Eigen::MatrixXd recon = res.model.dec2.forward(u2);

      const Eigen::Index rows = std::min(recon.rows(), m.rows());
      recon.conservativeResize(rows, recon.cols());
      const Eigen::MatrixXd target = m.topRows(rows);

      const VqLossTerms terms = vq_loss(target, recon, z, q.z_q, config.beta);
      step_loss += terms.total;

      // Backward: recon term.
      const double scale = 1.0 / static_cast<double>(rows * m.cols());
      Eigen::MatrixXd drecon =
          (recon - target).unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }) *
          scale;
      // Pad back to the decoder's output length if the clip was not a
      // multiple of the stride.
      Eigen::MatrixXd drecon_full = Eigen::MatrixXd::Zero(u2.rows(), in_dim);
      drecon_full.topRows(rows) = drecon;
      const Eigen::MatrixXd du2 = res.model.dec2.backward(u2, drecon_full);
      const Eigen::MatrixXd dhd = upsample2_backward(du2);
      const Eigen::MatrixXd dd1 = tanh_backward(hd, dhd);
      const Eigen::MatrixXd du1 = res.model.dec1.backward(u1, dd1);
      Eigen::MatrixXd dz = upsample2_backward(du1);  // straight-through copy

      // Embed term ||z - sg[z_q]||: gradient to the encoder only.
      const double en = std::max((z - q.z_q).norm(), kNormFloor);
      dz += config.embed_weight * (z - q.z_q) / en;

      const Eigen::MatrixXd dh1 = res.model.enc2.backward(h1, dz);
      const Eigen::MatrixXd de1 = tanh_backward(h1, dh1);
      res.model.enc1.backward(m, de1);

      batch_z.conservativeResize(batch_z.rows() + z.rows(), config.code_dim);
      batch_z.bottomRows(z.rows()) = z;
      batch_tokens.insert(batch_tokens.end(), q.tokens.tokens.begin(), q.tokens.tokens.end());
    }

    step_loss /= config.batch_size;
    if (!std::isfinite(step_loss))
      throw NumericalError("train_toy_vq: loss diverged at step " + std::to_string(step) +
                           " (lr=" + std::to_string(config.lr) + ")");
    res.loss_curve.push_back(step_loss);

    for (Param* p : params) p->grad /= static_cast<double>(config.batch_size);
    const double progress = config.steps > 1 ? static_cast<double>(step) / (config.steps - 1) : 0.0;
    opt.lr = config.lr * (1.0 - (1.0 - config.lr_final_factor) * progress);
    opt.step(params);

    TokenSequence assignments;
    assignments.codebook_size = config.codebook_size;
    assignments.tokens = batch_tokens;
    res.book = ema_update(res.book, batch_z, assignments, config.ema_decay);
    if (config.reset_every > 0 && (step + 1) % config.reset_every == 0)
      res.book = reset_dead_codes(res.book, batch_z, config.reset_threshold, rng).first;
  }

  // Held-out reconstruction quality in original feature units.
  double err = 0.0;
  double count = 0.0;
  const int eval_n = holdout > 0 ? holdout : train_n;
  const int eval_off = holdout > 0 ? train_n : 0;
  for (int idx = 0; idx < eval_n; ++idx) {
    const MotionClip& clip = corpus[order[eval_off + idx]];
    const Eigen::MatrixXd z = res.model.encode(clip.features);
    const QuantizationResult q = quantize(z, res.book);
    const Eigen::MatrixXd recon = res.model.decode(q.z_q);
    const Eigen::Index rows = std::min(recon.rows(), clip.features.rows());
    err += (recon.topRows(rows) - clip.features.topRows(rows)).cwiseAbs().sum();
    count += static_cast<double>(rows * clip.features.cols());
  }
  res.holdout_recon_l1 = err / count;
  return res;
}

namespace {

struct BlobLayout {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> mats;
  nlohmann::json header(const char* kind) const {
    nlohmann::json j;
    j["format"] = kind;
    uint64_t offset = 0;
    nlohmann::json blobs = nlohmann::json::array();
    for (const auto& [name, m] : mats) {
      nlohmann::json b;
      b["name"] = name;
      b["rows"] = m->rows();
      b["cols"] = m->cols();
      b["offset"] = offset;
      offset += static_cast<uint64_t>(m->size()) * 4;
      blobs.push_back(b);
    }
    j["blobs"] = blobs;
    return j;
  }
};

void write_checkpoint(const std::string& path, const char magic[4], const nlohmann::json& header,
                      const BlobLayout& layout) {
  BinaryWriter w(path);
  w.magic(magic);
  const std::string h = header.dump();
  w.u32(static_cast<uint32_t>(h.size()));
  w.bytes(h);
  for (const auto& [name, m] : layout.mats) w.f32_matrix(*m);
  w.close();
}

}  // namespace

void save_vq_checkpoint(const VqModel& model, const Codebook& book, const std::string& path) {
  VqModel m = model;  // params() is non-const; a copy keeps the API const
  BlobLayout layout;
  for (Param* p : m.params()) layout.mats.emplace_back(p->name, &p->value);
  layout.mats.emplace_back("codebook.entries", &book.entries);
  layout.mats.emplace_back("codebook.ema_sums", &book.ema_sums);
  const Eigen::MatrixXd counts = book.ema_counts;
  layout.mats.emplace_back("codebook.ema_counts", &counts);
  Eigen::MatrixXd mean, stddev;
  if (model.feat_mean.size() > 0) {
    mean = model.feat_mean;
    stddev = model.feat_std;
    layout.mats.emplace_back("norm.mean", &mean);
    layout.mats.emplace_back("norm.std", &stddev);
  }

  nlohmann::json header = layout.header("MVQ1");
  header["K"] = book.size();
  header["d"] = book.dim();
  header["eta"] = model.eta();
  header["in_dim"] = model.in_dim;
  header["hidden"] = model.hidden;
  header["normalized"] = model.feat_mean.size() > 0;
  write_checkpoint(path, "MVQ1", header, layout);
}

std::pair<VqModel, Codebook> load_vq_checkpoint(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("MVQ1");
  const uint32_t hlen = r.u32();
  const nlohmann::json header = nlohmann::json::parse(r.bytes(hlen));
  if (header.at("format") != "MVQ1") throw DataError(path + ": wrong checkpoint kind");

  Rng rng(0);
  VqModel model(header.at("in_dim").get<int>(), header.at("hidden").get<int>(),
                header.at("d").get<int>(), rng);
  Codebook book;
  const int K = header.at("K").get<int>();
  const int d = header.at("d").get<int>();

  std::map<std::string, Eigen::MatrixXd> blobs;
  for (const auto& b : header.at("blobs"))
    blobs[b.at("name").get<std::string>()] =
        r.f32_matrix(b.at("rows").get<Eigen::Index>(), b.at("cols").get<Eigen::Index>());

  for (Param* p : model.params()) {
    auto it = blobs.find(p->name);
    if (it == blobs.end()) throw DataError(path + ": missing blob " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      throw DataError(path + ": blob shape mismatch for " + p->name);
    p->value = it->second;
  }
  book.entries = blobs.at("codebook.entries");
  book.ema_sums = blobs.at("codebook.ema_sums");
  book.ema_counts = blobs.at("codebook.ema_counts").col(0);
  if (book.size() != K || book.dim() != d) throw DataError(path + ": codebook shape mismatch");
  if (header.at("normalized").get<bool>()) {
    model.feat_mean = blobs.at("norm.mean").col(0);
    model.feat_std = blobs.at("norm.std").col(0);
  }
  book.validate();
  return {std::move(model), std::move(book)};
}

}  // namespace mdd
