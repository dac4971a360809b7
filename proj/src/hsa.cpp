// SPDX-License-Identifier: Apache-2.0
#include "mdd/hsa.hpp"

#include <algorithm>
#include <cmath>

#include "mdd/binio.hpp"

namespace mdd {

namespace {

uint64_t fnv1a(uint64_t h, const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t gram_key(uint64_t seed, int layer, const std::vector<std::string>& tokens, size_t start,
                  int len) {
  uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed + 0x9e37 * static_cast<uint64_t>(layer));
  for (int i = 0; i < len; ++i) {
    const std::string& w = tokens[start + static_cast<size_t>(i)];
    h = fnv1a(h, w.data(), w.size());
    h = fnv1a(h, "\x1f", 1);  // separator keeps ("ab","c") distinct from ("a","bc")
  }
  return h;
}

}  // namespace

NgramHashProvider::NgramHashProvider(std::vector<int> layers, std::vector<int> widths,
                                     uint64_t seed)
    : layers_(std::move(layers)), widths_(std::move(widths)), seed_(seed) {
  if (layers_.empty() || layers_.size() != widths_.size())
    throw DataError("NgramHashProvider: layers/widths mismatch");
}

NgramHashProvider NgramHashProvider::default_provider(uint64_t seed, int width) {
  return NgramHashProvider({7, 9, 11, 12}, std::vector<int>(4, width), seed);
}

int NgramHashProvider::width(int layer) const {
  for (size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i] == layer) return widths_[i];
  throw DataError("NgramHashProvider: unknown layer " + std::to_string(layer));
}

LayerFeatureSet NgramHashProvider::embed(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw DataError("provider_embed: empty text");
  LayerFeatureSet out;
  for (size_t d = 0; d < layers_.size(); ++d) {
    const int layer = layers_[d];
    const int w = widths_[d];
    const int gram = static_cast<int>(d) + 1;  // depth i pools i-grams
    Eigen::VectorXd v = Eigen::VectorXd::Zero(w);
    const int grams = static_cast<int>(tokens.size()) - gram + 1;
    for (int g = 0; g < grams; ++g) {
      uint64_t key = gram_key(seed_, layer, tokens, static_cast<size_t>(g), gram);
      // Deterministic pseudorandom projection column for this gram.
      for (int c = 0; c < w; ++c) {
        key = splitmix64(key);
        // Map to roughly unit-variance symmetric values.
        const double u = static_cast<double>(key >> 11) * 0x1.0p-53;
        v[c] += (2.0 * u - 1.0) * 1.7320508075688772;  // uniform(-1,1) scaled to var 1
      }
    }
    if (grams > 0) v /= static_cast<double>(grams);  // mean pooling
    out.features[layer] = v;
  }
  return out;
}

void save_emb1(const std::string& path, const std::vector<int>& layers,
               const std::vector<int>& widths,
               const std::vector<std::pair<std::string, LayerFeatureSet>>& records) {
  if (layers.size() != widths.size()) throw DataError("save_emb1: layers/widths mismatch");
  BinaryWriter w(path);
  w.magic("EMB1");
  w.u32(1);
  w.u32(static_cast<uint32_t>(layers.size()));
  for (size_t i = 0; i < layers.size(); ++i) {
    w.u32(static_cast<uint32_t>(layers[i]));
    w.u32(static_cast<uint32_t>(widths[i]));
  }
  w.u32(static_cast<uint32_t>(records.size()));
  for (const auto& [key, feats] : records) {
    w.u32(static_cast<uint32_t>(key.size()));
    w.bytes(key);
    for (size_t i = 0; i < layers.size(); ++i) {
      const auto it = feats.features.find(layers[i]);
      if (it == feats.features.end() || it->second.size() != widths[i])
        throw DataError("save_emb1: record '" + key + "' missing layer " +
                        std::to_string(layers[i]));
      w.f32_block(it->second.data(), static_cast<size_t>(widths[i]));
    }
  }
  w.close();
}

Emb1Provider::Emb1Provider(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("EMB1");
  const uint32_t version = r.u32();
  if (version != 1) throw DataError(path + ": unsupported EMB1 version");
  const uint32_t s = r.u32();
  for (uint32_t i = 0; i < s; ++i) {
    layers_.push_back(static_cast<int>(r.u32()));
    widths_.push_back(static_cast<int>(r.u32()));
  }
  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t klen = r.u32();
    const std::string key = r.bytes(klen);
    LayerFeatureSet feats;
    for (size_t l = 0; l < layers_.size(); ++l) {
      Eigen::VectorXd v(widths_[l]);
      for (int c = 0; c < widths_[l]; ++c) v[c] = static_cast<double>(r.f32());
      feats.features[layers_[l]] = std::move(v);
    }
    records_[key] = std::move(feats);
  }
}

int Emb1Provider::width(int layer) const {
  for (size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i] == layer) return widths_[i];
  throw DataError("Emb1Provider: unknown layer " + std::to_string(layer));
}

LayerFeatureSet Emb1Provider::embed(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw DataError("provider_embed: empty text");
  std::string key;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) key += ' ';
    key += tokens[i];
  }
  const auto it = records_.find(key);
  if (it == records_.end()) throw DataError("Emb1Provider: no record for text '" + key + "'");
  return it->second;
}

AggregatorParams AggregatorParams::init(const std::vector<int>& layers,
                                        const std::vector<int>& widths, int cond_dim, Rng& rng) {
  if (layers.empty() || layers.size() != widths.size())
    throw DataError("AggregatorParams: layers/widths mismatch");
  AggregatorParams p;
  p.layer_set = layers;
  p.cond_dim = cond_dim;
  p.weights = Param("hsa.a", static_cast<Eigen::Index>(layers.size()), 1, false);
  p.weights.value.setConstant(1.0 / static_cast<double>(layers.size()));
  for (size_t i = 0; i < layers.size(); ++i) {
    LayerMlp mlp;
    const std::string base = "hsa.f" + std::to_string(layers[i]);
    mlp.in = Linear(base + ".in", widths[i], 2 * cond_dim);
    mlp.out = Linear(base + ".out", 2 * cond_dim, cond_dim);
    mlp.in.init(rng, 1.0 / std::sqrt(static_cast<double>(widths[i])));
    mlp.out.init(rng, 1.0 / std::sqrt(2.0 * cond_dim));
    p.mlps.push_back(std::move(mlp));
  }
  return p;
}

std::vector<Param*> AggregatorParams::params() {
  std::vector<Param*> out{&weights};
  for (auto& mlp : mlps) {
    for (Param* p : mlp.in.params()) out.push_back(p);
    for (Param* p : mlp.out.params()) out.push_back(p);
  }
  return out;
}

AggregateTrace aggregate_forward(const AggregatorParams& params, const LayerFeatureSet& feats) {
  AggregateTrace tr;
  tr.c = Eigen::VectorXd::Zero(params.cond_dim);
  for (size_t i = 0; i < params.layer_set.size(); ++i) {
    const int layer = params.layer_set[i];
    const auto it = feats.features.find(layer);
    if (it == feats.features.end())
      throw DataError("aggregate: missing layer " + std::to_string(layer) + " in feature set");
    if (!it->second.allFinite()) throw DataError("aggregate: non-finite feature");
    const Eigen::MatrixXd x = it->second.transpose();  // 1 x width
    const Eigen::MatrixXd pre = params.mlps[i].in.forward(x);
    const Eigen::MatrixXd act = tanh_forward(pre);
    const Eigen::MatrixXd proj = params.mlps[i].out.forward(act);
    tr.layer_in.push_back(x);
    tr.hidden_pre.push_back(pre);
    tr.hidden_act.push_back(act);
    tr.projected.push_back(proj);
    tr.c += params.weights.value(static_cast<Eigen::Index>(i), 0) * proj.row(0).transpose();
  }
  return tr;
}

ConditionEmbedding aggregate(const AggregatorParams& params, const LayerFeatureSet& feats) {
  ConditionEmbedding e;
  e.c = aggregate_forward(params, feats).c;
  return e;
}

void aggregate_backward(AggregatorParams& params, const AggregateTrace& trace,
                        const Eigen::VectorXd& dc) {
  for (size_t i = 0; i < params.layer_set.size(); ++i) {
    const double a_i = params.weights.value(static_cast<Eigen::Index>(i), 0);
    params.weights.grad(static_cast<Eigen::Index>(i), 0) += trace.projected[i].row(0).dot(dc);
    const Eigen::MatrixXd dproj = a_i * dc.transpose();  // 1 x cond_dim
    const Eigen::MatrixXd dact = params.mlps[i].out.backward(trace.hidden_act[i], dproj);
    const Eigen::MatrixXd dpre = tanh_backward(trace.hidden_act[i], dact);
    params.mlps[i].in.backward(trace.layer_in[i], dpre);
  }
}

}  // namespace mdd
