// SPDX-License-Identifier: Apache-2.0
#include "mdd/corpus.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mdd {

namespace {

nlohmann::json record_to_json(const ManifestRecord& rec) {
  nlohmann::json j;
  j["motion_path"] = rec.motion_path;
  nlohmann::json caps = nlohmann::json::array();
  for (const auto& c : rec.captions) {
    nlohmann::json cj;
    cj["text"] = c.text;
    cj["source"] = c.source;
    if (c.mm_dist) cj["mm_dist"] = *c.mm_dist;
    caps.push_back(cj);
  }
  j["captions"] = caps;
  j["split"] = rec.split;
  if (rec.uncaptioned) j["uncaptioned"] = true;
  return j;
}

ManifestRecord record_from_json(const nlohmann::json& j) {
  ManifestRecord rec;
  rec.motion_path = j.at("motion_path").get<std::string>();
  for (const auto& cj : j.at("captions")) {
    CaptionEntry c;
    c.text = cj.at("text").get<std::string>();
    c.source = cj.at("source").get<std::string>();
    if (cj.contains("mm_dist")) c.mm_dist = cj.at("mm_dist").get<double>();
    if (c.mm_dist && *c.mm_dist < 0.0) throw DataError("manifest: negative mm_dist score");
    rec.captions.push_back(std::move(c));
  }
  rec.split = j.value("split", std::string());
  rec.uncaptioned = j.value("uncaptioned", false);
  return rec;
}

}  // namespace

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& rec : records) {
    if (rec.motion_path.empty()) throw DataError("manifest: empty motion path");
    if (!seen.insert(rec.motion_path).second)
      throw DataError("manifest: duplicate motion path " + rec.motion_path);
  }
}

std::string DatasetManifest::to_jsonl() const {
  validate();
  std::string out;
  for (const auto& rec : records) {
    out += record_to_json(rec).dump();
    out += '\n';
  }
  return out;
}

DatasetManifest DatasetManifest::from_jsonl(const std::string& text) {
  DatasetManifest m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  m.validate();
  return m;
}

void DatasetManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << to_jsonl();
  if (!out) throw DataError("write failed: " + path);
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

int filter_captions(DatasetManifest& manifest, const MotionFeatureFn& motion_features,
                    const TextFeatureFn& text_features, double tau) {
  int removed = 0;
  for (auto& rec : manifest.records) {
    if (rec.captions.empty()) {
      rec.uncaptioned = true;
      continue;
    }
    const Eigen::VectorXd fm = motion_features(rec);
    std::vector<CaptionEntry> kept;
    for (auto& cap : rec.captions) {
      const double score = (fm - text_features(cap.text)).norm();
      if (score > tau) {
        ++removed;
        continue;
      }
      cap.mm_dist = score;
      kept.push_back(std::move(cap));
    }
    rec.captions = std::move(kept);
    if (rec.captions.empty()) rec.uncaptioned = true;
  }
  return removed;
}

CaptionNll caption_nll(const std::vector<std::string>& tokens, const NextTokenModel& model) {
  if (tokens.empty()) throw DataError("caption_nll: empty token sequence");
  CaptionNll out;
  double total = 0.0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const double p = model.prob(tokens, i);
    if (p <= 0.0) {
      out.zero_probability = true;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    total -= std::log(p);
  }
  out.value = total / static_cast<double>(tokens.size());
  return out;
}

SplitBatches split_and_batch(DatasetManifest& manifest, const std::vector<double>& ratios,
                             int batch_size, Rng& rng, const ExampleMaterializer& materialize) {
  if (manifest.records.empty()) throw DataError("split_and_batch: empty manifest");
  if (batch_size < 1) throw DataError("split_and_batch: batch_size must be >= 1");
  double ratio_sum = 0.0;
  for (double r : ratios) ratio_sum += r;
  if (ratios.empty() || std::abs(ratio_sum - 1.0) > 1e-9)
    throw DataError("split_and_batch: ratios must sum to 1");

  const int n = static_cast<int>(manifest.records.size());
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);

  const int train_n = static_cast<int>(std::round(ratios[0] * n));
  SplitBatches out;
  out.train_records = train_n;
  out.eval_records = n - train_n;
  for (int i = 0; i < n; ++i)
    manifest.records[order[i]].split = i < train_n ? "train" : "test";

  std::vector<TrainingExample> examples;
  for (int i = 0; i < train_n; ++i) {
    auto more = materialize(manifest.records[order[i]]);
    for (auto& ex : more) examples.push_back(std::move(ex));
  }
  for (size_t start = 0; start < examples.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(examples.size(), start + static_cast<size_t>(batch_size));
    out.train_batches.emplace_back(examples.begin() + static_cast<long>(start),
                                   examples.begin() + static_cast<long>(end));
  }
  return out;
}

}  // namespace mdd
