// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdd/denoiser.hpp"
#include "mdd/rng.hpp"

namespace mdd {

struct CaptionEntry {
  std::string text;
  std::string source = "curated";  // "curated" | "wild"
  std::optional<double> mm_dist;   // quality score, set by the filter
};

struct ManifestRecord {
  std::string motion_path;
  std::vector<CaptionEntry> captions;
  std::string split;         // "", "train", "test", ...
  bool uncaptioned = false;  // flagged (not deleted) when filtering strips every caption
};

// JSON-lines dataset manifest, one record per line. Serialization is
// deterministic: write -> read -> write round-trips byte-identically.
struct DatasetManifest {
  std::vector<ManifestRecord> records;

  void validate() const;  // motion paths unique
  void save(const std::string& path) const;
  static DatasetManifest load(const std::string& path);
  std::string to_jsonl() const;
  static DatasetManifest from_jsonl(const std::string& text);
};

// Feature callbacks so the filter can run against any extractor (or
// hand-set fixtures in tests). Both must map into the same space.
using MotionFeatureFn = std::function<Eigen::VectorXd(const ManifestRecord&)>;
using TextFeatureFn = std::function<Eigen::VectorXd(const std::string&)>;

// Remove captions whose MM-Dist to their motion exceeds tau; motions left
// caption-less are flagged, not deleted. Surviving captions keep their
// computed score. Returns the number of removed captions.
int filter_captions(DatasetManifest& manifest, const MotionFeatureFn& motion_features,
                    const TextFeatureFn& text_features, double tau);

// Pluggable next-token probability model for the caption scorer.
class NextTokenModel {
 public:
  virtual ~NextTokenModel() = default;
  // p(token | prefix); prefix is tokens[0..i).
  virtual double prob(const std::vector<std::string>& tokens, size_t i) const = 0;
};

class UniformTokenModel : public NextTokenModel {
 public:
  explicit UniformTokenModel(int vocabulary) : vocabulary_(vocabulary) {}
  double prob(const std::vector<std::string>&, size_t) const override {
    return 1.0 / static_cast<double>(vocabulary_);
  }

 private:
  int vocabulary_;
};

struct CaptionNll {
  double value = 0.0;
  bool zero_probability = false;  // +inf sentinel was hit
};

// -(1/|t|) sum_i log p(t_i | t_<i).
CaptionNll caption_nll(const std::vector<std::string>& tokens, const NextTokenModel& model);

// Maps a manifest record (one caption of it) to training examples; the CLI
// wires motion loading + VQ tokenization + provider embedding here, tests
// substitute synthetic data.
using ExampleMaterializer =
    std::function<std::vector<TrainingExample>(const ManifestRecord&)>;

struct SplitBatches {
  std::vector<std::vector<TrainingExample>> train_batches;
  int train_records = 0;
  int eval_records = 0;
};

// Deterministic shuffled split (ratios must sum to 1; first share trains,
// the remainder is held out), then fixed-size batches over the materialized
// examples of the train split. Wild and curated records are interleaved by
// the shuffle. Records get their split tag written back.
SplitBatches split_and_batch(DatasetManifest& manifest, const std::vector<double>& ratios,
                             int batch_size, Rng& rng, const ExampleMaterializer& materialize);

}  // namespace mdd
