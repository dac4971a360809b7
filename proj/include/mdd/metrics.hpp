// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdd/motion.hpp"
#include "mdd/rng.hpp"

namespace mdd {

// Extracted feature rows (M x F): motion features, text features, or both.
struct FeatureSet {
  Eigen::MatrixXd rows;

  int count() const { return static_cast<int>(rows.rows()); }
  int dim() const { return static_cast<int>(rows.cols()); }
  void validate() const {
    if (!rows.allFinite()) throw DataError("FeatureSet: non-finite feature");
  }
};

struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // symmetric PSD
};

// Mean and unbiased (M-1) covariance of a feature set; M >= 2.
GaussianSummary summarize(const FeatureSet& feats);

// Frechet distance ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}).
// The matrix square root runs through the symmetric eigendecomposition of
// S_r^{1/2} S_g S_r^{1/2}; eigenvalues below -1e-8 are rejected, small
// negatives are clamped to zero.
double fid(const FeatureSet& real, const FeatureSet& gen);
double fid_from_summaries(const GaussianSummary& real, const GaussianSummary& gen);

// Mean Euclidean distance between index-paired motion and text features.
double mm_dist(const FeatureSet& motion_feats, const FeatureSet& text_feats);

struct RPrecisionResult {
  double top1 = 0, top2 = 0, top3 = 0;
};

// For each text, rank its true motion against pool_size-1 random distractors
// by Euclidean distance (ties broken by candidate row index) and report the
// fraction of queries whose true match lands in the top k.
RPrecisionResult r_precision(const FeatureSet& motion_feats, const FeatureSet& text_feats,
                             int pool_size, Rng& rng);

// Mean distance between `subset` disjoint random pairs (2*subset rows drawn
// without replacement).
double diversity(const FeatureSet& feats, int subset, Rng& rng);

// Mean distance between two disjoint 10-row subsets per text, averaged as
// (1 / (10 N)) sum_j sum_i ||f_{i,j} - f'_{i,j}||.
double mmodality(const std::map<std::string, FeatureSet>& per_text_feats, Rng& rng);

// Evaluation-protocol harness: repeat a metric with independent RNG streams
// and report mean with a 95% confidence interval.
struct MetricReport {
  double mean = 0;
  double ci95 = 0;
  std::vector<double> runs;
};

MetricReport run_repeated(int repetitions, uint64_t seed,
                          const std::function<double(Rng&)>& metric);

// Desk-scale deterministic extractor: a seeded random projection over
// per-dimension mean/std statistics of the clip, and an n-gram projection
// for text, both mapping into a shared feature width.
class FeatureExtractor {
 public:
  FeatureExtractor(int out_dim, uint64_t seed) : out_dim_(out_dim), seed_(seed) {}

  int out_dim() const { return out_dim_; }
  Eigen::VectorXd motion_features(const MotionClip& clip) const;
  Eigen::VectorXd text_features(const std::vector<std::string>& tokens) const;

  FeatureSet motion_feature_set(const std::vector<MotionClip>& clips) const;
  FeatureSet text_feature_set(const std::vector<std::vector<std::string>>& texts) const;

 private:
  int out_dim_;
  uint64_t seed_;
};

}  // namespace mdd
