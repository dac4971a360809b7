// SPDX-License-Identifier: Apache-2.0
#include "mdd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mdd {

namespace {

constexpr double kEigTolerance = -1e-8;

// PSD square root via symmetric eigendecomposition.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  Eigen::VectorXd vals = eig.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] < kEigTolerance)
      throw NumericalError(std::string(what) + ": eigenvalue " + std::to_string(vals[i]) +
                           " below PSD tolerance");
    vals[i] = std::max(vals[i], 0.0);
  }
  return eig.eigenvectors() * vals.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

GaussianSummary summarize(const FeatureSet& feats) {
  feats.validate();
  if (feats.count() < 2) throw DataError("summarize: need at least 2 rows for covariance");
  GaussianSummary g;
  g.mean = feats.rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = feats.rows.rowwise() - g.mean.transpose();
  g.cov = centered.transpose() * centered / static_cast<double>(feats.count() - 1);
  return g;
}

double fid_from_summaries(const GaussianSummary& real, const GaussianSummary& gen) {
  if (real.mean.size() != gen.mean.size()) throw DataError("fid: feature width mismatch");
  if ((real.cov - real.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 ||
      (gen.cov - gen.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw DataError("fid: covariance not symmetric");

  const Eigen::MatrixXd sqrt_r = psd_sqrt(real.cov, "fid(real covariance)");
  const Eigen::MatrixXd inner = sqrt_r * gen.cov * sqrt_r;
  const Eigen::MatrixXd cross_sqrt = psd_sqrt(inner, "fid(product)");

  const double mean_term = (real.mean - gen.mean).squaredNorm();
  return mean_term + real.cov.trace() + gen.cov.trace() - 2.0 * cross_sqrt.trace();
}

double fid(const FeatureSet& real, const FeatureSet& gen) {
  return fid_from_summaries(summarize(real), summarize(gen));
}

double mm_dist(const FeatureSet& motion_feats, const FeatureSet& text_feats) {
  motion_feats.validate();
  text_feats.validate();
  if (motion_feats.count() != text_feats.count())
    throw DataError("mm_dist: paired sets must have equal row counts");
  if (motion_feats.dim() != text_feats.dim()) throw DataError("mm_dist: feature width mismatch");
  if (motion_feats.count() < 1) throw DataError("mm_dist: empty sets");
  double total = 0.0;
  for (int i = 0; i < motion_feats.count(); ++i)
    total += (motion_feats.rows.row(i) - text_feats.rows.row(i)).norm();
  return total / motion_feats.count();
}

RPrecisionResult r_precision(const FeatureSet& motion_feats, const FeatureSet& text_feats,
                             int pool_size, Rng& rng) {
  motion_feats.validate();
  text_feats.validate();
  const int N = motion_feats.count();
  if (N != text_feats.count()) throw DataError("r_precision: paired sets must match");
  if (N < pool_size) throw DataError("r_precision: fewer pairs than pool_size");

  int hits[3] = {0, 0, 0};
  std::vector<int> pool(static_cast<size_t>(pool_size));
  for (int q = 0; q < N; ++q) {
    // True match plus pool_size-1 distinct random distractors.
    pool[0] = q;
    for (int i = 1; i < pool_size; ++i) {
      int cand;
      bool fresh;
      do {
        cand = rng.uniform_int(N);
        fresh = cand != q;
        for (int j = 1; j < i && fresh; ++j) fresh = pool[j] != cand;
      } while (!fresh);
      pool[i] = cand;
    }
    // Rank of the true match; ties resolved by candidate row index.
    const double true_dist = (text_feats.rows.row(q) - motion_feats.rows.row(q)).norm();
    int rank = 0;
    for (int i = 1; i < pool_size; ++i) {
      const double d = (text_feats.rows.row(q) - motion_feats.rows.row(pool[i])).norm();
      if (d < true_dist || (d == true_dist && pool[i] < q)) ++rank;
    }
    for (int k = 0; k < 3; ++k)
      if (rank < k + 1) ++hits[k];
  }
  RPrecisionResult res;
  res.top1 = static_cast<double>(hits[0]) / N;
  res.top2 = static_cast<double>(hits[1]) / N;
  res.top3 = static_cast<double>(hits[2]) / N;
  return res;
}

double diversity(const FeatureSet& feats, int subset, Rng& rng) {
  feats.validate();
  if (subset < 1) throw DataError("diversity: subset must be >= 1");
  if (feats.count() < 2 * subset)
    throw DataError("diversity: need at least " + std::to_string(2 * subset) + " rows, have " +
                    std::to_string(feats.count()));
  // Partial Fisher-Yates: the first 2*subset entries are a uniform draw
  // without replacement.
  std::vector<int> idx(static_cast<size_t>(feats.count()));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < 2 * subset; ++i)
    std::swap(idx[i], idx[i + rng.uniform_int(feats.count() - i)]);

  double total = 0.0;
  for (int i = 0; i < subset; ++i)
    total += (feats.rows.row(idx[i]) - feats.rows.row(idx[i + subset])).norm();
  return total / subset;
}

double mmodality(const std::map<std::string, FeatureSet>& per_text_feats, Rng& rng) {
  if (per_text_feats.empty()) throw DataError("mmodality: no texts");
  double total = 0.0;
  for (const auto& [text, feats] : per_text_feats) {
    feats.validate();
    if (feats.count() < 20)
      throw DataError("mmodality: text '" + text + "' has fewer than 20 generations");
    std::vector<int> idx(static_cast<size_t>(feats.count()));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < 20; ++i)
      std::swap(idx[i], idx[i + rng.uniform_int(feats.count() - i)]);
    // Two disjoint 10-row subsets, paired index-wise.
    for (int i = 0; i < 10; ++i)
      total += (feats.rows.row(idx[i]) - feats.rows.row(idx[i + 10])).norm();
  }
  return total / (10.0 * static_cast<double>(per_text_feats.size()));
}

MetricReport run_repeated(int repetitions, uint64_t seed,
                          const std::function<double(Rng&)>& metric) {
  if (repetitions < 1) throw DataError("run_repeated: repetitions must be >= 1");
  MetricReport report;
  Rng base(seed);
  for (int rep = 0; rep < repetitions; ++rep) {
    Rng stream = base.derive(static_cast<uint64_t>(rep));
    report.runs.push_back(metric(stream));
  }
  const double n = static_cast<double>(repetitions);
  report.mean = std::accumulate(report.runs.begin(), report.runs.end(), 0.0) / n;
  if (repetitions > 1) {
    double var = 0.0;
    for (double v : report.runs) var += (v - report.mean) * (v - report.mean);
    var /= (n - 1.0);
    report.ci95 = 1.96 * std::sqrt(var / n);
  }
  return report;
}

Eigen::VectorXd FeatureExtractor::motion_features(const MotionClip& clip) const {
  clip.validate();
  const int d = clip.width();
  // Per-dimension mean and standard deviation over time.
  Eigen::VectorXd stats(2 * d);
  const Eigen::VectorXd mean = clip.features.colwise().mean().transpose();
  stats.head(d) = mean;
  const Eigen::MatrixXd centered = clip.features.rowwise() - mean.transpose();
  stats.tail(d) =
      (centered.array().square().colwise().sum() / std::max(1, clip.frame_count() - 1))
          .sqrt()
          .matrix()
          .transpose();

  // Seeded random projection; the matrix depends only on (seed, input width).
  Eigen::VectorXd out = Eigen::VectorXd::Zero(out_dim_);
  uint64_t key = splitmix64(seed_ ^ (0x5851f42d4c957f2dULL + static_cast<uint64_t>(2 * d)));
  const double scale = 1.0 / std::sqrt(static_cast<double>(2 * d));
  for (int r = 0; r < out_dim_; ++r)
    for (int c = 0; c < 2 * d; ++c) {
      key = splitmix64(key);
      const double u = static_cast<double>(key >> 11) * 0x1.0p-53;
      out[r] += (2.0 * u - 1.0) * 1.7320508075688772 * scale * stats[c];
    }
  return out;
}

Eigen::VectorXd FeatureExtractor::text_features(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw DataError("text_features: empty text");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(out_dim_);
  // Unigrams and bigrams hashed into deterministic pseudorandom directions.
  auto add_gram = [&](const std::string& gram) {
    uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed_ + 0x9e3779b9ULL);
    for (char ch : gram) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
    for (int r = 0; r < out_dim_; ++r) {
      h = splitmix64(h);
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      out[r] += (2.0 * u - 1.0) * 1.7320508075688772;
    }
  };
  int grams = 0;
  for (size_t i = 0; i < tokens.size(); ++i, ++grams) add_gram(tokens[i]);
  for (size_t i = 0; i + 1 < tokens.size(); ++i, ++grams)
    add_gram(tokens[i] + "\x1f" + tokens[i + 1]);
  return out / std::max(1, grams);
}

FeatureSet FeatureExtractor::motion_feature_set(const std::vector<MotionClip>& clips) const {
  if (clips.empty()) throw DataError("motion_feature_set: no clips");
  FeatureSet fs;
  fs.rows.resize(static_cast<Eigen::Index>(clips.size()), out_dim_);
  for (size_t i = 0; i < clips.size(); ++i)
    fs.rows.row(static_cast<Eigen::Index>(i)) = motion_features(clips[i]).transpose();
  return fs;
}

FeatureSet FeatureExtractor::text_feature_set(
    const std::vector<std::vector<std::string>>& texts) const {
  if (texts.empty()) throw DataError("text_feature_set: no texts");
  FeatureSet fs;
  fs.rows.resize(static_cast<Eigen::Index>(texts.size()), out_dim_);
  for (size_t i = 0; i < texts.size(); ++i)
    fs.rows.row(static_cast<Eigen::Index>(i)) = text_features(texts[i]).transpose();
  return fs;
}

}  // namespace mdd
