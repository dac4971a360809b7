// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdd/corpus.hpp"
#include "mdd/motion.hpp"
#include "mdd/rng.hpp"
#include "mdd/types.hpp"

namespace mdd {

// ---- Joint-space synthetic corpus (drives the full CLI pipeline) ----

// Rest pose for the 22-joint template, facing +Z, root at the given height.
Eigen::Matrix<double, Eigen::Dynamic, 3> rest_pose(double root_height = 0.9);

// Procedural walking clip. style 0 walks straight ahead, style 1 walks a
// left-turning arc; limbs swing with seeded per-clip jitter.
JointMotion synthetic_walk(int frames, uint32_t fps, int style, Rng& rng);

// Writes `clips` JNTM motions plus a two-class captioned manifest under
// dir/motions and dir/manifest.jsonl.
DatasetManifest generate_synthetic_corpus(const std::string& dir, int clips, uint64_t seed);

// Caption pools per style (index 0: curated, later entries: wild).
std::vector<std::string> synthetic_captions(int style);

// ---- Token-space bigram corpus (denoiser/sampler statistics) ----

// Row-stochastic K x K transition matrix with strong directional structure:
// class 0 prefers successor (a+1) mod K, class 1 prefers (a-1) mod K, each
// with the given probability and the rest spread uniformly.
Eigen::MatrixXd bigram_matrix(int K, int cls, double peak = 0.85);

// Stationary distribution of a row-stochastic matrix (power iteration).
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P);

// Length-n sequence: u_0 ~ init, u_{i+1} ~ P(u_i, .).
TokenSequence sample_bigram_sequence(const Eigen::MatrixXd& P, const Eigen::VectorXd& init, int n,
                                     Rng& rng);

// Empirical joint distribution of adjacent pairs, flattened K x K.
Eigen::MatrixXd empirical_bigram_joint(const std::vector<TokenSequence>& seqs, int K);

// Total-variation distance between two distributions (sum form, 0.5 * L1).
double total_variation(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);

// Log-likelihood of a sequence under (init, P); the classifier oracle picks
// the class with the higher value.
double bigram_log_likelihood(const TokenSequence& u, const Eigen::MatrixXd& P,
                             const Eigen::VectorXd& init);

}  // namespace mdd
