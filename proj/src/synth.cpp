// SPDX-License-Identifier: Apache-2.0
#include "mdd/synth.hpp"

#include <cmath>
#include <filesystem>

namespace mdd {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> rest_pose(double root_height) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> p(joints::kCount, 3);
  p.setZero();
  auto set = [&](int j, double x, double y, double z) { p.row(j) << x, y, z; };
  set(0, 0.00, root_height, 0.00);
  set(1, 0.10, root_height - 0.02, 0.00);   // L hip
  set(2, -0.10, root_height - 0.02, 0.00);  // R hip
  set(3, 0.00, root_height + 0.12, 0.00);   // spine1
  set(4, 0.10, root_height - 0.45, 0.00);   // L knee
  set(5, -0.10, root_height - 0.45, 0.00);  // R knee
  set(6, 0.00, root_height + 0.26, 0.00);   // spine2
  set(7, 0.10, root_height - 0.85, 0.00);   // L ankle
  set(8, -0.10, root_height - 0.85, 0.00);  // R ankle
  set(9, 0.00, root_height + 0.40, 0.00);   // spine3
  set(10, 0.10, root_height - 0.88, 0.12);  // L foot
  set(11, -0.10, root_height - 0.88, 0.12); // R foot
  set(12, 0.00, root_height + 0.52, 0.00);  // neck
  set(13, 0.07, root_height + 0.46, 0.00);  // L collar
  set(14, -0.07, root_height + 0.46, 0.00); // R collar
  set(15, 0.00, root_height + 0.64, 0.02);  // head
  set(16, 0.18, root_height + 0.44, 0.00);  // L shoulder
  set(17, -0.18, root_height + 0.44, 0.00); // R shoulder
  set(18, 0.22, root_height + 0.18, 0.00);  // L elbow
  set(19, -0.22, root_height + 0.18, 0.00); // R elbow
  set(20, 0.24, root_height - 0.05, 0.00);  // L wrist
  set(21, -0.24, root_height - 0.05, 0.00); // R wrist
  return p;
}

JointMotion synthetic_walk(int frames, uint32_t fps, int style, Rng& rng) {
  if (frames < 2) throw DataError("synthetic_walk: need at least 2 frames");
  const auto rest = rest_pose();
  const Eigen::Vector3d root0 = rest.row(joints::kRoot).transpose();

  // Per-clip jitter.
  const double speed = 0.9 + 0.3 * rng.uniform();            // m/s
  const double stride_hz = 1.6 + 0.4 * rng.uniform();        // steps per second
  const double swing = 0.12 + 0.06 * rng.uniform();          // leg swing amplitude, m
  const double arm_swing = 0.08 + 0.05 * rng.uniform();
  const double bob = 0.015 + 0.01 * rng.uniform();
  const double turn_rate = style == 1 ? (0.35 + 0.2 * rng.uniform()) : 0.0;  // rad/s
  const double phase0 = kTau * rng.uniform();

  JointMotion m;
  m.fps = fps;
  m.j = joints::kCount;
  m.frames.reserve(static_cast<size_t>(frames));

  double x = rng.uniform(-1.0, 1.0), z = rng.uniform(-1.0, 1.0);  // start offset
  double yaw = rng.uniform(0.0, kTau);                            // start heading
  const double dt = 1.0 / static_cast<double>(fps);

  for (int f = 0; f < frames; ++f) {
    const double tsec = f * dt;
    const double phase = phase0 + kTau * stride_hz * tsec;
    const double c = std::cos(yaw), s = std::sin(yaw);

    Eigen::Matrix<double, Eigen::Dynamic, 3> frame(joints::kCount, 3);
    for (int jnt = 0; jnt < joints::kCount; ++jnt) {
      Eigen::Vector3d local = rest.row(jnt).transpose() - root0;

      // Limb swing in the local frame (legs opposite phase, arms counter).
      const double leg = swing * std::sin(phase);
      const double arm = arm_swing * std::sin(phase + kTau / 2.0);
      switch (jnt) {
        case 4: case 7: case 10: local.z() += leg; break;          // left leg
        case 5: case 8: case 11: local.z() -= leg; break;          // right leg
        case 18: case 20: local.z() -= arm; break;                 // left arm
        case 19: case 21: local.z() += arm; break;                 // right arm
        default: break;
      }
      // Rotate into the heading and translate onto the root path.
      const Eigen::Vector3d world(c * local.x() + s * local.z(), local.y(),
                                  -s * local.x() + c * local.z());
      frame.row(jnt) = world.transpose();
      frame(jnt, 0) += x;
      frame(jnt, 1) += root0.y() + bob * std::sin(2.0 * phase);
      frame(jnt, 2) += z;
    }
    m.frames.push_back(frame);

    x += std::sin(yaw) * speed * dt;
    z += std::cos(yaw) * speed * dt;
    yaw += turn_rate * dt;
  }
  return m;
}

std::vector<std::string> synthetic_captions(int style) {
  if (style == 0)
    return {"a person walks forward at a steady pace",
            "someone strolls straight ahead",
            "the figure keeps walking in a straight line"};
  return {"a person walks in a circle turning left",
          "someone wanders along a curved path",
          "the figure keeps turning while walking"};
}

DatasetManifest generate_synthetic_corpus(const std::string& dir, int clips, uint64_t seed) {
  if (clips < 2) throw DataError("generate_synthetic_corpus: need at least 2 clips");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "motions");

  Rng rng(seed);
  DatasetManifest manifest;
  for (int i = 0; i < clips; ++i) {
    const int style = i % 2;
    const int frames = 200 + rng.uniform_int(201);  // 200..400 at 40 fps
    const JointMotion motion = synthetic_walk(frames, 40, style, rng);

    char name[64];
    std::snprintf(name, sizeof(name), "motions/clip_%04d.jntm", i);
    const std::string rel = name;
    save_joint_motion(motion, (fs::path(dir) / rel).string());

    ManifestRecord rec;
    rec.motion_path = rel;
    const auto captions = synthetic_captions(style);
    for (size_t ci = 0; ci < captions.size(); ++ci) {
      CaptionEntry cap;
      cap.text = captions[ci];
      cap.source = ci == 0 ? "curated" : "wild";
      rec.captions.push_back(std::move(cap));
    }
    manifest.records.push_back(std::move(rec));
  }
  manifest.save((fs::path(dir) / "manifest.jsonl").string());
  return manifest;
}

Eigen::MatrixXd bigram_matrix(int K, int cls, double peak) {
  if (K < 2) throw DataError("bigram_matrix: K < 2");
  Eigen::MatrixXd P = Eigen::MatrixXd::Constant(K, K, (1.0 - peak) / (K - 1));
  for (int a = 0; a < K; ++a) {
    const int succ = cls == 0 ? (a + 1) % K : (a + K - 1) % K;
    P(a, succ) = peak;
  }
  return P;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P) {
  const int K = static_cast<int>(P.rows());
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(K, 1.0 / K);
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd next = P.transpose() * pi;
    next /= next.sum();
    if ((next - pi).cwiseAbs().maxCoeff() < 1e-14) return next;
    pi = next;
  }
  return pi;
}

TokenSequence sample_bigram_sequence(const Eigen::MatrixXd& P, const Eigen::VectorXd& init,
                                     int n, Rng& rng) {
  const int K = static_cast<int>(P.rows());
  TokenSequence u;
  u.codebook_size = K;
  u.tokens.resize(static_cast<size_t>(n));
  u.tokens[0] = rng.categorical(init, K);
  for (int i = 1; i < n; ++i) u.tokens[i] = rng.categorical(P.row(u.tokens[i - 1]), K);
  return u;
}

Eigen::MatrixXd empirical_bigram_joint(const std::vector<TokenSequence>& seqs, int K) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(K, K);
  double total = 0.0;
  for (const auto& u : seqs)
    for (int i = 0; i + 1 < u.length(); ++i) {
      counts(u.tokens[i], u.tokens[i + 1]) += 1.0;
      total += 1.0;
    }
  if (total <= 0.0) throw DataError("empirical_bigram_joint: no adjacent pairs");
  return counts / total;
}

double total_variation(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  return 0.5 * (p - q).cwiseAbs().sum();
}

double bigram_log_likelihood(const TokenSequence& u, const Eigen::MatrixXd& P,
                             const Eigen::VectorXd& init) {
  double ll = std::log(std::max(init[u.tokens[0]], 1e-300));
  for (int i = 0; i + 1 < u.length(); ++i)
    ll += std::log(std::max(P(u.tokens[i], u.tokens[i + 1]), 1e-300));
  return ll;
}

}  // namespace mdd
