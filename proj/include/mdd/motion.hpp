// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdd/errors.hpp"

namespace mdd {

// Canonical 22-joint skeleton template (SMPL joint order).
namespace joints {
constexpr int kCount = 22;
constexpr int kRoot = 0;
constexpr int kLeftHip = 1;
constexpr int kRightHip = 2;
constexpr int kLeftAnkle = 7;
constexpr int kRightAnkle = 8;
constexpr int kLeftFoot = 10;
constexpr int kRightFoot = 11;
// Heel/toe joints driving the 4 foot-contact channels, in feature order.
constexpr int kContact[4] = {kLeftAnkle, kLeftFoot, kRightAnkle, kRightFoot};
// Parent of each joint; -1 for the root.
constexpr int kParent[kCount] = {-1, 0, 0,  0,  1,  2,  3,  4,  5,  6,  7,
                                 8,  9, 9,  9,  12, 13, 14, 16, 17, 18, 19};
}  // namespace joints

// Raw joint-position motion: frames of (j x 3) positions in meters, Y up.
struct JointMotion {
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> frames;
  uint32_t fps = 0;
  int j = 0;

  int frame_count() const { return static_cast<int>(frames.size()); }
  void validate() const;
};

// Per-frame pose features in the redundant representation. For j joints the
// width is 4 + 3(j-1) + 3j + 6(j-1) + 4 = 12j - 1 (263 for j = 22):
//   [0]          root angular velocity about Y, rad/frame
//   [1..2]       root velocity in the frame's local XZ, m/frame
//   [3]          root height
//   [4 ..]       local positions, joints 1..j-1 (root-relative XZ, absolute Y)
//   then         local velocities, all j joints, in the local frame
//   then         6D rotations (first two rotation-matrix columns), joints 1..j-1
//   last 4       foot contacts in [0,1]
struct MotionClip {
  Eigen::MatrixXd features;  // N x D
  uint32_t fps = 20;

  int frame_count() const { return static_cast<int>(features.rows()); }
  int width() const { return static_cast<int>(features.cols()); }
  void validate() const;
};

constexpr int kMaxClipFrames = 196;
constexpr uint32_t kCanonicalFps = 20;
constexpr double kFootContactThreshold = 0.002;  // m/frame

inline int feature_width(int j) { return 12 * j - 1; }
inline int joints_from_width(int width) {
  if ((width + 1) % 12 != 0) throw DataError("MotionClip: width is not 12j-1");
  return (width + 1) / 12;
}

struct CanonicalizeResult {
  JointMotion motion;
  bool resampled_by_interpolation = false;  // source fps not a multiple of target
};

// Decimate (or interpolate) to target_fps, front-truncate to max_frames,
// shift the frame-0 root onto the XZ origin and rotate the whole clip so the
// frame-0 facing direction is +Z.
CanonicalizeResult canonicalize(const JointMotion& motion, uint32_t target_fps = kCanonicalFps,
                                int max_frames = kMaxClipFrames);

// Encode a canonicalized motion into pose features; output has one frame
// fewer than the input (the last frame has no velocity).
MotionClip encode_features(const JointMotion& motion);

// Inverse codec: rebuild joint positions from features, assuming the
// canonical start (root at XZ origin, facing +Z).
JointMotion decode_features(const MotionClip& clip);

// (N-1) x 4 contact indicators: 1 where the heel/toe joint moved less than
// threshold between consecutive frames.
Eigen::MatrixXd detect_foot_contacts(const JointMotion& motion,
                                     double threshold = kFootContactThreshold);

// Facing yaw angle of one frame, from the hip-to-hip line crossed with +Y.
double facing_yaw(const Eigen::Matrix<double, Eigen::Dynamic, 3>& frame);

// Binary container formats (little-endian f32 payloads).
void save_motion_clip(const MotionClip& clip, const std::string& path);   // "MCLP"
MotionClip load_motion_clip(const std::string& path);
void save_joint_motion(const JointMotion& motion, const std::string& path);  // "JNTM"
JointMotion load_joint_motion(const std::string& path);

}  // namespace mdd
