// SPDX-License-Identifier: Apache-2.0
#include "mdd/motion.hpp"

#include <cmath>

#include "mdd/binio.hpp"

namespace mdd {

namespace {

using Frame = Eigen::Matrix<double, Eigen::Dynamic, 3>;

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Eigen::Matrix3d rot_y(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Eigen::Matrix3d R;
  R << c, 0, s, 0, 1, 0, -s, 0, c;
  return R;
}

// Rest-pose bone directions (parent -> joint, unit vectors) for the 22-joint
// template in a T-pose facing +Z: legs point down, spine and neck up, collar
// and arm segments sideways.
Eigen::Matrix<double, 22, 3> rest_directions() {
  Eigen::Matrix<double, 22, 3> d;
  d.setZero();
  auto set = [&](int jnt, double x, double y, double z) { d.row(jnt) << x, y, z; };
  set(1, 1, 0, 0);    // L hip
  set(2, -1, 0, 0);   // R hip
  set(3, 0, 1, 0);    // spine1
  set(4, 0, -1, 0);   // L knee
  set(5, 0, -1, 0);   // R knee
  set(6, 0, 1, 0);    // spine2
  set(7, 0, -1, 0);   // L ankle
  set(8, 0, -1, 0);   // R ankle
  set(9, 0, 1, 0);    // spine3
  set(10, 0, 0, 1);   // L foot
  set(11, 0, 0, 1);   // R foot
  set(12, 0, 1, 0);   // neck
  set(13, 1, 0, 0);   // L collar
  set(14, -1, 0, 0);  // R collar
  set(15, 0, 1, 0);   // head
  set(16, 1, 0, 0);   // L shoulder
  set(17, -1, 0, 0);  // R shoulder
  set(18, 1, 0, 0);   // L elbow
  set(19, -1, 0, 0);  // R elbow
  set(20, 1, 0, 0);   // L wrist
  set(21, -1, 0, 0);  // R wrist
  return d;
}

// Minimal rotation taking unit vector u onto unit vector v (Rodrigues).
Eigen::Matrix3d rotation_between(const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
  const Eigen::Vector3d axis = u.cross(v);
  const double s2 = axis.squaredNorm();
  const double c = u.dot(v);
  if (s2 < 1e-24) {
    if (c > 0.0) return Eigen::Matrix3d::Identity();
    // Antiparallel: rotate pi about any axis perpendicular to u.
    Eigen::Vector3d p = std::abs(u.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    p = (p - p.dot(u) * u).normalized();
    return 2.0 * p * p.transpose() - Eigen::Matrix3d::Identity();
  }
  Eigen::Matrix3d Ax;
  Ax << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return Eigen::Matrix3d::Identity() + Ax + Ax * Ax * ((1.0 - c) / s2);
}

void require_template(const JointMotion& m, const char* op) {
  if (m.j != joints::kCount)
    throw DataError(std::string(op) + ": expected the " + std::to_string(joints::kCount) +
                    "-joint template, got j=" + std::to_string(m.j));
}

}  // namespace

void JointMotion::validate() const {
  if (frame_count() < 1) throw DataError("JointMotion: no frames");
  if (j < 2) throw DataError("JointMotion: joint count < 2");
  if (fps < 1) throw DataError("JointMotion: fps < 1");
  for (const auto& f : frames) {
    if (f.rows() != j) throw DataError("JointMotion: frame joint count mismatch");
    if (!f.allFinite()) throw DataError("JointMotion: non-finite coordinate");
  }
}

void MotionClip::validate() const {
  if (frame_count() < 1) throw DataError("MotionClip: no frames");
  if (frame_count() > kMaxClipFrames) throw DataError("MotionClip: longer than 196 frames");
  if (!features.allFinite()) throw DataError("MotionClip: non-finite feature");
}

double facing_yaw(const Frame& frame) {
  const Eigen::Vector3d across =
      frame.row(joints::kRightHip).transpose() - frame.row(joints::kLeftHip).transpose();
  Eigen::Vector3d fwd = Eigen::Vector3d::UnitY().cross(across);
  fwd.y() = 0.0;
  const double n = fwd.norm();
  if (n < 1e-9) throw DataError("facing_yaw: degenerate hip line, facing undefined");
  fwd /= n;
  return std::atan2(fwd.x(), fwd.z());
}

CanonicalizeResult canonicalize(const JointMotion& motion, uint32_t target_fps, int max_frames) {
  motion.validate();
  require_template(motion, "canonicalize");
  if (motion.frame_count() < 2) throw DataError("canonicalize: need at least 2 frames");
  if (motion.fps < target_fps)
    throw DataError("canonicalize: source fps below target fps");

  CanonicalizeResult res;
  JointMotion& out = res.motion;
  out.fps = target_fps;
  out.j = motion.j;

  if (motion.fps % target_fps == 0) {
    const uint32_t stride = motion.fps / target_fps;
    for (int i = 0; i < motion.frame_count(); i += static_cast<int>(stride))
      out.frames.push_back(motion.frames[i]);
  } else {
    res.resampled_by_interpolation = true;
    const double ratio = static_cast<double>(motion.fps) / static_cast<double>(target_fps);
    const int n_out =
        static_cast<int>(std::floor(static_cast<double>(motion.frame_count() - 1) / ratio)) + 1;
    for (int k = 0; k < n_out; ++k) {
      const double pos = k * ratio;
      const int lo = static_cast<int>(std::floor(pos));
      const int hi = std::min(lo + 1, motion.frame_count() - 1);
      const double w = pos - lo;
      out.frames.push_back(((1.0 - w) * motion.frames[lo] + w * motion.frames[hi]).eval());
    }
  }

  if (out.frame_count() > max_frames) out.frames.resize(static_cast<size_t>(max_frames));
  if (out.frame_count() < 2) throw DataError("canonicalize: fewer than 2 frames after decimation");

  // One rigid transform from frame 0, applied uniformly.
  const Eigen::Vector3d root0 = out.frames[0].row(joints::kRoot).transpose();
  const Eigen::Vector3d shift(-root0.x(), 0.0, -root0.z());
  const double yaw0 = facing_yaw(out.frames[0]);
  const Eigen::Matrix3d R = rot_y(-yaw0);
  for (auto& f : out.frames) {
    for (int k = 0; k < out.j; ++k) {
      const Eigen::Vector3d p = f.row(k).transpose() + shift;
      f.row(k) = (R * p).transpose();
    }
  }
  return res;
}

Eigen::MatrixXd detect_foot_contacts(const JointMotion& motion, double threshold) {
  motion.validate();
  require_template(motion, "detect_foot_contacts");
  const int n = motion.frame_count() - 1;
  if (n < 1) throw DataError("detect_foot_contacts: need at least 2 frames");
  Eigen::MatrixXd contacts(n, 4);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 4; ++c) {
      const int jnt = joints::kContact[c];
      const double speed =
          (motion.frames[i + 1].row(jnt) - motion.frames[i].row(jnt)).norm();
      contacts(i, c) = speed < threshold ? 1.0 : 0.0;
    }
  return contacts;
}

MotionClip encode_features(const JointMotion& motion) {
  motion.validate();
  require_template(motion, "encode_features");
  if (motion.frame_count() < 2) throw DataError("encode_features: need at least 2 frames");

  const int j = motion.j;
  const int n = motion.frame_count() - 1;
  const int D = feature_width(j);
  const auto rest = rest_directions();
  const Eigen::MatrixXd contacts = detect_foot_contacts(motion);

  std::vector<double> yaw(motion.frame_count());
  for (int i = 0; i < motion.frame_count(); ++i) yaw[i] = facing_yaw(motion.frames[i]);

  MotionClip clip;
  clip.fps = motion.fps;
  clip.features.resize(n, D);

  const int pos_off = 4;
  const int vel_off = pos_off + 3 * (j - 1);
  const int rot_off = vel_off + 3 * j;
  const int contact_off = rot_off + 6 * (j - 1);

  for (int i = 0; i < n; ++i) {
    const Frame& cur = motion.frames[i];
    const Frame& nxt = motion.frames[i + 1];
    const Eigen::Matrix3d Rinv = rot_y(-yaw[i]);
    const Eigen::Vector3d root = cur.row(joints::kRoot).transpose();
    auto row = clip.features.row(i);

    row[0] = wrap_angle(yaw[i + 1] - yaw[i]);
    const Eigen::Vector3d dv =
        Rinv * (nxt.row(joints::kRoot) - cur.row(joints::kRoot)).transpose();
    row[1] = dv.x();
    row[2] = dv.z();
    row[3] = root.y();

    for (int k = 1; k < j; ++k) {
      const Eigen::Vector3d local =
          Rinv * (cur.row(k).transpose() - Eigen::Vector3d(root.x(), 0.0, root.z()));
      row.segment(pos_off + 3 * (k - 1), 3) = local.transpose();
    }
    for (int k = 0; k < j; ++k) {
      const Eigen::Vector3d v = Rinv * (nxt.row(k) - cur.row(k)).transpose();
      row.segment(vel_off + 3 * k, 3) = v.transpose();
    }
    for (int k = 1; k < j; ++k) {
      const int par = joints::kParent[k];
      Eigen::Vector3d bone = Rinv * (cur.row(k) - cur.row(par)).transpose();
      const double bn = bone.norm();
      Eigen::Matrix3d Rj = Eigen::Matrix3d::Identity();
      if (bn > 1e-9) Rj = rotation_between(rest.row(k).transpose(), bone / bn);
      row.segment(rot_off + 6 * (k - 1), 3) = Rj.col(0).transpose();
      row.segment(rot_off + 6 * (k - 1) + 3, 3) = Rj.col(1).transpose();
    }
    row.segment(contact_off, 4) = contacts.row(i);
  }
  clip.validate();
  return clip;
}

JointMotion decode_features(const MotionClip& clip) {
  clip.validate();
  const int j = joints_from_width(clip.width());
  const int n = clip.frame_count();

  const int pos_off = 4;

  JointMotion out;
  out.fps = clip.fps;
  out.j = j;
  out.frames.reserve(static_cast<size_t>(n));

  double yaw = 0.0, x = 0.0, z = 0.0;  // canonical start
  for (int i = 0; i < n; ++i) {
    const auto row = clip.features.row(i);
    const Eigen::Matrix3d R = rot_y(yaw);
    Frame f(j, 3);
    f.row(joints::kRoot) << x, row[3], z;
    for (int k = 1; k < j; ++k) {
      const Eigen::Vector3d local = row.segment(pos_off + 3 * (k - 1), 3).transpose();
      const Eigen::Vector3d p = R * local + Eigen::Vector3d(x, 0.0, z);
      f.row(k) = p.transpose();
    }
    out.frames.push_back(f);

    const Eigen::Vector3d step = R * Eigen::Vector3d(row[1], 0.0, row[2]);
    x += step.x();
    z += step.z();
    yaw += row[0];
  }
  return out;
}

void save_motion_clip(const MotionClip& clip, const std::string& path) {
  clip.validate();
  BinaryWriter w(path);
  w.magic("MCLP");
  w.u32(1);
  w.u32(clip.fps);
  w.u32(static_cast<uint32_t>(clip.frame_count()));
  w.u32(static_cast<uint32_t>(clip.width()));
  w.f32_matrix(clip.features);
  w.close();
}

MotionClip load_motion_clip(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("MCLP");
  const uint32_t version = r.u32();
  if (version != 1) throw DataError(path + ": unsupported MCLP version");
  MotionClip clip;
  clip.fps = r.u32();
  const uint32_t n = r.u32();
  const uint32_t d = r.u32();
  clip.features = r.f32_matrix(n, d);
  return clip;
}

void save_joint_motion(const JointMotion& motion, const std::string& path) {
  motion.validate();
  BinaryWriter w(path);
  w.magic("JNTM");
  w.u32(1);
  w.u32(motion.fps);
  w.u32(static_cast<uint32_t>(motion.frame_count()));
  w.u32(static_cast<uint32_t>(motion.j));
  for (const auto& f : motion.frames)
    for (int k = 0; k < motion.j; ++k)
      for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(f(k, c)));
  w.close();
}

JointMotion load_joint_motion(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("JNTM");
  const uint32_t version = r.u32();
  if (version != 1) throw DataError(path + ": unsupported JNTM version");
  JointMotion m;
  m.fps = r.u32();
  const uint32_t n = r.u32();
  m.j = static_cast<int>(r.u32());
  m.frames.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    Frame f(m.j, 3);
    for (int k = 0; k < m.j; ++k)
      for (int c = 0; c < 3; ++c) f(k, c) = static_cast<double>(r.f32());
    m.frames.push_back(std::move(f));
  }
  return m;
}

}  // namespace mdd
