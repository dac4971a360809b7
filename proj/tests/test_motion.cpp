// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "mdd/motion.hpp"
#include "mdd/synth.hpp"

using namespace mdd;

namespace {

constexpr double kPi = 3.14159265358979323846;

JointMotion still_pose(int frames, uint32_t fps) {
  JointMotion m;
  m.fps = fps;
  m.j = joints::kCount;
  const auto pose = rest_pose();
  for (int i = 0; i < frames; ++i) m.frames.push_back(pose);
  return m;
}

JointMotion translating_pose(int frames, uint32_t fps, const Eigen::Vector3d& step) {
  JointMotion m = still_pose(frames, fps);
  for (int i = 0; i < frames; ++i)
    for (int k = 0; k < m.j; ++k) m.frames[i].row(k) += (i * step).transpose();
  return m;
}

JointMotion apply_planar_rigid(const JointMotion& m, double yaw, double tx, double tz) {
  JointMotion out = m;
  const double c = std::cos(yaw), s = std::sin(yaw);
  for (auto& f : out.frames)
    for (int k = 0; k < out.j; ++k) {
      const double x = f(k, 0), z = f(k, 2);
      f(k, 0) = c * x + s * z + tx;
      f(k, 2) = -s * x + c * z + tz;
    }
  return out;
}

}  // namespace

TEST_CASE("feature width is 263 for the 22-joint template") {
  CHECK(feature_width(22) == 263);
  CHECK(joints_from_width(263) == 22);
  CHECK_THROWS_AS(joints_from_width(260), DataError);
}

TEST_CASE("canonicalize keeps an already-canonical clip unchanged") {
  Rng rng(1);
  JointMotion m = still_pose(8, 20);
  // Rest pose faces +Z with root on the XZ origin already.
  const CanonicalizeResult res = canonicalize(m);
  CHECK_FALSE(res.resampled_by_interpolation);
  REQUIRE(res.motion.frame_count() == 8);
  for (int i = 0; i < 8; ++i)
    CHECK((res.motion.frames[i] - m.frames[i]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("canonicalize decimates 40 fps 400 frames to 20 fps 196 frames") {
  Rng rng(2);
  const JointMotion m = synthetic_walk(400, 40, 0, rng);
  const CanonicalizeResult res = canonicalize(m);
  CHECK(res.motion.fps == 20);
  CHECK(res.motion.frame_count() == 196);
  CHECK_FALSE(res.resampled_by_interpolation);
}

TEST_CASE("canonicalize resamples non-multiple rates with a warning flag") {
  const JointMotion m = still_pose(30, 30);
  const CanonicalizeResult res = canonicalize(m);
  CHECK(res.resampled_by_interpolation);
  CHECK(res.motion.fps == 20);
}

TEST_CASE("canonicalize rejects too-short or too-slow input") {
  JointMotion one = still_pose(1, 20);
  CHECK_THROWS_AS(canonicalize(one), DataError);
  JointMotion slow = still_pose(10, 10);
  CHECK_THROWS_AS(canonicalize(slow), DataError);
}

TEST_CASE("canonicalize moves frame-0 root to origin facing +Z") {
  // Fixture turned away from +Z and shifted; the same rigid transform must
  // hit every frame.
  JointMotion m = translating_pose(3, 20, Eigen::Vector3d(0.01, 0.0, 0.03));
  const double yaw = 2.1;
  JointMotion placed = apply_planar_rigid(m, yaw, 1.0, 2.0);
  // Hand-applied inverse transform as the expected oracle.
  const CanonicalizeResult res = canonicalize(placed);
  const auto& out = res.motion;
  CHECK(out.frames[0](joints::kRoot, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.frames[0](joints::kRoot, 2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.frames[0](joints::kRoot, 1) ==
        doctest::Approx(placed.frames[0](joints::kRoot, 1)).epsilon(1e-12));
  CHECK(facing_yaw(out.frames[0]) == doctest::Approx(0.0).epsilon(1e-9));
  // Later frames must equal the original canonical motion (same transform).
  const CanonicalizeResult base = canonicalize(m);
  for (int i = 0; i < 3; ++i)
    CHECK((out.frames[i] - base.motion.frames[i]).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("encode_features: standing still gives zero velocities and full contacts") {
  const JointMotion m = still_pose(6, 20);
  const MotionClip clip = encode_features(m);
  CHECK(clip.frame_count() == 5);  // last frame dropped
  CHECK(clip.width() == 263);
  const int contact_off = 263 - 4;
  for (int i = 0; i < clip.frame_count(); ++i) {
    CHECK(clip.features(i, 0) == doctest::Approx(0.0).epsilon(1e-12));  // angular velocity
    CHECK(clip.features(i, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(clip.features(i, 2) == doctest::Approx(0.0).epsilon(1e-12));
    // All local velocities zero.
    for (int c = 4 + 63; c < 4 + 63 + 66; ++c)
      CHECK(clip.features(i, c) == doctest::Approx(0.0).epsilon(1e-12));
    for (int c = contact_off; c < 263; ++c) CHECK(clip.features(i, c) == 1.0);
  }
}

TEST_CASE("encode_features: uniform +Z translation shows up only in r_z") {
  const double v = 0.013;
  const JointMotion m = translating_pose(5, 20, Eigen::Vector3d(0.0, 0.0, v));
  const MotionClip clip = encode_features(m);
  for (int i = 0; i < clip.frame_count(); ++i) {
    CHECK(clip.features(i, 0) == doctest::Approx(0.0).epsilon(1e-12));  // r_a
    CHECK(clip.features(i, 1) == doctest::Approx(0.0).epsilon(1e-12));  // r_x
    CHECK(clip.features(i, 2) == doctest::Approx(v).epsilon(1e-12));    // r_z
  }
}

TEST_CASE("encode_features rejects non-finite coordinates") {
  JointMotion m = still_pose(4, 20);
  m.frames[2](5, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(encode_features(m), DataError);
}

TEST_CASE("encode_features matches a hand-computed walking fixture") {
  // 5-frame fixture: constant forward speed, one swinging arm. Velocities
  // are finite differences; the swinging wrist's local velocity must match.
  JointMotion m = still_pose(5, 20);
  const double v = 0.02, swing = 0.015;
  for (int i = 0; i < 5; ++i) {
    for (int k = 0; k < m.j; ++k) m.frames[i](k, 2) += i * v;
    m.frames[i](20, 2) += swing * std::sin(0.8 * i);  // L wrist
  }
  const MotionClip clip = encode_features(m);
  const int vel_off = 4 + 63;
  for (int i = 0; i < 4; ++i) {
    // Root: pure +Z advance, no rotation.
    CHECK(clip.features(i, 2) == doctest::Approx(v).epsilon(1e-9));
    // Wrist local velocity z = v + swing derivative (finite difference).
    const double dwrist = swing * (std::sin(0.8 * (i + 1)) - std::sin(0.8 * i));
    CHECK(clip.features(i, vel_off + 3 * 20 + 2) == doctest::Approx(v + dwrist).epsilon(1e-9));
    // A planted joint (root) has local velocity (0, 0, v).
    CHECK(clip.features(i, vel_off + 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(clip.features(i, vel_off + 2) == doctest::Approx(v).epsilon(1e-9));
  }
  // 6D rotation of a vertical-to-vertical bone is the identity's columns.
  const int rot_off = 4 + 63 + 66;
  const int knee_block = rot_off + 6 * (4 - 1);  // joint 4, L knee
  CHECK(clip.features(0, knee_block + 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(clip.features(0, knee_block + 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(clip.features(0, knee_block + 4) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("6D rotations come from Gram-Schmidt-orthonormal columns") {
  Rng rng(7);
  const JointMotion m = synthetic_walk(40, 20, 0, rng);
  const MotionClip clip = encode_features(canonicalize(m).motion);
  const int rot_off = 4 + 63 + 66;
  for (int jnt = 1; jnt < 22; ++jnt) {
    const Eigen::Vector3d a = clip.features.row(0).segment(rot_off + 6 * (jnt - 1), 3);
    const Eigen::Vector3d b = clip.features.row(0).segment(rot_off + 6 * (jnt - 1) + 3, 3);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(b.norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(a.dot(b) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("decode inverts encode within 1e-4 on canonical fixtures") {
  Rng rng(11);
  for (int style : {0, 1}) {
    const JointMotion m = synthetic_walk(120, 20, style, rng);
    const JointMotion canon = canonicalize(m).motion;
    const MotionClip clip = encode_features(canon);
    const JointMotion back = decode_features(clip);
    REQUIRE(back.frame_count() == canon.frame_count() - 1);
    double max_err = 0.0;
    for (int i = 0; i < back.frame_count(); ++i)
      max_err = std::max(max_err, (back.frames[i] - canon.frames[i]).cwiseAbs().maxCoeff());
    CHECK(max_err <= 1e-4);
  }
}

TEST_CASE("decode of an all-zero-velocity clip is a constant pose") {
  const JointMotion m = still_pose(6, 20);
  const MotionClip clip = encode_features(m);
  const JointMotion back = decode_features(clip);
  for (int i = 1; i < back.frame_count(); ++i)
    CHECK((back.frames[i] - back.frames[0]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("single-frame clip decodes to a single pose at the stored root height") {
  const JointMotion m = still_pose(2, 20);
  MotionClip clip = encode_features(m);  // one feature frame
  REQUIRE(clip.frame_count() == 1);
  const JointMotion back = decode_features(clip);
  CHECK(back.frame_count() == 1);
  CHECK(back.frames[0](joints::kRoot, 1) == doctest::Approx(rest_pose()(0, 1)).epsilon(1e-9));
}

TEST_CASE("rigid invariance: planar rotation + translation cancels out") {
  Rng rng(13);
  const JointMotion m = synthetic_walk(60, 20, 0, rng);
  const MotionClip base = encode_features(canonicalize(m).motion);
  for (int trial = 0; trial < 4; ++trial) {
    const double yaw = rng.uniform(0.0, 2.0 * kPi);
    const JointMotion moved =
        apply_planar_rigid(m, yaw, rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    const MotionClip other = encode_features(canonicalize(moved).motion);
    CHECK((other.features - base.features).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("detect_foot_contacts: static pose is fully planted") {
  const JointMotion m = still_pose(4, 20);
  const Eigen::MatrixXd contacts = detect_foot_contacts(m);
  CHECK(contacts.rows() == 3);
  CHECK(contacts.minCoeff() == 1.0);
}

TEST_CASE("detect_foot_contacts: fast global motion lifts every contact") {
  const JointMotion m = translating_pose(4, 20, Eigen::Vector3d(0.0, 0.0, 0.02));
  const Eigen::MatrixXd contacts = detect_foot_contacts(m, kFootContactThreshold);
  CHECK(contacts.maxCoeff() == 0.0);
}

TEST_CASE("detect_foot_contacts: one planted foot produces the hand-set pattern") {
  JointMotion m = still_pose(3, 20);
  // Swing only the right ankle and right foot above threshold.
  for (int i = 0; i < 3; ++i) {
    m.frames[i](joints::kRightAnkle, 2) += 0.01 * i;
    m.frames[i](joints::kRightFoot, 2) += 0.01 * i;
  }
  const Eigen::MatrixXd contacts = detect_foot_contacts(m);
  for (int i = 0; i < 2; ++i) {
    CHECK(contacts(i, 0) == 1.0);  // L ankle
    CHECK(contacts(i, 1) == 1.0);  // L foot
    CHECK(contacts(i, 2) == 0.0);  // R ankle
    CHECK(contacts(i, 3) == 0.0);  // R foot
  }
}

TEST_CASE("motion files round trip through MCLP and JNTM") {
  Rng rng(17);
  const JointMotion m = synthetic_walk(50, 20, 1, rng);
  const MotionClip clip = encode_features(canonicalize(m).motion);

  save_motion_clip(clip, "roundtrip.mclp");
  const MotionClip clip2 = load_motion_clip("roundtrip.mclp");
  CHECK(clip2.fps == clip.fps);
  // f32 storage: exact to float precision.
  CHECK((clip2.features - clip.features).cwiseAbs().maxCoeff() <= 1e-6);

  save_joint_motion(m, "roundtrip.jntm");
  const JointMotion m2 = load_joint_motion("roundtrip.jntm");
  CHECK(m2.fps == m.fps);
  CHECK(m2.j == m.j);
  double err = 0.0;
  for (int i = 0; i < m.frame_count(); ++i)
    err = std::max(err, (m2.frames[i] - m.frames[i]).cwiseAbs().maxCoeff());
  CHECK(err <= 1e-5);

  std::remove("roundtrip.mclp");
  std::remove("roundtrip.jntm");

  CHECK_THROWS_AS(load_motion_clip("missing_file.mclp"), DataError);
}
