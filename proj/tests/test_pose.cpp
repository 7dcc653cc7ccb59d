#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hom_oracle.hpp"
#include "pgwm/rng.hpp"

using namespace pgwm;
using pgwm::testutil::Hom44;

namespace {

Pose random_pose(Rng &rng, double t_range = 20.0, double r_range = 40.0) {
  Pose p;
  for (int i = 0; i < 3; ++i) p.t[i] = rng.uniform(-t_range, t_range);
  for (int i = 0; i < 3; ++i) p.r[i] = rng.uniform(-r_range, r_range);
  return p;
}

} // namespace

TEST_CASE("relative pose of a pose with itself is zero") {
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    Pose p = random_pose(rng);
    PoseDelta d = relative_pose(p, p);
    CHECK(d.a.norm() < 1e-9);
  }
}

TEST_CASE("pure translation delta") {
  Pose src = Pose::identity();
  Pose tgt = src;
  tgt.t[0] += 5.0;
  PoseDelta d = relative_pose(src, tgt);
  CHECK(d.a[0] == doctest::Approx(5.0).epsilon(1e-12));
  for (int i = 1; i < 6; ++i) CHECK(std::abs(d.a[i]) < 1e-12);
}

TEST_CASE("matches independent homogeneous-matrix oracle on 1000 random pairs") {
  Rng rng(42);
  int checked = 0;
  while (checked < 1000) {
    Pose a = random_pose(rng);
    Pose b = random_pose(rng);
    Hom44 ta = Hom44::from_pose(a.t, a.r);
    Hom44 tb = Hom44::from_pose(b.t, b.r);
    Hom44 delta = tb.mul(ta.inv());
    // skip oracle-side degeneracy the same way the library would
    if (std::abs(std::abs(std::asin(std::clamp(-delta.m[2][0], -1.0, 1.0)) * kRadToDeg) - 90.0) <
        1.0)
      continue;
    Eigen::Vector3d t_oracle, r_oracle;
    delta.decompose(t_oracle, r_oracle);
    PoseDelta d = relative_pose(a, b);
    CHECK((d.translation() - t_oracle).norm() < 1e-6);
    CHECK((d.rotation_deg() - r_oracle).norm() < 1e-6);
    ++checked;
  }
}

TEST_CASE("inverse property: relative_pose(tgt, src) is the rigid inverse") {
  Rng rng(7);
  for (int k = 0; k < 200; ++k) {
    Pose a = random_pose(rng, 15, 30);
    Pose b = random_pose(rng, 15, 30);
    PoseDelta fwd, bwd;
    try {
      fwd = relative_pose(a, b);
      bwd = relative_pose(b, a);
    } catch (const DegeneratePose &) {
      continue;
    }
    Eigen::Isometry3d prod = delta_to_transform(fwd) * delta_to_transform(bwd);
    CHECK((prod.matrix() - Eigen::Matrix4d::Identity()).norm() < 1e-9);
  }
}

TEST_CASE("apply/extract round-trip: relative_pose(p, apply(p, a)) == a") {
  Rng rng(13);
  for (int k = 0; k < 1000; ++k) {
    Pose p = random_pose(rng, 15, 25);
    PoseDelta a;
    for (int i = 0; i < 3; ++i) a.a[i] = rng.uniform(-10, 10);
    for (int i = 3; i < 6; ++i) a.a[i] = rng.uniform(-25, 25);
    Pose q;
    try {
      q = apply_delta(p, a);
    } catch (const DegeneratePose &) {
      continue;
    }
    PoseDelta back = relative_pose(p, q);
    CHECK((back.a - a.a).norm() < 1e-6);
  }
}

TEST_CASE("delta composition matches direct relative pose as rigid transforms") {
  Rng rng(17);
  for (int k = 0; k < 200; ++k) {
    Pose a = random_pose(rng, 12, 20);
    Pose b = random_pose(rng, 12, 20);
    Pose c = random_pose(rng, 12, 20);
    try {
      PoseDelta ab = relative_pose(a, b);
      PoseDelta bc = relative_pose(b, c);
      PoseDelta ac = relative_pose(a, c);
      Eigen::Isometry3d composed = delta_to_transform(bc) * delta_to_transform(ab);
      CHECK((composed.matrix() - delta_to_transform(ac).matrix()).norm() < 1e-6);
    } catch (const DegeneratePose &) {
      continue;
    }
  }
}

TEST_CASE("gimbal-lock region raises degenerate-pose") {
  Pose src = Pose::identity();
  Pose tgt = Pose::identity();
  tgt.r[1] = 90.0; // delta pitch exactly 90
  CHECK_THROWS_AS(relative_pose(src, tgt), DegeneratePose);
  tgt.r[1] = 89.8; // inside the 0.5 deg margin
  CHECK_THROWS_AS(relative_pose(src, tgt), DegeneratePose);
  tgt.r[1] = 85.0; // outside
  CHECK_NOTHROW(relative_pose(src, tgt));
}

TEST_CASE("angles wrap into (-180, 180]") {
  CHECK(wrap_angle_deg(190.0) == doctest::Approx(-170.0));
  CHECK(wrap_angle_deg(-190.0) == doctest::Approx(170.0));
  CHECK(wrap_angle_deg(180.0) == doctest::Approx(180.0));
  CHECK(wrap_angle_deg(-180.0) == doctest::Approx(180.0));
  CHECK(wrap_angle_deg(360.0) == doctest::Approx(0.0));
}

TEST_CASE("non-finite pose components are rejected") {
  Pose bad = Pose::identity();
  bad.t[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(relative_pose(bad, Pose::identity()), InvalidArgument);
}
