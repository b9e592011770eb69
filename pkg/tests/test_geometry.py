"""Frame algebra and back-projection tests.

Expected values are hand-computed from the pinhole equations and small
rotation examples; property tests run over seeded random rotations.
"""

import math

import numpy as np
import pytest

from telewrist.geometry import (
    CameraIntrinsics,
    InvalidDepth,
    NonOrthonormalRotation,
    PixelDepthPoint,
    Point3,
    RigidTransform,
    RollQuaternion,
    apply_transform,
    back_project,
    compose,
    invert_pose,
)


def rot_z(deg: float) -> np.ndarray:
    a = math.radians(deg)
    return np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    # QR of a Gaussian matrix, sign-fixed to det +1.
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


K = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0)


class TestBackProject:
    def test_principal_point_ray(self):
        # u=cx, v=cy, depth 1000 mm -> straight ahead at 1 m.
        p = back_project(PixelDepthPoint(320.0, 240.0, 1000.0), K)
        assert (p.x, p.y, p.z) == (0.0, 0.0, 1.0)

    def test_offcenter_pixel(self):
        # X = (380-320)*1.0/600 = 0.1, Y = (300-240)*1.0/600 = 0.1
        p = back_project(PixelDepthPoint(380.0, 300.0, 1000.0), K)
        assert p.x == pytest.approx(0.1, abs=1e-12)
        assert p.y == pytest.approx(0.1, abs=1e-12)
        assert p.z == 1.0

    def test_left_of_center_two_meters(self):
        # X = (260-320)*2.0/600 = -0.2, Y = 0, Z = 2.0
        p = back_project(PixelDepthPoint(260.0, 240.0, 2000.0), K)
        assert p.x == pytest.approx(-0.2, abs=1e-12)
        assert p.y == 0.0
        assert p.z == 2.0

    def test_zero_depth_rejected(self):
        with pytest.raises(InvalidDepth):
            back_project(PixelDepthPoint(100.0, 100.0, 0.0), K)

    def test_homogeneous_in_depth(self):
        # Doubling depth doubles all three components exactly.
        a = back_project(PixelDepthPoint(123.0, 77.0, 700.0), K)
        b = back_project(PixelDepthPoint(123.0, 77.0, 1400.0), K)
        assert (b.x, b.y, b.z) == (2 * a.x, 2 * a.y, 2 * a.z)

    def test_matches_independent_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            fx, fy = rng.uniform(100, 1200, 2)
            w, h = 640, 480
            cx, cy = rng.uniform(1, w - 1), rng.uniform(1, h - 1)
            k = CameraIntrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=w, height=h)
            u, v = rng.uniform(0, w), rng.uniform(0, h)
            depth = rng.uniform(1.0, 8000.0)
            p = back_project(PixelDepthPoint(u, v, depth), k)
            z = depth / 1000.0
            expect = np.array([(u - cx) * z / fx, (v - cy) * z / fy, z])
            np.testing.assert_allclose(p.as_array(), expect, rtol=1e-12)


class TestInvertPose:
    def test_identity(self):
        t = invert_pose(np.eye(3), np.zeros(3))
        assert t.is_close_to(RigidTransform.identity())

    def test_pure_translation_negates(self):
        t = invert_pose(np.eye(3), np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(t.translation, [-1.0, -2.0, -3.0])
        np.testing.assert_allclose(t.rotation, np.eye(3))

    def test_rotation_example(self):
        # (Rz(90), (1,0,0))^-1 = (Rz(-90), -Rz(-90)@(1,0,0)) = (Rz(-90), (0,1,0))
        t = invert_pose(rot_z(90), np.array([1.0, 0.0, 0.0]))
        np.testing.assert_allclose(t.rotation, rot_z(-90), atol=1e-12)
        np.testing.assert_allclose(t.translation, [0.0, 1.0, 0.0], atol=1e-12)

    def test_compose_with_inverse_is_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            r = random_rotation(rng)
            t_vec = rng.normal(size=3)
            fwd = RigidTransform(r, t_vec)
            identity = compose(fwd, invert_pose(r, t_vec))
            assert identity.is_close_to(RigidTransform.identity(), tol=1e-9)

    def test_rejects_non_orthonormal(self):
        bad = np.eye(3)
        bad[0, 1] = 1e-3
        with pytest.raises(NonOrthonormalRotation):
            invert_pose(bad, np.zeros(3))

    def test_rejects_reflection(self):
        mirror = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(NonOrthonormalRotation):
            invert_pose(mirror, np.zeros(3))

    def test_reorthonormalizes_mild_drift(self):
        rng = np.random.default_rng(11)
        r = random_rotation(rng) + rng.normal(scale=3e-8, size=(3, 3))
        t = invert_pose(r, np.zeros(3))
        np.testing.assert_allclose(t.rotation @ t.rotation.T, np.eye(3), atol=1e-12)


class TestApplyTransform:
    def test_identity_passthrough(self):
        p = apply_transform(RigidTransform.identity(), Point3(0.3, 0.1, 1.2))
        assert (p.x, p.y, p.z) == (0.3, 0.1, 1.2)

    def test_translation_of_origin(self):
        t = RigidTransform(np.eye(3), np.array([1.0, 0.0, 0.0]))
        assert apply_transform(t, Point3(0, 0, 0)) == Point3(1.0, 0.0, 0.0)

    def test_rotation_plus_lift(self):
        # Rz(90) @ (1,0,0) = (0,1,0), then +0.5 in z.
        t = RigidTransform(rot_z(90), np.array([0.0, 0.0, 0.5]))
        p = apply_transform(t, Point3(1.0, 0.0, 0.0))
        np.testing.assert_allclose(p.as_array(), [0.0, 1.0, 0.5], atol=1e-12)

    def test_isometry(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            t = RigidTransform(random_rotation(rng), rng.normal(size=3))
            a, b = Point3.from_array(rng.normal(size=3)), Point3.from_array(rng.normal(size=3))
            d_before = a.distance_to(b)
            d_after = apply_transform(t, a).distance_to(apply_transform(t, b))
            assert d_after == pytest.approx(d_before, abs=1e-9)


class TestCompose:
    def test_identity_left(self):
        rng = np.random.default_rng(9)
        t = RigidTransform(random_rotation(rng), rng.normal(size=3))
        assert compose(RigidTransform.identity(), t).is_close_to(t)

    def test_translations_add(self):
        a = RigidTransform(np.eye(3), np.array([1.0, 0.0, 0.0]))
        b = RigidTransform(np.eye(3), np.array([0.0, 2.0, 0.0]))
        np.testing.assert_allclose(compose(a, b).translation, [1.0, 2.0, 0.0])

    def test_matches_pointwise_application(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            a = RigidTransform(random_rotation(rng), rng.normal(size=3))
            b = RigidTransform(random_rotation(rng), rng.normal(size=3))
            p = Point3.from_array(rng.normal(size=3))
            via_compose = apply_transform(compose(a, b), p)
            via_chain = apply_transform(a, apply_transform(b, p))
            np.testing.assert_allclose(via_compose.as_array(), via_chain.as_array(), atol=1e-9)


class TestRollQuaternion:
    def test_identity(self):
        q = RollQuaternion.from_roll(0.0)
        assert (q.qx, q.qy, q.qz, q.qw) == (-0.0, 0.0, 0.0, 1.0)

    def test_unit_norm_and_pure_roll(self):
        for phi in np.linspace(-math.pi, math.pi, 37):
            q = RollQuaternion.from_roll(float(phi))
            assert q.qy == 0.0 and q.qz == 0.0
            assert math.hypot(q.qx, q.qw) == pytest.approx(1.0, abs=1e-12)

    def test_roll_angle_round_trip(self):
        for phi in np.linspace(-3.1, 3.1, 41):
            q = RollQuaternion.from_roll(float(phi))
            assert q.roll_angle == pytest.approx(phi, abs=1e-12)

    def test_rejects_off_axis_components(self):
        with pytest.raises(ValueError):
            RollQuaternion(0.0, 0.1, 0.0, 0.995)


class TestValidation:
    def test_intrinsics_reject_nonpositive_focal(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=0.0, fy=600.0, cx=320, cy=240)

    def test_intrinsics_reject_principal_point_outside(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=600, fy=600, cx=700, cy=240)

    def test_point_rejects_nan(self):
        with pytest.raises(ValueError):
            Point3(float("nan"), 0.0, 0.0)

    def test_negative_depth_rejected(self):
        with pytest.raises(ValueError):
            PixelDepthPoint(1.0, 1.0, -5.0)
