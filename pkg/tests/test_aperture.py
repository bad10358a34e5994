import numpy as np
import pytest

from refocus.aperture import RADIUS_STEP, build_kernel, cached_kernel, snap_radius
from refocus.raster import ApertureSpec


class TestBuildKernel:
    def test_zero_radius_impulse(self):
        k = build_kernel(0.0)
        assert k.size == 1 and k.weights[0, 0] == 1.0

    def test_support_bound(self):
        k = build_kernel(5.0)
        assert k.size == 11
        yy, xx = np.mgrid[-5:6, -5:6]
        outside = np.sqrt(yy ** 2 + xx ** 2) > 5.5
        assert np.all(k.weights[outside] == 0.0)
        assert abs(k.weights.sum() - 1.0) < 1e-6

    def test_hexagon_area(self):
        # coverage sum before normalization should match the analytic
        # hexagon area (3*sqrt(3)/2) * r^2 within 2%
        from refocus.aperture import _coverage

        r = 5.0
        cov = _coverage(r, ApertureSpec(blades=6), 11)
        expected = 1.5 * np.sqrt(3.0) * r * r
        assert abs(cov.sum() - expected) / expected < 0.02

    def test_normalization_many_radii(self):
        for r in (0.3, 0.5, 1.0, 2.7, 6.25, 9.0):
            for spec in (ApertureSpec(), ApertureSpec(blades=5, rotation=0.3)):
                assert abs(build_kernel(r, spec).weights.sum() - 1.0) < 1e-6

    def test_monotone_support(self):
        spec = ApertureSpec(blades=7, rotation=0.1)
        small = build_kernel(3.0, spec)
        big = build_kernel(5.5, spec)
        pad = (big.half - small.half)
        embedded = np.zeros_like(big.weights)
        embedded[pad:pad + small.size, pad:pad + small.size] = small.weights
        assert np.all(big.weights[embedded > 0] > 0)

    def test_rotation_symmetry(self):
        for n in (3, 6):
            a = build_kernel(4.0, ApertureSpec(blades=n, rotation=0.2))
            b = build_kernel(4.0, ApertureSpec(blades=n, rotation=0.2 + 2 * np.pi / n))
            assert np.abs(a.weights - b.weights).max() < 1e-3

    def test_circle_point_symmetry(self):
        w = build_kernel(3.7).weights
        np.testing.assert_array_equal(w, w[::-1, ::-1])

    def test_subunit_blend(self):
        k = build_kernel(0.25)
        assert k.size == 3
        assert abs(k.weights.sum() - 1.0) < 1e-6
        # blends toward the impulse: center dominates
        assert k.weights[1, 1] > 0.5

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            build_kernel(-1.0)


class TestCache:
    def test_snap(self):
        assert snap_radius(3.0) == 3.0
        assert abs(snap_radius(3.06) - 3.0) < 1e-12
        assert abs(snap_radius(3.07) - 3.125) < 1e-12

    def test_cached_identity(self):
        a = cached_kernel(2.0)
        b = cached_kernel(2.0 + RADIUS_STEP / 4)
        assert a is b

    def test_cached_immutable(self):
        k = cached_kernel(1.5)
        with pytest.raises(ValueError):
            k.weights[0, 0] = 5.0
