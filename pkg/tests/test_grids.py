import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mlprox as mp
from conftest import dense_from_linmap


class _Identity(mp.LinearMap):
    def __init__(self, shape, scale=1.0):
        self.in_shape = self.out_shape = shape
        self.scale = scale

    def apply(self, x):
        return self.scale * x

    def apply_adjoint(self, y):
        return self.scale * y


def test_dot_trivial_cases():
    assert mp.dot(np.zeros((4, 4)), np.ones((4, 4))) == 0.0
    e1 = np.zeros((2, 2)); e1[0, 0] = 1.0
    assert mp.dot(e1, e1) == 1.0
    assert mp.dot(np.ones((2, 2)), np.array([[1.0, 2.0], [3.0, 4.0]])) == 10.0


def test_dot_shape_mismatch():
    with pytest.raises(mp.DimensionError):
        mp.dot(np.zeros((2, 2)), np.zeros((2, 4)))


def test_norm2_cases():
    assert mp.norm2(np.zeros((8, 8))) == 0.0
    assert mp.norm2(np.array([[3.0, 4.0]])) == pytest.approx(5.0, abs=0)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_dot_bilinear_and_symmetric(a, b, seed):
    g = np.random.default_rng(seed)
    u, v, w = (g.standard_normal((4, 4)) for _ in range(3))
    lhs = mp.dot(a * u + b * v, w)
    rhs = a * mp.dot(u, w) + b * mp.dot(v, w)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)
    assert mp.dot(u, v) == pytest.approx(mp.dot(v, u), rel=1e-12, abs=1e-12)


@given(st.floats(-100, 100), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_norm_homogeneity(c, seed):
    u = np.random.default_rng(seed).standard_normal((8, 8))
    assert mp.norm2(c * u) == pytest.approx(abs(c) * mp.norm2(u), rel=1e-12, abs=1e-12)


def test_as_grid_validation():
    with pytest.raises(mp.DimensionError):
        mp.as_grid(np.zeros((3, 4)))           # 3 is not a power of two
    with pytest.raises(mp.DimensionError):
        mp.as_grid(np.zeros(8))                # not 2-D
    bad = np.zeros((4, 4)); bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        mp.as_grid(bad)
    assert mp.as_grid(np.zeros((4, 8))).dtype == np.float64


def test_power_method_identity():
    res = mp.power_method_norm(_Identity((8, 8)), seed=1, tol=1e-9, max_iter=50)
    assert res.converged
    assert res.value == pytest.approx(1.0, abs=1e-8)


def test_power_method_scaled_identity():
    res = mp.power_method_norm(_Identity((8, 8), scale=2.0), seed=1, tol=1e-9, max_iter=50)
    assert res.value == pytest.approx(4.0, abs=1e-6)


def test_power_method_blur_vs_dense_eig():
    # ||A||^2 for A = M (x) M equals lambda_max(M^T M)^2; assemble M densely
    blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(5, 1.0), (32, 32))
    m = blur.row_factor
    lam1 = float(np.linalg.eigvalsh(m.T @ m).max())
    res = mp.power_method_norm(blur, seed=0, tol=1e-12, max_iter=5000)
    assert res.converged
    assert res.value == pytest.approx(lam1 ** 2, rel=1e-6)


def test_power_method_never_overestimates():
    for seed in range(5):
        blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(5, 1.0), (16, 16))
        a = dense_from_linmap(blur)
        true = float(np.linalg.eigvalsh(a.T @ a).max())
        res = mp.power_method_norm(blur, seed=seed, tol=1e-8, max_iter=2000)
        assert res.value <= true * (1 + 1e-12)


def test_power_method_deterministic():
    blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(5, 1.0), (16, 16))
    r1 = mp.power_method_norm(blur, seed=42)
    r2 = mp.power_method_norm(blur, seed=42)
    assert r1.value == r2.value and r1.iterations == r2.iterations


def test_power_method_nonconvergence_flag():
    blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(5, 1.0), (16, 16))
    res = mp.power_method_norm(blur, seed=0, tol=1e-16, max_iter=2)
    assert not res.converged
    assert res.value > 0


def test_adjoint_consistency_of_registered_maps(sym4):
    maps = [
        mp.SeparableBlur.from_psf(mp.make_gaussian_psf(7, 1.5), (16, 16)),
        mp.SeparableBlur.from_psf(mp.make_gaussian_psf(21, 4.0), (16, 16)),
    ]
    from mlprox.operators import RestrictionMap
    maps.append(RestrictionMap(mp.make_transfer(sym4, (16, 16))))
    for op in maps:
        assert mp.adjoint_mismatch(op, n_probes=20, seed=11) <= 1e-10
