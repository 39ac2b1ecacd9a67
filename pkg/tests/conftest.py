"""Shared fixtures and independent brute-force oracles.

The oracle builders here re-derive every operator from first principles
(double loops, dense matrices, grid/subgradient minimization) so the tests
never trust the production code paths they are checking.
"""

from __future__ import annotations

import numpy as np
import pytest

import mlprox as mp


# ---------------------------------------------------------------------------
# dense operator oracles


def dense_from_linmap(op) -> np.ndarray:
    """Materialize a LinearMap as a dense matrix by probing basis images."""
    ni = op.in_shape[0] * op.in_shape[1]
    no = op.out_shape[0] * op.out_shape[1]
    mat = np.zeros((no, ni))
    for j in range(ni):
        e = np.zeros(ni)
        e[j] = 1.0
        mat[:, j] = op.apply(e.reshape(op.in_shape)).ravel()
    return mat


def oracle_fold_index(t: int, n: int) -> int:
    while t < 0 or t >= n:
        t = -t - 1 if t < 0 else 2 * n - 1 - t
    return t


def oracle_fold_matrix(taps, n: int) -> np.ndarray:
    """Independent reflexive-boundary 1-D blur factor."""
    taps = np.asarray(taps, dtype=float)
    c = (len(taps) - 1) // 2
    m = np.zeros((n, n))
    for i in range(n):
        for k, w in enumerate(taps):
            m[i, oracle_fold_index(i + k - c, n)] += w
    return m


def oracle_analysis_matrix(lo, hi, m: int) -> np.ndarray:
    """Independent periodized one-level stacked analysis operator."""
    w = np.zeros((m, m))
    for i in range(m // 2):
        for k in range(len(lo)):
            w[i, (2 * i + k) % m] += lo[k]
            w[m // 2 + i, (2 * i + k) % m] += hi[k]
    return w


def oracle_restriction_matrix(lo, n: int) -> np.ndarray:
    r = np.zeros((n // 2, n))
    for i in range(n // 2):
        for k in range(len(lo)):
            r[i, (2 * i + k) % n] += lo[k]
    return r


def oracle_dwt2(basis: mp.WaveletBasis, x: np.ndarray, levels: int) -> np.ndarray:
    """Dense-matrix multi-level 2-D DWT, Mallat layout."""
    c = np.array(x, dtype=float)
    for j in range(levels):
        r, s = x.shape[0] >> j, x.shape[1] >> j
        wr = oracle_analysis_matrix(basis.lowpass, basis.highpass, r)
        wc = oracle_analysis_matrix(basis.lowpass, basis.highpass, s)
        c[:r, :s] = wr @ c[:r, :s] @ wc.T
    return c


# ---------------------------------------------------------------------------
# minimization oracles


def grid_minimize_1d(fun, lo: float, hi: float, step: float) -> tuple[float, float]:
    ys = np.arange(lo, hi + step, step)
    vals = np.array([fun(y) for y in ys])
    i = int(np.argmin(vals))
    return float(ys[i]), float(vals[i])


def subgradient_min_l1_quadratic(w_dense: np.ndarray, lam: float,
                                 x: np.ndarray, tau: float,
                                 iters: int = 120_000) -> tuple[np.ndarray, float]:
    """Minimize ``lam ||W u||_1 + ||u - x||^2 / (2 tau)`` by projected-free
    subgradient descent with the strongly-convex step schedule; returns the
    best iterate seen and its objective value."""
    xv = x.ravel()

    def h(u):
        return lam * np.abs(w_dense @ u).sum() + np.sum((u - xv) ** 2) / (2 * tau)

    u = xv.copy()
    best, fbest = u.copy(), h(u)
    for t in range(1, iters + 1):
        g = lam * (w_dense.T @ np.sign(w_dense @ u)) + (u - xv) / tau
        u = u - (2.0 * tau / (t + 1)) * g
        if t % 25 == 0 or t > iters - 1000:
            fu = h(u)
            if fu < fbest:
                best, fbest = u.copy(), fu
    return best.reshape(x.shape), fbest


def central_diff_grad(fun, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy(); xp[idx] += step
        xm = x.copy(); xm[idx] -= step
        g[idx] = (fun(xp) - fun(xm)) / (2 * step)
        it.iternext()
    return g


# ---------------------------------------------------------------------------
# shared small problem instances


@pytest.fixture(scope="session")
def haar():
    return mp.WaveletBasis.haar()


@pytest.fixture(scope="session")
def sym4():
    return mp.WaveletBasis.symlet(4)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240812)


def small_objective(n=16, support=5, sigma=1.0, lam=0.05, gamma=1.0,
                    noise=0.02, seed=3, basis=None, wavelet_levels=2,
                    tilt_scale=0.0):
    """A compact deblurring objective for solver-level tests."""
    basis = basis if basis is not None else mp.WaveletBasis.haar()
    blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(support, sigma), (n, n))
    prior = mp.L1SynthesisPrior(basis, wavelet_levels, lam)
    g = np.random.default_rng(seed)
    x_true = g.uniform(0.0, 1.0, size=(n, n))
    z = blur.apply(x_true) + noise * g.standard_normal((n, n))
    lip = mp.power_method_norm(blur, seed=0).value
    tilt = tilt_scale * g.standard_normal((n, n)) if tilt_scale else None
    return mp.CompositeObjective(blur, z, prior, gamma=gamma, lipschitz_f=lip,
                                 tilt=tilt)


@pytest.fixture(scope="session")
def desk_hierarchy(sym4):
    """64x64, 3-level hierarchy with a tuned-ish lambda for solver tests."""
    blur = mp.SeparableBlur.from_psf(mp.make_gaussian_psf(11, 2.0), (64, 64))
    prior = mp.L1SynthesisPrior(sym4, 6, 2e-4)
    fine = mp.make_fine_level(blur, prior, gamma=1.0)
    return mp.build_hierarchy(fine, 3, transfer_basis=sym4)


@pytest.fixture(scope="session")
def desk_instance(desk_hierarchy):
    x_true = mp.synthetic_scene(64, seed=7)
    blur = desk_hierarchy.levels[0].blur
    z = mp.degrade(x_true, mp.DegradationSpec(11, 2.0, 0.01, seed=3), blur)
    x0 = mp.wiener_init(z, blur, 1e-2).x
    return x_true, z, x0
