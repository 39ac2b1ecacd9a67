"""Orthonormal wavelet filter construction.

Filters are derived at import time from the standard orthonormal
construction (spectral factorization of the binomial product polynomial)
rather than copied from a coefficient table: the taps come out of the
defining equations and are verified against the quadrature-mirror
orthonormality conditions before use.  ``phase="extremal"`` gives the
classic minimum-phase family; ``phase="least_asymmetric"`` selects the
root assignment with the most linear phase (the symlet construction).
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product
from math import comb

import numpy as np


def _binomial_product_poly(k: int) -> np.ndarray:
    # P(y) = sum_{j<k} C(k-1+j, j) y^j, highest-degree coefficient first
    return np.array([comb(k - 1 + j, j) for j in range(k)][::-1], dtype=float)


def _polish_root(coeffs_highfirst: np.ndarray, r: complex, iters: int = 10) -> complex:
    p = np.polynomial.polynomial.Polynomial(coeffs_highfirst[::-1])
    dp = p.deriv()
    for _ in range(iters):
        d = dp(r)
        if d == 0:
            break
        step = p(r) / d
        r = r - step
        if abs(step) < 1e-15 * max(1.0, abs(r)):
            break
    return r


def _phase_nonlinearity(h: np.ndarray) -> float:
    # deviation of the frequency response phase from the linear phase of a
    # filter centered at (len(h)-1)/2, measured away from the spectral zeros
    n = len(h)
    w = np.linspace(0.01, np.pi - 0.01, 257)
    response = np.polyval(h[::-1], np.exp(-1j * w))
    phase = np.unwrap(np.angle(response)) + w * (n - 1) / 2.0
    return float(np.max(np.abs(phase - phase[0])))


@lru_cache(maxsize=None)
def orthonormal_lowpass(vanishing_moments: int, phase: str = "least_asymmetric") -> tuple[float, ...]:
    """Scaling (low-pass) filter with the given number of vanishing moments.

    Length is ``2 * vanishing_moments``; the taps sum to sqrt(2) and satisfy
    the orthonormality conditions to machine precision.
    """
    k = int(vanishing_moments)
    if k < 1:
        raise ValueError("vanishing_moments must be >= 1")
    if phase not in ("least_asymmetric", "extremal"):
        raise ValueError(f"unknown phase selection {phase!r}")
    if k == 1:
        h = np.array([1.0, 1.0]) / np.sqrt(2.0)
        return tuple(h)

    pcoeffs = _binomial_product_poly(k)
    yroots = sorted(
        (_polish_root(pcoeffs, r) for r in np.roots(pcoeffs)),
        key=lambda r: (round(r.real, 12), round(r.imag, 12)),
    )

    # each y-root maps to a reciprocal pair via z^2 + (4y - 2) z + 1 = 0
    pairs = []
    for y in yroots:
        b = 4.0 * y - 2.0
        disc = np.sqrt(b * b - 4.0 + 0j)
        z_in, z_out = (-b + disc) / 2.0, (-b - disc) / 2.0
        if abs(z_in) > abs(z_out):
            z_in, z_out = z_out, z_in
        pairs.append((y, z_in, z_out))

    # group conjugate y-roots together so each binary choice keeps the
    # filter coefficients real
    used = [False] * len(pairs)
    groups: list[tuple[list[complex], list[complex]]] = []
    for i, (y, zi, zo) in enumerate(pairs):
        if used[i]:
            continue
        used[i] = True
        if abs(y.imag) < 1e-10:
            groups.append(([zi], [zo]))
        else:
            j = min((jj for jj in range(len(pairs)) if not used[jj]),
                    key=lambda jj: abs(pairs[jj][0] - np.conj(y)))
            used[j] = True
            groups.append(([zi, pairs[j][1]], [zo, pairs[j][2]]))

    def build(choice: tuple[int, ...]) -> np.ndarray:
        poly = np.array([1.0 + 0j])
        for _ in range(k):
            poly = np.convolve(poly, [1.0, 1.0])
        for grp, c in zip(groups, choice):
            for root in grp[c]:
                poly = np.convolve(poly, [1.0, -root])
        h = np.real(poly)
        return h * (np.sqrt(2.0) / h.sum())

    if phase == "extremal":
        h = build((0,) * len(groups))
    else:
        h = min((build(c) for c in product((0, 1), repeat=len(groups))),
                key=_phase_nonlinearity)

    _verify_orthonormal(h)
    return tuple(h)


def qmf_highpass(lowpass: np.ndarray) -> np.ndarray:
    """Quadrature-mirror high-pass counterpart of an orthonormal low-pass."""
    lo = np.asarray(lowpass, dtype=float)
    n = len(lo)
    return np.array([(-1) ** j * lo[n - 1 - j] for j in range(n)])


def _verify_orthonormal(h: np.ndarray, tol: float = 1e-10) -> None:
    if abs(h.sum() - np.sqrt(2.0)) > tol:
        raise ValueError("low-pass taps do not sum to sqrt(2)")
    for m in range(len(h) // 2):
        ac = float(np.dot(h[: len(h) - 2 * m], h[2 * m:]))
        target = 1.0 if m == 0 else 0.0
        if abs(ac - target) > tol:
            raise ValueError(f"orthonormality violated at even lag {2 * m}: {ac}")
