"""Dense 2-D grid arithmetic, inner products, and operator-norm estimation.

Images live on dyadic grids: float64 arrays whose dimensions are powers of
two, so that every level of the restriction/wavelet hierarchy is exact.
All operations here are pure and allocation-only; nothing mutates its inputs.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

# An image is a plain 2-D float64 ndarray; the alias documents intent.
GridImage = np.ndarray


class DimensionError(ValueError):
    """Shapes of the operands do not conform."""


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def as_grid(x, require_pow2: bool = True) -> GridImage:
    """Validate and return ``x`` as a float64 grid image.

    Raises ``DimensionError`` for non-2-D or non-power-of-two shapes and
    ``ValueError`` if any entry is NaN/Inf.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D array, got ndim={a.ndim}")
    if require_pow2 and not (is_pow2(a.shape[0]) and is_pow2(a.shape[1])):
        raise DimensionError(f"grid dimensions must be powers of two, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("grid image contains non-finite entries")
    return a


def _check_same_shape(u: GridImage, v: GridImage) -> None:
    if u.shape != v.shape:
        raise DimensionError(f"shape mismatch: {u.shape} vs {v.shape}")


def dot(u: GridImage, v: GridImage) -> float:
    """Euclidean inner product of two same-shape images."""
    _check_same_shape(u, v)
    return float(np.vdot(u, v))


def norm2(u: GridImage) -> float:
    """Euclidean norm ``sqrt(<u, u>)``."""
    return float(np.linalg.norm(u))


class LinearMap(abc.ABC):
    """A linear operator between grid images with an explicit adjoint.

    Implementations must satisfy ``<A u, v> == <u, A^T v>`` for all
    conformable ``u, v``; the test suite probes this with random pairs.
    """

    #: (rows, cols) of the input grid
    in_shape: tuple[int, int]
    #: (rows, cols) of the output grid
    out_shape: tuple[int, int]

    @abc.abstractmethod
    def apply(self, x: GridImage) -> GridImage: ...

    @abc.abstractmethod
    def apply_adjoint(self, y: GridImage) -> GridImage: ...

    def _check_in(self, x: GridImage) -> None:
        if x.shape != self.in_shape:
            raise DimensionError(f"expected input shape {self.in_shape}, got {x.shape}")

    def _check_out(self, y: GridImage) -> None:
        if y.shape != self.out_shape:
            raise DimensionError(f"expected adjoint input shape {self.out_shape}, got {y.shape}")


def adjoint_mismatch(op: LinearMap, n_probes: int = 20, seed: int = 0) -> float:
    """Worst relative defect of ``<A u, v> - <u, A^T v>`` over random probes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        u = rng.standard_normal(op.in_shape)
        v = rng.standard_normal(op.out_shape)
        lhs = dot(op.apply(u), v)
        rhs = dot(u, op.apply_adjoint(v))
        scale = max(abs(lhs), abs(rhs), 1e-30)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


@dataclass(frozen=True)
class PowerMethodResult:
    value: float          # estimate of ||A||^2 = lambda_max(A^T A)
    converged: bool
    iterations: int

    def __float__(self) -> float:
        return self.value


def power_method_norm(op: LinearMap, seed: int = 0, tol: float = 1e-6,
                      max_iter: int = 200) -> PowerMethodResult:
    """Estimate ``||A||^2`` by power iteration on ``A^T A``.

    The Rayleigh-quotient estimate never exceeds the true value; convergence
    is declared once its successive relative change falls below ``tol``.
    Deterministic for a fixed ``seed``.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.in_shape)
    v /= max(norm2(v), 1e-300)
    lam_prev = 0.0
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = op.apply_adjoint(op.apply(v))
        lam = dot(v, w)
        nw = norm2(w)
        if nw == 0.0:
            return PowerMethodResult(0.0, True, it)
        v = w / nw
        if it > 1 and abs(lam - lam_prev) <= tol * max(abs(lam), 1e-30):
            return PowerMethodResult(float(lam), True, it)
        lam_prev = lam
    return PowerMethodResult(float(lam), False, max_iter)
