"""Proximal operators, Moreau envelope values/gradients, and the composite
objectives ``F = f + g (+ linear tilt)`` and their smoothed versions.

``g`` is the l1 norm of orthonormal wavelet coefficients, so its prox is an
exact soft threshold in coefficient space, and the Moreau envelope reduces
to a Huber function of those coefficients.  The optional linear tilt is
folded into the smooth part: its gradient contribution is constant and the
prox of ``g`` is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .grids import GridImage, dot
from .operators import SeparableBlur, WaveletBasis, dwt_forward, dwt_inverse


def soft_threshold(v: np.ndarray, theta: float) -> np.ndarray:
    """Elementwise ``sign(v) * max(|v| - theta, 0)``; the prox of theta*||.||_1."""
    if theta < 0:
        raise ValueError(f"threshold must be >= 0, got {theta}")
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


@dataclass(frozen=True)
class L1SynthesisPrior:
    """``g(x) = lam * ||W x||_1`` with orthonormal W (wavelet synthesis prior)."""
    basis: WaveletBasis
    levels: int
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.levels < 0:
            raise ValueError("levels must be >= 0")

    def coefficients(self, x: GridImage) -> np.ndarray:
        return dwt_forward(self.basis, x, self.levels)

    def value(self, x: GridImage) -> float:
        return self.lam * float(np.abs(self.coefficients(x)).sum())

    def prox(self, x: GridImage, tau: float) -> GridImage:
        """Exact minimizer of ``g(u) + ||u - x||^2 / (2 tau)``."""
        if tau <= 0:
            raise ValueError("tau must be positive")
        if self.lam == 0.0:
            return np.array(x, dtype=np.float64)
        c = self.coefficients(x)
        return dwt_inverse(self.basis, soft_threshold(c, tau * self.lam), self.levels)


def prox_g(prior: L1SynthesisPrior, x: GridImage, tau: float) -> GridImage:
    return prior.prox(x, tau)


def moreau_value(prior: L1SynthesisPrior, x: GridImage, gamma: float) -> float:
    """Moreau envelope of the prior at x: ``g(p) + ||x - p||^2 / (2 gamma)``
    with ``p = prox_{gamma g}(x)``; a Huber function of the coefficients."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    c = prior.coefficients(x)
    p = soft_threshold(c, gamma * prior.lam)
    return prior.lam * float(np.abs(p).sum()) + float(np.sum((c - p) ** 2)) / (2.0 * gamma)


def moreau_grad(prior: L1SynthesisPrior, x: GridImage, gamma: float) -> GridImage:
    """Envelope gradient ``(x - prox_{gamma g}(x)) / gamma``; (1/gamma)-Lipschitz."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return (x - prior.prox(x, gamma)) / gamma


@dataclass(frozen=True)
class CompositeObjective:
    """One level's objective ``F(x) = 1/2 ||A x - z||^2 + <tilt, x> + g(x)``.

    ``gamma`` is the Moreau smoothing parameter used whenever this level's
    smoothed objective/gradient is requested; ``lipschitz_f`` caches
    ``||A||^2`` (the tilt does not affect it).
    """
    blur: SeparableBlur
    observation: GridImage
    prior: L1SynthesisPrior
    gamma: float
    lipschitz_f: float
    tilt: GridImage | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.lipschitz_f <= 0:
            raise ValueError("lipschitz_f must be positive")
        if self.observation.shape != self.blur.in_shape:
            raise ValueError("observation shape does not match blur")

    @property
    def shape(self) -> tuple[int, int]:
        return self.blur.in_shape

    def with_tilt(self, tilt: GridImage | None) -> "CompositeObjective":
        return replace(self, tilt=tilt)

    # -- smooth part -------------------------------------------------------

    def f_value(self, x: GridImage) -> float:
        r = self.blur.apply(x) - self.observation
        val = 0.5 * float(np.sum(r * r))
        if self.tilt is not None:
            val += dot(self.tilt, x)
        return val

    def grad_f(self, x: GridImage) -> GridImage:
        g = self.blur.apply_adjoint(self.blur.apply(x) - self.observation)
        if self.tilt is not None:
            g = g + self.tilt
        return g

    # -- full and smoothed objectives ---------------------------------------

    def value(self, x: GridImage) -> float:
        return self.f_value(x) + self.prior.value(x)

    def smoothed_value(self, x: GridImage) -> float:
        return self.f_value(x) + moreau_value(self.prior, x, self.gamma)

    def values(self, x: GridImage) -> tuple[float, float]:
        """(F, F_gamma) sharing one coefficient transform."""
        base = self.f_value(x)
        c = self.prior.coefficients(x)
        g = self.prior.lam * float(np.abs(c).sum())
        p = soft_threshold(c, self.gamma * self.prior.lam)
        env = (self.prior.lam * float(np.abs(p).sum())
               + float(np.sum((c - p) ** 2)) / (2.0 * self.gamma))
        return base + g, base + env

    def smoothed_grad(self, x: GridImage) -> GridImage:
        """Gradient of ``f + (Moreau envelope of g) + <tilt, .>``."""
        return self.grad_f(x) + moreau_grad(self.prior, x, self.gamma)

    @property
    def smoothed_lipschitz(self) -> float:
        return self.lipschitz_f + 1.0 / self.gamma


# module-level aliases matching the operation-style call signatures
def grad_f(obj: CompositeObjective, x: GridImage) -> GridImage:
    return obj.grad_f(x)


def smoothed_grad(obj: CompositeObjective, x: GridImage) -> GridImage:
    return obj.smoothed_grad(x)


def objective_value(obj: CompositeObjective, x: GridImage) -> float:
    return obj.value(x)


def smoothed_objective_value(obj: CompositeObjective, x: GridImage) -> float:
    return obj.smoothed_value(x)
