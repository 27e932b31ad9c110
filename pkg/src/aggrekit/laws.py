"""Power-law diffusion A(y) = c_a y^m, its regularisation A + eps*y and the entropy.

The entropy is fixed by Phi'' = A'/y with Phi(0) = Phi'(1) = 0, giving

    m > 1:  Phi(y) = c_a (y^m - m y) / (m - 1)
    m = 1:  Phi(y) = c_a (y ln y - y)

and Phi_eps adds eps (y ln y - y).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _nonneg(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("diffusion law evaluated at a negative density")
    return y


def _xlogx(y):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)), 0.0)


@dataclass(frozen=True)
class DiffusionLaw:
    c_a: float = 1.0
    m: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.c_a <= 0:
            raise ValueError(f"c_a must be positive, got {self.c_a}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")

    @property
    def linear(self) -> bool:
        return self.m == 1.0

    @property
    def singular_at_zero(self) -> bool:
        """True when Phi'_eps(0+) = -inf."""
        return self.linear or self.epsilon > 0

    def a(self, y):
        y = _nonneg(y)
        return self.c_a * y**self.m + self.epsilon * y

    def a_prime(self, y):
        y = _nonneg(y)
        if self.linear:
            return np.full_like(y, self.c_a + self.epsilon)
        return self.c_a * self.m * y ** (self.m - 1) + self.epsilon

    def phi(self, y):
        y = _nonneg(y)
        xl = _xlogx(y)
        if self.linear:
            base = self.c_a * (xl - y)
        else:
            base = self.c_a * (y**self.m - self.m * y) / (self.m - 1)
        return base + self.epsilon * (xl - y)

    def phi_prime(self, y):
        y = _nonneg(y)
        with np.errstate(divide="ignore"):
            logy = np.log(y)
        if self.linear:
            return (self.c_a + self.epsilon) * logy
        base = self.c_a * self.m / (self.m - 1) * (y ** (self.m - 1) - 1.0)
        if self.epsilon == 0:
            return base
        return base + self.epsilon * logy

    def phi_second(self, y):
        y = _nonneg(y)
        with np.errstate(divide="ignore"):
            return self.a_prime(y) / y

    def phi_prime_inverse(self, z, tol: float = 1e-12, max_iter: int = 200):
        """Solve Phi'_eps(y) = z for y > 0.

        Newton in s = ln y (where the residual is increasing and convex for
        m > 1) with bisection fallback on a bracket grown geometrically.
        """
        if self.epsilon <= 0:
            raise ValueError("phi_prime_inverse needs epsilon > 0")
        z = np.asarray(z, dtype=float)
        if self.linear:
            return np.exp(z / (self.c_a + self.epsilon))
        k = self.c_a * self.m / (self.m - 1)
        p = self.m - 1

        def resid(s):
            return k * np.expm1(p * s) + self.epsilon * s - z

        def slope(s):
            return self.c_a * self.m * np.exp(p * s) + self.epsilon

        zz = np.broadcast_to(z, z.shape).astype(float)
        lo = np.minimum(zz / self.epsilon, 0.0) - 1.0
        hi = np.maximum(np.log1p(np.maximum(zz, 0.0) / k) / p, 0.0) + 1.0
        width = 1.0
        for _ in range(200):
            bad_lo = resid(lo) > 0
            bad_hi = resid(hi) < 0
            if not (bad_lo.any() or bad_hi.any()):
                break
            width *= 2.0
            lo = np.where(bad_lo, lo - width, lo)
            hi = np.where(bad_hi, hi + width, hi)
        s = hi.copy()
        for _ in range(max_iter):
            r = resid(s)
            done = np.abs(r) <= tol * (1.0 + np.abs(zz))
            if done.all():
                break
            lo = np.where(r < 0, s, lo)
            hi = np.where(r > 0, s, hi)
            step = s - r / slope(s)
            inside = (step > lo) & (step < hi)
            s = np.where(done, s, np.where(inside, step, 0.5 * (lo + hi)))
        else:
            raise RuntimeError("phi_prime_inverse failed to converge")
        # one extra Newton step takes the converged root to rounding level
        polished = s - resid(s) / slope(s)
        s = np.where((polished > lo) & (polished < hi), polished, s)
        return np.exp(s)

    def entropy_mean(self, a, b):
        """(A(b) - A(a)) / (Phi'(b) - Phi'(a)), a mean of a and b.

        Vanishes when one argument is zero and Phi'(0+) = -inf.
        """
        a = _nonneg(a)
        b = _nonneg(b)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        close = (hi - lo) <= 1e-7 * hi
        with np.errstate(divide="ignore", invalid="ignore"):
            dA = self.a(hi) - self.a(lo)
            dP = self.phi_prime(hi) - self.phi_prime(lo)
            q = np.where(np.isinf(dP), 0.0, dA / dP)
        return np.where(close, 0.5 * (a + b), q)


def critical_exponent(d: int, gamma: float = 1.0, boundary_kind: str = "neumann") -> float:
    """Diffusion exponent threshold: 1 + 1/gamma - 2/d without a Dirichlet patch, else 2."""
    if boundary_kind == "dirichlet":
        return 2.0
    if boundary_kind != "neumann":
        raise ValueError(f"unknown boundary kind {boundary_kind!r}")
    if d < 2 or not 1 <= gamma <= d / 2:
        raise ValueError(f"gamma must lie in [1, d/2] with d >= 2, got gamma={gamma}, d={d}")
    return 1.0 + 1.0 / gamma - 2.0 / d
