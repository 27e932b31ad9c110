"""Uniform cell-centred box grids, discrete calculus and norms.

Fields are plain numpy arrays of shape ``(nx,)`` in 1D and ``(nx, ny)`` in
2D, indexed ``[i, j]`` with ``i`` along x.  Face-valued quantities carry one
array per axis; along its own axis the array has ``n + 1`` entries, the first
and last being boundary faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft

FACES = ("left", "right", "bottom", "top")
NEUMANN = "neumann"
DIRICHLET = "dirichlet"


class PoissonError(RuntimeError):
    """Raised when the Neumann Poisson solve misses its residual target."""


@dataclass(frozen=True)
class BoundaryLayout:
    """Per-face boundary tags.  Faces not listed default to Neumann."""

    tags: dict = field(default_factory=dict)

    def tag(self, face: str) -> str:
        return self.tags.get(face, NEUMANN)

    def dirichlet_faces(self, d: int) -> tuple[str, ...]:
        return tuple(f for f in FACES[: 2 * d] if self.tag(f) == DIRICHLET)

    def has_dirichlet(self, d: int) -> bool:
        return bool(self.dirichlet_faces(d))

    @classmethod
    def all_neumann(cls) -> "BoundaryLayout":
        return cls({})

    @classmethod
    def with_dirichlet(cls, faces: Sequence[str]) -> "BoundaryLayout":
        for f in faces:
            if f not in FACES:
                raise ValueError(f"unknown boundary face {f!r}; expected one of {FACES}")
        return cls({f: DIRICHLET for f in faces})

    def describe(self, d: int) -> str:
        faces = self.dirichlet_faces(d)
        return "neumann" if not faces else "dirichlet:" + ",".join(faces)


@dataclass(frozen=True)
class Grid:
    d: int
    extents: tuple[float, ...]
    resolution: tuple[int, ...]
    layout: BoundaryLayout = field(default_factory=BoundaryLayout)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extents, self.resolution))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def h(self) -> float:
        return min(self.spacing)

    def face_area(self, axis: int) -> float:
        """Measure of a face normal to ``axis`` (1 in 1D)."""
        return self.cell_volume / self.spacing[axis]

    def centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.resolution[axis]) + 0.5) * h

    def mesh(self) -> tuple[np.ndarray, ...]:
        axes = [self.centers(a) for a in range(self.d)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


def build_grid(d: int, extents, resolution, layout: BoundaryLayout | None = None) -> Grid:
    if d not in (1, 2):
        raise ValueError(f"only d in {{1, 2}} is supported, got d={d}")
    extents = tuple(float(e) for e in np.atleast_1d(extents))
    resolution = tuple(int(n) for n in np.atleast_1d(resolution))
    if len(extents) != d or len(resolution) != d:
        raise ValueError(f"need {d} extents and resolutions, got {extents} and {resolution}")
    if any(e <= 0 for e in extents):
        raise ValueError(f"extents must be positive, got {extents}")
    if any(n < 4 for n in resolution):
        raise ValueError(f"resolution must be at least 4 per axis, got {resolution}")
    layout = layout or BoundaryLayout.all_neumann()
    for face in layout.tags:
        if face not in FACES[: 2 * d]:
            raise ValueError(f"face {face!r} does not exist in {d}D")
    if len(layout.dirichlet_faces(d)) == 2 * d:
        raise ValueError("the Neumann part of the boundary must be nonempty")
    return Grid(d, extents, resolution, layout)


def check_field(grid: Grid, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != grid.shape:
        raise ValueError(f"field shape {u.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("field has non-finite entries")
    return u


# ---------------------------------------------------------------- reductions


def integrate(grid: Grid, u: np.ndarray) -> float:
    # np.sum on contiguous float arrays is pairwise and order-fixed
    return float(np.sum(np.ascontiguousarray(u))) * grid.cell_volume


def mass(grid: Grid, u: np.ndarray) -> float:
    return integrate(grid, u)


def mean(grid: Grid, u: np.ndarray) -> float:
    return integrate(grid, u) / grid.volume


def lp_norm(grid: Grid, u: np.ndarray, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    if np.isinf(p):
        return float(np.max(np.abs(u)))
    return integrate(grid, np.abs(u) ** p) ** (1.0 / p)


def weak_lp_norm(grid: Grid, u: np.ndarray, p: float, weights=None) -> float:
    """sup over levels a of a * |{|u| > a}|^(1/p), by sorting cell values.

    ``weights`` gives the measure of each sample; defaults to the cell volume.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    vals = np.abs(np.ravel(u))
    w = np.full(vals.shape, grid.cell_volume) if weights is None else np.ravel(weights)
    order = np.argsort(vals)[::-1]
    vals, w = vals[order], w[order]
    # for a just below vals[k], the level set holds the k+1 largest samples
    lam = np.cumsum(w)
    return float(np.max(vals * lam ** (1.0 / p))) if vals.size else 0.0


def holder_seminorm(grid: Grid, u: np.ndarray, alpha: float) -> float:
    """Max of |u(x)-u(y)|/|x-y|^alpha over axis pairs at separations h*2^k."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    best = 0.0
    for axis in range(grid.d):
        n = grid.resolution[axis]
        h = grid.spacing[axis]
        s = 1
        while s < n:
            diff = np.abs(np.diff(u, n=1, axis=axis) if s == 1 else _shift_diff(u, s, axis))
            if diff.size:
                best = max(best, float(np.max(diff)) / (s * h) ** alpha)
            s *= 2
    return best


def _shift_diff(u, s, axis):
    n = u.shape[axis]
    a = np.take(u, np.arange(s, n), axis=axis)
    b = np.take(u, np.arange(0, n - s), axis=axis)
    return a - b


def field_reduce(grid: Grid, u: np.ndarray, kind: str, param: float | None = None) -> float:
    u = check_field(grid, u)
    if kind == "mean":
        return mean(grid, u)
    if kind == "mass":
        return mass(grid, u)
    if kind == "Lp":
        return lp_norm(grid, u, param)
    if kind == "Linf":
        return float(np.max(np.abs(u)))
    if kind == "weakLp":
        return weak_lp_norm(grid, u, param)
    if kind == "holder_seminorm":
        return holder_seminorm(grid, u, param)
    raise ValueError(f"unknown reduction {kind!r}")


# ----------------------------------------------------------------- calculus


def gradient(grid: Grid, u: np.ndarray) -> list[np.ndarray]:
    """Centred differences on faces; boundary faces are left at zero."""
    out = []
    for axis in range(grid.d):
        shape = list(u.shape)
        shape[axis] += 1
        g = np.zeros(shape)
        inner = [slice(None)] * u.ndim
        inner[axis] = slice(1, -1)
        g[tuple(inner)] = np.diff(u, axis=axis) / grid.spacing[axis]
        out.append(g)
    return out


def divergence(grid: Grid, fluxes: Sequence[np.ndarray]) -> np.ndarray:
    """Cell divergence of face fluxes (boundary faces included)."""
    div = np.zeros(grid.shape)
    for axis, F in enumerate(fluxes):
        expected = list(grid.shape)
        expected[axis] += 1
        if F.shape != tuple(expected):
            raise ValueError(f"flux on axis {axis} has shape {F.shape}, expected {tuple(expected)}")
        div += np.diff(F, axis=axis) / grid.spacing[axis]
    return div


def face_inner(grid: Grid, a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    """sum over faces of a*b weighted by the face dual volume (area times h)."""
    return sum(float(np.sum(x * y)) * grid.cell_volume for x, y in zip(a, b))


def neumann_laplacian(grid: Grid, phi: np.ndarray) -> np.ndarray:
    """Five-point Laplacian with zero-flux walls."""
    return divergence(grid, gradient(grid, phi))


# ------------------------------------------------------------------ Poisson


def _neumann_eigenvalues(grid: Grid) -> np.ndarray:
    lam = np.zeros(grid.shape)
    for axis in range(grid.d):
        n, h = grid.resolution[axis], grid.spacing[axis]
        k = np.arange(n)
        ev = -(2.0 - 2.0 * np.cos(np.pi * k / n)) / h**2
        shape = [1] * grid.d
        shape[axis] = n
        lam = lam + ev.reshape(shape)
    return lam


def neumann_poisson(grid: Grid, rhs: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Solve lap(phi) = rhs - <rhs> with zero-flux walls and <phi> = 0.

    Cosine-basis diagonalisation of the five-point operator; the DCT-II
    vectors are exact eigenvectors on a cell-centred grid.
    """
    rhs = check_field(grid, rhs)
    f = rhs - mean(grid, rhs)
    fh = sfft.dctn(f, type=2, norm="ortho", workers=workers)
    lam = _neumann_eigenvalues(grid)
    lam.flat[0] = 1.0
    ph = fh / lam
    ph.flat[0] = 0.0
    phi = sfft.idctn(ph, type=2, norm="ortho", workers=workers)
    phi -= mean(grid, phi)
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    res = float(np.max(np.abs(neumann_laplacian(grid, phi) - f)))
    if res > 1e-10 * scale:
        raise PoissonError(f"Neumann Poisson residual {res:.3e} exceeds 1e-10 * {scale:.3e}")
    return phi


def dual_norm(grid: Grid, u: np.ndarray, workers: int | None = None) -> float:
    """Discrete (H^1)* norm: sqrt(|grad phi|^2 + <u>^2) with lap(phi) = u - <u>."""
    u = check_field(grid, u)
    m = mean(grid, u)
    if not np.any(u - m):
        return abs(m)
    phi = neumann_poisson(grid, u, workers=workers)
    g = gradient(grid, phi)
    return float(np.sqrt(face_inner(grid, g, g) + m * m))
