"""Radial interaction kernels and their discrete convolution operators.

The discrete operator is ``(K*u)_i = sum_j W[i-j] u_j`` with
``W[k] = integral of K over the cell at offset k``.  Offset tables are exact
analytic cell integrals where a closed form exists and tensor Gauss-Legendre
quadrature otherwise.  Application is a zero-padded (linear, never circular)
FFT product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.special import erf

from .domain import Grid, check_field

GAUSSIAN = "gaussian"
LAPLACE = "laplace"
NEWTONIAN = "newtonian"
NONE = "none"
FAMILIES = (GAUSSIAN, LAPLACE, NEWTONIAN, NONE)
RESERVED = ("bessel",)

MAX_TABLE_BYTES = 2 * 1024**3


@dataclass(frozen=True)
class KernelSpec:
    family: str = NONE
    amplitude: float = 1.0
    width: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.family in RESERVED:
            raise ValueError(f"unimplemented family {self.family!r}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family in (GAUSSIAN, LAPLACE) and self.width <= 0:
            raise ValueError("kernel width must be positive")
        if self.family == NEWTONIAN and self.d != 2:
            raise ValueError("the Newtonian kernel is only available for d=2")

    @property
    def is_none(self) -> bool:
        return self.family == NONE or self.amplitude == 0


# ------------------------------------------------------------ pointwise


def radial_profile(spec: KernelSpec, r, order: int = 0):
    """k(r) and its first three radial derivatives (order 0..3)."""
    r = np.asarray(r, dtype=float)
    a, w = spec.amplitude, spec.width
    if spec.family == NONE:
        return np.zeros_like(r)
    if spec.family == GAUSSIAN:
        g = a * np.exp(-(r**2) / (2 * w**2))
        s = r / w**2
        return [g, -s * g, (s**2 - 1 / w**2) * g, (3 * s / w**2 - s**3) * g][order]
    if spec.family == LAPLACE:
        g = a * np.exp(-r / w)
        return g * (-1.0 / w) ** order
    c = a / (2 * np.pi)
    with np.errstate(divide="ignore"):
        return [-c * np.log(r), -c / r, c / r**2, -2 * c / r**3][order]


def kernel_eval(spec: KernelSpec, x):
    """K(x) for points of shape (..., d); scalars allowed in 1D."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if (spec.d == 1 and (x.ndim == 0 or x.shape[-1] != 1)) else np.linalg.norm(x, axis=-1)
    if spec.family == NEWTONIAN and np.any(r == 0):
        raise ValueError("the Newtonian kernel is singular at the origin")
    return radial_profile(spec, r)


# ------------------------------------------------------------ admissibility


@dataclass
class AdmissibilityReport:
    radial_nonincreasing: bool
    monotone_k2: bool
    monotone_k1_over_r: bool
    sampled_range: tuple[float, float]
    third_derivative_exponent: float
    third_derivative_decay: bool
    smooth_at_origin: bool

    @property
    def all_pass(self) -> bool:
        return all(
            [
                self.radial_nonincreasing,
                self.monotone_k2,
                self.monotone_k1_over_r,
                self.third_derivative_decay,
                self.smooth_at_origin,
            ]
        )


def _monotone(v) -> bool:
    dv = np.diff(v)
    scale = np.max(np.abs(v)) + 1e-300
    return bool(np.all(dv >= -1e-12 * scale) or np.all(dv <= 1e-12 * scale))


def admissibility_report(spec: KernelSpec) -> AdmissibilityReport:
    if spec.family == NONE:
        return AdmissibilityReport(True, True, True, (0.0, 0.0), -np.inf, True, True)
    w = spec.width if spec.family != NEWTONIAN else 1.0
    r = np.logspace(-4, 2, 600) * w
    k = radial_profile(spec, r)
    nonincr = bool(np.all(np.diff(k) <= 1e-14 * np.max(np.abs(k))))
    near = np.logspace(-4, 0, 200) * (w / 4)
    k1, k2 = radial_profile(spec, near, 1), radial_profile(spec, near, 2)
    # bound on the third-derivative tensor of a radial function
    rr = np.logspace(-3, 1.5, 400) * w
    d3 = np.abs(radial_profile(spec, rr, 3)) + 3 * np.abs(
        radial_profile(spec, rr, 2) / rr - radial_profile(spec, rr, 1) / rr**2
    )
    tail = rr >= w
    ok = d3[tail] > 1e-280
    if ok.sum() >= 2:
        exponent = float(np.polyfit(np.log(rr[tail][ok]), np.log(d3[tail][ok]), 1)[0])
    else:
        exponent = -np.inf
    scaled = rr ** (spec.d + 1) * d3
    decay = bool(np.isfinite(scaled).all() and exponent <= -(spec.d + 1) + 1e-6)
    if spec.family == GAUSSIAN:
        smooth = True
    elif spec.family == LAPLACE:
        # |D^2 K| ~ 1/|x| near 0, locally integrable only for d >= 2
        smooth = spec.d >= 2
    else:
        smooth = False
    return AdmissibilityReport(
        radial_nonincreasing=nonincr,
        monotone_k2=_monotone(k2),
        monotone_k1_over_r=_monotone(k1 / near),
        sampled_range=(float(near[0]), float(near[-1])),
        third_derivative_exponent=exponent,
        third_derivative_decay=decay,
        smooth_at_origin=smooth,
    )


# ------------------------------------------------------------ cell tables

_GL3 = np.polynomial.legendre.leggauss(3)


def _gauss_nodes(lo, hi, sub):
    """Composite 3-point Gauss nodes/weights on [lo, hi] split into ``sub`` parts."""
    x, w = _GL3
    edges = np.linspace(0.0, 1.0, sub + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(a + (b - a) * (x + 1) / 2)
        weights.append((b - a) * w / 2)
    t = np.concatenate(nodes)
    return t, np.concatenate(weights)


def _offsets(n, h):
    k = np.arange(-(n - 1), n)
    return k, (k - 0.5) * h, (k + 0.5) * h


def _gauss_anti(z, w):
    return w * np.sqrt(np.pi / 2) * erf(z / (w * np.sqrt(2)))


def _laplace_anti(z, w):
    return np.sign(z) * w * (-np.expm1(-np.abs(z) / w))


def _log_rect_anti(x, y):
    """Antiderivative G with d2G/dxdy = ln(x^2 + y^2)."""
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(r2 > 0, x * y * (np.log(np.where(r2 > 0, r2, 1.0)) - 3), 0.0)
        t2 = np.where(x != 0, x * x * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        t3 = np.where(y != 0, y * y * np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
    return t1 + t2 + t3


def _log_line_anti(x, y):
    """Antiderivative H in y of ln(x^2 + y^2)."""
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(r2 > 0, y * np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        t2 = np.where(x != 0, 2 * x * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
    return t1 - 2 * y + t2


def _quad_cells_2d(f, xlo, xhi, ylo, yhi, near):
    """Integrate f over the rectangles [xlo_i, xhi_i] x [ylo_j, yhi_j] (outer grid)."""
    out = np.zeros((xlo.size, ylo.size))
    X0, Y0 = np.meshgrid(xlo, ylo, indexing="ij")
    DX, DY = np.meshgrid(xhi - xlo, yhi - ylo, indexing="ij")
    for sub in (1, 8):
        mask = near if sub == 8 else ~near
        if not mask.any():
            continue
        t, wt = _gauss_nodes(0.0, 1.0, sub)
        acc = np.zeros(mask.sum())
        x0, y0, dx, dy = X0[mask], Y0[mask], DX[mask], DY[mask]
        for ti, wi in zip(t, wt):
            for tj, wj in zip(t, wt):
                acc += wi * wj * f(x0 + ti * dx, y0 + tj * dy)
        out[mask] = acc * dx * dy
    return out


def _quad_lines_2d(f, xs, ylo, yhi, near):
    """Integrate f(x_i, y) over y in [ylo_j, yhi_j]."""
    out = np.zeros((xs.size, ylo.size))
    X, Y0 = np.meshgrid(xs, ylo, indexing="ij")
    _, DY = np.meshgrid(xs, yhi - ylo, indexing="ij")
    for sub in (1, 8):
        mask = near if sub == 8 else ~near
        if not mask.any():
            continue
        t, wt = _gauss_nodes(0.0, 1.0, sub)
        acc = np.zeros(mask.sum())
        for ti, wi in zip(t, wt):
            acc += wi * f(X[mask], Y0[mask] + ti * DY[mask])
        out[mask] = acc * DY[mask]
    return out


def cell_weights(spec: KernelSpec, grid: Grid) -> np.ndarray:
    """W[k] = integral of K over the offset-k cell; shape (2n-1,) per axis."""
    if spec.d != grid.d:
        raise ValueError(f"kernel dimension {spec.d} does not match grid dimension {grid.d}")
    if spec.family == NONE:
        return np.zeros(tuple(2 * n - 1 for n in grid.resolution))
    a, w = spec.amplitude, spec.width
    if grid.d == 1:
        (n,), (h,) = grid.resolution, grid.spacing
        _, lo, hi = _offsets(n, h)
        if spec.family == GAUSSIAN:
            return a * (_gauss_anti(hi, w) - _gauss_anti(lo, w))
        return a * (_laplace_anti(hi, w) - _laplace_anti(lo, w))
    (nx, ny), (hx, hy) = grid.resolution, grid.spacing
    kx, xlo, xhi = _offsets(nx, hx)
    ky, ylo, yhi = _offsets(ny, hy)
    if spec.family == GAUSSIAN:
        gx = _gauss_anti(xhi, w) - _gauss_anti(xlo, w)
        gy = _gauss_anti(yhi, w) - _gauss_anti(ylo, w)
        return a * np.outer(gx, gy)
    if spec.family == NEWTONIAN:
        G = _log_rect_anti
        X1, Y1 = np.meshgrid(xlo, ylo, indexing="ij")
        X2, Y2 = np.meshgrid(xhi, yhi, indexing="ij")
        box = G(X2, Y2) - G(X1, Y2) - G(X2, Y1) + G(X1, Y1)
        return -a / (4 * np.pi) * box
    near = (np.abs(kx)[:, None] <= 2) & (np.abs(ky)[None, :] <= 2)
    return _quad_cells_2d(
        lambda x, y: a * np.exp(-np.sqrt(x * x + y * y) / w), xlo, xhi, ylo, yhi, near
    )


def gradient_weights(spec: KernelSpec, grid: Grid) -> list[np.ndarray]:
    """Tables for each component of grad K, averaged over offset cells and
    scaled by the cell volume, so that (dK/dx_a * u)_i = sum_j G_a[i-j] u_j."""
    if spec.family == NONE:
        return [np.zeros(tuple(2 * n - 1 for n in grid.resolution)) for _ in range(grid.d)]
    a, w = spec.amplitude, spec.width
    if grid.d == 1:
        (n,), (h,) = grid.resolution, grid.spacing
        _, lo, hi = _offsets(n, h)
        return [radial_profile(spec, np.abs(hi)) - radial_profile(spec, np.abs(lo))]
    (nx, ny), (hx, hy) = grid.resolution, grid.spacing
    kx, xlo, xhi = _offsets(nx, hx)
    ky, ylo, yhi = _offsets(ny, hy)
    if spec.family == GAUSSIAN:
        ex = lambda z: np.exp(-(z**2) / (2 * w**2))  # noqa: E731
        gx = _gauss_anti(xhi, w) - _gauss_anti(xlo, w)
        gy = _gauss_anti(yhi, w) - _gauss_anti(ylo, w)
        return [a * np.outer(ex(xhi) - ex(xlo), gy), a * np.outer(gx, ex(yhi) - ex(ylo))]
    out = []
    for axis in range(2):
        if axis == 0:
            xs_hi, xs_lo, l_lo, l_hi, kk = xhi, xlo, ylo, yhi, (kx, ky)
        else:
            xs_hi, xs_lo, l_lo, l_hi, kk = yhi, ylo, xlo, xhi, (ky, kx)
        if spec.family == NEWTONIAN:
            H = _log_line_anti
            Xh, L1 = np.meshgrid(xs_hi, l_lo, indexing="ij")
            _, L2 = np.meshgrid(xs_hi, l_hi, indexing="ij")
            Xl, _ = np.meshgrid(xs_lo, l_lo, indexing="ij")
            line = (H(Xh, L2) - H(Xh, L1)) - (H(Xl, L2) - H(Xl, L1))
            tab = -a / (4 * np.pi) * line
        else:
            near = (np.abs(kk[0])[:, None] <= 2) & (np.abs(kk[1])[None, :] <= 2)
            f = lambda x, y: a * np.exp(-np.sqrt(x * x + y * y) / w)  # noqa: E731
            tab = _quad_lines_2d(f, xs_hi, l_lo, l_hi, near) - _quad_lines_2d(
                f, xs_lo, l_lo, l_hi, near
            )
        out.append(tab if axis == 0 else tab.T)
    return out


# ------------------------------------------------------------ operators


def _padded_shape(grid: Grid) -> tuple[int, ...]:
    return tuple(2 * n for n in grid.resolution)


def _table_spectrum(table: np.ndarray, grid: Grid, workers=None) -> np.ndarray:
    P = _padded_shape(grid)
    buf = np.zeros(P)
    # offset k goes to index k mod P so the circular product equals the linear one
    idx = [np.arange(-(n - 1), n) % p for n, p in zip(grid.resolution, P)]
    buf[np.ix_(*idx)] = table
    return sfft.rfftn(buf, workers=workers)


@dataclass(frozen=True)
class ConvOperator:
    grid: Grid
    spec: KernelSpec
    weights: np.ndarray
    grad_weights: tuple = field(repr=False)
    _spectrum: np.ndarray = field(repr=False)
    _grad_spectra: tuple = field(repr=False)

    @property
    def is_zero(self) -> bool:
        return self.spec.is_none

    def apply_table(self, spectrum, u, workers=None):
        P = _padded_shape(self.grid)
        uh = sfft.rfftn(u, s=P, workers=workers)
        out = sfft.irfftn(uh * spectrum, s=P, workers=workers)
        return np.ascontiguousarray(out[tuple(slice(0, n) for n in self.grid.resolution)])


def build_operator(spec: KernelSpec, grid: Grid, workers=None) -> ConvOperator:
    if spec.d != grid.d:
        raise ValueError(f"kernel dimension {spec.d} does not match grid dimension {grid.d}")
    P = _padded_shape(grid)
    needed = 8 * (1 + grid.d) * (np.prod(P) + np.prod([2 * n - 1 for n in grid.resolution]))
    if needed > MAX_TABLE_BYTES:
        raise MemoryError(f"convolution tables need about {needed / 1e9:.2f} GB")
    W = cell_weights(spec, grid)
    G = gradient_weights(spec, grid)
    return ConvOperator(
        grid=grid,
        spec=spec,
        weights=W,
        grad_weights=tuple(G),
        _spectrum=_table_spectrum(W, grid, workers),
        _grad_spectra=tuple(_table_spectrum(g, grid, workers) for g in G),
    )


def convolve(op: ConvOperator, u: np.ndarray, workers=None) -> np.ndarray:
    """K*u at cell centres."""
    u = check_field(op.grid, u)
    if op.is_zero:
        return np.zeros(op.grid.shape)
    return op.apply_table(op._spectrum, u, workers)


def grad_convolve(op: ConvOperator, u: np.ndarray, workers=None) -> list[np.ndarray]:
    """Cell-centred components of (grad K)*u."""
    u = check_field(op.grid, u)
    if op.is_zero:
        return [np.zeros(op.grid.shape) for _ in range(op.grid.d)]
    return [op.apply_table(s, u, workers) for s in op._grad_spectra]


def potential_face_velocity(grid: Grid, c: np.ndarray) -> list[np.ndarray]:
    """Face-normal velocity as the centred difference of the potential K*u.

    Boundary faces are zero here; callers needing boundary values use
    ``attraction_velocity(..., method="average")``.
    """
    out = []
    for axis in range(grid.d):
        shape = list(grid.shape)
        shape[axis] += 1
        v = np.zeros(shape)
        inner = [slice(None)] * grid.d
        inner[axis] = slice(1, -1)
        v[tuple(inner)] = np.diff(c, axis=axis) / grid.spacing[axis]
        out.append(v)
    return out


def attraction_velocity(op: ConvOperator, u: np.ndarray, method: str = "average", workers=None):
    """V = (grad K)*u on faces.

    ``average``: mean of the two adjacent cell-centred values (one-sided on
    boundary faces).  ``potential``: centred difference of K*u on interior
    faces, the form used by the time stepper.
    """
    grid = op.grid
    if method == "potential":
        return potential_face_velocity(grid, convolve(op, u, workers))
    if method != "average":
        raise ValueError(f"unknown velocity method {method!r}")
    comps = grad_convolve(op, u, workers)
    out = []
    for axis, vc in enumerate(comps):
        shape = list(grid.shape)
        shape[axis] += 1
        v = np.zeros(shape)
        sl = lambda s: tuple(s if a == axis else slice(None) for a in range(grid.d))  # noqa: E731
        v[sl(slice(1, -1))] = 0.5 * (np.take(vc, range(1, vc.shape[axis]), axis=axis)
                                     + np.take(vc, range(0, vc.shape[axis] - 1), axis=axis))
        v[sl(slice(0, 1))] = np.take(vc, [0], axis=axis)
        v[sl(slice(-1, None))] = np.take(vc, [vc.shape[axis] - 1], axis=axis)
        out.append(v)
    return out


def direct_convolve(spec: KernelSpec, grid: Grid, u: np.ndarray) -> np.ndarray:
    """Explicit double sum over cells; the O(N^2) reference for ``convolve``."""
    u = check_field(grid, u)
    W = cell_weights(spec, grid)
    if grid.d == 1:
        n = grid.resolution[0]
        i = np.arange(n)
        return W[(i[:, None] - i[None, :]) + n - 1] @ u
    nx, ny = grid.resolution
    out = np.zeros((nx, ny))
    jx, jy = np.arange(nx), np.arange(ny)
    for i in range(nx):
        rows = W[i - jx + nx - 1]
        for j in range(ny):
            out[i, j] = np.sum(rows[:, j - jy + ny - 1] * u)
    return out
