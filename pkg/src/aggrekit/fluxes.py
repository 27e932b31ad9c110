"""Compiled face-flux kernels shared by the stepper, the energy and the steady solver.

Fields are passed flat in C order of an ``(nx, ny)`` array (``ny = 1`` in 1D).
Each interior face carries

    F = -(A(uR) - A(uL)) / h + ubar * (cR - cL) / h,   ubar = dA / dPhi'

i.e. ``F = ubar * xi`` with ``xi = -(muR - muL) / h`` and
``mu = Phi'_eps(u) - K*u``.  When the flow runs up the density gradient the
mobility is capped by the donor value, so outflow from a cell is bounded by
its own content.  ``F * xi`` is the face dissipation density.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OK = 0
BLOWUP = 1
POSITIVITY_FAILURE = 2
STATIONARY = 3  # the step left u bitwise unchanged, so every later step will too

GUARD = 1e-14
MAX_HALVINGS = 8

# bookkeeping slots carried across calls
B_STEPS, B_CUMD, B_DPREV, B_DTPREV, B_EPREV, B_MPREV = 0, 1, 2, 3, 4, 5
B_MAXDE, B_MAXDM, B_MINNEG, B_RETRIES, B_LASTDT, B_HASPREV = 6, 7, 8, 9, 10, 11
B_SIZE = 12


def new_book() -> np.ndarray:
    b = np.zeros(B_SIZE)
    b[B_MAXDE] = -np.inf
    b[B_MAXDM] = -np.inf
    return b


@njit(cache=True, nogil=True)
def a_law(y, ca, m, eps):
    if m == 1.0:
        return (ca + eps) * y
    return ca * y**m + eps * y


@njit(cache=True, nogil=True)
def a_prime_law(y, ca, m, eps):
    if m == 1.0:
        return ca + eps
    return ca * m * y ** (m - 1.0) + eps


@njit(cache=True, nogil=True)
def phi_law(y, ca, m, eps):
    if y <= 0.0:
        return 0.0
    xl = y * math.log(y) - y
    if m == 1.0:
        return (ca + eps) * xl
    return ca * (y**m - m * y) / (m - 1.0) + eps * xl


@njit(cache=True, nogil=True)
def dphi_law(y, ca, m, eps):
    if y <= 0.0:
        if m == 1.0 or eps > 0.0:
            return -np.inf
        return -ca * m / (m - 1.0)
    if m == 1.0:
        return (ca + eps) * math.log(y)
    v = ca * m / (m - 1.0) * (y ** (m - 1.0) - 1.0)
    if eps > 0.0:
        v += eps * math.log(y)
    return v


@njit(cache=True, nogil=True)
def dphi_jump(hi, lo, ca, m, eps):
    """Phi'_eps(hi) - Phi'_eps(lo) for hi >= lo >= 0, without cancellation near 0."""
    if m == 1.0:
        if lo <= 0.0:
            return np.inf
        return (ca + eps) * math.log(hi / lo)
    v = ca * m / (m - 1.0) * (hi ** (m - 1.0) - lo ** (m - 1.0))
    if eps > 0.0:
        if lo <= 0.0:
            return np.inf
        v += eps * math.log(hi / lo)
    return v


@njit(cache=True, nogil=True)
def entropy_mean(a, b, ca, m, eps):
    lo = min(a, b)
    hi = max(a, b)
    if hi - lo <= 1e-7 * hi:
        return 0.5 * (a + b)
    dp = dphi_jump(hi, lo, ca, m, eps)
    if not math.isfinite(dp):
        return 0.0
    if dp <= 0.0:
        # both values so small that the jump underflows
        return 0.5 * (a + b)
    return (a_law(hi, ca, m, eps) - a_law(lo, ca, m, eps)) / dp


@njit(cache=True, nogil=True)
def face_flux(uL, uR, dc, h, ca, m, eps, floor):
    """Return (F, F*xi) for one interior face; F > 0 moves mass from L to R."""
    if uL <= 0.0 and uR <= 0.0:
        return 0.0, 0.0
    ub = entropy_mean(uL, uR, ca, m, eps)
    fe = (-(a_law(uR, ca, m, eps) - a_law(uL, ca, m, eps)) + ub * dc) / h
    if fe > 0.0:
        donor, other = uL, uR
    elif fe < 0.0:
        donor, other = uR, uL
    else:
        return 0.0, 0.0
    if donor >= other:
        w = fe * fe / ub if ub > floor else 0.0
        return fe, w
    if donor <= 0.0:
        return 0.0, 0.0
    jump = dphi_jump(uR, uL, ca, m, eps) if uR >= uL else -dphi_jump(uL, uR, ca, m, eps)
    xi = (dc - jump) / h
    f = donor * xi
    return f, f * xi


@njit(cache=True, nogil=True)
def flux_divergence(u, c, nx, ny, d, hx, hy, bc, ca, m, eps, floor, div):
    """Fill ``div`` with the cell divergence of the face fluxes.

    ``bc`` holds Dirichlet flags for (left, right, bottom, top).
    Returns (dissipation, max |V.n| on interior faces, boundary outflow rate).
    """
    vol = hx * hy
    ax = hy  # face area normal to x (hy = 1 in 1D)
    ay = hx
    for k in range(nx * ny):
        div[k] = 0.0
    diss = 0.0
    vmax = 0.0
    for i in range(nx - 1):
        for j in range(ny):
            L = i * ny + j
            R = L + ny
            dc = c[R] - c[L]
            av = abs(dc) / hx
            if av > vmax:
                vmax = av
            f, w = face_flux(u[L], u[R], dc, hx, ca, m, eps, floor)
            div[L] += f * ax / vol
            div[R] -= f * ax / vol
            diss += w * vol
    if d == 2:
        for i in range(nx):
            for j in range(ny - 1):
                L = i * ny + j
                R = L + 1
                dc = c[R] - c[L]
                av = abs(dc) / hy
                if av > vmax:
                    vmax = av
                f, w = face_flux(u[L], u[R], dc, hy, ca, m, eps, floor)
                div[L] += f * ay / vol
                div[R] -= f * ay / vol
                diss += w * vol
    out = 0.0
    # Dirichlet faces: ghost value 0 at distance h/2, no advective transport
    if bc[0] or bc[1]:
        for j in range(ny):
            if bc[0]:
                k = j
                f = a_law(u[k], ca, m, eps) / (0.5 * hx)
                div[k] += f * ax / vol
                out += f * ax
            if bc[1]:
                k = (nx - 1) * ny + j
                f = a_law(u[k], ca, m, eps) / (0.5 * hx)
                div[k] += f * ax / vol
                out += f * ax
    if d == 2 and (bc[2] or bc[3]):
        for i in range(nx):
            if bc[2]:
                k = i * ny
                f = a_law(u[k], ca, m, eps) / (0.5 * hy)
                div[k] += f * ay / vol
                out += f * ay
            if bc[3]:
                k = i * ny + ny - 1
                f = a_law(u[k], ca, m, eps) / (0.5 * hy)
                div[k] += f * ay / vol
                out += f * ay
    return diss, vmax, out


@njit(cache=True, nogil=True)
def energy_sum(u, c, vol, ca, m, eps):
    e = 0.0
    for k in range(u.size):
        e += phi_law(u[k], ca, m, eps) - 0.5 * u[k] * c[k]
    return e * vol


@njit(cache=True, nogil=True)
def conv_direct_1d(W, u, out):
    n = u.size
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += W[i - j + n - 1] * u[j]
        out[i] = s


@njit(cache=True, nogil=True)
def stable_dt_kernel(u, vmax, d, h, ca, m, eps, cfl_adv, cfl_diff, dt_max):
    amax = 0.0
    for k in range(u.size):
        a = a_prime_law(u[k], ca, m, eps)
        if a > amax:
            amax = a
    dt = dt_max
    if amax > 0.0:
        dt = min(dt, cfl_diff * h * h / (2.0 * d * amax))
    if vmax > 0.0:
        dt = min(dt, cfl_adv * h / vmax)
    return dt


@njit(cache=True, nogil=True)
def _sum(u):
    s = 0.0
    for k in range(u.size):
        s += u[k]
    return s


@njit(cache=True, nogil=True)
def step_kernel(u, c, u_prev, div, t, t_stop, nx, ny, d, hx, hy, bc, ca, m, eps,
                floor, cfl_adv, cfl_diff, dt_max, blowup, book):
    """One accepted explicit Euler step, in place on ``u``.

    Returns (status, dt).  ``u_prev`` receives the pre-step state.
    """
    vol = hx * hy
    diss, vmax, _ = flux_divergence(u, c, nx, ny, d, hx, hy, bc, ca, m, eps, floor, div)
    energy = energy_sum(u, c, vol, ca, m, eps)
    mass = _sum(u) * vol
    if book[B_HASPREV] > 0.0:
        book[B_CUMD] += 0.5 * book[B_DTPREV] * (book[B_DPREV] + diss)
        book[B_MAXDE] = max(book[B_MAXDE], energy - book[B_EPREV])
        book[B_MAXDM] = max(book[B_MAXDM], mass - book[B_MPREV])
    book[B_DPREV] = diss
    book[B_EPREV] = energy
    book[B_MPREV] = mass
    book[B_HASPREV] = 1.0

    dt = stable_dt_kernel(u, vmax, d, min(hx, hy) if d == 2 else hx, ca, m, eps,
                          cfl_adv, cfl_diff, dt_max)
    remaining = t_stop - t
    if dt >= remaining:
        dt = remaining
    n = u.size
    for k in range(n):
        u_prev[k] = u[k]
    for attempt in range(MAX_HALVINGS + 1):
        umax = 0.0
        umin = np.inf
        for k in range(n):
            v = u_prev[k] - dt * div[k]
            u[k] = v
            if v > umax:
                umax = v
            if v < umin:
                umin = v
        if umin >= -GUARD * umax:
            break
        if attempt == MAX_HALVINGS:
            for k in range(n):
                u[k] = u_prev[k]
            return POSITIVITY_FAILURE, dt
        dt *= 0.5
        book[B_RETRIES] += 1.0
    if umin < 0.0:
        book[B_MINNEG] = min(book[B_MINNEG], umin / umax)
        neg = 0.0
        pos = 0.0
        for k in range(n):
            if u[k] < 0.0:
                neg -= u[k]
                u[k] = 0.0
            else:
                pos += u[k]
        if pos > 0.0:
            scale = 1.0 - neg / pos
            for k in range(n):
                u[k] *= scale
    book[B_STEPS] += 1.0
    book[B_DTPREV] = dt
    book[B_LASTDT] = dt
    if umax > blowup:
        return BLOWUP, dt
    for k in range(n):
        if u[k] != u_prev[k]:
            return OK, dt
    return STATIONARY, dt


@njit(cache=True, nogil=True)
def advance_1d(u, W, u_prev, t, t_stop, nx, hx, bc, ca, m, eps, floor,
               cfl_adv, cfl_diff, dt_max, blowup, book, conv_zero):
    """Step a 1D state up to ``t_stop`` with the convolution done in place."""
    c = np.zeros(nx)
    div = np.zeros(nx)
    status = OK
    while t < t_stop:
        if not conv_zero:
            conv_direct_1d(W, u, c)
        status, dt = step_kernel(u, c, u_prev, div, t, t_stop, nx, 1, 1, hx, 1.0, bc,
                                 ca, m, eps, floor, cfl_adv, cfl_diff, dt_max, blowup, book)
        if status == POSITIVITY_FAILURE:
            return status, t
        if status == STATIONARY:
            # jump to t_stop; the next trapezoid closes the whole span with D unchanged
            book[B_DTPREV] = t_stop - t
            return OK, t_stop
        t += dt
        if t_stop - t <= 1e-14 * max(1.0, abs(t_stop)):
            t = t_stop
        if status == BLOWUP:
            return status, t
    return status, t


# ---------------------------------------------------------------- wrappers


def bc_flags(grid) -> np.ndarray:
    from .domain import DIRICHLET, FACES

    return np.array([grid.d * 2 > k and grid.layout.tag(f) == DIRICHLET
                     for k, f in enumerate(FACES)], dtype=np.bool_)


def geometry(grid):
    """(nx, ny, hx, hy) with the 1D convention ny = 1, hy = 1."""
    if grid.d == 1:
        return grid.resolution[0], 1, grid.spacing[0], 1.0
    return grid.resolution[0], grid.resolution[1], grid.spacing[0], grid.spacing[1]


def law_params(law):
    return float(law.c_a), float(law.m), float(law.epsilon)


def evaluate(grid, law, u, c, floor):
    """Flux divergence field, dissipation, max |V.n| and Dirichlet outflow for (u, K*u)."""
    nx, ny, hx, hy = geometry(grid)
    uf = np.ascontiguousarray(u, dtype=float).ravel()
    cf = np.ascontiguousarray(c, dtype=float).ravel()
    div = np.empty_like(uf)
    diss, vmax, out = flux_divergence(uf, cf, nx, ny, grid.d, hx, hy, bc_flags(grid),
                                      *law_params(law), float(floor), div)
    return div.reshape(grid.shape), diss, vmax, out
