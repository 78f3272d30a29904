"""Closed Kac-Rice formulas for zero counts and nodal volumes.

All integrands are written in eta-denominator form so they stay bounded at
zeros of f; ``sign(0) = 0`` throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field_models import DegenerateRealization, Jet2, TWO_PI
from .quadrature import GridSpec, QuadSettings, integrate_box, integrate_periodic

ETA_THRESHOLD = 1e-8
BOUNDARY_ZERO_TOL = 1e-12
DEFAULT_BOUNDARY_EXPONENT = 1


class BoundaryZero(ValueError):
    """The field vanishes on the boundary of the integration domain."""


class ThirdDerivativesUnavailable(ValueError):
    """The compact formula was requested for a field without third derivatives."""


@dataclass
class NodalEstimate:
    value: float
    method: str
    m: int
    error_estimate: float
    min_eta: float
    converged: bool = True
    levels: int = 1
    parts: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Counting functions
# ---------------------------------------------------------------------------


class CountingFunction:
    """Counting function F with F(-inf) = -1 and F(+inf) = 1.

    ``density(f, f1, f2)`` returns ``-(1/2) F'(f1/f) (f1/f)'`` rewritten so
    that it stays bounded where f vanishes.
    """

    TAGS = ("sqrt", "arctan", "uniform_cdf")

    def __init__(self, tag: str = "arctan"):
        if tag not in self.TAGS:
            raise ValueError(f"unknown counting function {tag!r}; expected one of {self.TAGS}")
        self.tag = tag

    def __repr__(self) -> str:
        return f"CountingFunction({self.tag!r})"

    def F(self, x):
        x = np.asarray(x, dtype=float)
        if self.tag == "sqrt":
            with np.errstate(invalid="ignore"):
                out = x / np.sqrt(1.0 + x * x)
            return np.where(np.isinf(x), np.sign(x), out)
        if self.tag == "arctan":
            return (2.0 / math.pi) * np.arctan(x)
        return np.clip(x, -1.0, 1.0)

    def dF(self, x):
        x = np.asarray(x, dtype=float)
        if self.tag == "sqrt":
            return (1.0 + x * x) ** -1.5
        if self.tag == "arctan":
            return (2.0 / math.pi) / (1.0 + x * x)
        return (np.abs(x) <= 1.0).astype(float)

    def density(self, f, f1, f2):
        num = f * f2 - f1 * f1
        eta_sq = f * f + f1 * f1
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.tag == "sqrt":
                return -0.5 * np.abs(f) * num / eta_sq**1.5
            if self.tag == "arctan":
                return -num / (math.pi * eta_sq)
            on = np.abs(f1) <= np.abs(f)
            return np.where(on, -0.5 * num / np.where(on, f * f, 1.0), 0.0)

    def at_log_derivative(self, f, f1):
        """F(f1 / f), with f = 0 mapped to the limits +-1."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.F(np.asarray(f1, dtype=float) / np.asarray(f, dtype=float))


def _as_counting(F) -> CountingFunction:
    return F if isinstance(F, CountingFunction) else CountingFunction(F)


# ---------------------------------------------------------------------------
# 1D counts
# ---------------------------------------------------------------------------


def _check_eta(jet: Jet2, threshold: float) -> float:
    min_eta = float(np.sqrt(np.min(jet.eta_sq)))
    if min_eta < threshold:
        raise DegenerateRealization(f"grid min eta {min_eta:.3e} below threshold {threshold:.1e}", min_eta)
    return min_eta


def _indicator_jump_correction(field, x: np.ndarray, on: np.ndarray, G: np.ndarray, cells: np.ndarray,
                               right: np.ndarray, h: float) -> float:
    """Replace the trapezoid on cells where 1{|f'| <= |f|} switches.

    The switch point is located by bisection on |f'| - |f| and each cell is
    split there into two exact-endpoint trapezoids.
    """
    if cells.size == 0:
        return 0.0
    lo = x[cells].copy()
    hi = lo + h
    psi_lo = np.where(on[cells], -1.0, 1.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        jet = field.jet(mid.reshape(-1, 1), order=1)
        psi = np.abs(jet.grad[0]) - np.abs(jet.value)
        same = np.sign(np.where(psi <= 0, -1.0, 1.0)) == psi_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    xs = 0.5 * (lo + hi)
    jet = field.jet(xs.reshape(-1, 1), order=2)
    f, f1, f2 = jet.value, jet.grad[0], jet.hess[0, 0]
    Gs = -0.5 * (f * f2 - f1 * f1) / (f * f)
    left_on = on[cells]
    G_left = G[cells]
    G_right = G[right]
    x_left = x[cells]
    exact = np.where(left_on, (xs - x_left) * (G_left + Gs) / 2, (x_left + h - xs) * (Gs + G_right) / 2)
    trap = np.where(left_on, h / 2 * G_left, h / 2 * G_right)
    return float(np.sum(exact - trap))


def _fill_removable(field, x: np.ndarray, values: np.ndarray, bad: np.ndarray, F: CountingFunction,
                    h: float) -> np.ndarray:
    """Nodes where f = f' = 0 (non-flat zeros): use the two-sided limit."""
    if not np.any(bad):
        return values
    delta = 1e-6 * h
    pts = x[bad]
    acc = 0.0
    for s in (-1.0, 1.0):
        jet = field.jet((pts + s * delta).reshape(-1, 1), order=2)
        acc = acc + F.density(jet.value, jet.grad[0], jet.hess[0, 0])
    values = values.copy()
    values[bad] = acc / 2
    return values


def _count_integrand(field, F: CountingFunction, threshold: float | None, record: dict):
    def integrand(grid: GridSpec):
        x = grid.axes[0]
        jet = field.grid_jet([x], order=2)
        f, f1, f2 = jet.value, jet.grad[0], jet.hess[0, 0]
        if threshold is not None:
            record["min_eta"] = min(record.get("min_eta", math.inf), _check_eta(jet, threshold))
        else:
            record["min_eta"] = min(record.get("min_eta", math.inf), float(np.sqrt(np.min(jet.eta_sq))))
        values = F.density(f, f1, f2)
        h = grid.steps[0]
        if threshold is None:
            values = _fill_removable(field, x, values, (f == 0) & (f1 == 0), F, h)
        if F.tag != "uniform_cdf":
            return values
        on = np.abs(f1) <= np.abs(f)
        with np.errstate(divide="ignore", invalid="ignore"):
            G = np.where(f != 0, -0.5 * (f * f2 - f1 * f1) / (f * f), 0.0)
        n = x.size
        if grid.is_torus:
            right = (np.arange(n) + 1) % n
            cells = np.nonzero(on != on[right])[0]
        else:
            cells = np.nonzero(on[:-1] != on[1:])[0]
        right_idx = (cells + 1) % n if grid.is_torus else cells + 1
        corr = _indicator_jump_correction(field, x, on, G, cells, right_idx, h)
        return values, corr

    return integrand


def _resolve_quad(quad: QuadSettings | None, F: CountingFunction | None = None, field=None) -> QuadSettings:
    if quad is None:
        quad = QuadSettings()
    if F is not None and F.tag == "uniform_cdf":
        m_max = 2**20 if quad.m_max is None else quad.m_max
        m_start = quad.m_start
        kmax = _max_frequency(field)
        if kmax > 0:
            # the set |f'| <= |f| around an extremum is O(1/k^2) wide; start with nodes inside it
            m_start = max(m_start, 1 << (int(math.ceil(16 * kmax * kmax)) - 1).bit_length())
        m_max = max(m_max, m_start)
        # second-order convergence after jump correction needs finer grids
        quad = QuadSettings(m_start, quad.tol, m_max)
    return quad


def _max_frequency(field) -> float:
    k = getattr(field, "wavevectors", None)
    return float(np.abs(k).max()) if k is not None and k.size else 0.0


def count_zeros_periodic_1d(field, F="arctan", quad: QuadSettings | None = None,
                            eta_threshold: float = ETA_THRESHOLD) -> NodalEstimate:
    """Number of zeros of a 2 pi-periodic field on [0, 2 pi)."""
    F = _as_counting(F)
    if field.dim != 1 or not getattr(field, "periodic", False):
        raise ValueError("count_zeros_periodic_1d needs a 1D periodic field")
    quad = _resolve_quad(quad, F, field)
    record: dict = {}
    res = integrate_periodic(_count_integrand(field, F, eta_threshold, record), 1,
                             quad.m_start, quad.tol, quad.cap(1))
    return NodalEstimate(res.value, f"periodic_1d:{F.tag}", res.m, res.error_estimate,
                         record["min_eta"], res.converged, res.levels)


def count_zeros_interval_1d(field, a: float, b: float, F="arctan",
                            quad: QuadSettings | None = None) -> NodalEstimate:
    """Number of distinct zeros in [a, b] (non-flat zeros counted once)."""
    F = _as_counting(F)
    if field.dim != 1:
        raise ValueError("count_zeros_interval_1d needs a 1D field")
    if not a < b:
        raise ValueError("need a < b")
    ends = field.jet(np.array([[a], [b]]), order=1)
    if abs(ends.value[0] * ends.value[1]) <= BOUNDARY_ZERO_TOL:
        raise BoundaryZero(f"f(a) f(b) = {ends.value[0] * ends.value[1]:.3e}")
    quad = _resolve_quad(quad, F, field)
    record: dict = {}
    res = integrate_box(_count_integrand(field, F, None, record), [a], [b], quad.m_start, quad.tol, quad.cap(1))
    Fa, Fb = F.at_log_derivative(ends.value, ends.grad[0])
    boundary = 0.5 * float(Fb - Fa)
    return NodalEstimate(res.value + boundary, f"interval_1d:{F.tag}", res.m, res.error_estimate,
                         record["min_eta"], res.converged, res.levels, {"boundary": boundary, "integral": res.value})


@dataclass
class ZeroCountBounds:
    arctan: float
    arctan_coarse: float
    indicator: float


def zero_count_bounds(field, quad: QuadSettings | None = None,
                      eta_threshold: float = ETA_THRESHOLD) -> ZeroCountBounds:
    """Upper bounds on the number of zeros of a periodic 1D field.

    ``arctan = (1/pi) int |f''| / eta + 2`` (with its coarse form
    ``2 (max|f''| / min eta + 1)``) and
    ``indicator = (1/2) int 1{|f'/f| <= 1} |f''| / |f| + pi``.
    """
    quad = quad or QuadSettings()
    record = {"min_eta": math.inf, "max_f2": 0.0}

    def arctan_part(grid):
        jet = field.grid_jet(grid.axes, order=2)
        record["min_eta"] = min(record["min_eta"], _check_eta(jet, eta_threshold))
        f2 = jet.hess[0, 0]
        record["max_f2"] = max(record["max_f2"], float(np.max(np.abs(f2))))
        return np.abs(f2) / jet.eta / math.pi

    def indicator_part(grid):
        jet = field.grid_jet(grid.axes, order=2)
        f, f1, f2 = jet.value, jet.grad[0], jet.hess[0, 0]
        on = np.abs(f1) <= np.abs(f)
        return np.where(on, 0.5 * np.abs(f2) / np.where(on, np.abs(f), 1.0), 0.0)

    r1 = integrate_periodic(arctan_part, 1, quad.m_start, quad.tol, quad.cap(1))
    # the indicator lives on O(1/k^2)-wide intervals: same resolution floor as uniform_cdf
    q2 = _resolve_quad(quad, CountingFunction("uniform_cdf"), field)
    r2 = integrate_periodic(indicator_part, 1, q2.m_start, q2.tol, q2.cap(1))
    coarse = 2.0 * (record["max_f2"] / record["min_eta"] + 1.0)
    return ZeroCountBounds(r1.value + 2.0, coarse, r2.value + math.pi)


# ---------------------------------------------------------------------------
# Volume densities (generic in the number type so tangent pairs reuse them)
# ---------------------------------------------------------------------------


def _components(jet: Jet2):
    d = jet.dim
    g = [jet.grad[i] for i in range(d)]
    H = [[jet.hess[i, j] for j in range(d)] for i in range(d)]
    return jet.value, g, H


def nonsingular_terms(f, g, H):
    """The three Lipschitz integrands of the non-singular volume formula.

    Returns ``(t1, t2, t3)`` with
    ``t1 = |f| (f lap f - |grad f|^2) / eta^3``,
    ``t2 = |f| (|Hess|^2 - (lap f)^2) / eta^3`` and
    ``t3 = |f| / eta^5 (lap f <grad f, grad eta^2> - grad f^T Hess grad eta^2)``.
    Works on floats, arrays, or tangent pairs.
    """
    d = len(g)
    grad_sq = g[0] * g[0]
    for i in range(1, d):
        grad_sq = grad_sq + g[i] * g[i]
    s = f * f + grad_sq
    lap = H[0][0]
    for i in range(1, d):
        lap = lap + H[i][i]
    hess_sq = H[0][0] * H[0][0]
    for i in range(d):
        for j in range(d):
            if i or j:
                hess_sq = hess_sq + H[i][j] * H[i][j]
    ds = []
    for i in range(d):
        acc = f * g[i]
        for j in range(d):
            acc = acc + H[i][j] * g[j]
        ds.append(2.0 * acc)
    g_ds = g[0] * ds[0]
    for i in range(1, d):
        g_ds = g_ds + g[i] * ds[i]
    gHds = None
    for i in range(d):
        for j in range(d):
            term = g[i] * H[i][j] * ds[j]
            gHds = term if gHds is None else gHds + term
    absf = abs(f)
    s15 = s**1.5
    t1 = (f * lap - grad_sq) * absf / s15
    t2 = absf * (hess_sq - lap * lap) / s15
    t3 = absf / s**2.5 * (lap * g_ds - gHds)
    return t1, t2, t3


# Coefficients of (t1, t2, t3).  Integrating the sign(f) term of the first-level
# formula by parts gives A = int t2 + (3/2) int t3, and the volume is
# -(1/2) int t1 - (1/2) A.
NONSINGULAR_COEFFS = (-0.5, -0.5, -0.75)


def nonsingular_density(f, g, H, coeffs=NONSINGULAR_COEFFS):
    t1, t2, t3 = nonsingular_terms(f, g, H)
    return coeffs[0] * t1 + coeffs[1] * t2 + coeffs[2] * t3


def sign_density(jet: Jet2) -> np.ndarray:
    f = jet.value
    grad_sq = np.sum(jet.grad**2, axis=0)
    lap = jet.laplacian
    s15 = jet.eta_sq**1.5
    gHg = np.einsum("i...,ij...,j...->...", jet.grad, jet.hess, jet.grad)
    smooth = np.abs(f) * (f * lap - grad_sq) / s15
    singular = np.sign(f) * (lap * grad_sq - gHg) / s15
    return -0.5 * smooth - 0.5 * singular


def compact_density(jet: Jet2) -> np.ndarray:
    """-(1/2) sign(f) lap(f / eta), expanded with third derivatives."""
    if jet.third is None:
        raise ThirdDerivativesUnavailable("compact formula needs third derivatives")
    f, g, H, T = jet.value, jet.grad, jet.hess, jet.third
    s = jet.eta_sq
    d = jet.dim
    lap_ratio = np.zeros_like(f)
    for i in range(d):
        s_i = 2.0 * (f * g[i] + np.sum(g * H[i], axis=0))
        s_ii = 2.0 * (g[i] ** 2 + f * H[i, i] + np.sum(H[i] ** 2, axis=0) + np.sum(g * T[i, i], axis=0))
        w = s**-0.5
        w_i = -0.5 * s**-1.5 * s_i
        w_ii = 0.75 * s**-2.5 * s_i**2 - 0.5 * s**-1.5 * s_ii
        lap_ratio += H[i, i] * w + 2.0 * g[i] * w_i + f * w_ii
    return -0.5 * np.sign(f) * lap_ratio


def volume_density(jet: Jet2, method: str) -> np.ndarray:
    if method == "nonsingular":
        return nonsingular_density(*_components(jet))
    if method == "sign":
        return sign_density(jet)
    if method == "compact":
        return compact_density(jet)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Torus and box volumes
# ---------------------------------------------------------------------------

METHODS = ("sign", "compact", "nonsingular")


# Local refinement near near-degenerate points (see ``local_cell_correction``):
# a cell is split while its corner feature width is below LOCAL_RESOLVE cell
# sizes and below LOCAL_ANOMALY times the median width of the base grid.
LOCAL_RESOLVE = {1: 8.0, 2: 8.0, 3: 4.0}
LOCAL_ANOMALY = 0.2
LOCAL_MAX_DEPTH = 16
LOCAL_MAX_CELLS = 50_000


def feature_width(jet: Jet2) -> np.ndarray:
    """Length scale ``eta / (|f| + |Hess|)`` over which eta changes by O(1)."""
    hess_norm = np.sqrt(np.sum(jet.hess**2, axis=(0, 1)))
    return jet.eta / (np.abs(jet.value) + hess_norm + 1e-300)


def _cell_min(values: np.ndarray) -> np.ndarray:
    """Minimum over the 2^d corners of each periodic grid cell (origin-indexed)."""
    out = values
    for ax in range(values.ndim):
        out = np.minimum(out, np.roll(out, -1, axis=ax))
    return out


def _cell_corner_mean(values: np.ndarray) -> np.ndarray:
    out = values
    for ax in range(values.ndim):
        out = 0.5 * (out + np.roll(out, -1, axis=ax))
    return out


def _corner_offsets(d: int, n: int) -> np.ndarray:
    ticks = np.arange(n)
    return np.stack(np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1).reshape(-1, d)


def local_cell_correction(field, grid: GridSpec, jet: Jet2, density: np.ndarray, method: str,
                          order: int, record: dict) -> float:
    """Correct the trapezoid sum on cells that do not resolve the integrand.

    Around points where f and grad f are both small the volume integrands
    vary on the scale :func:`feature_width`, far below the grid step.  Such
    cells are bisected recursively (2^d children per level, exact pointwise
    jets at the new corners) until the corner width exceeds
    ``LOCAL_RESOLVE`` cell sizes; leaves use the corner-mean rule.  Returns
    the refined minus the coarse contribution of the flagged cells.
    """
    h = grid.steps[0]
    d = grid.d
    resolve = LOCAL_RESOLVE.get(d, 4.0)
    width = feature_width(jet)
    limit = LOCAL_ANOMALY * float(np.median(width))
    cell_width = _cell_min(width)
    flagged = np.argwhere((cell_width < resolve * h) & (cell_width < limit))
    if flagged.size == 0:
        return 0.0
    if len(flagged) > LOCAL_MAX_CELLS:
        return 0.0  # under-resolved everywhere; uniform refinement has to do it
    coarse = float(np.sum(_cell_corner_mean(density)[tuple(flagged.T)])) * h**d
    children = _corner_offsets(d, 2)  # child origins in half-cell units
    corners3 = _corner_offsets(d, 3)  # corners of all children of a cell
    # index of each child's corners inside the 3^d parent lattice
    child_corner_idx = np.array([[np.ravel_multi_index(tuple(c + k), (3,) * d) for k in children]
                                 for c in children])
    origins = (flagged.astype(float) + np.asarray(grid.shifts)) * h
    size = h
    refined = 0.0
    for depth in range(LOCAL_MAX_DEPTH):
        half = size / 2
        pts = origins[:, None, :] + corners3[None, :, :] * half
        fine_jet = field.jet(pts.reshape(-1, d), order=order)
        record["min_eta"] = min(record["min_eta"], float(np.sqrt(np.min(fine_jet.eta_sq))))
        dens = volume_density(fine_jet, method).reshape(len(origins), -1)
        wid = feature_width(fine_jet).reshape(len(origins), -1)
        child_mean = dens[:, child_corner_idx].mean(axis=-1)  # (cells, children)
        child_width = wid[:, child_corner_idx].min(axis=-1)
        split = child_width < resolve * half
        last = depth == LOCAL_MAX_DEPTH - 1 or np.count_nonzero(split) > LOCAL_MAX_CELLS
        if last:
            split[:] = False
        refined += float(np.sum(child_mean[~split])) * half**d
        if not np.any(split):
            break
        cell_idx, child_idx = np.nonzero(split)
        origins = origins[cell_idx] + children[child_idx] * half
        size = half
    record["local_cells"] = record.get("local_cells", 0) + len(flagged)
    return refined - coarse


def nodal_volume_torus(field, method: str = "nonsingular", quad: QuadSettings | None = None,
                       eta_threshold: float = ETA_THRESHOLD, local_refinement: bool | None = None) -> NodalEstimate:
    """H^{d-1} of the nodal set of a periodic field on T^d.

    ``local_refinement`` re-integrates under-resolved cells near
    near-degenerate points (default: on for d = 2, where such points carry
    O(1) weight; in d = 3 their weight is O(eta) and the plain sum is used).
    Without it the value is the plain grid sum, exactly homogeneous and
    translation invariant at fixed m.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    order = 3 if method == "compact" else 2
    if order > field.max_order:
        raise ThirdDerivativesUnavailable(f"{type(field).__name__} has no third derivatives")
    if not getattr(field, "periodic", False):
        raise ValueError("nodal_volume_torus needs a periodic field")
    quad = quad or QuadSettings()
    d = field.dim
    if local_refinement is None:
        local_refinement = d == 2
    record = {"min_eta": math.inf}

    def integrand(grid: GridSpec):
        jet = field.grid_jet(grid.axes, order=order)
        record["min_eta"] = min(record["min_eta"], _check_eta(jet, eta_threshold))
        density = volume_density(jet, method)
        if not local_refinement or d == 1:
            return density
        return density, local_cell_correction(field, grid, jet, density, method, order, record)

    res = integrate_periodic(integrand, d, quad.m_start, quad.tol, quad.cap(d))
    return NodalEstimate(res.value, method, res.m, res.error_estimate, record["min_eta"],
                         res.converged, res.levels, {"local_cells": record.get("local_cells", 0)})


def nodal_volume_fixed_grid(field, m: int, method: str = "nonsingular",
                            eta_threshold: float = ETA_THRESHOLD) -> NodalEstimate:
    """Single-level torus volume on an m^d grid (no refinement)."""
    return nodal_volume_torus(field, method, QuadSettings.fixed(m), eta_threshold, local_refinement=False)


def _face_axes(grid_axes: list[np.ndarray], i: int, at: float) -> list[np.ndarray]:
    axes = list(grid_axes)
    axes.insert(i, np.array([at]))
    return axes


def nodal_volume_box(field, a: Sequence[float], b: Sequence[float], quad: QuadSettings | None = None,
                     boundary_exponent: float = DEFAULT_BOUNDARY_EXPONENT,
                     eta_threshold: float = ETA_THRESHOLD) -> NodalEstimate:
    """Nodal volume inside the box prod [a_i, b_i] via the first-level formula.

    The interior carries the sign-method density; each pair of faces adds
    ``(1/2) [int_{face} sign(f) d_i f / eta^q]_{a_i}^{b_i}`` with
    ``q = boundary_exponent``.
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    d = len(a)
    if field.dim != d:
        raise ValueError("box dimension does not match the field")
    quad = quad or QuadSettings()
    q = float(boundary_exponent)
    record = {"min_eta": math.inf}

    def interior(grid: GridSpec):
        jet = field.grid_jet(grid.axes, order=2)
        record["min_eta"] = min(record["min_eta"], _check_eta(jet, eta_threshold))
        return sign_density(jet)

    res = integrate_box(interior, a, b, quad.m_start, quad.tol, quad.cap(d))

    def face_values(axes: list[np.ndarray], i: int) -> np.ndarray:
        jet = field.grid_jet(axes, order=1)
        f = np.take(jet.value, 0, axis=i)
        if np.any(np.abs(f) <= BOUNDARY_ZERO_TOL):
            raise BoundaryZero(f"zero on boundary face x_{i} = {float(axes[i][0])}")
        gi = np.take(jet.grad[i], 0, axis=i)
        return np.sign(f) * gi / jet.eta_sq.take(0, axis=i) ** (q / 2)

    boundary = 0.0
    face_err = 0.0
    for i in range(d):
        others_a = a[:i] + a[i + 1:]
        others_b = b[:i] + b[i + 1:]
        for sign, at in ((-1.0, a[i]), (1.0, b[i])):
            if d == 1:
                val = float(face_values([np.array([at])], 0))
                err = 0.0
            else:
                fr = integrate_box(lambda g, i=i, at=at: face_values(_face_axes(g.axes, i, at), i),
                                   others_a, others_b, quad.m_start, quad.tol, quad.cap(d - 1))
                val, err = fr.value, fr.error_estimate
            boundary += 0.5 * sign * val
            face_err += 0.5 * err
    return NodalEstimate(res.value + boundary, f"box:q={q:g}", res.m, res.error_estimate + face_err,
                         record["min_eta"], res.converged, res.levels,
                         {"interior": res.value, "boundary": boundary})


def calibrate_boundary_exponent(candidates=(1, 2), quad: QuadSettings | None = None) -> dict:
    """Run the analytic box cases for each candidate exponent.

    Returns ``{q: {case: relative_or_absolute_error}}`` plus the chosen ``q``
    (smallest worst-case error).
    """
    from .field_models import PolynomialField, cosine_product_field

    quad = quad or QuadSettings(m_start=64, tol=1e-7, m_max=1024)
    cases = {
        # two vertical segments of length 1
        "cos_x": (cosine_product_field({(1, 0): 1.0}), [0.3, 0.0], [TWO_PI - 0.3, 1.0], 2.0),
        "3cos_x": (cosine_product_field({(1, 0): 3.0}), [0.3, 0.0], [TWO_PI - 0.3, 1.0], 2.0),
        "circle": (PolynomialField([[-1.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
                   [-2.0, -2.0], [2.0, 2.0], TWO_PI),
        "2+cos_x": (cosine_product_field({(1, 0): 1.0}, offset=2.0), [0.3, 0.2], [2.5, 1.7], 0.0),
    }
    report: dict = {}
    for q in candidates:
        errs = {}
        for name, (fld, lo, hi, exact) in cases.items():
            est = nodal_volume_box(fld, lo, hi, quad, boundary_exponent=q)
            errs[name] = abs(est.value - exact) / (exact if exact else 1.0)
        report[q] = errs
    report["chosen"] = min(candidates, key=lambda q: max(report[q].values()))
    return report
