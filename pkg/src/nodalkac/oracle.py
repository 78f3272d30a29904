"""Brute-force ground truths: bisection root finding, marching squares/cubes
nodal measure and the epsilon-band Kac-Rice estimator.

Nothing here reuses the closed-formula integrands, so agreement with
:mod:`nodalkac.kacrice` is a genuine cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field_models import DegenerateRealization, TWO_PI
from .quadrature import GridSpec, grid_integral, grid_sum

ETA_THRESHOLD = 1e-8
# Nodes with f exactly 0 are pushed to the positive side by this amount.
LEVEL_SHIFT = 1e-15


@dataclass
class OracleResult:
    value: float
    m: int
    history: list[float] = field(default_factory=list)
    status: str = "ok"

    def __post_init__(self):
        if not self.history:
            self.history = [self.value]


# ---------------------------------------------------------------------------
# 1D: scan + bisection
# ---------------------------------------------------------------------------


def _scan_nodes(domain, m: int) -> tuple[np.ndarray, bool]:
    if domain is None:
        return np.arange(m) * (TWO_PI / m), True
    a, b = domain
    return np.linspace(a, b, m + 1), False


def _bisect(field, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    f_lo = np.asarray(field(lo), dtype=float) - LEVEL_SHIFT
    width = float(np.max(hi - lo)) if lo.size else 0.0
    steps = max(1, int(math.ceil(math.log2(max(width, tol) / tol))) + 1)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        f_mid = np.asarray(field(mid), dtype=float) - LEVEL_SHIFT
        left = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(left, mid, lo)
        f_lo = np.where(left, f_mid, f_lo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _roots_at(field, domain, m: int, eta_threshold: float | None, tol: float) -> np.ndarray:
    x, periodic = _scan_nodes(domain, m)
    if eta_threshold is not None:
        jet = field.grid_jet([x], order=1)
        min_eta = float(np.sqrt(np.min(jet.eta_sq)))
        if min_eta < eta_threshold:
            raise DegenerateRealization(f"scan grid min eta {min_eta:.3e}", min_eta)
        v = jet.value
    else:
        v = np.asarray(field(x), dtype=float)
    positive = (v - LEVEL_SHIFT) > 0
    if periodic:
        nxt = np.roll(positive, -1)
        cells = np.nonzero(positive != nxt)[0]
        lo = x[cells]
        hi = lo + TWO_PI / m
    else:
        cells = np.nonzero(positive[:-1] != positive[1:])[0]
        lo, hi = x[cells], x[cells + 1]
    roots = np.sort(_bisect(field, lo, hi, tol))
    if periodic:
        roots = np.mod(roots, TWO_PI)
        roots.sort()
    if roots.size > 1:
        keep = np.concatenate([[True], np.diff(roots) > 10 * tol])
        roots = roots[keep]
        if periodic and roots.size > 1 and roots[0] + TWO_PI - roots[-1] <= 10 * tol:
            roots = roots[:-1]
    return roots


def _initial_scan(field, domain, m: int) -> int:
    """Start at a resolution of about 8 nodes per shortest period."""
    kmax = float(np.max(np.abs(field.wavevectors))) if hasattr(field, "wavevectors") else 0.0
    length = TWO_PI if domain is None else domain[1] - domain[0]
    want = max(m, int(math.ceil(8 * kmax * length / TWO_PI)))
    return 1 << max(0, (want - 1).bit_length())


def find_zeros_1d(field, domain: Sequence[float] | None = None, m: int = 64,
                  eta_threshold: float | None = ETA_THRESHOLD, tol: float = 1e-12,
                  m_max: int = 1 << 24) -> np.ndarray:
    """All zeros of a 1D field on T^1 (``domain=None``) or on ``[a, b]``.

    The scan resolution doubles until the root count agrees at three
    consecutive resolutions.
    """
    if m < 64:
        raise ValueError("scan resolution must be >= 64")
    m = _initial_scan(field, domain, m)
    counts: list[int] = []
    roots = np.empty(0)
    while True:
        roots = _roots_at(field, domain, m, eta_threshold, tol)
        counts.append(roots.size)
        if len(counts) >= 3 and counts[-1] == counts[-2] == counts[-3]:
            return roots
        if 2 * m > m_max:
            return roots
        m *= 2


def count_zeros_bruteforce_1d(field, domain: Sequence[float] | None = None, m: int = 64,
                              eta_threshold: float | None = ETA_THRESHOLD) -> int:
    """Number of zeros found by sign-change scanning and bisection."""
    return int(find_zeros_1d(field, domain, m, eta_threshold).size)


# ---------------------------------------------------------------------------
# 2D/3D: marching squares and marching cubes
# ---------------------------------------------------------------------------


def _crossing(v0, v1):
    with np.errstate(divide="ignore", invalid="ignore"):
        return v0 / (v0 - v1)


def marching_squares_length(values: np.ndarray, steps: Sequence[float], periodic: bool) -> float:
    """Total length of the zero contour of ``values`` sampled on a uniform grid.

    Linear interpolation along cell edges; saddle cells are resolved by the
    sign of the mean of the four corners.
    """
    v = np.asarray(values, dtype=float) - LEVEL_SHIFT
    if periodic:
        v = np.pad(v, ((0, 1), (0, 1)), mode="wrap")
    hx, hy = steps
    v00, v10, v01, v11 = v[:-1, :-1], v[1:, :-1], v[:-1, 1:], v[1:, 1:]
    p00, p10, p01, p11 = v00 > 0, v10 > 0, v01 > 0, v11 > 0
    # edge crossings in cell-local coordinates scaled to physical lengths
    cross = {
        "b": p00 != p10, "t": p01 != p11, "l": p00 != p01, "r": p10 != p11,
    }
    tb, tt = _crossing(v00, v10), _crossing(v01, v11)
    tl, tr = _crossing(v00, v01), _crossing(v10, v11)
    zero = np.zeros_like(tb)
    pts = {
        "b": (tb * hx, zero), "t": (tt * hx, zero + hy),
        "l": (zero, tl * hy), "r": (zero + hx, tr * hy),
    }

    def seg(e1, e2):
        (x1, y1), (x2, y2) = pts[e1], pts[e2]
        return np.hypot(x1 - x2, y1 - y2)

    n_cross = cross["b"].astype(int) + cross["t"] + cross["l"] + cross["r"]
    total = 0.0
    two = n_cross == 2
    for e1, e2 in (("b", "t"), ("b", "l"), ("b", "r"), ("t", "l"), ("t", "r"), ("l", "r")):
        mask = two & cross[e1] & cross[e2]
        if np.any(mask):
            total += float(np.sum(seg(e1, e2)[mask]))
    saddle = n_cross == 4
    if np.any(saddle):
        centre_pos = (v00 + v10 + v01 + v11) / 4 > 0
        # centre joins the 00/11 diagonal: cut off the 10 and 01 corners
        joins_diag = centre_pos == p00
        cut_10_01 = seg("b", "r") + seg("l", "t")
        cut_00_11 = seg("b", "l") + seg("r", "t")
        total += float(np.sum(np.where(joins_diag, cut_10_01, cut_00_11)[saddle]))
    return total


def marching_cubes_area(values: np.ndarray, steps: Sequence[float], periodic: bool) -> float:
    """Total area of the zero isosurface (Lorensen marching cubes)."""
    from skimage.measure import marching_cubes, mesh_surface_area

    v = np.asarray(values, dtype=float) - LEVEL_SHIFT
    if periodic:
        v = np.pad(v, ((0, 1), (0, 1), (0, 1)), mode="wrap")
    if v.min() > 0 or v.max() < 0:
        return 0.0
    verts, faces, _, _ = marching_cubes(v, level=0.0, spacing=tuple(steps), method="lorensen")
    return float(mesh_surface_area(verts, faces))


def _grid_for(field, box, m: int):
    d = field.dim
    if box is None:
        axes = [(np.arange(m) + 0.5) * (TWO_PI / m)] * d  # cell centres, as elsewhere on the torus
        return axes, [TWO_PI / m] * d, True
    a, b = box
    axes = [np.linspace(lo, hi, m + 1) for lo, hi in zip(a, b)]
    return axes, [(hi - lo) / m for lo, hi in zip(a, b)], False


def nodal_measure_at(field, m: int, box=None) -> float:
    """Marching measure at a single resolution."""
    d = field.dim
    if d not in (2, 3):
        raise ValueError("marching oracle supports d = 2 or 3")
    axes, steps, periodic = _grid_for(field, box, m)
    values = field.grid_values(axes)
    if d == 2:
        return marching_squares_length(values, steps, periodic)
    return marching_cubes_area(values, steps, periodic)


def marching_nodal_measure(field, m: int = 64, box=None, m_max: int | None = None,
                           rtol: float = 0.01) -> OracleResult:
    """Nodal length (d=2) or area (d=3) on T^d or on ``box = (a, b)``.

    Doubles ``m`` until the relative change is below ``rtol``; with
    ``m_max = m`` a single resolution is used.
    """
    m_max = m if m_max is None else m_max
    history = [nodal_measure_at(field, m, box)]
    while 2 * m <= m_max:
        m *= 2
        history.append(nodal_measure_at(field, m, box))
        prev, cur = history[-2], history[-1]
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return OracleResult(cur, m, history)
    status = "ok" if len(history) == 1 else "resolution cap reached"
    return OracleResult(history[-1], m, history, status)


# ---------------------------------------------------------------------------
# epsilon-band Kac-Rice
# ---------------------------------------------------------------------------

MIN_BAND_NODES = 100


def kacrice_eps(field, eps: float, m: int, box=None) -> OracleResult:
    """``(1 / 2 eps) int 1{|f| < eps} |grad f| dx`` on a uniform grid.

    Torus grids larger than one block are summed sub-lattice by sub-lattice,
    so fine grids (needed to resolve a thin band) stay within memory.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    band_nodes = 0

    def band_integrand(axes):
        nonlocal band_nodes
        jet = field.grid_jet(axes, order=1)
        band = np.abs(jet.value) < eps
        band_nodes += int(np.count_nonzero(band))
        return np.where(band, np.sqrt(np.sum(jet.grad**2, axis=0)), 0.0) / (2 * eps)

    if box is None:
        value = grid_integral(lambda g: band_integrand(g.axes), GridSpec.torus(m, field.dim))
    else:
        grid = GridSpec.box(m, *box)
        value = grid_sum(band_integrand(grid.axes), grid)
    status = "ok" if band_nodes >= MIN_BAND_NODES else "band undersampled"
    return OracleResult(value, m, [value], status)
