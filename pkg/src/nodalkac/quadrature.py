"""Uniform-grid integration on T^d and on boxes, with doubling refinement.

Integrands receive a :class:`GridSpec` and return node values (shape
``grid.shape``).  They may instead return ``(node_values, correction)`` where
``correction`` is a scalar added to the weighted sum; this is how cell-local
jump corrections are folded in without changing the grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


# Torus nodes sit at cell centres, ``(i + 1/2) 2 pi / m``.  Fields built from
# cosines have critical points on {0, pi}^d; keeping nodes off that lattice
# stops a node from landing exactly on a near-degenerate critical point.
TORUS_NODE_SHIFT = 0.5


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid: ``m`` nodes per axis on T^d, ``m + 1`` on a box."""

    m: int
    d: int
    lower: tuple[float, ...] | None = None  # None means the torus
    upper: tuple[float, ...] | None = None
    shift: float | tuple[float, ...] = TORUS_NODE_SHIFT  # torus node offset, in steps (per axis or scalar)

    def __post_init__(self):
        if self.m < 4 or self.m & (self.m - 1):
            raise ValueError(f"m must be a power of two >= 4, got {self.m}")
        if self.lower is not None:
            if len(self.lower) != self.d or len(self.upper) != self.d:
                raise ValueError("box bounds must have d entries")
            if any(a >= b for a, b in zip(self.lower, self.upper)):
                raise ValueError("box needs a_i < b_i")

    @classmethod
    def torus(cls, m: int, d: int) -> "GridSpec":
        return cls(m, d)

    @classmethod
    def box(cls, m: int, lower: Sequence[float], upper: Sequence[float]) -> "GridSpec":
        return cls(m, len(lower), tuple(float(v) for v in lower), tuple(float(v) for v in upper))

    @property
    def is_torus(self) -> bool:
        return self.lower is None

    @property
    def axes(self) -> list[np.ndarray]:
        if self.is_torus:
            return [(np.arange(self.m) + c) * (TWO_PI / self.m) for c in self.shifts]
        return [np.linspace(a, b, self.m + 1) for a, b in zip(self.lower, self.upper)]

    @property
    def shifts(self) -> tuple[float, ...]:
        if isinstance(self.shift, (int, float)):
            return (float(self.shift),) * self.d
        return tuple(float(c) for c in self.shift)

    @property
    def steps(self) -> list[float]:
        if self.is_torus:
            return [TWO_PI / self.m] * self.d
        return [(b - a) / self.m for a, b in zip(self.lower, self.upper)]

    @property
    def shape(self) -> tuple[int, ...]:
        n = self.m if self.is_torus else self.m + 1
        return (n,) * self.d

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes, indexing="ij")

    def weights_1d(self) -> list[np.ndarray]:
        out = []
        for h, n in zip(self.steps, self.shape):
            w = np.full(n, h)
            if not self.is_torus:
                w[0] = w[-1] = h / 2
            out.append(w)
        return out

    def refined(self) -> "GridSpec":
        return GridSpec(2 * self.m, self.d, self.lower, self.upper, self.shift)


@dataclass
class IntegralResult:
    value: float
    error_estimate: float
    levels: int
    m: int
    converged: bool = True
    history: list[float] = field(default_factory=list)

    @property
    def status(self) -> str:
        return "ok" if self.converged else "tolerance not reached"


Integrand = Callable[[GridSpec], "np.ndarray | tuple[np.ndarray, float]"]


def grid_sum(values, grid: GridSpec) -> float:
    """Trapezoid sum of node values on ``grid``."""
    correction = 0.0
    if isinstance(values, tuple):
        values, correction = values
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        values = np.broadcast_to(values, grid.shape)
    if grid.is_torus:
        total = float(np.sum(values)) * math.prod(grid.steps)
    else:
        total = values
        for w in reversed(grid.weights_1d()):
            total = total @ w
        total = float(total)
    return total + float(correction)


# Torus grids with more nodes than this are summed as interleaved sub-lattices
# (the trapezoid sum on m^d equals the mean of r^d sums on (m/r)^d grids).
MAX_BLOCK_NODES = 1 << 21


def sublattices(grid: GridSpec) -> list[GridSpec]:
    """Split a torus grid into coarser interleaved grids of at most MAX_BLOCK_NODES nodes."""
    if not grid.is_torus:
        return [grid]
    r = 1
    while (grid.m // r) ** grid.d > MAX_BLOCK_NODES and grid.m // r > 8:
        r *= 2
    if r == 1:
        return [grid]
    out = []
    for j in itertools.product(range(r), repeat=grid.d):
        shift = tuple((ji + c) / r for ji, c in zip(j, grid.shifts))
        out.append(GridSpec(grid.m // r, grid.d, shift=shift))
    return out


def grid_integral(integrand: Integrand, grid: GridSpec) -> float:
    """Trapezoid integral on ``grid``, blocked into sub-lattices when large."""
    blocks = sublattices(grid)
    if len(blocks) == 1:
        return grid_sum(integrand(grid), grid)
    return math.fsum(grid_sum(integrand(b), b) for b in blocks) / len(blocks)


def _refine(integrand: Integrand, grid: GridSpec, tol: float, m_max: int) -> IntegralResult:
    if tol <= 0:
        raise ValueError("tol must be positive")
    history = [grid_integral(integrand, grid)]
    err = math.inf
    while grid.m * 2 <= m_max:
        grid = grid.refined()
        history.append(grid_integral(integrand, grid))
        err = abs(history[-1] - history[-2])
        if err <= tol:
            return IntegralResult(history[-1], err, len(history), grid.m, True, history)
    return IntegralResult(history[-1], err, len(history), grid.m, err <= tol, history)


def integrate_periodic(integrand: Integrand, d: int, m_start: int = 16, tol: float = 1e-6,
                       m_max: int | None = None, shift: float = TORUS_NODE_SHIFT) -> IntegralResult:
    """Integrate over T^d = [0, 2 pi)^d, doubling m until ``|I_2m - I_m| <= tol``.

    When ``m_max`` is reached the last value is returned with
    ``converged=False``; if ``m_start == m_max`` a single level is used and
    the error estimate is ``inf``.
    """
    m_max = default_m_max(d) if m_max is None else m_max
    return _refine(integrand, GridSpec(m_start, d, shift=shift), tol, m_max)


def integrate_box(integrand: Integrand, a: Sequence[float], b: Sequence[float], m_start: int = 16,
                  tol: float = 1e-6, m_max: int | None = None) -> IntegralResult:
    """Composite trapezoid on the box prod [a_i, b_i] with doubling refinement."""
    m_max = default_m_max(len(a)) if m_max is None else m_max
    return _refine(integrand, GridSpec.box(m_start, a, b), tol, m_max)


def default_m_max(d: int) -> int:
    return {1: 2**20, 2: 2**11}.get(d, 2**8)


@dataclass(frozen=True)
class QuadSettings:
    """Refinement controls (config keys quad.m_start / quad.tol / quad.m_max)."""

    m_start: int = 16
    tol: float = 1e-6
    m_max: int | None = None

    @classmethod
    def fixed(cls, m: int) -> "QuadSettings":
        return cls(m_start=m, tol=math.inf, m_max=m)

    def cap(self, d: int) -> int:
        return default_m_max(d) if self.m_max is None else self.m_max
