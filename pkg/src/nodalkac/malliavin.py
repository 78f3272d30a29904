"""Sharp operator on the nodal volume.

The sharp derivative of a functional along an independent copy ``hat`` of
the field is the directional derivative ``d/de Vol(f + e hat)`` at ``e = 0``.
It is evaluated here by forward-tangent arithmetic: every jet component is a
pair ``(value, tangent)`` with the base jet in ``value`` and the hat jet in
``tangent``, and the non-singular volume integrands are run on those pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .field_models import DegenerateRealization, TrigFieldRealization, check_compatible, child_rng
from .kacrice import ETA_THRESHOLD, nodal_volume_torus, nonsingular_density
from .quadrature import QuadSettings, integrate_periodic


# ---------------------------------------------------------------------------
# Tangent arithmetic
# ---------------------------------------------------------------------------


class Tangent:
    """Value with a first-order tangent; numbers and arrays act as constants."""

    __slots__ = ("val", "tan")
    __array_ufunc__ = None  # make numpy defer to the reflected operators below

    def __init__(self, val, tan=0.0):
        self.val = val
        self.tan = tan

    @staticmethod
    def _split(other):
        if isinstance(other, Tangent):
            return other.val, other.tan
        return other, 0.0

    def __add__(self, other):
        v, t = self._split(other)
        return Tangent(self.val + v, self.tan + t)

    __radd__ = __add__

    def __sub__(self, other):
        v, t = self._split(other)
        return Tangent(self.val - v, self.tan - t)

    def __rsub__(self, other):
        v, t = self._split(other)
        return Tangent(v - self.val, t - self.tan)

    def __mul__(self, other):
        v, t = self._split(other)
        return Tangent(self.val * v, self.tan * v + self.val * t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        v, t = self._split(other)
        return Tangent(self.val / v, (self.tan * v - self.val * t) / (v * v))

    def __rtruediv__(self, other):
        v, t = self._split(other)
        return Tangent(v / self.val, (t * self.val - v * self.tan) / (self.val * self.val))

    def __neg__(self):
        return Tangent(-self.val, -self.tan)

    def __pow__(self, p):
        if isinstance(p, Tangent):
            raise TypeError("only constant exponents are supported")
        return Tangent(self.val**p, p * self.val ** (p - 1) * self.tan)

    def __abs__(self):
        # sign(0) = 0: any Borel version of the derivative of |.| will do
        return Tangent(abs(self.val), np.sign(self.val) * self.tan)

    def sqrt(self):
        root = np.sqrt(self.val)
        return Tangent(root, 0.5 * self.tan / root)

    def __repr__(self) -> str:
        return f"Tangent({self.val!r}, {self.tan!r})"


def tangent_jet(base_jet, hat_jet):
    """Pair base and hat jets into ``(f, grad, hess)`` of :class:`Tangent` objects."""
    d = base_jet.dim
    f = Tangent(base_jet.value, hat_jet.value)
    g = [Tangent(base_jet.grad[i], hat_jet.grad[i]) for i in range(d)]
    H = [[Tangent(base_jet.hess[i, j], hat_jet.hess[i, j]) for j in range(d)] for i in range(d)]
    return f, g, H


# ---------------------------------------------------------------------------
# Paired fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairedField:
    base: TrigFieldRealization
    hat: TrigFieldRealization

    def __post_init__(self):
        check_compatible(self.base, self.hat)

    @property
    def dim(self) -> int:
        return self.base.dim

    def perturbed(self, eps: float) -> TrigFieldRealization:
        return self.base.linear_combination(1.0, self.hat, eps)


def make_paired_field(base: TrigFieldRealization, rng: np.random.Generator | None = None,
                      hat: TrigFieldRealization | None = None) -> PairedField:
    """Pair ``base`` with an explicit ``hat`` or with an independent copy drawn from ``rng``."""
    if hat is None:
        if rng is None:
            raise ValueError("give either rng or an explicit hat")
        if base.law is None:
            raise ValueError("base carries no sampling law; pass hat explicitly")
        hat = base.law.sample(rng)
    return PairedField(base, hat)


# ---------------------------------------------------------------------------
# Sharp nodal volume
# ---------------------------------------------------------------------------

DEFAULT_SHARP_GRID = 32


def _sharp_integrand(pair: PairedField, eta_threshold: float):
    def integrand(grid):
        axes = grid.axes
        base_jet = pair.base.grid_jet(axes, order=2)
        min_eta = float(np.sqrt(np.min(base_jet.eta_sq)))
        if min_eta < eta_threshold:
            raise DegenerateRealization(f"grid min eta {min_eta:.3e}", min_eta)
        hat_jet = pair.hat.grid_jet(axes, order=2)
        return nonsingular_density(*tangent_jet(base_jet, hat_jet)).tan

    return integrand


def sharp_nodal_volume(pair: PairedField, quad: QuadSettings | None = None,
                       eta_threshold: float = ETA_THRESHOLD) -> float:
    """Directional derivative of the non-singular volume along ``pair.hat``.

    Defaults to a fixed ``32^d`` grid so the value is the exact derivative of
    the grid sum that :func:`sharp_nodal_volume_fd` differences.
    """
    quad = quad or QuadSettings.fixed(DEFAULT_SHARP_GRID)
    res = integrate_periodic(_sharp_integrand(pair, eta_threshold), pair.dim, quad.m_start, quad.tol,
                             quad.cap(pair.dim))
    return res.value


def sharp_nodal_volume_fd(pair: PairedField, eps: float = 1e-4, quad: QuadSettings | None = None,
                          eta_threshold: float = ETA_THRESHOLD) -> float:
    """Central difference ``[Vol(f + e hat) - Vol(f - e hat)] / 2e`` of the grid volume."""
    quad = quad or QuadSettings.fixed(DEFAULT_SHARP_GRID)

    def vol(e):
        return nodal_volume_torus(pair.perturbed(e), "nonsingular", quad, eta_threshold,
                                  local_refinement=False).value

    return (vol(eps) - vol(-eps)) / (2.0 * eps)


# ---------------------------------------------------------------------------
# Non-degeneracy statistic
# ---------------------------------------------------------------------------


@dataclass
class NondegeneracyResult:
    inner_means: np.ndarray
    overall_mean: float
    resampled: int = 0
    volumes: np.ndarray = field(default_factory=lambda: np.empty(0))


def nondegeneracy_statistic(law, n_outer: int, n_inner: int, seed: int, quad: QuadSettings | None = None,
                            base: TrigFieldRealization | None = None,
                            hat_law=None, max_attempts: int = 20,
                            eta_threshold: float = ETA_THRESHOLD) -> NondegeneracyResult:
    """Average of ``sharp_nodal_volume^2`` over independent hats, per base realization.

    Bases are drawn from ``law`` (or fixed to ``base`` for every outer index);
    hats come from ``hat_law`` (default: ``law``).  Degenerate bases are
    redrawn with a fresh child seed and counted.
    """
    if n_outer < 1 or n_inner < 1:
        raise ValueError("n_outer and n_inner must be >= 1")
    hat_law = hat_law or law
    quad = quad or QuadSettings.fixed(DEFAULT_SHARP_GRID)
    inner = np.empty(n_outer)
    volumes = np.empty(n_outer)
    resampled = 0
    for i in range(n_outer):
        for attempt in range(max_attempts):
            f = base if base is not None else law.sample(child_rng(seed, i, attempt))
            try:
                vol = nodal_volume_torus(f, "nonsingular", quad, eta_threshold, local_refinement=False).value
                sq = [sharp_nodal_volume(PairedField(f, hat_law.sample(child_rng(seed, i, attempt, 1 + j))),
                                         quad, eta_threshold) ** 2
                      for j in range(n_inner)]
                break
            except DegenerateRealization:
                if base is not None:
                    raise
                resampled += 1
        else:
            raise DegenerateRealization(f"no non-degenerate base after {max_attempts} attempts")
        inner[i] = float(np.mean(sq))
        volumes[i] = vol
    return NondegeneracyResult(inner, float(np.mean(inner)), resampled, volumes)


# ---------------------------------------------------------------------------
# Negative moments of eta at a point
# ---------------------------------------------------------------------------


@dataclass
class MomentEstimate:
    mean: float
    stderr: float
    n: int


def inverse_eta_moment(d: int, s: float, n_samples: int, rng: np.random.Generator) -> MomentEstimate:
    """Monte-Carlo ``E |Z|^{-s}`` for Z standard normal in R^{d+1}.

    At a point, ``(f, grad f)`` of a normalized stationary field is such a Z,
    so this is the moment of ``eta^{-s}``; it is finite iff ``s < d + 1``.
    """
    if s == 0:
        return MomentEstimate(1.0, 0.0, n_samples)
    radius_sq = rng.chisquare(d + 1, size=n_samples)
    samples = radius_sq ** (-s / 2)
    return MomentEstimate(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n_samples)), n_samples)


def inverse_chi_moment_exact(d: int, s: float) -> float:
    """Closed form ``2^{-s/2} Gamma((d+1-s)/2) / Gamma((d+1)/2)`` (inf when ``s >= d+1``)."""
    k = d + 1
    if s >= k:
        return math.inf
    return 2.0 ** (-s / 2) * math.exp(special.gammaln((k - s) / 2) - special.gammaln(k / 2))


def inverse_chi_moment_quad(d: int, s: float) -> float:
    """Same moment by 1D numerical integration against the chi density."""
    k = d + 1

    def integrand(r):
        log_pdf = (k - 1) * math.log(r) - r * r / 2 - (k / 2 - 1) * math.log(2) - special.gammaln(k / 2)
        return r ** (-s) * math.exp(log_pdf)

    head, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
    tail, _ = integrate.quad(integrand, 1.0, math.inf, limit=200)
    return head + tail


def running_moment(d: int, s: float, sizes, rng: np.random.Generator) -> list[tuple[int, float]]:
    """Running sample mean of ``|Z|^{-s}`` at increasing sample sizes (one stream)."""
    sizes = sorted(int(n) for n in sizes)
    draws = rng.chisquare(d + 1, size=sizes[-1]) ** (-s / 2)
    totals = np.cumsum(draws)
    return [(n, float(totals[n - 1] / n)) for n in sizes]


def stabilizes(running: list[tuple[int, float]], rtol: float = 0.05) -> bool:
    """True if two consecutive doublings both change the running mean by < rtol."""
    changes = [abs(b - a) / abs(a) for (_, a), (_, b) in zip(running, running[1:])]
    return any(c1 < rtol and c2 < rtol for c1, c2 in zip(changes, changes[1:]))


THEORY_NOTE = ("Domain membership of the nodal volume is established for d >= 3; "
               "runs in lower dimension are diagnostics only.")
