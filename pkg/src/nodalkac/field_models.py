"""Gaussian field models with exact pointwise and tensor-grid jets.

Every field is a finite sum of plane waves

    f(x) = offset + sum_j  alpha_j cos(k_j . x) + beta_j sin(k_j . x)

so derivatives of any order are obtained by multiplying the complex amplitude
``alpha_j - i beta_j`` by ``prod_a (i k_ja)^{n_a}``.  Torus fields use integer
wave vectors and the period convention T^d = (R / 2 pi Z)^d.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# Points per chunk for pointwise evaluation (bounds the J x N work arrays).
_CHUNK = 1 << 14


class StructureMismatch(ValueError):
    """Two fields do not share the same coefficient index set."""


class DegenerateRealization(ArithmeticError):
    """A realization whose grid minimum of eta is below the threshold."""

    def __init__(self, message: str, min_eta: float = float("nan")):
        super().__init__(message)
        self.min_eta = min_eta


def child_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent stream for ``(master_seed, *key)``.

    Streams depend only on the key, never on scheduling, so serial and
    parallel runs draw identical numbers for the same realization index.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------


@dataclass
class Jet2:
    """Value, gradient and Hessian (optionally third derivatives) of a field.

    Arrays carry a trailing sample shape ``S``: ``value`` has shape ``S``,
    ``grad`` ``(d, *S)``, ``hess`` ``(d, d, *S)`` and ``third`` ``(d, d, d, *S)``.
    """

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.grad.shape[0]

    @property
    def eta(self) -> np.ndarray:
        return np.sqrt(self.eta_sq)

    @property
    def eta_sq(self) -> np.ndarray:
        return self.value**2 + np.sum(self.grad**2, axis=0)

    @property
    def laplacian(self) -> np.ndarray:
        return np.trace(self.hess, axis1=0, axis2=1)


def _derivative_indices(d: int, order: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations_with_replacement(range(d), order))


# ---------------------------------------------------------------------------
# Plane-wave core
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlaneWaveField:
    """Finite plane-wave sum; base class of the concrete field models."""

    wavevectors: np.ndarray  # (J, d)
    cos_coef: np.ndarray  # (J,)
    sin_coef: np.ndarray  # (J,)
    offset: float = 0.0

    max_order = 3
    periodic = False

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.wavevectors, dtype=float))
        object.__setattr__(self, "wavevectors", k)
        object.__setattr__(self, "cos_coef", np.asarray(self.cos_coef, dtype=float).reshape(-1))
        object.__setattr__(self, "sin_coef", np.asarray(self.sin_coef, dtype=float).reshape(-1))
        object.__setattr__(self, "offset", float(self.offset))
        if not (k.shape[0] == self.cos_coef.size == self.sin_coef.size):
            raise ValueError("wavevectors and coefficients disagree in length")

    @property
    def dim(self) -> int:
        return self.wavevectors.shape[1]

    @property
    def complex_coef(self) -> np.ndarray:
        return self.cos_coef - 1j * self.sin_coef

    def _coef_for(self, multi: tuple[int, ...]) -> np.ndarray:
        c = self.complex_coef
        for a in multi:
            c = c * (1j * self.wavevectors[:, a])
        return c

    def _check_order(self, order: int) -> None:
        if order > self.max_order:
            raise ValueError(f"{type(self).__name__} exposes derivatives up to order {self.max_order}")

    # -- pointwise -----------------------------------------------------------

    def _pointwise(self, multi: tuple[int, ...], x: np.ndarray) -> np.ndarray:
        c = self._coef_for(multi)
        out = np.empty(x.shape[0])
        for s in range(0, x.shape[0], _CHUNK):
            phase = np.exp(1j * (self.wavevectors @ x[s : s + _CHUNK].T))
            out[s : s + _CHUNK] = (c @ phase).real
        if not multi:
            out += self.offset
        return out

    def jet(self, x, order: int = 2) -> Jet2:
        """Exact jet at one point (shape ``(d,)``) or many points (``(N, d)``)."""
        self._check_order(order)
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        pts = x.reshape(1, -1) if single else x
        if self.dim == 1 and not single and pts.shape[1] != 1:
            pts = pts.reshape(-1, 1)
        if pts.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        d = self.dim
        multis = [()] + [m for r in range(1, max(order, 1) + 1) for m in _derivative_indices(d, r)]  # jets always carry a gradient
        coefs = np.stack([self._coef_for(m) for m in multis])  # (M, J)
        table = np.empty((len(multis), pts.shape[0]))
        for s in range(0, pts.shape[0], _CHUNK):
            phase = np.exp(1j * (self.wavevectors @ pts[s : s + _CHUNK].T))
            table[:, s : s + _CHUNK] = (coefs @ phase).real
        table[0] += self.offset
        lookup = dict(zip(multis, table))
        return self._assemble(lambda multi: lookup[multi], order, squeeze=single)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return self._pointwise((), x.reshape(-1, 1)).reshape(x.shape)
        pts = x.reshape(-1, self.dim)
        return self._pointwise((), pts).reshape(x.shape[:-1])

    # -- tensor grids ----------------------------------------------------------

    def _on_grid(self, multi: tuple[int, ...], axes: Sequence[np.ndarray]) -> np.ndarray:
        c = self._coef_for(multi)
        d = self.dim
        last = np.exp(1j * np.outer(self.wavevectors[:, d - 1], axes[d - 1]))  # (J, m_last)
        if d == 1:
            out = np.empty(axes[0].size)
            for s in range(0, axes[0].size, _CHUNK):
                ph = np.exp(1j * np.outer(self.wavevectors[:, 0], axes[0][s : s + _CHUNK]))
                out[s : s + _CHUNK] = (c @ ph).real
        else:
            w = c[:, None] * np.exp(1j * np.outer(self.wavevectors[:, 0], axes[0]))
            for a in range(1, d - 1):
                e = np.exp(1j * np.outer(self.wavevectors[:, a], axes[a]))
                w = w[..., None] * e.reshape((e.shape[0],) + (1,) * (w.ndim - 1) + (e.shape[1],))
            out = np.tensordot(w, last, axes=([0], [0])).real
        if not multi:
            out = out + self.offset
        return out

    def grid_jet(self, axes: Sequence[np.ndarray], order: int = 2) -> Jet2:
        """Exact jet on the tensor grid ``axes[0] x ... x axes[d-1]`` (ij indexing)."""
        self._check_order(order)
        if len(axes) != self.dim:
            raise ValueError(f"need {self.dim} axes")
        axes = [np.asarray(a, dtype=float) for a in axes]
        return self._assemble(lambda multi: self._on_grid(multi, axes), order)

    def grid_values(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        return self._on_grid((), [np.asarray(a, dtype=float) for a in axes])

    def _assemble(self, evaluate: Callable, order: int, squeeze: bool = False) -> Jet2:
        d = self.dim
        value = evaluate(())
        shape = value.shape
        grad = np.empty((d,) + shape)
        for i in range(d):
            grad[i] = evaluate((i,))
        hess = np.zeros((d, d) + shape)
        if order >= 2:
            for i, j in _derivative_indices(d, 2):
                hess[i, j] = evaluate((i, j))
                hess[j, i] = hess[i, j]
        third = None
        if order >= 3:
            third = np.empty((d, d, d) + shape)
            for idx in _derivative_indices(d, 3):
                v = evaluate(idx)
                for perm in set(itertools.permutations(idx)):
                    third[perm] = v
        jet = Jet2(value, grad, hess, third)
        if squeeze:
            jet = Jet2(
                value[0],
                grad[:, 0],
                hess[:, :, 0],
                None if third is None else third[..., 0],
            )
        return jet

    def scaled(self, factor: float):
        return self.linear_combination(factor, None, 0.0)

    def linear_combination(self, a: float, other: "PlaneWaveField | None", b: float):
        """Return ``a * self + b * other`` (``other`` must share the structure)."""
        if other is None:
            other = self
            b = 0.0
        else:
            check_compatible(self, other)
        return self._replace(
            cos_coef=a * self.cos_coef + b * other.cos_coef,
            sin_coef=a * self.sin_coef + b * other.sin_coef,
            offset=a * self.offset + b * other.offset,
        )

    def _replace(self, **changes):
        kwargs = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kwargs.update(changes)
        return type(self)(**kwargs)

    def shifted(self, s) -> "PlaneWaveField":
        """Field ``x -> f(x + s)``."""
        s = np.asarray(s, dtype=float).reshape(-1)
        phase = self.wavevectors @ s
        c = self.complex_coef * np.exp(1j * phase)
        return self._replace(cos_coef=c.real, sin_coef=-c.imag)


def check_compatible(a: PlaneWaveField, b: PlaneWaveField) -> None:
    if type(a) is not type(b):
        raise StructureMismatch(f"{type(a).__name__} vs {type(b).__name__}")
    if a.wavevectors.shape != b.wavevectors.shape or not np.array_equal(a.wavevectors, b.wavevectors):
        raise StructureMismatch("fields have different frequency sets")
    if getattr(a, "structure", None) != getattr(b, "structure", None):
        raise StructureMismatch(f"structure {a.structure!r} vs {b.structure!r}")


@dataclass(frozen=True, eq=False)
class TrigFieldRealization(PlaneWaveField):
    """Random trigonometric polynomial on T^d with integer wave vectors.

    ``structure`` names the deterministic part (basis, d, n, lambda, weights)
    and is what two realizations must share to be paired.
    """

    structure: str = ""
    law: object = None  # sampler that produced the realization; draws independent copies
    periodic = True

    def __post_init__(self):
        super().__post_init__()
        k = self.wavevectors
        if not np.array_equal(k, np.round(k)):
            raise ValueError("torus fields need integer wave vectors")

    @property
    def max_frequency(self) -> int:
        return int(np.abs(self.wavevectors).max()) if self.wavevectors.size else 0

    def _torus_grid_offsets(self, axes: Sequence[np.ndarray]) -> list[float] | None:
        """Offsets ``c_a`` if every axis is ``c_a + (2 pi / m) * arange(m)``, else None."""
        offsets = []
        for ax in axes:
            m = ax.size
            if m <= 2 * self.max_frequency or m < 8:
                return None
            start = float(ax[0])
            if not np.allclose(ax, start + np.arange(m) * (TWO_PI / m), rtol=0.0, atol=1e-12):
                return None
            offsets.append(start)
        return offsets

    def _on_grid(self, multi: tuple[int, ...], axes: Sequence[np.ndarray]) -> np.ndarray:
        """Uniform torus grids go through an inverse FFT of the coefficient lattice."""
        offsets = self._torus_grid_offsets(axes)
        if offsets is None:
            return super()._on_grid(multi, axes)
        shape = tuple(ax.size for ax in axes)
        spectrum = np.zeros(shape, dtype=complex)
        idx = tuple(np.mod(self.wavevectors[:, a].astype(np.int64), shape[a]) for a in range(self.dim))
        coef = self._coef_for(multi) * np.exp(1j * (self.wavevectors @ np.asarray(offsets)))
        np.add.at(spectrum, idx, coef)
        out = np.fft.ifftn(spectrum).real * math.prod(shape)
        if not multi:
            out = out + self.offset
        return out

    def torus_axes(self, m: int) -> list[np.ndarray]:
        return [np.arange(m) * (TWO_PI / m)] * self.dim


@dataclass(frozen=True, eq=False)
class SpectralProcess1D(PlaneWaveField):
    """1D stationary process from the spectral representation method."""

    max_order = 2

    @property
    def n_terms(self) -> int:
        return self.cos_coef.size

    @property
    def frequencies(self) -> np.ndarray:
        return self.wavevectors[:, 0]


# ---------------------------------------------------------------------------
# Polynomial test fields (deterministic ground truths)
# ---------------------------------------------------------------------------


class PolynomialField:
    """Polynomial on R^d given by a dense coefficient array ``c[i, j, ...]``.

    Used for analytic checks such as ``x^2 + y^2 - 1`` or ``x^3 - x``.
    """

    periodic = False
    max_order = 3

    def __init__(self, coef):
        self.coef = np.asarray(coef, dtype=float)
        if self.coef.ndim == 0:
            self.coef = self.coef.reshape(1)

    @property
    def dim(self) -> int:
        return self.coef.ndim

    def _deriv_coef(self, multi):
        c = self.coef
        for a in multi:
            c = np.polynomial.polynomial.polyder(c, axis=a)
        return c

    def _eval_points(self, c, pts):
        P = np.polynomial.polynomial
        if self.dim == 1:
            return P.polyval(pts[:, 0], c)
        if self.dim == 2:
            return P.polyval2d(pts[:, 0], pts[:, 1], c)
        if self.dim == 3:
            return P.polyval3d(pts[:, 0], pts[:, 1], pts[:, 2], c)
        raise ValueError("polynomial fields support d <= 3")

    def _eval_grid(self, c, axes):
        P = np.polynomial.polynomial
        if self.dim == 1:
            return P.polyval(axes[0], c)
        if self.dim == 2:
            return P.polygrid2d(axes[0], axes[1], c)
        return P.polygrid3d(axes[0], axes[1], axes[2], c)

    def jet(self, x, order: int = 2) -> Jet2:
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        pts = x.reshape(1, -1) if single else x.reshape(-1, self.dim)
        jet = PlaneWaveField._assemble(
            self, lambda multi: self._eval_points(self._deriv_coef(multi), pts), order
        )
        if single:
            jet = Jet2(jet.value[0], jet.grad[:, 0], jet.hess[:, :, 0],
                       None if jet.third is None else jet.third[..., 0])
        return jet

    def grid_jet(self, axes, order: int = 2) -> Jet2:
        axes = [np.asarray(a, dtype=float) for a in axes]
        return PlaneWaveField._assemble(
            self, lambda multi: self._eval_grid(self._deriv_coef(multi), axes), order
        )

    def grid_values(self, axes) -> np.ndarray:
        return self._eval_grid(self.coef, [np.asarray(a, dtype=float) for a in axes])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return np.polynomial.polynomial.polyval(x, self.coef)
        pts = x.reshape(-1, self.dim)
        return self._eval_points(self.coef, pts).reshape(x.shape[:-1])

    def scaled(self, factor: float) -> "PolynomialField":
        return PolynomialField(factor * self.coef)


# ---------------------------------------------------------------------------
# Spectral measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralMeasure:
    """Spectral measure of a stationary field.

    ``kind="lattice"``: atoms ``{k: mass}`` on Z^d, symmetric under k <-> -k.
    ``kind="band"``: uniform density on ``low <= |omega| <= high`` (1D) with
    total mass ``mass``.
    """

    kind: str
    atoms: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    low: float = 0.0
    high: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.kind == "lattice":
            if not self.atoms:
                raise ValueError("lattice measure needs atoms")
            for k, mu in self.atoms.items():
                if mu < 0:
                    raise ValueError("negative spectral mass")
                neg = tuple(-int(v) for v in k)
                if not math.isclose(self.atoms.get(neg, -1.0), mu, rel_tol=1e-12, abs_tol=0.0):
                    raise ValueError(f"atoms not symmetric at {k}")
            if self.total_mass <= 0:
                raise ValueError("total mass must be positive")
        elif self.kind == "band":
            if not (0 <= self.low < self.high):
                raise ValueError("band needs 0 <= low < high")
            if self.mass <= 0:
                raise ValueError("total mass must be positive")
        else:
            raise ValueError(f"unknown spectral measure kind {self.kind!r}")

    @classmethod
    def uniform(cls, omega: float = 1.0, mass: float = 1.0) -> "SpectralMeasure":
        """Uniform density on [-omega, omega]: the sinc-covariance process."""
        return cls("band", low=0.0, high=float(omega), mass=float(mass))

    @classmethod
    def narrow_band(cls, center: float, width: float, mass: float = 1.0) -> "SpectralMeasure":
        return cls("band", low=center - width / 2, high=center + width / 2, mass=mass)

    @classmethod
    def atom_pair(cls, k: int, mass: float = 1.0, d: int = 1) -> "SpectralMeasure":
        kk = (int(k),) + (0,) * (d - 1)
        neg = tuple(-v for v in kk)
        if kk == neg:
            return cls("lattice", atoms={kk: float(mass)})
        return cls("lattice", atoms={kk: mass / 2, neg: mass / 2})

    @property
    def dim(self) -> int:
        return len(next(iter(self.atoms))) if self.kind == "lattice" else 1

    @property
    def total_mass(self) -> float:
        return float(sum(self.atoms.values())) if self.kind == "lattice" else self.mass

    def density(self, omega) -> np.ndarray:
        """Two-sided density S(omega) of a band measure."""
        if self.kind != "band":
            raise ValueError("density is defined for band measures only")
        w = np.abs(np.asarray(omega, dtype=float))
        level = self.mass / (2.0 * (self.high - self.low))
        return np.where((w >= self.low) & (w <= self.high), level, 0.0)

    def second_moment(self, axis: int = 0) -> float:
        """``int omega_axis^2 dmu``, i.e. ``E[(d_axis f)(0)^2]``."""
        if self.kind == "lattice":
            return float(sum(mu * k[axis] ** 2 for k, mu in self.atoms.items()))
        lo, hi = self.low, self.high
        return self.mass * (hi**3 - lo**3) / (3.0 * (hi - lo))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

WeightRule = Callable[[tuple[int, ...], int, int], float]


def normalized_weight(k: tuple[int, ...], n: int, d: int) -> float:
    """Default 1/sqrt(n^d) normalization of the P_lambda family."""
    return 1.0 / math.sqrt(n**d)


def _cosine_product_waves(index: tuple[int, ...]) -> tuple[np.ndarray, float]:
    """Expand prod_a cos(k_a x_a) into plane waves cos(k . x)."""
    d = len(index)
    signs = list(itertools.product((1, -1), repeat=d - 1))
    waves = np.array([[index[0]] + [s * k for s, k in zip(sg, index[1:])] for sg in signs], dtype=float)
    return waves, 1.0 / len(signs)


def cosine_product_field(coefficients: Mapping[tuple[int, ...], float], offset: float = 0.0,
                         structure: str = "cosine_product") -> TrigFieldRealization:
    """Deterministic ``offset + sum_k c_k prod_a cos(k_a x_a)``."""
    waves, coefs = [], []
    for index, c in coefficients.items():
        w, share = _cosine_product_waves(tuple(int(v) for v in index))
        waves.append(w)
        coefs.append(np.full(len(w), c * share))
    k = np.vstack(waves)
    cos_coef = np.concatenate(coefs)
    return TrigFieldRealization(k, cos_coef, np.zeros_like(cos_coef), offset, structure=structure)


def fourier_field(cos_terms: Mapping[tuple[int, ...], float], sin_terms: Mapping[tuple[int, ...], float] | None = None,
                  offset: float = 0.0, structure: str = "fourier") -> TrigFieldRealization:
    """Deterministic ``offset + sum_k a_k cos(k.x) + b_k sin(k.x)``."""
    sin_terms = sin_terms or {}
    keys = list(dict.fromkeys(list(cos_terms) + list(sin_terms)))
    k = np.array(keys, dtype=float)
    a = np.array([cos_terms.get(key, 0.0) for key in keys])
    b = np.array([sin_terms.get(key, 0.0) for key in keys])
    return TrigFieldRealization(k, a, b, offset, structure=structure)


def _half_lattice(n: int, d: int) -> list[tuple[int, ...]]:
    """One representative of each pair {k, -k} with 0 < max|k_i| <= n."""
    out = []
    for k in itertools.product(range(-n, n + 1), repeat=d):
        if any(k) and next(v for v in k if v != 0) > 0:
            out.append(k)
    return out


def sample_trig_field(d: int, n: int, lam: float, rng: np.random.Generator,
                      weights: WeightRule = normalized_weight, basis: str = "cosine_product") -> TrigFieldRealization:
    """Sample ``lam * a0 + sum_k w_k G_k phi_k(x)`` on T^d.

    ``basis="cosine_product"`` is the P_lambda family (indices 1..n per axis,
    ``phi_k = prod_a cos(k_a x_a)``).  ``basis="fourier"`` draws independent
    cosine and sine amplitudes for every k in the half lattice with
    ``max|k_i| <= n``, which yields a stationary field.
    """
    if d < 1 or n < 1 or lam < 0:
        raise ValueError("need d >= 1, n >= 1, lam >= 0")
    a0 = rng.standard_normal()
    structure = f"{basis}:d={d}:n={n}:lam={lam!r}:w={getattr(weights, '__name__', repr(weights))}"
    if basis == "cosine_product":
        indices = list(itertools.product(range(1, n + 1), repeat=d))
        g = rng.standard_normal(len(indices))
        coeffs = {idx: weights(idx, n, d) * gi for idx, gi in zip(indices, g)}
        law = TrigLaw(d, n, lam, weights, basis)
        return cosine_product_field(coeffs, offset=lam * a0, structure=structure)._replace(law=law)
    if basis == "fourier":
        indices = _half_lattice(n, d)
        ga = rng.standard_normal(len(indices))
        gb = rng.standard_normal(len(indices))
        w = np.array([weights(idx, n, d) for idx in indices])
        return TrigFieldRealization(np.array(indices, dtype=float), w * ga, w * gb, lam * a0,
                                    structure=structure, law=TrigLaw(d, n, lam, weights, basis))
    raise ValueError(f"unknown basis {basis!r}")


@dataclass(frozen=True)
class TrigLaw:
    """Parameters of :func:`sample_trig_field`; ``sample`` draws a fresh realization."""

    d: int
    n: int
    lam: float
    weights: WeightRule = normalized_weight
    basis: str = "cosine_product"

    def sample(self, rng: np.random.Generator) -> TrigFieldRealization:
        return sample_trig_field(self.d, self.n, self.lam, rng, self.weights, self.basis)


@dataclass(frozen=True)
class LatticeLaw:
    measure: SpectralMeasure

    def sample(self, rng: np.random.Generator) -> TrigFieldRealization:
        return sample_lattice_field(self.measure, rng)


def sample_lattice_field(measure: SpectralMeasure, rng: np.random.Generator) -> TrigFieldRealization:
    """Stationary torus field whose covariance is ``sum_k mu_k e^{i k.(y-x)}``."""
    if measure.kind != "lattice":
        raise ValueError("sample_lattice_field needs a lattice measure")
    zero = tuple(0 for _ in range(measure.dim))
    keys = sorted(k for k in measure.atoms if k != zero and next(v for v in k if v != 0) > 0)
    amp = np.sqrt(2.0 * np.array([measure.atoms[k] for k in keys]))
    a0 = rng.standard_normal()
    ga = rng.standard_normal(len(keys))
    gb = rng.standard_normal(len(keys))
    offset = math.sqrt(measure.atoms.get(zero, 0.0)) * a0
    kk = np.array(keys, dtype=float).reshape(len(keys), measure.dim)
    structure = "lattice:" + repr(sorted(measure.atoms.items()))
    return TrigFieldRealization(kk, amp * ga, amp * gb, offset, structure=structure, law=LatticeLaw(measure))


def sample_spectral_process(measure: SpectralMeasure, n_terms: int, rng: np.random.Generator) -> SpectralProcess1D:
    """Spectral representation ``sum_j sqrt(2 S(w_j) dw) (a_j cos w_j x + b_j sin w_j x)``.

    Frequencies are midpoints of a uniform partition of the positive band.
    """
    if measure.kind != "band":
        raise ValueError("spectral sampling needs a band measure; use sample_trig_field for lattices")
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    dw = (measure.high - measure.low) / n_terms
    omega = measure.low + (np.arange(n_terms) + 0.5) * dw
    amp = np.sqrt(2.0 * measure.density(omega) * dw)
    a = rng.standard_normal(n_terms)
    b = rng.standard_normal(n_terms)
    return SpectralProcess1D(omega.reshape(-1, 1), amp * a, amp * b, 0.0)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def eval_jet(field, x, order: int = 2) -> Jet2:
    """Exact jet of ``field`` at ``x``; torus points are wrapped mod 2 pi."""
    x = np.asarray(x, dtype=float)
    if getattr(field, "periodic", False):
        x = np.mod(x, TWO_PI)
    return field.jet(x, order=order)


def min_eta_scan(field, resolution: int) -> float:
    """Smallest eta_f over a uniform torus grid with ``resolution`` nodes per axis."""
    if resolution < 8:
        raise ValueError("grid resolution must be >= 8 per axis")
    axes = [np.arange(resolution) * (TWO_PI / resolution)] * field.dim
    jet = field.grid_jet(axes, order=1)
    return float(np.sqrt(np.min(jet.eta_sq)))


def lln_limit(measure: SpectralMeasure) -> float:
    """Almost-sure limit of N[0, T] / T, i.e. sqrt(E[f'(0)^2]) / pi."""
    return math.sqrt(measure.second_moment(0)) / math.pi


def is_degenerate_measure(measure: SpectralMeasure) -> bool:
    return measure.second_moment(0) == 0.0


def iter_indices(n: int, d: int) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(1, n + 1), repeat=d)
