"""Experiment drivers behind the ``nodal-kac`` subcommands.

Every driver takes a validated :class:`RunConfig`, writes its artifacts into
``run.out`` and returns a small report object.  Randomness comes only from
``child_rng(run.seed, ...)`` keyed by the realization index, and results are
gathered in index order, so the CSV files do not depend on ``run.workers``.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .. import kacrice, malliavin, oracle
from ..field_models import (
    TWO_PI,
    DegenerateRealization,
    PolynomialField,
    SpectralMeasure,
    TrigLaw,
    child_rng,
    cosine_product_field,
    fourier_field,
    lln_limit,
    normalized_weight,
    sample_lattice_field,
    sample_spectral_process,
    sample_trig_field,
)
from ..quadrature import GridSpec, QuadSettings
from .config import ConfigError, RunConfig
from .svg import Chart


class RunAborted(RuntimeError):
    """A run stopped early (for instance the degenerate-resample rate was exceeded)."""


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _unit_weight(k, n, d):
    return 1.0


WEIGHT_RULES = {"normalized": normalized_weight, "unit": _unit_weight}


def trig_law(values: dict, lam: float) -> TrigLaw:
    return TrigLaw(values["field.d"], values["field.n"], float(lam), WEIGHT_RULES[values["field.weights"]],
                   values["field.basis"])


def quad_settings(values: dict) -> QuadSettings:
    return QuadSettings(values["quad.m_start"], values["quad.tol"], values["quad.m_max"])


def parallel_map(fn: Callable, tasks: Sequence, workers: int) -> list:
    """``[fn(t) for t in tasks]``, optionally spread over processes; order is preserved."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _fmt(x: Any) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _prepare_out(cfg: RunConfig, command: str) -> Path:
    out = Path(cfg["run.out"])
    out.mkdir(parents=True, exist_ok=True)
    # the exact text the run was configured with, plus the effective flat values
    (out / "config.ini").write_text(cfg.source_text)
    (out / "effective_config.json").write_text(
        json.dumps({"command": command, **cfg.values}, indent=2, sort_keys=True) + "\n")
    return out


def _write_summary(out: Path, summary: dict) -> None:
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")


# ---------------------------------------------------------------------------
# Histogram of the nodal volume
# ---------------------------------------------------------------------------


@dataclass
class HistogramReport:
    lam: float
    bin_edges: list[float]
    counts: list[int]
    atom_count: int
    n: int
    resampled: int
    volumes: list[float] = field(repr=False, default_factory=list)

    @property
    def atom_mass(self) -> float:
        return self.atom_count / self.n


def has_constant_sign(values: np.ndarray) -> bool:
    """Atom rule: the field keeps one strict sign on every grid node."""
    return bool(values.min() > 0.0 or values.max() < 0.0)


MAX_ATTEMPTS = 50


def _histogram_task(task) -> tuple[float, bool, int]:
    values, lam_index, lam, i = task
    law = trig_law(values, lam)
    quad = quad_settings(values)
    d = values["field.d"]
    atom_axes = GridSpec.torus(values["quad.m_max"], d).axes
    for attempt in range(MAX_ATTEMPTS):
        f = law.sample(child_rng(values["run.seed"], lam_index, i, attempt))
        if has_constant_sign(f.grid_values(atom_axes)):
            return 0.0, True, attempt
        try:
            est = kacrice.nodal_volume_torus(f, values["kacrice.method"], quad, values["kacrice.eta_threshold"],
                                             local_refinement=values["quad.local_refinement"] and d == 2)
        except DegenerateRealization:
            continue
        return float(est.value), False, attempt
    raise RunAborted(f"realization {i} at lambda={lam}: no non-degenerate draw in {MAX_ATTEMPTS} attempts")


def histogram_bins(volumes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Freedman-Diaconis bins over the non-atomic volumes."""
    if volumes.size == 0:
        return np.array([]), np.array([], dtype=int)
    edges = np.histogram_bin_edges(volumes, bins="fd")
    counts, edges = np.histogram(volumes, bins=edges)
    return edges, counts


def _histogram_svg(rep: HistogramReport, n: int) -> str:
    edges = np.asarray(rep.bin_edges)
    frac = np.asarray(rep.counts) / n
    top = max([rep.atom_mass, *frac.tolist(), 1e-3]) * 1.1
    lo = min(0.0, float(edges[0])) if edges.size else 0.0
    hi = float(edges[-1]) if edges.size else 1.0
    chart = Chart(f"Nodal volume, lambda = {rep.lam:g} (n = {n})", "nodal volume", "fraction of realizations",
                  (lo, hi), (0.0, top))
    if edges.size:
        chart.bars(edges[:-1], edges[1:], frac)
    chart.vline(0.0, rep.atom_mass, f"atom mass = {rep.atom_mass!r}")
    return chart.render()


def run_histogram(cfg: RunConfig) -> list[HistogramReport]:
    values = cfg.values
    if values["field.kind"] != "trig":
        raise ConfigError("histogram needs field.kind = trig")
    out = _prepare_out(cfg, "histogram")
    n = values["montecarlo.n_realizations"]
    t0 = time.time()
    reports = []
    for lam_index, lam in enumerate(values["field.lambda"]):
        tasks = [(values, lam_index, float(lam), i) for i in range(n)]
        results = parallel_map(_histogram_task, tasks, values["run.workers"])
        vols = np.array([v for v, atom, _ in results if not atom])
        atom_count = sum(1 for _, atom, _ in results if atom)
        resampled = sum(r for _, _, r in results)
        if resampled > values["montecarlo.max_degenerate_rate"] * n:
            raise RunAborted(f"lambda={lam}: {resampled} degenerate resamples out of {n} realizations "
                             f"exceeds the allowed rate {values['montecarlo.max_degenerate_rate']}")
        edges, counts = histogram_bins(vols)
        reports.append(HistogramReport(float(lam), edges.tolist(), counts.tolist(), atom_count, n, resampled,
                                       [v for v, _, _ in results]))
    write_csv(out / "histogram.csv", ["lambda", "bin_lo", "bin_hi", "count"],
              [(r.lam, lo, hi, c) for r in reports for lo, hi, c in zip(r.bin_edges, r.bin_edges[1:], r.counts)])
    write_csv(out / "atoms.csv", ["lambda", "atom_mass", "n"], [(r.lam, r.atom_mass, r.n) for r in reports])
    write_csv(out / "volumes.csv", ["lambda", "index", "volume"],
              [(r.lam, i, v) for r in reports for i, v in enumerate(r.volumes)])
    for k, r in enumerate(reports):
        (out / f"histogram_{k}_lambda_{r.lam:g}.svg").write_text(_histogram_svg(r, n))
    _write_summary(out, {
        "command": "histogram",
        "runtime_s": round(time.time() - t0, 3),
        "per_lambda": [{"lambda": r.lam, "atom_mass": r.atom_mass, "atom_count": r.atom_count, "n": r.n,
                        "bins": len(r.counts), "degenerate_resamples": r.resampled} for r in reports],
    })
    return reports


# ---------------------------------------------------------------------------
# Law of large numbers for 1D zero counts
# ---------------------------------------------------------------------------


@dataclass
class LLNReport:
    times: list[float]
    zero_counts: list[float]
    ratios: list[float]
    limit: float
    final_ratios: list[float]


def lln_measure(values: dict) -> SpectralMeasure:
    kind = values["field.kind"]
    if kind == "spectral":
        return SpectralMeasure.uniform(values["field.omega"], values["field.mass"])
    if kind == "lattice":
        return SpectralMeasure.atom_pair(values["field.k"], values["field.mass"], d=1)
    raise ConfigError("lln needs field.kind = spectral or lattice")


def _lln_task(task) -> np.ndarray:
    values, path, times = task
    measure = lln_measure(values)
    rng = child_rng(values["run.seed"], path)
    if measure.kind == "band":
        f = sample_spectral_process(measure, values["field.N"], rng)
    else:
        f = sample_lattice_field(measure, rng)
    roots = oracle.find_zeros_1d(f, (0.0, float(values["lln.T"])), eta_threshold=None)
    return np.searchsorted(np.sort(roots), times, side="right").astype(float)


def run_lln(cfg: RunConfig) -> LLNReport:
    values = dict(cfg.values)
    if "field.kind" not in cfg.explicit:
        values["field.kind"] = "spectral"  # the trig default belongs to the histogram
    measure = lln_measure(values)
    out = _prepare_out(cfg, "lln")
    t0 = time.time()
    T = float(values["lln.T"])
    times = T * np.arange(1, values["lln.n_points"] + 1) / values["lln.n_points"]
    tasks = [(values, p, times) for p in range(values["lln.paths"])]
    counts = np.array(parallel_map(_lln_task, tasks, values["run.workers"]))
    mean_counts = counts.mean(axis=0)
    ratios = mean_counts / times
    limit = lln_limit(measure)
    write_csv(out / "lln.csv", ["t", "zero_count", "ratio"], zip(times.tolist(), mean_counts.tolist(),
                                                                ratios.tolist()))
    chart = Chart(f"N[0,t]/t ({values['lln.paths']} path(s))", "t", "zeros per unit time",
                  (0.0, T), (0.0, max(float(ratios.max()), limit) * 1.2))
    chart.polyline(times, ratios)
    chart.hline(limit, f"limit = {limit!r}")
    (out / "lln.svg").write_text(chart.render())
    final = (counts[:, -1] / T).tolist()
    _write_summary(out, {"command": "lln", "runtime_s": round(time.time() - t0, 3), "limit": limit,
                         "final_ratio": float(ratios[-1]), "final_ratio_per_path": final,
                         "abs_error": abs(float(ratios[-1]) - limit)})
    return LLNReport(times.tolist(), mean_counts.tolist(), ratios.tolist(), limit, final)


# ---------------------------------------------------------------------------
# Validation matrix
# ---------------------------------------------------------------------------


@dataclass
class Case:
    case_id: str
    expected: float
    got: float
    tol: float
    passed: bool


def _check(case_id: str, expected: float, got: float, tol: float, relative: bool = False) -> Case:
    err = abs(got - expected) / (abs(expected) if relative else 1.0)
    return Case(case_id, float(expected), float(got), tol, bool(err <= tol))


def random_1d_field(seed: int, s: int, n_max: int):
    """Stationary random trig polynomial of degree 1..n_max on T^1."""
    return sample_trig_field(1, 1 + s % n_max, 0.5, child_rng(seed, 1, s), basis="fourier")


def validation_cases(values: dict) -> Iterable[Case]:
    seed = values["run.seed"]
    one_d = None  # default refinement (tol 1e-6)
    # analytic 1D counts
    for tag in kacrice.CountingFunction.TAGS:
        for k in range(1, 11):
            f = cosine_product_field({(k,): 1.0})
            yield _check(f"cos_{k}x:{tag}", 2 * k, kacrice.count_zeros_periodic_1d(f, tag, one_d).value, 1e-6)
    yield _check("sin_x", 2, kacrice.count_zeros_periodic_1d(fourier_field({}, {(1,): 1.0}), "arctan", one_d).value,
                 1e-6)
    line = PolynomialField([0.0, 1.0])
    yield _check("x_on_[-1,1]", 1, kacrice.count_zeros_interval_1d(line, -1.0, 1.0, "arctan", one_d).value, 1e-6)
    square = PolynomialField([0.0, 0.0, 1.0])
    yield _check("x^2_on_[-1,1]", 1, kacrice.count_zeros_interval_1d(square, -1.0, 1.0, "arctan", one_d).value,
                 1e-6)

    # formula vs bisection, periodic and interval
    n_seeds, n_max = values["validate.n_seeds"], values["validate.n_max"]
    tag = values["kacrice.counting_function"]
    periodic_ok = interval_ok = interval_n = bounds_ok = 0
    for s in range(n_seeds):
        f = random_1d_field(seed, s, n_max)
        truth = oracle.count_zeros_bruteforce_1d(f, eta_threshold=None)
        periodic_ok += round(kacrice.count_zeros_periodic_1d(f, tag, one_d).value) == truth
        a, b = 0.5, 5.5
        if abs(f(a) * f(b)) > kacrice.BOUNDARY_ZERO_TOL:
            interval_n += 1
            got = kacrice.count_zeros_interval_1d(f, a, b, tag, one_d).value
            interval_ok += round(got) == oracle.count_zeros_bruteforce_1d(f, (a, b), eta_threshold=None)
        bounds = kacrice.zero_count_bounds(f, one_d)
        bounds_ok += truth <= bounds.arctan + 1e-9 and truth <= bounds.indicator + 1e-9
    yield _check("sweep_periodic_vs_bisection", n_seeds, periodic_ok, 0)
    yield _check("sweep_interval_vs_bisection", interval_n, interval_ok, 0)
    yield _check("bounds_dominate_bisection", n_seeds, bounds_ok, 0)

    # counting functions agree with each other
    worst = 0.0
    for s in range(values["validate.n_cross"]):
        f = random_1d_field(seed + 1, s, n_max)
        vals = [kacrice.count_zeros_periodic_1d(f, t, one_d).value for t in kacrice.CountingFunction.TAGS]
        worst = max(worst, max(vals) - min(vals))
    yield _check("counting_function_cross_check", 0.0, worst, CROSS_CHECK_TOL)

    # oracles on analytic cases: the eps-band estimator is exact for sin while eps < 1
    sin = fourier_field({}, {(1,): 1.0})
    for eps in values["oracle.eps_list"]:
        yield _check(f"eps_band_sin:{eps:g}", 2, oracle.kacrice_eps(sin, eps, 1 << 16).value, 1e-2, relative=True)
    plane = cosine_product_field({(1, 0): 1.0})
    yield _check("cos_x_T2:marching_squares", 4 * math.pi, oracle.nodal_measure_at(plane, values["oracle.m"]), 2e-3,
                 relative=True)

    # torus volumes
    for method in kacrice.METHODS:
        got = kacrice.nodal_volume_torus(plane, method, QuadSettings(64, 1e-8, 1024)).value
        yield _check(f"cos_x_T2:{method}", 4 * math.pi, got, 1e-3, relative=True)
    yield from random_2d_cases(values)
    if values["validate.include_3d"]:
        plane3 = cosine_product_field({(1, 0, 0): 1.0})
        for method in kacrice.METHODS:
            got = kacrice.nodal_volume_torus(plane3, method, QuadSettings(32, 1e-8, 128)).value
            yield _check(f"cos_x_T3:{method}", 8 * math.pi**2, got, 1e-2, relative=True)
        yield _check("cos_x_T3:marching_cubes", 8 * math.pi**2, oracle.nodal_measure_at(plane3, 96), 1e-2,
                     relative=True)

    # box formula
    box = kacrice.nodal_volume_box(cosine_product_field({(1, 0): 1.0}), [0.3, 0.0], [TWO_PI - 0.3, 1.0],
                                   QuadSettings(64, 1e-7, 1024), values["kacrice.boundary_exponent"])
    yield _check("box_cos_x", 2.0, box.value, 5e-3, relative=True)


# fixed T^2 grids per method: the compact integrand carries third derivatives
# and converges more slowly (about 0.5% off at 512, 0.15% at 1024)
TWO_D_GRID = {"sign": 512, "compact": 1024, "nonsingular": 512}
TWO_D_ORACLE_GRID = 2048
CROSS_CHECK_TOL = 1e-5  # ten times the refinement tolerance of each count


def random_2d_cases(values: dict) -> Iterable[Case]:
    """Random stationary T^2 fields: formula vs marching squares, and the three formulas vs each other."""
    n = values["validate.n_2d"]
    if n == 0:
        return
    worst_oracle = worst_mutual = 0.0
    for s in range(n):
        f = sample_trig_field(2, 3, 0.0, child_rng(values["run.seed"], 2, s), basis="fourier")
        ref = oracle.nodal_measure_at(f, TWO_D_ORACLE_GRID)
        est = {me: kacrice.nodal_volume_torus(f, me, QuadSettings.fixed(TWO_D_GRID[me])).value
               for me in kacrice.METHODS}
        worst_oracle = max(worst_oracle, abs(est["nonsingular"] / ref - 1))
        worst_mutual = max(worst_mutual, (max(est.values()) - min(est.values())) / ref)
    yield _check("random_T2_vs_marching_squares", 0.0, worst_oracle, 2e-2)
    yield _check("random_T2_mutual_agreement", 0.0, worst_mutual, 5e-3)


def run_validate(cfg: RunConfig) -> list[Case]:
    out = _prepare_out(cfg, "validate")
    t0 = time.time()
    cases = list(validation_cases(cfg.values))
    write_csv(out / "validate.csv", ["case_id", "expected", "got", "tol", "pass"],
              [(c.case_id, c.expected, c.got, c.tol, c.passed) for c in cases])
    lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.case_id:<34} expected={c.expected:.10g} got={c.got:.10g} "
             f"tol={c.tol:g}" for c in cases]
    (out / "validate.txt").write_text("\n".join(lines) + "\n")
    _write_summary(out, {"command": "validate", "runtime_s": round(time.time() - t0, 3),
                         "passed": sum(c.passed for c in cases), "failed": sum(not c.passed for c in cases),
                         "cases": [asdict(c) for c in cases]})
    return cases


# ---------------------------------------------------------------------------
# Sharp-operator checks
# ---------------------------------------------------------------------------


@dataclass
class SharpReport:
    fd_errors: list[float]
    self_direction: list[float]
    phase_direction: float
    linearity_error: float
    inner_means: list[float]
    kink_margins: list[float] = field(default_factory=list)
    eps_fd: float = 1e-4
    note: str = malliavin.THEORY_NOTE

    @property
    def kinked_pairs(self) -> int:
        return sum(k < self.eps_fd for k in self.kink_margins)

    @property
    def passed(self) -> bool:
        return (max(self.fd_errors, default=0.0) < 1e-3 and max(self.self_direction, default=0.0) < 1e-8
                and self.phase_direction < 1e-6 and self.linearity_error < 1e-10
                and min(self.inner_means, default=1.0) > 0.0)


def _sharp_task(task) -> tuple[float, float, float, float]:
    values, i = task
    law = trig_law(values, values["field.lambda"][0])
    quad = QuadSettings.fixed(values["malliavin.m"])
    for attempt in range(MAX_ATTEMPTS):
        base = law.sample(child_rng(values["run.seed"], 7, i, attempt))
        hat = law.sample(child_rng(values["run.seed"], 7, i, attempt, 1))
        pair = malliavin.PairedField(base, hat)
        try:
            analytic = malliavin.sharp_nodal_volume(pair, quad)
            fd = malliavin.sharp_nodal_volume_fd(pair, values["malliavin.eps_fd"], quad)
            vol = kacrice.nodal_volume_torus(base, "nonsingular", quad, local_refinement=False).value
            own = malliavin.sharp_nodal_volume(malliavin.PairedField(base, base), quad)
        except DegenerateRealization:
            continue
        return abs(analytic - fd) / max(abs(fd), 1e-300), abs(own) / abs(vol), analytic, kink_margin(pair, quad)
    raise RunAborted(f"pair {i}: no non-degenerate draw")


def kink_margin(pair: malliavin.PairedField, quad: QuadSettings) -> float:
    """Smallest ``|f / hat|`` over grid nodes.

    A central difference with step ``eps`` above this margin moves some node
    across ``f = 0``, where the integrand has an ``|f|`` kink, so it no
    longer estimates the derivative at ``eps = 0``.
    """
    axes = GridSpec.torus(quad.m_start, pair.dim).axes
    with np.errstate(divide="ignore"):
        return float(np.min(np.abs(pair.base.grid_values(axes) / pair.hat.grid_values(axes))))


def phase_direction_value(m: int, d: int = 3) -> float:
    """|sharp| / Vol for ``cos x`` moved along ``sin x``: a pure phase rotation keeps the volume fixed."""
    key = (1,) + (0,) * (d - 1)
    base = fourier_field({key: 1.0}, {key: 0.0})
    hat = fourier_field({key: 0.0}, {key: 1.0})
    quad = QuadSettings.fixed(m)
    vol = kacrice.nodal_volume_torus(base, "nonsingular", quad, local_refinement=False).value
    return abs(malliavin.sharp_nodal_volume(malliavin.PairedField(base, hat), quad)) / vol


def linearity_error(values: dict) -> float:
    law = trig_law(values, values["field.lambda"][0])
    quad = QuadSettings.fixed(values["malliavin.m"])
    base, h1, h2 = (law.sample(child_rng(values["run.seed"], 8, j)) for j in range(3))
    a, b = 0.7, -1.3
    combo = h1.linear_combination(a, h2, b)
    s = [malliavin.sharp_nodal_volume(malliavin.PairedField(base, h), quad) for h in (h1, h2, combo)]
    return abs(s[2] - (a * s[0] + b * s[1])) / max(abs(s[0]) + abs(s[1]), 1e-300)


def run_sharp_check(cfg: RunConfig) -> SharpReport:
    values = cfg.values
    if values["field.kind"] != "trig":
        raise ConfigError("sharp-check needs field.kind = trig")
    out = _prepare_out(cfg, "sharp-check")
    t0 = time.time()
    rows = parallel_map(_sharp_task, [(values, i) for i in range(values["malliavin.n_pairs"])],
                        values["run.workers"])
    stat = malliavin.nondegeneracy_statistic(trig_law(values, 0.0), values["malliavin.n_outer"],
                                             values["malliavin.n_inner"], values["run.seed"],
                                             QuadSettings.fixed(values["malliavin.m"]))
    rep = SharpReport([r[0] for r in rows], [r[1] for r in rows], phase_direction_value(values["malliavin.m"],
                                                                                        values["field.d"]),
                      linearity_error(values), stat.inner_means.tolist(), [r[3] for r in rows],
                      values["malliavin.eps_fd"])
    write_csv(out / "sharp_pairs.csv", ["pair", "fd_rel_error", "self_direction_rel", "sharp_value", "kink_margin"],
              [(i, *r) for i, r in enumerate(rows)])
    write_csv(out / "nondegeneracy.csv", ["base", "inner_mean", "volume"],
              zip(range(len(stat.inner_means)), stat.inner_means.tolist(), stat.volumes.tolist()))
    _write_summary(out, {"command": "sharp-check", "runtime_s": round(time.time() - t0, 3),
                         "max_fd_rel_error": max(rep.fd_errors),
                         "pairs_with_kink_inside_fd_step": rep.kinked_pairs,
                         "max_self_direction": max(rep.self_direction),
                         "phase_direction": rep.phase_direction, "linearity_error": rep.linearity_error,
                         "min_inner_mean": min(rep.inner_means), "overall_mean": stat.overall_mean,
                         "degenerate_resamples": stat.resampled, "passed": rep.passed, "note": rep.note})
    return rep
