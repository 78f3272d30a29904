"""Run configuration: an INI file whose ``[section]`` / ``key`` pairs become
flat dotted keys (``quad.tol``, ``field.lambda`` ...).

Values are Python literals (numbers, lists, booleans, quoted or bare
strings).  Every key is validated against :data:`SCHEMA` before any work
starts; unknown keys and out-of-range values raise :class:`ConfigError`.
"""

from __future__ import annotations

import ast
import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit status 2)."""


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _pow2(v):
    return v >= 8 and (v & (v - 1)) == 0


def _list_of(kind, check=None):
    def ok(v):
        return isinstance(v, list) and len(v) > 0 and all(
            isinstance(x, kind) and not isinstance(x, bool) and (check is None or check(x)) for x in v)

    return ok


@dataclass(frozen=True)
class Key:
    kind: type | tuple
    default: Any
    check: Callable[[Any], bool] | None = None
    doc: str = ""


NUM = (int, float)

SCHEMA: dict[str, Key] = {
    # run
    "run.seed": Key(int, 20240601, _nonneg, "master seed"),
    "run.workers": Key(int, 1, _positive, "worker processes"),
    "run.out": Key(str, "out", None, "output directory"),
    # field model
    "field.kind": Key(str, "trig", lambda v: v in ("trig", "spectral", "lattice"), "trig | spectral | lattice"),
    "field.d": Key(int, 3, lambda v: 1 <= v <= 3, "dimension"),
    "field.n": Key(int, 3, _positive, "max frequency per axis"),
    "field.lambda": Key(list, [0.0, 0.3, 0.5, 0.6, 0.7, 1.0], _list_of(NUM, _nonneg), "offset weights"),
    "field.weights": Key(str, "normalized", lambda v: v in ("normalized", "unit"), "coefficient rule: 1/sqrt(n^d) or 1"),
    "field.basis": Key(str, "cosine_product", lambda v: v in ("cosine_product", "fourier"), "trig basis"),
    "field.N": Key(int, 1000, _positive, "spectral terms"),
    "field.band": Key(str, "uniform", lambda v: v == "uniform", "spectral band density (only uniform is supported)"),
    "field.omega": Key(NUM, 1.0, _positive, "band edge"),
    "field.mass": Key(NUM, 1.0, _positive, "total spectral mass"),
    "field.k": Key(int, 2, _positive, "atom frequency for kind = lattice"),
    # quadrature
    "quad.m_start": Key(int, 64, _pow2, "initial points per axis"),
    "quad.tol": Key(NUM, 1e-6, _positive, "refinement tolerance"),
    "quad.m_max": Key(int, 64, _pow2, "points-per-axis cap (also the atom-detection grid)"),
    "quad.local_refinement": Key(bool, True, None, "re-integrate under-resolved cells"),
    # formulas
    "kacrice.method": Key(str, "nonsingular", lambda v: v in ("sign", "compact", "nonsingular"), "volume formula"),
    "kacrice.counting_function": Key(str, "arctan", lambda v: v in ("sqrt", "arctan", "uniform_cdf"), "counting function for the validate sweeps: sqrt, arctan or uniform_cdf"),
    "kacrice.eta_threshold": Key(NUM, 1e-8, _positive, "degeneracy threshold on grid min eta"),
    "kacrice.boundary_exponent": Key(NUM, 1, lambda v: v in (1, 2), "box face exponent q"),
    # oracle
    "oracle.m": Key(int, 512, lambda v: v >= 64, "marching-squares resolution for the validate analytic case"),
    "oracle.eps_list": Key(list, [0.1, 0.05, 0.025], _list_of(NUM, _positive), "epsilon-band widths checked by validate"),
    # Monte Carlo
    "montecarlo.n_realizations": Key(int, 2000, _positive, "realizations per lambda"),
    "montecarlo.max_degenerate_rate": Key(NUM, 0.01, lambda v: 0 <= v < 1, "abort threshold"),
    # law of large numbers
    "lln.T": Key(NUM, 5000.0, _positive, "time horizon"),
    "lln.paths": Key(int, 1, _positive, "independent paths"),
    "lln.n_points": Key(int, 500, _positive, "rows of the ratio series"),
    # sharp operator
    "malliavin.eps_fd": Key(NUM, 1e-4, _positive, "finite-difference step"),
    "malliavin.n_pairs": Key(int, 50, _positive, "analytic-vs-FD pairs"),
    "malliavin.n_outer": Key(int, 50, _positive, "base realizations"),
    "malliavin.n_inner": Key(int, 20, _positive, "hats per base"),
    "malliavin.m": Key(int, 32, _pow2, "fixed grid for sharp evaluation"),
    # validation suite
    "validate.n_seeds": Key(int, 200, _positive, "1D formula-vs-bisection seeds"),
    "validate.n_cross": Key(int, 50, _positive, "counting-function cross-check seeds"),
    "validate.n_max": Key(int, 10, _positive, "max frequency of random 1D fields"),
    "validate.n_2d": Key(int, 10, _nonneg, "random T^2 fields checked against marching squares"),
    "validate.include_3d": Key(bool, True, None, "run the 3D analytic cases"),
}


@dataclass
class RunConfig:
    """Validated flat configuration plus the verbatim source text."""

    values: dict[str, Any]
    source_text: str = ""
    source_path: str | None = None
    explicit: set = field(default_factory=set)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def section(self, name: str) -> dict[str, Any]:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.values.items() if k.startswith(prefix)}

    def with_overrides(self, **flat) -> "RunConfig":
        values = dict(self.values)
        for k, v in flat.items():
            if v is not None:
                values[k] = v
        validate(values)
        return RunConfig(values, self.source_text, self.source_path, self.explicit | set(flat))


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    lowered = raw.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    try:
        value = ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw
    if isinstance(value, tuple):
        value = list(value)
    return value


def validate(values: dict[str, Any]) -> None:
    for key, value in values.items():
        spec = SCHEMA.get(key)
        if spec is None:
            raise ConfigError(f"unknown config key {key!r}")
        if spec.kind is list and isinstance(value, (int, float)) and not isinstance(value, bool):
            value = values[key] = [value]
        kinds = spec.kind if isinstance(spec.kind, tuple) else (spec.kind,)
        if spec.kind is float or spec.kind == NUM:
            kinds = (int, float)
        if isinstance(value, bool) and bool not in kinds:
            raise ConfigError(f"{key}: expected {spec.kind}, got a boolean")
        if not isinstance(value, kinds):
            raise ConfigError(f"{key}: expected {getattr(spec.kind, '__name__', spec.kind)}, got {value!r}")
        if spec.check is not None and not spec.check(value):
            raise ConfigError(f"{key}: invalid value {value!r} ({spec.doc})")
    if values.get("quad.m_max", 1 << 30) < values.get("quad.m_start", 0):
        raise ConfigError("quad.m_max must be >= quad.m_start")


def parse_config_text(text: str, source_path: str | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep key case (field.N, lln.T)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    values = {k: spec.default for k, spec in SCHEMA.items()}
    explicit = set()
    for section in parser.sections():
        for key, raw in parser.items(section):
            flat = f"{section}.{key}"
            if flat not in SCHEMA:
                raise ConfigError(f"unknown config key {flat!r}")
            values[flat] = _parse_value(raw)
            explicit.add(flat)
    validate(values)
    return RunConfig(values, text, source_path, explicit)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def documented_keys() -> str:
    """One line per key: name, default and description (used by the README)."""
    return "\n".join(f"{k} = {v.default!r}  ; {v.doc}" for k, v in SCHEMA.items())
