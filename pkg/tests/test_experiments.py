import csv
import json
import math
import textwrap

import numpy as np
import pytest

from nodalkac.experiments import runs
from nodalkac.experiments.cli import main
from nodalkac.experiments.config import ConfigError, SCHEMA, documented_keys, load_config, parse_config_text
from nodalkac.experiments.svg import Chart

SMALL_HISTOGRAM = """
[field]
d = 3
n = 2
lambda = [0.0, 1.0]

[quad]
m_start = 16
m_max = 16

[montecarlo]
n_realizations = 24
"""


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- configuration


def test_defaults_and_explicit_values():
    cfg = parse_config_text("[quad]\ntol = 1e-7\n[field]\nlambda = 0.5  ; single value\n")
    assert cfg["quad.tol"] == 1e-7 and cfg["field.lambda"] == [0.5]
    assert cfg["run.seed"] == SCHEMA["run.seed"].default
    assert cfg.explicit == {"quad.tol", "field.lambda"}
    assert cfg.section("quad")["tol"] == 1e-7


def test_key_case_is_preserved():
    cfg = parse_config_text("[lln]\nT = 100\n[field]\nN = 50\n")
    assert cfg["lln.T"] == 100 and cfg["field.N"] == 50


@pytest.mark.parametrize("text", [
    "[quad]\nspeed = 3\n",                  # unknown key
    "[quad]\nm_start = 48\n",               # not a power of two
    "[quad]\nm_start = 128\nm_max = 64\n",  # cap below start
    "[field]\nlambda = [0.5, -1]\n",        # negative offset weight
    "[kacrice]\nmethod = trapezoid\n",
    "[run]\nworkers = true\n",              # booleans are not integers
    "not an ini file",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_overrides_are_validated():
    cfg = parse_config_text("")
    assert cfg.with_overrides(**{"run.seed": 5, "run.out": None})["run.seed"] == 5
    with pytest.raises(ConfigError):
        cfg.with_overrides(**{"run.workers": 0})


def test_every_key_is_documented():
    lines = documented_keys().splitlines()
    assert len(lines) == len(SCHEMA) and all(";" in line for line in lines)


def test_shipped_configs_parse():
    for name in ("histogram", "lln", "validate", "sharp"):
        load_config(f"configs/{name}.ini")


# ---------------------------------------------------------------- CLI


def test_cli_config_errors_exit_2(tmp_path, capsys):
    bad = write_config(tmp_path, "[quad]\nspeed = 3\n")
    assert main(["histogram", "--config", str(bad)]) == 2
    assert "unknown config key" in capsys.readouterr().err
    assert main(["lln", "--config", str(tmp_path / "missing.ini")]) == 2
    good = write_config(tmp_path, SMALL_HISTOGRAM, "good.ini")
    assert main(["histogram", "--config", str(good), "--workers", "0"]) == 2
    # a valid file with a model the command cannot run
    assert main(["histogram", "--config", str(write_config(tmp_path, "[field]\nkind = spectral\n", "k.ini"))]) == 2


def test_cli_unknown_command():
    with pytest.raises(SystemExit):
        main(["plot", "--config", "x.ini"])


def test_cli_aborted_run_exits_1(tmp_path, capsys):
    # every draw fails the degeneracy threshold, so no realization survives
    cfg = write_config(tmp_path, SMALL_HISTOGRAM + "[kacrice]\neta_threshold = 100.0\n")
    assert main(["histogram", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "run aborted" in capsys.readouterr().err


# ---------------------------------------------------------------- histogram


def test_has_constant_sign():
    assert runs.has_constant_sign(np.array([0.1, 2.0]))
    assert runs.has_constant_sign(np.array([-0.1, -2.0]))
    assert not runs.has_constant_sign(np.array([-0.1, 2.0]))
    assert not runs.has_constant_sign(np.array([0.0, 2.0]))  # a node on the nodal set


def test_histogram_bins_cover_nonatomic_volumes():
    vols = np.linspace(1.0, 9.0, 50)
    edges, counts = runs.histogram_bins(vols)
    assert counts.sum() == 50 and edges[0] == 1.0 and edges[-1] == 9.0
    edges, counts = runs.histogram_bins(np.array([]))
    assert edges.size == 0 and counts.size == 0


def test_histogram_run_outputs(tmp_path):
    path = write_config(tmp_path, SMALL_HISTOGRAM)
    cfg = load_config(path).with_overrides(**{"run.out": str(tmp_path / "out")})
    reports = runs.run_histogram(cfg)
    out = tmp_path / "out"
    assert [r.lam for r in reports] == [0.0, 1.0]
    zero = reports[0]
    assert zero.atom_count == 0 and zero.atom_mass == 0.0  # a zero-mean field changes sign
    for r in reports:
        assert sum(r.counts) + r.atom_count == r.n == 24
    assert read_csv(out / "histogram.csv")[0] == ["lambda", "bin_lo", "bin_hi", "count"]
    atoms = read_csv(out / "atoms.csv")
    assert atoms[0] == ["lambda", "atom_mass", "n"]
    assert (out / "config.ini").read_text() == path.read_text()
    summary = json.loads((out / "summary.json").read_text())
    assert [p["atom_count"] for p in summary["per_lambda"]] == [r.atom_count for r in reports]
    # the SVG annotation carries the CSV number verbatim
    for k, r in enumerate(reports):
        svg = (out / f"histogram_{k}_lambda_{r.lam:g}.svg").read_text()
        assert svg.startswith("<svg") and f"atom mass = {atoms[k + 1][1]}" in svg


def test_histogram_deterministic_across_workers(tmp_path):
    path = write_config(tmp_path, SMALL_HISTOGRAM)
    for w in (1, 2):
        assert main(["histogram", "--config", str(path), "--workers", str(w), "--out", str(tmp_path / f"w{w}")]) == 0
    for name in ("histogram.csv", "atoms.csv", "volumes.csv"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w2" / name).read_bytes()


def test_histogram_seed_changes_output(tmp_path):
    path = write_config(tmp_path, SMALL_HISTOGRAM)
    for seed in (1, 2):
        main(["histogram", "--config", str(path), "--seed", str(seed), "--out", str(tmp_path / f"s{seed}")])
    assert (tmp_path / "s1" / "volumes.csv").read_bytes() != (tmp_path / "s2" / "volumes.csv").read_bytes()


# ---------------------------------------------------------------- law of large numbers


def test_lln_single_atom_spectrum(tmp_path):
    cfg = parse_config_text(f"[field]\nkind = lattice\nk = 2\n[lln]\nT = 2000\nn_points = 50\n"
                            f"[run]\nout = '{tmp_path}'\n")
    rep = runs.run_lln(cfg)
    assert rep.limit == pytest.approx(2 / math.pi, rel=1e-12)
    assert rep.ratios[-1] == pytest.approx(2 / math.pi, rel=5e-3)
    rows = read_csv(tmp_path / "lln.csv")
    assert rows[0] == ["t", "zero_count", "ratio"] and len(rows) == 51
    assert f"limit = {rep.limit!r}" in (tmp_path / "lln.svg").read_text()


def test_lln_defaults_to_the_sinc_process(tmp_path):
    cfg = parse_config_text(f"[field]\nN = 200\n[lln]\nT = 300\nn_points = 10\n[run]\nout = '{tmp_path}'\n")
    rep = runs.run_lln(cfg)
    assert rep.limit == pytest.approx(1 / (math.pi * math.sqrt(3)), rel=1e-12)
    assert np.all(np.diff(rep.zero_counts) >= 0)


def test_lln_path_average(tmp_path):
    cfg = parse_config_text(f"[lln]\nT = 1000\npaths = 20\nn_points = 20\n[run]\nout = '{tmp_path}'\n")
    rep = runs.run_lln(cfg)
    assert abs(np.mean(rep.final_ratios) - rep.limit) < 5e-3


# ---------------------------------------------------------------- validate and sharp-check


def test_validate_small_run(tmp_path, capsys):
    cfg = write_config(tmp_path, """
        [validate]
        n_seeds = 5
        n_cross = 3
        n_2d = 1
        include_3d = false
    """)
    assert main(["validate", "--config", str(cfg), "--out", str(tmp_path / "v")]) == 0
    rows = read_csv(tmp_path / "v" / "validate.csv")
    assert rows[0] == ["case_id", "expected", "got", "tol", "pass"]
    assert all(r[4] == "true" for r in rows[1:])
    assert "cases passed" in capsys.readouterr().out


def test_sharp_check_small_run(tmp_path):
    cfg = write_config(tmp_path, """
        [field]
        lambda = [0.5]
        [malliavin]
        n_pairs = 3
        n_outer = 2
        n_inner = 2
    """)
    rc = main(["sharp-check", "--config", str(cfg), "--out", str(tmp_path / "s")])
    summary = json.loads((tmp_path / "s" / "summary.json").read_text())
    assert rc == (0 if summary["passed"] else 1)
    assert summary["max_self_direction"] < 1e-8 and summary["min_inner_mean"] > 0
    rows = read_csv(tmp_path / "s" / "sharp_pairs.csv")
    assert rows[0] == ["pair", "fd_rel_error", "self_direction_rel", "sharp_value", "kink_margin"]
    assert len(rows) == 4


def test_csv_floats_round_trip(tmp_path):
    x = 0.1 + 0.2
    runs.write_csv(tmp_path / "t.csv", ["a", "b"], [(x, True)])
    assert read_csv(tmp_path / "t.csv")[1] == [repr(x), "true"]
    assert float(read_csv(tmp_path / "t.csv")[1][0]) == x


def test_chart_renders_parts():
    chart = Chart("t", "x", "y", (0.0, 1.0), (0.0, 1.0))
    chart.bars([0.0, 0.5], [0.5, 1.0], [0.2, 0.4])
    chart.polyline([0.0, 1.0], [0.0, 1.0])
    chart.hline(0.5, "half")
    svg = chart.render()
    assert svg.count("<rect") >= 2 and "half" in svg and svg.rstrip().endswith("</svg>")
