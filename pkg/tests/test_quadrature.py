import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodalkac.field_models import TWO_PI, child_rng, sample_trig_field
from nodalkac.quadrature import (
    MAX_BLOCK_NODES,
    GridSpec,
    QuadSettings,
    default_m_max,
    grid_integral,
    grid_sum,
    integrate_box,
    integrate_periodic,
    sublattices,
)


def ones(grid):
    return np.ones(grid.shape)


def test_constant_on_torus():
    for m in (4, 16, 64):
        res = integrate_periodic(ones, 2, m_start=m, tol=1e-12, m_max=2 * m)
        assert res.value == pytest.approx(TWO_PI**2, rel=1e-14)


def test_cos_squared_exact_for_small_m():
    for m in (4, 8, 32):
        res = integrate_periodic(lambda g: np.cos(g.axes[0]) ** 2, 1, m_start=m, tol=1.0, m_max=m)
        assert abs(res.value - math.pi) < 1e-12


def test_abs_sin():
    res = integrate_periodic(lambda g: np.abs(np.sin(g.axes[0])), 1, m_start=4096, tol=math.inf, m_max=4096)
    assert abs(res.value - 4.0) < 1e-4


def test_box_examples():
    assert abs(integrate_box(lambda g: g.axes[0], [0.0], [1.0], 8, 1e-12).value - 0.5) < 1e-12
    xy = integrate_box(lambda g: np.multiply.outer(g.axes[0], g.axes[1]), [0, 0], [1, 1], 8, 1e-12)
    assert abs(xy.value - 0.25) < 1e-10
    res = integrate_box(lambda g: 1 / (1 + g.axes[0] ** 2), [-1.0], [2.0], 16, 1e-10, 1 << 16)
    assert abs(res.value - (math.atan(2) + math.atan(1))) < 1e-8


def test_tolerance_not_reached_status():
    res = integrate_periodic(lambda g: np.abs(np.sin(g.axes[0])), 1, m_start=8, tol=1e-14, m_max=64)
    assert not res.converged and res.status == "tolerance not reached"
    assert res.value == res.history[-1] and res.error_estimate >= 0


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(12, 2)
    with pytest.raises(ValueError):
        GridSpec.box(8, [0.0, 1.0], [1.0, 1.0])


def test_default_caps():
    assert default_m_max(2) == 2**11 and default_m_max(3) == 2**8
    assert QuadSettings().cap(3) == 2**8 and QuadSettings(m_max=64).cap(3) == 64


def test_sublattices_reproduce_the_full_sum():
    f = sample_trig_field(3, 3, 0.0, child_rng(2))

    def g(grid):
        return np.abs(f.grid_values(grid.axes))

    grid = GridSpec(256, 3)
    blocks = sublattices(grid)
    assert len(blocks) == 8 and all(b.m**3 <= MAX_BLOCK_NODES for b in blocks)
    nodes = np.sort(np.concatenate([b.axes[0] for b in blocks[::4]]))
    np.testing.assert_allclose(nodes, grid.axes[0], atol=1e-14)
    small = GridSpec(128, 3)
    assert grid_integral(g, small) == pytest.approx(grid_sum(g(small), small), rel=1e-14)
    # the blocked 256^3 sum equals the mean of the per-block sums by construction
    assert grid_integral(g, grid) == pytest.approx(np.mean([grid_sum(g(b), b) for b in blocks]), rel=1e-14)


@settings(max_examples=30)
@given(seed=st.integers(0, 10**6), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linearity(seed, a, b):
    u = sample_trig_field(2, 3, 0.3, child_rng(seed, 0), basis="fourier")
    v = sample_trig_field(2, 3, 0.3, child_rng(seed, 1), basis="fourier")

    def iu(g):
        return np.abs(u.grid_values(g.axes))

    def iv(g):
        return np.tanh(v.grid_values(g.axes))

    def comb(g):
        return a * iu(g) + b * iv(g)

    q = dict(m_start=64, tol=math.inf, m_max=64)
    lhs = integrate_periodic(comb, 2, **q).value
    rhs = a * integrate_periodic(iu, 2, **q).value + b * integrate_periodic(iv, 2, **q).value
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@settings(max_examples=30)
@given(seed=st.integers(0, 10**6), shift=st.tuples(st.integers(0, 63), st.integers(0, 63)))
def test_translation_by_grid_multiple_is_exact(seed, shift):
    f = sample_trig_field(2, 3, 0.3, child_rng(seed), basis="fourier")
    s = np.array(shift) * TWO_PI / 64
    g = f.shifted(s)
    q = dict(m_start=64, tol=math.inf, m_max=64)
    i0 = integrate_periodic(lambda grid: np.abs(f.grid_values(grid.axes)), 2, **q).value
    i1 = integrate_periodic(lambda grid: np.abs(g.grid_values(grid.axes)), 2, **q).value
    assert abs(i0 - i1) <= 1e-12 * i0


def test_translation_off_grid_within_error_estimate():
    f = sample_trig_field(2, 3, 0.3, child_rng(4), basis="fourier")
    g = f.shifted([0.0123, -0.077])
    r0 = integrate_periodic(lambda grid: np.abs(f.grid_values(grid.axes)), 2, 64, 1e-6, 2048)
    r1 = integrate_periodic(lambda grid: np.abs(g.grid_values(grid.axes)), 2, 64, 1e-6, 2048)
    assert abs(r0.value - r1.value) <= r0.error_estimate + r1.error_estimate


def test_error_estimate_nonincreasing_on_smooth_integrands():
    for s in range(20):
        f = sample_trig_field(1, 4, 0.5, child_rng(12, s), basis="fourier")
        res = integrate_periodic(lambda g: np.exp(np.sin(f.grid_values(g.axes))), 1, 8, 1e-13, 1 << 12)
        errs = np.abs(np.diff(res.history))
        assert errs[-1] <= errs[-2]
