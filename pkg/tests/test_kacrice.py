import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodalkac import kacrice, oracle
from nodalkac.field_models import (
    TWO_PI,
    DegenerateRealization,
    PolynomialField,
    SpectralMeasure,
    child_rng,
    cosine_product_field,
    fourier_field,
    sample_spectral_process,
    sample_trig_field,
)
from nodalkac.kacrice import (
    BoundaryZero,
    CountingFunction,
    ThirdDerivativesUnavailable,
    calibrate_boundary_exponent,
    count_zeros_interval_1d,
    count_zeros_periodic_1d,
    nodal_volume_box,
    nodal_volume_fixed_grid,
    nodal_volume_torus,
    zero_count_bounds,
)
from nodalkac.quadrature import QuadSettings

TAGS = CountingFunction.TAGS
SIN = fourier_field({}, {(1,): 1.0})


def random_1d(seed, n=None):
    n = n or 1 + seed % 10
    return sample_trig_field(1, n, 0.5, child_rng(31, seed), basis="fourier")


# ---------------------------------------------------------------- counting functions


@pytest.mark.parametrize("tag", ["sqrt", "arctan"])
def test_counting_function_limits(tag):
    F = CountingFunction(tag)
    assert abs(F.F(1e6) - 1) < 1e-5 and abs(F.F(-1e6) + 1) < 1e-5


def test_uniform_cdf_shape():
    F = CountingFunction("uniform_cdf")
    np.testing.assert_array_equal(F.F([-3, -1, 0, 0.5, 4]), [-1, -1, 0, 0.5, 1])
    np.testing.assert_array_equal(F.dF([-3, -1, 0, 1.5]), [0, 1, 1, 0])


@pytest.mark.parametrize("tag", TAGS)
def test_counting_function_derivative(tag):
    F = CountingFunction(tag)
    x = np.array([-2.3, -0.4, 0.1, 0.77, 3.0])
    h = 1e-6
    np.testing.assert_allclose((F.F(x + h) - F.F(x - h)) / (2 * h), F.dF(x), rtol=1e-6)


def test_unknown_tag():
    with pytest.raises(ValueError):
        CountingFunction("tanh")


# ---------------------------------------------------------------- periodic counts


@pytest.mark.parametrize("tag", TAGS)
def test_sin_has_two_zeros(tag):
    assert count_zeros_periodic_1d(SIN, tag).value == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("tag", TAGS)
@pytest.mark.parametrize("k", range(1, 11))
def test_cos_kx(tag, k):
    assert count_zeros_periodic_1d(cosine_product_field({(k,): 1.0}), tag).value == pytest.approx(2 * k, abs=1e-6)


@pytest.mark.parametrize("tag", TAGS)
def test_no_zeros(tag):
    f = cosine_product_field({(1,): 1.0}, offset=2.0)
    assert abs(count_zeros_periodic_1d(f, tag).value) < 1e-6


def test_random_counts_round_to_bisection():
    for s in range(50):
        f = random_1d(s)
        est = count_zeros_periodic_1d(f)
        truth = oracle.count_zeros_bruteforce_1d(f, eta_threshold=None)
        assert round(est.value) == truth
        assert abs(est.value - truth) <= 10 * 1e-6  # integer proximity, tol = 1e-6


def test_counting_function_invariance():
    for s in range(15):
        f = random_1d(100 + s)
        ests = [count_zeros_periodic_1d(f, tag) for tag in TAGS]
        for i in range(3):
            for j in range(i + 1, 3):
                # the refinement criterion bounds the last doubling; allow its tenfold for the residual
                slack = 10 * (ests[i].error_estimate + ests[j].error_estimate)
                assert abs(ests[i].value - ests[j].value) <= max(slack, 1e-5)


def test_degenerate_realization_is_rejected():
    # cos x cos(0 y) in 1D with a double zero: f = 1 + cos x has f = f' = 0 at pi
    f = cosine_product_field({(1,): 1.0}, offset=1.0)
    with pytest.raises(DegenerateRealization):
        count_zeros_periodic_1d(f, quad=QuadSettings(m_start=64, tol=1e-6, m_max=64), eta_threshold=1e-1)


# ---------------------------------------------------------------- interval counts


def test_interval_examples():
    # box trapezoid is second order: ask the refinement for 1e-10 to meet 1e-8
    fine = QuadSettings(64, 1e-10, 1 << 20)
    assert count_zeros_interval_1d(PolynomialField([0.0, 1.0]), -1, 2, quad=fine).value == pytest.approx(1.0, abs=1e-8)
    square = PolynomialField([0.0, 0.0, 1.0])
    assert count_zeros_interval_1d(square, -1, 1, quad=fine).value == pytest.approx(1.0, abs=1e-8)
    assert count_zeros_interval_1d(SIN, 0.1, TWO_PI - 0.1).value == pytest.approx(1.0, abs=1e-6)


def test_interval_boundary_zero():
    with pytest.raises(BoundaryZero):
        count_zeros_interval_1d(SIN, 0.0, 1.0)


@pytest.mark.parametrize("tag", TAGS)
def test_interval_random_fields(tag):
    for s in range(20):
        f = random_1d(200 + s)
        a, b = 0.5, 5.5
        est = count_zeros_interval_1d(f, a, b, tag)
        assert round(est.value) == oracle.count_zeros_bruteforce_1d(f, (a, b), eta_threshold=None)


# ---------------------------------------------------------------- bounds


def test_bounds_examples():
    for k in (1, 3, 6):
        b = zero_count_bounds(cosine_product_field({(k,): 1.0}))
        assert 2 * k <= b.arctan_coarse == pytest.approx(2 * (k * k + 1), rel=1e-4)  # grid sup of |f''|
        assert 2 * k <= b.arctan and 2 * k <= b.indicator
    b = zero_count_bounds(SIN)
    assert b.arctan == pytest.approx(4 / math.pi + 2, abs=1e-6)


def test_bounds_dominate_random_counts():
    for s in range(30):
        f = random_1d(300 + s)
        b = zero_count_bounds(f)
        n = oracle.count_zeros_bruteforce_1d(f, eta_threshold=None)
        assert n <= b.arctan and n <= b.indicator and b.arctan <= b.arctan_coarse + 1e-9


# ---------------------------------------------------------------- torus volumes


@pytest.mark.parametrize("method", kacrice.METHODS)
def test_cos_x_on_t2(method):
    est = nodal_volume_torus(cosine_product_field({(1, 0): 1.0}), method)
    assert est.value == pytest.approx(4 * math.pi, rel=1e-3)


@pytest.mark.parametrize("method", kacrice.METHODS)
def test_empty_nodal_set_t2(method):
    f = cosine_product_field({(1, 1): 1.0}, offset=2.0)
    assert abs(nodal_volume_torus(f, method).value) < 1e-6


@pytest.mark.parametrize("method", kacrice.METHODS)
def test_one_dimensional_volume_is_the_count(method):
    f = cosine_product_field({(3,): 1.0})
    assert nodal_volume_torus(f, method, QuadSettings(64, 1e-10, 1 << 14)).value == pytest.approx(6.0, abs=1e-4)


def test_d1_volume_agrees_with_count():
    for s in range(5):
        f = random_1d(400 + s)
        vol = nodal_volume_torus(f, "nonsingular", QuadSettings(64, 1e-7, 1 << 16))
        cnt = count_zeros_periodic_1d(f)
        assert abs(vol.value - cnt.value) <= 10 * (vol.error_estimate + cnt.error_estimate) + 1e-6


def test_compact_needs_third_derivatives():
    f = sample_spectral_process(SpectralMeasure.uniform(), 20, child_rng(0))
    with pytest.raises(ThirdDerivativesUnavailable):
        nodal_volume_torus(f, "compact")


def test_unknown_method():
    with pytest.raises(ValueError):
        nodal_volume_torus(cosine_product_field({(1, 0): 1.0}), "trapezoid")


def test_random_2d_against_marching_squares():
    for s in range(5):
        f = sample_trig_field(2, 3, 0.0, child_rng(41, s), basis="fourier")
        ref = oracle.nodal_measure_at(f, 2048)
        vals = {m: nodal_volume_torus(f, m, QuadSettings.fixed(512)).value for m in kacrice.METHODS}
        assert abs(vals["nonsingular"] / ref - 1) < 0.02
        assert (max(vals.values()) - min(vals.values())) / ref < 0.005


@settings(max_examples=10)
@given(seed=st.integers(0, 10**6), scale=st.sampled_from([0.1, 3.0, -2.0]))
def test_homogeneity_at_fixed_grid(seed, scale):
    f = sample_trig_field(3, 3, 0.3, child_rng(seed))
    for method in kacrice.METHODS:
        a = nodal_volume_fixed_grid(f, 32, method).value
        b = nodal_volume_fixed_grid(f.scaled(scale), 32, method).value
        assert abs(a - b) <= 1e-11 * abs(a)


@settings(max_examples=10)
@given(seed=st.integers(0, 10**6), shift=st.tuples(st.integers(0, 31), st.integers(0, 31)))
def test_translation_by_grid_multiple(seed, shift):
    f = sample_trig_field(2, 3, 0.0, child_rng(seed), basis="fourier")
    g = f.shifted(np.array(shift) * TWO_PI / 256)
    for method in kacrice.METHODS:
        a = nodal_volume_fixed_grid(f, 256, method).value
        b = nodal_volume_fixed_grid(g, 256, method).value
        assert abs(a - b) <= 1e-11 * abs(a)


def test_local_refinement_flags_only_underresolved_cells():
    plane = cosine_product_field({(1, 0): 1.0})
    est = nodal_volume_torus(plane, "nonsingular", QuadSettings.fixed(128))
    assert est.parts["local_cells"] == 0


# ---------------------------------------------------------------- box formula


def test_box_cos_x():
    est = nodal_volume_box(cosine_product_field({(1, 0): 1.0}), [0.3, 0.0], [TWO_PI - 0.3, 1.0])
    assert est.value == pytest.approx(2.0, rel=5e-3)


def test_box_empty():
    f = cosine_product_field({(1, 0): 1.0}, offset=2.0)
    assert abs(nodal_volume_box(f, [0.2, 0.1], [2.7, 1.9]).value) < 1e-6


def test_box_random_against_marching_squares():
    for s in range(3):
        f = sample_trig_field(2, 3, 0.0, child_rng(43, s), basis="fourier")
        est = nodal_volume_box(f, [0.0, 0.0], [3.0, 3.0], QuadSettings(64, 1e-5, 1024))
        ref = oracle.nodal_measure_at(f, 2048, box=([0.0, 0.0], [3.0, 3.0]))
        assert est.value == pytest.approx(ref, rel=0.03)


def test_box_zero_on_face():
    with pytest.raises(BoundaryZero):
        nodal_volume_box(cosine_product_field({(1, 0): 1.0}), [0.0, 0.0], [math.pi / 2, 1.0])


def test_boundary_exponent_calibration():
    report = calibrate_boundary_exponent()
    assert report["chosen"] == kacrice.DEFAULT_BOUNDARY_EXPONENT == 1
    assert max(report[1].values()) < 5e-3
    assert max(report[2].values()) > 5e-3  # q = 2 fails an analytic case
