"""Mixture evaluation, invariants, dilates, and serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixdense.analysis import QuadratureGrid
from mixdense.classes import catalog_by_name, normal_density
from mixdense.errors import InputError, InvariantViolation
from mixdense.mixture import (
    ClassFlag,
    Component,
    Mixture,
    dilate_component,
    evaluate_mixture,
    mixture_from_json,
    mixture_to_json,
    mixture_values,
    validate_mixture,
)

PHI0 = 1.0 / math.sqrt(2.0 * math.pi)


def _mix(kernel, weights, locations, scales):
    return Mixture(kernel, np.asarray(weights, float), np.asarray(locations, float).reshape(-1, kernel.dim),
                   np.asarray(scales, float))


# ── Evaluation ─────────────────────────────────────────

def test_single_component_is_the_kernel(normal):
    mix = _mix(normal, [1.0], [0.0], [1.0])
    assert evaluate_mixture(mix, 0.0) == pytest.approx(PHI0, rel=1e-15)
    assert evaluate_mixture(mix, 1.0) == pytest.approx(PHI0 * math.exp(-0.5), rel=1e-14)


def test_location_and_scale(normal):
    mix = _mix(normal, [1.0], [1.0], [2.0])
    assert evaluate_mixture(mix, 1.0) == pytest.approx(0.5 * PHI0, rel=1e-15)
    assert evaluate_mixture(mix, 3.0) == pytest.approx(0.5 * PHI0 * math.exp(-0.5), rel=1e-14)


def test_array_input_returns_array(normal):
    mix = _mix(normal, [0.25, 0.75], [-1.0, 1.0], [1.0, 0.5])
    values = evaluate_mixture(mix, np.array([-1.0, 0.0, 1.0]))
    assert values.shape == (3,)
    expected = 0.25 * PHI0 + 0.75 * 2.0 * PHI0 * math.exp(-8.0)
    assert values[0] == pytest.approx(expected, rel=1e-13)


def test_two_component_value(normal):
    mix = _mix(normal, [0.3, 0.7], [-1.0, 1.0], [1.0, 2.0])
    value = evaluate_mixture(mix, 0.0)
    assert value == pytest.approx(0.3 * PHI0 * math.exp(-0.5) + 0.35 * PHI0 * math.exp(-0.125), rel=1e-14)
    assert value == pytest.approx(0.195815, abs=1e-5)


def test_two_dimensional_kernel():
    g = normal_density(2)
    mix = _mix(g, [1.0], [[0.0, 0.0]], [1.0])
    assert evaluate_mixture(mix, [0.0, 0.0]) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-14)


def test_dimension_mismatch_rejected(normal):
    mix = _mix(normal, [1.0], [0.0], [1.0])
    with pytest.raises(InputError):
        evaluate_mixture(mix, np.zeros((3, 2)))


# ── Invariants ─────────────────────────────────────────

def test_valid_mixture_has_no_violations(normal):
    assert validate_mixture(_mix(normal, [0.5, 0.5], [0.0, 1.0], [1.0, 1.0])) == []


@pytest.mark.parametrize(
    "weights, locations, scales, kind, index",
    [
        ([0.5, 0.6], [0.0, 1.0], [1.0, 1.0], "weight_sum", None),
        ([1.5, -0.5], [0.0, 1.0], [1.0, 1.0], "nonnegative_weight", 2),
        ([0.5, 0.5], [0.0, 1.0], [1.0, 0.0], "positive_scale", 2),
        ([0.5, 0.5], [math.nan, 1.0], [1.0, 1.0], "finite_location", 1),
    ],
)
def test_violations_are_reported(normal, weights, locations, scales, kind, index):
    found = validate_mixture(_mix(normal, weights, locations, scales))
    assert any(v.invariant == kind and v.index == index for v in found), found


def test_evaluating_invalid_mixture_raises(normal):
    with pytest.raises(InvariantViolation):
        evaluate_mixture(_mix(normal, [0.5, 0.6], [0.0, 1.0], [1.0, 1.0]), 0.0)


def test_empty_mixture_is_invalid(normal):
    mix = _mix(normal, [], np.empty((0, 1)), [])
    assert [v.invariant for v in validate_mixture(mix)] == ["nonempty"]


def test_zero_weights_dropped(normal):
    mix = _mix(normal, [0.5, 0.0, 0.5], [0.0, 5.0, 1.0], [1.0, 1.0, 1.0])
    assert mix.m == 2
    assert mix.locations[:, 0].tolist() == [0.0, 1.0]


def test_as_density_flags(normal):
    good = _mix(normal, [0.5, 0.5], [0.0, 1.0], [1.0, 1.0]).as_density()
    bad = _mix(normal, [0.5, 0.6], [0.0, 1.0], [1.0, 1.0]).as_density()
    assert good.has(ClassFlag.IS_PDF)
    assert not bad.has(ClassFlag.IS_PDF)
    assert good.sup_bound == pytest.approx(PHI0)


@given(
    st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(-3.0, 3.0), st.floats(0.5, 2.0)), min_size=1, max_size=6)
)
@settings(max_examples=25, deadline=None)
def test_simplex_mixtures_integrate_to_one(params):
    g = normal_density()
    raw = np.array([w for w, _, _ in params])
    mix = _mix(g, raw / raw.sum(), [mu for _, mu, _ in params], [s for _, _, s in params])
    assert validate_mixture(mix) == []
    grid = QuadratureGrid.cube(20.0, 8192)
    mass = float(np.sum(grid.values(mix.as_density()))) * grid.cell_volume
    assert abs(mass - 1.0) < 1e-6, f"mass {mass} for {params}"


# ── Dilates ────────────────────────────────────────────

@pytest.mark.parametrize("k", [1, 2, 4, 8])
def test_dilate_keeps_unit_mass(normal, k):
    d = dilate_component(normal, k, z=1.0)
    grid = QuadratureGrid.cube(8.0, 1 << 16)
    mass = float(np.sum(grid.values(d))) * grid.cell_volume
    assert abs(mass - 1.0) < 1e-6
    assert d(1.0 / k) == pytest.approx(k * PHI0, rel=1e-14)


def test_dilate_rejects_bad_input(normal, counterexample):
    with pytest.raises(InputError):
        dilate_component(normal, 0.0)
    with pytest.raises(InputError):
        dilate_component(counterexample, 2.0)


def test_from_dilations(normal):
    mix = Mixture.from_dilations(normal, [0.5, 0.5], [[2.0], [4.0]], [2.0, 4.0])
    assert mix.locations[:, 0].tolist() == [1.0, 1.0]
    assert mix.scales.tolist() == [0.5, 0.25]
    with pytest.raises(InputError):
        Mixture.from_dilations(normal, [1.0], [[0.0]], [0.0])


# ── Serialization ──────────────────────────────────────

def test_json_preserves_components(normal):
    mix = Mixture.from_components(normal, [Component(0.3, (-1.0,), 0.5), Component(0.7, (2.0,), 1.5)])
    back = mixture_from_json(mixture_to_json(mix), catalog_by_name())
    assert back.components() == mix.components()
    assert back.kernel.name == "normal"


def test_json_unknown_kernel(normal):
    text = mixture_to_json(_mix(normal, [1.0], [0.0], [1.0])).replace('"normal"', '"nope"')
    with pytest.raises(InputError):
        mixture_from_json(text, catalog_by_name())


# ── Linearity and homogeneity ──────────────────────────

COMPONENTS = st.lists(
    st.tuples(st.floats(0.01, 1.0), st.floats(-3.0, 3.0), st.floats(0.25, 2.0)), min_size=1, max_size=5
)
POINTS = st.lists(st.floats(-6.0, 6.0), min_size=1, max_size=8)


@given(COMPONENTS, COMPONENTS, POINTS)
@settings(max_examples=50, deadline=None)
def test_values_are_additive_over_components(left, right, xs):
    g = normal_density()
    pts = np.array(xs).reshape(-1, 1)

    def values(params):
        w, mu, s = (np.array(v) for v in zip(*params))
        return mixture_values(g, w, mu.reshape(-1, 1), s, pts)

    np.testing.assert_allclose(values(left + right), values(left) + values(right), rtol=1e-12, atol=1e-300)


@given(COMPONENTS, POINTS, st.floats(0.25, 4.0))
@settings(max_examples=50, deadline=None)
def test_rescaling_locations_and_scales(params, xs, t):
    g = normal_density()
    w, mu, s = (np.array(v) for v in zip(*params))
    pts = np.array(xs).reshape(-1, 1)
    base = mixture_values(g, w, mu.reshape(-1, 1), s, pts)
    stretched = mixture_values(g, w, t * mu.reshape(-1, 1), t * s, t * pts)
    np.testing.assert_allclose(stretched, base / t, rtol=1e-9, atol=1e-300)


@given(COMPONENTS, POINTS, st.floats(0.1, 10.0))
@settings(max_examples=50, deadline=None)
def test_values_scale_with_weights(params, xs, t):
    g = normal_density()
    w, mu, s = (np.array(v) for v in zip(*params))
    pts = np.array(xs).reshape(-1, 1)
    base = mixture_values(g, w, mu.reshape(-1, 1), s, pts)
    np.testing.assert_allclose(mixture_values(g, t * w, mu.reshape(-1, 1), s, pts), t * base, rtol=1e-12, atol=1e-300)
