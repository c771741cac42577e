"""Greedy convex fitting, target smoothing, and the rate bound."""

import math

import numpy as np
import pytest

from mixdense.analysis import Box, QuadratureGrid
from mixdense.errors import InputError
from mixdense.greedy import (
    DictionarySpec,
    GreedyStep,
    GreedyTrace,
    donahue_constant,
    greedy_convex_fit,
    lp_approximate,
    rate_bound_check,
    rate_exponent,
    target_smoothing,
)
from mixdense.mixture import ClassFlag, dilate_component, validate_mixture

# ── Constants ──────────────────────────────────────────


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_donahue_constant_is_one_up_to_two(p):
    assert donahue_constant(p) == 1.0


def test_donahue_constant_above_two():
    assert donahue_constant(3.0) == pytest.approx(math.sqrt(2.0) * math.sqrt(math.pi) ** (1.0 / 3.0), rel=1e-12)
    assert donahue_constant(4.0) == pytest.approx(math.sqrt(2.0) * (3.0 * math.pi / 4.0) ** 0.25, rel=1e-12)
    assert donahue_constant(4.0) == pytest.approx(1.7521359, abs=1e-6)


def test_donahue_constant_domain():
    with pytest.raises(InputError):
        donahue_constant(0.5)
    with pytest.raises(InputError):
        donahue_constant(math.inf)


def test_rate_exponent():
    assert rate_exponent(1.0) == 0.0
    assert rate_exponent(2.0) == 0.5
    assert rate_exponent(6.0) == 0.5


# ── Dictionary ─────────────────────────────────────────

def test_dictionary_on_grid(normal):
    d = DictionarySpec.on_grid(normal, 1.0, Box.cube(4.0), 257)
    assert d.size == 257
    assert d.spacing == pytest.approx(8.0 / 256)
    assert d.candidate_locations[128, 0] == 0.0


def test_dictionary_rejects_empty(normal):
    with pytest.raises(InputError):
        DictionarySpec(normal, 1.0, np.empty((0, 1)))


# ── Greedy ─────────────────────────────────────────────

def test_target_in_dictionary_stops_after_one_step(normal):
    grid = QuadratureGrid.cube(8.0, 512)
    f = dilate_component(normal, 1.0)
    fit = greedy_convex_fit(f, DictionarySpec.on_grid(normal, 1.0, Box.cube(4.0), 257), 2.0, 10, grid)
    assert len(fit.trace.steps) == 1
    assert fit.trace.errors[0] == 0.0
    assert fit.mixture.m == 1
    assert fit.mixture.locations[0, 0] == 0.0


@pytest.fixture(scope="module")
def laplace_run():
    from mixdense.classes import laplace_density, normal_density

    grid = QuadratureGrid.cube(8.0, 1024)
    return lp_approximate(
        laplace_density(), normal_density(), math.inf, 2.0, 64, grid,
        candidates_per_axis=257, candidate_box=Box.cube(6.0), k=4,
    )


def test_errors_never_increase(laplace_run):
    errors = laplace_run.fit.trace.errors
    assert all(b <= a for a, b in zip(errors, errors[1:]))


def test_fit_is_a_simplex_mixture(laplace_run):
    mix = laplace_run.fit.mixture
    assert validate_mixture(mix) == []
    assert np.all(mix.scales == 0.25)
    assert mix.m <= len(laplace_run.fit.trace.steps)


def test_laplace_rate(laplace_run):
    trace = laplace_run.fit.trace
    assert trace.slope() <= -0.4
    assert laplace_run.rate.holds
    assert laplace_run.smoothing.k == 4
    assert trace.rows()[-1]["step"] == "footer"


def test_greedy_in_l3(normal):
    grid = QuadratureGrid.cube(6.0, 256)
    f = dilate_component(normal, 1.0, z=0.3)
    dictionary = DictionarySpec.on_grid(normal, 2.0, Box.cube(3.0), 33)
    fit = greedy_convex_fit(f, dictionary, 3.0, 8, grid)
    errors = fit.trace.errors
    assert all(b <= a for a, b in zip(errors, errors[1:]))
    assert fit.trace.C_p == pytest.approx(donahue_constant(3.0))
    assert validate_mixture(fit.mixture) == []
    assert all(0.0 <= s.step_size <= 1.0 for s in fit.trace.steps)


def test_greedy_input_checks(normal):
    grid = QuadratureGrid.cube(4.0, 128)
    dictionary = DictionarySpec.on_grid(normal, 1.0, Box.cube(2.0), 9)
    with pytest.raises(InputError):
        greedy_convex_fit(normal, dictionary, 2.0, 0, grid)
    with pytest.raises(InputError):
        greedy_convex_fit(normal, dictionary, 0.5, 4, grid)


# ── Rate bound ─────────────────────────────────────────

def test_rate_bound_check_flags_slow_decay():
    trace = GreedyTrace(p=2.0, k=1.0, K_bound=1.0, C_p=1.0, alpha=2.0)
    trace.steps = [GreedyStep(m, (0.0,), 0.5, 0.9) for m in (1, 4, 16)]
    check = rate_bound_check(trace, 2.0)
    assert not check.holds
    assert check.worst_ratio == pytest.approx(0.9 * 4.0)


def test_slope_needs_two_points():
    trace = GreedyTrace(p=2.0, k=1.0, K_bound=1.0, C_p=1.0, alpha=2.0)
    trace.steps = [GreedyStep(4, (0.0,), 1.0, 0.5)]
    assert math.isnan(trace.slope())


# ── Smoothing ──────────────────────────────────────────

def test_smoothing_of_normal(normal, grid8):
    assert target_smoothing(normal, normal, 0.1, grid8).k <= 4
    assert target_smoothing(normal, normal, 10.0, grid8).k == 1


def test_smoothing_level_grows_as_epsilon_shrinks(uniform, normal, grid8):
    coarse = target_smoothing(uniform, normal, 0.2, grid8)
    fine = target_smoothing(uniform, normal, 0.05, grid8)
    assert fine.k >= coarse.k
    assert fine.error < 0.025


def test_smoothed_target_matches_recorded_values(triangular, normal, grid8):
    smooth = target_smoothing(triangular, normal, 0.1, grid8)
    nodes = grid8.nodes()[::64]
    np.testing.assert_allclose(smooth.target.eval(nodes), smooth.values[::64], rtol=1e-12)
    assert smooth.target.name == f"normal_{smooth.k}*triangular"
    assert not smooth.target.has(ClassFlag.IN_CC)
    assert smooth.target.has(ClassFlag.IN_C0)
