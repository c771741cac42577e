"""Catalog densities, class testers, and the counterexample."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from mixdense.analysis import QuadratureGrid
from mixdense.classes import (
    V_SWEEP,
    bump_mass,
    catalog,
    check_c0_tail,
    check_class_V,
    class_report,
    counterexample_eval,
    counterexample_l1,
    counterexample_peaks,
    counterexample_wiener_sum,
    lookup,
    triangular_density,
    wiener_divergence,
    wiener_partial_sum,
)
from mixdense.errors import InputError
from mixdense.mixture import ClassFlag

# ── Catalog ────────────────────────────────────────────


@pytest.mark.parametrize(
    "name, grid",
    [
        ("normal", QuadratureGrid.cube(10.0, 1 << 16)),
        ("triangular", QuadratureGrid.cube(1.0, 1 << 16)),
        ("uniform", QuadratureGrid.cube(1.0, 1 << 16)),
        ("laplace", QuadratureGrid.cube(40.0, 1 << 20)),
        ("cauchy", QuadratureGrid.cube(1e6, 1 << 23)),
        ("normal2", QuadratureGrid.cube(10.0, 2048, dim=2)),
        ("triangular2", QuadratureGrid.cube(1.0, 2048, dim=2)),
    ],
)
def test_catalog_pdfs_have_unit_mass(name, grid):
    f = lookup(name)
    mass = float(np.sum(grid.values(f))) * grid.cell_volume
    assert abs(mass - 1.0) < 1e-6, f"{name}: mass {mass}"


def test_catalog_flags():
    table = {d.name: d for d in catalog()}
    assert table["triangular"].has(ClassFlag.IN_CC)
    assert not table["normal"].has(ClassFlag.IN_CC)
    assert table["uniform"].flags == frozenset({ClassFlag.IS_PDF})
    assert not table["counterexample"].is_pdf
    assert table["counterexample"].has(ClassFlag.IN_C0)
    assert all(d.is_pdf for name, d in table.items() if name != "counterexample")


def test_lookup_unknown_name():
    with pytest.raises(InputError):
        lookup("gumbel")


def test_shifted_triangular_has_no_v_certificate():
    assert triangular_density(0.0, 1.0).v_params is None
    assert triangular_density(0.0, 1.0)(0.5) == pytest.approx(2.0)


# ── Counterexample ─────────────────────────────────────

def test_peaks_are_reciprocals():
    for peak in counterexample_peaks(100):
        assert peak.x == peak.i - 0.5
        assert peak.value == 1.0 / peak.i


def test_vanishes_left_of_origin_and_at_integers():
    assert counterexample_eval(-3.0) == 0.0
    assert counterexample_eval(np.arange(0.0, 20.0)).tolist() == [0.0] * 20


@pytest.mark.parametrize("i", range(1, 11))
def test_bump_masses(i):
    mass, _ = quad(counterexample_eval, i - 1, i, points=[i - 0.5], epsabs=1e-14, epsrel=1e-12)
    assert bump_mass(i) == Fraction(1, 2 * i * i + i)
    assert abs(mass - float(bump_mass(i))) < 1e-10


def test_bump_mass_rejects_zero():
    with pytest.raises(InputError):
        bump_mass(0)


def test_l1_interval_contains_closed_form():
    est = counterexample_l1(1e-5)
    exact = 2.0 * (1.0 - math.log(2.0))
    assert est.lower <= exact <= est.upper
    assert abs(est.value - exact) < 1e-4
    assert est.terms == 100_000


def test_continuous_at_knots():
    knots = np.arange(0, 41) * 0.5
    jump = np.abs(counterexample_eval(knots - 1e-7) - counterexample_eval(knots + 1e-7))
    assert float(jump.max()) < 1e-9


def test_c0_tails(counterexample):
    for radius, sup in check_c0_tail(counterexample, [10, 20, 50]):
        assert sup == pytest.approx(1.0 / (radius + 1.0), abs=1e-3)


def test_counterexample_fails_class_V(counterexample):
    check = check_class_V(counterexample, 1.0, 1.0, [5])
    assert not check.holds_on_samples
    # (2x)^2 first exceeds (1 + x)^{-2} at x = (√3 − 1)/2
    assert 0.366 <= check.first_violation[0] <= 0.375


def test_counterexample_fails_whole_sweep(counterexample):
    for beta, theta in V_SWEEP:
        check = check_class_V(counterexample, beta, theta, [10, 100, 1000, 5000])
        assert not check.holds_on_samples, (beta, theta)


@pytest.mark.parametrize("name, beta, theta", [("cauchy", 2.0 / math.pi, 1.0), ("normal", 1.0, 1.0),
                                               ("laplace", 1.0, 1.0), ("triangular", 2.0, 1.0)])
def test_catalog_certificates_hold(name, beta, theta):
    f = lookup(name)
    assert f.v_params == (beta, theta)
    assert check_class_V(f, beta, theta, [50]).holds_on_samples


# ── Wiener sums ────────────────────────────────────────

@pytest.mark.parametrize("N", [0, 1, 5, 20])
def test_partial_sums_match_peak_sum(counterexample, N):
    assert wiener_partial_sum(counterexample, N) == pytest.approx(counterexample_wiener_sum(N), rel=1e-12)


def test_normal_partial_sums_converge(normal):
    assert wiener_partial_sum(normal, 40) - wiener_partial_sum(normal, 39) < 1e-8


def test_wiener_sums_need_one_dimension():
    with pytest.raises(InputError):
        wiener_partial_sum(lookup("normal2"), 3)


def test_divergence_witness():
    witness = wiener_divergence(100_000)
    assert abs(witness.slope - 1.0) < 0.05
    assert witness.ratio == pytest.approx(1.0 + np.euler_gamma / math.log(100_000), abs=1e-4)
    assert abs(witness.euler_gap) < 1e-4
    with pytest.raises(InputError):
        wiener_divergence(5)


def test_class_report_serializes(normal):
    report = class_report(normal, wiener_n=5)
    data = json.loads(report.to_json())
    assert data["density"] == "normal"
    assert len(data["v_check"]) == len(V_SWEEP)
    assert len(data["wiener_partial_sums"]) == 6
    assert [r for r, _ in report.c0_tail] == [1.0, 2.0, 5.0, 10.0, 20.0]
