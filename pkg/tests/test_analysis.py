"""Geometry, grids, norms, convolution, and the approximate-identity checks."""

import math

import numpy as np
import pytest

from mixdense.analysis import (
    Box,
    NormReport,
    QuadratureGrid,
    approximate_identity_profile,
    ball_volume,
    convolve_dilated,
    convolve_on_nodes,
    kl_divergence,
    linf_distance,
    lp_distance,
    lp_norm_profile,
    modulus_of_continuity,
    norm_report,
    unit_sphere_area,
    youngs_check,
)
from mixdense.classes import catalog, catalog_by_name, normal_density
from mixdense.errors import InputError, PreconditionError, ResourceError
from mixdense.mixture import ClassFlag, zero_density

# ── Geometry ───────────────────────────────────────────


def test_box_geometry():
    box = Box.cube(1.0, dim=2)
    assert box.volume == 4.0
    assert box.diameter == pytest.approx(2.0 * math.sqrt(2.0))
    assert box.scaled(3.0).upper == (3.0, 3.0)
    assert box.contains(np.array([[0.0, 1.0], [1.5, 0.0]])).tolist() == [True, False]


def test_box_rejects_inverted_corners():
    with pytest.raises(InputError):
        Box((1.0,), (0.0,))


@pytest.mark.parametrize("n, area", [(1, 2.0), (2, 2.0 * math.pi), (3, 4.0 * math.pi)])
def test_unit_sphere_area(n, area):
    assert unit_sphere_area(n) == pytest.approx(area, rel=1e-14)


def test_ball_volume():
    assert ball_volume(1, 2.0) == pytest.approx(4.0)
    assert ball_volume(3, 1.0) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-14)


# ── Grids ──────────────────────────────────────────────

def test_grid_cap():
    with pytest.raises(ResourceError):
        QuadratureGrid.cube(1.0, 5000, dim=2)


def test_chunks_follow_node_order():
    grid = QuadratureGrid.cube(1.0, 300, dim=2)
    stacked = np.vstack(list(grid.chunks(size=1000)))
    np.testing.assert_array_equal(stacked, grid.nodes())


def test_with_box_keeps_spacing(grid8):
    local = grid8.with_box(Box.cube(2.0))
    assert local.spacing[0] <= grid8.spacing[0] + 1e-15
    assert local.points_per_axis == 256


def test_refined_grid_nests_midpoints():
    grid = QuadratureGrid.cube(8.0, 256)
    fine = grid.refined(3)
    assert fine.box == grid.box
    assert fine.points_per_axis == 768
    np.testing.assert_allclose(fine.nodes()[1::3], grid.nodes(), atol=1e-12)


CATALOG_1D = [d for d in catalog() if d.dim == 1]


@pytest.mark.parametrize("f", CATALOG_1D, ids=lambda d: d.name)
def test_grid_sup_grows_under_refinement(f):
    coarse = QuadratureGrid.cube(8.0, 256)
    zero = zero_density()
    nested = [linf_distance(f, zero, coarse.refined(factor)) for factor in (1, 3, 9)]
    assert all(b >= a - 1e-12 for a, b in zip(nested, nested[1:])), nested
    assert linf_distance(f, zero, coarse.refined(16)) >= nested[0] - 1e-12


@pytest.mark.parametrize("p", [1.0, 2.0])
@pytest.mark.parametrize("name", ["normal", "laplace", "cauchy", "triangular"])
def test_lp_changes_shrink_under_refinement(name, p):
    f = catalog_by_name()[name]
    zero = zero_density()
    grid = QuadratureGrid.cube(8.0, 256)
    values = [lp_distance(f, zero, p, grid.refined(1 << j)) for j in range(4)]
    changes = [abs(b - a) for a, b in zip(values, values[1:])]
    assert all(b <= a + 1e-12 for a, b in zip(changes, changes[1:])), changes


# ── Norms ──────────────────────────────────────────────

def test_normal_has_unit_l1_norm(normal, grid8):
    assert lp_distance(normal, zero_density(), 1, grid8) == pytest.approx(1.0, abs=1e-6)


def test_lp_rejects_small_p(normal, grid8):
    with pytest.raises(InputError):
        lp_distance(normal, normal, 0.5, grid8)


def test_distance_to_self_is_zero(normal, grid8):
    report = norm_report(normal, normal, grid8)
    assert (report.l1, report.l2, report.linf, report.kl) == (0.0, 0.0, 0.0, 0.0)
    assert linf_distance(normal, normal, grid8) == 0.0


def test_kl_normal_against_laplace(normal, laplace, grid8):
    # −½log(2πe) + log 2 + √(2/π)
    expected = -0.5 * math.log(2.0 * math.pi * math.e) + math.log(2.0) + math.sqrt(2.0 / math.pi)
    kl = kl_divergence(normal, laplace, grid8)
    assert kl >= -1e-6
    assert kl == pytest.approx(expected, abs=1e-4)


def test_norm_report_row(normal, laplace, grid8):
    report = norm_report(normal, laplace, grid8, p=3.0)
    row = report.to_row()
    assert tuple(row) == NormReport.COLUMNS
    assert row["grid"] == grid8.descriptor()
    assert row["p"] == 3.0
    assert row["kl"] == report.kl
    assert report.kl > 0
    assert norm_report(normal, laplace, grid8, with_kl=False).to_row()["kl"] == ""


def test_lp_norm_profile(normal, grid8):
    profile = lp_norm_profile(normal, [1.0, 2.0], grid8)
    assert profile[1.0] == pytest.approx(1.0, abs=1e-6)
    assert profile[2.0] == pytest.approx((1.0 / (2.0 * math.sqrt(math.pi))) ** 0.5, rel=1e-6)


# ── Continuity ─────────────────────────────────────────

def test_modulus_needs_continuity_flag(uniform, grid8):
    with pytest.raises(PreconditionError):
        modulus_of_continuity(uniform, 0.1, grid8)


def test_modulus_of_triangular(triangular, grid8):
    w = modulus_of_continuity(triangular, 0.1, grid8)
    assert 0.09 <= w <= 0.1
    assert modulus_of_continuity(triangular, 0.0, grid8) == 0.0
    assert modulus_of_continuity(triangular, 0.001, grid8) == 0.0


# ── Convolution ────────────────────────────────────────

def test_scheme_follows_resolution(normal, grid8):
    x = np.zeros((1, 1))
    assert convolve_on_nodes(normal, 1.0, normal, x, grid8)[1] == "grid"
    assert convolve_on_nodes(normal, 64.0, normal, x, grid8)[1] == "quantile"


def test_normal_self_convolution(normal, grid8):
    values, _ = convolve_on_nodes(normal, 1.0, normal, np.zeros((1, 1)), grid8)
    assert values[0] == pytest.approx(1.0 / math.sqrt(4.0 * math.pi), abs=1e-6)


def test_quantile_scheme_on_linear_stretch(normal, triangular, grid8):
    # triangular is linear on (0, 1); a narrow symmetric kernel leaves it unchanged there
    result = convolve_dilated(normal, 64.0, triangular, 0.5, grid8)
    assert result.scheme == "quantile"
    assert result.value == pytest.approx(0.5, abs=1e-3)
    assert result.covers_support


def test_convolution_coverage_metadata(normal, triangular, grid8):
    assert convolve_dilated(normal, 1.0, triangular, 0.0, grid8).covers_support
    open_tail = convolve_dilated(normal, 1.0, normal, 0.0, grid8)
    assert not open_tail.covers_support
    assert open_tail.tail_bound == pytest.approx(normal.sup_bound * 2.0 / 8.0)


def test_convolution_needs_pdf_kernel(counterexample, normal, grid8):
    with pytest.raises(PreconditionError):
        convolve_on_nodes(counterexample, 1.0, normal, np.zeros((1, 1)), grid8)


IDENTITY_GRIDS = {
    "cauchy": QuadratureGrid.cube(50.0, 4096),
    "normal2": QuadratureGrid.cube(5.0, 96, dim=2),
    "triangular2": QuadratureGrid.cube(5.0, 96, dim=2),
}
C0_CATALOG = [
    pytest.param(d, marks=pytest.mark.slow) if d.dim > 1 else d
    for d in catalog()
    if d.has(ClassFlag.IN_C0)
]


@pytest.mark.parametrize("f", C0_CATALOG, ids=lambda d: d.name)
def test_approximate_identity_shrinks(f):
    g = normal_density(f.dim)
    grid = IDENTITY_GRIDS.get(f.name, QuadratureGrid.cube(8.0, 2048))
    steps = approximate_identity_profile(f, g, [1, 2, 4, 8, 16], grid)
    errors = [s.linf for s in steps]
    assert errors[-1] < errors[0], errors
    assert all(b <= a + 1e-6 for a, b in zip(errors[1:], errors[2:])), errors


PDF_1D = [d for d in catalog() if d.dim == 1 and d.is_pdf]


@pytest.mark.parametrize("g", PDF_1D, ids=lambda d: d.name)
@pytest.mark.parametrize("f", PDF_1D, ids=lambda d: d.name)
@pytest.mark.parametrize("p", [1.0, 2.0])
def test_youngs_inequality(f, g, p, grid8):
    check = youngs_check(g, f, p, grid8)
    assert check.holds, f"{f.name}*{g.name}: {check.lhs} > {check.rhs}"
