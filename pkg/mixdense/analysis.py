"""
Measure-and-integration toolbox on midpoint tensor grids.

Every integral in the package goes through :class:`QuadratureGrid` and the
midpoint rule; sums use numpy's pairwise summation in a fixed node order so
results do not depend on how callers chunk their work.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .config import (
    EVAL_CHUNK,
    KL_FLOOR,
    MAX_GRID_NODES,
    NODE_CHUNK,
    QUANTILE_NODES,
    RESOLVE_FACTOR,
    YOUNG_SLACK,
)
from .errors import InputError, PreconditionError, ResourceError
from .mixture import BoxPair, ClassFlag, Density, as_points, zero_density

log = logging.getLogger("mixdense.analysis")


# ── Geometry ───────────────────────────────────────────

@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise InputError(f"box corners disagree in dimension: {lo} vs {hi}")
        if not all(a < b for a, b in zip(lo, hi)):
            raise InputError(f"box lower corner must be below upper corner: {lo} vs {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, radius: float, dim: int = 1, center: Sequence[float] | None = None) -> Box:
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls(tuple(c - radius), tuple(c + radius))

    @classmethod
    def from_pair(cls, pair: BoxPair) -> Box:
        return cls(tuple(pair[0]), tuple(pair[1]))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lengths(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.lengths))

    def scaled(self, k: float) -> Box:
        return Box(tuple(k * v for v in self.lower), tuple(k * v for v in self.upper))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = as_points(points, self.dim)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def describe(self) -> str:
        return "x".join(f"[{a:g},{b:g}]" for a, b in zip(self.lower, self.upper))


def unit_sphere_area(n: int) -> float:
    """A_n, the surface area of the unit sphere in R^n (A_1 = 2)."""
    return float(2.0 * math.pi ** (n / 2) / gamma_fn(n / 2))


def ball_volume(n: int, r: float) -> float:
    return float(math.pi ** (n / 2) / gamma_fn(n / 2 + 1) * r**n)


# ── Grids ──────────────────────────────────────────────

@dataclass(frozen=True)
class QuadratureGrid:
    """Midpoint tensor grid: the numerical stand-in for Lebesgue measure."""

    box: Box
    points_per_axis: int

    def __post_init__(self):
        if self.points_per_axis < 1:
            raise InputError(f"points_per_axis must be positive, got {self.points_per_axis}")
        if self.node_count > MAX_GRID_NODES:
            raise ResourceError(
                f"grid of {self.points_per_axis}^{self.dim} nodes exceeds the cap of {MAX_GRID_NODES}"
            )

    @classmethod
    def cube(cls, radius: float, points_per_axis: int, dim: int = 1) -> QuadratureGrid:
        return cls(Box.cube(radius, dim), points_per_axis)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def node_count(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def spacing(self) -> np.ndarray:
        return self.box.lengths / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        j = np.arange(self.points_per_axis) + 0.5
        return [lo + j * h for lo, h in zip(self.box.lower, self.spacing)]

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def chunks(self, size: int = NODE_CHUNK) -> Iterator[np.ndarray]:
        """Yield node blocks in the same row-major order as :meth:`nodes`."""
        axes = self.axes()
        shape = (self.points_per_axis,) * self.dim
        for start in range(0, self.node_count, size):
            idx = np.unravel_index(np.arange(start, min(start + size, self.node_count)), shape)
            yield np.stack([axes[a][idx[a]] for a in range(self.dim)], axis=1)

    def values(self, f: Density) -> np.ndarray:
        if f.dim != self.dim:
            raise InputError(f"{f.name} has dimension {f.dim}, grid has {self.dim}")
        return np.concatenate([f.eval(block) for block in self.chunks()])

    def with_box(self, box: Box) -> QuadratureGrid:
        """Grid over ``box`` with spacing no coarser than this grid's."""
        h = float(self.spacing.min())
        return QuadratureGrid(box, max(1, int(math.ceil(float(box.lengths.max()) / h - 1e-9))))

    def refined(self, factor: int) -> QuadratureGrid:
        return QuadratureGrid(self.box, self.points_per_axis * factor)

    def descriptor(self) -> str:
        return f"{self.box.describe()}@{self.points_per_axis}"


# ── Norms ──────────────────────────────────────────────

def _check_pair(f: Density, h: Density, grid: QuadratureGrid) -> None:
    if not f.dim == h.dim == grid.dim:
        raise InputError(f"dimension mismatch: {f.name}={f.dim}, {h.name}={h.dim}, grid={grid.dim}")


def lp_from_values(values: np.ndarray, p: float, cell_volume: float) -> float:
    a = np.abs(values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 1:
        return float(np.sum(a) * cell_volume)
    return float((np.sum(a**p) * cell_volume) ** (1.0 / p))


def lp_distance(f: Density, h: Density, p: float, grid: QuadratureGrid) -> float:
    """Midpoint approximation of (∫_box |f − h|^p dλ)^{1/p}."""
    if not (p >= 1 and math.isfinite(p)):
        raise InputError(f"p must lie in [1, inf), got {p}")
    _check_pair(f, h, grid)
    return lp_from_values(grid.values(f) - grid.values(h), p, grid.cell_volume)


def linf_distance(f: Density, h: Density, grid: QuadratureGrid) -> float:
    """
    Grid-sup of |f − h|.

    A lower bound on the essential sup over the box; it converges as the
    grid refines.
    """
    _check_pair(f, h, grid)
    return lp_from_values(grid.values(f) - grid.values(h), math.inf, grid.cell_volume)


def kl_from_values(fv: np.ndarray, hv: np.ndarray, cell_volume: float, floor: float = KL_FLOOR) -> float:
    mask = fv > 0
    ratio = fv[mask] / np.maximum(hv[mask], floor)
    return float(np.sum(fv[mask] * np.log(ratio)) * cell_volume)


def kl_divergence(f: Density, h: Density, grid: QuadratureGrid, floor: float = KL_FLOOR) -> float:
    """∫ f log(f/h) over the grid box, with h clamped below by ``floor``."""
    if not floor > 0:
        raise InputError(f"KL floor must be positive, got {floor}")
    _check_pair(f, h, grid)
    return kl_from_values(grid.values(f), grid.values(h), grid.cell_volume, floor)


@dataclass(frozen=True)
class NormReport:
    grid: str
    p: float
    l1: float
    l2: float
    lp: float
    linf: float
    kl: float | None = None

    COLUMNS = ("grid", "p", "l1", "l2", "lp", "linf", "kl")

    def to_row(self) -> dict[str, object]:
        row = asdict(self)
        row["kl"] = "" if self.kl is None else self.kl
        return row


def report_from_values(
    fv: np.ndarray,
    hv: np.ndarray,
    grid: QuadratureGrid,
    p: float = 2.0,
    with_kl: bool = True,
) -> NormReport:
    diff = fv - hv
    vol = grid.cell_volume
    return NormReport(
        grid=grid.descriptor(),
        p=p,
        l1=lp_from_values(diff, 1, vol),
        l2=lp_from_values(diff, 2, vol),
        lp=lp_from_values(diff, p, vol),
        linf=lp_from_values(diff, math.inf, vol),
        kl=kl_from_values(fv, hv, vol) if with_kl else None,
    )


def norm_report(f: Density, h: Density, grid: QuadratureGrid, p: float = 2.0, with_kl: bool = True) -> NormReport:
    _check_pair(f, h, grid)
    return report_from_values(grid.values(f), grid.values(h), grid, p, with_kl)


# ── Convolution ────────────────────────────────────────

@dataclass(frozen=True)
class Convolution:
    value: float
    covers_support: bool
    tail_bound: float | None
    scheme: str


def _resolved(g: Density, k: float, grid: QuadratureGrid) -> bool:
    return k * float(grid.spacing.max()) <= RESOLVE_FACTOR or g.quantile is None


def _quantile_nodes(g: Density) -> np.ndarray:
    n = g.dim
    count = QUANTILE_NODES.get(n, 16)
    u = (np.arange(count) + 0.5) / count
    q = np.asarray(g.quantile(np.repeat(u[:, None], n, axis=1)), dtype=float).reshape(count, n)
    mesh = np.meshgrid(*[q[:, a] for a in range(n)], indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def convolve_on_nodes(
    g: Density,
    k: float,
    f: Density,
    points: np.ndarray,
    grid: QuadratureGrid,
) -> tuple[np.ndarray, str]:
    """
    (g_k ⋆ f)(x) = ∫ k^n g(k(x − y)) f(y) dλ(y) at every row of ``points``.

    Uses the grid's midpoint rule over its box while the dilate is resolved
    by the grid spacing. A narrower dilate of a kernel with a quantile
    function is integrated as ∫ g(z) f(x − z/k) dλ(z) with the midpoint rule
    in quantile space. Returns the values and the scheme name.
    """
    if not g.is_pdf:
        raise PreconditionError(f"kernel {g.name} is not flagged as a pdf")
    if not k > 0:
        raise InputError(f"dilation level must be positive, got {k}")
    if not g.dim == f.dim == grid.dim:
        raise InputError("kernel, integrand, and grid dimensions differ")
    n = g.dim
    pts = as_points(points, n)
    out = np.empty(len(pts))

    if _resolved(g, k, grid):
        ys = grid.nodes()
        fv = grid.values(f)
        keep = fv != 0
        ys, fv = ys[keep], fv[keep]
        if not len(ys):
            return np.zeros(len(pts)), "grid"
        weight = k**n * grid.cell_volume
        block = max(1, EVAL_CHUNK // len(ys))
        for start in range(0, len(pts), block):
            xs = pts[start:start + block]
            diff = (xs[:, None, :] - ys[None, :, :]) * k
            kv = g.eval(diff.reshape(-1, n)).reshape(len(xs), len(ys))
            out[start:start + block] = weight * np.sum(kv * fv[None, :], axis=1)
        return out, "grid"

    zs = _quantile_nodes(g) / k
    block = max(1, EVAL_CHUNK // len(zs))
    for start in range(0, len(pts), block):
        xs = pts[start:start + block]
        shifted = xs[:, None, :] - zs[None, :, :]
        out[start:start + block] = f.eval(shifted.reshape(-1, n)).reshape(len(xs), len(zs)).mean(axis=1)
    return out, "quantile"


def convolved_density(g: Density, k: float, f: Density, grid: QuadratureGrid) -> Density:
    """g_k ⋆ f as a density, evaluated pointwise by :func:`convolve_on_nodes`."""
    return Density(
        name=f"{g.name}_{k:g}*{f.name}",
        dim=f.dim,
        fn=lambda pts: convolve_on_nodes(g, k, f, pts, grid)[0],
        sup_bound=f.sup_bound,
        flags=frozenset(fl for fl in f.flags if fl != ClassFlag.IN_CC),
    )


def _distance_to_boundary(x: np.ndarray, box: Box) -> float:
    return float(min(np.min(x - np.asarray(box.lower)), np.min(np.asarray(box.upper) - x)))


def convolve_dilated(g: Density, k: float, f: Density, x: object, grid: QuadratureGrid) -> Convolution:
    """(g_k ⋆ f)(x) with coverage and kernel-tail metadata."""
    point = as_points(x, g.dim)[:1]
    values, scheme = convolve_on_nodes(g, k, f, point, grid)
    box = grid.box
    covered = scheme == "quantile"
    if f.support_radius is not None:
        r = f.support_radius
        covered = covered or (all(lo <= -r for lo in box.lower) and all(hi >= r for hi in box.upper))
    d = _distance_to_boundary(point[0], box)
    if g.support_radius is not None and d >= g.support_radius / k:
        covered = True
    tail = None
    if not covered and g.v_params is not None and f.sup_bound is not None:
        beta, theta = g.v_params
        if d > 0:
            mass = beta * unit_sphere_area(g.dim) * (k * d) ** (-theta) / theta
            tail = f.sup_bound * min(1.0, mass)
        else:
            tail = f.sup_bound
    if not covered:
        log.debug("grid box %s does not cover the integrand at x=%s", box.describe(), point[0])
    return Convolution(float(values[0]), covered, tail, scheme)


# ── Continuity, Young, profiles ────────────────────────

def modulus_of_continuity(f: Density, delta: float, grid: QuadratureGrid) -> float:
    """
    Lower-bound estimate of w(f, δ) = sup_{‖x−y‖≤δ} |f(x) − f(y)|.

    Only axis-aligned node pairs at most δ apart are compared, i.e. offsets
    up to ⌊δ/h⌋ nodes per axis, so the estimate never exceeds the true
    modulus. A δ below the grid spacing h reaches no pair and gives 0.
    """
    if delta < 0:
        raise InputError(f"delta must be nonnegative, got {delta}")
    if not (f.has(ClassFlag.IN_C0) or f.has(ClassFlag.IN_CC)):
        raise PreconditionError(f"{f.name} is not flagged uniformly continuous (C0 or Cc)")
    if delta == 0:
        return 0.0
    n = grid.dim
    shape = (grid.points_per_axis,) * n
    values = grid.values(f).reshape(shape)
    best = 0.0
    for axis, h in enumerate(grid.spacing):
        reach = min(int(math.floor(delta / h + 1e-12)), grid.points_per_axis - 1)
        for j in range(1, reach + 1):
            hi = [slice(None)] * n
            lo = [slice(None)] * n
            hi[axis] = slice(j, None)
            lo[axis] = slice(None, -j)
            best = max(best, float(np.max(np.abs(values[tuple(hi)] - values[tuple(lo)]))))
    return best


@dataclass(frozen=True)
class YoungCheck:
    p: float
    lhs: float
    rhs: float
    holds: bool


def youngs_check(g: Density, f: Density, p: float, grid: QuadratureGrid) -> YoungCheck:
    """‖f ⋆ g‖_p ≤ ‖g‖_1 ‖f‖_p with ‖g‖_1 = 1 for a pdf kernel."""
    if not p >= 1:
        raise InputError(f"p must be at least 1, got {p}")
    nodes = grid.nodes()
    conv, _ = convolve_on_nodes(g, 1.0, f, nodes, grid)
    vol = grid.cell_volume
    lhs = lp_from_values(conv, p, vol)
    rhs = lp_from_values(grid.values(f), p, vol)
    return YoungCheck(p=p, lhs=lhs, rhs=rhs, holds=lhs <= rhs + YOUNG_SLACK)


@dataclass(frozen=True)
class IdentityStep:
    k: float
    linf: float
    lp: float
    scheme: str


def approximate_identity_profile(
    f: Density,
    g: Density,
    ks: Sequence[float],
    grid: QuadratureGrid,
    p: float = 2.0,
) -> list[IdentityStep]:
    """Grid errors of g_k ⋆ f − f along a sequence of dilation levels."""
    nodes = grid.nodes()
    fv = grid.values(f)
    steps = []
    for k in ks:
        conv, scheme = convolve_on_nodes(g, k, f, nodes, grid)
        diff = conv - fv
        steps.append(IdentityStep(
            k=float(k),
            linf=lp_from_values(diff, math.inf, grid.cell_volume),
            lp=lp_from_values(diff, p, grid.cell_volume),
            scheme=scheme,
        ))
        log.debug("identity profile %s k=%g linf=%.3g", f.name, k, steps[-1].linf)
    return steps


def lp_norm_profile(f: Density, qs: Sequence[float], grid: QuadratureGrid) -> dict[float, float]:
    """‖f‖_q on the grid for each q; finite for L_1 ∩ L_inf densities."""
    zero = zero_density(f.dim)
    return {q: lp_distance(f, zero, q, grid) for q in qs}
