"""Density catalog, function-class testers, and the C0 \\ W counterexample."""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import ndtri

from .errors import InputError
from .mixture import ClassFlag, Density

log = logging.getLogger("mixdense.classes")

PDF_C0 = frozenset({ClassFlag.IS_PDF, ClassFlag.IN_C0, ClassFlag.IN_CB})
PDF_CC = PDF_C0 | {ClassFlag.IN_CC}

SAMPLES_PER_UNIT = 128
CELL_NODES = 1025
V_SWEEP = tuple((b, t) for b in (0.5, 1.0, 2.0, 4.0, 8.0) for t in (0.25, 0.5, 1.0, 2.0))


# ── Catalog ────────────────────────────────────────────

def _laplace_axis(x: np.ndarray) -> np.ndarray:
    return 0.5 * np.exp(-np.abs(x))


def _laplace_quantile(u: np.ndarray) -> np.ndarray:
    return np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))


def _cauchy_axis(x: np.ndarray) -> np.ndarray:
    return 1.0 / (math.pi * (1.0 + x * x))


def _product(axis_pdf: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    def fn(pts: np.ndarray) -> np.ndarray:
        return np.prod(axis_pdf(pts), axis=1)

    return fn


def normal_density(dim: int = 1) -> Density:
    """Standard normal φ on R^dim."""
    return Density(
        name="normal" if dim == 1 else f"normal{dim}",
        dim=dim,
        fn=lambda pts: np.exp(-0.5 * np.sum(pts * pts, axis=1)) / (2.0 * math.pi) ** (dim / 2),
        sup_bound=(2.0 * math.pi) ** (-dim / 2),
        flags=PDF_C0,
        v_params=(1.0, 1.0),
        box=((-10.0,) * dim, (10.0,) * dim),
        quantile=ndtri,
    )


def laplace_density() -> Density:
    return Density(
        name="laplace",
        dim=1,
        fn=_product(_laplace_axis),
        sup_bound=0.5,
        flags=PDF_C0,
        v_params=(1.0, 1.0),
        box=((-40.0,), (40.0,)),
        quantile=_laplace_quantile,
    )


def cauchy_density() -> Density:
    # (1 + |x|)^2 <= 2 (1 + x^2) gives the class-V certificate (2/π, 1)
    return Density(
        name="cauchy",
        dim=1,
        fn=_product(_cauchy_axis),
        sup_bound=1.0 / math.pi,
        flags=PDF_C0,
        v_params=(2.0 / math.pi, 1.0),
        box=((-1e6,), (1e6,)),
        quantile=lambda u: np.tan(math.pi * (u - 0.5)),
    )


def triangular_density(a: float = -1.0, b: float = 1.0, dim: int = 1) -> Density:
    """Symmetric triangular pdf on [a, b] per axis (product when dim > 1)."""
    if not a < b:
        raise InputError(f"triangular support must satisfy a < b, got [{a}, {b}]")
    c, w = 0.5 * (a + b), 0.5 * (b - a)

    def axis(x: np.ndarray) -> np.ndarray:
        return np.maximum(0.0, 1.0 - np.abs(x - c) / w) / w

    def quantile(u: np.ndarray) -> np.ndarray:
        return np.where(u < 0.5, c - w + w * np.sqrt(2.0 * u), c + w - w * np.sqrt(2.0 * (1.0 - u)))

    name = "triangular" if (a, b) == (-1.0, 1.0) else f"triangular[{a:g},{b:g}]"
    return Density(
        name=name if dim == 1 else f"{name}{dim}",
        dim=dim,
        fn=_product(axis),
        support_radius=max(abs(a), abs(b)) * math.sqrt(dim),
        sup_bound=w ** (-dim),
        flags=PDF_CC,
        v_params=(2.0, 1.0) if (a, b, dim) == (-1.0, 1.0, 1) else None,
        box=((a,) * dim, (b,) * dim),
        quantile=quantile,
    )


def uniform_density(a: float = 0.0, b: float = 1.0) -> Density:
    """Uniform pdf on [a, b]: an L_p target outside C0."""
    if not a < b:
        raise InputError(f"uniform support must satisfy a < b, got [{a}, {b}]")
    height = 1.0 / (b - a)
    name = "uniform" if (a, b) == (0.0, 1.0) else f"uniform[{a:g},{b:g}]"
    return Density(
        name=name,
        dim=1,
        fn=lambda pts: np.where((pts[:, 0] >= a) & (pts[:, 0] < b), height, 0.0),
        support_radius=max(abs(a), abs(b)),
        sup_bound=height,
        flags=frozenset({ClassFlag.IS_PDF}),
        box=((a,), (b,)),
        quantile=lambda u: a + (b - a) * u,
    )


def counterexample_density() -> Density:
    return Density(
        name="counterexample",
        dim=1,
        fn=lambda pts: counterexample_eval(pts[:, 0]),
        sup_bound=1.0,
        flags=frozenset({ClassFlag.IN_C0, ClassFlag.IN_CB}),
        box=((0.0,), (200.0,)),
    )


def catalog() -> list[Density]:
    """Built-in densities, in listing order."""
    return [
        normal_density(),
        laplace_density(),
        cauchy_density(),
        triangular_density(),
        uniform_density(),
        counterexample_density(),
        normal_density(2),
        triangular_density(dim=2),
    ]


def catalog_by_name() -> dict[str, Density]:
    return {d.name: d for d in catalog()}


def lookup(name: str) -> Density:
    table = catalog_by_name()
    if name not in table:
        raise InputError(f"unknown density: {name!r} (known: {', '.join(table)})")
    return table[name]


# ── Counterexample ─────────────────────────────────────

def counterexample_eval(x: object) -> float | np.ndarray:
    """
    g(x) = 0 for x < 0; on [i−1, i) the single active bump
    (2^{2i}/i)(x − i + 1)^{2i} left of i − 1/2 and (2^{2i}/i)(x − i)^{2i} right of it.
    """
    arr = np.asarray(x, dtype=float)
    flat = arr.reshape(-1)
    out = np.zeros(flat.shape)
    pos = flat >= 0
    xs = flat[pos]
    i = np.floor(xs) + 1.0
    t = np.where(xs < i - 0.5, xs - i + 1.0, xs - i)
    # (2t)^{2i} stays in [0, 1] and avoids overflowing 2^{2i}
    out[pos] = (2.0 * t) ** (2.0 * i) / i
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def bump_mass(i: int) -> Fraction:
    """∫ (2x)^{2i}/i over (−1/2, 1/2) = 1/(2i² + i), exactly."""
    if i < 1:
        raise InputError(f"bump index must be positive, got {i}")
    return Fraction(1, 2 * i * i + i)


@dataclass(frozen=True)
class L1Estimate:
    value: float
    lower: float
    upper: float
    terms: int


def counterexample_l1(tolerance: float) -> L1Estimate:
    """Partial sum of bump masses with the certified 1/i² remainder interval."""
    if not tolerance > 0:
        raise InputError(f"tolerance must be positive, got {tolerance}")
    terms = int(math.ceil(1.0 / tolerance))
    partial = math.fsum(1.0 / (2.0 * i * i + i) for i in range(1, terms + 1))
    # Σ_{i>N} 1/i² < 1/N
    return L1Estimate(value=partial, lower=partial, upper=partial + 1.0 / terms, terms=terms)


@dataclass(frozen=True)
class Peak:
    i: int
    x: float
    value: float


def counterexample_peaks(count: int) -> list[Peak]:
    xs = np.arange(1, count + 1) - 0.5
    values = counterexample_eval(xs)
    return [Peak(i, float(x), float(v)) for i, x, v in zip(range(1, count + 1), xs, values)]


# ── Wiener's algebra ───────────────────────────────────

def wiener_partial_sum(f: Density, N: int) -> float:
    """S_N = Σ_{y=−N}^{N} sup_{x∈[0,1]} |f(x + y)|, inner sup on 1025 nodes per cell."""
    if f.dim != 1:
        raise InputError("Wiener partial sums are defined for n = 1 densities only")
    if N < 0:
        raise InputError(f"N must be nonnegative, got {N}")
    t = np.linspace(0.0, 1.0, CELL_NODES)
    ys = np.arange(-N, N + 1, dtype=float)
    sups: list[float] = []
    block = max(1, (1 << 20) // CELL_NODES)
    for start in range(0, len(ys), block):
        cells = ys[start:start + block, None] + t[None, :]
        vals = np.abs(f.eval(cells.reshape(-1))).reshape(cells.shape)
        sups.extend(vals.max(axis=1).tolist())
    return math.fsum(sups)


def counterexample_wiener_sum(N: int) -> float:
    """Exact S_N for the counterexample: cell [y, y+1] peaks at 1/(y+1) for y ≥ 0."""
    return math.fsum(1.0 / i for i in range(1, N + 2))


@dataclass(frozen=True)
class WienerDivergence:
    N: int
    partial_sum: float
    ratio: float  # S_N / ln N
    slope: float  # (S_N − S_{N/10}) / ln 10
    euler_gap: float  # ratio − 1 − γ/ln N


def wiener_divergence(N: int) -> WienerDivergence:
    """Divergence witness for the counterexample's sup-sum, from the exact peak increments."""
    if N < 10:
        raise InputError(f"N must be at least 10, got {N}")
    # cells y in [-N, N] give S_N = H_{N+1}, so S_N − S_{N−1} = 1/(N+1) and
    # S_N/ln N − 1 ≈ γ/ln N, about 0.050 at N = 10^5; hence the slope and gap witnesses
    s_n = counterexample_wiener_sum(N)
    s_lo = counterexample_wiener_sum(N // 10)
    ln_n = math.log(N)
    ratio = s_n / ln_n
    return WienerDivergence(
        N=N,
        partial_sum=s_n,
        ratio=ratio,
        slope=(s_n - s_lo) / math.log(N / (N // 10)),
        euler_gap=ratio - 1.0 - np.euler_gamma / ln_n,
    )


# ── Class testers ──────────────────────────────────────

def _samples(dim: int, radius: float) -> np.ndarray:
    if dim == 1:
        count = int(math.ceil(radius * SAMPLES_PER_UNIT))
        xs = np.arange(-count, count + 1) / SAMPLES_PER_UNIT
        return xs.reshape(-1, 1)
    per_axis = min(2 * int(math.ceil(radius * 32)) + 1, 1025)
    axis = np.linspace(-radius, radius, per_axis)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


@dataclass(frozen=True)
class VCheck:
    beta: float
    theta: float
    holds_on_samples: bool
    first_violation: tuple[float, ...] | None


def check_class_V(f: Density, beta: float, theta: float, radii: Sequence[float]) -> VCheck:
    """
    Sample test of |f(x)| ≤ β(1 + ‖x‖₂)^{−n−θ} up to the largest radius.

    A passing result certifies the samples only.
    """
    if not radii:
        raise InputError("radii must be nonempty")
    pts = _samples(f.dim, float(max(radii)))
    norms = np.linalg.norm(pts, axis=1)
    order = np.argsort(norms, kind="stable")
    pts, norms = pts[order], norms[order]
    bound = beta * (1.0 + norms) ** (-f.dim - theta)
    bad = np.abs(f.eval(pts)) > bound * (1.0 + 1e-12)
    if not bad.any():
        return VCheck(beta, theta, True, None)
    first = pts[int(np.argmax(bad))]
    return VCheck(beta, theta, False, tuple(float(v) for v in first))


def check_c0_tail(f: Density, radii: Sequence[float]) -> list[tuple[float, float]]:
    """Sample sup of |f| outside each radius (over one shared sample set)."""
    if not radii:
        return []
    outer = 2.0 * float(max(radii)) + 2.0
    pts = _samples(f.dim, outer)
    norms = np.linalg.norm(pts, axis=1)
    values = np.abs(f.eval(pts))
    out = []
    for r in radii:
        tail = values[norms > r]
        out.append((float(r), float(tail.max()) if tail.size else 0.0))
    return out


@dataclass
class ClassReport:
    density: str
    c0_tail: list[tuple[float, float]] = field(default_factory=list)
    v_check: list[VCheck] = field(default_factory=list)
    wiener_partial_sums: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def class_report(
    f: Density,
    radii: Sequence[float] = (1, 2, 5, 10, 20),
    sweep: Sequence[tuple[float, float]] = V_SWEEP,
    v_radii: Sequence[float] | None = None,
    wiener_n: int = 20,
) -> ClassReport:
    report = ClassReport(density=f.name, c0_tail=check_c0_tail(f, radii))
    report.v_check = [check_class_V(f, b, t, v_radii or radii) for b, t in sweep]
    if f.dim == 1:
        report.wiener_partial_sums = [wiener_partial_sum(f, n) for n in range(wiener_n + 1)]
    log.info("class report for %s: %d/%d V checks hold", f.name,
             sum(v.holds_on_samples for v in report.v_check), len(report.v_check))
    return report
