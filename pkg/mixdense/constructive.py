"""
Constructive mixture pipelines: uniform (C0), uniform on a compact set (Cb),
and L1 approximation.

Each pipeline picks its parameters (cutoff radius, dilation level k,
partition diameter δ) by walking a fixed ladder and stopping at the first
rung whose predicate holds on the grid, then assembles the Riemann-sum
mixture and records what it measured in a :class:`ConstructionTrace`.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from .analysis import (
    Box,
    NormReport,
    QuadratureGrid,
    ball_volume,
    convolve_on_nodes,
    lp_from_values,
    modulus_of_continuity,
    report_from_values,
    unit_sphere_area,
)
from .config import (
    CELL_QUAD_POINTS,
    DEFAULT_GAMMA,
    EVAL_CHUNK,
    MASS_EXCESS_TOL,
    MAX_CELLS,
    MAX_K,
    MAX_K_L1,
    MAX_RADIUS,
    MEASURE_THRESHOLD,
    NEGATIVE_WEIGHT_TOL,
    POINTWISE_SAMPLES,
    ZERO_WEIGHT,
)
from .errors import (
    BudgetExceeded,
    ConstructionError,
    InputError,
    NonConvergenceError,
    PreconditionError,
    ResourceError,
)
from .mixture import ClassFlag, Density, Mixture, mixture_values

log = logging.getLogger("mixdense.constructive")


# ── Types ──────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Partition:
    """Axis-aligned cells of edge δ/√n tiling k𝕂; the last cell per axis is clipped."""

    scaled_set: Box
    lower: np.ndarray  # (m, n)
    upper: np.ndarray  # (m, n)
    delta: float

    @property
    def m(self) -> int:
        return len(self.lower)

    @property
    def reps(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def max_diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower, axis=1).max())


@dataclass
class ConstructionTrace:
    mode: str
    f: str
    g: str
    epsilon: float
    r: float | None = None
    k: float | None = None
    delta: float | None = None
    m: int = 0
    remainder_weight: float = 0.0
    measured_errors: NormReport | None = None
    certificate: str = ""
    tail_bound: float | None = None
    conv_error: float | None = None
    gamma: float | None = None
    pointwise_max: float | None = None
    measure_fraction: float | None = None
    wall_ms: float = 0.0

    COLUMNS = ("f", "g", "mode", "epsilon", "r", "k", "delta", "m", "remainder_weight",
               "l1", "l2", "linf", "kl")

    def to_row(self) -> dict[str, object]:
        errs = self.measured_errors
        row = {
            "f": self.f,
            "g": self.g,
            "mode": self.mode,
            "epsilon": self.epsilon,
            "r": "" if self.r is None else self.r,
            "k": "" if self.k is None else self.k,
            "delta": "" if self.delta is None else self.delta,
            "m": self.m,
            "remainder_weight": self.remainder_weight,
        }
        for col in ("l1", "l2", "linf", "kl"):
            value = None if errs is None else getattr(errs, col)
            row[col] = "" if value is None else value
        return row


@dataclass
class Construction:
    mixture: Mixture
    trace: ConstructionTrace


@dataclass(frozen=True)
class Truncation:
    r: int
    truncated: Density
    tail: float


def _check_deadline(deadline: float | None, stage: str, trace: ConstructionTrace) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise BudgetExceeded(f"wall-clock budget exhausted during {stage}", partial=trace)


# ── Truncation and cutoff ──────────────────────────────

def _ball_restriction(f: Density, r: float) -> Density:
    def fn(pts: np.ndarray) -> np.ndarray:
        inside = np.linalg.norm(pts, axis=1) <= r
        out = np.zeros(len(pts))
        if inside.any():
            out[inside] = f.eval(pts[inside])
        return out

    flags = {ClassFlag.IN_CB} & f.flags
    ball_box = Box.cube(r, f.dim)
    return f.derive(
        name=f"1[|x|<={r:g}]{f.name}",
        fn=fn,
        support_radius=r if f.support_radius is None else min(r, f.support_radius),
        flags=frozenset(flags),
        v_params=None,
        quantile=None,
        box=(ball_box.lower, ball_box.upper),
    )


def ball_mass(f: Density, r: float, grid: QuadratureGrid) -> float:
    """∫_{B̄_r} f on a grid over [−r, r]^n with ``grid``'s spacing."""
    local = grid.with_box(Box.cube(r, f.dim))
    total = 0.0
    for block in local.chunks():
        inside = np.linalg.norm(block, axis=1) <= r
        if inside.any():
            total += float(np.sum(f.eval(block[inside])))
    return total * local.cell_volume


def truncate_to_ball(f: Density, epsilon: float, grid: QuadratureGrid) -> Truncation:
    """Smallest integer r ≤ 64 whose tail mass outside B̄_r is at most ``epsilon``."""
    if not f.is_pdf:
        raise PreconditionError(f"{f.name} is not flagged as a pdf")
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    for r in range(1, MAX_RADIUS + 1):
        if f.support_radius is not None and f.support_radius <= r:
            tail = 0.0
        else:
            tail = max(0.0, 1.0 - ball_mass(f, r, grid))
        log.debug("truncate %s r=%d tail=%.4g", f.name, r, tail)
        if tail <= epsilon:
            return Truncation(r=r, truncated=_ball_restriction(f, r), tail=tail)
    raise NonConvergenceError(
        f"tail mass of {f.name} stays above {epsilon:g} up to r={MAX_RADIUS}; density tail too heavy for the box"
    )


def cutoff_radius(f: Density, epsilon: float, grid: QuadratureGrid) -> float:
    """Smallest R on the half-integer ladder with grid-sup of |f| outside B̄_R below ε/2."""
    norms = np.linalg.norm(grid.nodes(), axis=1)
    values = np.abs(grid.values(f))
    reach = float(norms.max())
    R = 0.5
    while R < reach or (f.support_radius is not None and R <= f.support_radius):
        tail = values[norms > R]
        if not tail.size or float(tail.max()) < epsilon / 2:
            return R
        R += 0.5
    raise NonConvergenceError(
        f"cutoff radius for {f.name} at epsilon={epsilon:g} runs past the grid box {grid.box.describe()}"
    )


def compact_cutoff(f: Density, epsilon: float, grid: QuadratureGrid) -> Density:
    """
    h = ψ·f with ψ = 1 on B̄_R, 0 outside B̄_{R+1}, linear in between.

    0 ≤ h ≤ f everywhere and the grid-sup of f − h stays below ε/2.
    """
    if not f.has(ClassFlag.IN_C0):
        raise PreconditionError(f"{f.name} is not flagged in_C0")
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    R = cutoff_radius(f, epsilon, grid)

    def fn(pts: np.ndarray) -> np.ndarray:
        psi = np.clip(R + 1.0 - np.linalg.norm(pts, axis=1), 0.0, 1.0)
        out = np.zeros(len(pts))
        live = psi > 0
        if live.any():
            out[live] = psi[live] * f.eval(pts[live])
        return out

    support = R + 1.0 if f.support_radius is None else min(R + 1.0, f.support_radius)
    log.debug("cutoff %s at R=%g (support %g)", f.name, R, support)
    return Density(
        name=f"cutoff[R={R:g}]{f.name}",
        dim=f.dim,
        fn=fn,
        support_radius=support,
        sup_bound=f.sup_bound,
        flags=frozenset({ClassFlag.IN_C0, ClassFlag.IN_CC, ClassFlag.IN_CB}),
    )


# ── Partition ──────────────────────────────────────────

def _cells_per_axis(box: Box, delta: float) -> list[int]:
    edge = delta / math.sqrt(box.dim)
    return [max(1, int(math.ceil(float(length) / edge - 1e-12))) for length in box.lengths]


def cell_count(box: Box, delta: float) -> int:
    return math.prod(_cells_per_axis(box, delta))


def build_partition(K_box: Box, k: float, delta: float, max_cells: int = MAX_CELLS) -> Partition:
    """Regular grid of edge δ/√n over k·K_box; every cell has diameter at most δ."""
    if not delta > 0:
        raise InputError(f"delta must be positive, got {delta}")
    if not k > 0:
        raise InputError(f"dilation level must be positive, got {k}")
    scaled = K_box.scaled(k)
    counts = _cells_per_axis(scaled, delta)
    total = math.prod(counts)
    if total > max_cells:
        raise ResourceError(f"partition of {scaled.describe()} at delta={delta:g} needs {total} cells (cap {max_cells})")
    edge = delta / math.sqrt(scaled.dim)
    lows, highs = [], []
    for lo, hi, c in zip(scaled.lower, scaled.upper, counts):
        starts = lo + edge * np.arange(c)
        lows.append(starts)
        highs.append(np.minimum(starts + edge, hi))
    lo_mesh = np.meshgrid(*lows, indexing="ij")
    hi_mesh = np.meshgrid(*highs, indexing="ij")
    lower = np.stack([a.reshape(-1) for a in lo_mesh], axis=1)
    upper = np.stack([a.reshape(-1) for a in hi_mesh], axis=1)
    return Partition(scaled_set=scaled, lower=lower, upper=upper, delta=float(delta))


def delta_ladder(scaled: Box, max_cells: int = MAX_CELLS) -> Iterator[float]:
    """
    Halvings of diam(k𝕂) while the cell cap allows, then one rung at the
    finest δ the cap admits.
    """
    delta = scaled.diameter
    last = None
    while cell_count(scaled, delta) <= max_cells:
        yield delta
        last = delta
        delta /= 2
    per_axis = int(math.floor(max_cells ** (1.0 / scaled.dim) + 1e-9))
    finest = float(scaled.lengths.max()) / per_axis * math.sqrt(scaled.dim) * (1 + 1e-9)
    if (last is None or finest < last) and cell_count(scaled, finest) <= max_cells:
        yield finest


# ── Riemann-sum mixture ────────────────────────────────

def _sub_offsets(dim: int, q: int) -> np.ndarray:
    t = (np.arange(q) + 0.5) / q
    mesh = np.meshgrid(*([t] * dim), indexing="ij")
    return np.stack([a.reshape(-1) for a in mesh], axis=1)


def cell_weights(h: Density, k: float, part: Partition, q: int = CELL_QUAD_POINTS) -> np.ndarray:
    """c_i = ∫_{A_i/k} h dλ with a q^n-point midpoint rule inside each cell."""
    lower = part.lower / k
    width = (part.upper - part.lower) / k
    offsets = _sub_offsets(h.dim, q)
    vols = np.prod(width, axis=1)
    out = np.empty(part.m)
    block = max(1, EVAL_CHUNK // len(offsets))
    for start in range(0, part.m, block):
        lo, w = lower[start:start + block], width[start:start + block]
        pts = lo[:, None, :] + offsets[None, :, :] * w[:, None, :]
        vals = h.eval(pts.reshape(-1, h.dim)).reshape(len(lo), len(offsets))
        out[start:start + block] = vals.mean(axis=1) * vols[start:start + block]
    worst = float(out.min()) if out.size else 0.0
    if worst < -NEGATIVE_WEIGHT_TOL:
        raise ConstructionError(f"cell weight {worst:.3g} is negative; the integrand must be nonnegative")
    return np.maximum(out, 0.0)


@dataclass(frozen=True, eq=False)
class _Body:
    weights: np.ndarray
    locations: np.ndarray
    k: float
    remainder: float

    def values(self, g: Density, points: np.ndarray) -> np.ndarray:
        live = self.weights > 0
        scales = np.full(int(live.sum()), 1.0 / self.k)
        return mixture_values(g, self.weights[live], self.locations[live], scales, points)


def _body(h: Density, k: float, part: Partition) -> _Body:
    c = cell_weights(h, k, part)
    total = math.fsum(c.tolist())
    if total > 1.0 + MASS_EXCESS_TOL:
        raise ConstructionError(f"cell weights sum to {total:.9g}, above the unit mass of a pdf")
    remainder = 1.0 - total
    if remainder < ZERO_WEIGHT:
        if total > 0:
            c = c / total
        remainder = 0.0
    return _Body(weights=c, locations=part.reps / k, k=k, remainder=remainder)


def _assemble(g: Density, body: _Body, part: Partition, epsilon: float) -> Mixture:
    n = g.dim
    if body.remainder == 0.0:
        return Mixture(g, body.weights, body.locations, np.full(part.m, 1.0 / body.k))
    if g.sup_bound is None:
        raise PreconditionError(f"kernel {g.name} has no sup_bound; the remainder scale needs one")
    # σ_m^{-n} c_m C = ε/2
    scale = (2.0 * body.remainder * g.sup_bound / epsilon) ** (1.0 / n)
    z_m = part.reps[-1] / body.k
    return Mixture(
        g,
        np.append(body.weights, body.remainder),
        np.vstack([body.locations, z_m[None, :]]),
        np.append(np.full(part.m, 1.0 / body.k), scale),
    )


def riemann_mixture(
    h: Density,
    g: Density,
    k: float,
    part: Partition,
    epsilon: float,
    grid: QuadratureGrid,
) -> Construction:
    """
    One component per cell with weight ∫_{A_i/k} h, location z_i/k, scale
    1/k, plus a remainder component carrying 1 − Σc_i whose sup contribution
    is ε/2.
    """
    if not g.is_pdf:
        raise PreconditionError(f"kernel {g.name} is not flagged as a pdf")
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    body = _body(h, k, part)
    mix = _assemble(g, body, part, epsilon)
    mv = mixture_values(g, mix.weights, mix.locations, mix.scales, grid.nodes())
    trace = ConstructionTrace(
        mode="riemann",
        f=h.name,
        g=g.name,
        epsilon=epsilon,
        k=k,
        delta=part.delta,
        m=mix.m,
        remainder_weight=body.remainder,
        measured_errors=report_from_values(grid.values(h), mv, grid, with_kl=False),
    )
    return Construction(mix, trace)


# ── Shared search steps ────────────────────────────────

def _dilation_ladder(limit: int) -> Iterator[int]:
    k = 1
    while k <= limit:
        yield k
        k *= 2


def _kernel_modulus(g: Density, delta: float) -> float:
    """w(g, δ) on a local grid at least 8 nodes per δ; inf when δ is below the resolvable spacing."""
    radius = 8.0 if g.box is None else float(max(max(abs(v) for v in g.box[0]), max(abs(v) for v in g.box[1])))
    radius = min(radius, 64.0)
    cap = 1 << 14 if g.dim == 1 else 1024
    ppa = int(np.clip(math.ceil(2.0 * radius * 8.0 / delta), 64, cap))
    local = QuadratureGrid.cube(radius, ppa, g.dim)
    if delta < float(local.spacing.max()):
        return math.inf
    return modulus_of_continuity(g, delta, local)


def _search_k(
    g: Density,
    h: Density,
    nodes: np.ndarray,
    grid: QuadratureGrid,
    target: np.ndarray,
    within: float,
    norm: float,
    limit: int,
    trace: ConstructionTrace,
    deadline: float | None,
    start: int = 1,
) -> tuple[int, np.ndarray, float]:
    """First power-of-two k ≥ start with ‖g_k⋆h − target‖ below ``within`` on ``nodes``."""
    vol = grid.cell_volume
    last = math.inf
    for k in _dilation_ladder(limit):
        if k < start:
            continue
        _check_deadline(deadline, "k search", trace)
        conv, scheme = convolve_on_nodes(g, k, h, nodes, grid)
        err = lp_from_values(conv - target, norm, vol)
        log.debug("k=%d %s conv error %.4g (scheme %s)", k, "sup" if math.isinf(norm) else f"L{norm:g}", err, scheme)
        last = err
        if err < within:
            return k, conv, err
    trace.conv_error = last
    raise NonConvergenceError(
        f"convolution error {last:.4g} still above {within:.4g} at k={limit}", partial=trace
    )


def _search_delta(
    h: Density,
    g: Density,
    k: float,
    K_box: Box,
    nodes: np.ndarray,
    conv: np.ndarray,
    within: float,
    norm: float,
    cell_volume: float,
    trace: ConstructionTrace,
    deadline: float | None,
    analytic: bool = True,
) -> tuple[Partition, _Body]:
    """Walk the δ ladder until the body is within ``within`` of g_k⋆h (or the modulus bound certifies it)."""
    n = h.dim
    measured = math.inf
    overshoot: ConstructionError | None = None
    for delta in delta_ladder(K_box.scaled(k)):
        _check_deadline(deadline, "delta search", trace)
        part = build_partition(K_box, k, delta)
        try:
            body = _body(h, k, part)
        except ConstructionError as exc:
            # coarse cells can overshoot the mass of a kinked integrand
            log.debug("delta=%.4g skipped: %s", delta, exc)
            overshoot = exc
            continue
        overshoot = None
        if analytic:
            bound = _kernel_modulus(g, delta) * k**n
            if bound < within:
                trace.certificate = "modulus"
                trace.delta = delta
                return part, body
        measured = lp_from_values(body.values(g, nodes) - conv, norm, cell_volume)
        log.debug("delta=%.4g cells=%d body error %.4g", delta, part.m, measured)
        if measured < within:
            trace.certificate = "measured"
            trace.delta = delta
            return part, body
    trace.k = k
    if overshoot is not None:
        raise overshoot
    raise NonConvergenceError(
        f"Riemann body error {measured:.4g} still above {within:.4g} at the finest delta the cell cap allows",
        partial=trace,
    )


def _measure(
    trace: ConstructionTrace,
    f: Density,
    mix: Mixture,
    grid: QuadratureGrid,
    p: float = 2.0,
    seed: int = 0,
) -> None:
    nodes = grid.nodes()
    fv = grid.values(f)
    mv = mixture_values(mix.kernel, mix.weights, mix.locations, mix.scales, nodes)
    trace.measured_errors = report_from_values(fv, mv, grid, p=p, with_kl=True)
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(grid.box.lower), np.asarray(grid.box.upper)
    probes = lo + (hi - lo) * rng.random((POINTWISE_SAMPLES, grid.dim))
    pv = mixture_values(mix.kernel, mix.weights, mix.locations, mix.scales, probes)
    trace.pointwise_max = float(np.max(np.abs(f.eval(probes) - pv)))
    trace.measure_fraction = float(np.mean(np.abs(fv - mv) >= MEASURE_THRESHOLD))


def _finish(trace: ConstructionTrace, mix: Mixture, body: _Body, started: float) -> None:
    trace.m = mix.m
    trace.remainder_weight = body.remainder
    trace.wall_ms = (time.perf_counter() - started) * 1000.0


def _require_pdf(g: Density, role: str) -> None:
    if not g.is_pdf:
        raise PreconditionError(f"{role} {g.name} is not flagged as a pdf")


def _require_epsilon(epsilon: float) -> None:
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise InputError(f"epsilon must be a positive real, got {epsilon}")


# ── Pipelines ──────────────────────────────────────────

def uniform_approximate(
    f: Density,
    g: Density,
    epsilon: float,
    grid: QuadratureGrid,
    deadline: float | None = None,
    seed: int = 0,
) -> Construction:
    """
    Sup-norm approximation of a C0 density.

    Budget: cutoff ε/4, convolution ε/4, Riemann body ε/8, remainder ε/8.
    """
    _require_epsilon(epsilon)
    _require_pdf(f, "target")
    _require_pdf(g, "kernel")
    if not (f.has(ClassFlag.IN_C0) and g.has(ClassFlag.IN_C0)):
        raise PreconditionError("uniform approximation needs target and kernel flagged in_C0")
    started = time.perf_counter()
    trace = ConstructionTrace(mode="uniform", f=f.name, g=g.name, epsilon=epsilon)

    h = compact_cutoff(f, epsilon / 2, grid)
    trace.r = h.support_radius
    nodes = grid.nodes()
    hv = grid.values(h)
    k, conv, err = _search_k(g, h, nodes, grid, hv, epsilon / 4, math.inf, MAX_K, trace, deadline)
    trace.k, trace.conv_error = k, err

    K_box = Box.cube(h.support_radius, f.dim)
    part, body = _search_delta(h, g, k, K_box, nodes, conv, epsilon / 8, math.inf, grid.cell_volume, trace, deadline)
    mix = _assemble(g, body, part, epsilon / 4)
    _measure(trace, f, mix, grid, seed=seed)
    _finish(trace, mix, body, started)
    log.info(
        "uniform %s with %s: eps=%g k=%d delta=%.4g m=%d linf=%.4g",
        f.name, g.name, epsilon, k, trace.delta, mix.m, trace.measured_errors.linf,
    )
    return Construction(mix, trace)


def compact_uniform_approximate(
    f: Density,
    g: Density,
    K_box: Box,
    epsilon: float,
    grid: QuadratureGrid,
    deadline: float | None = None,
) -> Construction:
    """
    Sup-norm approximation of a bounded continuous density on the compact set K_box.

    Budget: convolution ε/3, truncation ε/3, Riemann body ε/6, remainder ε/6.
    Errors outside K_box are not controlled.
    """
    _require_epsilon(epsilon)
    _require_pdf(f, "target")
    _require_pdf(g, "kernel")
    if not f.has(ClassFlag.IN_CB):
        raise PreconditionError(f"{f.name} is not flagged in_Cb")
    if g.sup_bound is None:
        raise PreconditionError(f"kernel {g.name} has no sup_bound")
    if K_box.dim != f.dim:
        raise InputError(f"compact set has dimension {K_box.dim}, target has {f.dim}")
    started = time.perf_counter()
    trace = ConstructionTrace(mode="compact", f=f.name, g=g.name, epsilon=epsilon)

    on_k = grid.with_box(K_box)
    nodes = on_k.nodes()
    fv = on_k.values(f)
    k, conv_f, err = _search_k(g, f, nodes, grid, fv, epsilon / 3, math.inf, MAX_K, trace, deadline)
    trace.k, trace.conv_error = k, err

    n = f.dim
    r = None
    for radius in range(1, MAX_RADIUS + 1):
        _check_deadline(deadline, "radius search", trace)
        outside = f.derive(fn=lambda pts, rr=radius: np.where(np.linalg.norm(pts, axis=1) > rr, f.fn(pts), 0.0))
        if f.support_radius is not None and f.support_radius <= radius:
            leak = 0.0
            analytic = 0.0
        else:
            analytic = k**n * g.sup_bound * max(0.0, 1.0 - ball_mass(f, radius, grid))
            leak = analytic if analytic <= epsilon / 3 else lp_from_values(
                convolve_on_nodes(g, k, outside, nodes, grid)[0], math.inf, 1.0
            )
        log.debug("compact radius r=%d analytic %.4g leak %.4g", radius, analytic, leak)
        if leak < epsilon / 3:
            r, trace.tail_bound = radius, analytic
            break
    if r is None:
        raise NonConvergenceError(f"truncation leak stays above {epsilon / 3:.4g} up to r={MAX_RADIUS}", partial=trace)
    trace.r = r

    h = _ball_restriction(f, r)
    conv_h, _ = convolve_on_nodes(g, k, h, nodes, grid)
    part, body = _search_delta(
        h, g, k, Box.cube(r, n), nodes, conv_h, epsilon / 6, math.inf, on_k.cell_volume, trace, deadline,
        analytic=g.has(ClassFlag.IN_C0) or g.has(ClassFlag.IN_CC),
    )
    mix = _assemble(g, body, part, epsilon / 3)
    _measure(trace, f, mix, on_k)
    _finish(trace, mix, body, started)
    log.info(
        "compact %s with %s on %s: eps=%g k=%d r=%d m=%d linf=%.4g",
        f.name, g.name, K_box.describe(), epsilon, k, r, mix.m, trace.measured_errors.linf,
    )
    return Construction(mix, trace)


def l1_tail_bound(sup_on_k: float, volume: float, beta: float, theta: float, dim: int, k: float, gamma: float) -> float:
    """‖f1_𝕂‖∞ · λ(𝕂) · βA_n k^{θ(γ−1)}/θ, the mass a V-class kernel leaks past the k^{−γ} collar."""
    return sup_on_k * volume * beta * unit_sphere_area(dim) * k ** (theta * (gamma - 1.0)) / theta


def l1_approximate(
    f: Density,
    g: Density,
    epsilon: float,
    grid: QuadratureGrid,
    gamma: float = DEFAULT_GAMMA,
    deadline: float | None = None,
) -> Construction:
    """
    L1 approximation with a kernel of class V.

    Budget: truncation ε/24, collar leak ε/24, convolution ε/4, body plus
    remainder mass below ε/2.
    """
    _require_epsilon(epsilon)
    _require_pdf(f, "target")
    _require_pdf(g, "kernel")
    if not 0.0 < gamma < 1.0:
        raise InputError(f"gamma must lie in (0, 1), got {gamma}")
    if g.v_params is None:
        raise PreconditionError(f"kernel {g.name} has no class-V parameters (beta, theta)")
    if f.sup_bound is None:
        raise PreconditionError(f"target {f.name} has no sup_bound")
    started = time.perf_counter()
    trace = ConstructionTrace(mode="l1", f=f.name, g=g.name, epsilon=epsilon, gamma=gamma)

    cut = truncate_to_ball(f, epsilon / 24, grid)
    h, r, n = cut.truncated, cut.r, f.dim
    trace.r = r
    beta, theta = g.v_params
    volume = ball_volume(n, r)

    k_tail = None
    for k in _dilation_ladder(MAX_K_L1):
        bound = l1_tail_bound(f.sup_bound, volume, beta, theta, n, k, gamma)
        if bound < epsilon / 24:
            k_tail, trace.tail_bound = k, bound
            break
    if k_tail is None:
        raise NonConvergenceError(f"collar leak bound stays above {epsilon / 24:.4g} at k={MAX_K_L1}", partial=trace)

    nodes = grid.nodes()
    hv = grid.values(h)
    k, conv, err = _search_k(g, h, nodes, grid, hv, epsilon / 4, 1, MAX_K_L1, trace, deadline, start=k_tail)
    trace.k, trace.conv_error = k, err
    trace.tail_bound = l1_tail_bound(f.sup_bound, volume, beta, theta, n, k, gamma)

    # body is compared with h itself; the remainder mass c_m ≈ tail takes the last ε/24 of ε/2
    part, body = _search_delta(
        h, g, k, Box.cube(r, n), nodes, hv, epsilon / 2 - epsilon / 24, 1, grid.cell_volume, trace, deadline,
        analytic=False,
    )
    mix = _assemble(g, body, part, epsilon)
    _measure(trace, f, mix, grid, p=1.0)
    _finish(trace, mix, body, started)
    log.info(
        "l1 %s with %s: eps=%g r=%d k=%d m=%d l1=%.4g tail_bound=%.3g",
        f.name, g.name, epsilon, r, k, mix.m, trace.measured_errors.l1, trace.tail_bound,
    )
    return Construction(mix, trace)
