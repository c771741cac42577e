"""Greedy convex fitting in L_p over a dictionary of dilates with one shared scale."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gamma as gamma_fn

from .analysis import Box, QuadratureGrid, convolve_on_nodes, convolved_density, lp_from_values
from .config import EVAL_CHUNK, GREEDY_STOP, LINE_SEARCH_TOL, MAX_K_SMOOTHING
from .errors import InputError, NonConvergenceError, PreconditionError, ResourceError
from .mixture import Density, Mixture, mixture_values

log = logging.getLogger("mixdense.greedy")


def donahue_constant(p: float) -> float:
    """C_p = 1 for 1 ≤ p ≤ 2, else √2 [√π Γ((p+1)/2)]^{1/p}."""
    if not p >= 1:
        raise InputError(f"p must be at least 1, got {p}")
    if math.isinf(p):
        raise InputError("p must be finite")
    if p <= 2:
        return 1.0
    return math.sqrt(2.0) * (math.sqrt(math.pi) * float(gamma_fn((p + 1) / 2))) ** (1.0 / p)


def rate_exponent(p: float) -> float:
    """1 − 1/α with α = min{p, 2}."""
    return 1.0 - 1.0 / min(p, 2.0)


# ── Dictionary ─────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class DictionarySpec:
    """The atoms x ↦ k^n g(k(x − μ)) for μ in a finite candidate set."""

    kernel: Density
    k: float
    candidate_locations: np.ndarray  # (M, n)
    spacing: float | None = None

    def __post_init__(self):
        if not self.k > 0:
            raise InputError(f"dilation level must be positive, got {self.k}")
        locs = np.asarray(self.candidate_locations, dtype=float)
        if locs.ndim == 1:
            locs = locs.reshape(-1, 1) if self.kernel.dim == 1 else locs.reshape(1, -1)
        if not len(locs):
            raise InputError("dictionary has no candidate locations")
        if locs.shape[1] != self.kernel.dim:
            raise InputError(f"candidate locations have dimension {locs.shape[1]}, kernel {self.kernel.dim}")
        object.__setattr__(self, "candidate_locations", locs)

    @classmethod
    def on_grid(cls, kernel: Density, k: float, box: Box, points_per_axis: int) -> DictionarySpec:
        """Endpoint-inclusive tensor grid of candidate locations over ``box``."""
        if points_per_axis < 1:
            raise InputError(f"points_per_axis must be positive, got {points_per_axis}")
        axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in zip(box.lower, box.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        locs = np.stack([a.reshape(-1) for a in mesh], axis=1)
        spacing = float(box.lengths.max()) / max(points_per_axis - 1, 1)
        return cls(kernel=kernel, k=float(k), candidate_locations=locs, spacing=spacing)

    @property
    def size(self) -> int:
        return len(self.candidate_locations)

    def tabulate(self, grid: QuadratureGrid) -> np.ndarray:
        """Atom values on the grid nodes, shape (M, N)."""
        nodes = grid.nodes()
        M, N, n = self.size, len(nodes), self.kernel.dim
        if M * N > 16 * EVAL_CHUNK:
            raise ResourceError(f"dictionary of {M} atoms on {N} nodes is too large to tabulate")
        out = np.empty((M, N))
        scale = self.k**n
        block = max(1, EVAL_CHUNK // N)
        for start in range(0, M, block):
            mu = self.candidate_locations[start:start + block]
            u = (nodes[None, :, :] - mu[:, None, :]) * self.k
            out[start:start + block] = scale * self.kernel.eval(u.reshape(-1, n)).reshape(len(mu), N)
        return out


# ── Trace ──────────────────────────────────────────────

@dataclass(frozen=True)
class GreedyStep:
    m: int
    mu: tuple[float, ...]
    step_size: float
    error: float


@dataclass
class GreedyTrace:
    p: float
    k: float
    K_bound: float
    C_p: float
    alpha: float
    steps: list[GreedyStep] = field(default_factory=list)

    @property
    def errors(self) -> list[float]:
        return [s.error for s in self.steps]

    def slope(self, m_lo: int = 4, m_hi: int = 64) -> float:
        """Least-squares slope of log error against log m over [m_lo, m_hi]; nan with fewer than two points."""
        pts = [(s.m, s.error) for s in self.steps if m_lo <= s.m <= m_hi and s.error > 0]
        if len(pts) < 2:
            return math.nan
        ms, errs = zip(*pts)
        slope, _ = np.polyfit(np.log(ms), np.log(errs), 1)
        return float(slope)

    def rows(self) -> list[dict[str, object]]:
        out: list[dict[str, object]] = [
            {"step": s.m, "mu": " ".join(f"{v:.12g}" for v in s.mu), "step_size": s.step_size, "lp_error": s.error}
            for s in self.steps
        ]
        out.append({"step": "footer", "mu": f"K={self.K_bound:.12g}", "step_size": f"C_p={self.C_p:.12g}",
                    "lp_error": f"alpha={self.alpha:g}"})
        return out


@dataclass
class GreedyFit:
    mixture: Mixture
    trace: GreedyTrace


# ── Greedy ─────────────────────────────────────────────

def _kernel_lp_norm(g: Density, p: float) -> float:
    if g.box is not None:
        box = Box.from_pair(g.box)
        if float(box.lengths.max()) > 200.0:
            box = Box.cube(100.0, g.dim)
    else:
        box = Box.cube(10.0, g.dim)
    ppa = 1 << 16 if g.dim == 1 else 512
    local = QuadratureGrid(box, ppa)
    return float(sum(float(np.sum(np.abs(g.eval(b)) ** p)) for b in local.chunks()) * local.cell_volume) ** (1.0 / p)


def k_bound(g: Density, k: float, p: float, target_norm: float) -> float:
    """K = ‖g_k‖_p + ‖target‖_p, with ‖g_k‖_p = k^{n(1−1/p)}‖g‖_p."""
    return k ** (g.dim * (1.0 - 1.0 / p)) * _kernel_lp_norm(g, p) + target_norm


def _line_search(cur: np.ndarray, atom: np.ndarray, tv: np.ndarray, p: float, vol: float) -> tuple[float, float]:
    def objective(lam: float) -> float:
        return lp_from_values((1.0 - lam) * cur + lam * atom - tv, p, vol)

    res = minimize_scalar(objective, bounds=(0.0, 1.0), method="bounded", options={"xatol": LINE_SEARCH_TOL})
    best = (float(objective(0.0)), 0.0)
    for lam in (float(res.x), 1.0):
        err = float(objective(lam))
        if err < best[0]:
            best = (err, lam)
    return best[1], best[0]


def greedy_convex_fit(
    f: Density,
    dictionary: DictionarySpec,
    p: float,
    m_max: int,
    grid: QuadratureGrid,
    target_values: np.ndarray | None = None,
) -> GreedyFit:
    """
    m-term convex combination of dictionary atoms fitted to f in L_p on the grid.

    Each step scans every candidate in index order, line-searches the step
    size in [0, 1], and keeps the lowest error (lowest index on ties).
    Stops early once the error drops to 1e-8.
    """
    if m_max < 1:
        raise InputError(f"m_max must be positive, got {m_max}")
    if not (p >= 1 and math.isfinite(p)):
        raise InputError(f"p must lie in [1, inf), got {p}")
    g = dictionary.kernel
    if not g.is_pdf:
        raise PreconditionError(f"kernel {g.name} is not flagged as a pdf")
    vol = grid.cell_volume
    tv = grid.values(f) if target_values is None else np.asarray(target_values, dtype=float)
    atoms = dictionary.tabulate(grid)

    trace = GreedyTrace(
        p=p,
        k=dictionary.k,
        K_bound=k_bound(g, dictionary.k, p, lp_from_values(tv, p, vol)),
        C_p=donahue_constant(p),
        alpha=min(p, 2.0),
    )

    if p == 2:
        first = np.sqrt(np.maximum(np.sum((atoms - tv[None, :]) ** 2, axis=1) * vol, 0.0))
    else:
        first = np.array([lp_from_values(a - tv, p, vol) for a in atoms])
    j = int(np.argmin(first))
    cur = atoms[j].copy()
    weights = np.zeros(dictionary.size)
    weights[j] = 1.0
    err = float(first[j])
    trace.steps.append(GreedyStep(1, tuple(dictionary.candidate_locations[j]), 1.0, err))

    for m in range(2, m_max + 1):
        if err <= GREEDY_STOP:
            break
        if p == 2:
            r = tv - cur
            d = atoms - cur[None, :]
            a = (d @ r) * vol
            b = np.sum(d * d, axis=1) * vol
            lam = np.where(b > 0, np.clip(np.divide(a, b, out=np.zeros_like(a), where=b > 0), 0.0, 1.0), 0.0)
            sq = float(np.sum(r * r) * vol) - 2.0 * lam * a + lam * lam * b
            errs = np.sqrt(np.maximum(sq, 0.0))
            j = int(np.argmin(errs))
            step, new_err = float(lam[j]), float(errs[j])
        else:
            results = [_line_search(cur, atom, tv, p, vol) for atom in atoms]
            j = int(np.argmin([e for _, e in results]))
            step, new_err = results[j]
        if new_err > err:
            step, new_err = 0.0, err
        cur = (1.0 - step) * cur + step * atoms[j]
        weights *= 1.0 - step
        weights[j] += step
        err = new_err
        trace.steps.append(GreedyStep(m, tuple(dictionary.candidate_locations[j]), step, err))
        log.debug("greedy step m=%d mu=%s step=%.4g err=%.5g", m, dictionary.candidate_locations[j], step, err)

    used = weights > 0
    w = weights[used] / math.fsum(weights[used].tolist())
    mix = Mixture(
        g,
        w,
        dictionary.candidate_locations[used],
        np.full(int(used.sum()), 1.0 / dictionary.k),
        meta={"k": dictionary.k, "steps": len(trace.steps)},
    )
    log.info("greedy fit %s: p=%g k=%g steps=%d error=%.4g", f.name, p, dictionary.k, len(trace.steps), err)
    return GreedyFit(mix, trace)


# ── Smoothing and rate ─────────────────────────────────

@dataclass(frozen=True, eq=False)
class Smoothing:
    k: int
    error: float
    target: Density
    values: np.ndarray


def target_smoothing(
    f: Density,
    g: Density,
    epsilon: float,
    grid: QuadratureGrid,
    p: float = 2.0,
    ks: Sequence[int] | None = None,
) -> Smoothing:
    """Smallest power-of-two k with ‖f − g_k⋆f‖_p < ε/2 on the grid."""
    if not g.is_pdf:
        raise PreconditionError(f"kernel {g.name} is not flagged as a pdf")
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    nodes = grid.nodes()
    fv = grid.values(f)
    ladder = ks or [1 << i for i in range(int(math.log2(MAX_K_SMOOTHING)) + 1)]
    err = math.inf
    for k in ladder:
        conv, scheme = convolve_on_nodes(g, k, f, nodes, grid)
        err = lp_from_values(fv - conv, p, grid.cell_volume)
        log.debug("smoothing %s k=%d L%g error %.4g (%s)", f.name, k, p, err, scheme)
        if err < epsilon / 2:
            return Smoothing(k=k, error=err, target=convolved_density(g, k, f, grid), values=conv)
    raise NonConvergenceError(f"smoothing error {err:.4g} still at least {epsilon / 2:.4g} at k={ladder[-1]}")


@dataclass(frozen=True)
class RateCheck:
    holds: bool
    worst_ratio: float


def rate_bound_check(trace: GreedyTrace, p: float) -> RateCheck:
    """error(m) ≤ C_p K m^{−(1−1/α)} at every recorded step."""
    exponent = rate_exponent(p)
    scale = trace.C_p * trace.K_bound
    if not trace.steps:
        return RateCheck(True, 0.0)
    ratios = [s.error * s.m**exponent / scale for s in trace.steps]
    worst = max(ratios)
    return RateCheck(holds=worst <= 1.0, worst_ratio=worst)


@dataclass
class LpRun:
    smoothing: Smoothing
    fit: GreedyFit
    rate: RateCheck
    total_error: float


def lp_approximate(
    f: Density,
    g: Density,
    epsilon: float,
    p: float,
    m_max: int,
    grid: QuadratureGrid,
    candidates_per_axis: int = 257,
    candidate_box: Box | None = None,
    k: int | None = None,
) -> LpRun:
    """Smooth the target, fit the smoothed values greedily, and measure against the unsmoothed target."""
    if k is None:
        smooth = target_smoothing(f, g, epsilon, grid, p)
    else:
        smooth = target_smoothing(f, g, math.inf, grid, p, ks=[k])
    box = candidate_box or grid.box
    dictionary = DictionarySpec.on_grid(g, smooth.k, box, candidates_per_axis)
    fit = greedy_convex_fit(smooth.target, dictionary, p, m_max, grid, target_values=smooth.values)
    mix = fit.mixture
    mv = mixture_values(g, mix.weights, mix.locations, mix.scales, grid.nodes())
    total = lp_from_values(grid.values(f) - mv, p, grid.cell_volume)
    return LpRun(smoothing=smooth, fit=fit, rate=rate_bound_check(fit.trace, p), total_error=total)
