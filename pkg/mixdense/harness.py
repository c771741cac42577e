"""
Batch harness: TOML run configs in, CSV tables and a JSON summary out.

A run config has a ``[run]`` table (mode, target, kernel, schedule, output)
and a ``[grid]`` table. A suite file lists run configs under
``[suite] runs = [...]`` and names a combined ``output``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import tomllib
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .analysis import Box, QuadratureGrid
from .classes import (
    V_SWEEP,
    bump_mass,
    catalog_by_name,
    check_c0_tail,
    check_class_V,
    class_report,
    counterexample_eval,
    counterexample_l1,
    counterexample_peaks,
    wiener_divergence,
)
from .config import MEASURE_THRESHOLD, RESULTS_DIR, WALL_BUDGET_S, WORKERS
from .constructive import (
    Construction,
    ConstructionTrace,
    compact_uniform_approximate,
    l1_approximate,
    uniform_approximate,
)
from .errors import ConfigError, MixdenseError, NonConvergenceError
from .greedy import lp_approximate
from .mixture import Density, validate_mixture

log = logging.getLogger("mixdense.harness")


class Mode(StrEnum):
    UNIFORM = "uniform"
    COMPACT = "compact"
    LP = "lp"
    L1 = "l1"
    CLASSES = "classes"


CONSTRUCTION_COLUMNS = (*ConstructionTrace.COLUMNS, "pass", "status")
LP_COLUMNS = ("step", "mu", "step_size", "lp_error", "rate_bound", "pass")
CLASSES_COLUMNS = ("kind", "i", "x", "value", "expected", "pass")
SUITE_COLUMNS = ("run", "mode", "entry", "measured", "bound", "pass")


# ── Config ─────────────────────────────────────────────

@dataclass
class RunConfig:
    name: str
    mode: Mode
    target: str
    kernel: str
    grid: QuadratureGrid
    epsilon_schedule: list[float] = field(default_factory=list)
    m_schedule: list[int] = field(default_factory=list)
    p: float | None = None
    K_box: Box | None = None
    gamma: float = 0.5
    seed: int = 0
    output_path: Path | None = None
    workers: int = WORKERS
    wall_budget_s: float = WALL_BUDGET_S
    k: int | None = None
    candidates: int = 257
    candidate_radius: float | None = None
    slope_max: float | None = None

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        run = data.get("run")
        if not isinstance(run, dict):
            raise ConfigError("config needs a [run] table")
        try:
            mode = Mode(run.get("mode", ""))
        except ValueError:
            raise ConfigError(f"unknown mode {run.get('mode')!r} (expected one of {', '.join(Mode)})") from None

        table = catalog_by_name()
        target = run.get("target", "counterexample" if mode == Mode.CLASSES else None)
        kernel = run.get("kernel", "normal")
        for role, name in (("target", target), ("kernel", kernel)):
            if name not in table:
                raise ConfigError(f"unknown {role} density {name!r}")
        dim = table[target].dim

        epsilons = [float(e) for e in _as_list(run.get("epsilon", []))]
        ms = [int(m) for m in _as_list(run.get("m", []))]
        if any(not e > 0 for e in epsilons):
            raise ConfigError("epsilon values must be positive")
        if mode in (Mode.UNIFORM, Mode.COMPACT, Mode.L1) and not epsilons:
            raise ConfigError(f"mode {mode} needs an epsilon schedule")
        p = run.get("p")
        if mode == Mode.LP:
            if p is None:
                raise ConfigError("mode lp needs p")
            if not ms:
                raise ConfigError("mode lp needs an m schedule")
            if run.get("k") is None and not epsilons:
                raise ConfigError("mode lp needs either k or epsilon for target smoothing")
        K_box = None
        if mode == Mode.COMPACT:
            if "box" not in run:
                raise ConfigError("mode compact needs box = [[lower...], [upper...]]")
            K_box = _box(run["box"])
        if mode == Mode.L1 and table[kernel].v_params is None:
            raise ConfigError(f"mode l1 needs a kernel with class-V parameters; {kernel} has none")
        gamma = float(run.get("gamma", 0.5))
        if not 0 < gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")

        output = run.get("output")
        return cls(
            name=str(run.get("name", f"{mode}-{target}")),
            mode=mode,
            target=target,
            kernel=kernel,
            grid=_grid(data.get("grid", {}), dim),
            epsilon_schedule=epsilons,
            m_schedule=ms,
            p=None if p is None else float(p),
            K_box=K_box,
            gamma=gamma,
            seed=int(run.get("seed", 0)),
            output_path=None if output is None else _resolve_output(output),
            workers=int(run.get("workers", WORKERS)),
            wall_budget_s=float(run.get("wall_budget_s", WALL_BUDGET_S)),
            k=None if run.get("k") is None else int(run["k"]),
            candidates=int(run.get("candidates", 257)),
            candidate_radius=None if run.get("candidate_radius") is None else float(run["candidate_radius"]),
            slope_max=None if run.get("slope_max") is None else float(run["slope_max"]),
        )


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _box(value) -> Box:
    try:
        lower, upper = value
        return Box(tuple(float(v) for v in _as_list(lower)), tuple(float(v) for v in _as_list(upper)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad box {value!r}: {exc}") from None


def _grid(table: dict, dim: int) -> QuadratureGrid:
    ppa = int(table.get("points_per_axis", 1024 if dim == 1 else 128))
    try:
        if "lower" in table or "upper" in table:
            box = _box([table.get("lower"), table.get("upper")])
        else:
            box = Box.cube(float(table.get("radius", 8.0)), dim)
        if box.dim != dim:
            raise ConfigError(f"grid box has dimension {box.dim}, target has {dim}")
        return QuadratureGrid(box, ppa)
    except MixdenseError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad grid: {exc}") from None


def _resolve_output(value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else RESULTS_DIR / path


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}")
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_dict(data)


# ── Reports ────────────────────────────────────────────

@dataclass
class ApproxReport:
    name: str
    mode: Mode
    columns: tuple[str, ...]
    rows: list[dict[str, object]] = field(default_factory=list)
    suite_rows: list[dict[str, object]] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)
    extras: dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.rows) and all(r.get("pass") in (True, "") for r in self.rows)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def summary(self) -> dict[str, object]:
        return {
            "name": self.name,
            "mode": str(self.mode),
            "passed": self.passed,
            "rows": len(self.rows),
            "wall_ms": [round(w, 3) for w in self.wall_ms],
            **self.extras,
        }

    def write(self, path: Path) -> None:
        write_csv(path, self.columns, self.rows)
        path.with_suffix(".json").write_text(json.dumps(self.summary(), indent=2) + "\n", encoding="utf-8")
        log.info("wrote %s (%d rows)", path, len(self.rows))


def write_csv(path: Path, columns: tuple[str, ...], rows: list[dict[str, object]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


# ── Modes ──────────────────────────────────────────────

def _construction_row(trace: ConstructionTrace, passed: bool, status: str) -> dict[str, object]:
    return {**trace.to_row(), "pass": passed, "status": status}


def _run_construction(config: RunConfig, f: Density, g: Density) -> ApproxReport:
    report = ApproxReport(config.name, config.mode, CONSTRUCTION_COLUMNS)

    def one(epsilon: float) -> tuple[ConstructionTrace, bool, str, float]:
        started = time.perf_counter()
        deadline = time.monotonic() + config.wall_budget_s
        try:
            built = _pipeline(config, f, g, epsilon, deadline)
        except NonConvergenceError as exc:
            log.warning("%s eps=%g did not converge: %s", config.name, epsilon, exc)
            trace = exc.partial if isinstance(exc.partial, ConstructionTrace) else ConstructionTrace(
                mode=str(config.mode), f=f.name, g=g.name, epsilon=epsilon
            )
            return trace, False, "nonconvergence", (time.perf_counter() - started) * 1000.0
        return built.trace, _construction_pass(config.mode, built), "ok", built.trace.wall_ms

    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        results = list(pool.map(one, config.epsilon_schedule))

    for trace, passed, status, wall in results:
        report.rows.append(_construction_row(trace, passed, status))
        report.wall_ms.append(wall)
        measured = _headline(config.mode, trace)
        report.suite_rows.append({
            "entry": f"eps={trace.epsilon:g}", "measured": "" if measured is None else measured,
            "bound": trace.epsilon, "pass": passed,
        })
        if config.mode == Mode.UNIFORM and trace.pointwise_max is not None:
            report.extras.setdefault("pointwise_max", []).append(trace.pointwise_max)
            report.extras.setdefault("measure_fraction", []).append(trace.measure_fraction)
    return report


def _pipeline(config: RunConfig, f: Density, g: Density, epsilon: float, deadline: float) -> Construction:
    if config.mode == Mode.UNIFORM:
        return uniform_approximate(f, g, epsilon, config.grid, deadline=deadline, seed=config.seed)
    if config.mode == Mode.COMPACT:
        return compact_uniform_approximate(f, g, config.K_box, epsilon, config.grid, deadline=deadline)
    return l1_approximate(f, g, epsilon, config.grid, gamma=config.gamma, deadline=deadline)


def _headline(mode: Mode, trace: ConstructionTrace) -> float | None:
    if trace.measured_errors is None:
        return None
    return trace.measured_errors.l1 if mode == Mode.L1 else trace.measured_errors.linf


def _pointwise_pass(trace: ConstructionTrace) -> bool:
    """Sampled |f − h| within ε, and no grid node at or above the measure threshold once ε reaches it."""
    if trace.pointwise_max is None or trace.pointwise_max > trace.epsilon:
        return False
    return trace.epsilon > MEASURE_THRESHOLD or trace.measure_fraction == 0.0


def _construction_pass(mode: Mode, built: Construction) -> bool:
    trace = built.trace
    if validate_mixture(built.mixture):
        return False
    if mode == Mode.L1 and not (trace.tail_bound is not None and trace.tail_bound <= trace.epsilon / 24):
        return False
    if mode == Mode.UNIFORM and not _pointwise_pass(trace):
        return False
    measured = _headline(mode, trace)
    return measured is not None and measured <= trace.epsilon


def _run_lp(config: RunConfig, f: Density, g: Density) -> ApproxReport:
    report = ApproxReport(config.name, config.mode, LP_COLUMNS)
    epsilon = config.epsilon_schedule[0] if config.epsilon_schedule else math.inf
    box = config.grid.box if config.candidate_radius is None else Box.cube(config.candidate_radius, f.dim)
    started = time.perf_counter()
    try:
        result = lp_approximate(
            f, g, epsilon, config.p, max(config.m_schedule), config.grid,
            candidates_per_axis=config.candidates, candidate_box=box, k=config.k,
        )
    except NonConvergenceError as exc:
        log.warning("%s did not converge: %s", config.name, exc)
        report.rows.append({"step": "failed", "mu": str(exc), "pass": False})
        report.wall_ms.append((time.perf_counter() - started) * 1000.0)
        return report
    report.wall_ms.append((time.perf_counter() - started) * 1000.0)

    trace = result.fit.trace
    scale = trace.C_p * trace.K_bound
    exponent = 1.0 - 1.0 / trace.alpha
    rows = trace.rows()
    for row, step in zip(rows, trace.steps):
        bound = scale * step.m ** (-exponent)
        row["rate_bound"] = bound
        row["pass"] = step.error <= bound
    rows[-1]["rate_bound"] = ""
    rows[-1]["pass"] = ""
    report.rows.extend(rows)

    slope = trace.slope()
    slope_ok = config.slope_max is None or (not math.isnan(slope) and slope <= config.slope_max)
    total_ok = math.isinf(epsilon) or result.total_error <= epsilon
    if not (slope_ok and total_ok):
        report.rows.append({"step": "checks", "mu": f"slope={slope:.6g}", "step_size": f"total={result.total_error:.6g}",
                            "pass": False})
    report.extras.update(
        k=result.smoothing.k,
        smoothing_error=result.smoothing.error,
        total_error=result.total_error,
        slope=slope,
        worst_ratio=result.rate.worst_ratio,
    )
    report.suite_rows.append({
        "entry": f"m={len(trace.steps)}", "measured": trace.errors[-1],
        "bound": scale * len(trace.steps) ** (-exponent), "pass": report.passed,
    })
    return report


def _row(kind: str, i, x, value, expected, passed: bool) -> dict[str, object]:
    return {"kind": kind, "i": i, "x": x, "value": value, "expected": expected, "pass": bool(passed)}


def counterexample_rows(peaks: int = 100, wiener_n: int = 100_000) -> list[dict[str, object]]:
    """The counterexample battery: peaks, bump masses, L1 total, continuity, tails, V sweep, divergence."""
    rows = []
    for peak in counterexample_peaks(peaks):
        rows.append(_row("peak", peak.i, peak.x, peak.value, 1.0 / peak.i, peak.value == 1.0 / peak.i))
    for i in range(1, 11):
        exact = float(bump_mass(i))
        mass, _ = quad(counterexample_eval, i - 1, i, points=[i - 0.5], epsabs=1e-14, epsrel=1e-12)
        rows.append(_row("bump_mass", i, "", mass, exact, abs(mass - exact) < 1e-10))
    l1 = counterexample_l1(1e-5)
    oracle = 2.0 * (1.0 - math.log(2.0))
    rows.append(_row("l1_total", l1.terms, "", l1.value, oracle, abs(l1.value - oracle) < 1e-4))
    knots = np.arange(0, 41) * 0.5
    left = counterexample_eval(knots - 1e-7)
    right = counterexample_eval(knots + 1e-7)
    for x, residual in zip(knots, np.abs(left - right)):
        rows.append(_row("continuity", "", float(x), float(residual), 0.0, residual < 1e-9))
    g = catalog_by_name()["counterexample"]
    for radius, sup in check_c0_tail(g, [10, 20, 50]):
        expected = 1.0 / (math.floor(radius) + 1)
        rows.append(_row("c0_tail", "", radius, sup, expected, abs(sup - expected) < 1e-3))
    for beta, theta in V_SWEEP:
        check = check_class_V(g, beta, theta, [10, 100, 1000, 5000])
        x = "" if check.first_violation is None else check.first_violation[0]
        rows.append(_row("class_V", f"beta={beta:g},theta={theta:g}", x, check.holds_on_samples, False,
                         not check.holds_on_samples))
    witness = wiener_divergence(wiener_n)
    rows.append(_row("wiener_slope", wiener_n, "", witness.slope, 1.0, abs(witness.slope - 1.0) < 0.05))
    expected = 1.0 + float(np.euler_gamma) / math.log(wiener_n)
    rows.append(_row("wiener_ratio", wiener_n, "", witness.ratio, expected, abs(witness.ratio - expected) < 1e-4))
    return rows


def _run_classes(config: RunConfig, f: Density) -> ApproxReport:
    report = ApproxReport(config.name, config.mode, CLASSES_COLUMNS)
    started = time.perf_counter()
    if f.name == "counterexample":
        report.rows.extend(counterexample_rows())
    else:
        cr = class_report(f)
        for radius, sup in cr.c0_tail:
            report.rows.append(_row("c0_tail", "", radius, sup, "", sup >= 0))
        for check in cr.v_check:
            x = "" if check.first_violation is None else check.first_violation[0]
            report.rows.append(_row("class_V", f"beta={check.beta:g},theta={check.theta:g}", x,
                                    check.holds_on_samples, "", True))
        for n, s in enumerate(cr.wiener_partial_sums):
            report.rows.append(_row("wiener_partial", n, "", s, "", True))
    report.wall_ms.append((time.perf_counter() - started) * 1000.0)
    for row in report.rows:
        report.suite_rows.append({"entry": f"{row['kind']}:{row['i']}", "measured": row["value"],
                                  "bound": row["expected"], "pass": row["pass"]})
    return report


# ── Entry points ───────────────────────────────────────

MODES: dict[Mode, Callable[[RunConfig, Density, Density], ApproxReport]] = {
    Mode.UNIFORM: _run_construction,
    Mode.COMPACT: _run_construction,
    Mode.L1: _run_construction,
    Mode.LP: _run_lp,
    Mode.CLASSES: lambda config, f, g: _run_classes(config, f),
}


def run(config: RunConfig) -> ApproxReport:
    """Execute one config; writes CSV and JSON summary when an output path is set."""
    table = catalog_by_name()
    f, g = table[config.target], table[config.kernel]
    log.info("run %s: mode=%s target=%s kernel=%s grid=%s", config.name, config.mode, f.name, g.name,
             config.grid.descriptor())
    report = MODES[config.mode](config, f, g)
    if config.output_path is not None:
        report.write(config.output_path)
    log.info("run %s: %s", config.name, "pass" if report.passed else "FAIL")
    return report


@dataclass
class SuiteReport:
    reports: list[ApproxReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    @property
    def pass_count(self) -> int:
        return sum(r.passed for r in self.reports)

    def rows(self) -> list[dict[str, object]]:
        return [
            {"run": r.name, "mode": str(r.mode), **row}
            for r in self.reports
            for row in r.suite_rows
        ]


def load_suite(suite_path: Path) -> tuple[list[RunConfig], Path | None]:
    suite_path = Path(suite_path)
    if not suite_path.exists():
        raise ConfigError(f"suite not found: {suite_path}")
    try:
        with open(suite_path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{suite_path}: {exc}") from None
    suite = data.get("suite", {})
    runs = suite.get("runs", [])
    if not runs:
        raise ConfigError(f"suite {suite_path} lists no runs")
    configs = [load_config(suite_path.parent / r) for r in runs]
    output = suite.get("output")
    return configs, None if output is None else _resolve_output(output)


def run_suite(suite_path: Path) -> SuiteReport:
    """Run every config a suite lists; all configs are validated before the first run starts."""
    configs, output = load_suite(suite_path)
    report = SuiteReport([run(c) for c in configs])
    if output is not None:
        write_csv(output, SUITE_COLUMNS, report.rows())
        log.info("suite %s: %d/%d runs pass", suite_path, report.pass_count, len(report.reports))
    return report
