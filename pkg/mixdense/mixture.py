"""Densities, location-scale mixtures, and mixture evaluation."""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np

from .config import EVAL_CHUNK, SIMPLEX_TOL
from .errors import InputError, InvariantViolation

log = logging.getLogger("mixdense.mixture")

BoxPair = tuple[tuple[float, ...], tuple[float, ...]]


class ClassFlag(StrEnum):
    IS_PDF = "is_pdf"
    IN_C0 = "in_C0"
    IN_CC = "in_Cc"
    IN_CB = "in_Cb"


def as_points(x: object, dim: int) -> np.ndarray:
    """
    Coerce ``x`` to an ``(N, dim)`` float array.

    A 1-D array is a column of scalars when ``dim == 1`` and a single point
    otherwise.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InputError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr


@dataclass(frozen=True, eq=False)
class Density:
    """
    An evaluable nonnegative function on R^n with its class metadata.

    ``fn`` receives an ``(N, dim)`` array and returns ``(N,)`` values.
    ``quantile`` is the per-axis inverse CDF of a product density; when
    present, convolutions with narrow dilates of this density can be taken
    in quantile space.
    """

    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    support_radius: float | None = None
    sup_bound: float | None = None
    flags: frozenset[ClassFlag] = frozenset()
    v_params: tuple[float, float] | None = None
    box: BoxPair | None = None
    quantile: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise InputError(f"density dimension must be positive, got {self.dim}")
        object.__setattr__(self, "flags", frozenset(ClassFlag(f) for f in self.flags))

    def eval(self, points: object) -> np.ndarray:
        pts = as_points(points, self.dim)
        return np.asarray(self.fn(pts), dtype=float).reshape(len(pts))

    def __call__(self, x: object) -> float | np.ndarray:
        values = self.eval(x)
        return float(values[0]) if np.ndim(x) <= (0 if self.dim == 1 else 1) else values

    def has(self, flag: ClassFlag) -> bool:
        return flag in self.flags

    @property
    def is_pdf(self) -> bool:
        return ClassFlag.IS_PDF in self.flags

    def derive(self, **changes) -> Density:
        return replace(self, **changes)


def zero_density(dim: int = 1) -> Density:
    return Density(
        name="zero",
        dim=dim,
        fn=lambda pts: np.zeros(len(pts)),
        support_radius=0.0,
        sup_bound=0.0,
        flags=frozenset({ClassFlag.IN_C0, ClassFlag.IN_CC, ClassFlag.IN_CB}),
    )


# ── Mixtures ───────────────────────────────────────────

@dataclass(frozen=True)
class Component:
    weight: float
    location: tuple[float, ...]
    scale: float


@dataclass(frozen=True)
class Violation:
    invariant: str
    index: int | None  # 1-based component index
    detail: str


@dataclass(frozen=True, eq=False)
class Mixture:
    """
    Element of M_m^g: x ↦ Σ c_i σ_i^{-n} g((x − μ_i)/σ_i).

    Components with weight exactly 0 are dropped at construction. Other
    invariants are not enforced here; see :func:`validate_mixture`.
    """

    kernel: Density
    weights: np.ndarray
    locations: np.ndarray
    scales: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.kernel.dim
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        s = np.asarray(self.scales, dtype=float).reshape(-1)
        loc = np.asarray(self.locations, dtype=float)
        if loc.size != len(w) * n or len(s) != len(w):
            raise InputError(
                f"component arrays disagree: {len(w)} weights, {len(s)} scales, "
                f"locations of shape {loc.shape} for dimension {n}"
            )
        loc = loc.reshape(len(w), n)
        keep = w != 0.0
        if not keep.all():
            w, s, loc = w[keep], s[keep], loc[keep]
        for name, arr in (("weights", w), ("scales", s), ("locations", loc)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_components(cls, kernel: Density, components: Iterable[Component]) -> Mixture:
        comps = list(components)
        return cls(
            kernel=kernel,
            weights=[c.weight for c in comps],
            locations=np.array([c.location for c in comps], dtype=float).reshape(len(comps), kernel.dim),
            scales=[c.scale for c in comps],
        )

    @classmethod
    def from_dilations(
        cls,
        kernel: Density,
        weights: object,
        z: object,
        k: object,
        **meta,
    ) -> Mixture:
        """Build from the (c, z, k) parameterization: μ = z/k, σ = 1/k."""
        w = np.asarray(weights, dtype=float).reshape(-1)
        kk = np.broadcast_to(np.asarray(k, dtype=float), w.shape)
        if np.any(kk <= 0):
            raise InputError("dilation levels must be positive")
        zz = np.asarray(z, dtype=float).reshape(len(w), kernel.dim)
        return cls(kernel=kernel, weights=w, locations=zz / kk[:, None], scales=1.0 / kk, meta=meta)

    @property
    def m(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def components(self) -> list[Component]:
        return [
            Component(float(c), tuple(float(v) for v in mu), float(s))
            for c, mu, s in zip(self.weights, self.locations, self.scales)
        ]

    def weight_sum(self) -> float:
        return math.fsum(self.weights.tolist())

    def sup_bound(self) -> float | None:
        if self.kernel.sup_bound is None:
            return None
        n = self.dim
        return float(np.sum(self.weights * self.scales ** (-n))) * self.kernel.sup_bound

    def as_density(self, name: str | None = None) -> Density:
        flags = set(self.kernel.flags)
        if not validate_mixture(self):
            flags.add(ClassFlag.IS_PDF)
        else:
            flags.discard(ClassFlag.IS_PDF)
        support = None
        if self.kernel.support_radius is not None and self.m:
            reach = np.linalg.norm(self.locations, axis=1) + self.scales * self.kernel.support_radius
            support = float(reach.max())
        return Density(
            name=name or f"mixture[{self.kernel.name}, m={self.m}]",
            dim=self.dim,
            fn=lambda pts: mixture_values(self.kernel, self.weights, self.locations, self.scales, pts),
            support_radius=support,
            sup_bound=self.sup_bound(),
            flags=frozenset(flags),
        )


def mixture_values(
    kernel: Density,
    weights: np.ndarray,
    locations: np.ndarray,
    scales: np.ndarray,
    points: np.ndarray,
) -> np.ndarray:
    """Unchecked Σ c_i σ_i^{-n} g((x − μ_i)/σ_i) over an ``(N, n)`` point array."""
    pts = as_points(points, kernel.dim)
    n = kernel.dim
    m = len(weights)
    out = np.zeros(len(pts))
    if m == 0:
        return out
    coef = np.asarray(weights, dtype=float) * np.asarray(scales, dtype=float) ** (-n)
    inv = 1.0 / np.asarray(scales, dtype=float)
    block = max(1, EVAL_CHUNK // m)
    for start in range(0, len(pts), block):
        chunk = pts[start:start + block]
        u = (chunk[:, None, :] - locations[None, :, :]) * inv[None, :, None]
        vals = kernel.eval(u.reshape(-1, n)).reshape(len(chunk), m)
        out[start:start + block] = np.sum(vals * coef[None, :], axis=1)
    return out


def evaluate_mixture(mix: Mixture, x: object) -> float | np.ndarray:
    """Evaluate a validated mixture at one point or an array of points."""
    pts = as_points(x, mix.dim)
    violations = validate_mixture(mix)
    if violations:
        raise InvariantViolation("; ".join(v.detail for v in violations))
    values = mixture_values(mix.kernel, mix.weights, mix.locations, mix.scales, pts)
    single = np.ndim(x) <= (0 if mix.dim == 1 else 1)
    return float(values[0]) if single else values


def dilate_component(g: Density, k: float, z: object = None) -> Density:
    """The density x ↦ k^n g(kx − z)."""
    if not g.is_pdf:
        raise InputError(f"{g.name} is not flagged as a pdf")
    if not k > 0:
        raise InputError(f"dilation level must be positive, got {k}")
    n = g.dim
    zz = np.zeros(n) if z is None else np.asarray(z, dtype=float).reshape(n)
    scale = float(k) ** n

    def fn(pts: np.ndarray) -> np.ndarray:
        return scale * g.eval(k * pts - zz[None, :])

    quantile = None
    if g.quantile is not None:
        base_q = g.quantile

        def quantile(u: np.ndarray) -> np.ndarray:
            return (base_q(u) + zz[None, :]) / k

    support = None
    if g.support_radius is not None:
        support = (float(np.linalg.norm(zz)) + g.support_radius) / k
    return Density(
        name=f"{g.name}@k={k:g}",
        dim=n,
        fn=fn,
        support_radius=support,
        sup_bound=None if g.sup_bound is None else scale * g.sup_bound,
        flags=g.flags,
        quantile=quantile,
    )


def validate_mixture(mix: Mixture) -> list[Violation]:
    """Report every failed invariant; never raises."""
    found: list[Violation] = []
    if mix.m == 0:
        found.append(Violation("nonempty", None, "mixture has no components"))
        return found
    total = mix.weight_sum()
    if not abs(total - 1.0) <= SIMPLEX_TOL:
        found.append(Violation("weight_sum", None, f"weight sum = {total:.12g}"))
    for i, (c, s) in enumerate(zip(mix.weights, mix.scales), start=1):
        if not np.isfinite(c) or c < 0:
            found.append(Violation("nonnegative_weight", i, f"negative weight {c:.6g} at index {i}"))
        if not np.isfinite(s) or s <= 0:
            found.append(Violation("positive_scale", i, f"nonpositive scale at index {i}"))
    bad = ~np.all(np.isfinite(mix.locations), axis=1)
    for i in np.flatnonzero(bad):
        found.append(Violation("finite_location", int(i) + 1, f"non-finite location at index {i + 1}"))
    return found


# ── Serialization ──────────────────────────────────────

def mixture_to_json(mix: Mixture) -> str:
    payload = {
        "kernel": mix.kernel.name,
        "components": [
            {"c": c.weight, "mu": list(c.location), "sigma": c.scale}
            for c in mix.components()
        ],
    }
    return json.dumps(payload, indent=2)


def mixture_from_json(text: str, kernels: Mapping[str, Density]) -> Mixture:
    data = json.loads(text)
    name = data.get("kernel")
    if name not in kernels:
        raise InputError(f"unknown kernel: {name}")
    kernel = kernels[name]
    comps = [
        Component(float(c["c"]), tuple(float(v) for v in c["mu"]), float(c["sigma"]))
        for c in data.get("components", [])
    ]
    return Mixture.from_components(kernel, comps)
