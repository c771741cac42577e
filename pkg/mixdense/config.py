"""Constants, tolerances, caps, and paths."""

from __future__ import annotations

import os
from pathlib import Path

from dotenv import load_dotenv

# ── Paths ──────────────────────────────────────────────
ROOT = Path(__file__).resolve().parent.parent
ENV_PATH = ROOT / ".env"
DEFAULT_CONFIG = ROOT / "config.toml"
CONFIGS_DIR = ROOT / "configs"

load_dotenv(ENV_PATH)

RESULTS_DIR = Path(os.environ.get("MIXDENSE_RESULTS_DIR", str(ROOT / "results")))
LOG_LEVEL = os.environ.get("MIXDENSE_LOG_LEVEL", "INFO")

# ── Mixtures ───────────────────────────────────────────
SIMPLEX_TOL = 1e-12
ZERO_WEIGHT = 1e-14
NEGATIVE_WEIGHT_TOL = 1e-12
MASS_EXCESS_TOL = 1e-3  # cell-quadrature overshoot renormalized below this
EVAL_CHUNK = 1 << 22  # point-component pairs per evaluation block

# ── Quadrature ─────────────────────────────────────────
MAX_GRID_NODES = 1 << 24
NODE_CHUNK = 1 << 16
KL_FLOOR = 1e-300
RESOLVE_FACTOR = 0.5  # k * spacing above this → kernel under-resolved
QUANTILE_NODES = {1: 4096, 2: 96, 3: 24}
YOUNG_SLACK = 1e-4

# ── Constructive pipelines ─────────────────────────────
MAX_CELLS = 10**6
MAX_K = 256
MAX_K_L1 = 1 << 20
MAX_RADIUS = 64
CELL_QUAD_POINTS = 4
DEFAULT_GAMMA = 0.5

# ── Greedy ─────────────────────────────────────────────
MAX_K_SMOOTHING = 4096
LINE_SEARCH_TOL = 1e-10
GREEDY_STOP = 1e-8

# ── Harness ────────────────────────────────────────────
WALL_BUDGET_S = float(os.environ.get("MIXDENSE_WALL_BUDGET_S", "120"))
WORKERS = int(os.environ.get("MIXDENSE_WORKERS", "1"))
POINTWISE_SAMPLES = 100
MEASURE_THRESHOLD = 0.05
