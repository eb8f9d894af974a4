"""Lagrange dual of estrangement-constrained modularity maximization.

``g(lam) = max_P Q(P) - lam*(E(P) - delta)`` is estimated by the best of
several hierarchical label-propagation runs and minimized over
``[lambda_min, lambda_max]`` with bounded Brent search.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .brent import brent_minimize
from .graph import Partition, SnapshotGraph
from .lpa import ConvergenceError, RunConfig, prepare
from .quality import HistoryWeights, estrangement, modularity

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    lambda_min: float = 0.0
    lambda_max: float = 10.0
    xtol: float = 1e-2
    initial_runs: int = 10
    run_increment: int = 10
    max_runs: int = 200
    final_runs: int = 150
    inflation: float = 0.1
    max_inflation_steps: int = 50
    seed: int = 0
    max_sweeps: int = 1000
    level_eps: float = 1e-10

    def __post_init__(self):
        if not 0 <= self.lambda_min < self.lambda_max:
            raise ValueError("need 0 <= lambda_min < lambda_max")
        if min(self.initial_runs, self.max_runs, self.final_runs) < 1:
            raise ValueError("run counts must be positive")
        if self.xtol <= 0 or self.inflation <= 0:
            raise ValueError("xtol and inflation must be positive")


@dataclass
class DualEvaluation:
    lam: float
    g_value: float
    best_partition: np.ndarray = field(repr=False)
    best_Q: float
    best_E: float
    runs_used: int


@dataclass
class DualSolveResult:
    lambda_star: float
    final_lambda: float
    partition: np.ndarray = field(repr=False)
    Q: float
    E: float
    trace: list = field(default_factory=list, repr=False)
    feasibility_fallback_used: bool = False


def derive_seed(base_seed: int, lam: float, run: int) -> int:
    """64-bit run seed from the base seed, the bit pattern of ``lam`` and the run index."""
    key = struct.pack("<QdQ", base_seed & 0xFFFFFFFFFFFFFFFF, float(lam), run)
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def evaluate_dual(
    lam: float,
    g: SnapshotGraph,
    z: HistoryWeights,
    delta: float,
    n_runs: int,
    base_seed: int,
    cfg: SolverConfig = SolverConfig(),
    problem=None,
    init: Partition | None = None,
) -> DualEvaluation:
    """Best-of-``n_runs`` estimate of ``g(lam)``; seeds for runs ``0..n_runs-1`` are a fixed prefix."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if problem is None:
        problem = prepare(g, z)
    lam = float(lam)
    best_labels, best_obj = None, -np.inf
    for r in range(n_runs):
        labels, obj, _, ok = problem.hlpa(
            lam, derive_seed(base_seed, lam, r), cfg.max_sweeps, cfg.level_eps, init
        )
        if not ok:
            raise ConvergenceError(f"hlpa run {r} at lambda={lam} did not converge", labels)
        if obj > best_obj:
            best_labels, best_obj = labels, obj
    q = modularity(g, best_labels)
    e = estrangement(g, z, best_labels)
    return DualEvaluation(lam, q - lam * e + lam * delta, best_labels, q, e, n_runs)


def fallback_partition(z: HistoryWeights, prev_labels: np.ndarray | None = None) -> np.ndarray:
    """A zero-estrangement partition.

    With ``prev_labels`` (previous labels per current node, ``-1`` for new
    nodes) shared nodes keep their previous labels and new nodes become
    singletons. Without it, connected components of the positive-``Z`` pairs.
    """
    n = z.n
    if prev_labels is None:
        _, comp = connected_components(z.matrix, directed=False)
        return comp.astype(np.int64)
    prev = np.asarray(prev_labels, dtype=np.int64)
    out = prev.copy()
    fresh = (prev.max() + 1) if (prev >= 0).any() else 0
    for i in range(n):
        if out[i] < 0:
            out[i] = fresh
            fresh += 1
    return out


def solve_dual(
    g: SnapshotGraph,
    z: HistoryWeights,
    delta: float,
    cfg: SolverConfig = SolverConfig(),
    prev_labels: np.ndarray | None = None,
    base_seed: int | None = None,
    init: Partition | None = None,
) -> DualSolveResult:
    """Minimize the estimated dual, then push ``lambda`` up until the winner is feasible."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    seed = cfg.seed if base_seed is None else base_seed
    problem = prepare(g, z)
    trace: list[DualEvaluation] = []

    def evaluate(lam: float, runs: int) -> DualEvaluation:
        ev = evaluate_dual(lam, g, z, delta, runs, seed, cfg, problem, init)
        trace.append(ev)
        return ev

    if z.is_empty():
        # E is identically zero, so g is nondecreasing and minimized at lambda_min
        ev = evaluate(cfg.lambda_min, cfg.final_runs)
        return DualSolveResult(ev.lam, ev.lam, ev.best_partition, ev.best_Q, ev.best_E, trace)

    runs = cfg.initial_runs
    memo: dict[float, DualEvaluation] = {}

    def dual(lam: float) -> float:
        if lam not in memo:
            memo[lam] = evaluate(lam, runs)
        return memo[lam].g_value

    def narrowed(a: float, b: float) -> None:
        nonlocal runs
        runs = min(runs + cfg.run_increment, cfg.max_runs)

    res = brent_minimize(dual, cfg.lambda_min, cfg.lambda_max, xtol=cfg.xtol, on_narrow=narrowed)
    lam_star = res.x
    best = evaluate(lam_star, max(cfg.final_runs, runs))
    final_lam = lam_star

    step = 0
    base = max(lam_star, cfg.xtol)
    while best.best_E > delta + FEASIBILITY_TOL and step < cfg.max_inflation_steps:
        if final_lam >= cfg.lambda_max:
            break
        step += 1
        final_lam = min(base * (1.0 + cfg.inflation) ** step, cfg.lambda_max)
        best = evaluate(final_lam, max(cfg.final_runs, runs))

    if best.best_E <= delta + FEASIBILITY_TOL:
        return DualSolveResult(lam_star, final_lam, best.best_partition, best.best_Q, best.best_E, trace)

    log.info("no feasible partition up to lambda=%.4g; copying previous labels", final_lam)
    part = fallback_partition(z, prev_labels)
    return DualSolveResult(
        lam_star,
        final_lam,
        part,
        modularity(g, part),
        estrangement(g, z, part),
        trace,
        feasibility_fallback_used=True,
    )
