"""Figure-style experiments: fixed-point sweeps and spread-over-time curves.

Each grid cell gets its own generator ``child_rng(master, stream, cell)`` so
results do not depend on how cells are scheduled across workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import mfa
from .coupling import initial_states
from .dynamics import EpidemicParams, Graphs, simulate_batch, step_batch, paths_from_batch
from .errors import ParameterError
from .graph import Graph, rewire_social, spectral_radius
from .metrics import endemic_fraction
from .rng import as_generator, child_rng, child_seed

STREAM_GRAPH = 0
STREAM_SOCIAL = 1
STREAM_FIG3 = 2
STREAM_FIG4 = 3
STREAM_SIM = 4
STREAM_COUPLE = 5

DEFAULT_FIG4_CELLS = ((1.0, 0.0), (1.0, 0.95), (0.5, 0.0), (0.0, 0.0))


def worker_count() -> int:
    raw = os.environ.get("EPISIS_THREADS")
    if raw:
        try:
            k = int(raw)
        except ValueError:
            raise ParameterError(f"EPISIS_THREADS must be an integer, got {raw!r}") from None
        return max(1, k)
    return os.cpu_count() or 1


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` on a thread pool; results keep input order."""
    items = list(items)
    threads = worker_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --- fixed-point sweep ----------------------------------------------------------

def default_ratios(lam: float, points: int = 25, stretch: float = 1.25) -> np.ndarray:
    """``points`` evenly spaced recovery/transmission ratios in ``(0, stretch * lam]``."""
    return lam * stretch * np.arange(1, points + 1) / points


def auto_beta(ratios) -> float:
    """Transmission probability keeping ``delta = ratio * beta`` below 0.9 across the grid."""
    return 0.9 / float(np.max(ratios))


def stochastic_endemic_level(graphs: Graphs, params: EpidemicParams, kind: str, horizon: int,
                             replicas: int, rng) -> tuple[float, float]:
    """Mean latter-half infected fraction over runs started from all nodes infected, with its standard error.

    The standard error is ``nan`` for a single replica.
    """
    init = np.ones((replicas, graphs.n), dtype=bool)
    batch = simulate_batch(init, graphs, params, kind, horizon, rng)
    levels = np.array([endemic_fraction(p) for p in paths_from_batch(batch, horizon, kind)])
    se = float(levels.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.nan
    return float(levels.mean()), se


def fig3_sweep(graphs: Graphs, alpha: float, rewire_p: float, ratios, beta: float | None = None,
               horizon: int = 200, replicas: int = 1, master_seed: int = 0,
               tol: float = mfa.FIXED_POINT_TOL, max_iter: int = mfa.FIXED_POINT_MAX_ITER,
               threads: int | None = None) -> list[dict]:
    """One row per (ratio, map) with the fixed point from ``0.5 * ones`` and a stochastic level."""
    ratios = [float(r) for r in ratios]
    beta = auto_beta(ratios) if beta is None else beta
    cells = [(k, r, which) for k, r in enumerate(ratios) for which in ("psi", "phi")]

    def run(cell):
        k, r, which = cell
        params = EpidemicParams(beta, r * beta, alpha)
        rep = mfa.iterate_fixed_point(which, graphs, params, tol=tol, max_iter=max_iter)
        kind = "benchmark" if which == "psi" else "distancing"
        rng = child_rng(master_seed, STREAM_FIG3, 2 * k + (which == "phi"))
        level, level_se = stochastic_endemic_level(graphs, params, kind, horizon, replicas, rng)
        return {
            "delta_over_beta": r,
            "alpha": alpha,
            "rewire_p": rewire_p,
            "map": which,
            "converged": rep.converged,
            "iterations": rep.iterations,
            "norm1_over_n": rep.norm1_over_n,
            "min_component": float(rep.point.min()),
            "max_component": float(rep.point.max()),
            "stochastic_fraction": level,
            "stochastic_stderr": level_se,
            "beta": beta,
            "delta": params.delta,
        }

    return ordered_map(run, cells, threads)


# --- spread curves -------------------------------------------------------------------

def spread_curves(graphs: Graphs, params: EpidemicParams, horizon: int, replicas: int, rng,
                  kind: str = "distancing", init="one-random") -> np.ndarray:
    """Ever-infected counts for ``t = 0..horizon``, one row per replica.

    Replicas that are absorbed stop drawing uniforms; their counts stay frozen.
    """
    rng = as_generator(rng)
    S = initial_states(init, graphs.n, replicas, rng)
    ever = S.copy()
    out = np.zeros((replicas, horizon + 1), dtype=np.int64)
    out[:, 0] = ever.sum(axis=1)
    active = np.flatnonzero(S.any(axis=1))
    cur = S[active]
    for t in range(1, horizon + 1):
        if len(active):
            cur = step_batch(cur, graphs, params, kind, rng.random(cur.shape))
            ever[active] |= cur
            alive = cur.any(axis=1)
            active, cur = active[alive], cur[alive]
        out[:, t] = ever.sum(axis=1)
    return out


def summarize_curves(curves: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    R = curves.shape[0]
    mean = curves.mean(axis=0)
    se = curves.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros(curves.shape[1])
    return mean, se


def fig4_cells(contact: Graph, cells, beta: float = 0.2, delta: float = 0.2, horizon: int = 100,
               replicas: int = 100, master_seed: int = 0, threads: int | None = None) -> list[dict]:
    """Mean spread curves for each ``(alpha, rewire_p)`` cell.

    Cell ``k`` rewires its social graph with ``child_seed(master, STREAM_SOCIAL, k)``
    and simulates with ``child_rng(master, STREAM_FIG4, k)``.
    """
    cells = [(float(a), float(p)) for a, p in cells]

    def run(item):
        k, (alpha, p) = item
        social = rewire_social(contact, p, child_seed(master_seed, STREAM_SOCIAL, k))
        params = EpidemicParams(beta, delta, alpha)
        curves = spread_curves(Graphs(contact, social), params, horizon, replicas,
                               child_rng(master_seed, STREAM_FIG4, k))
        mean, se = summarize_curves(curves)
        return {"alpha": alpha, "rewire_p": p, "mean": mean, "stderr": se, "replicas": replicas}

    return ordered_map(run, list(enumerate(cells)), threads)


def graph_summary(g: Graph) -> dict:
    return {
        "n": g.n,
        "edges": g.num_edges,
        "mean_degree": g.mean_degree,
        "lambda_max": spectral_radius(g),
    }
