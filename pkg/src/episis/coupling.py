"""Monotone coupling of the distancing chain (h) below the benchmark chain (g).

For ordered states ``x <= y`` (``x`` distancing, ``y`` benchmark) each node
draws its pair of next bits from a 2x2 table with no mass on
``(h'=1, g'=0)``. Tables are sampled with one uniform against the cumulative
thresholds ``q00, q00+q01``; above both, the outcome is ``(1, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import dynamics as dyn
from .dynamics import EpidemicParams, Graphs, SamplePath
from .errors import OrderViolationError, ParameterError
from .metrics import PathMetric, require_registered
from .rng import as_generator

NEGATIVE_SLACK = 1e-12


@dataclass(frozen=True)
class NodeCouplingTable:
    """Joint law of (distancing next bit, benchmark next bit) for one node."""

    q00: float
    q01: float
    q10: float
    q11: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.q00, self.q01], [self.q10, self.q11]])

    def distancing_marginal(self) -> tuple[float, float]:
        return self.q00 + self.q01, self.q10 + self.q11

    def benchmark_marginal(self) -> tuple[float, float]:
        return self.q00 + self.q10, self.q01 + self.q11


def leq(x, y) -> bool:
    """Componentwise order on states."""
    return not np.any(np.asarray(x, bool) & ~np.asarray(y, bool))


def _require_order(x, y):
    if not leq(x, y):
        bad = np.flatnonzero(np.asarray(x, bool) & ~np.asarray(y, bool))
        raise OrderViolationError(f"distancing state not below benchmark state at nodes {bad.tolist()}")


def _table_entries(xi, yi, p_bench, p_dist, delta):
    """Entries (q00, q01, q11) for arrays or scalars; ``xi=1, yi=0`` must already be excluded."""
    heal_bench = delta * (1.0 - p_bench)
    q00 = np.where(yi, heal_bench, 1.0 - p_bench)
    q11 = np.where(xi, 1.0 - delta * (1.0 - p_dist), p_dist)
    q01 = np.where(
        xi,
        delta * (p_bench - p_dist),
        np.where(yi, 1.0 - p_dist - heal_bench, p_bench - p_dist),
    )
    return q00, q01, q11


def _check_nonnegative(q01):
    low = np.min(q01)
    if low < -NEGATIVE_SLACK:
        raise ArithmeticError(f"coupling table entry q01 = {low} is negative")
    return np.maximum(q01, 0.0)


def node_coupling_table(x, y, graphs: Graphs, params: EpidemicParams, i: int) -> NodeCouplingTable:
    x = dyn.as_state(x, graphs.n)
    y = dyn.as_state(y, graphs.n)
    _require_order(x, y)
    p_bench = dyn.p01(y, graphs.contact, params, i)
    p_dist = dyn.p01_distancing(x, graphs.contact, graphs.social, params, i)
    q00, q01, q11 = (float(v) for v in _table_entries(x[i], y[i], p_bench, p_dist, params.delta))
    q01 = float(_check_nonnegative(q01))
    return NodeCouplingTable(q00, q01, 0.0, q11)


def coupled_step_batch(X: np.ndarray, Y: np.ndarray, graphs: Graphs, params: EpidemicParams,
                       uniforms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One coupled step for ``(R, n)`` batches of ordered pairs."""
    if np.any(X & ~Y):
        raise OrderViolationError("coupled batch contains an unordered pair")
    p_bench = dyn.infection_probabilities(Y, graphs, params, "benchmark")
    p_dist = dyn.infection_probabilities(X, graphs, params, "distancing")
    q00, q01, _ = _table_entries(X, Y, p_bench, p_dist, params.delta)
    q01 = _check_nonnegative(q01)
    g_next = uniforms >= q00
    h_next = uniforms >= q00 + q01
    return h_next, g_next


def coupled_step(x, y, graphs: Graphs, params: EpidemicParams, rng) -> tuple[np.ndarray, np.ndarray]:
    rng = as_generator(rng)
    x = dyn.as_state(x, graphs.n)
    y = dyn.as_state(y, graphs.n)
    _require_order(x, y)
    h, g = coupled_step_batch(x[None], y[None], graphs, params, rng.random((1, graphs.n)))
    return h[0], g[0]


@dataclass
class CoupledPath:
    h_states: np.ndarray
    g_states: np.ndarray
    horizon: int
    absorbed_at_h: int | None
    absorbed_at_g: int | None

    @property
    def h(self) -> SamplePath:
        return _trim(self.h_states, self.horizon, "distancing")

    @property
    def g(self) -> SamplePath:
        return _trim(self.g_states, self.horizon, "benchmark")

    def order_ok(self) -> np.ndarray:
        return ~np.any(self.h_states & ~self.g_states, axis=1)


def _first_zero(rows):
    z = np.flatnonzero(~rows.any(axis=1))
    return int(z[0]) if len(z) else None


def _trim(rows, horizon, kind):
    T = _first_zero(rows)
    if T is None:
        return SamplePath(rows.copy(), horizon, None, kind)
    return SamplePath(rows[: T + 1].copy(), horizon, T, kind)


def simulate_coupled_batch(init: np.ndarray, graphs: Graphs, params: EpidemicParams, horizon: int,
                           rng) -> tuple[np.ndarray, np.ndarray]:
    """Coupled replicas from shared initial states.

    Returns ``(H, G)``, each ``(R, horizon + 1, n)`` and zero-filled after
    absorption. One ``(R, n)`` block of uniforms is drawn per step until every
    benchmark replica is absorbed, so ``R = 1`` matches :func:`simulate_coupled`.
    Once ``h`` is absorbed its infection probabilities vanish, so it stays
    all-susceptible while ``g`` keeps following the benchmark law.
    """
    if horizon < 0:
        raise ParameterError("horizon must be non-negative")
    rng = as_generator(rng)
    Y = np.atleast_2d(np.asarray(init, dtype=bool)).copy()
    X = Y.copy()
    R, n = Y.shape
    H = np.zeros((R, horizon + 1, n), dtype=bool)
    G = np.zeros_like(H)
    H[:, 0] = X
    G[:, 0] = Y
    for t in range(1, horizon + 1):
        if not Y.any():
            break
        X, Y = coupled_step_batch(X, Y, graphs, params, rng.random((R, n)))
        H[:, t] = X
        G[:, t] = Y
    return H, G


def _coupled_from_rows(h_rows, g_rows, horizon):
    T = _first_zero(g_rows)
    end = len(g_rows) if T is None else T + 1
    return CoupledPath(h_rows[:end].copy(), g_rows[:end].copy(), horizon, _first_zero(h_rows), T)


def simulate_coupled(init, graphs: Graphs, params: EpidemicParams, horizon: int, rng) -> CoupledPath:
    """Run one coupled pair from ``h^0 = g^0 = init`` until ``g`` is absorbed or the horizon."""
    init = dyn.as_state(init, graphs.n)
    H, G = simulate_coupled_batch(init[None], graphs, params, horizon, rng)
    return _coupled_from_rows(H[0], G[0], horizon)


def coupled_paths(H: np.ndarray, G: np.ndarray, horizon: int) -> list[CoupledPath]:
    return [_coupled_from_rows(h, g, horizon) for h, g in zip(H, G)]


# --- exact verification -------------------------------------------------------

def joint_matrix(x, y, graphs: Graphs, params: EpidemicParams) -> np.ndarray:
    """``J[w, w'] = prod_i table_i[w_i, w'_i]`` over all state pairs (bit-i-is-node-i indexing)."""
    J = np.ones((1, 1))
    for i in reversed(range(graphs.n)):
        J = np.kron(J, node_coupling_table(x, y, graphs, params, i).as_matrix())
    return J


def _order_mask(n):
    idx = np.arange(2 ** n)
    return (idx[:, None] & ~idx[None, :]) == 0


def ordered_pairs(n: int):
    for yi in range(2 ** n):
        # every x whose bits are a subset of y's
        sub = yi
        while True:
            yield sub, yi
            if sub == 0:
                break
            sub = (sub - 1) & yi


@dataclass
class MarginalReport:
    max_deviation: float
    max_table_error: float
    off_order_mass: float
    pairs_checked: int
    worst_pair: tuple[int, int] | None = None

    def passed(self, tol: float = 1e-12) -> bool:
        return max(self.max_deviation, self.max_table_error, self.off_order_mass) < tol


def verify_coupling_marginals_exact(graphs: Graphs, params: EpidemicParams, max_nodes: int = 5,
                                    bench: dyn.ExactChain | None = None,
                                    dist: dyn.ExactChain | None = None) -> MarginalReport:
    """Enumerate every ordered pair and compare the joint's marginals with the exact chains.

    For each ``x <= y`` and state ``w``: the mass of ``{(w, w') : w' >= w}``
    must equal ``K_d(x, w)`` and the mass of ``{(w', w) : w' <= w}`` must equal
    ``K(y, w)``. Mass on unordered pairs is reported separately.
    """
    n = graphs.n
    if n > max_nodes:
        raise ParameterError(f"exact coupling verification limited to n <= {max_nodes}")
    bench = bench or dyn.exact_transition_matrix(graphs, params, "benchmark")
    dist = dist or dyn.exact_transition_matrix(graphs, params, "distancing")
    mask = _order_mask(n)
    worst = 0.0
    worst_pair = None
    table_err = 0.0
    off = 0.0
    count = 0
    for xi, yi in ordered_pairs(n):
        x = dyn.index_to_state(xi, n)
        y = dyn.index_to_state(yi, n)
        for i in range(n):
            t = node_coupling_table(x, y, graphs, params, i)
            d = dyn.node_transition(x, graphs, params, "distancing", i)
            b = dyn.node_transition(y, graphs, params, "benchmark", i)
            dm, bm = t.distancing_marginal(), t.benchmark_marginal()
            table_err = max(table_err, abs(sum(dm) - 1.0), abs(dm[0] - d[0]), abs(dm[1] - d[1]),
                            abs(bm[0] - b[0]), abs(bm[1] - b[1]))
        J = joint_matrix(x, y, graphs, params)
        inside = np.where(mask, J, 0.0)
        off = max(off, float(np.abs(J[~mask]).sum()))
        dev = max(np.max(np.abs(inside.sum(axis=1) - dist.matrix[xi])),
                  np.max(np.abs(inside.sum(axis=0) - bench.matrix[yi])))
        if dev > worst:
            worst, worst_pair = float(dev), (xi, yi)
        count += 1
    return MarginalReport(worst, table_err, off, count, worst_pair)


# --- initial states -----------------------------------------------------------

def initial_states(spec, n: int, replicas: int, rng) -> np.ndarray:
    """Initial batch for ``spec``: ``"one-random"``, ``"all"``, ``"none"``, or an explicit state.

    ``"one-random"`` infects one uniformly chosen node per replica, drawn with
    ``rng.integers(n, size=replicas)``; both chains of a pair share it.
    """
    if isinstance(spec, str):
        if spec == "one-random":
            rng = as_generator(rng)
            S = np.zeros((replicas, n), dtype=bool)
            S[np.arange(replicas), rng.integers(n, size=replicas)] = True
            return S
        if spec == "all":
            return np.ones((replicas, n), dtype=bool)
        if spec == "none":
            return np.zeros((replicas, n), dtype=bool)
        raise ParameterError(f"unknown initial-state spec {spec!r}")
    s = dyn.as_state(spec, n)
    return np.repeat(s[None], replicas, axis=0)


def _chunks(total, size):
    start = 0
    while start < total:
        yield start, min(size, total - start)
        start += size


def coupled_replicas(init, graphs: Graphs, params: EpidemicParams, horizon: int, replicas: int, rng,
                     chunk: int = 1024):
    """Yield coupled paths chunk by chunk; one generator serves all chunks in order."""
    rng = as_generator(rng)
    for _, size in _chunks(replicas, chunk):
        S = initial_states(init, graphs.n, size, rng)
        H, G = simulate_coupled_batch(S, graphs, params, horizon, rng)
        yield from coupled_paths(H, G, horizon)


# --- expectation gap and dominance --------------------------------------------

def tau_sum(z_g: int, z_h: int) -> int:
    """``sum_tau 1{z_g > tau >= z_h}``, counted term by term."""
    taus = np.arange(max(z_g, z_h, 0))
    return int(np.count_nonzero((taus < z_g) & (taus >= z_h)))


@dataclass
class GapEstimate:
    metric: str
    gap: float
    stderr: float
    replicas: int
    used: int
    excluded: int
    tau_sum_agreement: bool
    differences: np.ndarray = field(repr=False, default=None)

    def record(self) -> dict:
        return {
            "metric": self.metric,
            "gap": self.gap,
            "stderr": self.stderr,
            "replicas": self.replicas,
            "used": self.used,
            "excluded_censored": self.excluded,
            "tau_sum_agreement": self.tau_sum_agreement,
        }


def gap_from_values(name: str, z_g, z_h) -> GapEstimate:
    """Average ``Z(g) - Z(h)`` over coupled pairs, checking the per-pair tau-sum identity.

    Pairs where either value is censored (``None``) are excluded and counted.
    """
    diffs = []
    excluded = 0
    total = 0
    for zg, zh in zip(z_g, z_h):
        total += 1
        if zg is None or zh is None:
            excluded += 1
            continue
        d = int(zg) - int(zh)
        if d < 0:
            raise AssertionError(f"{name}: Z(g)={zg} < Z(h)={zh} on a coupled pair")
        if tau_sum(int(zg), int(zh)) != d:
            raise AssertionError(f"{name}: tau-sum disagrees with the direct difference")
        diffs.append(d)
    arr = np.asarray(diffs, dtype=np.int64)
    used = len(arr)
    gap = float(arr.mean()) if used else math.nan
    se = float(arr.std(ddof=1) / math.sqrt(used)) if used >= 2 else math.nan
    return GapEstimate(name, gap, se, total, used, excluded, True, arr)


def gap_from_paths(metric: PathMetric, pairs) -> GapEstimate:
    require_registered(metric, integer=True)
    z_g, z_h = [], []
    for cp in pairs:
        z_g.append(metric(cp.g))
        z_h.append(metric(cp.h))
    return gap_from_values(metric.name, z_g, z_h)


def expectation_gap(metric: PathMetric, init, graphs: Graphs, params: EpidemicParams, horizon: int,
                    replicas: int, rng, chunk: int = 1024) -> GapEstimate:
    """Monte Carlo estimate of ``E_benchmark[Z] - E_distancing[Z]`` from coupled pairs."""
    require_registered(metric, integer=True)
    if replicas < 2:
        raise ParameterError("need at least 2 replicas")
    if metric.window is not None and metric.window > horizon:
        raise ParameterError(f"metric window {metric.window} exceeds horizon {horizon}")
    return gap_from_paths(metric, coupled_replicas(init, graphs, params, horizon, replicas, rng, chunk))


@dataclass
class ProbeResult:
    benchmark_prob: float
    distancing_prob: float
    difference: float
    cross_frequency: float
    replicas: int


def probe_from_values(in_h, in_g) -> ProbeResult:
    in_h = np.asarray(in_h, dtype=bool)
    in_g = np.asarray(in_g, dtype=bool)
    if np.any(in_h & ~in_g):
        raise AssertionError("indicator is not increasing: h in the set while g is not")
    total = len(in_g)
    mu, nu = in_g.mean(), in_h.mean()
    cross = np.mean(in_g & ~in_h)
    return ProbeResult(float(mu), float(nu), float(mu - nu), float(cross), total)


def probe_from_paths(indicator: Callable[[SamplePath], bool], pairs) -> ProbeResult:
    in_h, in_g = [], []
    for cp in pairs:
        in_h.append(bool(indicator(cp.h)))
        in_g.append(bool(indicator(cp.g)))
    return probe_from_values(in_h, in_g)


def dominance_upper_set_probe(indicator: Callable[[SamplePath], bool], init, graphs: Graphs,
                              params: EpidemicParams, horizon: int, replicas: int, rng,
                              chunk: int = 1024) -> ProbeResult:
    """Estimate benchmark and distancing probabilities of an upper set from coupled draws.

    The difference of the two frequencies equals the frequency of pairs with
    ``g`` inside and ``h`` outside, which is never negative.
    """
    return probe_from_paths(indicator, coupled_replicas(init, graphs, params, horizon, replicas, rng, chunk))


def absorption_exceeds(tau: int) -> Callable[[SamplePath], bool]:
    """Indicator of ``T > tau``; a path censored at a horizon ``>= tau`` counts as inside."""
    def indicator(path):
        if path.absorbed_at is None:
            if path.horizon < tau:
                raise ParameterError(f"cannot decide T > {tau} past horizon {path.horizon}")
            return True
        return path.absorbed_at > tau
    return indicator


def metric_exceeds(metric: PathMetric, c: float) -> Callable[[SamplePath], bool]:
    require_registered(metric)
    return lambda path: metric(path) > c
