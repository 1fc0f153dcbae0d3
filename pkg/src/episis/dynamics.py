"""Benchmark and distancing SIS chains: node probabilities, simulation, exact matrices.

States are boolean vectors of length ``n``; ``True`` marks an infected node.
For exact matrices a state is encoded as the integer whose bit ``i`` is node
``i`` (bit 0 = node 0), so index 0 is the all-susceptible absorbing state.

Two routes compute infection probabilities. The per-node functions
(:func:`p01`, :func:`p01_distancing`, ...) multiply the factors over the
neighbor list literally and are used for exact matrices. The batch kernel
(:func:`infection_probabilities`) exploits binary states, where the product of
``k`` identical factors is a power, and is used for Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ParameterError, ResourceError
from .graph import Graph
from .rng import as_generator

Kind = Literal["benchmark", "distancing"]
KINDS = ("benchmark", "distancing")
MAX_EXACT_NODES = 14


@dataclass(frozen=True)
class EpidemicParams:
    beta: float
    delta: float
    alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0.0 < self.delta < 1.0:
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class Graphs:
    """Contact graph plus the social graph that feeds awareness (defaults to the contact graph)."""

    contact: Graph
    social: Graph | None = None

    def __post_init__(self):
        if self.social is None:
            object.__setattr__(self, "social", self.contact)
        if self.social.n != self.contact.n:
            raise ParameterError("contact and social graphs must share the node set")

    @property
    def n(self) -> int:
        return self.contact.n


def _kind(kind):
    if kind not in KINDS:
        raise ParameterError(f"chain kind must be one of {KINDS}, got {kind!r}")
    return kind


# --- states -----------------------------------------------------------------

def as_state(bits, n: int | None = None) -> np.ndarray:
    s = np.asarray(bits).astype(bool).ravel()
    if n is not None and len(s) != n:
        raise ParameterError(f"state has length {len(s)}, graph has {n} nodes")
    return s


def is_absorbed(state) -> bool:
    return not np.any(state)


def state_to_index(state) -> int:
    return int(sum(1 << i for i, b in enumerate(np.asarray(state)) if b))


def index_to_state(index: int, n: int) -> np.ndarray:
    return np.array([(index >> i) & 1 for i in range(n)], dtype=bool)


def state_to_hex(state) -> str:
    """Hex of the bit-i-is-node-i integer, most significant nibble first, zero-padded to ceil(n/4) digits."""
    n = len(state)
    return format(state_to_index(state), "x").zfill(max(1, math.ceil(n / 4)))


def hex_to_state(text: str, n: int) -> np.ndarray:
    value = int(text, 16)
    if value >> n:
        raise ParameterError(f"hex state {text!r} has bits beyond n={n}")
    return index_to_state(value, n)


def all_states(n: int) -> np.ndarray:
    """All ``2**n`` states as a boolean array, row ``k`` encoding index ``k``."""
    idx = np.arange(2 ** n)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(bool)


# --- per-node probabilities (literal products) -------------------------------

def awareness(state, social: Graph, params: EpidemicParams, i: int) -> float:
    s = np.asarray(state, dtype=float)
    nb = social.neighbors(i)
    local = s[nb].sum() / len(nb) if len(nb) else 0.0
    glob = s.sum() / len(s)
    # glob + alpha * (local - glob) is exact when both fractions agree
    return glob + params.alpha * (local - glob)


def distancing_action(state, social: Graph, params: EpidemicParams, i: int) -> float:
    return 1.0 - awareness(state, social, params, i)


def p01(state, contact: Graph, params: EpidemicParams, i: int) -> float:
    s = np.asarray(state, dtype=float)
    prod = 1.0
    for j in contact.neighbors(i):
        prod *= 1.0 - params.beta * s[j]
    return 1.0 - prod


def p01_distancing(state, contact: Graph, social: Graph, params: EpidemicParams, i: int) -> float:
    s = np.asarray(state, dtype=float)
    a = distancing_action(state, social, params, i)
    prod = 1.0
    for j in contact.neighbors(i):
        prod *= 1.0 - params.beta * a * s[j]
    return 1.0 - prod


def _node_distribution(s_i, infect, delta):
    stay = 1.0 - infect
    if s_i:
        return {0: delta * stay, 1: 1.0 - delta * stay}
    return {0: stay, 1: infect}


def node_transition_benchmark(state, contact: Graph, params: EpidemicParams, i: int) -> dict[int, float]:
    return _node_distribution(bool(state[i]), p01(state, contact, params, i), params.delta)


def node_transition_distancing(state, contact: Graph, social: Graph, params: EpidemicParams, i: int) -> dict[int, float]:
    infect = p01_distancing(state, contact, social, params, i)
    return _node_distribution(bool(state[i]), infect, params.delta)


def node_transition(state, graphs: Graphs, params: EpidemicParams, kind: Kind, i: int) -> dict[int, float]:
    if _kind(kind) == "benchmark":
        return node_transition_benchmark(state, graphs.contact, params, i)
    return node_transition_distancing(state, graphs.contact, graphs.social, params, i)


# --- batch kernel ------------------------------------------------------------

def infected_neighbor_counts(states: np.ndarray, g: Graph) -> np.ndarray:
    """Number of infected neighbors per node, for a ``(R, n)`` batch of states."""
    x = np.asarray(states, dtype=np.float64)
    return np.asarray(g.adjacency @ x.T).T


def awareness_batch(states: np.ndarray, social: Graph, params: EpidemicParams) -> np.ndarray:
    x = np.asarray(states, dtype=np.float64)
    deg = social.degree
    local = infected_neighbor_counts(x, social)
    np.divide(local, deg, out=local, where=deg > 0)
    local[:, deg == 0] = 0.0
    glob = x.sum(axis=1, keepdims=True) / x.shape[1]
    return glob + params.alpha * (local - glob)


def infection_probabilities(states: np.ndarray, graphs: Graphs, params: EpidemicParams, kind: Kind) -> np.ndarray:
    """``p01`` (benchmark) or ``p01,d`` (distancing) for every node of every state in the batch."""
    states = np.atleast_2d(states)
    k = infected_neighbor_counts(states, graphs.contact)
    if _kind(kind) == "benchmark":
        return 1.0 - (1.0 - params.beta) ** k
    a = 1.0 - awareness_batch(states, graphs.social, params)
    return 1.0 - (1.0 - params.beta * a) ** k


def next_infected_probability(states: np.ndarray, infect: np.ndarray, delta: float) -> np.ndarray:
    """Probability each node is infected at the next step, given its infection probability."""
    return np.where(states, 1.0 - delta * (1.0 - infect), infect)


def step_batch(states: np.ndarray, graphs: Graphs, params: EpidemicParams, kind: Kind, uniforms: np.ndarray) -> np.ndarray:
    """Synchronous update of a ``(R, n)`` batch; node becomes/stays infected iff its uniform is below its probability."""
    infect = infection_probabilities(states, graphs, params, kind)
    return uniforms < next_infected_probability(states, infect, params.delta)


def step(state, graphs: Graphs, params: EpidemicParams, kind: Kind, rng) -> np.ndarray:
    rng = as_generator(rng)
    state = as_state(state, graphs.n)
    return step_batch(state[None, :], graphs, params, kind, rng.random((1, graphs.n)))[0]


# --- paths -------------------------------------------------------------------

@dataclass
class SamplePath:
    """Recorded states ``states[0..T]`` where ``T`` is the absorption time or the horizon.

    After absorption the state is implicitly all-susceptible forever.
    """

    states: np.ndarray
    horizon: int
    absorbed_at: int | None = None
    kind: str = field(default="benchmark")

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def censored(self) -> bool:
        return self.absorbed_at is None

    def state_at(self, t: int) -> np.ndarray:
        if t < len(self.states):
            return self.states[t]
        if self.absorbed_at is None:
            raise IndexError(f"time {t} beyond recorded horizon {self.horizon}")
        return np.zeros(self.n, dtype=bool)

    def padded(self, length: int | None = None) -> np.ndarray:
        """States for ``t = 0..length-1`` (default ``horizon + 1``), zero-filled after absorption."""
        length = self.horizon + 1 if length is None else length
        if length > len(self.states) and self.absorbed_at is None:
            raise IndexError(f"path only recorded up to t={len(self.states) - 1}")
        out = np.zeros((length, self.n), dtype=bool)
        k = min(length, len(self.states))
        out[:k] = self.states[:k]
        return out

    def infected_counts(self) -> np.ndarray:
        return self.states.sum(axis=1)


def _path_from_padded(rows: np.ndarray, horizon: int, kind: str) -> SamplePath:
    counts = rows.sum(axis=1)
    zero = np.flatnonzero(counts == 0)
    if len(zero):
        T = int(zero[0])
        return SamplePath(rows[: T + 1].copy(), horizon, T, kind)
    return SamplePath(rows.copy(), horizon, None, kind)


def simulate(init, graphs: Graphs, params: EpidemicParams, kind: Kind, horizon: int, rng) -> SamplePath:
    """Run one chain from ``init`` until absorption or ``horizon`` steps."""
    _kind(kind)
    if horizon < 0:
        raise ParameterError("horizon must be non-negative")
    rng = as_generator(rng)
    s = as_state(init, graphs.n)
    states = [s]
    absorbed = 0 if is_absorbed(s) else None
    t = 0
    while absorbed is None and t < horizon:
        s = step_batch(s[None, :], graphs, params, kind, rng.random((1, graphs.n)))[0]
        t += 1
        states.append(s)
        if is_absorbed(s):
            absorbed = t
    return SamplePath(np.array(states), horizon, absorbed, kind)


def simulate_batch(init: np.ndarray, graphs: Graphs, params: EpidemicParams, kind: Kind, horizon: int, rng) -> np.ndarray:
    """Run ``R`` replicas from a ``(R, n)`` batch of initial states.

    Returns a ``(R, horizon + 1, n)`` boolean array, zero-filled after
    absorption. A single ``(R, n)`` block of uniforms is drawn per step until
    every replica is absorbed, so ``R = 1`` reproduces :func:`simulate`.
    """
    _kind(kind)
    rng = as_generator(rng)
    S = np.atleast_2d(np.asarray(init, dtype=bool))
    R, n = S.shape
    out = np.zeros((R, horizon + 1, n), dtype=bool)
    out[:, 0] = S
    for t in range(1, horizon + 1):
        if not S.any():
            break
        S = step_batch(S, graphs, params, kind, rng.random((R, n)))
        out[:, t] = S
    return out


def paths_from_batch(batch: np.ndarray, horizon: int, kind: str = "benchmark") -> list[SamplePath]:
    return [_path_from_padded(rows, horizon, kind) for rows in batch]


def absorption_times_mc(init: np.ndarray, graphs: Graphs, params: EpidemicParams, kind: Kind,
                        max_steps: int, rng) -> np.ndarray:
    """Absorption time per replica (``-1`` if not absorbed within ``max_steps``).

    Only still-active replicas are stepped, which keeps large replica counts
    on tiny graphs cheap.
    """
    _kind(kind)
    rng = as_generator(rng)
    S = np.atleast_2d(np.asarray(init, dtype=bool)).copy()
    R, n = S.shape
    times = np.full(R, -1, dtype=np.int64)
    active = np.flatnonzero(S.any(axis=1))
    times[~S.any(axis=1)] = 0
    cur = S[active]
    for t in range(1, max_steps + 1):
        if len(active) == 0:
            break
        cur = step_batch(cur, graphs, params, kind, rng.random(cur.shape))
        done = ~cur.any(axis=1)
        times[active[done]] = t
        active = active[~done]
        cur = cur[~done]
    return times


# --- exact chains --------------------------------------------------------------

@dataclass(frozen=True)
class ExactChain:
    """Full ``2**n x 2**n`` transition matrix with bit-i-is-node-i state indexing."""

    matrix: np.ndarray
    n: int
    kind: str

    @property
    def Q(self) -> np.ndarray:
        """Sub-stochastic block among non-absorbing states (indices 1..2**n-1)."""
        return self.matrix[1:, 1:]


def exact_transition_matrix(graphs: Graphs, params: EpidemicParams, kind: Kind) -> ExactChain:
    _kind(kind)
    n = graphs.n
    if n > MAX_EXACT_NODES:
        raise ResourceError(f"exact matrix limited to n <= {MAX_EXACT_NODES}, got n={n}")
    size = 2 ** n
    K = np.empty((size, size))
    for idx in range(size):
        s = index_to_state(idx, n)
        row = np.ones(1)
        # kron puts its first factor in the most significant position, so
        # iterate from the highest node down to node 0.
        for i in reversed(range(n)):
            dist = node_transition(s, graphs, params, kind, i)
            row = np.kron(row, [dist[0], dist[1]])
        K[idx] = row
    return ExactChain(K, n, kind)


def expected_absorption_time_exact(chain: ExactChain, init) -> float:
    """Mean absorption time from ``init`` by solving ``(I - Q) t = 1`` on the transient states."""
    idx = state_to_index(as_state(init, chain.n))
    if idx == 0:
        return 0.0
    Q = chain.Q
    t = np.linalg.solve(np.eye(len(Q)) - Q, np.ones(len(Q)))
    return float(t[idx - 1])


def absorption_probability_by(chain: ExactChain, init, t: int) -> float:
    """Probability of being absorbed at or before step ``t``: ``1 - r_s(Q^t)``."""
    idx = state_to_index(as_state(init, chain.n))
    if idx == 0:
        return 1.0
    row = np.zeros(len(chain.Q))
    row[idx - 1] = 1.0
    for _ in range(t):
        row = row @ chain.Q
    return float(1.0 - row.sum())
