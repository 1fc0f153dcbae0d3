"""Mean-field maps for both chains, fixed-point iteration and threshold tests.

``psi`` is the benchmark map and ``phi`` the distancing map; both act on
vectors of per-node infection probabilities in ``[0, 1]^n``::

    map_i(x) = x_i (1 - delta) + (1 - (1 - delta) x_i) * infect_i(x)

where ``infect_i`` is the neighbor product with real ``x_j`` in place of the
binary state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .dynamics import EpidemicParams, Graphs
from .errors import ParameterError
from .graph import Graph, spectral_radius

FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 100_000
NONTRIVIAL_FLOOR = 1e-6
CRITICAL_BAND = 1e-9


def _check_vector(x, n):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ParameterError(f"expected a vector of length {n}, got shape {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0) or np.any(np.isnan(x)):
        raise ParameterError("MFA vector components must lie in [0, 1]")
    return x


def _row_products(g: Graph, factors: np.ndarray) -> np.ndarray:
    """Product of per-edge ``factors`` (aligned with ``g.indices``) over each neighbor list."""
    out = np.ones(g.n)
    nonempty = g.degree > 0
    if g.indices.size:
        starts = g.indptr[:-1][nonempty]
        out[nonempty] = np.multiply.reduceat(factors, starts)
    return out


def _rows(g: Graph) -> np.ndarray:
    return np.repeat(np.arange(g.n), g.degree)


def mfa_infection(x: np.ndarray, contact: Graph, beta: float, action: np.ndarray | None = None) -> np.ndarray:
    """``1 - prod_j (1 - beta * a_i * x_j)`` per node; ``action=None`` means ``a_i = 1``."""
    factors = beta * x[contact.indices]
    if action is not None:
        factors *= action[_rows(contact)]
    return 1.0 - _row_products(contact, 1.0 - factors)


def mfa_awareness(x: np.ndarray, social: Graph, alpha: float) -> np.ndarray:
    sums = np.asarray(social.adjacency @ x)
    local = np.zeros_like(x)
    np.divide(sums, social.degree, out=local, where=social.degree > 0)
    glob = x.mean()
    return glob + alpha * (local - glob)


def _combine(x, infect, delta):
    return x * (1.0 - delta) + (1.0 - (1.0 - delta) * x) * infect


def psi_map(x, contact: Graph, params: EpidemicParams) -> np.ndarray:
    x = _check_vector(x, contact.n)
    return _combine(x, mfa_infection(x, contact, params.beta), params.delta)


def phi_map(x, contact: Graph, social: Graph, params: EpidemicParams) -> np.ndarray:
    x = _check_vector(x, contact.n)
    action = 1.0 - mfa_awareness(x, social, params.alpha)
    return _combine(x, mfa_infection(x, contact, params.beta, action), params.delta)


def get_map(which: str, graphs: Graphs, params: EpidemicParams):
    if which == "psi":
        return lambda x: psi_map(x, graphs.contact, params)
    if which == "phi":
        return lambda x: phi_map(x, graphs.contact, graphs.social, params)
    raise ParameterError(f"map must be 'psi' or 'phi', got {which!r}")


@dataclass
class FixedPointReport:
    point: np.ndarray
    iterations: int
    residual: float
    converged: bool
    classification: Literal["trivial", "nontrivial"]

    @property
    def norm1_over_n(self) -> float:
        return float(self.point.mean())


def iterate_fixed_point(which: str, graphs: Graphs, params: EpidemicParams, x0=None,
                        tol: float = FIXED_POINT_TOL, max_iter: int = FIXED_POINT_MAX_ITER) -> FixedPointReport:
    """Iterate ``x <- map(x)`` until the sup-norm step is below ``tol``.

    ``x0`` defaults to ``0.5`` everywhere. Running out of iterations is not an
    error; the report then has ``converged=False``.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    f = get_map(which, graphs, params)
    x = np.full(graphs.n, 0.5) if x0 is None else _check_vector(x0, graphs.n).copy()
    residual = np.inf
    it = 0
    converged = False
    while it < max_iter:
        nxt = f(x)
        residual = float(np.max(np.abs(nxt - x)))
        x = nxt
        it += 1
        if residual < tol:
            converged = True
            break
    cls = "nontrivial" if np.max(x) > NONTRIVIAL_FLOOR else "trivial"
    return FixedPointReport(x, it, residual, converged, cls)


def linearization(contact: Graph, params: EpidemicParams) -> np.ndarray:
    """Jacobian of both maps at the origin: ``beta * A + (1 - delta) I``."""
    return params.beta * contact.dense_adjacency() + (1.0 - params.delta) * np.eye(contact.n)


def threshold_value(contact: Graph, params: EpidemicParams, lam: float | None = None) -> float:
    """``lambda_max(beta A + (1 - delta) I) = beta * lambda_max(A) + 1 - delta``."""
    lam = spectral_radius(contact) if lam is None else lam
    return params.beta * lam + 1.0 - params.delta


def threshold_classify(contact: Graph, params: EpidemicParams, lam: float | None = None) -> str:
    v = threshold_value(contact, params, lam)
    if abs(v - 1.0) <= CRITICAL_BAND:
        return "critical"
    return "supercritical" if v > 1.0 else "subcritical"


@dataclass
class DominanceReport:
    holds: bool
    worst_margin: float
    worst_node: int


def dominance_check(p_star, q_star) -> DominanceReport:
    """Strict componentwise ``p* < q*``; the margin is ``min_i (q*_i - p*_i)``."""
    p = np.asarray(p_star, dtype=float)
    q = np.asarray(q_star, dtype=float)
    if p.shape != q.shape:
        raise ParameterError("vectors must have the same length")
    gap = q - p
    k = int(np.argmin(gap))
    return DominanceReport(bool(np.all(gap > 0)), float(gap[k]), k)
