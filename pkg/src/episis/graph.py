"""Undirected simple graphs, random generators and spectral radius.

Draw-order conventions (all generators use ``rng.as_generator(seed)``):

* Erdős–Rényi: one uniform per unordered pair, pairs enumerated
  lexicographically ``(0,1), (0,2), ..., (0,n-1), (1,2), ...``; the pair is an
  edge iff its uniform is ``< p_er``.
* Geometric torus: ``rng.random((n, 2))`` gives the point coordinates.
* Preferential attachment: arrivals ``m, m+1, ..., n-1`` each call
  ``rng.choice(existing, size=m, replace=False, p=degree/degree.sum())``.
* Social rewiring: ``rng.choice(|E|, k, replace=False)`` picks the removed
  edges (indices into the sorted edge list); then, per removed edge in that
  order, ``rng.integers(2)`` picks the root endpoint and
  ``rng.integers(n - 1)`` the partner (shifted past the root).
"""

from __future__ import annotations

import math
from collections import deque
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GraphFormatError, ParameterError, SpectralConvergenceError
from .rng import as_generator

__all__ = [
    "Graph",
    "complete_graph",
    "path_graph",
    "cycle_graph",
    "star_graph",
    "empty_graph",
    "gen_erdos_renyi",
    "gen_geometric_torus",
    "geometric_from_points",
    "gen_preferential_attachment",
    "rewire_social",
    "spectral_radius",
    "largest_connected_component",
    "read_edge_list",
    "write_edge_list",
]


class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``.

    Edges are stored once as ``(i, j)`` with ``i < j``, sorted
    lexicographically. Neighbor lists are kept in CSR form (``indptr``,
    ``indices``) with each list sorted ascending.
    """

    __slots__ = ("n", "edges", "indptr", "indices", "degree", "_adj")

    def __init__(self, n: int, edges=()):
        n = int(n)
        if n < 1:
            raise ParameterError(f"graph needs at least one node, got n={n}")
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        arr = arr.reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ParameterError("edge endpoint outside 0..n-1")
        if np.any(arr[:, 0] == arr[:, 1]):
            raise ParameterError("self-loops are not allowed")
        arr = np.sort(arr, axis=1)
        arr = np.unique(arr, axis=0) if arr.size else arr
        self.n = n
        self.edges = arr
        both = np.concatenate([arr, arr[:, ::-1]]) if arr.size else arr
        order = np.lexsort((both[:, 1], both[:, 0])) if both.size else np.zeros(0, dtype=np.int64)
        both = both[order]
        self.degree = np.bincount(both[:, 0], minlength=n).astype(np.int64) if both.size else np.zeros(n, np.int64)
        self.indptr = np.concatenate([[0], np.cumsum(self.degree)]).astype(np.int64)
        self.indices = both[:, 1].copy() if both.size else np.zeros(0, dtype=np.int64)
        for a in (self.edges, self.degree, self.indptr, self.indices):
            a.setflags(write=False)
        self._adj = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.num_edges / self.n

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < len(nb) and nb[k] == j)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    @property
    def adjacency(self) -> sp.csr_matrix:
        """Sparse float64 adjacency matrix (cached)."""
        if self._adj is None:
            data = np.ones(len(self.indices))
            self._adj = sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))
        return self._adj

    def dense_adjacency(self) -> np.ndarray:
        return self.adjacency.toarray()

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_edges})"


# Small named graphs used throughout tests and examples.

def empty_graph(n: int) -> Graph:
    return Graph(n, [])


def complete_graph(n: int) -> Graph:
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(n: int) -> Graph:
    """Hub 0 joined to leaves ``1..n-1``."""
    return Graph(n, [(0, i) for i in range(1, n)])


def _check_count(n):
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    return int(n)


def gen_erdos_renyi(n: int, p_er: float, seed) -> Graph:
    n = _check_count(n)
    if not 0.0 < p_er < 1.0:
        raise ParameterError(f"p_er must lie in (0, 1), got {p_er}")
    rng = as_generator(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p_er
    return Graph(n, np.column_stack([iu[keep], ju[keep]]))


def _torus_edges(points: np.ndarray, r: float, chunk: int = 512) -> np.ndarray:
    n = len(points)
    out = []
    for start in range(0, n, chunk):
        block = points[start : start + chunk]
        d = np.abs(block[:, None, :] - points[None, :, :])
        d = np.minimum(d, 1.0 - d)
        close = (d ** 2).sum(axis=2) < r * r
        rows, cols = np.nonzero(close)
        rows = rows + start
        mask = rows < cols
        out.append(np.column_stack([rows[mask], cols[mask]]))
    return np.concatenate(out) if out else np.zeros((0, 2), dtype=np.int64)


def geometric_from_points(points, r: float) -> Graph:
    """Torus geometric graph on given points in ``[0,1)^2``."""
    if not 0.0 < r < 1.0:
        raise ParameterError(f"r must lie in (0, 1), got {r}")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    return Graph(len(points), _torus_edges(points, r))


def gen_geometric_torus(n: int, r: float, seed) -> Graph:
    n = _check_count(n)
    if not 0.0 < r < 1.0:
        raise ParameterError(f"r must lie in (0, 1), got {r}")
    rng = as_generator(seed)
    return geometric_from_points(rng.random((n, 2)), r)


def gen_preferential_attachment(n: int, m: int, seed) -> Graph:
    """Degree-proportional attachment grown from a complete seed graph on ``m`` nodes.

    Each arrival links to ``m`` distinct existing nodes. When every existing
    node has degree 0 (only possible for ``m == 1`` at the first arrival) the
    choice is uniform.
    """
    n = _check_count(n)
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be a positive integer, got {m!r}")
    m = int(m)
    if n < m:
        raise ParameterError(f"need n >= m, got n={n}, m={m}")
    rng = as_generator(seed)
    edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    degree = np.zeros(n, dtype=np.float64)
    degree[:m] = m - 1
    for new in range(m, n):
        weights = degree[:new]
        total = weights.sum()
        p = weights / total if total > 0 else None
        targets = rng.choice(new, size=m, replace=False, p=p)
        for t in targets:
            edges.append((int(t), new))
        degree[targets] += 1
        degree[new] = m
    return Graph(n, edges)


def rewire_social(contact: Graph, p: float, seed) -> Graph:
    """Derive a social graph by moving a fraction ``p`` of the contact edges.

    ``floor(p * |E|)`` edges are removed. For each removed edge a root
    endpoint is chosen with probability 1/2 and joined to a uniformly random
    other node. A draw that would duplicate an existing edge is redrawn (root
    included). If both endpoints of a removed edge are already adjacent to
    every other node, the root is drawn uniformly from the nodes that still
    have a free slot.
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"rewire fraction must lie in [0, 1], got {p}")
    if contact.num_edges < 1:
        raise ParameterError("contact graph has no edges to rewire")
    rng = as_generator(seed)
    n = contact.n
    m_edges = contact.num_edges
    k = math.floor(p * m_edges)
    if k == 0:
        return Graph(n, contact.edges)
    removed_idx = rng.choice(m_edges, size=k, replace=False)
    current = contact.edge_set()
    removed = [tuple(int(v) for v in contact.edges[e]) for e in removed_idx]
    for e in removed:
        current.discard(e)
    degree = np.zeros(n, dtype=np.int64)
    for i, j in current:
        degree[i] += 1
        degree[j] += 1
    for u, v in removed:
        while True:
            if degree[u] >= n - 1 and degree[v] >= n - 1:
                free = np.flatnonzero(degree < n - 1)
                root = int(free[rng.integers(len(free))])
            else:
                root = (u, v)[int(rng.integers(2))]
                if degree[root] >= n - 1:
                    continue
            j = int(rng.integers(n - 1))
            if j >= root:
                j += 1
            e = (min(root, j), max(root, j))
            if e not in current:
                break
        current.add(e)
        degree[root] += 1
        degree[j] += 1
    return Graph(n, sorted(current))


def spectral_radius(g: Graph, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Largest adjacency eigenvalue by power iteration.

    Iterates on ``A + I`` so that the top eigenvalue is strictly dominant in
    magnitude even for bipartite graphs, and stops once successive Rayleigh
    quotients of ``A`` differ by less than ``tol``.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if g.num_edges == 0:
        return 0.0
    A = g.adjacency
    v = np.ones(g.n) / math.sqrt(g.n)
    prev = None
    rq = 0.0
    for _ in range(max_iter):
        w = A @ v
        rq = float(v @ w)
        if prev is not None and abs(rq - prev) < tol:
            return rq
        prev = rq
        w += v
        v = w / np.linalg.norm(w)
    raise SpectralConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", rq, v
    )


def connected_components(g: Graph) -> list[list[int]]:
    seen = np.zeros(g.n, dtype=bool)
    comps = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in g.neighbors(u):
                if not seen[w]:
                    seen[w] = True
                    comp.append(int(w))
                    queue.append(int(w))
        comps.append(sorted(comp))
    return comps


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest component, relabeled ``0..k-1`` in original order.

    Components are discovered in order of their smallest node, so ties go to
    the component containing the smallest original index.
    """
    comps = connected_components(g)
    best = max(comps, key=len)  # max keeps the first maximal element
    if len(best) == g.n:
        return g
    relabel = -np.ones(g.n, dtype=np.int64)
    relabel[best] = np.arange(len(best))
    keep = (relabel[g.edges[:, 0]] >= 0) if g.num_edges else np.zeros(0, bool)
    sub = relabel[g.edges[keep]]
    return Graph(len(best), sub)


def write_edge_list(g: Graph, path) -> None:
    lines = [f"n {g.n}"] + [f"{i} {j}" for i, j in g.edges]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edge_list(path) -> Graph:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines:
        raise GraphFormatError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n" or not head[1].isdigit():
        raise GraphFormatError(f"{path}: first line must be 'n <count>'")
    n = int(head[1])
    if n < 1:
        raise GraphFormatError(f"{path}: node count must be positive")
    seen = set()
    edges = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise GraphFormatError(f"{path}:{lineno}: expected 'i j', got {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        if i == j:
            raise GraphFormatError(f"{path}:{lineno}: self-loop on node {i}")
        if i > j:
            raise GraphFormatError(f"{path}:{lineno}: edge must be written with i < j")
        if j >= n:
            raise GraphFormatError(f"{path}:{lineno}: node {j} out of range for n={n}")
        if (i, j) in seen:
            raise GraphFormatError(f"{path}:{lineno}: duplicate edge ({i}, {j})")
        seen.add((i, j))
        edges.append((i, j))
    return Graph(n, edges)
