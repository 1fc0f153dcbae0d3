import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import bisect

from episis import graph as gr
from episis import mfa
from episis.dynamics import EpidemicParams, Graphs
from episis.errors import ParameterError

from conftest import SMALL_GRAPHS

K3 = gr.complete_graph(3)


def _jacobian_fd(f, n, eps=1e-7):
    # one-sided at the origin: the domain is [0, 1]^n
    J = np.empty((n, n))
    base = f(np.zeros(n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = eps
        J[:, j] = (f(e) - base) / eps
    return J


def _symmetric_root(k, params):
    """Nontrivial root of the scalar reduction on a k-regular vertex-transitive graph."""
    b, d = params.beta, params.delta

    def f(q):
        return q * (1 - d) + (1 - (1 - d) * q) * (1 - (1 - b * q) ** k) - q

    return bisect(f, 1e-6, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def test_maps_fix_origin(small_graph):
    g = small_graph
    p = EpidemicParams(0.4, 0.3, 0.5)
    z = np.zeros(g.n)
    assert np.array_equal(mfa.psi_map(z, g, p), z)
    assert np.array_equal(mfa.phi_map(z, g, g, p), z)


def test_psi_at_ones_on_triangle():
    p = EpidemicParams(0.3, 0.2)
    expected = (1 - p.delta) + p.delta * (1 - (1 - p.beta) ** 2)
    assert np.allclose(mfa.psi_map(np.ones(3), K3, p), expected, atol=1e-15)


@pytest.mark.parametrize("name", ["path3", "star4", "k4", "cycle5"])
def test_jacobian_at_origin(name):
    g = SMALL_GRAPHS[name]()
    p = EpidemicParams(0.35, 0.25, 0.6)
    social = gr.rewire_social(g, 0.5, 11)
    target = mfa.linearization(g, p)
    Jpsi = _jacobian_fd(lambda x: mfa.psi_map(x, g, p), g.n)
    Jphi = _jacobian_fd(lambda x: mfa.phi_map(x, g, social, p), g.n)
    assert np.max(np.abs(Jpsi - target)) < 1e-6
    assert np.max(np.abs(Jphi - target)) < 1e-6
    assert np.max(np.abs(Jphi - Jpsi)) < 1e-6


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), alpha=st.floats(0.0, 0.99),
       beta=st.floats(0.01, 0.99), delta=st.floats(0.01, 0.99))
def test_phi_strictly_below_psi(seed, alpha, beta, delta):
    rng = np.random.default_rng(seed)
    g = gr.largest_connected_component(gr.gen_erdos_renyi(12, 0.3, seed))
    social = gr.rewire_social(g, 0.3, seed)
    p = EpidemicParams(beta, delta, alpha)
    x = rng.uniform(0.01, 1.0, g.n)
    phi, psi = mfa.phi_map(x, g, social, p), mfa.psi_map(x, g, p)
    assert np.all(phi < psi)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), alpha=st.floats(0.0, 1.0),
       beta=st.floats(0.01, 0.99), delta=st.floats(0.01, 0.99))
def test_maps_stay_in_unit_cube(seed, alpha, beta, delta):
    rng = np.random.default_rng(seed)
    g = gr.gen_erdos_renyi(15, 0.3, seed)
    social = gr.rewire_social(g, 0.5, seed)
    p = EpidemicParams(beta, delta, alpha)
    for x in (np.zeros(g.n), np.ones(g.n), rng.random(g.n), (rng.random(g.n) < 0.5).astype(float)):
        for y in (mfa.psi_map(x, g, p), mfa.phi_map(x, g, social, p)):
            assert np.all((y >= 0) & (y <= 1))
        assert np.all(mfa.phi_map(x, g, social, p) <= mfa.psi_map(x, g, p) + 1e-15)


def test_domain_error():
    p = EpidemicParams(0.3, 0.2)
    with pytest.raises(ParameterError):
        mfa.psi_map(np.array([0.5, 1.2, 0.0]), K3, p)
    with pytest.raises(ParameterError):
        mfa.phi_map(np.array([0.5, -0.1, 0.0]), K3, K3, p)
    with pytest.raises(ParameterError):
        mfa.psi_map(np.zeros(4), K3, p)
    with pytest.raises(ParameterError):
        mfa.iterate_fixed_point("psi", Graphs(K3), p, tol=0)
    with pytest.raises(ParameterError):
        mfa.get_map("chi", Graphs(K3), p)


@pytest.mark.parametrize("k,graph", [(2, K3), (3, gr.complete_graph(4)), (2, gr.cycle_graph(7))])
def test_symmetric_fixed_point_matches_scalar_root(k, graph):
    p = EpidemicParams(0.4, 0.3)
    rep = mfa.iterate_fixed_point("psi", Graphs(graph), p, tol=1e-13)
    assert rep.converged and rep.classification == "nontrivial"
    assert np.ptp(rep.point) < 1e-9
    assert abs(rep.point.mean() - _symmetric_root(k, p)) < 1e-8


def test_phi_fixed_point_below_psi_on_triangle():
    g = Graphs(K3)
    for alpha in (0.0, 0.5, 0.9):
        p = EpidemicParams(0.4, 0.3, alpha)
        q = mfa.iterate_fixed_point("psi", g, p).point
        r = mfa.iterate_fixed_point("phi", g, p)
        assert r.converged and r.classification == "nontrivial"
        assert mfa.dominance_check(r.point, q).holds


def test_alpha_one_dominance_is_weak():
    # strictness is only claimed for alpha < 1; record that weak dominance holds at alpha = 1
    g = Graphs(gr.path_graph(5), gr.star_graph(5))
    p = EpidemicParams(0.5, 0.2, 1.0)
    q = mfa.iterate_fixed_point("psi", g, p).point
    r = mfa.iterate_fixed_point("phi", g, p).point
    assert np.all(r <= q)


def test_threshold_examples():
    assert mfa.threshold_value(K3, EpidemicParams(0.1, 0.5)) == pytest.approx(0.7)
    assert mfa.threshold_classify(K3, EpidemicParams(0.1, 0.5)) == "subcritical"
    assert mfa.threshold_classify(K3, EpidemicParams(0.5, 0.5)) == "supercritical"
    # delta / beta = lambda_max = 2
    assert mfa.threshold_classify(K3, EpidemicParams(0.25, 0.5)) == "critical"
    assert mfa.threshold_classify(K3, EpidemicParams(0.25, 0.5), lam=2.0 + 1e-6) == "supercritical"


def test_dominance_check_examples():
    q = np.array([0.2, 0.1, 0.3])
    rep = mfa.dominance_check(np.zeros(3), q)
    assert rep.holds and rep.worst_margin == pytest.approx(0.1) and rep.worst_node == 1
    assert not mfa.dominance_check(q, q).holds
    with pytest.raises(ParameterError):
        mfa.dominance_check(np.zeros(2), q)


def test_max_iter_exhaustion_reported():
    rep = mfa.iterate_fixed_point("psi", Graphs(K3), EpidemicParams(0.4, 0.3), max_iter=3)
    assert not rep.converged and rep.iterations == 3


@pytest.mark.parametrize("graph", [K3, gr.cycle_graph(8), gr.complete_graph(5)])
def test_subcritical_sup_norm_decreases_on_regular_graphs(graph):
    lam = gr.spectral_radius(graph)
    p = EpidemicParams(0.1, min(0.99, 0.1 * lam + 0.05), 0.5)
    assert mfa.threshold_classify(graph, p) == "subcritical"
    rng = np.random.default_rng(0)
    for which in ("psi", "phi"):
        f = mfa.get_map(which, Graphs(graph), p)
        for x0 in (np.full(graph.n, 0.5), np.ones(graph.n), rng.random(graph.n)):
            x, prev = x0, np.max(x0)
            for _ in range(2000):
                x = f(x)
                cur = np.max(x)
                assert cur <= prev
                prev = cur
                if cur < 1e-8:
                    break
            assert prev < 1e-8


def test_subcritical_perron_norm_decreases():
    # on irregular graphs the sup-norm can rise for a step; the Perron-weighted norm cannot
    g = gr.largest_connected_component(gr.gen_preferential_attachment(60, 2, 4))
    lam = gr.spectral_radius(g)
    p = EpidemicParams(0.05, 0.05 * lam + 0.02, 0.3)
    assert mfa.threshold_classify(g, p) == "subcritical"
    w, v = np.linalg.eigh(g.dense_adjacency())
    v = np.abs(v[:, -1])
    rng = np.random.default_rng(1)
    for which in ("psi", "phi"):
        f = mfa.get_map(which, Graphs(g), p)
        x = rng.random(g.n)
        prev = v @ x
        for _ in range(20000):
            x = f(x)
            cur = v @ x
            assert cur < prev
            prev = cur
            if x.max() < 1e-8:
                break
        assert x.max() < 1e-8


def test_supercritical_phi_point_positive():
    g = gr.largest_connected_component(gr.gen_erdos_renyi(80, 0.08, 2))
    social = gr.rewire_social(g, 0.5, 2)
    lam = gr.spectral_radius(g)
    p = EpidemicParams(0.1, 0.5 * 0.1 * lam, 0.5)
    assert mfa.threshold_classify(g, p) == "supercritical"
    rep = mfa.iterate_fixed_point("phi", Graphs(g, social), p)
    assert rep.converged and rep.point.min() > 0 and rep.classification == "nontrivial"


def test_sup_norm_can_rise_on_subcritical_star():
    # hub of a 100-leaf star: beta * sqrt(100) < delta, yet beta * 100 > 1
    g = gr.star_graph(101)
    p = EpidemicParams(0.05, 0.6)
    assert mfa.threshold_classify(g, p) == "subcritical"
    x0 = np.full(g.n, 0.5)
    assert mfa.psi_map(x0, g, p).max() > x0.max()
    assert mfa.iterate_fixed_point("psi", Graphs(g), p, tol=1e-13).point.max() < 1e-8
