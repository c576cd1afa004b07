import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quiverlearn.errors import DomainSamplingFailed, SingularBasisPart, SingularGauge
from quiverlearn.quiver import Quiver, a1_quiver, a2_quiver, diamond_quiver
from quiverlearn.representation import (ChartLayout, FramedRep, GaugeElement, act,
                                        action_differential, gauge_fix, is_gauge_fixed,
                                        is_stable, random_gauge, random_rep, zero_rep)

from conftest import random_quiver

DIAMOND = diamond_quiver(n=(3, 2, 2, 2), d=(2, 1, 1, 1))


def test_shape_validation():
    q = a2_quiver()
    with pytest.raises(ValueError):
        FramedRep(q, {1: np.zeros((2, 1))}, {1: np.zeros((1, 2)), 2: np.zeros((1, 2))})


def test_real_mode_rejects_imaginary():
    q = a1_quiver()
    with pytest.raises(ValueError):
        FramedRep(q, {}, {1: np.array([[1.0, 1j]])}, real=True)
    p = FramedRep(q, {}, {1: np.array([[1.0, 0j]])}, real=True)
    assert p.e[1].dtype == np.float64


def test_arrays_are_read_only():
    p = random_rep(a2_quiver(), 0)
    with pytest.raises(ValueError):
        p.e[1][0, 0] = 3.0


def test_stability_a1():
    q = a1_quiver(n=2, d=1)
    assert is_stable(FramedRep(q, {}, {1: np.array([[0.0, 2.0]])}))
    assert not is_stable(FramedRep(q, {}, {1: np.zeros((1, 2))}))


def test_stability_through_arrow():
    # vertex 2 has no framing but receives the framed line from vertex 1
    q = Quiver.build([(1, 1, 1), (2, 0, 1)], [(1, 1, 2)])
    e = {1: np.ones((1, 1)), 2: np.zeros((1, 0))}
    assert is_stable(FramedRep(q, {1: np.ones((1, 1))}, e))
    assert not is_stable(FramedRep(q, {1: np.zeros((1, 1))}, e))


def test_zero_rep_is_gauge_fixed():
    p = zero_rep(DIAMOND)
    assert is_gauge_fixed(p) and is_stable(p)


def test_gauge_fix_result():
    p = random_rep(DIAMOND, 3)
    f = gauge_fix(p)
    assert is_gauge_fixed(f)
    # the fixing gauge is the inverse basis part
    g = GaugeElement({v.id: np.linalg.inv(p.basis(v.id)) for v in DIAMOND.vertices})
    assert act(g, p).max_deviation(f) < 1e-12


def test_gauge_fix_failures():
    q = Quiver.build([(1, 1, 2)])
    with pytest.raises(SingularBasisPart):
        gauge_fix(FramedRep(q, {}, {1: np.ones((2, 1))}))
    q = a1_quiver(n=2, d=1)
    with pytest.raises(SingularBasisPart):
        gauge_fix(FramedRep(q, {}, {1: np.array([[0.0, 1.0]])}))


def test_singular_gauge():
    q = a1_quiver()
    with pytest.raises(SingularGauge):
        act(GaugeElement({1: np.zeros((1, 1))}), random_rep(q, 0))


def test_complex_gauge_on_real_point_gives_complex():
    q = a1_quiver()
    p = random_rep(q, 0, real=True)
    out = act(GaugeElement({1: np.array([[1j]])}), p)
    assert not out.real


def test_group_action_composes():
    rng = np.random.default_rng(0)
    p = random_rep(DIAMOND, 1)
    g, h = random_gauge(DIAMOND, rng), random_gauge(DIAMOND, rng)
    assert act(g @ h, p).max_deviation(act(g, act(h, p))) < 1e-10
    assert act(g.inverse(), act(g, p)).max_deviation(p) < 1e-10


@pytest.mark.parametrize("domain", ["stable", "euclidean", "hyperbolic"])
def test_random_rep_deterministic(domain):
    a = random_rep(DIAMOND, 5, domain)
    b = random_rep(DIAMOND, 5, domain)
    assert a.equals(b)
    if domain != "stable":
        assert is_gauge_fixed(a)


def test_random_rep_needs_n_at_least_d():
    with pytest.raises(DomainSamplingFailed):
        random_rep(Quiver.build([(1, 1, 2)]), 0, "hyperbolic")


def test_action_differential_shape_and_rank():
    p = random_rep(DIAMOND, 2)
    A = action_differential(p)
    total = sum(v.d ** 2 for v in DIAMOND.vertices)
    assert A.shape[1] == total
    assert np.linalg.matrix_rank(A) == total


def test_action_differential_matches_finite_difference():
    rng = np.random.default_rng(4)
    q = DIAMOND
    p = random_rep(q, 4)
    xi = {v.id: rng.standard_normal((v.d, v.d)) for v in q.vertices}
    vec = np.concatenate([xi[v.id].ravel() for v in q.vertices])
    t = 1e-6
    from scipy.linalg import expm

    plus = act(GaugeElement({i: expm(t * m) for i, m in xi.items()}), p)
    minus = act(GaugeElement({i: expm(-t * m) for i, m in xi.items()}), p)
    flat = lambda r: np.concatenate([r.w[a.id].ravel() for a in q.arrows]
                                    + [r.e[i].ravel() for i in q.vertex_ids])
    fd = (flat(plus) - flat(minus)) / (2 * t)
    assert np.max(np.abs(action_differential(p) @ vec - fd)) < 1e-7


@pytest.mark.parametrize("real", [False, True])
def test_chart_roundtrip(real):
    layout = ChartLayout(DIAMOND, real=real)
    p = random_rep(DIAMOND, 6, "euclidean", real=real)
    theta = layout.pack(p)
    assert theta.shape == (layout.size,)
    assert len(layout.labels()) == layout.size
    assert layout.unpack(theta).equals(p)


def test_chart_size_counts_moduli():
    from quiverlearn.quiver import moduli_dimension

    assert ChartLayout(DIAMOND).complex_size == moduli_dimension(DIAMOND)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gauge_fix_is_gauge_invariant(seed):
    rng = np.random.default_rng(seed)
    q = random_quiver(rng, max_vertices=4, max_dim=3)
    p = random_rep(q, seed % 1000)
    g = random_gauge(q, rng)
    assert gauge_fix(act(g, p)).max_deviation(gauge_fix(p)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stability_is_gauge_invariant(seed):
    rng = np.random.default_rng(seed)
    q = random_quiver(rng, max_vertices=4, max_dim=3, n_at_least_d=False)
    try:
        p = random_rep(q, seed % 1000, max_tries=5)
    except DomainSamplingFailed:
        return
    assert is_stable(act(random_gauge(q, rng), p))


def test_identity_gauge_is_trivial():
    p = random_rep(DIAMOND, 0)
    assert act(GaugeElement.identity(DIAMOND), p).equals(p)


def test_a1_scalar_gauge_keeps_form_values():
    from quiverlearn.metric import COMPACT, metric_state

    q = a1_quiver(n=2, d=1)
    p = FramedRep(q, {}, {1: np.array([[1.0, 0.4 - 0.2j]])})
    lam = 1.5 - 0.5j
    gp = act(GaugeElement({1: np.array([[lam]])}), p)
    assert np.allclose(gp.e[1], lam * p.e[1])
    H, Hg = metric_state(p, COMPACT).H[1], metric_state(gp, COMPACT).H[1]
    assert np.allclose(Hg, 1 / (abs(lam) ** 2 * np.sum(np.abs(p.e[1]) ** 2)))
    x = 0.7 + 0.1j
    assert np.isclose(np.conj(x) * H[0, 0] * x, np.conj(lam * x) * Hg[0, 0] * (lam * x))


def test_stability_small_cases():
    q = a1_quiver(n=1, d=1)
    assert not is_stable(FramedRep(q, {}, {1: np.zeros((1, 1))}))
    assert is_stable(FramedRep(q, {}, {1: np.ones((1, 1))}))
    q = a2_quiver(n=(1, 1))
    p = FramedRep(q, {1: np.zeros((1, 1))}, {1: np.ones((1, 1)), 2: np.zeros((1, 1))})
    assert not is_stable(p)


def test_gauge_fix_small_cases():
    q = a1_quiver(n=2, d=1)
    f = gauge_fix(FramedRep(q, {}, {1: np.array([[2.0, 1.0]])}))
    assert np.allclose(f.e[1], [[1.0, 0.5]])
    p = random_rep(a2_quiver(), 0, "euclidean")
    assert gauge_fix(p).max_deviation(p) == 0.0
    f = gauge_fix(random_rep(DIAMOND, 1))
    assert gauge_fix(f).max_deviation(f) < 1e-14


def test_zero_point_is_hyperbolic_with_identity_metric():
    from quiverlearn.metric import HYPERBOLIC, in_domain, metric_state

    for q in (a1_quiver(), a2_quiver(), DIAMOND):
        p = zero_rep(q)
        assert in_domain(p, HYPERBOLIC).ok
        assert all(np.allclose(H, np.eye(H.shape[0])) for H in metric_state(p, HYPERBOLIC).H.values())


def test_stable_sampling():
    assert all(is_stable(random_rep(DIAMOND, k)) for k in range(100))
