import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quiverlearn.errors import NonPositive, OutOfDomain, SingularForm
from quiverlearn.metric import (COMPACT, EUCLIDEAN, HYPERBOLIC, MetricSignature, as_signature,
                                form_pathsum, in_domain, metric_jvp, metric_pathsum,
                                metric_recursive, metric_state, metric_vjp,
                                moduli_metric_tensor, rho)
from quiverlearn.quiver import a1_quiver, a2_quiver, diamond_quiver
from quiverlearn.representation import (FramedRep, act, random_gauge, random_rep)

from conftest import random_quiver

DIAMOND = diamond_quiver(n=(3, 2, 2, 2), d=(2, 1, 1, 1))
DIAMOND_PATHS_INTO_4 = [(), (3,), (4,), (1, 3), (2, 4)]


def explicit_form(p, i, coeff_of_path, bias_coeff):
    """Oracle: sum the framing blocks of every path into ``i`` by hand."""
    q = p.quiver
    d = q.d[i]
    e = p.e[i]
    out = e[:, :d] @ e[:, :d].conj().T + bias_coeff * e[:, d:] @ e[:, d:].conj().T
    stack = [((), i, np.eye(d))]
    while stack:
        arrows, v, M = stack.pop()
        for a in q.arrows:
            if a.dst == v:
                path = (a.id,) + arrows
                N = M @ p.w[a.id]
                blk = N @ p.e[a.src]
                out = out + coeff_of_path(path) * blk @ blk.conj().T
                stack.append((path, a.src, N))
    return out


def test_signature_presets():
    assert as_signature("Hyperbolic") == HYPERBOLIC
    assert COMPACT.preset == "compact" and EUCLIDEAN.sign == 0 and HYPERBOLIC.sign == -1
    assert MetricSignature(1.0, 0.5).scalar is None
    with pytest.raises(ValueError):
        as_signature("spherical")


def test_signature_validate_rejects_unknown_path():
    with pytest.raises(ValueError):
        MetricSignature(-1.0, path_coeffs={(9,): 1.0}).validate(DIAMOND)


def test_a1_closed_forms():
    """Fubini-Study and Poincare metrics on the line, 100 random biases."""
    rng = np.random.default_rng(0)
    q = a1_quiver(n=2, d=1)
    for _ in range(100):
        r = rng.uniform(0, 0.99)
        b = r * np.exp(2j * np.pi * rng.random())
        p = FramedRep(q, {}, {1: np.array([[1.0, b]])})
        H = metric_recursive(p, COMPACT).H[1][0, 0]
        Hm = metric_recursive(p, HYPERBOLIC).H[1][0, 0]
        assert abs(H - 1 / (1 + abs(b) ** 2)) < 1e-12
        assert abs(Hm - 1 / (1 - abs(b) ** 2)) < 1e-12
        assert in_domain(p, HYPERBOLIC).ok
    outside = FramedRep(q, {}, {1: np.array([[1.0, 1.2]])})
    assert not in_domain(outside, HYPERBOLIC).ok


def test_a2_hyperbolic_closed_form():
    q = a2_quiver(n=(3, 3), d=(2, 2))
    for seed in range(10):
        p = random_rep(q, seed, "hyperbolic")
        b1, b2, w = p.bias(1), p.bias(2), p.w[1]
        H1 = np.linalg.inv(np.eye(2) - b1 @ b1.conj().T)
        compact_tail = np.eye(2) + b1 @ b1.conj().T
        H2 = np.linalg.inv(np.eye(2) - b2 @ b2.conj().T - w @ compact_tail @ w.conj().T)
        st_ = metric_recursive(p, HYPERBOLIC)
        assert np.max(np.abs(st_.H[1] - H1)) < 1e-12
        assert np.max(np.abs(st_.H[2] - H2)) < 1e-12


@pytest.mark.parametrize("s", [1.0, 0.0, -1.0, 0.3, -0.6])
def test_uniform_forms_match_explicit_sum(s):
    sig = MetricSignature.uniform(s)
    p = random_rep(DIAMOND, 1, "hyperbolic")
    for i in DIAMOND.vertex_ids:
        want = explicit_form(p, i, lambda path: s, s)
        assert np.max(np.abs(form_pathsum(p, i, sig) - want)) < 1e-12
        assert np.max(np.abs(metric_recursive(p, sig).S[i] - want)) < 1e-12


def test_nonuniform_signature_pathsum():
    coeffs = {(1, 3): 0.25, (4,): -2.0}
    sig = MetricSignature(-0.5, 0.7, coeffs)
    p = random_rep(DIAMOND, 2, "hyperbolic", scale=0.2)
    want = explicit_form(p, 4, lambda path: coeffs.get(path, 0.7), -0.5)
    assert np.max(np.abs(form_pathsum(p, 4, sig) - want)) < 1e-12
    with pytest.raises(ValueError):
        metric_recursive(p, sig)
    st_ = metric_state(p, sig)
    assert np.max(np.abs(st_.H[4] - np.linalg.inv(want))) < 1e-10


def test_rho_block_order():
    p = random_rep(DIAMOND, 0)
    r = rho(p, 4)
    # trivial path, a3, a4, a3.a1, a4.a2 with widths 2, 2, 2, 3, 3
    assert r.shape == (1, 12)
    assert np.allclose(r[:, 6:9], p.w[3] @ p.w[1] @ p.e[1])


def test_singular_form():
    q = a1_quiver(n=2, d=1)
    p = FramedRep(q, {}, {1: np.array([[1.0, 1.0]])})
    with pytest.raises(SingularForm) as info:
        metric_recursive(p, HYPERBOLIC)
    assert info.value.vertex == 1


def test_require_domain_names_vertex():
    q = a2_quiver()
    p = FramedRep(q, {1: np.array([[3.0]])}, {1: np.array([[1.0, 0.1]]), 2: np.array([[1.0, 0.1]])})
    with pytest.raises(OutOfDomain) as info:
        metric_state(p, HYPERBOLIC, require_domain=True)
    assert info.value.vertex == 2
    rep = in_domain(p, HYPERBOLIC)
    assert rep.failed == (2,) and rep.min_eig[1] > 0 > rep.min_eig[2]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_recursion_equals_pathsum(seed):
    rng = np.random.default_rng(seed)
    q = random_quiver(rng)
    for sig, domain in ((COMPACT, "stable"), (EUCLIDEAN, "euclidean"), (HYPERBOLIC, "hyperbolic")):
        p = random_rep(q, seed % 997, domain)
        st_ = metric_recursive(p, sig)
        for i in q.vertex_ids:
            assert np.max(np.abs(st_.H[i] - metric_pathsum(p, i, sig))) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["compact", "euclidean", "hyperbolic"]))
def test_metric_equivariance(seed, preset):
    """H transforms as g^-* H g^-1, so quadratic-form values are invariant."""
    rng = np.random.default_rng(seed)
    q = random_quiver(rng, max_vertices=4, max_dim=3)
    sig = as_signature(preset)
    p = random_rep(q, seed % 991, "hyperbolic" if sig.sign < 0 else "euclidean")
    g = random_gauge(q, rng)
    H1, H2 = metric_state(p, sig).H, metric_state(act(g, p), sig).H
    for v in q.vertices:
        gi = np.linalg.inv(g.g[v.id])
        assert np.max(np.abs(gi.conj().T @ H1[v.id] @ gi - H2[v.id])) < 1e-8 * max(1, np.max(np.abs(H1[v.id])))
    assert in_domain(p, sig).ok == in_domain(act(g, p), sig).ok


def _random_tangent(p, rng):
    q = p.quiver
    cplx = not p.real
    noise = lambda shape: rng.standard_normal(shape) + (1j * rng.standard_normal(shape) if cplx else 0)
    return ({i: noise(p.e[i].shape) for i in q.vertex_ids},
            {a.id: noise(p.w[a.id].shape) for a in q.arrows})


def _shift(p, de, dw, t):
    return FramedRep(p.quiver, {k: p.w[k] + t * dw[k] for k in p.w},
                     {k: p.e[k] + t * de[k] for k in p.e}, p.real)


@pytest.mark.parametrize("sig", [COMPACT, EUCLIDEAN, HYPERBOLIC, MetricSignature.uniform(0.4),
                                 MetricSignature(-0.5, 0.8, {(1, 3): 0.2})])
@pytest.mark.parametrize("real", [False, True])
def test_metric_jvp_and_vjp(sig, real):
    rng = np.random.default_rng(7)
    p = random_rep(DIAMOND, 3, "hyperbolic", real=real, scale=0.3)
    de, dw = _random_tangent(p, rng)
    st_ = metric_state(p, sig)
    h = 1e-6
    Hp = metric_state(_shift(p, de, dw, h), sig).H
    Hm = metric_state(_shift(p, de, dw, -h), sig).H
    dH = metric_jvp(p, st_, de, dw)
    for i in DIAMOND.vertex_ids:
        assert np.max(np.abs(dH[i] - (Hp[i] - Hm[i]) / (2 * h))) < 1e-7
    # L = Re sum tr(C_i^* H_i); its complex-encoded gradient in H_i is C_i
    C = {i: rng.standard_normal(st_.H[i].shape) + 1j * rng.standard_normal(st_.H[i].shape)
         for i in DIAMOND.vertex_ids}
    ge, gw = metric_vjp(p, st_, C)
    lhs = sum(np.real(np.vdot(ge[i], de[i])) for i in ge) + sum(np.real(np.vdot(gw[k], dw[k])) for k in gw)
    rhs = sum(np.real(np.vdot(C[i], dH[i])) for i in C)
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(rhs))


def test_tensor_a1_analytic():
    q = a1_quiver(n=2, d=1)
    rng = np.random.default_rng(1)
    for _ in range(10):
        b = 0.8 * rng.random() * np.exp(2j * np.pi * rng.random())
        p = FramedRep(q, {}, {1: np.array([[1.0, b]])})
        g_poincare = moduli_metric_tensor(p, HYPERBOLIC)[0, 0]
        g_fs = moduli_metric_tensor(p, COMPACT)[0, 0]
        assert abs(g_poincare - (1 - abs(b) ** 2) ** -2) < 1e-5
        assert abs(g_fs - (1 + abs(b) ** 2) ** -2) < 1e-5


def test_tensor_euclidean_is_identity():
    p = random_rep(DIAMOND, 0, "euclidean")
    assert np.array_equal(moduli_metric_tensor(p, EUCLIDEAN), np.eye(11))


@pytest.mark.parametrize("sig", [COMPACT, HYPERBOLIC])
def test_tensor_positive_and_hermitian(sig):
    for seed in range(5):
        p = random_rep(DIAMOND, seed, "hyperbolic")
        G = moduli_metric_tensor(p, sig)
        assert np.allclose(G, G.conj().T)
        assert np.linalg.eigvalsh(G)[0] > 1e-10


def test_tensor_out_of_domain():
    q = a1_quiver(n=2, d=1)
    with pytest.raises(OutOfDomain):
        moduli_metric_tensor(FramedRep(q, {}, {1: np.array([[1.0, 2.0]])}), HYPERBOLIC)


def test_tensor_degenerate_raises_nonpositive():
    # zero weight on the arrow path leaves the potential flat along the arrow
    p = random_rep(a2_quiver(), 0, "euclidean")
    with pytest.raises(NonPositive):
        moduli_metric_tensor(p, MetricSignature(1.0, 0.0))


def test_rho_small_cases():
    q = a1_quiver(n=2, d=1)
    p = FramedRep(q, {}, {1: np.array([[1.0, 0.5]])})
    assert np.allclose(rho(p, 1), [[1.0, 0.5]])
    p = random_rep(a2_quiver(), 0)
    assert np.allclose(rho(p, 2), np.hstack([p.e[2], p.w[1] @ p.e[1]]))


def test_a1_values():
    q = a1_quiver(n=2, d=1)
    p = FramedRep(q, {}, {1: np.array([[1.0, 0.5]])})
    assert np.isclose(metric_recursive(p, HYPERBOLIC).H[1][0, 0], 4 / 3, rtol=0, atol=1e-15)
    assert np.isclose(metric_recursive(p, COMPACT).H[1][0, 0], 0.8, rtol=0, atol=1e-15)


@pytest.mark.parametrize("s", [1.0, 0.0, -1.0, 0.37])
def test_zero_point_identity_metric(s):
    from quiverlearn.representation import zero_rep

    H = metric_recursive(zero_rep(DIAMOND), MetricSignature.uniform(s)).H
    assert all(np.array_equal(m, np.eye(m.shape[0])) for m in H.values())


def test_no_arrows_gives_single_grassmannians():
    from quiverlearn.quiver import Quiver

    q = Quiver.build([(1, 3, 1), (2, 3, 2)], [(1, 1, 2)])
    p = random_rep(q, 0, "hyperbolic").replace(w={1: np.zeros((2, 1))})
    for i in (1, 2):
        b = p.bias(i)
        want = np.linalg.inv(np.eye(q.d[i]) - b @ b.conj().T)
        assert np.allclose(metric_recursive(p, HYPERBOLIC).H[i], want)


def test_hyperbolic_domain_inside_euclidean():
    rng = np.random.default_rng(9)
    for k in range(100):
        p = random_rep(DIAMOND, k, "euclidean", scale=rng.uniform(0.1, 2.0))
        if in_domain(p, HYPERBOLIC).ok:
            assert in_domain(p, EUCLIDEAN).ok
    q = a1_quiver(n=2, d=1)
    p = FramedRep(q, {}, {1: np.array([[1.0, 2.0]])})
    assert not in_domain(p, HYPERBOLIC).ok
    assert in_domain(p, EUCLIDEAN).ok and in_domain(p, COMPACT).ok


def test_tensor_at_origin():
    q = a1_quiver(n=2, d=1)
    p = FramedRep(q, {}, {1: np.array([[1.0, 0.0]])})
    assert abs(moduli_metric_tensor(p, HYPERBOLIC)[0, 0] - 1) < 1e-7
    assert abs(moduli_metric_tensor(p, COMPACT)[0, 0] - 1) < 1e-7
