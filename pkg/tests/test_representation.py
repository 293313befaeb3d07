from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zetaforge.moebius import MoebiusTransform
from zetaforge.representation import (Representation, RepresentationError, direct_sum,
                                      evaluate, growth_exponent, has_necm, hecke_generators,
                                      hecke_twist, induce, jordan_basis, jordan_structure,
                                      rep_from_json, sl2_irrep, sl2_matrix, trivial)
from zetaforge.symbolic import schottky_rank2, subgroup_model
from zetaforge.words import inverse, multiply

from conftest import random_twist

T = MoebiusTransform(1.0, 1.0, 0.0, 1.0)
H = MoebiusTransform(2.0, 0.0, 0.0, 0.5)

letters = st.tuples(st.sampled_from("ab"), st.sampled_from([1, -1]))
words = st.lists(letters, max_size=6).map(tuple)


def test_evaluate_examples():
    rep = random_twist("ab")
    assert np.allclose(evaluate(rep, ()), np.eye(2))
    assert np.allclose(evaluate(rep, "a a^-1"), np.eye(2), atol=1e-13)
    assert np.allclose(evaluate(rep, "a b"), rep.images["a"] @ rep.images["b"])


def test_json_roundtrip():
    rep = random_twist("ab")
    back = rep_from_json(rep.to_json())
    for s in "ab":
        assert np.array_equal(back.images[s], rep.images[s])


def test_singular_image_rejected():
    with pytest.raises(RepresentationError):
        Representation(2, {"a": np.zeros((2, 2))})


def test_jordan_examples():
    js = jordan_structure(np.eye(3))
    assert js.blocks[0][1] == (1, 1, 1)
    js = jordan_structure([[1, 1, 1], [0, 1, 2], [0, 0, 1]])
    assert len(js.blocks) == 1 and js.chains == [3]
    assert js.blocks[0][0] == pytest.approx(1.0)
    js = jordan_structure([[1j, 1], [0, 1j]])
    assert js.chains == [2] and js.blocks[0][0] == pytest.approx(1j)


@st.composite
def jordan_inputs(draw):
    n = draw(st.integers(1, 4))
    parts = []
    left = n
    while left:
        k = draw(st.integers(1, left))
        parts.append(k)
        left -= k
    eig = draw(st.lists(st.sampled_from([1.0, -1.0, 2.0, 1j]), min_size=len(parts),
                        max_size=len(parts)))
    seed = draw(st.integers(0, 10_000))
    return parts, eig, seed


@settings(max_examples=60)
@given(jordan_inputs())
def test_jordan_reconstruction(inp):
    parts, eig, seed = inp
    n = sum(parts)
    J = np.zeros((n, n), dtype=complex)
    i = 0
    for k, lam in zip(parts, eig):
        for j in range(k):
            J[i + j, i + j] = lam
            if j + 1 < k:
                J[i + j, i + j + 1] = 1
        i += k
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    M = Q @ J @ Q.conj().T
    S, js = jordan_basis(M)
    assert js.dim == n
    assert sum(js.chains) == n
    R = S @ js.jordan_matrix() @ np.linalg.inv(S)
    assert np.linalg.norm(R - M) <= 1e-7 * np.linalg.norm(M)


def test_necm_examples():
    assert has_necm(trivial("ab"), ["a"]).ok
    rep = Representation(2, {"p": np.diag([2.0, 0.5])})
    assert not has_necm(rep, ["p"]).ok
    hk = hecke_twist(3)
    rep = has_necm(hk, ["T"])
    assert rep.ok
    eig = np.linalg.eigvals(hk.images["T"])
    assert np.allclose(eig, np.exp(2j * np.pi / 3), atol=1e-4)


@given(st.integers(0, 1000))
def test_necm_conjugation_invariant(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    hk = hecke_twist(3)
    assert has_necm(hk.conjugate(A), ["T"]).ok == has_necm(hk, ["T"]).ok
    bad = Representation(2, {"p": np.diag([2.0, 0.5])})
    assert has_necm(bad.conjugate(A[:2, :2]), ["p"]).ok == has_necm(bad, ["p"]).ok


def test_growth_examples():
    uni = Representation(2, {"p": np.array([[0, 1], [-1, 0]])})
    g = growth_exponent(uni, "p", 200)
    assert abs(g.slope) < 1e-8 and g.max_ratio <= 1 + 1e-12
    chi2 = sl2_irrep(2, {"T": T})
    g = growth_exponent(chi2, "T", 1000)
    assert g.d_p == 3 and 1.95 <= g.slope <= 2.05
    jb = Representation(2, {"p": np.array([[-1, 1], [0, -1]])})
    g = growth_exponent(jb, "p", 1000)
    assert g.d_p == 2 and abs(g.slope - 1) < 0.01


def test_growth_sup_stabilizes():
    chi2 = sl2_irrep(2, {"T": T})
    a = growth_exponent(chi2, "T", 500).max_ratio
    b = growth_exponent(chi2, "T", 1000).max_ratio
    assert a == b


def test_sl2_examples():
    r0 = sl2_irrep(0, {"T": T})
    assert r0.dim == 1 and np.allclose(r0.images["T"], 1)
    assert np.allclose(sl2_matrix(T, 2), [[1, 1, 1], [0, 1, 2], [0, 0, 1]])


def test_sl2_diagonal_by_symbolic_expansion():
    # f(g^-1 v) for g = diag(2, 1/2): g^-1 (x, y) = (x/2, 2y), so x^j y^(2-j) -> 2^(2-2j) x^j y^(2-j)
    M = sl2_matrix(H, 2)
    assert np.allclose(M, np.diag([4.0, 1.0, 0.25]))
    rep = sl2_irrep(2, {"g": H})
    H2 = MoebiusTransform(4.0, 0.0, 0.0, 0.25)
    assert np.allclose(evaluate(rep, "g g"), sl2_matrix(H2, 2))


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 2))
def test_sl2_is_homomorphism(b, c, a):
    g = MoebiusTransform(a, b, c, (1 + b * c) / a)
    h = MoebiusTransform(1.0, 0.7, 0.0, 1.0)
    lhs = sl2_matrix(g @ h, 2)
    rhs = sl2_matrix(g, 2) @ sl2_matrix(h, 2)
    assert np.allclose(lhs, rhs, atol=1e-9 * max(1, np.abs(lhs).max()))


def test_hecke_twist_examples():
    rho = hecke_twist(3)
    assert np.linalg.norm(evaluate(rho, "T S T S T S") - np.eye(3)) <= 1e-10
    RT = rho.images["T"]
    assert np.linalg.norm(RT @ RT.conj().T - np.eye(3)) > 0.1
    gens = hecke_generators(3)
    assert gens["T"].b == pytest.approx(1.0)


def _schottky_kernel():
    g = schottky_rank2()
    return g, subgroup_model(g, {"a": 1, "b": 1}, 2)


def test_induce_index_one_is_identity():
    eta = random_twist("ab")
    ind = induce(eta, [()], lambda w: True, "ab").rep
    for s in "ab":
        assert np.allclose(ind.images[s], eta.images[s])


def test_induce_kernel_traces():
    g, k = _schottky_kernel()
    ind = induce(trivial(k.model.symbols), k.transversal, k.member, g.symbols, k.rewrite)
    assert np.trace(evaluate(ind.rep, "a")) == pytest.approx(0.0)
    assert np.trace(evaluate(ind.rep, "a a")) == pytest.approx(2.0)


@settings(max_examples=100)
@given(words)
def test_frobenius_character_formula(w):
    g, k = _schottky_kernel()
    eta = random_twist(k.model.symbols, dim=2, seed=3)
    ind = induce(eta, k.transversal, k.member, g.symbols, k.rewrite)
    lhs = np.trace(evaluate(ind.rep, w))
    rhs = 0j
    for h in k.transversal:
        c = multiply(h, w, inverse(h))
        if k.member(c):
            rhs += np.trace(evaluate(eta, k.rewrite(c)))
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


def test_induced_permutation_power_is_block_diagonal():
    g, k = _schottky_kernel()
    ind = induce(trivial(k.model.symbols), k.transversal, k.member, g.symbols, k.rewrite)
    for w in ("a", "b", "a b^-1", "a a b"):
        order = ind.permutation_order(w)
        assert order <= 2
        M = np.linalg.matrix_power(evaluate(ind.rep, w), order)
        assert np.allclose(M, np.diag(np.diag(M)))


def test_direct_sum_examples():
    one = trivial("ab")
    two = direct_sum(one, one)
    assert two.dim == 2 and np.allclose(two.images["a"], np.eye(2))


@given(words)
def test_direct_sum_trace(w):
    r1, r2 = random_twist("ab", 2, 1), random_twist("ab", 1, 2)
    s = direct_sum(r1, r2)
    assert np.trace(evaluate(s, w)) == pytest.approx(
        np.trace(evaluate(r1, w)) + np.trace(evaluate(r2, w)), rel=1e-10, abs=1e-12)


def test_induced_trivial_equals_trivial_plus_sign():
    g, k = _schottky_kernel()
    ind = induce(trivial(k.model.symbols), k.transversal, k.member, g.symbols, k.rewrite).rep
    sign = Representation(1, {"a": [[-1.0]], "b": [[-1.0]]})
    s = direct_sum(trivial("ab"), sign)
    for n in range(7):
        for w in itertools.product([("a", 1), ("a", -1), ("b", 1), ("b", -1)], repeat=n):
            assert np.trace(evaluate(ind, w)) == pytest.approx(np.trace(evaluate(s, w)))
