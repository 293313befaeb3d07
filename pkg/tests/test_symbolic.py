from __future__ import annotations

import math

import numpy as np
import pytest

from zetaforge import moebius as mb
from zetaforge.moebius import Interval, MoebiusTransform
from zetaforge.representation import Representation, trivial
from zetaforge.symbolic import (GroupError, build_cusped, build_schottky, cusped_example,
                                enumerate_classes, funnel, group_from_json, per_letter_gain,
                                schottky_rank2, subgroup_model, trace_bound_experiment)
from zetaforge.words import canonical_rotation, rotations

from conftest import random_twist

LOG4 = math.log(4.0)


def test_funnel_model_is_valid():
    g = funnel()
    assert g.kind == "schottky" and g.symbols == ("h",)
    assert mb.norm_and_length(g.generators["h"])[0] == pytest.approx(4.0)


def test_rank2_schottky_is_valid():
    g = schottky_rank2()
    assert set(g.symbols) == {"a", "b"}


def test_overlapping_intervals_rejected():
    g = schottky_rank2()
    ivs = dict(g.intervals)
    ivs[("b", 1)] = Interval(-3.5, -2.5)
    with pytest.raises(GroupError, match="overlap"):
        build_schottky(g.generators, ivs)


def test_json_roundtrip():
    g = cusped_example()
    back = group_from_json(g.to_json())
    assert back.kind == "cusped" and back.parabolic == ("p",)
    for s in g.symbols:
        assert back.generators[s].close(g.generators[s])


def test_cusped_example_is_valid():
    g = cusped_example()
    assert g.kind == "cusped"
    assert mb.classify(g.generators["p"]) == "parabolic"
    assert mb.norm_and_length(g.generators["h"])[0] > 1


def test_cusped_rejects_elliptic_p():
    g = cusped_example()
    with pytest.raises(GroupError, match="parabolic"):
        build_cusped(g.generators["h"], MoebiusTransform(0.0, 1.0, -1.0, 0.0), g.intervals)


def test_cusped_rejects_short_translation():
    # shrinking c2 widens the cusp intervals until ping-pong with h breaks;
    # scanning c2 in steps of 1/8 the first valid value is 4.5
    assert _cusped_ok(4.5) and _cusped_ok(12.0)
    assert not _cusped_ok(4.375)
    with pytest.raises(GroupError):
        cusped_example(c2=4.0)


def _cusped_ok(c2):
    try:
        cusped_example(c2=float(c2))
        return True
    except GroupError:
        return False


def test_rank1_enumeration():
    recs = enumerate_classes(funnel(), 3 * LOG4 + 1e-9)
    assert len(recs) == 6
    by_len = sorted((round(r.length / LOG4), r.multiplicity, r.primitive) for r in recs)
    assert by_len == [(1, 1, True), (1, 1, True), (2, 2, False), (2, 2, False),
                      (3, 3, False), (3, 3, False)]


def test_rank2_word_length_two():
    g = schottky_rank2()
    recs = [r for r in enumerate_classes(g, 12.0) if r.word_length <= 2]
    prim = sorted(r.text for r in recs if r.primitive)
    assert len(prim) == 8
    assert sum(1 for r in recs if r.primitive and r.word_length == 1) == 4
    assert {"a b", "a b^-1", "a^-1 b", "a^-1 b^-1"} <= set(prim)
    squares = [r for r in recs if not r.primitive]
    assert len(squares) == 4 and all(r.multiplicity == 2 for r in squares)


def _brute_force_classes(g, max_len, l_max):
    """Cyclically reduced words up to rotation, by exhaustive generation."""
    letters = list(g.letters)
    found = {}
    order = g.order
    frontier = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for l in letters:
                if w and w[-1] == (l[0], -l[1]):
                    continue
                nxt.append(w + (l,))
        frontier = nxt
        for w in frontier:
            if len(w) > 1 and w[0] == (w[-1][0], -w[-1][1]):
                continue
            N, ell = mb.norm_and_length(g.element(w))
            if ell <= l_max:
                found[canonical_rotation(w, order)] = ell
    return found


def test_enumeration_against_brute_force():
    g = schottky_rank2()
    l_max = 9.0
    m0 = per_letter_gain(g)
    recs = enumerate_classes(g, l_max)
    brute = _brute_force_classes(g, int(math.ceil(l_max / m0)), l_max)
    assert {r.word for r in recs} == set(brute)


def test_enumeration_is_monotone():
    g = schottky_rank2()
    a = {r.word for r in enumerate_classes(g, 8.0)}
    recs_b = enumerate_classes(g, 8.5)
    assert a <= {r.word for r in recs_b}
    assert all(r.length > 8.0 for r in recs_b if r.word not in a)
    assert all(r.length <= 8.5 for r in recs_b)


@pytest.mark.parametrize("model", [funnel(), schottky_rank2(), cusped_example()],
                         ids=["funnel", "schottky2", "cusped"])
def test_class_invariants(model):
    recs = enumerate_classes(model, 8.0)
    assert recs
    by_word = {r.word: r for r in recs}
    for r in recs:
        assert r.length <= 8.0 + 1e-12
        assert canonical_rotation(r.word, model.order) == r.word
        Ns = [mb.norm_and_length(model.element(w))[0] for w in rotations(r.word)]
        assert np.allclose(Ns, r.N, rtol=1e-10)
        if not r.primitive:
            root = by_word.get(canonical_rotation(r.root, model.order))
            N_root = root.N if root else mb.norm_and_length(model.element(r.root))[0]
            assert r.N == pytest.approx(N_root ** r.multiplicity, rel=1e-10)
    if model.kind == "cusped":
        # pure parabolic powers are not hyperbolic classes
        assert all(any(s != "p" for s, _ in r.word) for r in recs)


def test_per_letter_length_bound():
    g = schottky_rank2()
    m0 = per_letter_gain(g)
    assert m0 > 0
    for r in enumerate_classes(g, 10.0):
        assert r.length >= m0 * r.word_length - 1e-12


def test_kernel_of_index_two():
    g = schottky_rank2()
    k = subgroup_model(g, {"a": 1, "b": 1}, 2)
    assert len(k.model.symbols) == 3
    for w in k.generator_words.values():
        assert k.member(w)
    for sym, w in k.generator_words.items():
        assert k.model.generators[sym].close(g.element(w), 1e-9)


def test_trivial_hom_gives_same_group():
    g = schottky_rank2()
    k = subgroup_model(g, {"a": 0, "b": 0}, 1)
    assert k.model is g


def test_trace_bound_trivial_and_unitary():
    g = schottky_rank2()
    rep = trace_bound_experiment(g, trivial(g.symbols), 8.0)
    assert rep.max_ratio == 0.0 and not rep.violations
    th = 0.7
    U = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    rep = trace_bound_experiment(g, Representation(2, {"a": U, "b": U.T}), 8.0)
    assert rep.max_ratio <= 1e-12


def test_trace_bound_running_max_stable():
    g = schottky_rank2()
    chi = random_twist(g.symbols)
    a = trace_bound_experiment(g, chi, 8.0)
    b = trace_bound_experiment(g, chi, 10.0)
    assert math.isfinite(a.max_ratio)
    assert a.max_ratio == b.max_ratio
    assert not a.violations and not b.violations


def test_trace_bound_needs_schottky():
    with pytest.raises(GroupError):
        trace_bound_experiment(cusped_example(), trivial(("h", "p")), 5.0)
