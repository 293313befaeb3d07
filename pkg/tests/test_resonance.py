from __future__ import annotations

import io
import math

import numpy as np
import pytest

from zetaforge import resonance as rs
from zetaforge import transfer as tr
from zetaforge import zeta as z
from zetaforge.representation import Representation, trivial

L4 = math.log(4.0)


def funnel_closed(s, kmax=60):
    return np.prod([(1 - 4.0 ** (-(s + k))) ** 2 for k in range(kmax + 1)])


@pytest.fixture(scope="module")
def real_twist():
    return Representation(2, {"h": np.array([[1.3, 0.4], [0.2, 0.9]])})


TWIST_RECT = rs.Rect(-0.6, 0.6, -5.0, 5.0)
FUNNEL_RECT = rs.Rect(-1.3, 0.4, -5.0, 5.0)


@pytest.fixture(scope="module")
def twist_zeros(funnel_tuple, real_twist):
    return rs.find_zeros(funnel_tuple, real_twist, TWIST_RECT, 30)


@pytest.fixture(scope="module")
def funnel_zeros(funnel_tuple, funnel_model):
    return rs.find_zeros(funnel_tuple, trivial(funnel_model.symbols), FUNNEL_RECT, 30)


def twist_closed_zeros(A, rect, kmax=3, nmax=3):
    """det(1 - A q) det(1 - A^-1 q) with q = 4^-(s+k) vanishes where q is an inverse eigenvalue."""
    out = []
    for lam in np.concatenate([np.linalg.eigvals(A), 1 / np.linalg.eigvals(A)]):
        for k in range(kmax + 1):
            for n in range(-nmax, nmax + 1):
                s = complex(math.log(lam.real) / L4 - k, 2 * math.pi * n / L4)
                if rect.contains(s):
                    out.append(s)
    return sorted(out, key=lambda w: (round(w.real, 9), round(w.imag, 9)))


# --------------------------------------------------------------------- scan

def test_scan_matches_closed_form(funnel_tuple, funnel_model):
    sc = rs.scan(funnel_tuple, trivial(funnel_model.symbols), rs.Rect(-0.5, 2.5, -1, 1),
                 (13, 9), 30)
    ref = np.array([[funnel_closed(complex(x, y)) for x in sc.re] for y in sc.im])
    assert sc.values.shape == (9, 13)
    assert np.all(sc.status == "ok")
    assert np.max(np.abs(sc.values - ref)) <= 1e-9


def test_empty_rect(funnel_tuple, funnel_model):
    sc = rs.scan(funnel_tuple, trivial(funnel_model.symbols), rs.Rect(0, 0, -1, 1), (5, 5), 10)
    assert sc.values.size == 0
    assert rs.find_zeros(funnel_tuple, trivial(funnel_model.symbols), rs.Rect(0, 1, 2, 2), 10) == []


def test_reversed_rect_rejected():
    with pytest.raises(rs.ResonanceError):
        rs.Rect(1, 0, 0, 1)


def test_refinement_halves_neighbour_jump(schottky_tuple, trivial_schottky):
    # away from zeros the function is smooth, so the max jump scales with the spacing
    R = rs.Rect(1.0, 2.0, 0.5, 1.5)
    jumps = []
    for n in (9, 17, 33):
        v = rs.scan(schottky_tuple, trivial_schottky, R, (n, n), 12).values
        jumps.append(max(np.max(np.abs(np.diff(v, axis=0))), np.max(np.abs(np.diff(v, axis=1)))))
    for a, b in zip(jumps, jumps[1:]):
        assert b <= 0.55 * a


def test_scan_masks_poles(cusped_tuple, cusped):
    sc = rs.scan(cusped_tuple, trivial(cusped.symbols), rs.Rect(0.0, 1.0, -0.5, 0.5), (3, 3), 12)
    assert list(sc.status[1]) == ["pole", "pole", "ok"]
    assert np.all(sc.status[0] == "ok")


def test_scan_parallel_is_identical(schottky_tuple, trivial_schottky):
    R = rs.Rect(0.5, 1.5, -0.5, 0.5)
    a = rs.scan(schottky_tuple, trivial_schottky, R, (6, 5), 12, workers=1).values
    b = rs.scan(schottky_tuple, trivial_schottky, R, (6, 5), 12, workers=3).values
    assert np.array_equal(a, b)


# --------------------------------------------------------------------- zeros

def test_funnel_double_zeros(funnel_zeros):
    zs = funnel_zeros
    want = [complex(-k, 2 * math.pi * n / L4) for k in (1, 0) for n in (-1, 0, 1)]
    assert len(zs) == len(want)
    for zr, w in zip(zs, want):
        assert zr.multiplicity == 2
        assert abs(zr.location - w) <= 1e-8


def test_schottky_real_zero_is_delta(schottky, schottky_tuple, trivial_schottky):
    zs = rs.find_zeros(schottky_tuple, trivial_schottky, rs.Rect(0.2, 0.7, -0.2, 0.2), 20)
    assert len(zs) == 1 and zs[0].multiplicity == 1
    assert abs(zs[0].location - z.estimate_delta(schottky, 20)) <= 1e-7


def test_zero_free_rect(schottky_tuple, trivial_schottky):
    assert rs.find_zeros(schottky_tuple, trivial_schottky, rs.Rect(1.0, 2.0, -1.0, 1.0), 16) == []


def test_records_meet_residual_contract(twist_zeros, funnel_zeros):
    for zr in twist_zeros + funnel_zeros:
        assert zr.residual <= 1e-8
        assert "residual-above-tol" not in zr.flags
        assert zr.multiplicity >= 1


def test_twisted_funnel_against_closed_form(twist_zeros, real_twist):
    zs = twist_zeros
    want = twist_closed_zeros(real_twist.letter("h", 1), TWIST_RECT)
    assert len(zs) == len(want) == 12
    for zr, w in zip(zs, want):
        assert abs(zr.location - w) <= 1e-8


def test_conjugate_symmetry(twist_zeros):
    locs = [zr.location for zr in twist_zeros]
    for w in locs:
        assert min(abs(w.conjugate() - v) for v in locs) <= 1e-8


def test_zeros_stable_in_n(schottky_tuple, twist):
    R = rs.Rect(0.3, 0.6, -0.3, 0.3)
    a = rs.find_zeros(schottky_tuple, twist, R, 20)
    b = rs.find_zeros(schottky_tuple, twist, R, 30)
    assert len(a) == len(b) >= 1
    for x, y in zip(a, b):
        assert x.multiplicity == y.multiplicity
        assert abs(x.location - y.location) <= 1e-6


def test_close_simple_zeros_are_separated(schottky):
    rng = np.random.default_rng(5)
    rep = Representation(2, {k: np.eye(2) + 0.3 * rng.standard_normal((2, 2))
                             for k in schottky.symbols})
    t = tr.tuple_from_group(schottky)
    zs = rs.find_zeros(t, rep, rs.Rect(-0.2, 0.1, -0.1, 0.1), 20, max_depth=1)
    mults = [zr.multiplicity for zr in zs]
    assert sorted(mults) == [1, 1, 2]


@pytest.mark.parametrize("R", [FUNNEL_RECT, rs.Rect(-0.2, 0.3, 0.5, 5.0),
                               rs.Rect(-1.2, -0.8, -0.3, 0.3)])
def test_count_equals_winding(funnel_tuple, funnel_model, funnel_zeros, R):
    rep = trivial(funnel_model.symbols)
    f = rs.DetFunction(funnel_tuple, rep, 30)
    zs = funnel_zeros if R is FUNNEL_RECT else rs.find_zeros(funnel_tuple, rep, R, 30)
    R0 = rs._perturb(f, R)
    w, _ = rs.contour_winding(f, R0.corners)
    assert sum(zr.multiplicity for zr in zs) == w


def test_zeros_csv(funnel_tuple, funnel_model):
    zs = rs.find_zeros(funnel_tuple, trivial(funnel_model.symbols), rs.Rect(-0.2, 0.2, -0.2, 0.2), 20)
    buf = io.StringIO()
    rs.write_zeros_csv(zs, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "s_re,s_im,multiplicity,residual"
    assert lines[1].split(",")[2] == "2"
