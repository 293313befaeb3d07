"""Truncated Euler products, the determinant route, convergence-abscissa
estimates, the determinant/product cross-check and Venkov-Zograf
factorization checks."""
from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from . import transfer as tr
from .parallel import pmap
from .representation import (Representation, character, direct_sum, evaluate, induce,
                             trivial)
from .symbolic import GroupModel, enumerate_classes, subgroup_model

DEFAULT_TOL = 1e-8
SAFETY = 2.0


class ZetaError(ValueError):
    pass


@dataclass
class ZetaEval:
    s: complex
    value: complex
    l_max: float
    tail: float
    route: str  # "product" | "determinant"
    N: int | None = None
    abscissa: float | None = None

    def row(self) -> list:
        return [repr(self.s.real), repr(self.s.imag), self.route, repr(self.value.real),
                repr(self.value.imag), repr(self.tail),
                "" if self.l_max is None else repr(self.l_max),
                "" if self.N is None else str(self.N)]

    def to_json(self) -> dict:
        return {"s": [self.s.real, self.s.imag], "value": [self.value.real, self.value.imag],
                "l_max": self.l_max, "tail": self.tail, "route": self.route, "N": self.N,
                "abscissa": self.abscissa}


CSV_HEADER = ["s_re", "s_im", "route", "value_re", "value_im", "tail", "l_max", "N"]


def write_csv(evals: Sequence[ZetaEval], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for e in evals:
        w.writerow(e.row())


# ----------------------------------------------------------------- product

def _class_data(g: GroupModel, rep: Representation, classes) -> tuple:
    N = np.array([r.N for r in classes], dtype=float)
    ell = np.array([r.length for r in classes], dtype=float)
    m = np.array([r.multiplicity for r in classes], dtype=float)
    tr_ = np.array([complex(np.trace(evaluate(rep, r.word))) for r in classes], dtype=complex)
    nrm = np.array([float(np.linalg.norm(evaluate(rep, r.word), 2)) for r in classes])
    return N, ell, m, tr_, nrm


def log_zeta(s: complex, data: tuple) -> complex:
    """-sum (1/m) N^-s / (1 - 1/N) tr chi, summed in ascending length order."""
    N, ell, m, tr_, _ = data
    if N.size == 0:
        return 0j
    terms = -np.exp(-complex(s) * ell) / (1.0 - 1.0 / N) * tr_ / m
    return complex(np.sum(terms))


def growth_rate(ell: np.ndarray, l_max: float) -> tuple[float, float]:
    """(gamma, window): exponential class-count growth rate from the two top windows."""
    W = max(l_max / 2.0, 1e-9)
    n1 = int(np.sum((ell > l_max - W) & (ell <= l_max)))
    n0 = int(np.sum((ell > l_max - 2 * W) & (ell <= l_max - W)))
    if n1 == 0:
        return 0.0, W
    if n0 == 0:
        return math.log(n1 + 1.0) / W, W
    return max(0.0, math.log(n1 / n0) / W), W


def untwisted_tail(sigma: float, ell: np.ndarray, N: np.ndarray, m: np.ndarray,
                   l_max: float) -> float:
    """Estimate of sum over classes beyond l_max of (1/m) N^-sigma / (1 - 1/N):
    the top-window sum continued geometrically with the fitted growth rate."""
    gamma, W = growth_rate(ell, l_max)
    if sigma <= gamma:
        return math.inf
    sel = ell > l_max - W
    S_W = float(np.sum(np.exp(-sigma * ell[sel]) / (1.0 - 1.0 / N[sel]) / m[sel]))
    if not np.any(sel):
        # no classes seen yet: bound by one class at the cutoff
        S_W = math.exp(-sigma * l_max)
    r = math.exp(-(sigma - gamma) * W)
    return S_W * r / (1.0 - r)


def observed_growth(data: tuple) -> float:
    """c_obs = max(0, max log|chi(g)| / l(g)) over the enumerated classes."""
    _, ell, _, _, nrm = data
    if ell.size == 0:
        return 0.0
    return max(0.0, float(np.max(np.log(np.maximum(nrm, 1e-300)) / ell)))


def log_tail(s: complex, data: tuple, l_max: float, dim: int) -> tuple[float, float]:
    """(tail of log Z, abscissa estimate) at s, twisted by dim * e^(c_obs l)."""
    N, ell, m, _, _ = data
    c = observed_growth(data) if dim > 1 or np.any(data[4] > 1.0 + 1e-12) else 0.0
    gamma, _ = growth_rate(ell, l_max)
    T = SAFETY * dim * untwisted_tail(complex(s).real - c, ell, N, m, l_max)
    return T, gamma + c


def zeta_product(g: GroupModel, rep: Representation, s: complex, l_max: float,
                 tol: float | None = DEFAULT_TOL, classes=None) -> ZetaEval:
    """exp of the truncated log-sum over classes with length <= l_max.

    tol=None skips the tolerance guard (the tail is still reported)."""
    s = complex(s)
    recs = classes if classes is not None else enumerate_classes(g, l_max)
    data = _class_data(g, rep, recs)
    val = cmath.exp(log_zeta(s, data))
    T, absc = log_tail(s, data, l_max, rep.dim)
    tail = abs(val) * math.expm1(T) if T < 700 else math.inf
    if tol is not None and not tail <= tol:
        raise ZetaError(f"tail estimate {tail:.3g} exceeds {tol:.3g}: increase ℓ_max or Re s")
    return ZetaEval(s, val, l_max, tail, "product", None, absc)


def euler_product(g: GroupModel, rep: Representation, s: complex, l_max: float,
                  classes=None, k_tol: float = 1e-18) -> complex:
    """prod over primitive classes with l <= l_max of prod_k det(1 - chi N^-(s+k))."""
    s = complex(s)
    recs = classes if classes is not None else enumerate_classes(g, l_max)
    out = 1.0 + 0j
    I = np.eye(rep.dim)
    for r in recs:
        if not r.primitive:
            continue
        X = evaluate(rep, r.word)
        nx = float(np.linalg.norm(X, 2))
        k = 0
        while True:
            z = r.N ** (-(s + k))
            out *= complex(np.linalg.det(I - z * X))
            k += 1
            if abs(z) * nx * rep.dim < k_tol:
                break
    return out


def zeta_determinant(t: tr.StructureTuple, rep: Representation, s: complex, N: int,
                     **opts) -> ZetaEval:
    """det(1 - L_s); the error estimate is SAFETY times the N -> N + 10 change,
    which bounds the full error when ten more nodes at least halve it."""
    s = complex(s)
    d1 = tr.continued_det(t, rep, s, N, **opts)
    d2 = tr.continued_det(t, rep, s, N + 10, **opts)
    if d1.pole or d2.pole:
        raise ZetaError(f"s = {s} is a pole of the continuation")
    return ZetaEval(s, d1.value, None, SAFETY * abs(d1.value - d2.value) + d1.remainder,
                    "determinant", N)


# ------------------------------------------------------------------- delta

def leading_eigenvalue(t: tr.StructureTuple, s: float, N: int) -> float:
    rep = trivial(t.group.symbols)
    ev = np.linalg.eigvals(tr.assemble(t, rep, s, N).matrix)
    return float(ev[np.argmax(np.abs(ev))].real)


def estimate_delta(g: GroupModel, N: int = 20, bracket: tuple = (-0.5, 2.0),
                   t: tr.StructureTuple | None = None) -> float:
    """Real s with leading eigenvalue 1 of the untwisted transfer matrix."""
    if g.kind != "schottky":
        raise ZetaError("estimate_delta needs a Schottky model")
    t = t or tr.tuple_from_group(g)
    lo, hi = bracket

    def f(x):
        return leading_eigenvalue(t, x, N) - 1.0

    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise ZetaError("no sign change of lambda(s) - 1 in the bracket")
    delta = brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    if abs(f(delta)) > 1e-10:
        raise ZetaError("bisection did not reach lambda = 1 within 1e-10")
    return float(delta)


# -------------------------------------------------------------- crosscheck

@dataclass
class CrossRow:
    s: complex
    product: complex
    determinant: complex
    discrepancy: float
    tail: float
    det_error: float

    @property
    def ok(self) -> bool:
        return self.discrepancy <= self.tail + self.det_error + 1e-8

    def to_json(self) -> dict:
        return {"s": [self.s.real, self.s.imag],
                "product": [self.product.real, self.product.imag],
                "determinant": [self.determinant.real, self.determinant.imag],
                "discrepancy": self.discrepancy, "tail": self.tail,
                "det_error": self.det_error, "pass": self.ok}


@dataclass
class CrossReport:
    rows: list

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def to_json(self) -> dict:
        return {"ok": self.ok, "rows": [r.to_json() for r in self.rows]}


def crosscheck(g: GroupModel, t: tr.StructureTuple, rep: Representation, s_list: Sequence,
               l_max: float, N: int, workers: int = 1, tol: float | None = None) -> CrossReport:
    """|product - determinant| per s against the product tail plus 1e-8."""
    classes = enumerate_classes(g, l_max)

    def one(s):
        p = zeta_product(g, rep, s, l_max, tol=tol, classes=classes)
        d = zeta_determinant(t, rep, s, N)
        return CrossRow(complex(s), p.value, d.value, abs(p.value - d.value), p.tail, d.tail)

    return CrossReport(pmap(one, list(s_list), workers))


# ------------------------------------------------------------ factorization

@dataclass
class FactorRow:
    part: str
    s: complex
    lhs: complex
    rhs: complex
    discrepancy: float
    tail: float

    @property
    def ok(self) -> bool:
        return self.discrepancy <= self.tail + 1e-9

    def to_json(self) -> dict:
        return {"part": self.part, "s": [self.s.real, self.s.imag],
                "lhs": [self.lhs.real, self.lhs.imag], "rhs": [self.rhs.real, self.rhs.imag],
                "discrepancy": self.discrepancy, "tail": self.tail, "pass": self.ok}


@dataclass
class FactorReport:
    rows: list

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def part(self, name: str) -> list:
        return [r for r in self.rows if r.part == name]

    def to_json(self) -> dict:
        return {"ok": self.ok, "rows": [r.to_json() for r in self.rows]}


def quotient_characters(g: GroupModel, hom: Mapping[str, int], q: int) -> list:
    """The q characters omega_j(hom(.)) of the cyclic quotient."""
    return [character(g.symbols, {s: cmath.exp(2j * math.pi * j * hom[s] / q) for s in g.symbols})
            for j in range(q)]


def factorization_check(g: GroupModel, hom: Mapping[str, int], q: int, s_list: Sequence,
                        l_max: float, eta: Representation | None = None) -> FactorReport:
    """(i) direct sums, (ii) Z(Lambda, eta) = Z(Gamma, Ind eta),
    (iii) Z(Lambda, 1) = prod over the quotient characters of Z(Gamma, omega)."""
    if g.kind != "schottky":
        raise ZetaError("factorization checks need a Schottky model")
    k = subgroup_model(g, hom, q)
    eta = eta or trivial(k.model.symbols)
    ind = induce(eta, k.transversal, k.member, g.symbols, k.rewrite).rep
    chars = quotient_characters(g, k.hom, q)
    big = chars[0]
    for c in chars[1:]:
        big = direct_sum(big, c)
    cg = enumerate_classes(g, l_max)
    cl = enumerate_classes(k.model, l_max)
    rows = []
    for s in s_list:
        s = complex(s)
        zs = [zeta_product(g, c, s, l_max, tol=None, classes=cg) for c in chars]
        prod_val = np.prod([z.value for z in zs])
        prod_tail = sum(z.tail for z in zs)
        zb = zeta_product(g, big, s, l_max, tol=None, classes=cg)
        rows.append(FactorRow("i", s, zb.value, prod_val, abs(zb.value - prod_val), 0.0))
        zl = zeta_product(k.model, eta, s, l_max, tol=None, classes=cl)
        zi = zeta_product(g, ind, s, l_max, tol=None, classes=cg)
        rows.append(FactorRow("ii", s, zl.value, zi.value, abs(zl.value - zi.value),
                              zl.tail + zi.tail))
        z1 = zeta_product(k.model, trivial(k.model.symbols), s, l_max, tol=None, classes=cl)
        rows.append(FactorRow("iii", s, z1.value, prod_val, abs(z1.value - prod_val),
                              z1.tail + prod_tail))
        zind1 = zeta_product(g, induce(trivial(k.model.symbols), k.transversal, k.member,
                                       g.symbols, k.rewrite).rep, s, l_max, tol=None, classes=cg)
        rows.append(FactorRow("ind", s, zind1.value, prod_val, abs(zind1.value - prod_val), 0.0))
    return FactorReport(rows)
