"""Structure tuples, their validator, and the finite-rank collocation of the
twisted transfer operator with Lerch-accelerated parabolic blocks.

Index convention: for g in C[(b, a)] the operator alpha_s(g) maps functions
on E_a to functions on E_b,

    (alpha_s(g) f)(z) = ((g^-1)'(z))^s chi(g) f(g^-1 z),   z in E_b,

which is well defined because g^-1 maps the closure of E_b into E_a.  A
parabolic p in P[(b, a)] contributes sum_{n >= 1} alpha_s(p^n).

Functions on E_a with values in V are represented by Taylor coefficients of
degree <= N in the scaled variable (z - zeta_a) / (rho r_a); matrix rows and
columns are indexed by (letter, degree, vector component).
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import lerch
from . import moebius as mb
from .moebius import INF, Disk, Interval, MoebiusTransform
from .representation import Representation, evaluate, jordan_basis, jordan_structure
from .symbolic import (GroupModel, chart_model, group_from_json, interval_subset,
                       letter_name)
from .words import (Word, as_word, canonical_rotation, cyclic_reduce, format_word, inverse,
                    multiply, parse_word, primitive_root, reduce)

DEFAULT_RHO = 0.8
DEFAULT_TAIL = 200
MAX_TAIL = 1 << 17
POLE_TOL = 1e-9


class TransferError(ValueError):
    pass


class BranchError(TransferError):
    pass


# ------------------------------------------------------------------ tuples

@dataclass(frozen=True)
class StructureTuple:
    group: GroupModel  # generators in the chart of the disks
    alphabet: tuple  # state names
    intervals: Mapping[str, Interval]
    disks: Mapping[str, Disk]
    C: Mapping[tuple, tuple]  # (b, a) -> words g with g^-1 I_b in I_a
    P: Mapping[tuple, tuple]  # (b, a) -> parabolic words p with p^-n I_b in I_a
    K: Mapping[tuple, Disk] = field(default_factory=dict)  # (b, a, word text) -> disk

    def __post_init__(self):
        for a in self.alphabet:
            if a not in self.intervals or a not in self.disks:
                raise TransferError(f"state {a!r} lacks an interval or a disk")
            if abs(complex(self.disks[a].center).imag) > 0:
                raise TransferError("disks must be centered on the real axis")
            if self.intervals[a].through_infinity:
                raise TransferError(f"interval of {a!r} passes through infinity; use a finite chart")
        for key in list(self.C) + list(self.P):
            if key[0] not in self.alphabet or key[1] not in self.alphabet:
                raise TransferError(f"adjacency {key} names an unknown state")

    @property
    def index(self) -> dict:
        return {a: i for i, a in enumerate(self.alphabet)}

    def element(self, word) -> MoebiusTransform:
        return self.group.element(word)

    def parabolic_words(self) -> list:
        return sorted({w for ws in self.P.values() for w in ws})

    def conjugate(self, xi: MoebiusTransform) -> "StructureTuple":
        """Move the whole tuple by a real Moebius map keeping disks finite."""
        grp = self.group.conjugate(xi)
        ivs = {a: mb.map_interval(xi, I) for a, I in self.intervals.items()}
        dks = {a: mb.map_disk(xi, D) for a, D in self.disks.items()}
        return StructureTuple(grp, self.alphabet, ivs, dks, self.C, self.P)


def _diametric(I: Interval) -> Disk:
    return Disk(0.5 * (I.lo + I.hi), 0.5 * (I.hi - I.lo))


def _gap(D: Disk, others: Sequence[Disk]) -> float:
    return min((abs(D.center - E.center) - D.radius - E.radius for E in others), default=1.0)


def _refine(chart: GroupModel, ivs: dict, C: dict, names: dict, rounds: int) -> dict:
    """Shrink hyperbolic state intervals to the hull of their C-pieces.

    Pieces g^-1 I_b only shrink with I_b, so the inclusions of Property 1 are
    kept while the intervals close in on the limit set."""
    for _ in range(rounds):
        new = dict(ivs)
        for a in ivs:
            pcs = [mb.map_interval(chart.element(w).inverse(), ivs[b])
                   for (b, a2), ws in C.items() if a2 == a for w in ws]
            if pcs and not any(J.through_infinity for J in pcs):
                new[a] = Interval(min(J.lo for J in pcs), max(J.hi for J in pcs))
        ivs = new
    return ivs


def tuple_from_group(model: GroupModel, grow: float = 0.5, refine: int = 1) -> StructureTuple:
    """Structure tuple of a catalog model.

    Schottky: one state per letter a with C[(b, a)] = {a^-1} for b != a^-1.
    Cusped: the same for the hyperbolic letters, and for each parabolic
    letter q a state with P[(b, q)] = {q^-1} for the two hyperbolic states b.
    Hyperbolic state intervals are first refined `refine` times to the hull
    of their pieces.  Disks are the diametric disks of the intervals, enlarged
    by `grow` times the gap to the nearest disk they have to avoid; parabolic
    states get a disk centered at the cusp."""
    chart = chart_model(model)
    letters = chart.letters
    names = {l: letter_name(l) for l in letters}
    C, P = {}, {}
    par = set(chart.parabolic)
    hyp = [l for l in letters if l[0] not in par]
    for a in hyp:
        g = ((a[0], -a[1]),)
        for b in letters:
            if b != (a[0], -a[1]):
                C[(names[b], names[a])] = (g,)
    for q in (l for l in letters if l[0] in par):
        for b in hyp:
            P[(names[b], names[q])] = (((q[0], -q[1]),),)
    ivs = _refine(chart, {names[l]: chart.intervals[l] for l in letters}, C, names, refine)
    D0 = {n: _diametric(I) for n, I in ivs.items()}
    disks = {}
    for l in hyp:
        n = names[l]
        others = [D0[names[c]] for c in letters if c != l]
        disks[n] = Disk(D0[n].center, D0[n].radius + grow * _gap(D0[n], others))
    for q in (l for l in letters if l[0] in par):
        n = names[q]
        x = mb.parabolic_fixed_point(chart.generators[q[0]])
        I = ivs[n]
        r_in = max(abs(I.lo - x), abs(I.hi - x))
        avoid = [D0[names[c]] for c in hyp]
        r_out = min(abs(x - E.center) - E.radius for E in avoid)
        if not r_out > r_in:
            raise TransferError("no cusp disk fits between the interval and the other disks")
        disks[n] = Disk(complex(x), r_in + grow * (r_out - r_in))
    t = StructureTuple(chart, tuple(names[l] for l in letters), ivs, disks, C, P)
    return replace_K(t, absorption_disks(t))


def replace_K(t: StructureTuple, K: Mapping) -> StructureTuple:
    return StructureTuple(t.group, t.alphabet, t.intervals, t.disks, t.C, t.P, dict(K))


# ------------------------------------------------------------ parabolic data

@dataclass(frozen=True)
class ParabolicData:
    """q in P[(b, a)] written through P = q^-1 with trace +2:
    P^n z - x = 1 / (tau (n + u)),  u = 1 / (tau (z - x))."""
    x: float
    tau: float


def parabolic_data(q: MoebiusTransform) -> ParabolicData:
    P = q.inverse()
    a, b, c, d = P.a, P.b, P.c, P.d
    if a + d < 0:
        a, b, c, d = -a, -b, -c, -d
    if abs(a + d - 2.0) > 1e-8:
        raise TransferError("P-word is not parabolic")
    if c == 0.0:
        raise TransferError("parabolic fixed point at infinity; use a finite chart")
    return ParabolicData((a - d) / (2.0 * c), c)


def _u_disk(pd: ParabolicData, E: Disk) -> Disk:
    """Image of E under z -> 1 / (tau (z - x))."""
    v = complex(E.center) - pd.x
    k = abs(v) ** 2 - E.radius ** 2
    if k <= 0:
        raise TransferError("cusp lies in the closed disk")
    return Disk(v.conjugate() / (k * pd.tau), E.radius / (k * abs(pd.tau)))


def absorption_disks(t: StructureTuple, n_exact: int = 8) -> dict:
    """K[(b, a, word)]: a closed disk around x containing every p^-n E_b.

    Images for n < n_exact are exact disks; for n >= n_exact the distance
    |p^-n z - x| = 1 / (|tau| |n + u|) is bounded by 1 / (|tau| (n - R_u))."""
    K = {}
    for (b, a), words in t.P.items():
        for w in words:
            q = t.element(w)
            pd = parabolic_data(q)
            E = t.disks[b]
            Ru = abs(_u_disk(pd, E).center) + _u_disk(pd, E).radius
            n1 = max(n_exact, int(math.ceil(Ru)) + 2)
            rad = 1.0 / (abs(pd.tau) * (n1 - Ru))
            qinv = q.inverse()
            g = mb.IDENTITY
            for _ in range(1, n1):
                g = mb.compose(qinv, g)
                D = mb.map_disk(g, E)
                rad = max(rad, abs(D.center - pd.x) + D.radius)
            K[(b, a, format_word(w))] = Disk(complex(pd.x), rad)
    return K


# ---------------------------------------------------------------- JSON I/O

def tuple_to_json(t: StructureTuple) -> dict:
    def words(ws):
        return [format_word(w) for w in ws]

    return {
        "group": t.group.to_json(),
        "alphabet": list(t.alphabet),
        "intervals": {a: [float(I.lo), float(I.hi)] for a, I in t.intervals.items()},
        "disks": {a: [float(D.center.real), float(D.radius)] for a, D in t.disks.items()},
        "C": [{"b": b, "a": a, "words": words(ws)} for (b, a), ws in t.C.items()],
        "P": [{"b": b, "a": a, "words": words(ws)} for (b, a), ws in t.P.items()],
    }


def tuple_from_json(obj: Mapping) -> StructureTuple:
    try:
        grp = group_from_json(obj["group"])
        alphabet = tuple(obj["alphabet"])
        ivs = {a: Interval(float(v[0]), float(v[1])) for a, v in obj["intervals"].items()}
        disks = {a: Disk(complex(float(v[0])), float(v[1])) for a, v in obj["disks"].items()}
        C = {(e["b"], e["a"]): tuple(parse_word(w) for w in e["words"]) for e in obj.get("C", [])}
        P = {(e["b"], e["a"]): tuple(parse_word(w) for w in e["words"]) for e in obj.get("P", [])}
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise TransferError(f"malformed tuple description: {exc}") from None
    t = StructureTuple(grp, alphabet, ivs, disks, C, P)
    return replace_K(t, absorption_disks(t)) if P else t


def load_tuple(path) -> StructureTuple:
    with open(path) as fh:
        return tuple_from_json(json.load(fh))


# ---------------------------------------------------------------- validator

@dataclass
class Check:
    prop: str
    ok: bool
    detail: str = ""
    witnesses: list = field(default_factory=list)
    margin: float | None = None

    def to_json(self) -> dict:
        return {"property": self.prop, "status": "pass" if self.ok else "fail",
                "detail": self.detail, "witnesses": self.witnesses[:10], "margin": self.margin}


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failed(self) -> list:
        return [c.prop for c in self.checks if not c.ok]

    def get(self, prop: str) -> Check:
        return next(c for c in self.checks if c.prop == prop)

    def to_json(self) -> dict:
        return {"ok": self.ok, "checks": [c.to_json() for c in self.checks]}


def _branches(t: StructureTuple, a: str, n_cap: int) -> list:
    """F-branches starting in state a: (target b, element word, label)."""
    out = []
    for (b, a2), ws in t.C.items():
        if a2 == a:
            out.extend((b, w, format_word(w)) for w in ws)
    for (b, a2), ws in t.P.items():
        if a2 == a:
            for w in ws:
                for n in range(1, n_cap + 1):
                    out.append((b, w * n, f"({format_word(w)})^{n}"))
    return out


def _pieces(t: StructureTuple, a: str, n_cap: int) -> list:
    """The family g^-1 I_b (and p^-n I_b) partitioning I_a."""
    res = []
    for b, w, label in _branches(t, a, n_cap):
        res.append((label, mb.map_interval(t.element(w).inverse(), t.intervals[b])))
    return res


def _open_overlap(I: Interval, J: Interval, tol: float = 1e-10) -> bool:
    """Interiors intersect (touching endpoints allowed)."""
    for X, Y in ((I, J), (J, I)):
        for x in (X.lo, X.hi, X.midpoint()):
            if x is not INF and Y.interior_contains(x, tol * max(1.0, abs(x))):
                return True
    return False


def _paths(t: StructureTuple, depth: int) -> list:
    """Closed branch sequences of at most `depth` steps and letters:
    (steps n, start state, element word)."""
    out = []
    for a0 in t.alphabet:
        stack = [(a0, (), 0)]
        while stack:
            a, w, n = stack.pop()
            for b, g, _ in _branches(t, a, depth):
                # the branch applies g after the previous steps
                nw = multiply(tuple(g), w)
                if len(nw) > depth or n + 1 > depth:
                    continue
                if b == a0:
                    out.append((n + 1, a0, nw))
                stack.append((b, nw, n + 1))
    return out


def _cyclic_class(word: Word, order: dict) -> Word:
    c = cyclic_reduce(reduce(word))
    return canonical_rotation(c, order) if c else ()


def _disk_margin(outer: Disk, inner: Disk) -> float:
    return outer.radius - abs(inner.center - outer.center) - inner.radius


def validate_tuple(t: StructureTuple, word_depth: int = 4, rho: float = DEFAULT_RHO) -> ValidationReport:
    checks = []
    n_cap = max(word_depth, 1)
    order = t.group.order

    # Property 1(i), 1(ii): inclusions
    bad1, bad2 = [], []
    for (b, a), ws in t.C.items():
        for w in ws:
            img = mb.map_interval(t.element(w).inverse(), t.intervals[b])
            if not interval_subset(img, t.intervals[a], 1e-10):
                bad2.append(f"{format_word(w)}: {b}->{a}")
    for (b, a), ws in t.P.items():
        for w in ws:
            qi = t.element(w).inverse()
            g = mb.IDENTITY
            for n in range(1, n_cap + 1):
                g = mb.compose(qi, g)
                if not interval_subset(mb.map_interval(g, t.intervals[b]), t.intervals[a], 1e-10):
                    bad1.append(f"({format_word(w)})^-{n}: {b}->{a}")
                if reduce(tuple(w) * n) in {reduce(v) for v in ws} and n > 1:
                    bad1.append(f"({format_word(w)})^{n} also listed")
    checks.append(Check("1(i)", not bad1, "p^-n I_b in I_a and p^n not in P", bad1))
    checks.append(Check("1(ii)", not bad2, "g^-1 I_b in I_a", bad2))

    # Property 1(iii): disjointness exactly, coverage through fixed points
    bad3 = []
    fam = {a: _pieces(t, a, n_cap) for a in t.alphabet}
    for a, pieces in fam.items():
        for i in range(len(pieces)):
            for j in range(i + 1, len(pieces)):
                if _open_overlap(pieces[i][1], pieces[j][1]):
                    bad3.append(f"{a}: {pieces[i][0]} meets {pieces[j][0]}")
    cover = []
    deep = {a: _pieces(t, a, max(60, n_cap)) for a in t.alphabet}
    for w in _group_words(t.group, word_depth):
        g = t.element(w)
        if mb.classify(g) != "hyperbolic":
            continue
        y = mb.fixed_points(g)[0]
        for a in t.alphabet:
            I = t.intervals[a]
            if y is INF or not I.interior_contains(y, -1e-12):
                continue
            hits = [lab for lab, J in deep[a] if J.contains(y, 1e-12)]
            if len(hits) != 1:
                cover.append(f"{format_word(w)} fixed point {float(y):.6g} in {a}: {len(hits)} pieces")
    checks.append(Check("1(iii)", not bad3 and not cover,
                        "pieces pairwise disjoint; limit points covered exactly once",
                        bad3 + cover))

    # Properties 2-4 by enumeration
    paths = _paths(t, word_depth)
    by_word = {}
    for n, a0, w in paths:
        by_word.setdefault(reduce(w), set()).add(n)
    bad_p2 = [f"{format_word(w)} in P_{sorted(ns)}" for w, ns in by_word.items() if len(ns) > 1]
    checks.append(Check("2", not bad_p2, "P_n pairwise disjoint", bad_p2))
    non_hyp = [format_word(w) for w in by_word if mb.classify(t.element(w)) != "hyperbolic"]
    no_root = []
    for w in by_word:
        root, m = primitive_root(cyclic_reduce(w)) if w == cyclic_reduce(w) else (w, 1)
        if m > 1 and reduce(root) not in by_word:
            no_root.append(format_word(w))
    classes = {}
    for w, ns in by_word.items():
        key = _cyclic_class(inverse(w), order)
        classes.setdefault(key, {}).setdefault(min(ns), set()).add(w)
    bad_unique = [format_word(k) for k, d in classes.items() if len(d) > 1]
    missing = []
    for w in _group_words(t.group, word_depth):
        if w and w == cyclic_reduce(w) and mb.classify(t.element(w)) == "hyperbolic":
            if _cyclic_class(w, order) not in classes:
                missing.append(format_word(w))
    checks.append(Check("3(i)", not non_hyp, "all elements of P hyperbolic", non_hyp))
    checks.append(Check("3(ii)", not no_root, "primitive roots stay in P", no_root))
    checks.append(Check("3(iii)", not bad_unique and not missing,
                        "each hyperbolic class met at exactly one word length",
                        bad_unique + [f"missing {m}" for m in missing]))
    bad_p4 = []
    for key, d in classes.items():
        for n, elems in d.items():
            _, m = primitive_root(key)
            if len(elems) * m != n:
                bad_p4.append(f"{format_word(key)}: {len(elems)} elements, p = {n}/{m}")
    checks.append(Check("4", not bad_p4, "p(g) distinct representatives", bad_p4))

    # Property 5
    bad, marg = [], math.inf
    for a in t.alphabet:
        I, E = t.intervals[a], t.disks[a]
        for x in (I.lo, I.hi):
            m = E.radius - abs(x - E.center)
            marg = min(marg, m)
            if m <= 0:
                bad.append(f"{a}: endpoint {x:.6g} outside E")
    checks.append(Check("5(i)", not bad, "closed I_a inside E_a", bad, marg))
    bad, marg = [], math.inf
    for (b, a), ws in t.C.items():
        for w in ws:
            phi = t.element(w).inverse()
            if phi.c != 0.0:
                pole = -phi.d / phi.c
                m = abs(pole - t.disks[b].center) - t.disks[b].radius
                marg = min(marg, m)
                if m <= 0:
                    bad.append(f"{format_word(w)}: pole in E_{b}")
    checks.append(Check("5(ii)", not bad, "chart is finite for every C-map", bad, marg))
    bad, marg = [], math.inf
    for (b, a), ws in t.C.items():
        for w in ws:
            try:
                img = mb.map_disk(t.element(w).inverse(), t.disks[b])
                m = _disk_margin(t.disks[a], img)
            except mb.MoebiusError:
                m = -math.inf
            marg = min(marg, m)
            if m <= 0:
                bad.append(f"{format_word(w)}: {b}->{a} margin {m:.3g}")
    checks.append(Check("5(iii)", not bad, "g^-1 closed E_b inside E_a", bad, marg))
    bad, marg = [], math.inf
    K = t.K or absorption_disks(t)
    for (b, a), ws in t.P.items():
        for w in ws:
            Kd = K[(b, a, format_word(w))]
            qi = t.element(w).inverse()
            g = mb.IDENTITY
            for n in range(1, max(n_cap, 8) + 1):
                g = mb.compose(qi, g)
                img = mb.map_disk(g, t.disks[b])
                if _disk_margin(Kd, img) < -1e-12:
                    bad.append(f"({format_word(w)})^-{n} E_{b} not in K")
            m = _disk_margin(t.disks[a], Kd)
            marg = min(marg, m)
            if m <= 0:
                bad.append(f"K[{b},{a}] not inside E_{a}")
    checks.append(Check("5(iv)", not bad, "p^-n closed E_b inside K inside E_a", bad,
                        marg if t.P else None))
    bad, marg = [], math.inf
    for (b, a), ws in t.P.items():
        for w in ws:
            x = parabolic_data(t.element(w)).x
            m = abs(x - t.disks[b].center) - t.disks[b].radius
            marg = min(marg, m)
            if m <= 0:
                bad.append(f"fixed point of {format_word(w)} in closed E_{b}")
    checks.append(Check("5(v)", not bad, "parabolic fixed points outside closed E_b", bad,
                        marg if t.P else None))

    # collocation certificate: images of the quadrature circles
    bad, marg = [], math.inf
    for (b, a), ws in t.C.items():
        Eb = t.disks[b]
        circ = Disk(Eb.center, rho * Eb.radius)
        for w in ws:
            try:
                m = _disk_margin(t.disks[a], mb.map_disk(t.element(w).inverse(), circ))
            except mb.MoebiusError:
                m = -math.inf
            marg = min(marg, m)
            if m <= 0:
                bad.append(f"{format_word(w)}: quadrature circle of {b} leaves E_{a}")
    checks.append(Check("collocation", not bad, "quadrature circles map inside target disks",
                        bad, marg))
    return ValidationReport(checks)


def _group_words(model: GroupModel, depth: int) -> list:
    """Reduced words of length 1..depth."""
    out = []
    layer = [((l,)) for l in model.letters]
    for _ in range(depth):
        out.extend(layer)
        layer = [w + (l,) for w in layer for l in model.letters
                 if not (l[0] == w[-1][0] and l[1] == -w[-1][1])]
    return out


# ---------------------------------------------------------------- collocation

def _nodes(E: Disk, N: int, rho: float) -> tuple:
    Q = 2 * (N + 1)
    theta = 2.0 * np.pi * np.arange(Q) / Q
    z = E.center + rho * E.radius * np.exp(1j * theta)
    proj = np.exp(-1j * np.outer(np.arange(N + 1), theta)) / Q
    return z, proj


def _powers(x: np.ndarray, N: int) -> np.ndarray:
    """Columns x^0 .. x^N."""
    out = np.empty((x.size, N + 1), dtype=complex)
    out[:, 0] = 1.0
    for k in range(1, N + 1):
        out[:, k] = out[:, k - 1] * x
    return out


def _centered_log(w: np.ndarray, m: float) -> np.ndarray:
    """Log of w on a disk around the real point m avoiding 0, real on reals."""
    r = w / m
    if np.any(r.real <= 0):
        raise BranchError("branch jump: argument leaves the half plane around the disk center")
    return np.log(r) + math.log(abs(m))


def _c_kernel(phi: MoebiusTransform, Eb: Disk, Ea: Disk, s: complex, N: int, rho: float) -> np.ndarray:
    """(N+1)x(N+1) scalar matrix of f -> (phi')^s f o phi from E_a to E_b."""
    z, proj = _nodes(Eb, N, rho)
    w = phi(z) if phi.c == 0.0 else (phi.a * z + phi.b) / (phi.c * z + phi.d)
    Ra = rho * Ea.radius
    if np.any(np.abs(w - Ea.center) >= Ea.radius):
        raise TransferError("margin violated: a quadrature circle maps outside its target disk")
    if phi.c == 0.0:
        weight = np.full(z.shape, complex(abs(phi.d)) ** (-2.0 * s))
    else:
        m = float((phi.c * Eb.center + phi.d).real)
        weight = np.exp(-2.0 * s * _centered_log(phi.c * z + phi.d, m))
    return proj @ (weight[:, None] * _powers((w - Ea.center) / Ra, N))


def _kron(T: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.kron(T, X)


@dataclass
class ParabolicBlock:
    matrix: np.ndarray
    remainder: float
    pole: bool
    tail_len: int
    lerch_error: float


def _jordan_pieces(X: np.ndarray):
    """(lam, size, projected nilpotent powers [S Pi N^m S^-1 for m < size]) per chain."""
    S, js = jordan_basis(X)
    Sinv = np.linalg.inv(S)
    n = X.shape[0]
    out = []
    i = 0
    for lam, ch in js.blocks:
        for c in ch:
            mats = []
            for m in range(c):
                E = np.zeros((n, n), dtype=complex)
                for k in range(c - m):
                    E[i + k, i + k + m] = 1.0
                mats.append(S @ E @ Sinv)
            out.append((complex(lam), c, mats))
            i += c
    return out


def _near_pole(sig: complex, lam: complex, j: int) -> bool:
    """Phi_j(., lam, w) has poles at sig in {1, .., j+1} when lam = 1."""
    k = round(sig.real)
    return lerch._is_one(lam) and 1 <= k <= j + 1 and abs(sig - k) <= POLE_TOL


def parabolic_block(t: StructureTuple, rep: Representation, p_word, a: str, b: str, s: complex,
                    N: int, M: int | None = None, tail_len: int = DEFAULT_TAIL,
                    rho: float = DEFAULT_RHO, lerch_on: bool = True, tol: float = 1e-13,
                    residue: bool = False) -> ParabolicBlock:
    """Block of sum_{n>=1} alpha_s(q^n), q = p_word in P[(b, a)].

    The input polynomial is re-expanded at the cusp x; degrees i <= M are
    summed in closed form through Lerch transcendents, degrees i > M by
    direct summation up to tail_len (doubled until the estimated remainder
    is below tol).  With residue=True the s-residue of the Lerch part at a
    pole s is returned instead."""
    s = complex(s)
    M = N if M is None else M
    if not lerch_on:
        M = -1
    q = t.element(p_word)
    pd = parabolic_data(q)
    Ea, Eb = t.disks[a], t.disks[b]
    x, tau = pd.x, pd.tau
    if abs(x - Ea.center) >= Ea.radius:
        raise TransferError("re-expansion radius violated: cusp outside E_a")
    if abs(x - Eb.center) <= Eb.radius:
        raise TransferError("cusp lies in the closed source disk")
    X = evaluate(rep, p_word)
    d = rep.dim
    z, proj = _nodes(Eb, N, rho)
    Ra = rho * Ea.radius
    delta = (x - Ea.center) / Ra
    u = 1.0 / (tau * (z - x))
    Ru = float(np.max(np.abs(u)))
    ud = _u_disk(pd, Eb)
    n0 = max(1, int(math.floor(abs(ud.center) + ud.radius)) + 1)
    mcen = float((tau * (Eb.center - x)).real)
    A = _centered_log(tau * (z - x), mcen)
    # binomial re-expansion: e_k(w) = sum_i C(k,i) delta^(k-i) ((w - x)/Ra)^i
    B = np.zeros((N + 1, N + 1), dtype=complex)
    for k in range(N + 1):
        for i in range(k + 1):
            B[i, k] = math.comb(k, i) * delta ** (k - i)
    scale_i = (tau * Ra) ** (-np.arange(N + 1, dtype=float))
    pieces = _jordan_pieces(X)
    total = np.zeros(((N + 1) * d, (N + 1) * d), dtype=complex)
    pole = False
    lerr = 0.0
    if not residue:
        # n < n0 directly
        qinv = q.inverse()
        g = mb.IDENTITY
        Xn = np.eye(d, dtype=complex)
        for n in range(1, n0):
            g = mb.compose(qinv, g)
            Xn = Xn @ X
            total += _kron(_c_kernel(g, Eb, Ea, s, N, rho), Xn)
    base = np.exp(-2.0 * s * A)
    remainder = 0.0
    L_used = 0
    for lam, size, mats in pieces:
        if abs(abs(lam) - 1.0) > 1e-8:
            raise TransferError("chi(p) has an eigenvalue off the unit circle")
        lam_u = lam / abs(lam)
        if abs(lam_u - 1.0) <= 1e-8:
            lam_u = 1.0 + 0j
        for m in range(size):
            # H[v, i] = sum_{n >= n0} C(n,m) lam^(n-m) (n+u_v)^-(2s+i)
            H = np.zeros((z.size, N + 1), dtype=complex)
            for i in range(0, min(M, N) + 1):
                sig = 2.0 * s + i
                for j in range(m + 1):
                    c = math.comb(n0, m - j) * lam_u ** (n0 - m + j)
                    if c == 0:
                        continue
                    near = _near_pole(sig, lam_u, j)
                    if residue:
                        if near:
                            k = int(round(sig.real))
                            res = lerch.power_coefficients(j, u + n0)[k - 1]
                            H[:, i] += c * 0.5 * res
                        continue
                    if near:
                        pole = True
                        continue
                    vals, errs = lerch.phi_array(sig, lam_u, u + n0, j)
                    H[:, i] += c * vals
                    lerr = max(lerr, float(np.max(np.abs(c) * errs)))
            if M < N and not residue:
                Hd, rem, L_used = _direct_tail(s, lam_u, m, u, n0, M + 1, N, tail_len, tol,
                                               scale_i, Ru)
                H[:, M + 1:] += Hd
                remainder = max(remainder, rem)
            T = proj @ ((base[:, None] * H * scale_i[None, :]) @ B)
            total += _kron(T, mats[m])
    return ParabolicBlock(total, remainder, pole, L_used, lerr)


def _direct_tail(s, lam, m, u, n0, i_lo, N, L, tol, scale_i, Ru):
    """sum_{n0 <= n <= L} C(n,m) lam^(n-m) (n+u)^-(2s+i) for i in [i_lo, N],
    doubling L until the estimated remainder is below tol."""
    sr = s.real
    expo = 2.0 * sr + i_lo - m - 1
    if expo <= 0:
        raise TransferError("direct parabolic sum diverges: increase M or Re s")
    while True:
        n = np.arange(n0, L + 1, dtype=float)
        coef = np.array([math.comb(int(k), m) for k in n], dtype=float) * lam ** (n - m)
        lg = np.log(n[:, None] + u[None, :])  # (n, v)
        out = np.zeros((u.size, N + 1 - i_lo), dtype=complex)
        for col, i in enumerate(range(i_lo, N + 1)):
            out[:, col] = coef @ np.exp(-(2.0 * s + i) * lg)
        # sum_{n > L} n^m/m! (n - Ru)^-(2 Re s + i): integral bound at the slowest degree
        rem = (L + 1.0) ** m / math.factorial(m) * (L - Ru) ** (-(2.0 * sr + i_lo)) * L / expo
        rem *= abs(scale_i[i_lo])
        if rem <= tol or L >= MAX_TAIL:
            return out, rem, L
        L *= 2


# ------------------------------------------------------------------ assembly

@dataclass
class TransferMatrix:
    s: complex
    N: int
    dim: int
    alphabet: tuple
    matrix: np.ndarray
    provenance: dict
    pole: bool = False
    remainder: float = 0.0
    lerch_error: float = 0.0

    def block(self, b: str, a: str) -> np.ndarray:
        n = (self.N + 1) * self.dim
        i, j = self.alphabet.index(b), self.alphabet.index(a)
        return self.matrix[i * n:(i + 1) * n, j * n:(j + 1) * n]

    def truncate(self, N2: int) -> np.ndarray:
        """Top-left sub-blocks of degree <= N2 for every state pair."""
        d = self.dim
        idx = [(i * (self.N + 1) + k) * d + v for i in range(len(self.alphabet))
               for k in range(N2 + 1) for v in range(d)]
        return self.matrix[np.ix_(idx, idx)]


def assemble(t: StructureTuple, rep: Representation, s: complex, N: int, rho: float = DEFAULT_RHO,
             M: int | None = None, tail_len: int = DEFAULT_TAIL, lerch_on: bool = True,
             tol: float = 1e-13, residue: bool = False) -> TransferMatrix:
    """Collocation matrix of the transfer operator at s (residue matrix if residue)."""
    s = complex(s)
    if not lerch_on and t.P:
        d0 = max(jordan_structure(evaluate(rep, w)).max_chain for w in t.parabolic_words())
        if s.real <= d0 / 2.0:
            raise TransferError("direct regime needs Re s > d0/2")
    d = rep.dim
    n = (N + 1) * d
    idx = t.index
    mat = np.zeros((len(t.alphabet) * n, len(t.alphabet) * n), dtype=complex)
    prov = {}
    pole = False
    rem = 0.0
    lerr = 0.0
    if not residue:
        for (b, a), ws in t.C.items():
            i, j = idx[b], idx[a]
            for w in ws:
                T = _c_kernel(t.element(w).inverse(), t.disks[b], t.disks[a], s, N, rho)
                mat[i * n:(i + 1) * n, j * n:(j + 1) * n] += _kron(T, evaluate(rep, w))
                prov.setdefault((b, a), []).append(f"C:{format_word(w)}")
    for (b, a), ws in t.P.items():
        i, j = idx[b], idx[a]
        for w in ws:
            blk = parabolic_block(t, rep, w, a, b, s, N, M, tail_len, rho, lerch_on, tol, residue)
            mat[i * n:(i + 1) * n, j * n:(j + 1) * n] += blk.matrix
            pole |= blk.pole
            rem = max(rem, blk.remainder)
            lerr = max(lerr, blk.lerch_error)
            prov.setdefault((b, a), []).append(
                f"P:{format_word(w)}:" + ("lerch" if lerch_on else "direct"))
    return TransferMatrix(s, N, d, t.alphabet, mat, prov, pole, rem, lerr)


def fredholm_det(m: TransferMatrix) -> complex:
    if m.pole:
        raise TransferError("pole of the continuation: evaluate residue-separated form instead")
    if m.matrix.size == 0:
        return 1.0 + 0j
    return complex(np.linalg.det(np.eye(m.matrix.shape[0]) - m.matrix))


def log_det(m: TransferMatrix) -> complex:
    """sum log(1 - eigenvalue), for conditioning diagnostics."""
    if m.matrix.size == 0:
        return 0j
    ev = np.linalg.eigvals(m.matrix)
    return complex(np.sum(np.log(1.0 - ev)))


def determinant(t: StructureTuple, rep: Representation, s: complex, N: int, **opts) -> complex:
    return fredholm_det(assemble(t, rep, s, N, **opts))


# ------------------------------------------------------------------- traces

def closed_form_trace(g: MoebiusTransform, chi: np.ndarray, s: complex) -> complex:
    Nh, _ = mb.norm_and_length(g)
    return complex(Nh ** (-complex(s)) / (1.0 - 1.0 / Nh) * np.trace(chi))


def op_trace(t: StructureTuple, rep: Representation, h, s: complex, N: int,
             disk: Disk | None = None, rho: float = DEFAULT_RHO) -> tuple:
    """(collocation trace of alpha_s(h) on a disk D with h^-1 D in D, closed form)."""
    h = as_word(h)
    g = t.element(h)
    phi = g.inverse()
    if disk is None:
        fp = mb.fixed_points(phi)
        y, yr = fp[0], fp[1]
        if y is INF:
            raise TransferError("attracting fixed point at infinity; pass a disk")
        r = 1.0 if yr is INF else min(1.0, 0.5 * abs(y - yr))
        disk = Disk(complex(y), r)
    try:
        img = mb.map_disk(phi, disk)
    except mb.MoebiusError:
        raise TransferError("containment violated: h^-1 maps the disk through infinity") from None
    if _disk_margin(disk, img) <= 0:
        raise TransferError("containment violated: h^-1 closed D is not inside D")
    X = evaluate(rep, h)
    T = _c_kernel(phi, disk, disk, s, N, rho)
    return complex(np.trace(T) * np.trace(X)), closed_form_trace(g, X, s)


# ------------------------------------------------------------- continuation

@dataclass
class ContinuedDet:
    s: complex
    value: complex | None
    pole: bool
    rank_bound: int = 0
    order: int = 0
    probe_values: list = field(default_factory=list)
    remainder: float = 0.0

    def to_json(self) -> dict:
        out = {"s": [self.s.real, self.s.imag], "pole": self.pole}
        if self.value is not None:
            out["value"] = [self.value.real, self.value.imag]
        if self.pole:
            out.update({"s0": [self.s.real, self.s.imag], "rank_bound": self.rank_bound,
                        "order": self.order,
                        "probe_values": [[e, v.real, v.imag] for e, v in self.probe_values]})
        return out


def d0_of(t: StructureTuple, rep: Representation) -> int:
    ws = t.parabolic_words()
    return max([jordan_structure(evaluate(rep, w)).max_chain for w in ws] or [1])


def pole_candidates(t: StructureTuple, rep: Representation, re_min: float) -> list:
    """Points of (d0 - N0)/2 with real part >= re_min (none without cusps)."""
    if not t.P:
        return []
    d0 = d0_of(t, rep)
    out = []
    k = 0
    while (d0 - k) / 2.0 >= re_min:
        out.append((d0 - k) / 2.0)
        k += 1
    return out


def rank_bound_sum(t: StructureTuple, rep: Representation) -> int:
    """sum over Jordan chains d of chi(p), p over P-words, of C(d+1, 2)."""
    tot = 0
    for w in t.parabolic_words():
        for d in jordan_structure(evaluate(rep, w)).chains:
            tot += math.comb(d + 1, 2)
    return tot


def winding(f, center: complex, radius: float, n: int = 24) -> int:
    """Winding number of f around 0 along a circle."""
    th = 2.0 * np.pi * np.arange(n + 1) / n
    vals = np.array([f(center + radius * cmath.exp(1j * x)) for x in th])
    darg = np.angle(vals[1:] / vals[:-1])
    if np.max(np.abs(darg)) > 1.0 and n < 4096:
        return winding(f, center, radius, 2 * n)
    return int(round(float(np.sum(darg)) / (2 * np.pi)))


def continued_det(t: StructureTuple, rep: Representation, s: complex, N: int,
                  M: int | None = None, tail_len: int = DEFAULT_TAIL, rho: float = DEFAULT_RHO,
                  probe_radius: float = 1e-3) -> ContinuedDet:
    """det(1 - L_s) continued by the Lerch blocks; Laurent data at poles."""
    s = complex(s)
    m = assemble(t, rep, s, N, rho, M, tail_len)
    if not m.pole:
        return ContinuedDet(s, fredholm_det(m), False, remainder=m.remainder)
    R = assemble(t, rep, s, N, rho, M, tail_len, residue=True).matrix
    sv = np.linalg.svd(R, compute_uv=False)
    rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0] if sv.size else 0.0)))

    def f(z):
        return determinant(t, rep, z, N, rho=rho, M=M, tail_len=tail_len)

    order = max(0, -winding(f, s, probe_radius))
    probes = []
    for eps in (1e-2, 1e-3):
        for th in (0.0, math.pi / 2):
            ds = eps * cmath.exp(1j * th)
            probes.append((eps, f(s + ds) * ds ** rank))
    return ContinuedDet(s, None, True, rank, order, probes, m.remainder)
