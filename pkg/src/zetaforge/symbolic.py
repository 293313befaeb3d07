"""Group catalog (Schottky groups and free products with one parabolic
generator), conjugacy class enumeration, Reidemeister-Schreier kernels and
trace-bound experiments."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import moebius as mb
from .moebius import INF, Interval, MoebiusTransform
from .representation import Representation, evaluate
from .words import (Word, as_word, canonical_rotation, format_word, inverse,
                    multiply, parse_word, primitive_root, reduce)


class GroupError(ValueError):
    pass


def letter_name(letter) -> str:
    s, e = letter
    return s if e == 1 else f"{s}^-1"


def parse_letter(name: str):
    w = parse_word(name)
    if len(w) != 1:
        raise GroupError(f"bad letter {name!r}")
    return w[0]


@dataclass(frozen=True)
class GroupModel:
    kind: str  # "schottky" | "cusped"
    generators: Mapping[str, MoebiusTransform]
    intervals: Mapping[tuple, Interval]  # keyed by letter (symbol, +-1)
    parabolic: tuple = ()

    @property
    def symbols(self) -> tuple:
        return tuple(self.generators)

    @property
    def letters(self) -> tuple:
        return tuple((s, e) for s in self.generators for e in (1, -1))

    @property
    def order(self) -> dict:
        return {s: i for i, s in enumerate(self.generators)}

    def element(self, word) -> MoebiusTransform:
        g = mb.IDENTITY
        for s, e in as_word(word):
            x = self.generators[s]
            g = mb.compose(g, x if e == 1 else x.inverse())
        return g

    def letter_map(self, letter) -> MoebiusTransform:
        s, e = letter
        g = self.generators[s]
        return g if e == 1 else g.inverse()

    def conjugate(self, xi: MoebiusTransform) -> "GroupModel":
        """The model for xi G xi^-1 with intervals moved by xi."""
        xinv = xi.inverse()
        gens = {s: xi @ g @ xinv for s, g in self.generators.items()}
        ivs = {l: mb.map_interval(xi, I) for l, I in self.intervals.items()}
        return GroupModel(self.kind, gens, ivs, self.parabolic)

    def to_json(self) -> dict:
        def pt(x):
            return "inf" if x is INF else float(x)

        return {
            "kind": self.kind,
            "generators": {s: g.to_list() for s, g in self.generators.items()},
            "intervals": {letter_name(l): [pt(I.lo), pt(I.hi)] for l, I in self.intervals.items()},
            "parabolic": list(self.parabolic),
        }


def _point(x):
    if isinstance(x, str):
        if x.lower() in ("inf", "infinity", "oo"):
            return INF
        raise GroupError(f"bad boundary point {x!r}")
    return float(x)


def group_from_json(obj: dict) -> GroupModel:
    try:
        kind = obj["kind"]
        gens = {s: MoebiusTransform.from_matrix(v) for s, v in obj["generators"].items()}
        ivs = {parse_letter(k): Interval(_point(v[0]), _point(v[1]))
               for k, v in obj["intervals"].items()}
        par = tuple(obj.get("parabolic", ()))
    except (KeyError, TypeError, IndexError, mb.MoebiusError) as exc:
        raise GroupError(f"malformed group description: {exc}") from None
    if kind == "schottky":
        return build_schottky(gens, ivs)
    if kind in ("cusped", "cusped-free-product"):
        if len(par) != 1 or len(gens) != 2:
            raise GroupError("cusped model needs two generators, one marked parabolic")
        hsym = next(s for s in gens if s not in par)
        return build_cusped(gens[hsym], gens[par[0]], ivs, symbols=(hsym, par[0]))
    raise GroupError(f"unknown group kind {kind!r}")


def load_group(path) -> GroupModel:
    with open(path) as fh:
        return group_from_json(json.load(fh))


# --------------------------------------------------------------- intervals

def interval_subset(A: Interval, B: Interval, tol: float = 1e-12) -> bool:
    """A is contained in B (closed arcs, tolerance at shared endpoints)."""
    if not (B.contains(A.lo, tol) and B.contains(A.hi, tol)):
        return False
    # an arc with both ends in B can still wrap around the outside of B
    for p in (B.lo, B.hi):
        if A.interior_contains(p, tol) and not _same(p, A.lo, tol) and not _same(p, A.hi, tol):
            return False
    return True


def _same(x, y, tol) -> bool:
    if x is INF or y is INF:
        return x is y
    return abs(x - y) <= tol * max(1.0, abs(x))


def _check_ping_pong(gens, ivs, exclude_sym=None):
    letters = [(s, e) for s in gens for e in (1, -1)]
    for l in letters:
        if l not in ivs:
            raise GroupError(f"missing interval for {letter_name(l)}")
    for sig in letters:
        g = gens[sig[0]] if sig[1] == 1 else gens[sig[0]].inverse()
        for tau in letters:
            if tau == (sig[0], -sig[1]):
                continue
            img = mb.map_interval(g, ivs[tau])
            if not interval_subset(img, ivs[sig]):
                raise GroupError(
                    f"ping-pong fails: {letter_name(sig)} maps I_{letter_name(tau)} outside I_{letter_name(sig)}")


def build_schottky(gens: Mapping[str, MoebiusTransform], intervals: Mapping) -> GroupModel:
    gens = dict(gens)
    ivs = {(parse_letter(k) if isinstance(k, str) else k): v for k, v in intervals.items()}
    for s, g in gens.items():
        if mb.classify(g) != "hyperbolic":
            raise GroupError(f"generator {s} is not hyperbolic")
    keys = list(ivs)
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            if not ivs[keys[i]].disjoint(ivs[keys[j]]):
                raise GroupError(
                    f"intervals I_{letter_name(keys[i])} and I_{letter_name(keys[j])} overlap")
    _check_ping_pong(gens, ivs)
    return GroupModel("schottky", gens, ivs, ())


def build_cusped(h: MoebiusTransform, p: MoebiusTransform, intervals: Mapping,
                 symbols: tuple = ("h", "p")) -> GroupModel:
    """Free product <h> * <p> with p parabolic."""
    hs, ps = symbols
    if mb.classify(h) != "hyperbolic":
        raise GroupError("h must be hyperbolic")
    if mb.classify(p) != "parabolic":
        raise GroupError("p must be parabolic")
    gens = {hs: h, ps: p}
    ivs = {(parse_letter(k) if isinstance(k, str) else k): v for k, v in intervals.items()}
    xp = mb.parabolic_fixed_point(p)
    # I_p and I_p^-1 meet at the cusp; every other pair must be disjoint
    keys = list(ivs)
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            A, B = ivs[keys[i]], ivs[keys[j]]
            if {keys[i][0], keys[j][0]} == {ps}:
                if not (_same(A.hi, xp, 1e-12) and _same(B.lo, xp, 1e-12)) and \
                        not (_same(B.hi, xp, 1e-12) and _same(A.lo, xp, 1e-12)):
                    raise GroupError("parabolic intervals must be adjacent at the cusp")
                continue
            if not A.disjoint(B):
                raise GroupError(
                    f"intervals I_{letter_name(keys[i])} and I_{letter_name(keys[j])} overlap")
    _check_ping_pong(gens, ivs)
    # p^n.I stays in I_p for all n: n = 1 is checked above, the cusp is an
    # endpoint of I_p, and p.I_p is contained in I_p, so induction covers n > 1
    return GroupModel("cusped", gens, ivs, (ps,))


def isometric_intervals(g: MoebiusTransform) -> tuple[Interval, Interval]:
    """(I_g, I_g^-1): images of the isometric circles of g^-1 and g."""
    if g.c == 0:
        raise GroupError("isometric circles need c != 0")
    r = 1.0 / abs(g.c)
    cg, cginv = g.a / g.c, -g.d / g.c
    return Interval(cg - r, cg + r), Interval(cginv - r, cginv + r)


def hyperbolic_from_fixed(x_att: float, x_rep: float, N: float) -> MoebiusTransform:
    """Hyperbolic element with attracting/repelling fixed points and norm N."""
    lam = math.sqrt(N)
    return MoebiusTransform.from_matrix(
        np.array([[x_att, x_rep], [1.0, 1.0]]) @ np.diag([lam, 1 / lam])
        @ np.linalg.inv(np.array([[x_att, x_rep], [1.0, 1.0]])))


# ------------------------------------------------------------------ catalog

def funnel(N: float = 4.0) -> GroupModel:
    """Cyclic group generated by diag(sqrt N, 1/sqrt N), intervals around 0 and INF."""
    lam = math.sqrt(N)
    h = MoebiusTransform(lam, 0.0, 0.0, 1.0 / lam)
    ivs = {("h", 1): Interval(2.0, -2.0), ("h", -1): Interval(-0.5, 0.5)}
    return build_schottky({"h": h}, ivs)


def circle_pairing(x_minus: float, x_plus: float, r: float) -> MoebiusTransform:
    """Map sending the outside of D(x_minus, r) onto D(x_plus, r)."""
    return MoebiusTransform.from_matrix([[x_plus, -(r * r + x_minus * x_plus)], [1.0, -x_minus]])


def schottky_from_circles(pairs: Mapping[str, tuple]) -> GroupModel:
    """pairs: symbol -> (x_minus, x_plus, r); I_g = [x_plus - r, x_plus + r]."""
    gens, ivs = {}, {}
    for sym, (xm, xp, r) in pairs.items():
        gens[sym] = circle_pairing(xm, xp, r)
        ivs[(sym, 1)] = Interval(xp - r, xp + r)
        ivs[(sym, -1)] = Interval(xm - r, xm + r)
    return build_schottky(gens, ivs)


def schottky_rank2(r: float = 0.8) -> GroupModel:
    """Rank-2 Schottky group pairing D(-3, r) with D(1, r) and D(-1, r) with D(3, r)."""
    return schottky_from_circles({"a": (-3.0, 1.0, r), "b": (-1.0, 3.0, r)})


def cusped_example(trace: float = 3.0, c2: float = 12.0) -> GroupModel:
    """h with fixed points +-1 and the given trace, p(z) = z/(1 - c2 z) fixing 0."""
    ch = trace / 2.0
    sh = math.sqrt(ch * ch - 1.0)
    h = MoebiusTransform(ch, sh, sh, ch)
    p = MoebiusTransform(1.0, 0.0, -c2, 1.0)
    Ih, Ihinv = isometric_intervals(h)
    w = 2.0 / c2
    ivs = {("h", 1): Ih, ("h", -1): Ihinv,
           ("p", 1): Interval(-w, 0.0), ("p", -1): Interval(0.0, w)}
    return build_cusped(h, p, ivs)


# ------------------------------------------------------------- enumeration

@dataclass(frozen=True)
class ConjClassRecord:
    word: Word
    N: float
    length: float
    primitive: bool
    multiplicity: int
    root: Word

    @property
    def word_length(self) -> int:
        return len(self.word)

    @property
    def text(self) -> str:
        return format_word(self.word)


@dataclass(frozen=True)
class Unit:
    """A step of the coding: a hyperbolic letter followed by an optional
    parabolic block p^n, or a single letter for Schottky models."""
    letters: Word
    head: tuple  # first letter
    tail: tuple  # last letter


def _units(model: GroupModel, n_max: int) -> list:
    if model.kind == "schottky":
        return [Unit(((s, e),), (s, e), (s, e)) for s, e in model.letters]
    ps = model.parabolic[0]
    units = []
    for s in model.symbols:
        if s == ps:
            continue
        for e in (1, -1):
            units.append(Unit(((s, e),), (s, e), (s, e)))
            for n in range(1, n_max + 1):
                for f in (1, -1):
                    w = ((s, e),) + ((ps, f),) * n
                    units.append(Unit(w, (s, e), (ps, f)))
    return units


def _can_follow(u: Unit, v: Unit) -> bool:
    return not (u.tail[0] == v.head[0] and u.tail[1] == -v.head[1])


def chart_model(model: GroupModel) -> GroupModel:
    """Conjugate so that no interval contains INF (identity if none does)."""
    if not any(I.through_infinity for I in model.intervals.values()):
        return model
    ends = sorted(float(x) for I in model.intervals.values() for x in (I.lo, I.hi)
                  if x is not INF)
    cands = [0.5 * (x + y) for x, y in zip(ends, ends[1:])] + [0.0, 1.0]
    for x in cands:
        if not any(I.contains(x, 1e-9) for I in model.intervals.values()):
            return model.conjugate(MoebiusTransform(0.0, 1.0, -1.0, x))
    raise GroupError("no gap point outside the intervals")


def _gain(chart: GroupModel, g: MoebiusTransform, head: tuple) -> float:
    I = chart.intervals[head]
    if g.c == 0.0:
        return 2.0 * math.log(abs(g.d))
    if I.contains(-g.d / g.c):
        return -math.inf
    return min(2.0 * math.log(abs(g.c * y + g.d)) for y in (I.lo, I.hi))


def gain_data(model: GroupModel, n_max: int = 1, k_max: int = 4,
              budget: int = 200000) -> tuple[float, float]:
    """(m0, B) for the coding steps of the model.

    Every cyclic word of n steps has length >= m0 * n, and every finite step
    sequence S satisfies inf -log|S'| >= -B on admissible intervals.  m0 is
    g_k / k for the block size k <= k_max giving the largest value, where g_k
    is the least gain of a k-step block (superadditivity of the gains makes
    this a bound for all lengths)."""
    chart = chart_model(model)
    units = _units(model, n_max)
    maps = [chart.element(u.letters) for u in units]
    follow = [[j for j, v in enumerate(units) if _can_follow(u, v)] for u in units]
    heads_after = [sorted({units[j].head for j in f}) for f in follow]
    layer = [(i, maps[i]) for i in range(len(units))]
    best_m0, worst_short = -math.inf, 0.0
    for k in range(1, k_max + 1):
        gk = min(_gain(chart, g, h) for i, g in layer for h in heads_after[i])
        if gk / k > best_m0:
            best_m0 = gk / k
        if best_m0 > 0 and (k == k_max or len(layer) * len(units) > budget):
            break
        worst_short = min(worst_short, gk)
        if len(layer) * len(units) > budget:
            break
        layer = [(j, mb.compose(g, maps[j])) for i, g in layer for j in follow[i]]
    return best_m0, -worst_short


def per_letter_gain(model: GroupModel) -> float:
    """m0: length gain per coding step, l(h) >= m0 * steps(h)."""
    return gain_data(model)[0]


def _class_length(g: MoebiusTransform) -> tuple:
    if mb.classify(g) != "hyperbolic":
        return None
    return mb.norm_and_length(g)


def enumerate_classes(model: GroupModel, l_max: float, n_max: int | None = None) -> list:
    """All hyperbolic conjugacy classes with length <= l_max, as records with
    rotation-minimal cyclic words, sorted by length then word.

    Depth-first search over coding steps; a prefix P is abandoned once
    inf over the admissible next intervals of -log|P'| exceeds l_max, which
    bounds the length of every cyclic word starting with P."""
    if l_max <= 0:
        return []
    chart = chart_model(model)
    if model.kind == "cusped":
        n_max = n_max or _cusp_block_bound(model, l_max)
    units = _units(model, n_max or 0)
    m0, B = gain_data(model, n_max or 1)
    if not m0 > 0:
        raise GroupError("coding has no positive per-step length gain")
    maps = [chart.element(u.letters) for u in units]
    follow = [[j for j, v in enumerate(units) if _can_follow(u, v)] for u in units]
    heads_after = [sorted({units[j].head for j in f}) for f in follow]
    order = model.order
    found = {}
    slack = l_max + B + 1e-9

    def gain(g, head):
        return _gain(chart, g, head)

    def visit(seq: list, g: MoebiusTransform):
        last = seq[-1]
        if min(gain(g, h) for h in heads_after[last]) > slack:
            return
        first = units[seq[0]]
        if _can_follow(units[last], first) and _is_min_rotation(seq):
            _record(seq, g)
        for j in follow[last]:
            seq.append(j)
            visit(seq, mb.compose(g, maps[j]))
            seq.pop()

    def _record(seq, g):
        nl = _class_length(g)
        if nl is None or nl[1] > l_max:
            return
        word = tuple(x for j in seq for x in units[j].letters)
        key = canonical_rotation(word, order)
        if key in found:
            return
        root, m = primitive_root(key)
        found[key] = ConjClassRecord(key, nl[0], nl[1], m == 1, m, canonical_rotation(root, order))

    for i in range(len(units)):
        visit([i], maps[i])
    return sorted(found.values(), key=lambda r: (r.length, [_lk(x, order) for x in r.word]))


def _is_min_rotation(seq: list) -> bool:
    n = len(seq)
    return all(seq <= seq[k:] + seq[:k] for k in range(1, n))


def _lk(letter, order):
    return (order[letter[0]], 0 if letter[1] == 1 else 1)


def _cusp_block_bound(model: GroupModel, l_max: float) -> int:
    """Largest parabolic block exponent whose unit gain can stay below l_max."""
    n = 1
    model = chart_model(model)
    heads = [l for l in model.letters if l[0] not in model.parabolic]
    while True:
        gains = []
        for s, e in heads:
            for f in (1, -1):
                u = Unit(((s, e),) + ((model.parabolic[0], f),) * n, (s, e),
                         (model.parabolic[0], f))
                gains.extend(_gain(model, model.element(u.letters), h) for h in heads)
        if min(gains) > l_max + 1e-9 or n > 10 ** 6:
            return n - 1 if n > 1 else 1
        n += 1


# ------------------------------------------------------- finite-index kernels

@dataclass(frozen=True)
class KernelModel:
    model: GroupModel
    parent: GroupModel
    generator_words: dict  # kernel symbol -> word in the parent
    transversal: tuple  # coset representatives, indexed by hom value
    hom: dict
    q: int

    def member(self, word) -> bool:
        return sum(self.hom[s] * e for s, e in as_word(word)) % self.q == 0

    def rewrite(self, word) -> Word:
        """Rewrite a parent word lying in the kernel in kernel generators."""
        word = as_word(word)
        if not self.member(word):
            raise GroupError("word is not in the kernel")
        lookup = {}
        for sym, w in self.generator_words.items():
            lookup[w] = sym
        out = []
        r = 0
        for s, e in word:
            if e == 1:
                key = self._schreier(r, s)
                r = (r + self.hom[s]) % self.q
                if key is not None:
                    out.append((lookup[key], 1))
            else:
                r = (r - self.hom[s]) % self.q
                key = self._schreier(r, s)
                if key is not None:
                    out.append((lookup[key], -1))
        return reduce(tuple(out))

    def _schreier(self, r, s):
        w = multiply(self.transversal[r], ((s, 1),),
                     inverse(self.transversal[(r + self.hom[s]) % self.q]))
        return w if w else None


def subgroup_model(model: GroupModel, hom: Mapping[str, int], q: int) -> KernelModel:
    """Kernel of a surjective hom onto Z/q by Reidemeister-Schreier."""
    if model.kind != "schottky":
        raise GroupError("subgroups are supported for Schottky models only")
    hom = {s: int(hom[s]) % q for s in model.symbols}
    if math.gcd(q, *hom.values()) != 1 and q > 1:
        raise GroupError("hom is not surjective")
    if q == 1:
        words = {s: ((s, 1),) for s in model.symbols}
        return KernelModel(model, model, words, ((),), hom, 1)
    t = next(s for s in model.symbols if math.gcd(hom[s], q) == 1)
    # rescaling by a unit of Z/q keeps the kernel and makes hom(t) = 1
    unit = pow(hom[t], -1, q)
    hom = {s: (v * unit) % q for s, v in hom.items()}
    trans = [((t, 1),) * r for r in range(q)]
    tpow = [model.element(w) for w in trans]
    gens, words, ivs = {}, {}, {}
    count = 0
    for r in range(q):
        for s in model.symbols:
            j = (r + hom[s]) % q
            w = multiply(trans[r], ((s, 1),), inverse(trans[j]))
            if not w:
                continue
            count += 1
            sym = f"g{count}"
            words[sym] = w
            gens[sym] = model.element(w)
            # t^r s t^-j pairs the outside of t^j.I_{s^-1} with t^r.I_s
            if s == t:
                ivs[(sym, 1)] = mb.map_interval(tpow[q - 1], model.intervals[(t, 1)])
                ivs[(sym, -1)] = model.intervals[(t, -1)]
            else:
                ivs[(sym, 1)] = mb.map_interval(tpow[r], model.intervals[(s, 1)])
                ivs[(sym, -1)] = mb.map_interval(tpow[j], model.intervals[(s, -1)])
    sub = build_schottky(gens, ivs)
    return KernelModel(sub, model, words, tuple(trans), hom, q)


# ---------------------------------------------------------- trace bounds

@dataclass
class TraceBoundReport:
    c_explicit: float
    m0: float
    K: float
    max_ratio: float  # max log|chi(h)| / l(h)
    violations: list
    corollary_sup: float
    running_max: list = field(default_factory=list)


def trace_bound_experiment(model: GroupModel, rep: Representation, l_max: float,
                           C: float = 1.0) -> TraceBoundReport:
    """Compare log|chi(h)| with c_explicit * l(h) on all classes up to l_max,
    where c_explicit = log(C K) / m0."""
    if model.kind != "schottky":
        raise GroupError("trace bounds are computed per letter on Schottky models")
    K = max(float(np.linalg.norm(rep.letter(s, e), 2)) for s, e in model.letters)
    m0 = per_letter_gain(model)
    c = max(0.0, math.log(C * K)) / m0
    recs = enumerate_classes(model, l_max)
    worst = -math.inf
    viol = []
    cor = 0.0
    running = []
    for r in recs:
        M = evaluate(rep, r.word)
        ln = math.log(float(np.linalg.norm(M, 2)))
        ratio = ln / r.length
        worst = max(worst, ratio)
        running.append((r.length, worst))
        if ln > c * r.length + 1e-12:
            viol.append(r.text)
        g = model.element(r.word)
        dist = mb.hyp_dist(1j, complex(g(1j)))
        cor = max(cor, math.exp(ln - c * dist))
    if not recs:
        worst = 0.0
    return TraceBoundReport(c, m0, K, worst, viol, cor, running)
