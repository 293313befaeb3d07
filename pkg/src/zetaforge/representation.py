"""Finite-dimensional complex representations given on generators, with
Jordan structure queries, growth laws, SL2 irreducibles, the Hecke twist,
direct sums and induced representations."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .moebius import MoebiusTransform
from .words import Word, WordLike, as_word, format_word, inverse, multiply, reduce

RELATION_TOL = 1e-8
COND_MAX = 1e12


class RepresentationError(ValueError):
    pass


@dataclass(frozen=True)
class Representation:
    dim: int
    images: Mapping[str, np.ndarray]
    relations: tuple = ()
    _inverses: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise RepresentationError("dimension must be positive")
        imgs = {}
        invs = {}
        for sym, m in self.images.items():
            m = np.array(m, dtype=complex).reshape(self.dim, self.dim)
            if not np.all(np.isfinite(m)):
                raise RepresentationError(f"non-finite image for {sym}")
            cond = np.linalg.cond(m)
            if not cond < COND_MAX:
                raise RepresentationError(f"image of {sym} is not invertible (cond {cond:.3g})")
            m.setflags(write=False)
            inv = np.linalg.inv(m)
            inv.setflags(write=False)
            imgs[sym] = m
            invs[sym] = inv
        object.__setattr__(self, "images", imgs)
        object.__setattr__(self, "_inverses", invs)
        rels = tuple(as_word(r) for r in self.relations)
        object.__setattr__(self, "relations", rels)
        for r in rels:
            res = relation_residual(self, r)
            if res > RELATION_TOL:
                raise RepresentationError(
                    f"relation {format_word(r)!r} violated (residual {res:.3g})")

    @property
    def alphabet(self) -> tuple:
        return tuple(self.images)

    def letter(self, sym: str, e: int) -> np.ndarray:
        try:
            return self.images[sym] if e == 1 else self._inverses[sym]
        except KeyError:
            raise RepresentationError(f"unknown symbol {sym!r}") from None

    def __call__(self, word: WordLike) -> np.ndarray:
        return evaluate(self, word)

    def conjugate(self, A) -> "Representation":
        """The equivalent representation g -> A chi(g) A^-1."""
        A = np.asarray(A, dtype=complex)
        Ai = np.linalg.inv(A)
        return Representation(self.dim, {s: A @ m @ Ai for s, m in self.images.items()},
                              self.relations)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "images": {s: [[float(z.real), float(z.imag)] for z in m.ravel()]
                       for s, m in self.images.items()},
            "relations": [format_word(r) for r in self.relations],
        }


def rep_from_json(obj: dict) -> Representation:
    try:
        dim = int(obj["dim"])
        images = {}
        for sym, entries in obj["images"].items():
            vals = [complex(e[0], e[1]) if isinstance(e, (list, tuple)) else complex(e)
                    for e in entries]
            if len(vals) != dim * dim:
                raise RepresentationError(f"image of {sym} has {len(vals)} entries, need {dim * dim}")
            images[sym] = np.array(vals).reshape(dim, dim)
        rels = tuple(obj.get("relations", ()))
    except (KeyError, TypeError, IndexError) as exc:
        raise RepresentationError(f"malformed representation: {exc}") from None
    return Representation(dim, images, rels)


def load_rep(path) -> Representation:
    with open(path) as fh:
        return rep_from_json(json.load(fh))


def evaluate(rep: Representation, word: WordLike) -> np.ndarray:
    """Ordered product of the images of the letters."""
    out = np.eye(rep.dim, dtype=complex)
    for sym, e in as_word(word):
        out = out @ rep.letter(sym, e)
    return out


def relation_residual(rep: Representation, word: WordLike) -> float:
    return float(np.linalg.norm(evaluate(rep, word) - np.eye(rep.dim), 2))


def trivial(alphabet: Sequence[str], dim: int = 1) -> Representation:
    return Representation(dim, {s: np.eye(dim) for s in alphabet})


def character(alphabet: Sequence[str], values: Mapping[str, complex]) -> Representation:
    """One-dimensional representation with the given generator values."""
    return Representation(1, {s: np.array([[values[s]]]) for s in alphabet})


# ---------------------------------------------------------------- Jordan data

@dataclass(frozen=True)
class JordanStructure:
    blocks: tuple  # ((eigenvalue, (chain lengths, descending)), ...)

    @property
    def dim(self) -> int:
        return sum(sum(ch) for _, ch in self.blocks)

    @property
    def max_chain(self) -> int:
        return max(max(ch) for _, ch in self.blocks)

    @property
    def chains(self) -> list:
        """All chain lengths, with multiplicity, in descending order."""
        return sorted((c for _, ch in self.blocks for c in ch), reverse=True)

    def jordan_matrix(self) -> np.ndarray:
        J = np.zeros((self.dim, self.dim), dtype=complex)
        i = 0
        for lam, ch in self.blocks:
            for c in ch:
                for k in range(c):
                    J[i + k, i + k] = lam
                    if k + 1 < c:
                        J[i + k, i + k + 1] = 1.0
                i += c

        return J


def _cluster(vals: np.ndarray, radius: float) -> list:
    """Greedy union of eigenvalues closer than radius."""
    n = len(vals)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(vals[i] - vals[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: min(g))


def jordan_structure(M, tol: float = 1e-4) -> JordanStructure:
    """Eigenvalues clustered at tol*max(1, |M|) (wider for large n), chain
    lengths from the rank defects of (M - lam)^k."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if M.shape != (n, n):
        raise RepresentationError("matrix must be square")
    scale = max(1.0, float(np.linalg.norm(M, 2)))
    vals = np.linalg.eigvals(M)
    # rounding splits an n-fold eigenvalue by up to eps^(1/n) |M|
    radius = max(tol, 10.0 * np.finfo(float).eps ** (1.0 / n)) * scale
    groups = _cluster(vals, radius)
    blocks = []
    for g in groups:
        lam = complex(np.mean(vals[g]))
        mult = len(g)
        A = M - lam * np.eye(n)
        P = np.eye(n, dtype=complex)
        nullity = [0]
        for k in range(1, mult + 1):
            P = P @ A
            sv = np.linalg.svd(P, compute_uv=False)
            thr = tol * scale ** k
            if np.any((sv > thr / 10) & (sv < thr * 10)):
                raise RepresentationError("ill-conditioned Jordan decision")
            nullity.append(int(np.sum(sv <= thr)))
        if nullity[-1] != mult:
            raise RepresentationError("ill-conditioned Jordan decision")
        # number of chains of length >= k is nullity[k] - nullity[k-1]
        at_least = [nullity[k] - nullity[k - 1] for k in range(1, mult + 1)] + [0]
        chains = []
        for k in range(1, mult + 1):
            exact = at_least[k - 1] - at_least[k]
            if exact < 0:
                raise RepresentationError("ill-conditioned Jordan decision")
            chains.extend([k] * exact)
        blocks.append((lam, tuple(sorted(chains, reverse=True))))
    return JordanStructure(tuple(blocks))


def jordan_basis(M, tol: float = 1e-4) -> tuple[np.ndarray, JordanStructure]:
    """Matrix S with M = S J S^-1, J the Jordan matrix of jordan_structure."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    js = jordan_structure(M, tol)
    scale = max(1.0, float(np.linalg.norm(M, 2)))

    def rank(X):
        return 0 if X.shape[1] == 0 else int(np.linalg.matrix_rank(X, tol=1e-8 * scale))

    cols = []
    for lam, ch in js.blocks:
        A = M - lam * np.eye(n)
        kernels = [np.zeros((n, 0), dtype=complex)]
        P = np.eye(n, dtype=complex)
        for k in range(1, max(ch) + 1):
            P = P @ A
            _, s, vh = np.linalg.svd(P)
            null = int(np.sum(s <= tol * scale ** k))
            kernels.append(vh.conj().T[:, n - null:])
        collected = np.zeros((n, 0), dtype=complex)
        chains = []
        for length in sorted(set(ch), reverse=True):
            need = ch.count(length)
            for j in range(kernels[length].shape[1]):
                if need == 0:
                    break
                v = kernels[length][:, j]
                base = np.hstack([kernels[length - 1], collected])
                if rank(np.hstack([base, v[:, None]])) > rank(base):
                    chain = [v]
                    for _ in range(length - 1):
                        chain.append(A @ chain[-1])
                    chain.reverse()  # eigenvector first
                    chains.append(chain)
                    collected = np.hstack([collected, np.column_stack(chain)])
                    need -= 1
            if need:
                raise RepresentationError("ill-conditioned Jordan decision")
        for chain in chains:
            cols.extend(chain)
    return np.column_stack(cols), js


def chains_of(rep: Representation, word: WordLike, tol: float = 1e-4) -> list:
    """jc(p): chain lengths of rep(p) with multiplicity."""
    return jordan_structure(evaluate(rep, word), tol).chains


def d_p(rep: Representation, word: WordLike, tol: float = 1e-4) -> int:
    return jordan_structure(evaluate(rep, word), tol).max_chain


def d_0(rep: Representation, parabolic_words: Sequence, tol: float = 1e-4) -> int:
    """Maximal Jordan chain length over the given parabolic elements; 1 if none."""
    return max([d_p(rep, w, tol) for w in parabolic_words] or [1])


@dataclass
class NecmReport:
    ok: bool
    moduli: dict


def has_necm(rep: Representation, parabolic_words: Sequence, tol: float = 1e-8) -> NecmReport:
    """Every eigenvalue of every chi(p) has modulus within tol of 1."""
    moduli = {}
    ok = True
    for w in parabolic_words:
        w = as_word(w)
        mods = np.abs(np.linalg.eigvals(evaluate(rep, w)))
        moduli[format_word(w)] = [float(x) for x in np.sort(mods)]
        # eigenvalues of a Jordan block are perturbed by ~eps^(1/d); judge the
        # modulus of the determinant per cluster as well as pointwise
        if np.any(np.abs(mods - 1.0) > tol):
            js = jordan_structure(evaluate(rep, w))
            if any(abs(abs(lam) - 1.0) > tol for lam, _ in js.blocks):
                ok = False
    return NecmReport(ok, moduli)


@dataclass
class GrowthReport:
    slope: float
    max_ratio: float
    d_p: int


def growth_exponent(rep: Representation, p_word: WordLike, m_max: int) -> GrowthReport:
    """Least-squares slope of log|chi(p^m)| against log m on [m_max/2, m_max]
    and sup over 1 <= m <= m_max of |chi(p^m)| / m^(d_p - 1)."""
    if m_max < 16:
        raise RepresentationError("m_max must be at least 16")
    P = evaluate(rep, p_word)
    dp = jordan_structure(P).max_chain
    Q = np.eye(rep.dim, dtype=complex)
    lo = m_max // 2
    xs, ys = [], []
    ratio = 0.0
    for m in range(1, m_max + 1):
        Q = Q @ P
        nrm = float(np.linalg.norm(Q, 2))
        ratio = max(ratio, nrm / m ** (dp - 1))
        if m >= lo:
            xs.append(math.log(m))
            ys.append(math.log(nrm))
    slope = float(np.polyfit(xs, ys, 1)[0])
    return GrowthReport(slope, ratio, dp)


# ------------------------------------------------------------ constructions

def sl2_matrix(g: MoebiusTransform, n: int) -> np.ndarray:
    """chi_n(g) for (chi_n(g) f)(v) = f(g^-1 v) on the signed monomial basis
    (-1)^j x^j y^(n-j)."""
    a, b, c, d = g.a, g.b, g.c, g.d
    M = np.zeros((n + 1, n + 1))
    P = np.polynomial.polynomial
    for j in range(n + 1):
        # e_j(g^-1 v) = (d x - b y)^j (-c x + a y)^(n-j), dehomogenized at y = 1
        poly = P.polymul(P.polypow([-b, d], j), P.polypow([a, -c], n - j))
        coeffs = np.zeros(n + 1)
        coeffs[: len(poly)] = poly
        M[:, j] = coeffs
    sign = np.array([(-1) ** j for j in range(n + 1)], dtype=float)
    return sign[:, None] * M * sign[None, :] + 0.0


def sl2_irrep(n: int, gens: Mapping[str, MoebiusTransform], relations: tuple = ()) -> Representation:
    if n < 0:
        raise RepresentationError("n must be nonnegative")
    if n % 2:
        raise RepresentationError("chi_n with odd n does not descend to PSL2")
    return Representation(n + 1, {s: sl2_matrix(g, n) for s, g in gens.items()}, relations)


def hecke_generators(q: int) -> dict:
    lam = 2.0 * math.cos(math.pi / q)
    return {"T": MoebiusTransform(1.0, lam, 0.0, 1.0), "S": MoebiusTransform(0.0, 1.0, -1.0, 0.0)}


def hecke_twist(q: int) -> Representation:
    """rho(S) = chi_2(S), rho(T) = exp(2 pi i / q) chi_2(T) on the Hecke group G_q."""
    if q < 3:
        raise RepresentationError("q must be at least 3")
    gens = hecke_generators(q)
    aq = np.exp(2j * np.pi / q)
    rels = ("S S", " ".join(["T S"] * q))
    try:
        return Representation(3, {"T": aq * sl2_matrix(gens["T"], 2),
                                  "S": sl2_matrix(gens["S"], 2)}, rels)
    except RepresentationError as exc:
        raise RuntimeError(f"Hecke twist construction failed: {exc}") from None


def direct_sum(r1: Representation, r2: Representation) -> Representation:
    if set(r1.alphabet) != set(r2.alphabet):
        raise RepresentationError("alphabet mismatch in direct sum")
    n = r1.dim + r2.dim
    imgs = {}
    for s in r1.alphabet:
        m = np.zeros((n, n), dtype=complex)
        m[: r1.dim, : r1.dim] = r1.images[s]
        m[r1.dim:, r1.dim:] = r2.images[s]
        imgs[s] = m
    rels = tuple(dict.fromkeys(r1.relations + r2.relations))
    return Representation(n, imgs, rels)


@dataclass(frozen=True)
class InducedRepresentation:
    rep: Representation
    transversal: tuple
    permutations: dict  # symbol -> tuple, row i has its block in column perm[i]

    def permutation_order(self, word: WordLike) -> int:
        """Order of the coset permutation of a word."""
        perm = list(range(len(self.transversal)))
        for sym, e in as_word(word):
            p = self.permutations[sym]
            if e == -1:
                inv = [0] * len(p)
                for i, j in enumerate(p):
                    inv[j] = i
                p = inv
            perm = [p[i] for i in perm]
        k, cur = 1, perm
        ident = list(range(len(perm)))
        while cur != ident:
            cur = [perm[i] for i in cur]
            k += 1
        return k


def induce(eta: Representation, transversal: Sequence, membership: Callable[[Word], bool],
           generators: Sequence[str], rewrite: Callable[[Word], Word] | None = None
           ) -> InducedRepresentation:
    """chi(g) = (eta~(h_i g h_j^-1))_{ij} with eta~ = 0 off the subgroup.

    Words of the ambient group lying in the subgroup are passed through
    rewrite before evaluating eta; without rewrite eta is read as a
    representation of the ambient group restricted to the subgroup.
    """
    hs = [reduce(as_word(h)) for h in transversal]
    n = len(hs)
    for i in range(n):
        for j in range(i + 1, n):
            if membership(multiply(hs[i], inverse(hs[j]))):
                raise RepresentationError(
                    f"representatives {i} and {j} lie in the same coset")
    d = eta.dim

    def eta_tilde(w: Word) -> np.ndarray:
        return evaluate(eta, rewrite(w) if rewrite else w)

    imgs = {}
    perms = {}
    for sym in generators:
        big = np.zeros((n * d, n * d), dtype=complex)
        perm = []
        for i in range(n):
            hits = [j for j in range(n)
                    if membership(multiply(hs[i], ((sym, 1),), inverse(hs[j])))]
            if len(hits) != 1:
                raise RepresentationError("transversal is not a complete coset system")
            j = hits[0]
            perm.append(j)
            big[i * d:(i + 1) * d, j * d:(j + 1) * d] = eta_tilde(
                multiply(hs[i], ((sym, 1),), inverse(hs[j])))
        imgs[sym] = big
        perms[sym] = tuple(perm)
    return InducedRepresentation(Representation(n * d, imgs), tuple(hs), perms)
