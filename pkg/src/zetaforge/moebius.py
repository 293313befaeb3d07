"""Elements of PSL2(R): classification, norms, fixed points and exact
images of points, disks and intervals under fractional linear maps."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

DET_TOL = 1e-12
PARABOLIC_TOL = 1e-9


class MoebiusError(ValueError):
    pass


class _Infinity:
    """The point at infinity of the extended real line."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __eq__(self, other) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("zetaforge.INF")

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()

Point = Union[complex, float, _Infinity]


def is_inf(z) -> bool:
    return z is INF


@dataclass(frozen=True)
class MoebiusTransform:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not math.isfinite(det) or abs(det - 1.0) > 1e-8 * max(1.0, abs(self.a * self.d)):
            raise MoebiusError(f"determinant {det} is not 1")

    @classmethod
    def from_matrix(cls, m) -> "MoebiusTransform":
        """Build from a 2x2 array (or row-major 4-list), rescaling to det 1
        and choosing the canonical sign."""
        m = np.asarray(m, dtype=float).reshape(2, 2)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if det <= 0:
            raise MoebiusError("matrix must have positive determinant")
        m = m / math.sqrt(det)
        return cls(*_canonical(m.ravel()))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    @property
    def trace(self) -> float:
        return self.a + self.d

    def inverse(self) -> "MoebiusTransform":
        return MoebiusTransform(*_canonical((self.d, -self.b, -self.c, self.a)))

    def __matmul__(self, other: "MoebiusTransform") -> "MoebiusTransform":
        return compose(self, other)

    def __call__(self, z):
        return apply(self, z)

    def derivative(self, z):
        """g'(z) = (cz + d)^-2."""
        return 1.0 / (self.c * z + self.d) ** 2

    def close(self, other: "MoebiusTransform", tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.matrix - other.matrix)) <= tol)

    def to_list(self) -> list:
        return [self.a, self.b, self.c, self.d]


def _canonical(entries) -> tuple:
    entries = tuple(float(x) for x in entries)
    for x in entries:
        if x != 0.0:
            if x < 0:
                entries = tuple(-y for y in entries)
            break
    # avoid negative zeros so equal transforms hash and print identically
    return tuple(y + 0.0 for y in entries)


IDENTITY = MoebiusTransform(1.0, 0.0, 0.0, 1.0)


def compose(g: MoebiusTransform, h: MoebiusTransform) -> MoebiusTransform:
    """Matrix product g*h, i.e. z -> g(h(z))."""
    a = g.a * h.a + g.b * h.c
    b = g.a * h.b + g.b * h.d
    c = g.c * h.a + g.d * h.c
    d = g.c * h.b + g.d * h.d
    # renormalize against drift in long products
    det = a * d - b * c
    s = 1.0 / math.sqrt(det) if det > 0 else 1.0
    return MoebiusTransform(*_canonical((a * s, b * s, c * s, d * s)))


def is_identity(g: MoebiusTransform, tol: float = PARABOLIC_TOL) -> bool:
    return abs(g.a - 1) <= tol and abs(g.d - 1) <= tol and abs(g.b) <= tol and abs(g.c) <= tol


def classify(g: MoebiusTransform, tol: float = PARABOLIC_TOL) -> str:
    if is_identity(g, tol):
        return "identity"
    t = abs(g.trace)
    if abs(t - 2.0) <= tol:
        return "parabolic"
    return "hyperbolic" if t > 2.0 else "elliptic"


def norm_and_length(h: MoebiusTransform, tol: float = PARABOLIC_TOL) -> tuple[float, float]:
    """N(h) = lambda_max**2 and the translation length log N(h)."""
    if classify(h, tol) != "hyperbolic":
        raise MoebiusError("norm undefined for non-hyperbolic element")
    t = abs(h.trace)
    lam = (t + math.sqrt(t * t - 4.0)) / 2.0
    return lam * lam, 2.0 * math.log(lam)


def fixed_points(g: MoebiusTransform, tol: float = PARABOLIC_TOL) -> list:
    """Fixed points on the boundary; for hyperbolic g the attracting one first."""
    kind = classify(g, tol)
    if kind == "identity":
        raise MoebiusError("identity fixes every point")
    if kind == "elliptic":
        return []
    a, b, c, d = g.a, g.b, g.c, g.d
    if kind == "parabolic":
        if c == 0.0:
            return [INF]
        return [(a - d) / (2.0 * c)]
    if c == 0.0:
        # z -> (a z + b)/d; multiplier a/d
        finite = b / (d - a)
        return [INF, finite] if abs(a) > abs(d) else [finite, INF]
    disc = math.sqrt((a + d) ** 2 - 4.0)
    pts = [(a - d + disc) / (2.0 * c), (a - d - disc) / (2.0 * c)]
    # attracting fixed point has |g'(x)| = |cx + d|^-2 < 1
    pts.sort(key=lambda x: -abs(c * x + d))
    return pts


def apply(g: MoebiusTransform, z):
    """Extended action on the Riemann sphere, INF handled explicitly."""
    a, b, c, d = g.a, g.b, g.c, g.d
    if z is INF:
        return INF if c == 0.0 else a / c
    den = c * z + d
    if den == 0:
        return INF
    return (a * z + b) / den


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise MoebiusError("disk radius must be positive")

    def contains(self, z, tol: float = 0.0) -> bool:
        return abs(complex(z) - self.center) < self.radius + tol

    def contains_disk(self, other: "Disk", margin: float = 0.0) -> bool:
        """True if the closure of other lies inside self (with a margin)."""
        return abs(other.center - self.center) + other.radius + margin < self.radius

    def disjoint(self, other: "Disk", margin: float = 0.0) -> bool:
        return abs(other.center - self.center) > self.radius + other.radius + margin

    def boundary(self, n: int = 64) -> np.ndarray:
        t = 2.0 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * t)


def map_disk(g: MoebiusTransform, D: Disk) -> Disk:
    """Exact image of a disk whose closure avoids the pole of g."""
    a, b, c, d = g.a, g.b, g.c, g.d
    z0, r = complex(D.center), float(D.radius)
    if c == 0.0:
        return Disk((a * z0 + b) / d, r * abs(a / d))
    # the image centre is the image of the reflection of the pole in the circle
    to_pole = -d / c - z0 if abs(c) > 1e-300 else complex(math.inf)
    if abs(to_pole) <= r * (1 + 1e-14):
        raise MoebiusError("image unbounded: pole lies in the closed disk")
    zs = z0 + r * r / to_pole.conjugate() if math.isfinite(abs(to_pole)) else z0
    w = (a * zs + b) / (c * zs + d)
    pts = z0 + r * np.exp(0.5j * np.pi * np.arange(4))
    rad = float(np.mean(np.abs((a * pts + b) / (c * pts + d) - w)))
    return Disk(w, rad)


@dataclass(frozen=True)
class Interval:
    """Closed arc of the extended real line running in the increasing
    direction from lo to hi; lo > hi means the arc passes through INF."""

    lo: Point
    hi: Point

    def __post_init__(self):
        if self.lo == self.hi and not (is_inf(self.lo) or is_inf(self.hi)):
            raise MoebiusError("degenerate interval")
        if is_inf(self.lo) and is_inf(self.hi):
            raise MoebiusError("degenerate interval")

    @property
    def through_infinity(self) -> bool:
        if is_inf(self.lo) or is_inf(self.hi):
            return True
        return self.lo > self.hi

    def contains(self, x, tol: float = 0.0) -> bool:
        if is_inf(x):
            return self.through_infinity or False
        x = float(x.real if isinstance(x, complex) else x)
        lo, hi = self.lo, self.hi
        if is_inf(lo):
            return x <= hi + tol
        if is_inf(hi):
            return x >= lo - tol
        if lo < hi:
            return lo - tol <= x <= hi + tol
        return x >= lo - tol or x <= hi + tol

    def interior_contains(self, x, tol: float = 0.0) -> bool:
        """Strict containment away from the endpoints by tol."""
        if is_inf(x):
            return self.through_infinity and not (is_inf(self.lo) or is_inf(self.hi))
        x = float(x)
        lo, hi = self.lo, self.hi
        if is_inf(lo):
            return x < hi - tol
        if is_inf(hi):
            return x > lo + tol
        if lo < hi:
            return lo + tol < x < hi - tol
        return x > lo + tol or x < hi - tol

    def disjoint(self, other: "Interval") -> bool:
        """Closed arcs have no common point."""
        for p in (other.lo, other.hi):
            if self.contains(p):
                return False
        for p in (self.lo, self.hi):
            if other.contains(p):
                return False
        return True

    def midpoint(self):
        lo, hi = self.lo, self.hi
        if is_inf(lo):
            return hi - 1.0
        if is_inf(hi):
            return lo + 1.0
        if lo < hi:
            return 0.5 * (lo + hi)
        return INF

    def samples(self, n: int = 33) -> list:
        """Points along the arc, endpoints included."""
        lo, hi = self.lo, self.hi
        if not self.through_infinity:
            return list(np.linspace(lo, hi, n))
        # parametrize through the Cayley angle so INF is reachable
        tl = _angle(lo)
        th = _angle(hi)
        if th <= tl:
            th += 2 * math.pi
        return [_from_angle(t) for t in np.linspace(tl, th, n)]


def _angle(x) -> float:
    # x = tan(t/2) for t in (-pi, pi]; INF at t = pi
    if is_inf(x):
        return math.pi
    return 2.0 * math.atan(x)


def _from_angle(t: float):
    t = math.remainder(t, 2 * math.pi)
    if abs(abs(t) - math.pi) < 1e-15:
        return INF
    return math.tan(t / 2.0)


def map_interval(g: MoebiusTransform, I: Interval) -> Interval:
    """Image arc; orientation is kept because g preserves the cyclic order."""
    return Interval(_real_point(apply(g, I.lo)), _real_point(apply(g, I.hi)))


def _real_point(z):
    if is_inf(z):
        return INF
    return float(z.real) if isinstance(z, complex) else float(z)


def hyp_dist(z: complex, w: complex) -> float:
    z, w = complex(z), complex(w)
    if z.imag <= 0 or w.imag <= 0:
        raise MoebiusError("points must lie in the upper half-plane")
    arg = 1.0 + abs(z - w) ** 2 / (2.0 * z.imag * w.imag)
    return math.acosh(arg)


def parabolic_form(p: MoebiusTransform, tol: float = PARABOLIC_TOL) -> tuple[float, float, int]:
    """(c, d, eps) with p = q**eps, q = [[1+cd, d^2], [-c^2, 1-cd]]."""
    if classify(p, tol) != "parabolic":
        raise MoebiusError("element is not parabolic")
    m = p.matrix
    if m[0, 0] + m[1, 1] < 0:
        m = -m
    eps = 1
    if m[0, 1] < -tol or m[1, 0] > tol:
        m = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])
        eps = -1
    d = math.sqrt(max(m[0, 1], 0.0))
    c = math.sqrt(max(-m[1, 0], 0.0))
    if m[0, 0] - 1.0 < 0:
        c = -c
    return c, d, eps


def parabolic_params(p: MoebiusTransform, tol: float = PARABOLIC_TOL) -> tuple[float, float]:
    """(c, d) with p = [[1+cd, d^2], [-c^2, 1-cd]] up to sign."""
    c, d, eps = parabolic_form(p, tol)
    if eps != 1:
        raise MoebiusError("parabolic does not have the form [[1+cd, d^2], [-c^2, 1-cd]]")
    return c, d


def parabolic_power(p: MoebiusTransform, n: int, tol: float = PARABOLIC_TOL) -> MoebiusTransform:
    """Closed form of p**n; inverse-oriented parabolics reduce to p**-1."""
    c, d, eps = parabolic_form(p, tol)
    n = n * eps
    return MoebiusTransform(*_canonical((1 + n * c * d, n * d * d, -n * c * c, 1 - n * c * d)))


def parabolic_fixed_point(p: MoebiusTransform):
    c, d, _ = parabolic_form(p)
    return INF if c == 0.0 else -d / c


def power(g: MoebiusTransform, n: int) -> MoebiusTransform:
    base = g if n >= 0 else g.inverse()
    result = IDENTITY
    for _ in range(abs(n)):
        result = compose(result, base)
    return result
