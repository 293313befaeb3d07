"""Zeros of s -> det(1 - L_s) in rectangles: grid scans, argument-principle
counting with recursive subdivision, and multiplicity-aware Newton refinement."""
from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import transfer as tr
from .parallel import pmap
from .representation import Representation

MAX_DEPTH = 12
MAX_NEWTON = 50
POLE_MASK = 1e-3
ARG_STEP = math.pi / 4


class ResonanceError(ValueError):
    def __init__(self, msg: str, contour=None):
        super().__init__(msg)
        self.contour = contour or []


@dataclass(frozen=True)
class Rect:
    re0: float
    re1: float
    im0: float
    im1: float

    def __post_init__(self):
        if self.re1 < self.re0 or self.im1 < self.im0:
            raise ResonanceError("rectangle bounds are reversed")

    @property
    def empty(self) -> bool:
        return self.re1 == self.re0 or self.im1 == self.im0

    @property
    def corners(self) -> list:
        return [complex(self.re0, self.im0), complex(self.re1, self.im0),
                complex(self.re1, self.im1), complex(self.re0, self.im1)]

    @property
    def diameter(self) -> float:
        return math.hypot(self.re1 - self.re0, self.im1 - self.im0)

    def contains(self, z: complex) -> bool:
        return self.re0 <= z.real <= self.re1 and self.im0 <= z.imag <= self.im1

    def to_json(self) -> list:
        return [self.re0, self.re1, self.im0, self.im1]


@dataclass
class ZeroRecord:
    location: complex
    multiplicity: int
    residual: float
    flags: tuple = ()

    def to_json(self) -> dict:
        return {"s": [self.location.real, self.location.imag],
                "multiplicity": self.multiplicity, "residual": self.residual,
                "flags": list(self.flags)}


@dataclass
class ScanResult:
    re: np.ndarray
    im: np.ndarray
    values: np.ndarray  # values[i, j] at re[j] + i im[i]
    status: np.ndarray  # "ok" | "pole"


class DetFunction:
    """Memoized s -> continued det with the pole set masked."""

    def __init__(self, t: tr.StructureTuple, rep: Representation, N: int, re_min: float = -50.0,
                 **opts):
        self.t, self.rep, self.N, self.opts = t, rep, N, opts
        self.poles = tr.pole_candidates(t, rep, re_min)
        self.cache = {}

    def masked(self, s: complex) -> bool:
        return any(abs(s - p) < POLE_MASK for p in self.poles)

    def __call__(self, s: complex) -> complex:
        s = complex(s)
        key = (s.real, s.imag)
        if key not in self.cache:
            r = tr.continued_det(self.t, self.rep, s, self.N, **self.opts)
            self.cache[key] = complex(np.inf) if r.pole else r.value
        return self.cache[key]


def scan(t: tr.StructureTuple, rep: Representation, rect: Rect, grid: tuple, N: int,
         workers: int = 1, **opts) -> ScanResult:
    """Row-major grid of continued det values."""
    nx, ny = grid
    if rect.empty or nx <= 0 or ny <= 0:
        return ScanResult(np.zeros(0), np.zeros(0), np.zeros((0, 0), dtype=complex),
                          np.zeros((0, 0), dtype=object))
    re = np.linspace(rect.re0, rect.re1, nx)
    im = np.linspace(rect.im0, rect.im1, ny)
    f = DetFunction(t, rep, N, min(rect.re0, 0.0) - 1.0, **opts)
    pts = [complex(x, y) for y in im for x in re]

    def one(s):
        if f.masked(s):
            return complex(np.nan), "pole"
        return f(s), "ok"

    res = pmap(one, pts, workers)
    vals = np.array([v for v, _ in res], dtype=complex).reshape(ny, nx)
    stat = np.array([st for _, st in res], dtype=object).reshape(ny, nx)
    return ScanResult(re, im, vals, stat)


# ------------------------------------------------------- argument principle

def _segment_arg(f, z0: complex, z1: complex, v0: complex, v1: complex, min_len: float,
                 contour: list) -> float:
    """Argument increment along a segment; a segment is accepted once the
    increment is small and agrees with the sum over its two halves."""
    zm = 0.5 * (z0 + z1)
    vm = f(zm)
    if vm == 0 or not np.isfinite(vm):
        raise ResonanceError("contour passes through a zero or pole", contour + [zm])
    d = cmath.phase(v1 / v0)
    d2 = cmath.phase(vm / v0) + cmath.phase(v1 / vm)
    if abs(d) <= ARG_STEP and abs(d - d2) < 1e-9:
        contour.append(z1)
        return d
    if abs(z1 - z0) < min_len:
        raise ResonanceError("contour passes through a zero or pole", contour + [z0, z1])
    return (_segment_arg(f, z0, zm, v0, vm, min_len, contour)
            + _segment_arg(f, zm, z1, vm, v1, min_len, contour))


def contour_winding(f, points: Sequence[complex], density: float = 8.0) -> tuple:
    """Winding number of f along the closed polygon through points."""
    total = 0.0
    contour = []
    pts = list(points) + [points[0]]
    scale = max(abs(pts[i + 1] - pts[i]) for i in range(len(pts) - 1))
    min_len = 1e-9 * max(1.0, scale)
    for a, b in zip(pts[:-1], pts[1:]):
        per_edge = max(4, int(math.ceil(density * abs(b - a))))
        nodes = [a + (b - a) * k / per_edge for k in range(per_edge + 1)]
        vals = [f(z) for z in nodes]
        for v, z in zip(vals, nodes):
            if v == 0 or not np.isfinite(v):
                raise ResonanceError("contour passes through a zero or pole", [z])
        for k in range(per_edge):
            total += _segment_arg(f, nodes[k], nodes[k + 1], vals[k], vals[k + 1], min_len, contour)
    w = total / (2.0 * math.pi)
    if abs(w - round(w)) > 1e-3:
        raise ResonanceError("winding number is not an integer", contour)
    return int(round(w)), contour


def _rect_count(f, R: Rect, poles_inside: int) -> int:
    w, _ = contour_winding(f, R.corners)
    return w + poles_inside


def _newton(f, z: complex, m: int, radius: float) -> tuple:
    z_start = z
    for _ in range(MAX_NEWTON):
        if abs(z - z_start) > radius:
            return z, False
        v = f(z)
        if v == 0:
            return z, True
        h = 1e-6 * max(1.0, abs(z))
        dv = (f(z + h) - f(z - h)) / (2.0 * h)
        if dv == 0 or not np.isfinite(dv):
            return z, False
        step = m * v / dv
        z = z - step
        # the difference quotient is only good to O(h^2), which caps the
        # resolution at multiple zeros
        if abs(step) <= max(1e-14 * max(1.0, abs(z)), h * h):
            return z, True
    return z, False


def _pole_orders(f: DetFunction, R: Rect) -> int:
    tot = 0
    for p in f.poles:
        if R.contains(complex(p)):
            tot += max(0, -tr.winding(f, complex(p), 0.5 * POLE_MASK))
    return tot


def find_zeros(t: tr.StructureTuple, rep: Representation, rect: Rect, N: int,
               tol: float = 1e-10, workers: int = 1, max_depth: int = MAX_DEPTH,
               **opts) -> list:
    """Zeros in the rectangle with multiplicities from winding numbers."""
    if rect.empty:
        return []
    f = DetFunction(t, rep, N, min(rect.re0, 0.0) - 1.0, **opts)
    R0 = _perturb(f, rect)
    total = _rect_count(f, R0, _pole_orders(f, R0))
    found = _resolve(f, R0, total, 0, max_depth, tol)
    if sum(z.multiplicity for z in found) != total:
        raise ResonanceError("zero count differs from the boundary winding number",
                             R0.corners)
    for i, a in enumerate(found):
        for b in found[i + 1:]:
            if abs(a.location - b.location) < 1e-6 * max(1.0, abs(a.location)):
                raise ResonanceError("a zero was counted twice: it lies on a subdivision line",
                                     [a.location])
    return sorted(found, key=lambda z: (round(z.location.real, 9), round(z.location.imag, 9)))


def _perturb(f: DetFunction, R: Rect) -> Rect:
    """Shift edges slightly until the contour avoids zeros and masked poles."""
    shifts = [0.0, 1.3e-4, -2.1e-4, 3.7e-4, -5.3e-4]
    for d in shifts:
        cand = Rect(R.re0 - d, R.re1 + d, R.im0 - d, R.im1 + d)
        if any(_near_edge(cand, complex(p)) for p in f.poles):
            continue
        try:
            contour_winding(f, cand.corners)
        except ResonanceError:
            continue
        return cand
    raise ResonanceError("could not place a contour avoiding zeros/poles", R.corners)


def _near_edge(R: Rect, p: complex) -> bool:
    near_re = min(abs(p.real - R.re0), abs(p.real - R.re1)) < POLE_MASK
    near_im = min(abs(p.imag - R.im0), abs(p.imag - R.im1)) < POLE_MASK
    inside_re = R.re0 - POLE_MASK <= p.real <= R.re1 + POLE_MASK
    inside_im = R.im0 - POLE_MASK <= p.imag <= R.im1 + POLE_MASK
    return (near_re and inside_im) or (near_im and inside_re)


def _split(f: DetFunction, R: Rect) -> list:
    # off-centre lines first: symmetric functions such as real-on-the-axis
    # determinants keep zeros on centre lines where the argument never moves
    for frac in (0.5 + 0.0731, 0.5 - 0.0613, 0.5 + 0.1377, 0.5 - 0.1519):
        if R.re1 - R.re0 >= R.im1 - R.im0:
            x = R.re0 + frac * (R.re1 - R.re0)
            parts = [Rect(R.re0, x, R.im0, R.im1), Rect(x, R.re1, R.im0, R.im1)]
        else:
            y = R.im0 + frac * (R.im1 - R.im0)
            parts = [Rect(R.re0, R.re1, R.im0, y), Rect(R.re0, R.re1, y, R.im1)]
        try:
            counts = [_rect_count(f, P, _pole_orders(f, P)) for P in parts]
        except ResonanceError:
            continue
        if any(any(_near_edge(P, complex(p)) for p in f.poles) for P in parts):
            continue
        return list(zip(parts, counts))
    raise ResonanceError("no admissible subdivision line", R.corners)


def _resolve(f: DetFunction, R: Rect, count: int, depth: int, max_depth: int,
             tol: float) -> list:
    if count <= 0:
        if count < 0:
            raise ResonanceError("negative zero count: unmasked pole inside", R.corners)
        return []
    z0 = complex(0.5 * (R.re0 + R.re1), 0.5 * (R.im0 + R.im1))
    z, ok = _newton(f, z0, count, R.diameter)
    if ok and R.contains(z):
        r = min(1e-4, 0.05 * R.diameter) if depth < max_depth else 0.25 * R.diameter
        r = max(r, 1e-9 * max(1.0, abs(z)))
        try:
            w = tr.winding(f, z, r)
        except Exception:
            w = None
        if w == count:
            return _checked([ZeroRecord(z, count, abs(f(z)), ("argument-principle", "newton"))],
                            f, R, tol)
    if count > 1:
        found = _separate(f, R, count)
        if found:
            return _checked(found, f, R, tol)
    if depth >= max_depth:
        raise ResonanceError(f"winding {count} unresolved after {max_depth} subdivisions",
                             R.corners)
    parts = _split(f, R)
    if sum(c for _, c in parts) != count:
        raise ResonanceError("winding inconsistency between a rectangle and its halves",
                             R.corners)
    out = []
    for P, c in parts:
        out.extend(_resolve(f, P, c, depth + 1, max_depth, tol))
    return out


def _checked(records: list, f, R: Rect, tol: float) -> list:
    """Flag records whose residual exceeds tol times the size of det on R."""
    scale = max(1.0, max(abs(f(c)) for c in R.corners))
    for r in records:
        if r.residual > tol * scale:
            r.flags = r.flags + ("residual-above-tol",)
    return records


def _separate(f, R: Rect, count: int) -> list:
    """Distinct zeros from simple Newton runs at interior starts, accepted only
    when their small-circle windings add up to count."""
    fr = (0.25, 0.5, 0.75)
    starts = [complex(R.re0 + a * (R.re1 - R.re0), R.im0 + b * (R.im1 - R.im0))
              for b in fr for a in fr]
    zs = []
    for z0 in starts:
        z, ok = _newton(f, z0, 1, R.diameter)
        if ok and R.contains(z) and all(abs(z - y) > 1e-7 * max(1.0, abs(z)) for y in zs):
            zs.append(z)
    if len(zs) < 2:
        return []
    sep = min(abs(a - b) for i, a in enumerate(zs) for b in zs[i + 1:])
    r = min(0.25 * sep, 1e-4)
    out = []
    for z in zs:
        try:
            w = tr.winding(f, z, r)
        except Exception:
            return []
        if w <= 0:
            return []
        out.append(ZeroRecord(z, w, abs(f(z)), ("argument-principle", "newton", "separated")))
    return out if sum(z.multiplicity for z in out) == count else []


def write_zeros_csv(zeros: Sequence[ZeroRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["s_re", "s_im", "multiplicity", "residual"])
    for z in zeros:
        w.writerow([repr(z.location.real), repr(z.location.imag), z.multiplicity,
                    repr(z.residual)])
