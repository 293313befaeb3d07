"""The Lerch transcendent Phi_m(s, lam, w) = sum_{n>=m} C(n, m) lam^(n-m) (n+w)^(-s)
for |lam| = 1, continued in s.

The binomial coefficient is rewritten in powers of (n + w), which turns the
tail of the series into a combination of sums sum_{n>=0} lam^n (n+b)^(-sigma)
with large |b|.  For lam = 1 that sum is a shifted Hurwitz zeta value and is
evaluated by Euler-Maclaurin; for lam != 1 it is entire in sigma and is
evaluated by the asymptotic expansion of 1/(1 - lam e^t).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

BERNOULLI_TERMS = 12
LAMBDA_ONE_TOL = 1e-12
POLE_TOL = 1e-12
UNIT_TOL = 1e-10
MAX_TAIL_TERMS = 80
EPS = 2.220446049250313e-16
# the head length grows like 1/theta for lam = exp(i theta) near 1
THETA_MIN = 1e-3


class LerchError(ValueError):
    pass


@dataclass(frozen=True)
class LerchValue:
    value: complex
    pole: bool
    error: float


@lru_cache(maxsize=None)
def _bernoulli_even(count: int) -> tuple:
    """B_2, B_4, ..., B_{2 count} as floats, from the exact recurrence."""
    B = [Fraction(1)]
    for n in range(1, 2 * count + 1):
        B.append(-sum(math.comb(n + 1, k) * B[k] for k in range(n)) / Fraction(n + 1))
    return tuple(float(B[2 * k]) for k in range(1, count + 1))


@lru_cache(maxsize=None)
def _stirling1(m: int) -> tuple:
    """Signed Stirling numbers s(m, k), k = 0..m: n(n-1)...(n-m+1) = sum s(m,k) n^k."""
    row = [1]
    for i in range(m):
        new = [0] * (len(row) + 1)
        for k, c in enumerate(row):
            new[k + 1] += c
            new[k] -= i * c
        row = new
    return tuple(row)


def power_coefficients(m: int, w) -> np.ndarray:
    """a_j(w), j = 0..m, with C(n, m) = sum_j a_j(w) (n + w)^j.

    Returns an array of shape (m + 1,) + shape(w)."""
    w = np.asarray(w, dtype=complex)
    st = _stirling1(m)
    fact = math.factorial(m)
    out = np.zeros((m + 1,) + w.shape, dtype=complex)
    mw = -w
    for j in range(m + 1):
        acc = np.zeros(w.shape, dtype=complex)
        for k in range(j, m + 1):
            if st[k]:
                acc = acc + st[k] * math.comb(k, j) * mw ** (k - j)
        out[j] = acc / fact
    return out


def _is_one(lam: complex) -> bool:
    return abs(lam - 1.0) <= LAMBDA_ONE_TOL


def _cpow(b, sigma):
    # principal branch b^(-sigma)
    return np.exp(-sigma * np.log(b))


def _hurwitz_tail(sigma: complex, b: np.ndarray) -> tuple:
    """sum_{n>=0} (n + b)^(-sigma) for Re b large, by Euler-Maclaurin."""
    lb = np.log(b)
    bs = np.exp(-sigma * lb)
    val = 0.5 * bs
    if sigma != 1:
        val = val + b * bs / (sigma - 1.0)
    else:
        val = val + np.inf
    # sum_k B_2k/(2k)! sigma (sigma+1)...(sigma+2k-2) b^(-sigma-2k+1)
    poch = sigma
    bpow = bs / b
    binv2 = 1.0 / (b * b)
    term = 0
    for k, B in enumerate(_bernoulli_even(BERNOULLI_TERMS), start=1):
        term = B / math.factorial(2 * k) * poch * bpow
        val = val + term
        poch = poch * (sigma + 2 * k - 1) * (sigma + 2 * k)
        bpow = bpow * binv2
    return val, np.abs(term)


@lru_cache(maxsize=256)
def _apostol_coeffs(lam: complex, count: int) -> np.ndarray:
    """c_k with 1/(1 - lam e^t) = sum_k c_k t^k."""
    c = np.zeros(count, dtype=complex)
    inv = 1.0 / (1.0 - lam)
    c[0] = inv
    inv_fact = [1.0 / math.factorial(j) for j in range(count)]
    for k in range(1, count):
        acc = 0j
        for j in range(1, k + 1):
            acc += c[k - j] * inv_fact[j]
        c[k] = lam * inv * acc
    return c


def _twisted_tail(sigma: complex, lam: complex, b: np.ndarray) -> tuple:
    """sum_{n>=0} lam^n (n + b)^(-sigma), lam != 1 on the unit circle."""
    c = _apostol_coeffs(complex(lam), MAX_TAIL_TERMS)
    bs = _cpow(b, sigma)
    binv = 1.0 / b
    val = c[0] * bs
    # f^(k)(0) = (-sigma)(-sigma-1)...(-sigma-k+1) b^(-sigma-k)
    deriv = bs
    scale = np.abs(val) + 1e-300
    last = prev = np.abs(val)
    for k in range(1, MAX_TAIL_TERMS):
        deriv = deriv * (-sigma - k + 1) * binv
        term = c[k] * deriv
        val = val + term
        prev, last = last, np.abs(term)
        # some c_k vanish (lam = -1 makes every even one zero), so require
        # two consecutive negligible terms
        if np.all(np.maximum(last, prev) <= 1e-18 * scale):
            break
    return val, np.maximum(last, prev)


def _theta_distance(lam: complex) -> float:
    """Distance from 0 to the nearest pole of 1/(1 - lam e^t)."""
    if _is_one(lam):
        return 2.0 * math.pi
    return abs(math.remainder(math.atan2(lam.imag, lam.real), 2 * math.pi)) or 2.0 * math.pi


def _shift(s: complex, m: int, lam: complex, w: np.ndarray) -> int:
    if _is_one(lam):
        bound = max(20.0, 2.0 * (abs(s) + m))
    else:
        bound = max(20.0, 2.0 * (abs(s) + m)) * max(1.0, math.pi / _theta_distance(lam))
    lo = float(np.min(w.real)) + m if w.size else 0.0
    return max(0, int(math.ceil(bound - lo)))


def phi_array(s: complex, lam: complex, w, m: int = 0) -> tuple:
    """Vectorized Phi_m(s, lam, w) over an array of shifts w.

    Returns (values, error estimates).  At a pole the value is inf."""
    s = complex(s)
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > UNIT_TOL:
        raise LerchError("lam must lie on the unit circle")
    if m < 0:
        raise LerchError("m must be nonnegative")
    if not _is_one(lam) and _theta_distance(lam) < THETA_MIN:
        raise LerchError(f"lam within angle {THETA_MIN:g} of 1 but not equal to 1 "
                         "is outside the supported region")
    w = np.asarray(w, dtype=complex)
    shape = w.shape
    w = w.ravel()
    near_int = np.abs(w - np.round(w.real))
    if np.any((near_int <= 1e-12) & (np.round(w.real) <= -m)):
        # only terms n >= m occur, so n + w = 0 needs w in -(m + N0)
        raise LerchError("singular shift: w is a nonpositive integer")
    if _is_one(lam) and is_pole(s, 1.0, m):
        return np.full(shape, complex(np.inf, 0)), np.zeros(shape)
    K = _shift(s, m, lam, w)
    # head: n = m .. m + K - 1
    head = np.zeros(w.shape, dtype=complex)
    absum = np.zeros(w.shape)
    for n in range(m, m + K):
        t = math.comb(n, m) * lam ** (n - m) * _cpow(n + w, s)
        head += t
        absum += np.abs(t)
    a = power_coefficients(m, w)
    b = w + m + K
    tail = np.zeros(w.shape, dtype=complex)
    err = np.zeros(w.shape)
    lamK = lam ** K
    for j in range(m + 1):
        if _is_one(lam):
            v, e = _hurwitz_tail(s - j, b)
        else:
            v, e = _twisted_tail(s - j, lam, b)
        tail += a[j] * v
        err += np.abs(a[j]) * e
        absum += np.abs(a[j] * v)
    val = head + lamK * tail
    # worst-case rounding of the K + m + 1 accumulated terms
    err = err + EPS * ((K + m + 2) * absum + np.abs(val))
    return val.reshape(shape), err.reshape(shape)


def is_pole(s: complex, lam: complex, m: int) -> bool:
    if not _is_one(complex(lam)):
        return False
    s = complex(s)
    j = round(s.real)
    return 1 <= j <= m + 1 and abs(s - j) <= POLE_TOL


def phi(s: complex, lam: complex, w: complex, m: int = 0) -> LerchValue:
    if is_pole(s, lam, m):
        return LerchValue(complex(np.inf, 0), True, 0.0)
    v, e = phi_array(s, lam, np.array([w]), m)
    return LerchValue(complex(v[0]), False, float(e[0]))


def residue_at_pole(m: int, j: int, w: complex) -> complex:
    """Residue of Phi_m(., 1, w) at s = j, j in 1..m+1."""
    if not 1 <= j <= m + 1:
        raise LerchError(f"no pole at s = {j} for m = {m}")
    return complex(power_coefficients(m, np.array([w]))[j - 1][0])
