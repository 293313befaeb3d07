"""Words in free alphabets: a letter is a (symbol, exponent) pair with
exponent +1 or -1, and a word is a tuple of letters."""
from __future__ import annotations

from typing import Iterable, Sequence, Union

Letter = tuple  # (symbol, +1 | -1)
Word = tuple

WordLike = Union[str, Sequence]


class WordError(ValueError):
    pass


def parse_word(text: str) -> Word:
    """Parse whitespace-separated symbols, "^-1" marking inverses."""
    out = []
    for tok in text.split():
        if tok.endswith("^-1"):
            sym, e = tok[:-3], -1
        elif tok.endswith("^1"):
            sym, e = tok[:-2], 1
        else:
            sym, e = tok, 1
        if not sym:
            raise WordError(f"empty symbol in token {tok!r}")
        out.append((sym, e))
    return tuple(out)


def as_word(w: WordLike) -> Word:
    if isinstance(w, str):
        return parse_word(w)
    out = []
    for x in w:
        if isinstance(x, str):
            out.extend(parse_word(x))
        else:
            sym, e = x
            if e not in (1, -1):
                raise WordError(f"exponent must be +-1, got {e}")
            out.append((sym, int(e)))
    return tuple(out)


def format_word(w: Word) -> str:
    return " ".join(s if e == 1 else f"{s}^-1" for s, e in w)


def inverse(w: Word) -> Word:
    return tuple((s, -e) for s, e in reversed(w))


def reduce(w: Iterable) -> Word:
    """Free reduction."""
    stack: list = []
    for s, e in w:
        if stack and stack[-1][0] == s and stack[-1][1] == -e:
            stack.pop()
        else:
            stack.append((s, e))
    return tuple(stack)


def multiply(*ws: Word) -> Word:
    out: tuple = ()
    for w in ws:
        out = out + tuple(w)
    return reduce(out)


def cyclic_reduce(w: Word) -> Word:
    w = reduce(w)
    i, j = 0, len(w)
    while j - i >= 2 and w[i][0] == w[j - 1][0] and w[i][1] == -w[j - 1][1]:
        i += 1
        j -= 1
    return w[i:j]


def is_cyclically_reduced(w: Word) -> bool:
    return w == reduce(w) and (len(w) < 2 or not (w[0][0] == w[-1][0] and w[0][1] == -w[-1][1]))


def rotations(w: Word) -> list:
    return [w[i:] + w[:i] for i in range(len(w))] or [w]


def letter_key(letter: Letter, order: dict) -> tuple:
    return (order[letter[0]], 0 if letter[1] == 1 else 1)


def canonical_rotation(w: Word, order: dict | None = None) -> Word:
    """Lexicographically least rotation; order maps symbols to ranks."""
    if not w:
        return w
    if order is None:
        order = {s: s for s, _ in w}
    return min(rotations(w), key=lambda r: [letter_key(x, order) for x in r])


def primitive_root(w: Word) -> tuple[Word, int]:
    """(r, m) with w = r^m and m maximal."""
    n = len(w)
    for k in range(1, n + 1):
        if n % k == 0 and w[:k] * (n // k) == w:
            return w[:k], n // k
    return w, 1


def exponent_sum(w: Word, sym: str) -> int:
    return sum(e for s, e in w if s == sym)
