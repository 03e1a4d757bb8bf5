"""Words in a free group on k generators.

Letters are integers: ``2*i`` is generator i and ``2*i + 1`` its inverse, so
the inverse of a letter is ``letter ^ 1``.  Lexicographic order on these codes
is the canonical emission order everywhere in the package.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import ResourceError
from .lie_sl import GroupElement

Word = tuple[int, ...]


def inv_letter(a: int) -> int:
    return a ^ 1


def letter_name(a: int) -> str:
    base = "abcdefghijklmnopqrstuvwxyz"[a // 2] if a // 2 < 26 else f"g{a // 2}"
    return base if a % 2 == 0 else base.upper()


def format_word(w: Sequence[int]) -> str:
    """``(0, 3, 1)`` -> ``"aBA"``; the empty word is ``"e"``."""
    return "".join(letter_name(int(a)) for a in w) or "e"


def parse_word(s: str) -> Word:
    """Inverse of :func:`format_word` for up to 26 generators."""
    s = s.strip()
    if s in ("", "e", "1"):
        return ()
    out = []
    for ch in s:
        if not ch.isalpha():
            raise ValueError(f"bad letter {ch!r} in word {s!r}")
        i = ord(ch.lower()) - ord("a")
        out.append(2 * i + (1 if ch.isupper() else 0))
    return tuple(out)


def is_reduced(w: Sequence[int]) -> bool:
    return all(w[i + 1] != (w[i] ^ 1) for i in range(len(w) - 1))


def free_reduce(w: Iterable[int]) -> Word:
    out: list[int] = []
    for a in w:
        if out and out[-1] == (a ^ 1):
            out.pop()
        else:
            out.append(int(a))
    return tuple(out)


def inverse_word(w: Sequence[int]) -> Word:
    return tuple(int(a) ^ 1 for a in reversed(w))


def is_cyclically_reduced(w: Sequence[int]) -> bool:
    return is_reduced(w) and (len(w) < 2 or w[-1] != (w[0] ^ 1))


def cyclic_reduction(w: Sequence[int]) -> tuple[Word, Word]:
    """Split a reduced word as ``u c u^-1`` with c cyclically reduced; returns (u, c)."""
    w = free_reduce(w)
    i, j = 0, len(w)
    while j - i >= 2 and w[j - 1] == (w[i] ^ 1):
        i += 1
        j -= 1
    return w[:i], w[i:j]


def rotations(w: Sequence[int]) -> list[Word]:
    w = tuple(w)
    return [w[i:] + w[:i] for i in range(len(w))] or [()]


def is_primitive(w: Sequence[int]) -> bool:
    """Not a proper power: no nontrivial rotation fixes the word."""
    w = tuple(w)
    return len(w) > 0 and all(w[i:] + w[:i] != w for i in range(1, len(w)))


def cyclic_canonical(w: Sequence[int]) -> Word:
    """Lexicographically least rotation."""
    return min(rotations(w))


def letter_matrices(gens: Sequence[GroupElement]) -> list[GroupElement]:
    """Group elements indexed by letter: generator, inverse, generator, inverse, ..."""
    out = []
    for g in gens:
        out.append(g)
        out.append(g.inverse())
    return out


def word_element(w: Sequence[int], gens: Sequence[GroupElement]) -> GroupElement:
    """Left-to-right product of the letters of w."""
    letters = letter_matrices(gens)
    if not gens:
        raise ValueError("empty generating set")
    out = GroupElement.identity(gens[0].signature)
    for a in w:
        out = out @ letters[a]
    return out


def encode(words: np.ndarray, alphabet: int) -> np.ndarray:
    """Base-``alphabet`` integer code of each row of a (n, L) letter array."""
    words = np.asarray(words, dtype=np.int64)
    if words.ndim == 2 and alphabet > 1 and words.shape[1] * np.log2(alphabet) >= 63:
        raise ResourceError(f"words of length {words.shape[1]} over {alphabet} letters overflow 64-bit codes")
    codes = np.zeros(words.shape[0], dtype=np.int64)
    for j in range(words.shape[1]):
        codes = codes * alphabet + words[:, j]
    return codes
