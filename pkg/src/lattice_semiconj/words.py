"""Words in a free group on named generators.

A word is a tuple of ``(generator_index, exponent)`` letters with exponent
``+1`` or ``-1``. The word ``(g1, g2, ..., gk)`` denotes the product
``g1 g2 ... gk``; it acts on points as ``g1(g2(...gk(x)))``, so the last
letter is applied first.
"""

from __future__ import annotations

import re
from typing import Iterator, Sequence

Letter = tuple[int, int]
Word = tuple[Letter, ...]

_INVERSE_SUFFIX = re.compile(r"^(.*?)(\^-1|\^\{-1\}|')$")


def free_reduce(word: Sequence[Letter]) -> Word:
    out: list[Letter] = []
    for g, e in word:
        if out and out[-1] == (g, -e):
            out.pop()
        else:
            out.append((g, e))
    return tuple(out)


def inverse_word(word: Sequence[Letter]) -> Word:
    return tuple((g, -e) for g, e in reversed(word))


def symbols(n_gens: int) -> list[Letter]:
    """Alphabet order used for enumeration: generators first, then inverses."""
    return [(g, 1) for g in range(n_gens)] + [(g, -1) for g in range(n_gens)]


def reduced_words(n_gens: int, length: int) -> Iterator[Word]:
    """Yield all freely reduced words of exactly ``length`` letters in lexicographic order."""
    if length == 0:
        yield ()
        return
    alphabet = symbols(n_gens)
    for prefix in reduced_words(n_gens, length - 1):
        for s in alphabet:
            if prefix and prefix[-1] == (s[0], -s[1]):
                continue
            yield prefix + (s,)


def format_word(word: Sequence[Letter], names: Sequence[str]) -> str:
    if not word:
        return "e"
    compact = all(len(nm) == 1 and nm.islower() for nm in names)
    if compact:
        return "".join(names[g] if e > 0 else names[g].upper() for g, e in word)
    return " ".join(names[g] if e > 0 else names[g] + "^-1" for g, e in word)


def parse_word(text: str, names: Sequence[str]) -> Word:
    """Parse a word over ``names``.

    Tokens are separated by whitespace or ``*``; a token ``x^-1`` (or ``x'``)
    denotes an inverse. When every generator name is one lowercase letter the
    compact form ``abAB`` is also accepted, an uppercase letter meaning the
    inverse. ``e`` or the empty string is the identity (unless ``e`` names a
    generator).
    """
    index = {nm: i for i, nm in enumerate(names)}
    text = text.strip()
    if text in ("", "1") or (text == "e" and "e" not in index):
        return ()
    tokens = [t for t in re.split(r"[\s*]+", text) if t]
    letters: list[Letter] = []
    compact = all(len(nm) == 1 and nm.islower() for nm in names)
    for tok in tokens:
        m = _INVERSE_SUFFIX.match(tok)
        if m and m.group(1) in index:
            letters.append((index[m.group(1)], -1))
        elif tok in index:
            letters.append((index[tok], 1))
        elif compact:
            for ch in tok:
                if ch in index:
                    letters.append((index[ch], 1))
                elif ch.lower() in index:
                    letters.append((index[ch.lower()], -1))
                else:
                    raise ValueError(f"unknown generator {ch!r} in word {text!r}")
        else:
            raise ValueError(f"unknown generator {tok!r} in word {text!r}")
    return tuple(letters)
