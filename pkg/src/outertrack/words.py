"""Power-compressed words over directed half-edges.

Half-edge ``2*e`` is edge ``e`` in its positive orientation and ``2*e + 1``
is its reverse, so the involution is ``h ^ 1``.  A word is a tuple whose items
are either half-edges (ints) or :class:`Power` terms.  Everything that only
needs the boundary letters or crossing counts works on the compressed form,
so exponents in the thousands of digits cost nothing.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import cached_property

from .errors import BacktrackError, InvalidPath


def inv(h):
    return h ^ 1


@dataclass(frozen=True)
class Power:
    base: tuple
    exp: int

    def __post_init__(self):
        if self.exp < 1:
            raise ValueError("exponent must be positive")
        if not self.base:
            raise ValueError("empty base")

    @cached_property
    def first(self):
        return first(self.base)

    @cached_property
    def last(self):
        return last(self.base)

    @cached_property
    def base_counts(self):
        return letter_counts(self.base)

    @cached_property
    def base_signed(self):
        return signed_counts(self.base)

    @cached_property
    def base_length(self):
        return length(self.base)


def _first_item(item):
    return item.first if isinstance(item, Power) else item


def _last_item(item):
    return item.last if isinstance(item, Power) else item


def first(word):
    return _first_item(word[0])


def last(word):
    return _last_item(word[-1])


def length(word):
    total = 0
    for item in word:
        total += item.base_length * item.exp if isinstance(item, Power) else 1
    return total


def letter_counts(word):
    """Unsigned crossing counts per unoriented edge."""
    out = Counter()
    for item in word:
        if isinstance(item, Power):
            for e, k in item.base_counts.items():
                out[e] += k * item.exp
        else:
            out[item >> 1] += 1
    return out


def signed_counts(word):
    out = Counter()
    for item in word:
        if isinstance(item, Power):
            for e, k in item.base_signed.items():
                out[e] += k * item.exp
        else:
            out[item >> 1] += -1 if item & 1 else 1
    return out


def invert(word):
    out = []
    for item in reversed(word):
        if isinstance(item, Power):
            out.append(Power(invert(item.base), item.exp))
        else:
            out.append(item ^ 1)
    return tuple(out)


def expand(word):
    out = []
    for item in word:
        if isinstance(item, Power):
            out.extend(expand(item.base) * item.exp)
        else:
            out.append(item)
    return tuple(out)


def turns(word):
    """Yield every distinct consecutive letter pair ``(x, y)`` of the word.

    A power contributes its base's turns once, plus the wrap-around turn when
    the exponent exceeds one.
    """
    prev = None
    for item in word:
        if isinstance(item, Power):
            if prev is not None:
                yield prev, item.first
            yield from turns(item.base)
            if item.exp > 1:
                yield item.last, item.first
            prev = item.last
        else:
            if prev is not None:
                yield prev, item
            prev = item


def is_reduced(word):
    return all(y != inv(x) for x, y in turns(word))


def power(word, k):
    """``word`` repeated ``k`` times, kept compressed."""
    if k < 1:
        raise ValueError("exponent must be positive")
    if k == 1:
        return tuple(word)
    if len(word) == 1 and isinstance(word[0], Power):
        return (Power(word[0].base, word[0].exp * k),)
    return (Power(tuple(word), k),)


def concat(*words):
    """Concatenate words, raising BacktrackError on cancellation at a seam."""
    out = []
    for w in words:
        if not w:
            continue
        if out and first(w) == inv(_last_item(out[-1])):
            raise BacktrackError(f"cancellation at seam {_last_item(out[-1])}|{first(w)}")
        out.extend(w)
    return tuple(out)


def substitute(word, image):
    """Replace each letter ``h`` by ``image(h)``; powers stay compressed."""
    pieces = []
    for item in word:
        if isinstance(item, Power):
            sub = substitute(item.base, image)
            if item.exp > 1 and first(sub) == inv(last(sub)):
                raise BacktrackError("cancellation inside a power")
            pieces.append(power(sub, item.exp))
        else:
            pieces.append(image(item))
    return concat(*pieces)


def free_reduce(letters):
    """Freely reduce an explicit letter sequence."""
    out = []
    for h in letters:
        if out and out[-1] == inv(h):
            out.pop()
        else:
            out.append(h)
    return tuple(out)


def tighten(word):
    return free_reduce(expand(word))


def compress_runs(letters):
    """Group runs of a repeated letter into powers (display helper)."""
    out = []
    i = 0
    letters = tuple(letters)
    while i < len(letters):
        j = i
        while j < len(letters) and letters[j] == letters[i]:
            j += 1
        out.append(letters[i] if j - i == 1 else Power((letters[i],), j - i))
        i = j
    return tuple(out)


# Text form -----------------------------------------------------------------
# A positive letter is the edge label; the reverse swaps the case of the first
# character ("a_0" / "A_0").  Powers are written "x^k" or "(...)^k".

def letter_name(h, labels):
    name = labels[h >> 1]
    if h & 1:
        return name[0].swapcase() + name[1:]
    return name


def format_word(word, labels):
    parts = []
    for item in word:
        if isinstance(item, Power):
            inner = format_word(item.base, labels)
            if len(item.base) == 1 and not isinstance(item.base[0], Power):
                parts.append(f"{inner}^{item.exp}")
            else:
                parts.append(f"({inner})^{item.exp}")
        else:
            parts.append(letter_name(item, labels))
    return " ".join(parts)


_TOKEN = re.compile(r"\s*(?:(\()|\)\^(\d+)|\)|([A-Za-z][A-Za-z0-9_]*)(?:\^(\d+))?)")


def parse_word(text, labels):
    lookup = {}
    for e, name in enumerate(labels):
        if not name or not name[0].islower():
            raise InvalidPath(f"label {name!r} must start with a lowercase letter")
        lookup[name] = 2 * e
        lookup[name[0].upper() + name[1:]] = 2 * e + 1
    stack = [[]]
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise InvalidPath(f"cannot parse word at {text[pos:]!r}")
        pos = m.end()
        if m.group(1):
            stack.append([])
        elif m.group(3):
            if m.group(3) not in lookup:
                raise InvalidPath(f"unknown letter {m.group(3)!r}")
            h = lookup[m.group(3)]
            k = int(m.group(4) or 1)
            stack[-1].extend(power((h,), k))
        else:
            if len(stack) == 1:
                raise InvalidPath("unbalanced parenthesis")
            inner = tuple(stack.pop())
            k = int(m.group(2) or 1)
            stack[-1].extend(power(inner, k))
    if len(stack) != 1:
        raise InvalidPath("unbalanced parenthesis")
    return tuple(stack[0])
