"""Words, Dehn reduction and canonical conjugacy classes in closed surface groups.

Letters are small integers.  Generator ``a_i`` has code ``4(i-1)``, its
inverse ``A_i`` has ``4(i-1)+1``, ``b_i`` has ``4(i-1)+2`` and ``B_i`` has
``4(i-1)+3``.  With this encoding the inverse of a letter is ``c ^ 1`` and
plain tuple comparison is the lexicographic order ``a1 < A1 < b1 < B1 < a2 ...``
used for every canonical form.

Words are tuples of codes.  The text form writes ``a1b1A1B1`` (capital letter
means inverse) with no separators.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .errors import BudgetExceeded, TrivialWord, ValidationError
from .parallel import parallel_map

Word = tuple

_LETTER_RE = re.compile(r"([abAB])(\d+)")

# Orbits of equal-length half-relator swaps stay tiny in practice; this cap
# only guards against pathological inputs.
MAX_SWAP_ORBIT = 4096


def inverse(w: Sequence[int]) -> Word:
    return tuple(c ^ 1 for c in reversed(w))


def free_reduce(w: Iterable[int]) -> Word:
    out: list[int] = []
    for c in w:
        if out and out[-1] == c ^ 1:
            out.pop()
        else:
            out.append(c)
    return tuple(out)


def cyclic_reduce(w: Sequence[int]) -> Word:
    w = free_reduce(w)
    i, j = 0, len(w) - 1
    while i < j and w[i] == w[j] ^ 1:
        i += 1
        j -= 1
    return tuple(w[i:j + 1])


def min_rotation(w: Word) -> Word:
    n = len(w)
    if n == 0:
        return w
    ww = w + w
    return min(ww[i:i + n] for i in range(n))


def letter_name(c: int) -> str:
    i, r = divmod(c, 4)
    return ("a", "A", "b", "B")[r] + str(i + 1)


def format_word(w: Sequence[int]) -> str:
    return "".join(letter_name(c) for c in w)


def parse_word(text: str, genus: int | None = None) -> Word:
    """Parse ``"a1b1A1B1"`` (whitespace and ``*`` ignored) into letter codes."""
    s = re.sub(r"[\s*]", "", text)
    pos = 0
    out = []
    while pos < len(s):
        m = _LETTER_RE.match(s, pos)
        if m is None:
            raise ValidationError(f"cannot parse word {text!r} at offset {pos}")
        kind, idx = m.group(1), int(m.group(2))
        if idx < 1 or (genus is not None and idx > genus):
            raise ValidationError(f"generator index {idx} out of range in {text!r}")
        out.append(4 * (idx - 1) + "aAbB".index(kind))
        pos = m.end()
    return tuple(out)


@dataclass(frozen=True)
class GroupPresentation:
    """Standard one-relator presentation of the genus-``g`` surface group."""

    genus: int
    relator: Word = field(init=False)
    half_table: dict = field(init=False, repr=False, compare=False)
    long_tables: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = self.genus
        if not isinstance(g, int) or g < 2:
            raise ValidationError(f"genus must be an integer >= 2, got {g!r}")
        rel = []
        for i in range(g):
            a, b = 4 * i, 4 * i + 2
            rel += [a, b, a ^ 1, b ^ 1]
        rel = tuple(rel)
        n = 4 * g
        long_tables: dict[int, dict[Word, Word]] = {k: {} for k in range(2 * g + 1, n + 1)}
        half: dict[Word, Word] = {}
        for base in (rel, inverse(rel)):
            for r in range(n):
                rot = base[r:] + base[:r]
                for k in range(2 * g, n + 1):
                    piece, rest = rot[:k], rot[k:]
                    repl = inverse(rest)
                    if k > 2 * g:
                        long_tables[k][piece] = repl
                    elif repl < piece:
                        half[piece] = repl
        object.__setattr__(self, "relator", rel)
        object.__setattr__(self, "half_table", half)
        object.__setattr__(self, "long_tables", long_tables)

    @property
    def generators(self) -> list[str]:
        return [letter_name(c) for c in range(0, 4 * self.genus, 2)]

    @property
    def n_letters(self) -> int:
        return 4 * self.genus

    @lru_cache(maxsize=None)
    def all_half_pieces(self) -> dict:
        """Every length-2g relator piece mapped to its equal-length complement."""
        g = self.genus
        n = 4 * g
        out = {}
        for base in (self.relator, inverse(self.relator)):
            for r in range(n):
                rot = base[r:] + base[:r]
                out[rot[:2 * g]] = inverse(rot[2 * g:])
        return out


@lru_cache(maxsize=None)
def presentation(genus: int) -> GroupPresentation:
    return GroupPresentation(genus)


def _long_reduce(w: Word, p: GroupPresentation) -> Word:
    """Free reduction plus replacement of relator pieces longer than half."""
    w = free_reduce(w)
    top = 4 * p.genus
    lo = 2 * p.genus + 1
    changed = True
    while changed:
        changed = False
        for k in range(min(top, len(w)), lo - 1, -1):
            table = p.long_tables[k]
            for i in range(len(w) - k + 1):
                rep = table.get(w[i:i + k])
                if rep is not None:
                    w = free_reduce(w[:i] + rep + w[i + k:])
                    changed = True
                    break
            if changed:
                break
    return w


def dehn_reduce(w: Sequence[int], p: GroupPresentation) -> Word:
    """Dehn's algorithm with a deterministic rule for exactly-half pieces.

    Pieces longer than half the relator are replaced by their shorter
    complement; pieces of exactly half are replaced by the lexicographically
    smaller of the two forms.  Each step lowers (length, lex) so the loop ends.
    """
    w = _long_reduce(tuple(w), p)
    k = 2 * p.genus
    while True:
        for i in range(len(w) - k + 1):
            rep = p.half_table.get(w[i:i + k])
            if rep is not None:
                w = _long_reduce(w[:i] + rep + w[i + k:], p)
                break
        else:
            return w


def geodesic_normal_form(w: Sequence[int], p: GroupPresentation) -> Word:
    """Shortest word found by exploring all equal-length half-piece swaps.

    Returns the lexicographically least word of minimal length in the swap
    orbit.  Used for word-length potentials.
    """
    cur = _long_reduce(tuple(w), p)
    halves = p.all_half_pieces()
    k = 2 * p.genus
    while True:
        seen = {cur}
        stack = [cur]
        shorter = None
        while stack and shorter is None:
            u = stack.pop()
            for i in range(len(u) - k + 1):
                rep = halves.get(u[i:i + k])
                if rep is None:
                    continue
                v = _long_reduce(u[:i] + rep + u[i + k:], p)
                if len(v) < len(cur):
                    shorter = v
                    break
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
                    if len(seen) > MAX_SWAP_ORBIT:
                        raise BudgetExceeded("half-swap orbit exceeded cap")
        if shorter is None:
            return min(seen)
        cur = shorter


def word_length(w: Sequence[int], p: GroupPresentation) -> int:
    return len(geodesic_normal_form(w, p))


# ---------------------------------------------------------------------------
# cyclic words


def _cyclic_long_reduce(w: Word, p: GroupPresentation) -> Word:
    w = cyclic_reduce(w)
    lo = 2 * p.genus + 1
    top = 4 * p.genus
    changed = True
    while changed and w:
        changed = False
        n = len(w)
        ww = w + w
        for k in range(min(top, n), lo - 1, -1):
            table = p.long_tables[k]
            for i in range(n):
                piece = ww[i:i + k]
                rep = table.get(piece)
                if rep is not None:
                    rot = ww[i:i + n]
                    w = cyclic_reduce(rep + rot[k:])
                    changed = True
                    break
            if changed:
                break
    return w


def _half_swaps(w: Word, p: GroupPresentation) -> Iterator[Word]:
    k = 2 * p.genus
    n = len(w)
    if n < k:
        return
    halves = p.all_half_pieces()
    ww = w + w
    for i in range(n):
        rep = halves.get(ww[i:i + k])
        if rep is not None:
            rot = ww[i:i + n]
            yield rep + rot[k:]


def _class_key(w: Word) -> Word:
    return min(min_rotation(w), min_rotation(inverse(w)))


def canonical_word(w: Sequence[int], p: GroupPresentation) -> Word:
    """Canonical cyclic word of the unoriented conjugacy class of ``w``.

    Cyclic Dehn reduction removes long relator pieces; the remaining
    ambiguity of exactly-half pieces is resolved by exploring the whole orbit
    of equal-length half swaps and taking the least word under rotation,
    inversion and lexicographic order.
    """
    cur = _cyclic_long_reduce(tuple(w), p)
    if not cur:
        raise TrivialWord(f"word {format_word(w)} is trivial in the group")
    while True:
        start = _class_key(cur)
        seen = {start}
        stack = [cur]
        shorter = None
        while stack and shorter is None:
            u = stack.pop()
            for v in _half_swaps(u, p):
                v = _cyclic_long_reduce(v, p)
                if not v:
                    raise TrivialWord(f"word {format_word(w)} is trivial in the group")
                if len(v) < len(cur):
                    shorter = v
                    break
                key = _class_key(v)
                if key not in seen:
                    seen.add(key)
                    stack.append(v)
                    if len(seen) > MAX_SWAP_ORBIT:
                        raise BudgetExceeded("half-swap orbit exceeded cap")
        if shorter is None:
            return min(seen)
        cur = shorter


@dataclass(frozen=True, order=True)
class ConjClass:
    """Unoriented conjugacy class, stored by its canonical cyclic word."""

    length: int
    word: Word
    genus: int = field(default=2, compare=False)

    @classmethod
    def of(cls, w: Sequence[int] | str, genus: int = 2) -> "ConjClass":
        if isinstance(w, str):
            w = parse_word(w, genus)
        cw = canonical_word(w, presentation(genus))
        return cls(len(cw), cw, genus)

    def __str__(self) -> str:
        return format_word(self.word)

    def __repr__(self) -> str:
        return f"ConjClass({format_word(self.word)!r})"

    def power(self, n: int) -> "ConjClass":
        return ConjClass.of(self.word * n, self.genus)

    def primitive_root(self) -> tuple["ConjClass", int]:
        """Root ``d`` and exponent ``k`` with this class equal to ``d^k``, read off the word."""
        w = self.word
        n = len(w)
        for period in range(1, n + 1):
            if n % period == 0 and w[:period] * (n // period) == w:
                if period == n:
                    return self, 1
                return ConjClass.of(w[:period], self.genus), n // period
        return self, 1


def cyclic_canonical(w: Sequence[int] | str, p: GroupPresentation) -> ConjClass:
    if isinstance(w, str):
        w = parse_word(w, p.genus)
    cw = canonical_word(w, p)
    return ConjClass(len(cw), cw, p.genus)


def is_conjugate(w1, w2, p: GroupPresentation) -> bool:
    """True iff the two words define the same unoriented conjugacy class.

    Two trivial words count as conjugate; a trivial and a nontrivial one do not.
    """
    try:
        c1 = cyclic_canonical(w1, p)
    except TrivialWord:
        c1 = None
    try:
        c2 = cyclic_canonical(w2, p)
    except TrivialWord:
        c2 = None
    return c1 == c2


# ---------------------------------------------------------------------------
# enumeration


def _candidates(p: GroupPresentation, n: int, first: int) -> list[Word]:
    """Canonical words of length ``n`` starting with letter ``first``.

    A canonical word starts with a generator (not an inverse) that is no
    larger than any letter or inverse letter it contains, and contains no
    long relator piece; candidates passing these filters are confirmed by
    recanonicalising.
    """
    lo = 2 * p.genus + 1
    top = 4 * p.genus
    tables = p.long_tables
    nl = p.n_letters
    out = []
    word = [first]

    def has_long_suffix(w):
        m = len(w)
        for k in range(lo, min(top, m) + 1):
            if tuple(w[m - k:]) in tables[k]:
                return True
        return False

    def rec():
        m = len(word)
        if m == n:
            if word[-1] == first ^ 1:
                return
            w = tuple(word)
            if w != min_rotation(w):
                return
            try:
                if canonical_word(w, p) == w:
                    out.append(w)
            except TrivialWord:
                pass
            return
        last = word[-1]
        for c in range(first, nl):
            if c == last ^ 1 or (c & ~1) < first:
                continue
            word.append(c)
            if m + 1 < lo or not has_long_suffix(word):
                rec()
            word.pop()

    rec()
    return out


@lru_cache(maxsize=16)
def _enumerate_length(genus: int, n: int) -> tuple:
    p = presentation(genus)
    tasks = list(range(0, p.n_letters, 2))
    parts = parallel_map(lambda f: _candidates(p, n, f), tasks)
    words = sorted(w for part in parts for w in part)
    return tuple(ConjClass(n, w, genus) for w in words)


def enumerate_conjugacy(p: GroupPresentation, L: int, budget: int | None = None) -> list[ConjClass]:
    """All unoriented nontrivial classes with a representative of length <= L.

    Sorted by (length, canonical word).  Raises ``BudgetExceeded`` if more
    than ``budget`` classes would be produced.
    """
    if L < 1:
        raise ValidationError("L must be >= 1")
    out: list[ConjClass] = []
    for n in range(1, L + 1):
        out.extend(_enumerate_length(p.genus, n))
        if budget is not None and len(out) > budget:
            raise BudgetExceeded(f"more than {budget} classes at length <= {n}")
    return out


def random_word(rng, length: int, genus: int = 2, reduced: bool = True) -> Word:
    """Uniform random (freely reduced, by default) word of the given length."""
    nl = 4 * genus
    w: list[int] = []
    while len(w) < length:
        c = int(rng.integers(nl))
        if reduced and w and c == w[-1] ^ 1:
            continue
        w.append(c)
    return tuple(w)
