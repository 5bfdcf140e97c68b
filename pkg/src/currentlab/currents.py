"""Geodesic currents as weighted curves plus Liouville atoms, and the
intersection engine.

Two exact counting paths share the geometry of ``geometry``:

* chord crossings: every transverse intersection point of two closed
  geodesics lies in one tile, where the chords of the two curves cross.
  Counting crossing chord pairs in the Dirichlet domain is fast and is used
  for scans over enumerations.
* lift linking: lifts of ``c2`` crossing one period of the axis of ``c1``,
  deduplicated modulo ``<c1>`` by (crossing parameter mod length, crossing
  angle).  Candidate lifts pass through tiles within ``R`` side-pairing steps
  of the tiles met by the axis.  This is the reported
  ``geometric_intersection`` with its stabilization check, and the fallback
  when a chord configuration is numerically ambiguous (a crossing on a tile
  side, nearly parallel chords).
"""

from __future__ import annotations

import math
import re
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import NotMulticurve, Unstable, ValidationError
from .geometry import (
    AxisWalk,
    DirichletDomain,
    dirichlet_domain,
    from_klein,
    mink,
    plane_normal,
    walk_word,
)
from .hyperbolic import (
    FuchsianStructure,
    bolza_structure,
    lengths,
    structure_by_label,
)
from .surface import ConjClass, enumerate_conjugacy, presentation

DEFAULT_RADIUS = 1
MAX_RADIUS = 3
KLEIN_TOL = 1e-9
DEDUP_TOL = 1e-6


# ---------------------------------------------------------------------------
# atoms and currents


@dataclass(frozen=True)
class Atom:
    """A Curve atom (canonical class) or a Liouville atom (structure label)."""

    kind: str
    name: str
    curve: ConjClass | None = field(default=None, compare=False, repr=False)
    structure: FuchsianStructure | None = field(default=None, compare=False, repr=False)

    @classmethod
    def of_curve(cls, c, genus: int = 2) -> "Atom":
        c = ConjClass.of(c, genus) if not isinstance(c, ConjClass) else c
        return cls("curve", str(c), curve=c)

    @classmethod
    def of_structure(cls, x: FuchsianStructure) -> "Atom":
        return cls("liouville", x.label, structure=x)

    @property
    def sort_key(self):
        if self.kind == "curve":
            return (0, self.curve.length, self.curve.word, "")
        return (1, 0, (), self.name)

    def to_json(self) -> dict:
        return {self.kind: self.name}

    @classmethod
    def from_json(cls, data: dict, genus: int = 2) -> "Atom":
        if not isinstance(data, dict) or len(data) != 1:
            raise ValidationError(f"bad atom {data!r}")
        ((kind, name),) = data.items()
        if kind == "curve":
            return cls.of_curve(str(name), genus)
        if kind == "liouville":
            return cls.of_structure(structure_by_label(str(name)))
        raise ValidationError(f"unknown atom kind {kind!r}")

    def __str__(self):
        return self.name if self.kind == "curve" else f"L({self.name})"


_TERM = re.compile(r"^\s*(?:([0-9.eE+-]+)\s*\*\s*)?(L\((.*)\)|[A-Za-z0-9]+)\s*$")


def _split_terms(text: str) -> list:
    # "+" inside parentheses belongs to a label such as "bolza+twist(0.7)"
    parts, depth, cur = [], 0, []
    for ch in text:
        depth += (ch == "(") - (ch == ")")
        if ch == "+" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


class Current:
    """Finite positive combination of atoms, deduplicated and sorted."""

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        acc: dict = {}
        for w, a in terms:
            w = float(w)
            if not w > 0 or not math.isfinite(w):
                raise ValidationError(f"weights must be positive, got {w}")
            acc[a] = acc.get(a, 0.0) + w
        self.terms = tuple(sorted(((w, a) for a, w in acc.items()), key=lambda t: t[1].sort_key))

    @classmethod
    def curve(cls, c, weight: float = 1.0, genus: int = 2) -> "Current":
        return cls([(weight, Atom.of_curve(c, genus))])

    @classmethod
    def liouville(cls, x: FuchsianStructure, weight: float = 1.0) -> "Current":
        return cls([(weight, Atom.of_structure(x))])

    @classmethod
    def parse(cls, text: str, genus: int = 2) -> "Current":
        """Parse ``"2*a1 + b2 + 0.5*L(bolza)"``."""
        terms = []
        for part in _split_terms(text):
            if not part.strip():
                continue
            m = _TERM.match(part)
            if not m:
                raise ValidationError(f"cannot parse term {part!r}")
            w = float(m.group(1)) if m.group(1) else 1.0
            if m.group(3) is not None:
                terms.append((w, Atom.of_structure(structure_by_label(m.group(3).strip()))))
            else:
                terms.append((w, Atom.of_curve(m.group(2), genus)))
        return cls(terms)

    def to_json(self) -> list:
        return [{"weight": w, "atom": a.to_json()} for w, a in self.terms]

    @classmethod
    def from_json(cls, data, genus: int = 2) -> "Current":
        if not isinstance(data, list):
            raise ValidationError("a current file holds a JSON list of terms")
        terms = []
        for item in data:
            if not isinstance(item, dict) or set(item) != {"weight", "atom"}:
                raise ValidationError(f"bad term {item!r}")
            terms.append((item["weight"], Atom.from_json(item["atom"], genus)))
        return cls(terms)

    def __add__(self, other: "Current") -> "Current":
        return Current(self.terms + other.terms)

    def __mul__(self, a: float) -> "Current":
        if not a > 0:
            raise ValidationError("currents scale by positive numbers only")
        return Current([(a * w, at) for w, at in self.terms])

    __rmul__ = __mul__

    def without(self, atom: Atom) -> "Current":
        return Current([(w, a) for w, a in self.terms if a != atom])

    @property
    def atoms(self) -> tuple:
        return tuple(a for _, a in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_multicurve(self) -> bool:
        return all(a.kind == "curve" for a in self.atoms)

    @property
    def genus(self) -> int:
        for a in self.atoms:
            return a.curve.genus if a.kind == "curve" else a.structure.genus
        return 2

    def __eq__(self, other):
        return isinstance(other, Current) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __str__(self):
        if not self.terms:
            return "0"
        return " + ".join(str(a) if w == 1 else f"{w:g}*{a}" for w, a in self.terms)

    def __repr__(self):
        return f"Current({self})"


# ---------------------------------------------------------------------------
# geometry helpers


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _segment_crossings(P1, Q1, S1, E1, P2, Q2, S2, E2, tol=KLEIN_TOL):
    """Crossing and ambiguity masks for two chord families, shape (m, n).

    Chords on one geodesic (equal ideal endpoints in either order) never
    cross.  A crossing within ``tol`` of a chord end, or nearly parallel
    distinct chords close to each other, are ambiguous.
    """
    d1 = (Q1 - P1)[:, None, :]
    d2 = (Q2 - P2)[None, :, :]
    den = _cross2(d1, d2)
    r = P2[None, :, :] - P1[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = _cross2(r, d2) / den
        t2 = _cross2(r, d1) / den
    n1 = np.linalg.norm(d1, axis=-1)
    n2 = np.linalg.norm(d2, axis=-1)
    inside = (t1 > 0) & (t1 < 1) & (t2 > 0) & (t2 < 1)
    e1 = np.minimum(np.abs(t1), np.abs(1 - t1)) * n1
    e2 = np.minimum(np.abs(t2), np.abs(1 - t2)) * n2
    near = (t1 > -tol / n1) & (t1 < 1 + tol / n1) & (t2 > -tol / n2) & (t2 < 1 + tol / n2)
    amb = near & ((e1 < tol) | (e2 < tol))
    same = _same_line(S1[:, None], E1[:, None], S2[None], E2[None])
    sin = np.abs(den) / (n1 * n2)
    parallel = (sin < 1e-9) & ~same
    # nearly parallel chords: ambiguous only if they come close
    if parallel.any():
        i, j = np.nonzero(parallel)
        dist = np.abs(_cross2(r[i, j], (Q1 - P1)[i])) / n1[i, 0]
        amb[i[dist < 1e-7], j[dist < 1e-7]] = True
    cross = inside & ~same & ~parallel & ~amb
    return cross, amb & ~same


def _same_line(S1, E1, S2, E2, tol=1e-7):
    a = (np.abs(S1 - S2).max(axis=-1) < tol) & (np.abs(E1 - E2).max(axis=-1) < tol)
    b = (np.abs(S1 - E2).max(axis=-1) < tol) & (np.abs(E1 - S2).max(axis=-1) < tol)
    return a | b


def _count_distinct(s, c, ell, tol=DEDUP_TOL) -> int:
    """Number of distinct (s mod ell, c) pairs up to ``tol``."""
    if len(s) == 0:
        return 0
    s = np.mod(s, ell)
    s = np.where(s > ell - tol, s - ell, s)
    order = np.argsort(s, kind="stable")
    s, c = s[order], c[order]
    total = 0
    start = 0
    n = len(s)
    for i in range(1, n + 1):
        if i == n or s[i] - s[i - 1] > tol:
            cc = np.sort(c[start:i])
            total += 1 + int(np.count_nonzero(np.diff(cc) > tol))
            start = i
    return total


@dataclass
class ClassTable:
    """Concatenated chords of a list of classes (for bulk counting)."""

    classes: tuple
    P: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    E: np.ndarray
    owner: np.ndarray


@dataclass(frozen=True)
class IntersectionReport:
    """Lift-linking count with the counts at every radius tried."""

    count: int
    radius: int
    counts: tuple
    stable: bool

    def __int__(self):
        return self.count

    def to_json(self) -> dict:
        return {"count": self.count, "radius": self.radius, "counts": list(self.counts),
                "stable": self.stable}


class IntersectionEngine:
    """Intersection numbers of classes with respect to a reference structure.

    Walks, neighbour tiles, class tables and pair counts are memoised; the
    memo tables tolerate concurrent use (identical values, last write wins).
    """

    def __init__(self, ref: FuchsianStructure):
        self.ref = ref
        self._domain: DirichletDomain | None = None
        self._walks: dict = {}
        self._pairs: dict = {}
        self._self: dict = {}
        self._tables: dict = {}
        self._nbrs: dict = {}
        self._lock = threading.Lock()

    @property
    def domain(self) -> DirichletDomain:
        if self._domain is None:
            with self._lock:
                if self._domain is None:
                    self._domain = dirichlet_domain(self.ref)
        return self._domain

    def walk(self, c: ConjClass) -> AxisWalk:
        w = self._walks.get(c)
        if w is None:
            w = walk_word(self.domain, c.word)
            self._walks[c] = w
        return w

    def lines(self, c: ConjClass):
        """Distinct local chords of ``c`` and the power multiplicity."""
        W = self.walk(c)
        n = len(W)
        for p in range(1, n + 1):
            if n % p == 0 and _same_line(W.starts[p:], W.ends[p:], W.starts[:n - p],
                                         W.ends[:n - p]).all():
                return W.starts[:p], W.ends[:p], n // p
        return W.starts, W.ends, 1

    # -- chord path -----------------------------------------------------

    def _chord_pair(self, c1: ConjClass, c2: ConjClass):
        W1, W2 = self.walk(c1), self.walk(c2)
        cross, amb = _segment_crossings(W1.p, W1.q, W1.starts, W1.ends,
                                        W2.p, W2.q, W2.starts, W2.ends)
        return int(cross.sum()), bool(amb.any())

    def pair(self, c1: ConjClass, c2: ConjClass) -> int:
        """i(c1, c2); equal classes give i(c, c) = 2 self-intersection."""
        key = (c1, c2) if c1 <= c2 else (c2, c1)
        v = self._pairs.get(key)
        if v is None:
            n, amb = self._chord_pair(c1, c2)
            if amb:
                n = self.linking(c1, c2).count
            v = n
            self._pairs[key] = v
        return v

    def table(self, classes) -> ClassTable:
        classes = tuple(classes)
        key = hash(classes)
        t = self._tables.get(key)
        if t is not None and t.classes == classes:
            return t
        walks = [self.walk(c) for c in classes]
        sizes = np.array([len(w) for w in walks], dtype=np.int64)
        t = ClassTable(
            classes,
            np.concatenate([w.p for w in walks]),
            np.concatenate([w.q for w in walks]),
            np.concatenate([w.starts for w in walks]),
            np.concatenate([w.ends for w in walks]),
            np.repeat(np.arange(len(classes)), sizes),
        )
        self._tables[key] = t
        return t

    def against(self, c: ConjClass, classes, chunk: int = 200_000) -> np.ndarray:
        """Vector of i(c, c') over ``classes``."""
        T = self.table(classes)
        W = self.walk(c)
        n = len(T.classes)
        counts = np.zeros(n, dtype=np.int64)
        amb_owner = []
        step = max(1, chunk // max(len(W), 1))
        for lo in range(0, len(T.owner), step):
            hi = lo + step
            cross, amb = _segment_crossings(W.p, W.q, W.starts, W.ends,
                                            T.P[lo:hi], T.Q[lo:hi], T.S[lo:hi], T.E[lo:hi])
            counts += np.bincount(T.owner[lo:hi], weights=cross.sum(axis=0),
                                  minlength=n).astype(np.int64)
            if amb.any():
                amb_owner.append(T.owner[lo:hi][amb.any(axis=0)])
        if amb_owner:
            for j in np.unique(np.concatenate(amb_owner)):
                counts[j] = self.linking(c, T.classes[j]).count
        for j, cj in enumerate(T.classes):
            key = (c, cj) if c <= cj else (cj, c)
            self._pairs.setdefault(key, int(counts[j]))
        return counts

    # -- lift linking -----------------------------------------------------

    def neighbors(self, R: int):
        """Tile maps within ``R`` side-pairing steps, with their level."""
        if R in self._nbrs:
            return self._nbrs[R]
        dom = self.domain
        mats = [np.eye(3)]
        levels = [0]
        seen = {_tile_key(np.eye(3))}
        frontier = [np.eye(3)]
        for r in range(1, R + 1):
            nxt = []
            for g in frontier:
                for pk in dom.pairings:
                    h = g @ pk
                    key = _tile_key(h)
                    if key in seen:
                        continue
                    seen.add(key)
                    nxt.append(h)
                    mats.append(h)
                    levels.append(r)
            frontier = nxt
        out = (np.array(mats), np.array(levels))
        self._nbrs[R] = out
        return out

    def linking_counts(self, c1: ConjClass, c2: ConjClass, R: int) -> list:
        """Lift-linking counts at radii 0..R."""
        W = self.walk(c1)
        ell = W.length
        S2, E2, k2 = self.lines(c2)
        N, lev = self.neighbors(R)
        # candidate lines n.l for every neighbour n and chord l of c2
        GS = np.einsum("kij,lj->kli", N, S2).reshape(-1, 3)
        GE = np.einsum("kij,lj->kli", N, E2).reshape(-1, 3)
        GS /= GS[:, :1]
        GE /= GE[:, :1]
        glev = np.repeat(lev, len(S2))
        nL = plane_normal(GS, GE)
        offs = W.offsets
        ss, cs, ls = [], [], []
        for i in range(len(W)):
            xi, eta = W.starts[i], W.ends[i]
            nA = plane_normal(xi, eta)
            nA = nA / math.sqrt(mink(nA, nA))
            se, sf = mink(nA[None], GS), mink(nA[None], GE)
            link = (se * sf < 0) & (np.abs(se) > 1e-10) & (np.abs(sf) > 1e-10)
            if not link.any():
                continue
            idx = np.nonzero(link)[0]
            X = plane_normal(nA[None], nL[idx])
            X = X * np.sign(X[:, :1])
            X = X / np.sqrt(-mink(X, X))[:, None]
            s = 0.5 * np.log(mink(X, xi[None]) / mink(X, eta[None])) + offs[i]
            keep = (s >= W.s_in[i] - 1e-7) & (s <= W.s_out[i] + 1e-7)
            idx, s = idx[keep], s[keep]
            # orient each lift from the negative to the positive side
            neg = se[idx] < 0
            frm = np.where(neg[:, None], GS[idx], GE[idx])
            to = np.where(neg[:, None], GE[idx], GS[idx])
            nl = plane_normal(frm, to)
            nl = nl / np.sqrt(mink(nl, nl))[:, None]
            ss.append(s)
            cs.append(mink(nA[None], nl))
            ls.append(glev[idx])
        if ss:
            s_all, c_all, l_all = np.concatenate(ss), np.concatenate(cs), np.concatenate(ls)
        else:
            s_all = c_all = l_all = np.zeros(0)
        return [k2 * _count_distinct(s_all[l_all <= r], c_all[l_all <= r], ell)
                for r in range(R + 1)]

    def linking(self, c1: ConjClass, c2: ConjClass, R: int | None = None) -> IntersectionReport:
        """Lift-linking count, escalating the radius until two agree."""
        R = DEFAULT_RADIUS if R is None else int(R)
        if R < 1:
            raise ValidationError("radius must be at least 1")
        while True:
            counts = self.linking_counts(c1, c2, R)
            if counts[-1] == counts[-2]:
                return IntersectionReport(counts[-1], R, tuple(counts), True)
            if R >= MAX_RADIUS:
                raise Unstable(f"intersection count not stable up to radius {R}", counts)
            R += 1


def _tile_key(h):
    x = h[:, 0]
    return (round(math.log(x[0]), 7), round(x[1] / x[0], 9), round(x[2] / x[0], 9))


_ENGINES: dict = {}


def engine_for(ref: FuchsianStructure | None = None) -> IntersectionEngine:
    ref = bolza_structure() if ref is None else ref
    key = (ref.genus, ref.letters.tobytes())
    eng = _ENGINES.get(key)
    if eng is None:
        eng = IntersectionEngine(ref)
        _ENGINES[key] = eng
    return eng


def _as_class(c, genus=2) -> ConjClass:
    return c if isinstance(c, ConjClass) else ConjClass.of(c, genus)


# ---------------------------------------------------------------------------
# operations


def geometric_intersection(c1, c2, ref=None, R: int | None = None) -> IntersectionReport:
    """i(c1, c2) by lift linking, with the stabilization report."""
    eng = engine_for(ref)
    c1, c2 = _as_class(c1, eng.ref.genus), _as_class(c2, eng.ref.genus)
    if c1 == c2:
        raise ValidationError("geometric_intersection needs two different classes; "
                              "use self_intersection")
    return eng.linking(c1, c2, R)


def self_intersection(c, ref=None, R: int | None = None) -> int:
    """Half the number of lifts crossing one period of the axis, modulo the axis
    stabilizer; for ``d^k`` this is ``k^2`` times the value for ``d``."""
    eng = engine_for(ref)
    c = _as_class(c, eng.ref.genus)
    v = eng._self.get((c, R))
    if v is None:
        n = eng.linking(c, c, R).count
        if n % 2:
            raise Unstable("odd self-linking count", [n])
        v = n // 2
        eng._self[(c, R)] = v
    return v


def intersect(x: Current, c, ref=None, R: int | None = None) -> float:
    """i(x, c): weights times crossing counts (curves) or lengths (Liouville)."""
    eng = engine_for(ref)
    c = _as_class(c, eng.ref.genus)
    total = 0.0
    for w, a in x.terms:
        if a.kind == "curve":
            v = eng.pair(a.curve, c) if R is None else (
                2 * self_intersection(c, eng.ref, R) if a.curve == c
                else eng.linking(a.curve, c, R).count)
        else:
            v = float(lengths(a.structure, [c])[0])
        total += w * v
    return total


def intersect_many(x: Current, classes, ref=None) -> np.ndarray:
    """Vector of i(x, c) over a list of classes."""
    eng = engine_for(ref)
    classes = [_as_class(c, eng.ref.genus) for c in classes]
    out = np.zeros(len(classes))
    for w, a in x.terms:
        if a.kind == "curve":
            out += w * eng.against(a.curve, classes)
        else:
            out += w * lengths(a.structure, classes)
    return out


@dataclass(frozen=True)
class FillingEvidence:
    min_value: float
    L: int
    argmin: ConjClass

    def to_json(self):
        return {"status": "filling-evidence", "min_value": self.min_value, "L": self.L,
                "argmin": str(self.argmin)}


@dataclass(frozen=True)
class NonFillingWitness:
    witness: ConjClass
    L: int

    def to_json(self):
        return {"status": "non-filling", "witness": str(self.witness), "L": self.L}


def filling_probe(x: Current, L: int, ref=None):
    """Scan the classes up to word length ``L`` for a zero of i(x, .)."""
    if L < 2:
        raise ValidationError("filling_probe needs L >= 2")
    classes = enumerate_conjugacy(presentation(x.genus), L)
    vals = intersect_many(x, classes, ref)
    zero = np.nonzero(vals == 0)[0]
    if len(zero):
        return NonFillingWitness(classes[int(zero[0])], L)
    j = int(np.argmin(vals))
    return FillingEvidence(float(vals[j]), L, classes[j])


@dataclass(frozen=True)
class ESet:
    """Truncated E set: classes and the truncation level they depend on."""

    classes: tuple
    L: int

    def __contains__(self, c):
        return _as_class(c) in self.classes

    def __iter__(self):
        return iter(self.classes)

    def __len__(self):
        return len(self.classes)

    def to_json(self):
        return {"L": self.L, "classes": [str(c) for c in self.classes]}


def e_set(eta: Current, L: int, ref=None) -> ESet:
    """Primitive simple classes disjoint from ``eta`` all of whose enumerated
    crossing partners meet ``eta``."""
    eng = engine_for(ref)
    classes = enumerate_conjugacy(presentation(eta.genus), L)
    vals = intersect_many(eta, classes, eng.ref)
    hit = vals != 0
    out = []
    for j in np.nonzero(~hit)[0]:
        c = classes[int(j)]
        if c.primitive_root()[1] != 1 or self_intersection(c, eng.ref) != 0:
            continue
        partners = eng.against(c, classes) != 0
        if np.all(hit[partners]):
            out.append(c)
    return ESet(tuple(out), L)


@dataclass(frozen=True)
class LaminationSplit:
    lamination: Current
    remainder: Current

    def to_json(self):
        return {"lamination": self.lamination.to_json(), "remainder": self.remainder.to_json()}


def lamination_part(x: Current, ref=None, R: int | None = None) -> LaminationSplit:
    """Terms with simple support disjoint from the rest of ``x``."""
    if not x.is_multicurve():
        raise NotMulticurve("lamination_part needs a weighted multicurve")
    eng = engine_for(ref)
    lam, rest = [], []
    for w, a in x.terms:
        c = a.curve
        ok = self_intersection(c, eng.ref, R) == 0 and intersect(x.without(a), c, eng.ref, R) == 0
        (lam if ok else rest).append((w, a))
    return LaminationSplit(Current(lam), Current(rest))


@dataclass(frozen=True)
class SupportComparison:
    equal: bool
    witness: ConjClass | None
    L: int

    def __bool__(self):
        return self.equal

    def to_json(self):
        return {"equal": self.equal, "witness": None if self.witness is None else str(self.witness),
                "L": self.L}


def null_support_equal(x: Current, y: Current, L: int, ref=None) -> SupportComparison:
    classes = enumerate_conjugacy(presentation(x.genus), L)
    zx = intersect_many(x, classes, ref) == 0
    zy = intersect_many(y, classes, ref) == 0
    bad = np.nonzero(zx != zy)[0]
    if len(bad):
        return SupportComparison(False, classes[int(bad[0])], L)
    return SupportComparison(True, None, L)


__all__ = [
    "Atom",
    "Current",
    "ESet",
    "FillingEvidence",
    "IntersectionEngine",
    "IntersectionReport",
    "LaminationSplit",
    "NonFillingWitness",
    "SupportComparison",
    "e_set",
    "engine_for",
    "filling_probe",
    "geometric_intersection",
    "intersect",
    "intersect_many",
    "lamination_part",
    "null_support_equal",
    "self_intersection",
]
