"""Potentials on the surface group: Gromov products, four-point
hyperbolicity, stable lengths, ball growth and rough similarity.

A potential is a function psi(o, g) of group elements given as words; the
pair form is psi(x, y) = psi(o, x^-1 y).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .anosov import Functional, RepN, busemann_potential, busemann_power, cartan_many
from .errors import AsymmetricPotential, ValidationError
from .hyperbolic import FuchsianStructure, bolza_structure
from .metric import MIN_SHELL, TruncationContext
from .surface import inverse, parse_word, presentation, random_word, word_length

# generic basepoint in the upper half-plane for orbit-point deduplication
BASEPOINT = complex(0.0731, 1.0917)
DEDUP_RADIUS = 1e-3
MAX_BALL_RADIUS = 7


def _word(w):
    if isinstance(w, str):
        return parse_word(w) if w else ()
    return tuple(w)


class Potential:
    """psi(o, .) with provenance and a positive scale factor."""

    def __init__(self, fn, name: str, symmetric: bool, scale: float = 1.0, batch=None):
        self._fn = fn
        self._batch = batch
        self.name = name
        self.symmetric = symmetric
        self.scale = float(scale)

    def __call__(self, g) -> float:
        g = _word(g)
        return 0.0 if not g else self.scale * float(self._fn(g))

    def pair(self, x, y) -> float:
        return self(inverse(_word(x)) + _word(y))

    def many(self, words) -> np.ndarray:
        words = [_word(w) for w in words]
        if self._batch is not None:
            return self.scale * np.asarray(self._batch(words), dtype=float)
        return np.array([self(w) for w in words])

    def __mul__(self, a):
        if a <= 0:
            raise ValidationError("potentials scale by positive factors")
        return Potential(self._fn, f"{a:g}*{self.name}", self.symmetric, self.scale * a, self._batch)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Potential({self.name})"

    @staticmethod
    def word_length(genus: int = 2) -> "Potential":
        p = presentation(genus)
        return Potential(lambda w: word_length(w, p), "word_length", True)

    @staticmethod
    def anosov_phi(r: RepN, phi: Functional) -> "Potential":
        def batch(words):
            out = np.zeros(len(words))
            idx = [i for i, w in enumerate(words) if w]
            if idx:
                out[idx] = phi(cartan_many(r, [words[i] for i in idx]))
            return out

        return Potential(lambda w: busemann_potential(r, phi, w), f"phi[{phi.name}]({r.label})",
                         phi.is_iota_invariant(), batch=batch)


def gromov_product(psi: Potential, x, y, z) -> float:
    """(x|y)_z = (psi(x,z) + psi(z,y) - psi(x,y)) / 2."""
    return 0.5 * (psi.pair(x, z) + psi.pair(z, y) - psi.pair(x, y))


@dataclass(frozen=True)
class DeltaReport:
    delta: float
    samples: int
    max_len: int
    seed: int
    symmetric: bool

    def __float__(self):
        return self.delta

    def to_json(self):
        return {"delta": self.delta, "samples": self.samples, "maxLen": self.max_len,
                "seed": self.seed, "symmetric": self.symmetric}


def _sample_words(rng, count, max_len, genus):
    """Uniform over reduced words of length <= max_len."""
    nl = 4 * genus
    sizes = np.array([1.0] + [nl * (nl - 1.0) ** (k - 1) for k in range(1, max_len + 1)])
    ks = rng.choice(max_len + 1, size=count, p=sizes / sizes.sum())
    return [random_word(rng, int(k), genus) for k in ks]


def hyperbolicity_delta(psi: Potential, sample_count: int, max_len: int, seed: int = 0,
                        genus: int = 2, report_only: bool = False) -> DeltaReport:
    """Largest sampled four-point defect.

    For each quadruple the three pair sums are ranked and the defect is half
    the gap between the largest two, i.e. the displayed defect maximised over
    relabelings.  Words are drawn uniformly among reduced words of length
    <= max_len.
    """
    if not psi.symmetric and not report_only:
        raise AsymmetricPotential(f"{psi.name} is not symmetric; pass report_only=True")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(sample_count):
        x, y, z, w = _sample_words(rng, 4, max_len, genus)
        s = sorted([psi.pair(x, y) + psi.pair(z, w), psi.pair(x, z) + psi.pair(y, w),
                    psi.pair(x, w) + psi.pair(y, z)])
        best = max(best, 0.5 * (s[2] - s[1]))
    return DeltaReport(best, sample_count, max_len, seed, psi.symmetric)


@dataclass(frozen=True)
class StableLength:
    value: float
    naive: float
    half: float
    N: int

    def __float__(self):
        return self.value

    def to_json(self):
        return {"value": self.value, "naive": self.naive, "half": self.half, "N": self.N}


def stable_length(psi: Potential, g, N: int = 32, power=None) -> StableLength:
    """Stable length from psi(g^N) and psi(g^(N/2)).

    ``naive`` is psi(g^N)/N, which carries an O(1/N) bias; ``value`` is the
    Richardson combination (psi(g^N) - psi(g^(N/2))) / (N/2), which cancels
    the constant term.  ``power(g, k)`` may supply psi(g^k) directly.
    """
    if N < 4 or N % 2:
        raise ValidationError("N must be even and >= 4")
    g = _word(g)
    f = power or (lambda w, k: psi(w * k))
    full, half = f(g, N), f(g, N // 2)
    return StableLength((full - half) / (N // 2), full / N, half / (N // 2), N)


def anosov_stable_length(r: RepN, phi: Functional, g, N: int = 32) -> StableLength:
    """stable_length of the AnosovPhi potential with matrix powers."""
    psi = Potential.anosov_phi(r, phi)
    return stable_length(psi, g, N, power=lambda w, k: busemann_power(r, phi, w, k))


# ---------------------------------------------------------------------------
# balls


@dataclass
class Ball:
    """Group elements of word length <= R, one per orbit point.

    ``words`` are reconstructed lazily from parent pointers.
    """

    R: int
    genus: int
    parent: np.ndarray
    letter: np.ndarray
    length: np.ndarray

    def words(self) -> list:
        out = [()] * len(self.parent)
        for i in range(1, len(self.parent)):
            out[i] = out[self.parent[i]] + (int(self.letter[i]),)
        return out


_BALLS: dict = {}


def _orbit_features(M: np.ndarray) -> np.ndarray:
    """(log y, x / y) of g(z0), local coordinates on the upper half-plane."""
    a, b, c, d = M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1]
    num = a * BASEPOINT + b
    den = c * BASEPOINT + d
    z = num / den
    return np.stack([np.log(z.imag), z.real / z.imag], axis=1)


def word_ball(R: int, x: FuchsianStructure | None = None) -> Ball:
    """Breadth-first ball in the Cayley graph, deduplicated by orbit points of
    a generic basepoint under a Fuchsian structure (distinct elements move it
    by at least the systole, far above the merge radius)."""
    x = x or bolza_structure()
    key = (R, id(x))
    if key in _BALLS:
        return _BALLS[key][0]
    nl = x.letters.shape[0]
    mats = [np.eye(2)[None]]
    parent, letter, length = [np.array([-1])], [np.array([-1])], [np.array([0])]
    feats = [_orbit_features(mats[0])]
    offset = 1
    for n in range(1, R + 1):
        F = mats[-1]
        cand = (F[:, None] @ x.letters[None]).reshape(-1, 2, 2)
        loc = np.repeat(np.arange(len(F)), nl)
        let = np.tile(np.arange(nl), len(F))
        keep = letter[-1][loc] != (let ^ 1)  # no backtracking
        cand, par, let = cand[keep], loc[keep] + offset - len(F), let[keep]
        cf = _orbit_features(cand)
        drop = np.zeros(len(cand), bool)
        # relator length is even, so a new element can only repeat sphere n-2
        if n >= 2:
            dist, _ = cKDTree(feats[-2]).query(cf, distance_upper_bound=DEDUP_RADIUS)
            drop |= np.isfinite(dist)
        for i, j in sorted(cKDTree(cf).query_pairs(DEDUP_RADIUS)):
            if not drop[i]:
                drop[j] = True
        sel = ~drop
        mats.append(cand[sel])
        feats.append(cf[sel])
        parent.append(par[sel])
        letter.append(let[sel])
        length.append(np.full(int(sel.sum()), n))
        offset += int(sel.sum())
    ball = Ball(R, x.genus, np.concatenate(parent), np.concatenate(letter), np.concatenate(length))
    _BALLS[key] = (ball, x)
    return ball


@dataclass(frozen=True)
class GrowthReport:
    slope: float
    radius: int
    thresholds: tuple
    counts: tuple
    r_max: float

    def __float__(self):
        return self.slope

    def to_json(self):
        return {"slope": self.slope, "ballRadius": self.radius, "thresholds": list(self.thresholds),
                "counts": list(self.counts), "rMax": self.r_max}


def ball_growth(psi: Potential, ctx: TruncationContext, max_radius: int = MAX_BALL_RADIUS) -> GrowthReport:
    """Slope of log #{g : psi(o,g) <= r} against r.

    Elements come from the word ball of radius R = min(L, max_radius).
    Thresholds are r_k = r_max k / R for k = 2..R, with r_max the least
    psi-value on the outer sphere, below which the count is taken as complete
    (exact for word length).
    """
    R = min(ctx.L, max_radius)
    ball = word_ball(R, ctx.ref)
    if psi.name.endswith("word_length") and psi._batch is None:
        vals = psi.scale * ball.length.astype(float)
    else:
        vals = psi.many(ball.words())
    r_max = float(vals[ball.length == R].min())
    ks = np.arange(MIN_SHELL, R + 1)
    th = r_max * ks / R
    v = np.sort(vals)
    counts = np.searchsorted(v, th * (1 + 1e-12), side="right")
    slope = float(np.polyfit(th, np.log(counts), 1)[0])
    return GrowthReport(slope, R, tuple(float(t) for t in th), tuple(int(c) for c in counts), r_max)


@dataclass(frozen=True)
class SimilarityReport:
    slope: float
    max_residual: float
    samples: int

    def to_json(self):
        return {"lambda": self.slope, "A": self.max_residual, "samples": self.samples}


def sample_elements(count: int, max_len: int, seed: int = 0, genus: int = 2) -> list:
    rng = np.random.default_rng(seed)
    return _sample_words(rng, count, max_len, genus)


def rough_similarity_test(psi1: Potential, psi2: Potential, samples) -> SimilarityReport:
    """Least-squares lambda with psi2 ~ lambda psi1 and A = max |psi2 - lambda psi1|."""
    v1, v2 = psi1.many(samples), psi2.many(samples)
    lam = float(v1 @ v2 / (v1 @ v1))
    return SimilarityReport(lam, float(np.abs(v2 - lam * v1).max()), len(v1))


__all__ = [
    "Ball",
    "DeltaReport",
    "GrowthReport",
    "Potential",
    "SimilarityReport",
    "StableLength",
    "anosov_stable_length",
    "ball_growth",
    "gromov_product",
    "hyperbolicity_delta",
    "rough_similarity_test",
    "sample_elements",
    "stable_length",
    "word_ball",
]
