"""Dilation, entropy, the extended Thurston distance and its canonical rays.

Everything is evaluated over one shared curve set per ``TruncationContext``
(all classes of word length <= L), which makes the triangle inequality and
the ray identities exact at fixed truncation.

Entropy is the critical exponent of the Poincare series sum_c exp(-s i(x,c)),
estimated from word-length shells: with S_n(s) the sum over classes of word
length n, the growth rate of n*S_n(s) in n is fitted by least squares over
n = 2..L and its zero is found by root bracketing.  The factor n accounts for
cyclic words per class.  Values are normalised by their median first, so
ĥ(a x) = ĥ(x)/a holds to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .currents import Current, engine_for, intersect_many
from .errors import NonFillingInput, ValidationError
from .hyperbolic import FuchsianStructure, bolza_structure
from .surface import ConjClass, enumerate_conjugacy, presentation

MIN_SHELL = 2
DIVERGENCE_FLAG = 0.10


@dataclass
class TruncationContext:
    """Shared curve set and reference geometry for a family of computations."""

    L: int
    genus: int = 2
    ref: FuchsianStructure | None = None
    R: int | None = None
    budget: int | None = None
    _classes: list | None = field(default=None, repr=False)
    _values: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not isinstance(self.L, int) or self.L < MIN_SHELL + 1:
            raise ValidationError(f"L must be an integer >= {MIN_SHELL + 1}")
        if self.ref is None:
            self.ref = bolza_structure()
        if self.ref.genus != self.genus:
            raise ValidationError("reference structure has the wrong genus")

    @property
    def presentation(self):
        return presentation(self.genus)

    @property
    def classes(self) -> list:
        if self._classes is None:
            self._classes = enumerate_conjugacy(self.presentation, self.L, self.budget)
        return self._classes

    @property
    def word_lengths(self) -> np.ndarray:
        if "__lengths__" not in self._values:
            self._values["__lengths__"] = np.array([c.length for c in self.classes])
        return self._values["__lengths__"]

    def values(self, x: Current) -> np.ndarray:
        """i(x, c) over the curve set (cached per current)."""
        v = self._values.get(x)
        if v is None:
            v = self.atom_values(x.terms[0][1]) * x.terms[0][0] if len(x.terms) == 1 else None
            if v is None:
                v = np.zeros(len(self.classes))
                for w, a in x.terms:
                    v = v + w * self.atom_values(a)
            v.setflags(write=False)
            self._values[x] = v
        return v

    def atom_values(self, a) -> np.ndarray:
        key = ("atom", a)
        v = self._values.get(key)
        if v is None:
            v = intersect_many(Current([(1.0, a)]), self.classes, self.ref)
            v.setflags(write=False)
            self._values[key] = v
        return v

    def require_filling(self, x: Current) -> np.ndarray:
        v = self.values(x)
        zero = np.nonzero(v <= 0)[0]
        if len(zero):
            c = self.classes[int(zero[0])]
            raise NonFillingInput(f"{x} has i(x,{c}) = 0 at L={self.L}", witness=c)
        return v

    def describe(self) -> dict:
        return {"L": self.L, "genus": self.genus, "reference": self.ref.label,
                "R": self.R, "classes": len(self.classes)}


# ---------------------------------------------------------------------------
# dilation


@dataclass(frozen=True)
class Dilation:
    value: float
    argmax: ConjClass | None
    infinite: bool
    L: int

    def to_json(self):
        return {"value": "inf" if self.infinite else self.value,
                "argmaxClass": None if self.argmax is None else str(self.argmax),
                "infinite": self.infinite, "L": self.L}


def _argmax_smallest(classes, ratios, idx):
    """Index of the maximum, ties broken by the smallest class (shortest
    canonical word, then lexicographic), i.e. the first in enumeration order."""
    best = ratios.max()
    tied = idx[ratios == best]
    j = min(tied, key=lambda k: classes[k])
    return int(j), float(best)


def dilation_from_values(vx, vy, classes, L, mask=None) -> Dilation:
    idx = np.arange(len(vx))
    if mask is not None:
        vx, vy, idx = vx[mask], vy[mask], idx[mask]
    inf = (vx == 0) & (vy > 0)
    if inf.any():
        j = min(idx[inf], key=lambda k: classes[k])
        return Dilation(math.inf, classes[int(j)], True, L)
    ok = vx > 0
    if not ok.any():
        return Dilation(0.0, None, False, L)
    j, best = _argmax_smallest(classes, vy[ok] / vx[ok], idx[ok])
    return Dilation(best, classes[j], False, L)


def dilation(x: Current, y: Current, ctx: TruncationContext) -> Dilation:
    """max_c i(y,c)/i(x,c) over the curve set; +inf with a witness if
    i(x,c) = 0 < i(y,c) for some c.  Pairs with both values zero are skipped."""
    return dilation_from_values(ctx.values(x), ctx.values(y), ctx.classes, ctx.L)


# ---------------------------------------------------------------------------
# entropy


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    L: int
    residual: float
    N: int
    shells: tuple
    rank_regression: float
    threshold_count: float
    divergent: bool

    def to_json(self):
        return {"value": self.value, "L": self.L, "residual": self.residual, "N": self.N,
                "shells": list(self.shells), "rankRegression": self.rank_regression,
                "thresholdCount": self.threshold_count, "divergent": self.divergent}


def _shell_groups(lengths: np.ndarray, L: int):
    ns = np.arange(MIN_SHELL, L + 1)
    order = np.argsort(lengths, kind="stable")
    bounds = np.searchsorted(lengths[order], np.arange(MIN_SHELL, L + 2))
    return ns, [order[bounds[i]:bounds[i + 1]] for i in range(len(ns))]


def shell_pressure(potential_fn, ns, groups):
    """Least-squares slope and residual of log(n * sum_{|c|=n} exp(-u_c)) in n."""
    logs = np.array([logsumexp(-potential_fn(g)) for g in groups]) + np.log(ns)
    coef = np.polyfit(ns, logs, 1)
    res = float(np.sqrt(np.mean((np.polyval(coef, ns) - logs) ** 2)))
    return float(coef[0]), res


def critical_exponent(u: np.ndarray, ns, groups, base: np.ndarray | None = None) -> float:
    """Zero s of the shell pressure of ``s*u + base`` (``u`` positive)."""
    b = (lambda g: 0.0) if base is None else (lambda g: base[g])
    f = lambda s: shell_pressure(lambda g: s * u[g] + b(g), ns, groups)[0]
    lo, hi = 0.0, 1.0
    flo = f(lo)
    if flo <= 0:
        # base already subcritical: search negative exponents
        hi, lo = 0.0, -1.0
        while f(lo) <= 0:
            lo *= 2
            if lo < -1e6:
                raise ValidationError("no critical exponent found")
    else:
        while f(hi) > 0:
            hi *= 2
            if hi > 1e6:
                raise ValidationError("no critical exponent found")
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def rank_regression(v: np.ndarray) -> float:
    """Slope of log(rank) against the sorted values, upper half only."""
    v = np.sort(v)
    k = np.arange(1, len(v) + 1)
    lo = len(v) // 2
    if len(v) - lo < 2 or v[-1] == v[lo]:
        return float("nan")
    return float(np.polyfit(v[lo:], np.log(k[lo:]), 1)[0])


def entropy_from_values(v: np.ndarray, lengths: np.ndarray, L: int) -> EntropyEstimate:
    scale = float(np.median(v))
    u = v / scale
    ns, groups = _shell_groups(lengths, L)
    s = critical_exponent(u, ns, groups)
    _, res = shell_pressure(lambda g: s * u[g], ns, groups)
    h = s / scale
    rr = rank_regression(v)
    # threshold count at the largest value below which the set is taken as complete
    T = float(v[lengths == L].min())
    n_T = int((v <= T).sum())
    tc = math.log(n_T) / T if n_T > 1 else float("nan")
    div = not (abs(rr - h) <= DIVERGENCE_FLAG * h and abs(tc - h) <= DIVERGENCE_FLAG * h)
    return EntropyEstimate(float(h), L, res, int(len(v)), (MIN_SHELL, L), rr, tc, div)


def entropy_estimate(x: Current, ctx: TruncationContext) -> EntropyEstimate:
    """Critical exponent of the Poincare series of i(x, .) over the curve set."""
    key = ("entropy", x)
    e = ctx._values.get(key)
    if e is None:
        v = ctx.require_filling(x)
        e = entropy_from_values(v, ctx.word_lengths, ctx.L)
        ctx._values[key] = e
    return e


# ---------------------------------------------------------------------------
# distance and rays


@dataclass(frozen=True)
class DistanceReport:
    value: float
    argmax: ConjClass
    entropy_x: float
    entropy_y: float
    L: int
    stable: bool

    def __float__(self):
        return self.value

    def to_json(self):
        return {"value": self.value, "argmaxClass": str(self.argmax), "entropyX": self.entropy_x,
                "entropyY": self.entropy_y, "L": self.L, "stable": self.stable}


def thurston_distance(x: Current, y: Current, ctx: TruncationContext) -> DistanceReport:
    """log(Dil(x,y) * ĥ(y)/ĥ(x)).  ``stable`` says the dilation is already
    attained by classes of word length below L."""
    vx, vy = ctx.require_filling(x), ctx.require_filling(y)
    D = dilation_from_values(vx, vy, ctx.classes, ctx.L)
    hx, hy = entropy_estimate(x, ctx).value, entropy_estimate(y, ctx).value
    inner = dilation_from_values(vx, vy, ctx.classes, ctx.L, ctx.word_lengths < ctx.L)
    value = math.log(D.value) + math.log(hy) - math.log(hx)
    return DistanceReport(value, D.argmax, hx, hy, ctx.L, inner.value == D.value)


def distance_value(x: Current, y: Current, ctx: TruncationContext) -> float:
    return thurston_distance(x, y, ctx).value


def geodesic_ray(b: Current, z: Current, t: float) -> Current:
    """The current b + t z."""
    if t < 0:
        raise ValidationError("ray parameter must be nonnegative")
    if len(b.terms) != 1 or b.terms[0][1].kind != "liouville":
        raise ValidationError("ray base must be a single Liouville atom")
    return b if t == 0 else b + t * z


@dataclass(frozen=True)
class RayReport:
    s: float
    t: float
    additivity_defect: float
    dilation_defect: float
    ray_dilation_defect: float
    D: float
    L: int

    def to_json(self):
        return {"s": self.s, "t": self.t, "additivityDefect": self.additivity_defect,
                "dilationDefect": self.dilation_defect,
                "rayDilationDefect": self.ray_dilation_defect, "D": self.D, "L": self.L}


def ray_additivity_check(b: Current, z: Current, s: float, t: float,
                         ctx: TruncationContext) -> RayReport:
    """Defects of d(b,γs)+d(γs,γt)=d(b,γt), Dil(γs,γt)=(1+tD)/(1+sD) and
    Dil(b,γt)=1+tD with D = Dil(b,z)."""
    if not 0 <= s <= t:
        raise ValidationError("need 0 <= s <= t")
    gs, gt = geodesic_ray(b, z, s), geodesic_ray(b, z, t)
    D = dilation(b, z, ctx).value
    add = (distance_value(b, gs, ctx) + distance_value(gs, gt, ctx) - distance_value(b, gt, ctx))
    dd = dilation(gs, gt, ctx).value - (1 + t * D) / (1 + s * D)
    rd = dilation(b, gt, ctx).value - (1 + t * D)
    return RayReport(s, t, abs(add), abs(dd), abs(rd), D, ctx.L)


__all__ = [
    "DistanceReport",
    "Dilation",
    "EntropyEstimate",
    "RayReport",
    "TruncationContext",
    "critical_exponent",
    "dilation",
    "distance_value",
    "entropy_estimate",
    "geodesic_ray",
    "rank_regression",
    "ray_additivity_check",
    "thurston_distance",
]
