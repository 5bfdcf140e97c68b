"""Horofunctions, detour cost along canonical rays, and the systole and
minimality probes for non-filling currents.

All suprema run over the shared curve set of a ``TruncationContext``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .currents import Current, null_support_equal, self_intersection
from .errors import ValidationError
from .metric import TruncationContext, _argmax_smallest, entropy_estimate

DEFAULT_T_GRID = tuple(float(2 ** k) for k in range(11))


@dataclass(frozen=True)
class HorofunctionValue:
    value: float
    z: Current
    x: Current
    b: Current
    Q: float
    L: int

    def __float__(self):
        return self.value

    def to_json(self):
        return {"value": self.value, "z": str(self.z), "x": str(self.x), "basepoint": str(self.b),
                "Q": self.Q, "L": self.L}


def _sup_ratio(num, den):
    """sup num/den over classes with den > 0 (num >= 0)."""
    ok = den > 0
    return float((num[ok] / den[ok]).max()) if ok.any() else 0.0


def horofunction(z: Current, x: Current, b: Current, ctx: TruncationContext) -> HorofunctionValue:
    """Ψ_z(x) = log(sup_c L_z(c)/i(x,c) / ĥ(x)), L_z = i(z,.)/Q(z),
    Q(z) = sup_c i(z,c)/i(b,c) / ĥ(b).

    The 1/ĥ(b) factor in Q is kept rather than set to 1: at finite
    truncation ĥ(b) is an estimate, and keeping it makes Ψ_z(x) =
    d(x,z) - d(b,z) exact for filling z."""
    if len(b.terms) != 1 or b.terms[0][1].kind != "liouville":
        raise ValidationError("basepoint must be a single Liouville atom")
    vx = ctx.require_filling(x)
    vb = ctx.require_filling(b)
    vz = ctx.values(z)
    Q = _sup_ratio(vz, vb) / entropy_estimate(b, ctx).value
    sup = _sup_ratio(vz, vx) / Q
    value = math.log(sup) - math.log(entropy_estimate(x, ctx).value)
    return HorofunctionValue(value, z, x, b, Q, ctx.L)


# ---------------------------------------------------------------------------
# detour cost


@dataclass(frozen=True)
class DetourReport:
    status: str  # "finite" | "infinite" | "undetermined"
    bound: float | None
    witness: object
    samples: tuple
    L: int

    @property
    def finite(self) -> bool:
        return self.status == "finite"

    def to_json(self):
        return {"status": self.status, "bound": self.bound,
                "witness": None if self.witness is None else str(self.witness),
                "samples": [[t, v] for t, v in self.samples], "L": self.L}


def detour_finite(xi: Current, eta: Current, ctx: TruncationContext) -> DetourReport:
    """sup_c i(η,c)/i(ξ,c); an infinite witness is a class with i(ξ,c) = 0 < i(η,c)."""
    vxi, veta = ctx.values(xi), ctx.values(eta)
    classes = ctx.classes
    idx = np.arange(len(classes))
    bad = (vxi == 0) & (veta > 0)
    if bad.any():
        j = min(idx[bad], key=lambda k: classes[k])
        return DetourReport("infinite", None, classes[int(j)], (), ctx.L)
    ok = vxi > 0
    if not ok.any():
        return DetourReport("undetermined", None, None, (), ctx.L)
    j, best = _argmax_smallest(classes, veta[ok] / vxi[ok], idx[ok])
    return DetourReport("finite", best, classes[j], (), ctx.L)


def recheck_witness(report: DetourReport, xi: Current, eta: Current, L: int, ref=None) -> bool:
    """An infinite witness found at level L is still one at any larger level."""
    if report.status != "infinite":
        return False
    ctx = TruncationContext(L, xi.genus, ref)
    j = ctx.classes.index(report.witness)
    return ctx.values(xi)[j] == 0 < ctx.values(eta)[j]


def _ray_values(xi, eta, b, ctx, grid):
    vb = ctx.require_filling(b)
    vxi, veta = ctx.values(xi), ctx.values(eta)
    base = math.log(_sup_ratio(veta, vb))
    out = []
    for t in grid:
        vg = vb + t * vxi
        out.append((float(t), math.log(_sup_ratio(vg, vb)) + math.log(_sup_ratio(veta, vg)) - base))
    return out


def detour_cost(xi: Current, eta: Current, b: Current, ctx: TruncationContext,
                t_grid=DEFAULT_T_GRID) -> DetourReport:
    """Truncated H(ξ,η) along γ(t) = b + tξ.

    Each sample is log Dil(b,γt) + log Dil(γt,η) - log Dil(b,η) with the
    dilations taken as plain ratio suprema; ``bound`` is the running
    minimum, an upper-bound estimate of H.  The status follows detour_finite.
    """
    fin = detour_finite(xi, eta, ctx)
    samples = tuple(_ray_values(xi, eta, b, ctx, t_grid))
    bound = min(v for _, v in samples) if fin.finite else None
    return DetourReport(fin.status, bound, fin.witness, samples, ctx.L)


def symmetrized_detour(xi, eta, b, ctx, t_grid=DEFAULT_T_GRID) -> DetourReport:
    """δ(ξ,η) = H(ξ,η) + H(η,ξ); infinite if either direction has a witness."""
    h1 = detour_cost(xi, eta, b, ctx, t_grid)
    h2 = detour_cost(eta, xi, b, ctx, t_grid)
    for h in (h1, h2):
        if h.status == "infinite":
            return DetourReport("infinite", None, h.witness, h1.samples, ctx.L)
    if h1.finite and h2.finite:
        samples = tuple((t, a + c) for (t, a), (_, c) in zip(h1.samples, h2.samples))
        return DetourReport("finite", h1.bound + h2.bound, None, samples, ctx.L)
    return DetourReport("undetermined", None, None, h1.samples, ctx.L)


# ---------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class MinimalityReport:
    eta: Current
    survivors: tuple
    rejected: tuple  # (candidate, witness)
    L: int

    def to_json(self):
        return {"eta": str(self.eta), "survivors": [str(c) for c in self.survivors],
                "rejected": [[str(c), str(w)] for c, w in self.rejected], "L": self.L}


def default_pool(eta: Current, ctx: TruncationContext, max_len: int = 4, seed: int = 0) -> list:
    """Simple classes up to ``max_len``, disjoint simple pairs, and random
    reweightings of the atoms of η."""
    simple = [c for c in ctx.classes if c.length <= max_len and c.primitive_root()[1] == 1
              and self_intersection(c, ctx.ref) == 0]
    pool = [Current.curve(c) for c in simple]
    from .currents import engine_for
    eng = engine_for(ctx.ref)
    for c1, c2 in itertools.combinations(simple[:40], 2):
        if eng.pair(c1, c2) == 0:
            pool.append(Current.curve(c1) + Current.curve(c2))
    rng = np.random.default_rng(seed)
    for _ in range(5):
        pool.append(Current([(float(rng.uniform(0.2, 5.0)), a) for _, a in eta.terms]))
    return pool


def minimality_probe(eta: Current, ctx: TruncationContext, pool=None) -> MinimalityReport:
    """Candidates ξ from the pool with both detour sups finite against η."""
    if not eta.is_multicurve():
        raise ValidationError("minimality_probe expects a multicurve η")
    pool = default_pool(eta, ctx) if pool is None else pool
    keep, rej = [], []
    for xi in pool:
        f1 = detour_finite(xi, eta, ctx)
        f2 = detour_finite(eta, xi, ctx)
        if f1.finite and f2.finite:
            keep.append(xi)
        else:
            rej.append((xi, f1.witness if f1.status == "infinite" else f2.witness))
    return MinimalityReport(eta, tuple(keep), tuple(rej), ctx.L)


@dataclass(frozen=True)
class SystoleBoundReport:
    lhs: float
    systole: float
    rhs: float
    argmax: object
    argmin: object
    ok: bool
    L: int

    def to_json(self):
        return {"lhs": self.lhs, "systole": self.systole, "rhs": self.rhs,
                "argmax": str(self.argmax), "argmin": str(self.argmin), "ok": self.ok,
                "L": self.L, "interior": "i(eta,c) > 0 and i(b,c) = 0"}


def systole_bound_check(eta_fill: Current, b_curve, ctx: TruncationContext) -> SystoleBoundReport:
    """sup_c i(b,c)/i(η,c) <= 4 / Syst(η) + 1e-9.

    Syst is the minimum of i(η,c) over enumerated classes with i(η,c) > 0 and
    i(b,c) = 0, a heuristic stand-in for curves interior to the filled
    subsurface.
    """
    b = Current.curve(b_curve) if not isinstance(b_curve, Current) else b_curve
    ve, vb = ctx.values(eta_fill), ctx.values(b)
    j = ctx.classes.index(b.atoms[0].curve)
    if ve[j] != 0:
        raise ValidationError("boundary curve must be disjoint from the filling current")
    classes = ctx.classes
    idx = np.arange(len(classes))
    bad = (ve == 0) & (vb > 0)
    if bad.any():
        k = int(min(idx[bad], key=lambda i: classes[i]))
        return SystoleBoundReport(math.inf, math.nan, math.nan, classes[k], None, False, ctx.L)
    ok = ve > 0
    k, lhs = _argmax_smallest(classes, vb[ok] / ve[ok], idx[ok])
    interior = ok & (vb == 0)
    m = int(idx[interior][np.argmin(ve[interior])])
    syst = float(ve[m])
    rhs = 4.0 / syst
    return SystoleBoundReport(lhs, syst, rhs, classes[k], classes[m], lhs <= rhs + 1e-9, ctx.L)


def finite_implies_null_support(xi: Current, eta: Current, ctx: TruncationContext) -> bool:
    """Finite δ for multicurves must come with equal null supports."""
    d = symmetrized_detour(xi, eta, _liouville_base(ctx), ctx, (1.0,))
    if d.status != "finite":
        return True
    return bool(null_support_equal(xi, eta, ctx.L, ctx.ref))


def _liouville_base(ctx):
    return Current.liouville(ctx.ref)


__all__ = [
    "DEFAULT_T_GRID",
    "DetourReport",
    "HorofunctionValue",
    "MinimalityReport",
    "SystoleBoundReport",
    "default_pool",
    "detour_cost",
    "detour_finite",
    "finite_implies_null_support",
    "horofunction",
    "minimality_probe",
    "recheck_witness",
    "symmetrized_detour",
    "systole_bound_check",
]
