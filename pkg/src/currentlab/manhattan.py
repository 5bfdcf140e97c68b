"""Manhattan curves, the geodesics t y + θ(t) x, and mean distortion.

θ(t) is the critical exponent s of sum_c exp(-t i(y,c) - s i(x,c)) over
conjugacy classes, estimated with the same word-shell pressure as the
entropy (so θ̂(0) = ĥ(x) and θ̂(ĥ(y)) = 0 by construction).  The mean
distortion is -θ'(0): by implicit differentiation of the shell pressure it is
the ratio of the shell slopes of the Gibbs means of i(y,.) and i(x,.) at
s = ĥ(x).  Ball averages over the largest complete ball are reported as trend
diagnostics.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .currents import Current
from .errors import ValidationError
from .metric import (
    TruncationContext,
    _shell_groups,
    critical_exponent,
    distance_value,
    entropy_estimate,
    shell_pressure,
)


@dataclass(frozen=True)
class ManhattanSample:
    t: float
    theta: float
    residual: float
    shells: tuple
    L: int

    def to_json(self):
        return {"t": self.t, "theta": self.theta, "residual": self.residual,
                "shells": list(self.shells), "L": self.L}


def theta(x: Current, y: Current, t: float, ctx: TruncationContext) -> ManhattanSample:
    vx, vy = ctx.require_filling(x), ctx.require_filling(y)
    ns, groups = _shell_groups(ctx.word_lengths, ctx.L)
    if t == 0:
        h = entropy_estimate(x, ctx)
        return ManhattanSample(0.0, h.value, h.residual, (int(ns[0]), ctx.L), ctx.L)
    scale = float(np.median(vx))
    u = vx / scale
    base = t * vy
    s = critical_exponent(u, ns, groups, base)
    _, res = shell_pressure(lambda g: s * u[g] + base[g], ns, groups)
    return ManhattanSample(float(t), float(s / scale), res, (int(ns[0]), ctx.L), ctx.L)


def theta_curve(x, y, ts, ctx) -> list:
    return [theta(x, y, float(t), ctx) for t in ts]


def theta_csv(samples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "theta"])
    for s in samples:
        w.writerow([repr(s.t), repr(s.theta)])
    return buf.getvalue()


def manhattan_geodesic(x: Current, y: Current, t: float, ctx: TruncationContext) -> Current:
    """t y + θ̂(t) x for 0 <= t <= ĥ(y)."""
    hy = entropy_estimate(y, ctx).value
    if not 0 <= t <= hy:
        raise ValidationError(f"t must lie in [0, {hy}]")
    th = theta(x, y, t, ctx).theta
    parts = []
    if t > 0:
        parts.append(t * y)
    if th > 1e-12 * max(1.0, entropy_estimate(x, ctx).value):
        parts.append(th * x)
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def d_sym(u: Current, v: Current, ctx) -> float:
    return distance_value(u, v, ctx) + distance_value(v, u, ctx)


@dataclass(frozen=True)
class AdditivityReport:
    r: float
    s: float
    t: float
    defect: float
    total: float
    tolerance: float
    ok: bool
    L: int

    def to_json(self):
        return {"r": self.r, "s": self.s, "t": self.t, "defect": self.defect,
                "dsym": self.total, "tolerance": self.tolerance, "ok": self.ok, "L": self.L}


def dsym_additivity_check(x, y, r, s, t, ctx, rel_tol: float = 0.05) -> AdditivityReport:
    """|d_sym(ρr,ρs) + d_sym(ρs,ρt) - d_sym(ρr,ρt)| against rel_tol d_sym(ρr,ρt)."""
    if not 0 <= r <= s <= t:
        raise ValidationError("need 0 <= r <= s <= t")
    pr, ps, pt = (manhattan_geodesic(x, y, v, ctx) for v in (r, s, t))
    total = d_sym(pr, pt, ctx)
    defect = (0.0 if r == s else d_sym(pr, ps, ctx)) + (0.0 if s == t else d_sym(ps, pt, ctx)) - total
    tol = rel_tol * total
    return AdditivityReport(r, s, t, abs(defect), total, tol, abs(defect) <= tol, ctx.L)


@dataclass(frozen=True)
class DistortionReport:
    value: float
    L: int
    radius: float
    ball_average: float
    sequence: tuple

    def __float__(self):
        return self.value

    def to_json(self):
        return {"value": self.value, "L": self.L, "radius": self.radius,
                "ballAverage": self.ball_average,
                "sequence": [[r, v] for r, v in self.sequence]}


def mean_distortion(x: Current, y: Current, ctx: TruncationContext) -> DistortionReport:
    """τ(y/x) = -θ'(0) from the shell Gibbs means at s = ĥ(x)."""
    vx, vy = ctx.require_filling(x), ctx.require_filling(y)
    hx = entropy_estimate(x, ctx).value
    ns, groups = _shell_groups(ctx.word_lengths, ctx.L)
    mx, my = [], []
    for g in groups:
        a = -hx * vx[g]
        w = np.exp(a - a.max())
        mx.append(np.dot(w, vx[g]) / w.sum())
        my.append(np.dot(w, vy[g]) / w.sum())
    sx = np.polyfit(ns, mx, 1)[0]
    sy = np.polyfit(ns, my, 1)[0]
    value = float(sy / sx)
    # ball averages (1/#B(r)) sum_{i(x,c) <= r} i(y,c)/r up to the last complete radius
    T = float(vx[ctx.word_lengths == ctx.L].min())
    seq = []
    for r in np.linspace(T / 2, T, 5):
        m = vx <= r
        if m.any():
            seq.append((float(r), float(vy[m].sum() / (m.sum() * r))))
    return DistortionReport(value, ctx.L, T, seq[-1][1] if seq else math.nan, tuple(seq))


__all__ = [
    "AdditivityReport",
    "DistortionReport",
    "ManhattanSample",
    "d_sym",
    "dsym_additivity_check",
    "manhattan_geodesic",
    "mean_distortion",
    "theta",
    "theta_csv",
    "theta_curve",
]
