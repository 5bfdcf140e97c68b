"""Acceptance criteria, one test each.

Every test records a one-line PASS/FAIL summary (printed at the end of the
pytest run by conftest.py, or directly with ``python3 tests/test_acceptance.py``).
"""

import itertools
import math
import time

import numpy as np
import pytest

from currentlab.anosov import (
    Functional,
    anosov_distance,
    anosov_gap_check,
    cartan_projection,
    jordan_projection,
    sym_rep,
)
from currentlab.boundary import detour_finite, finite_implies_null_support, horofunction, systole_bound_check
from currentlab.currents import Current, geometric_intersection, self_intersection
from currentlab.hyperbolic import bolza_structure, evaluate, twist_family
from currentlab.manhattan import dsym_additivity_check, mean_distortion, theta_curve
from currentlab.metric import (
    TruncationContext,
    dilation,
    distance_value,
    entropy_estimate,
    entropy_from_values,
    ray_additivity_check,
)
from currentlab.potentials import Potential, anosov_stable_length, ball_growth
from currentlab.anosov import phi_length
from currentlab.surface import inverse, parse_word

RESULTS = {}

X = bolza_structure()
B = Current.liouville(X)
P = Current.parse
ATOMS = ["a1", "b1", "a2", "b2", "a1b1", "a1a2", "b1b2", "a1B1", "a2b2", "a1b1A1B1", "a1b2", "b1a2"]


def record(n, ok, detail, t0):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {detail}  ({time.time() - t0:.1f} s)"
    RESULTS[n] = line
    print(line)
    assert ok, line


_CTX = {}


def context(L):
    if L not in _CTX:
        _CTX[L] = TruncationContext(L)
    return _CTX[L]


def random_filling(rng):
    """Liouville atom of a twisted Bolza structure plus a weighted multicurve."""
    x = Current.liouville(twist_family(X, float(rng.uniform(-1.5, 1.5)))) * float(rng.uniform(0.3, 2.0))
    for a in rng.choice(ATOMS, int(rng.integers(0, 4)), replace=False):
        x = x + Current.curve(str(a), float(rng.uniform(0.05, 1.5)))
    return x


def test_c01_triangle():
    t0 = time.time()
    ctx = context(6)
    rng = np.random.default_rng(2024)
    worst = -math.inf
    for _ in range(100):
        x, y, z = (random_filling(rng) for _ in range(3))
        excess = distance_value(x, z, ctx) - distance_value(x, y, ctx) - distance_value(y, z, ctx)
        worst = max(worst, excess)
    dt = time.time() - t0
    record(1, worst <= 1e-12 and dt < 120, f"max d(x,z)-d(x,y)-d(y,z) = {worst:.3g} over 100 triples, L=6", t0)


def test_c02_ray_identities():
    t0 = time.time()
    ctx = context(6)
    worst_dil = worst_add = 0.0
    for z in ("a1", "a1+a2", "a1b1A1B1"):
        zc = P(z)
        D = dilation(B, zc, ctx).value
        for s, t in ((1, 2), (1, 8), (3, 9)):
            worst_dil = max(worst_dil, abs(dilation(B, B + t * zc, ctx).value - (1 + t * D)))
            worst_add = max(worst_add, ray_additivity_check(B, zc, s, t, ctx).additivity_defect)
    record(2, worst_dil <= 1e-9 and worst_add <= 1e-9,
           f"dilation defect {worst_dil:.2g}, additivity defect {worst_add:.2g}", t0)


def test_c03_entropy_normalization():
    t0 = time.time()
    hs = {L: entropy_estimate(B, context(L)).value for L in (5, 6, 7, 8)}
    errs = [abs(hs[L] - 1) for L in (5, 6, 7, 8)]
    mono = all(b <= a for a, b in zip(errs, errs[1:]))
    ok = 0.8 <= hs[8] <= 1.2 and mono and time.time() - t0 < 600
    record(3, ok, "h_L(Liouville Bolza) = " + ", ".join(f"L{L}:{h:.5f}" for L, h in hs.items()), t0)


def test_c04_entropy_laws():
    t0 = time.time()
    ctx = context(6)
    rng = np.random.default_rng(4)
    scale_err = 0.0
    for x in (B, B + P("a1+b2"), random_filling(rng)):
        h = entropy_estimate(x, ctx).value
        for a in (0.5, 3.0):
            scale_err = max(scale_err, abs(entropy_estimate(a * x, ctx).value * a - h))
    dom_ok = 0
    for k in range(20):
        x = random_filling(rng)
        z = Current.curve(str(rng.choice(ATOMS)), float(rng.uniform(0.05, 2)))
        if k % 3 == 0:
            z = B * float(rng.uniform(0.05, 0.5))
        y = x + z
        dom = bool(np.all(ctx.values(x) <= ctx.values(y)))
        dom_ok += dom and entropy_estimate(y, ctx).value <= entropy_estimate(x, ctx).value
    record(4, scale_err <= 1e-12 and dom_ok == 20,
           f"scaling error {scale_err:.2g}, domination {dom_ok}/20", t0)


def test_c05_intersection_battery():
    t0 = time.time()
    expect = {("a1", "b1"): 1, ("a1", "a2"): 0, ("a1", "a1b1A1B1"): 0}
    self_expect = {"a1": 0, "a1b1A1B1": 0}
    bad = []
    for ref in (X, twist_family(X, 0.7)):
        for R in (2, 4):
            for (c1, c2), want in expect.items():
                rep = geometric_intersection(c1, c2, ref, R)
                if rep.count != want or not rep.stable:
                    bad.append((c1, c2, R))
            for c, want in self_expect.items():
                if self_intersection(c, ref, R) != want:
                    bad.append((c, R))
    record(5, not bad, f"5 values x 2 radii x 2 structures, mismatches: {bad or 'none'}", t0)


def fillings10():
    out = [Current.liouville(twist_family(X, s)) for s in (-1.0, 0.5, 1.0)]
    out += [P("a1+b1+a2+b2") + B, P("a1+b1+a2+b2+a1a2") + 0.3 * out[2], 2 * B + P("a1b1A1B1"),
            out[0] + P("a2"), B + P("a1b2+b1a2"), 0.5 * out[1] + P("a1+a1b1"), 3 * B]
    return out


def test_c06_horofunction_identity():
    t0 = time.time()
    ctx = context(6)
    zs = fillings10()
    probes = [B + t * P(c) for t in (0.5, 2.0) for c in ("a1", "b1", "a2", "b2", "a1a2")]
    worst = max(abs(horofunction(z, x, B, ctx).value - (distance_value(x, z, ctx) - distance_value(B, z, ctx)))
                for z in zs for x in probes)
    record(6, worst <= 1e-9, f"max |Psi_z(x) - (d(x,z)-d(b,z))| = {worst:.2g} over 10x10", t0)


def test_c07_detour_certificates():
    t0 = time.time()
    ctx = context(6)
    inf12 = detour_finite(P("a1"), P("a2"), ctx)
    inf21 = detour_finite(P("a2"), P("a1"), ctx)
    fin = detour_finite(P("a1+a2"), P("2*a1+a2"), ctx)
    pool = ["a1", "a2", "b1", "b2", "a1b1A1B1", "a1+a2", "2*a1+a2", "a1+b2", "a1+a1b1A1B1",
            "3*a1", "a2+b2", "a1+2*a2"]
    pairs = list(itertools.combinations(pool, 2))[:30]
    battery = sum(finite_implies_null_support(P(u), P(v), ctx) for u, v in pairs)
    ok = (inf12.status == inf21.status == "infinite" and inf12.witness is not None
          and inf21.witness is not None and fin.status == "finite" and fin.bound == 2.0 and battery == 30)
    record(7, ok, f"delta(a1,a2) witnesses {inf12.witness}/{inf21.witness}, "
                  f"delta(a1+a2,2a1+a2) sup {fin.bound}, battery {battery}/30", t0)


def test_c08_systole_bound():
    t0 = time.time()
    r = systole_bound_check(P("a1+b1+a1b1"), "a1b1A1B1", context(6))
    record(8, r.ok and r.lhs <= 4 / r.systole + 1e-9,
           f"sup {r.lhs:.4g} <= 4/Syst = {r.rhs:.4g}", t0)


def test_c09_manhattan():
    t0 = time.time()
    ctx = context(6)
    x, y = B, Current.liouville(twist_family(X, 1.0))
    hx, hy = entropy_estimate(x, ctx).value, entropy_estimate(y, ctx).value
    th = np.array([s.theta for s in theta_curve(x, y, np.linspace(0, hy, 7), ctx)])
    e0, e1 = abs(th[0] - hx), abs(th[-1])
    dec = bool(np.all(np.diff(th) < 0))
    convex = max(th[i] - (th[i - 1] + th[i + 1]) / 2 for i in range(1, 6))
    add = [dsym_additivity_check(x, y, a * hy, b * hy, c * hy, ctx)
           for a, b, c in ((0.2, 0.5, 0.8), (0.0, 0.5, 1.0), (0.1, 0.3, 0.9))]
    ok = e0 <= 0.1 * hx and e1 <= 0.1 * hx and dec and convex <= 0.02 * hx and all(a.ok for a in add)
    rel = max(a.defect / a.total for a in add)
    record(9, ok, f"|theta(0)-h|={e0:.3g}, |theta(hy)|={e1:.3g}, convexity excess {convex:.3g}, "
                  f"d_sym additivity {rel:.2%}", t0)


def test_c10_mean_distortion():
    t0 = time.time()
    ctx = context(6)
    fs = fillings10()
    pairs = [(fs[i], fs[(i + 3) % 10]) for i in range(10)]
    margin = min(mean_distortion(u, v, ctx).value - entropy_estimate(u, ctx).value / entropy_estimate(v, ctx).value
                 for u, v in pairs)
    x = fs[3]
    eq = abs(mean_distortion(x, 2 * x, ctx).value
             - entropy_estimate(x, ctx).value / entropy_estimate(2 * x, ctx).value)
    record(10, margin >= -0.05 and eq <= 0.02, f"min tau - h ratio = {margin:.3g}, y=2x gap {eq:.2g}", t0)


def test_c11_anosov():
    t0 = time.time()
    ctx = context(6)
    Y = twist_family(X, 1.0)
    r1, r2 = sym_rep(X, 3), sym_rep(Y, 3)
    l1 = Functional.lambda1(3)
    cross = abs(anosov_distance(r1, r2, l1, ctx) - distance_value(B, Current.liouville(Y), ctx))
    Pm = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]])
    conj = anosov_distance(r1, r1.conjugate(Pm), l1, ctx)
    mono = True
    for w in ("a1", "a1b2", "a1a2B1", "b1A2b2a1"):
        g = parse_word(w)
        M, Mi = evaluate(r1, g), evaluate(r1, inverse(g))
        J = jordan_projection(M, Mi)
        errs = [np.linalg.norm(J - cartan_projection(np.linalg.matrix_power(M, n),
                                                     np.linalg.matrix_power(Mi, n)) / n) for n in (4, 8, 16)]
        mono &= errs[0] >= errs[1] >= errs[2]
    gap = anosov_gap_check(r1, ctx)
    ok = cross <= 1e-6 and abs(conj) <= 1e-10 and mono and all(s > 0 for s in gap.slopes)
    record(11, ok, f"|d^l1 - d| = {cross:.2g}, d(r,PrP^-1) = {conj:.2g}, J-vs-C monotone {mono}, "
                   f"gap slopes {[round(s, 3) for s in gap.slopes]}", t0)


def test_c12_potentials():
    t0 = time.time()
    ctx = context(8)
    g = ball_growth(Potential.word_length(), ctx)
    h = entropy_from_values(ctx.word_lengths.astype(float), ctx.word_lengths, ctx.L).value
    rel = abs(g.slope - h) / h
    r1, l1 = sym_rep(X, 3), Functional.lambda1(3)
    serr = max(abs(anosov_stable_length(r1, l1, c, 32).value - phi_length(r1, l1, c))
               for c in ("a1", "a1b2", "a1a2B1", "b1A2b2a1"))
    record(12, rel <= 0.15 and serr <= 1e-6,
           f"ball growth {g.slope:.4f} vs conjugacy entropy {h:.4f} ({rel:.1%}), stable length error {serr:.2g}",
           t0)


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except AssertionError:
                pass
