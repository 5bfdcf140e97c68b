import itertools

import numpy as np
import pytest

from currentlab.boundary import (
    DEFAULT_T_GRID,
    detour_cost,
    detour_finite,
    finite_implies_null_support,
    horofunction,
    minimality_probe,
    recheck_witness,
    symmetrized_detour,
    systole_bound_check,
)
from currentlab.currents import Current
from currentlab.errors import NonFillingInput, ValidationError
from currentlab.hyperbolic import bolza_structure, twist_family
from currentlab.metric import TruncationContext, distance_value

X = bolza_structure()
B = Current.liouville(X)
Y = Current.liouville(twist_family(X, 1.0))
P = Current.parse


@pytest.fixture(scope="module")
def ctx():
    return TruncationContext(5)


def _fillings():
    return [
        Y,
        P("a1+b1+a2+b2") + B,
        P("a1+b1+a2+b2+a1a2") + 0.3 * Y,
        2 * B + P("a1b1A1B1"),
        Current.liouville(twist_family(X, -0.6)) + P("a2"),
    ]


def test_horofunction_identity(ctx):
    for z in _fillings():
        for x in _fillings()[::-1]:
            psi = horofunction(z, x, B, ctx).value
            assert psi == pytest.approx(distance_value(x, z, ctx) - distance_value(B, z, ctx), abs=1e-9)
        assert horofunction(z, B, B, ctx).value == pytest.approx(0, abs=1e-12)


def test_horofunction_scale_invariance(ctx):
    z = P("a1+a2")
    for x in _fillings():
        assert horofunction(7 * z, x, B, ctx).value == pytest.approx(horofunction(z, x, B, ctx).value, abs=1e-13)


def test_horofunction_errors(ctx):
    with pytest.raises(NonFillingInput):
        horofunction(Y, P("a1"), B, ctx)
    with pytest.raises(ValidationError):
        horofunction(Y, Y, 2 * B + P("a1"), ctx)


def test_horofunction_injective_on_family(ctx):
    zs = [P("a1"), P("a2"), P("a1+a2"), P("a1b1A1B1"), Y, P("a1+b1+a2+b2")]
    probes = _fillings() + [B + t * P(c) for t in (0.5, 2.0) for c in ("a1", "b1", "a2", "b2", "a1a2")]
    vecs = [np.array([horofunction(z, x, B, ctx).value for x in probes]) for z in zs]
    for u, v in itertools.combinations(vecs, 2):
        assert np.abs(u - v).max() > 1e-6


def test_detour_finite_examples(ctx):
    r = detour_finite(P("a1"), P("a1"), ctx)
    assert r.status == "finite" and r.bound == 1.0
    r = detour_finite(P("a1"), P("a2"), ctx)
    assert r.status == "infinite" and str(r.witness) == "b2"
    j = ctx.classes.index(r.witness)
    assert ctx.values(P("a1"))[j] == 0 and ctx.values(P("a2"))[j] == 1
    r = detour_finite(P("a1+a2"), P("2*a1+a2"), ctx)
    assert r.status == "finite" and r.bound == 2.0
    j = ctx.classes.index(r.witness)
    assert ctx.values(P("2*a1+a2"))[j] / ctx.values(P("a1+a2"))[j] == 2.0
    b1 = ctx.classes.index(P("b1").atoms[0].curve)
    assert ctx.values(P("2*a1+a2"))[b1] / ctx.values(P("a1+a2"))[b1] == 2.0


def test_witness_survives_larger_L(ctx):
    r = detour_finite(P("a1"), P("a2"), ctx)
    assert recheck_witness(r, P("a1"), P("a2"), 6)


def test_detour_cost_trends(ctx):
    same = detour_cost(P("a1"), P("a1"), B, ctx)
    vals = [v for _, v in same.samples]
    assert [t for t, _ in same.samples] == list(DEFAULT_T_GRID)
    assert max(vals) < 1e-9 and same.bound <= vals[0]
    assert np.all(np.diff(vals) <= 1e-12)
    div = detour_cost(P("a1"), P("a2"), B, ctx)
    dv = [v for _, v in div.samples]
    assert div.status == "infinite"
    assert np.all(np.diff(dv) > 0) and dv[-1] > dv[0] + 3
    sc = detour_cost(P("a1"), P("3*a2"), B, ctx)
    assert np.allclose([v for _, v in sc.samples], dv, atol=1e-12)


def test_symmetrized_detour(ctx):
    d = symmetrized_detour(P("a1"), P("a2"), B, ctx)
    assert d.status == "infinite"
    f = symmetrized_detour(P("a1+a2"), P("2*a1+a2"), B, ctx)
    assert f.status == "finite"
    for u, v in (("a1", "a2"), ("a1+a2", "2*a1+a2"), ("a1", "a1+b2"), ("a1b1A1B1", "a1")):
        assert symmetrized_detour(P(u), P(v), B, ctx).status == symmetrized_detour(P(v), P(u), B, ctx).status


def test_minimality_simple(ctx):
    rep = minimality_probe(P("a1"), ctx)
    assert rep.survivors
    for s in rep.survivors:
        assert {str(a) for a in s.atoms} == {"a1"}
    assert any(str(c) == "a2" for c, _ in rep.rejected)


def test_minimality_nonminimal(ctx):
    eta = P("a1+a1b1A1B1")
    rep = minimality_probe(eta, ctx)
    weighted = [s for s in rep.survivors if len(s.terms) == 2]
    assert len(weighted) >= 3
    for s in weighted:
        assert {str(a) for a in s.atoms} == {"a1", "a1b1A1B1"}


def test_minimality_rejects_with_witness(ctx):
    rep = minimality_probe(P("a2"), ctx, pool=[P("a1"), P("3*a2")])
    assert [str(s) for s in rep.survivors] == [str(P("3*a2"))]
    (cand, wit), = rep.rejected
    assert str(cand) == "a1" and wit is not None
    with pytest.raises(ValidationError):
        minimality_probe(B, ctx)


def test_systole_bound(ctx):
    eta = P("a1+b1+a1b1")
    r = systole_bound_check(eta, "a1b1A1B1", ctx)
    assert r.ok and r.lhs <= r.rhs + 1e-9
    r3 = systole_bound_check(3 * eta, "a1b1A1B1", ctx)
    assert r3.lhs == pytest.approx(r.lhs / 3, rel=1e-12)
    assert r3.rhs == pytest.approx(r.rhs / 3, rel=1e-12)
    with pytest.raises(ValidationError):
        systole_bound_check(eta, "a1a2", ctx)


def test_finite_implies_null_support(ctx):
    pool = ["a1", "a2", "b1", "b2", "a1b1A1B1", "a1+a2", "2*a1+a2", "a1+b2", "a1+a1b1A1B1",
            "3*a1", "a2+b2", "a1+2*a2"]
    pairs = list(itertools.combinations(pool, 2))[:30]
    assert len(pairs) == 30
    for u, v in pairs:
        assert finite_implies_null_support(P(u), P(v), ctx)
