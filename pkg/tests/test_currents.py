import json

import numpy as np
import pytest

from currentlab.currents import (
    Current,
    e_set,
    engine_for,
    filling_probe,
    geometric_intersection,
    intersect,
    intersect_many,
    lamination_part,
    null_support_equal,
    self_intersection,
    FillingEvidence,
    NonFillingWitness,
)
from currentlab.errors import NotMulticurve, ValidationError
from currentlab.hyperbolic import bolza_structure, class_length, twist_family
from currentlab.surface import ConjClass, enumerate_conjugacy, format_word, presentation, random_word

from oracles import brute_intersection, brute_self_intersection

X = bolza_structure()
Y = twist_family(X, 0.7)
C = ConjClass.of


@pytest.mark.parametrize("ref", [X, Y], ids=["bolza", "twist"])
@pytest.mark.parametrize("c1,c2,want", [
    ("a1", "b1", 1), ("a1", "a2", 0), ("a1", "a1b1A1B1", 0), ("b1", "a1b1A1B1", 0),
    ("a1a1", "b1", 2), ("a1", "a1a1", 0), ("a1", "b2", 0), ("a2", "b2", 1),
])
def test_battery(ref, c1, c2, want):
    rep = geometric_intersection(c1, c2, ref)
    assert rep.count == want and rep.stable
    assert rep.counts[-1] == rep.counts[-2]
    assert engine_for(ref).pair(C(c1), C(c2)) == want


@pytest.mark.parametrize("ref", [X, Y], ids=["bolza", "twist"])
@pytest.mark.parametrize("w,want", [
    ("a1", 0), ("a1b1A1B1", 0), ("a1a2", 0), ("a1b1a2b2", 0), ("a1b1A1b1", 1), ("a1a1", 0),
])
def test_self_intersection(ref, w, want):
    assert self_intersection(w, ref) == want


def test_equal_classes_rejected():
    with pytest.raises(ValidationError):
        geometric_intersection("a1", "A1")


def test_self_intersection_matches_oracle():
    assert brute_self_intersection(X, C("a1b1A1b1"), 5) == 1
    assert brute_self_intersection(X, C("a1b1A1B1"), 5) == 0


def _random_pairs(n, seed, maxlen=3):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        w1 = random_word(rng, int(rng.integers(1, maxlen + 1)))
        w2 = random_word(rng, int(rng.integers(1, maxlen + 1)))
        try:
            out.append((C(format_word(w1)), C(format_word(w2))))
        except Exception:
            continue
    return out


@pytest.mark.parametrize("c1,c2", _random_pairs(25, 5))
def test_oracle_agreement(c1, c2):
    want = brute_intersection(X, c1, c2, 5)
    eng = engine_for(X)
    if c1 == c2:
        assert 2 * self_intersection(c1, X) == want
    else:
        assert eng.pair(c1, c2) == want
        assert geometric_intersection(c1, c2, X).count == want


def test_oracle_stable_in_radius():
    for c1, c2 in [(C("b1b1B2"), C("b1b1a2")), (C("a1A2b1"), C("a1b2b2"))]:
        assert brute_intersection(X, c1, c2, 5) == brute_intersection(X, c1, c2, 6)


def test_symmetry_and_reference_independence():
    classes = enumerate_conjugacy(presentation(2), 4)
    rng = np.random.default_rng(1)
    sample = [classes[i] for i in rng.choice(len(classes), 25, replace=False)]
    ex, ey = engine_for(X), engine_for(Y)
    M = np.array([ex.against(c, sample) for c in sample])
    assert np.array_equal(M, M.T)
    My = np.array([ey.against(c, sample) for c in sample])
    assert np.array_equal(M, My)


def test_chord_and_linking_paths_agree():
    eng = engine_for(X)
    for c1, c2 in _random_pairs(20, 9, maxlen=5):
        n, amb = eng._chord_pair(c1, c2)
        if c1 != c2 and not amb:
            assert eng.linking(c1, c2).count == n


@pytest.mark.parametrize("w1,w2", [("a1", "b1"), ("a1b2", "b1"), ("a1b1A1b1", "a2")])
def test_power_law(w1, w2):
    base = geometric_intersection(w1, w2).count
    for n in (2, 3):
        assert geometric_intersection(C(w1).power(n), w2).count == n * base


def test_intersect_linear():
    assert intersect(Current.parse("2*a1 + b2"), "b1") == 2
    assert intersect(Current.liouville(X), "a1a2") == pytest.approx(class_length(X, C("a1a2")), rel=1e-14)
    x = Current.parse("2*a1 + b2 + 0.5*L(bolza)")
    y = Current.parse("a1b1 + a2")
    for c in ["b1", "a1a2", "a1b1A1b1"]:
        assert intersect(x + y, c) == pytest.approx(intersect(x, c) + intersect(y, c), rel=1e-15)
        assert intersect(3 * x, c) == pytest.approx(3 * intersect(x, c), rel=1e-15)
    classes = enumerate_conjugacy(presentation(2), 3)
    v = intersect_many(x, classes)
    assert np.allclose(v, [intersect(x, c) for c in classes], rtol=1e-14, atol=0)


def test_current_algebra_and_json():
    x = Current.parse("b1 + 2*a1 + A1")
    assert str(x) == "3*a1 + b1"
    assert Current.from_json(json.loads(json.dumps(x.to_json()))) == x
    z = Current.parse("0.5*L(bolza+twist(0.7)) + a2")
    assert Current.from_json(z.to_json()) == z
    with pytest.raises(ValidationError):
        Current.parse("-1*a1")
    with pytest.raises(ValidationError):
        Current.from_json([{"weight": 1, "atom": {"knot": "a1"}}])


def test_filling_probe():
    ev = filling_probe(Current.liouville(X), 8)
    assert isinstance(ev, FillingEvidence)
    assert ev.min_value == pytest.approx(2 * np.arccosh(1 + np.sqrt(2)), abs=1e-9)
    w = filling_probe(Current.curve("a1"), 4)
    assert isinstance(w, NonFillingWitness)
    assert intersect(Current.curve("a1"), w.witness) == 0
    res = filling_probe(Current.parse("a1 + b1 + a2 + b2 + a1a2"), 6)
    vals = intersect_many(Current.parse("a1 + b1 + a2 + b2 + a1a2"),
                          enumerate_conjugacy(presentation(2), 6))
    assert isinstance(res, NonFillingWitness) == bool((vals == 0).any())


def test_e_set():
    # a1a2 crosses [a1,b1] twice but misses a1, so the handle boundary is not
    # in E(a1); the annulus around a1 is bounded by a1 itself
    assert brute_intersection(X, C("a1"), C("a1a2"), 5) == 0
    assert brute_intersection(X, C("a1b1A1B1"), C("a1a2"), 5) == 2
    assert e_set(Current.curve("a1"), 4).classes == (C("a1"),)
    E = e_set(Current.parse("a1 + b1"), 4)
    assert C("a1b1A1B1") in E
    assert E.L == 4
    for c in E:
        assert self_intersection(c) == 0
        for d in E:
            if c != d:
                assert geometric_intersection(c, d).count == 0
    assert e_set(Current.parse("2*a1 + 2*b1"), 4).classes == E.classes


def test_lamination_part():
    x = Current.parse("a1 + a2")
    assert lamination_part(x).lamination == x
    s = Current.curve("a1b1A1b1")
    assert lamination_part(s).lamination.is_zero()
    y = Current.parse("a1 + b1")
    split = lamination_part(y)
    assert split.lamination.is_zero() and split.remainder == y
    with pytest.raises(NotMulticurve):
        lamination_part(Current.liouville(X))


def test_null_support():
    assert null_support_equal(Current.curve("a1"), Current.curve("a1", 3.0), 4)
    res = null_support_equal(Current.curve("a1"), Current.curve("a2"), 4)
    assert not res
    w = res.witness
    assert (intersect(Current.curve("a1"), w) == 0) != (intersect(Current.curve("a2"), w) == 0)
    assert null_support_equal(Current.liouville(X), Current.liouville(Y), 4)
