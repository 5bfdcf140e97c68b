import json
import math

import numpy as np
import pytest

from currentlab.anosov import (
    Functional,
    RepN,
    anosov_distance,
    anosov_distance_report,
    anosov_gap_check,
    busemann_potential,
    busemann_power,
    cartan_projection,
    dual_cone_test,
    identity_rep,
    jordan_many,
    jordan_projection,
    limit_cone_sample,
    phi_entropy,
    phi_length,
    rep_from_json,
    sym_power,
    sym_rep,
)
from currentlab.currents import Current
from currentlab.errors import NonPositiveFunctional, Singular, ValidationError
from currentlab.hyperbolic import bolza_structure, class_length, twist_family
from currentlab.metric import TruncationContext, distance_value, entropy_estimate
from currentlab.surface import parse_word

X = bolza_structure()
Y = twist_family(X, 1.0)
R1 = sym_rep(X, 3)
L1 = Functional.lambda1(3)
P = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]])


@pytest.fixture(scope="module")
def ctx():
    return TruncationContext(5)


def _loxodromic(rng, n=3):
    Q = rng.normal(size=(n, n))
    D = np.diag(np.exp(np.sort(rng.uniform(-1, 1, n))[::-1] * 0.5))
    M = Q @ D @ np.linalg.inv(Q)
    return M / abs(np.linalg.det(M)) ** (1 / n)


def test_cartan_examples():
    assert np.array_equal(cartan_projection(np.eye(3)), np.zeros(3))
    e = math.e
    assert np.allclose(cartan_projection(np.diag([e ** -2, 1, e ** 2])), [2, 0, -2], atol=1e-14)
    Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(4, 4)))
    assert np.allclose(cartan_projection(Q), 0, atol=1e-12)
    with pytest.raises(Singular):
        cartan_projection(np.zeros((3, 3)))


def test_jordan_examples():
    U = np.array([[1.0, 3.0, 1.0], [0.0, 1.0, 5.0], [0.0, 0.0, 1.0]])
    assert np.allclose(jordan_projection(U), 0, atol=1e-12)
    D = np.diag([0.5, 4.0, 0.5])
    assert np.allclose(jordan_projection(D), cartan_projection(D), atol=1e-14)
    with pytest.raises(Singular):
        jordan_projection(np.diag([1.0, 0.0, 1.0]))


def test_projection_invariants():
    rng = np.random.default_rng(1)
    for _ in range(20):
        M = rng.normal(size=(4, 4))
        M /= abs(np.linalg.det(M)) ** 0.25
        for v in (cartan_projection(M), jordan_projection(M)):
            assert abs(v.sum()) <= 1e-9 and np.all(np.diff(v) <= 1e-12)
        mu = cartan_projection(M)
        for k in range(1, 4):
            # exterior power norm = product of the top k singular values
            s = np.linalg.svd(M, compute_uv=False)
            assert Functional.omega(k, 4)(mu) == pytest.approx(np.log(np.prod(s[:k])), abs=1e-6)


def test_jordan_cartan_convergence():
    rng = np.random.default_rng(2)
    for _ in range(10):
        M = _loxodromic(rng)
        J = jordan_projection(M)
        errs = [np.linalg.norm(J - cartan_projection(np.linalg.matrix_power(M, n)) / n) for n in (4, 8, 16)]
        assert errs[0] >= errs[1] >= errs[2]


def test_sym_power():
    rng = np.random.default_rng(3)
    A, B = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    assert np.array_equal(sym_power(A, 2), A)
    for n in (3, 4, 5):
        assert np.allclose(sym_power(A @ B, n), sym_power(A, n) @ sym_power(B, n), atol=1e-12)
    ell = 1.3
    D = np.diag([math.exp(ell / 2), math.exp(-ell / 2)])
    for n in (3, 4, 5):
        J = jordan_projection(sym_power(D, n))
        assert np.allclose(J, [(n - 1 - 2 * k) * ell / 2 for k in range(n)], atol=1e-12)
        for i in range(1, n):
            assert Functional.alpha(i, n)(J) == pytest.approx(ell, abs=1e-12)


def test_rep_validation(tmp_path):
    assert R1.relator_residual() <= 1e-6 * 9
    data = R1.to_json()
    p = tmp_path / "r.json"
    p.write_text(json.dumps(data))
    r = rep_from_json(json.loads(p.read_text()))
    assert r.n == 3 and np.allclose(r.letters, R1.letters, atol=1e-12)
    bad = dict(data, generators=dict(data["generators"], a1=list(np.eye(3).ravel() * 2)))
    with pytest.raises(ValidationError):
        rep_from_json(bad)


def test_phi_length():
    for c in ("a1", "a1b2", "a1a2B1"):
        w = parse_word(c)
        assert phi_length(R1, L1, c) == pytest.approx(class_length(X, w), rel=1e-14)
        conj = parse_word("b2") + w + parse_word("B2")
        assert phi_length(R1, L1, conj) == phi_length(R1, L1, w)
        assert phi_length(R1, L1, w + w) == pytest.approx(2 * phi_length(R1, L1, w), abs=1e-9)
    generic = RepN(3, 2, R1.letters)
    for c in ("a1b2", "a1b1b1A2A2B2"):
        assert phi_length(generic, L1, c) == pytest.approx(phi_length(R1, L1, c), rel=1e-11)


def test_phi_entropy(ctx):
    h = phi_entropy(R1, L1, ctx).value
    assert h == pytest.approx(entropy_estimate(Current.liouville(X), ctx).value, rel=1e-12)
    assert phi_entropy(R1, 2.5 * L1, ctx).value * 2.5 == pytest.approx(h, rel=1e-12)
    assert phi_entropy(R1, Functional.hilbert(3), ctx).value == pytest.approx(h / 2, rel=1e-12)
    with pytest.raises(NonPositiveFunctional) as e:
        phi_entropy(R1, -L1, ctx)
    assert e.value.witness is not None


def test_anosov_distance(ctx):
    R2 = sym_rep(Y, 3)
    assert anosov_distance(R1, R1, L1, ctx) == 0.0
    d = anosov_distance(R1, R2, L1, ctx)
    dm = distance_value(Current.liouville(X), Current.liouville(Y), ctx)
    assert abs(d - dm) <= 1e-6
    assert abs(anosov_distance(R1, R1.conjugate(P), L1, ctx)) <= 1e-10
    rep = anosov_distance_report(R1, R2, L1, ctx).to_json()
    assert rep["L"] == 5 and rep["functional"] == "lambda1"


def test_anosov_triangle(ctx):
    reps = [sym_rep(twist_family(X, s), 3) for s in (-1.0, 0.0, 0.5, 1.5)]
    for a in reps:
        for b in reps:
            for c in reps:
                lhs = anosov_distance(a, c, L1, ctx)
                assert lhs <= anosov_distance(a, b, L1, ctx) + anosov_distance(b, c, L1, ctx) + 1e-12


def test_gap_check(ctx):
    rep = anosov_gap_check(R1, ctx)
    assert rep.passes and all(s > 0 for s in rep.slopes)
    triv = anosov_gap_check(identity_rep(3), ctx)
    assert not triv.passes and np.allclose(triv.slopes, 0)
    # the top weight doubles from n=2 to n=3 (lambda1 = l/2 versus l)
    w2 = anosov_gap_check(sym_rep(X, 2), ctx, [Functional.omega(1, 2)]).slopes[0]
    w3 = anosov_gap_check(R1, ctx, [Functional.omega(1, 3)]).slopes[0]
    assert w3 / w2 == pytest.approx(2.0, rel=0.05)


def test_limit_cone(ctx):
    S = limit_cone_sample(R1, ctx)
    assert np.allclose(S, np.array([1, 0, -1]) / math.sqrt(2), atol=1e-12)
    assert dual_cone_test(S, L1)
    neg = dual_cone_test(S, -L1, ctx.classes)
    assert not neg and neg.witness is not None
    assert dual_cone_test(S, Functional.alpha(1, 3))


def test_busemann_potential():
    assert busemann_potential(R1, L1, "") == 0.0
    for c in ("a1b2", "a1a2B1"):
        ell = phi_length(R1, L1, c)
        errs = [abs(busemann_power(R1, L1, c, n) / n - ell) for n in (4, 8, 16)]
        assert errs[0] > errs[1] > errs[2]
    jm = jordan_many(R1, [parse_word("a1")])
    assert jm.shape == (1, 3)


def test_busemann_linear_growth():
    rng = np.random.default_rng(4)
    from currentlab.surface import geodesic_normal_form, presentation, random_word

    p = presentation(2)
    xs, ys = [], []
    for _ in range(200):
        w = geodesic_normal_form(random_word(rng, int(rng.integers(1, 10))), p)
        if w:
            xs.append(len(w))
            ys.append(busemann_potential(R1, L1, w))
    assert np.polyfit(xs, ys, 1)[0] > 0


def test_functional_parse():
    assert Functional.parse("alpha2", 3).coeffs == (0.0, 1.0, -1.0)
    assert Functional.parse("1,0,-1", 3) == Functional.hilbert(3).__class__((1.0, 0.0, -1.0), "1,0,-1")
    assert Functional.hilbert(3).is_iota_invariant()
    assert not L1.is_iota_invariant()
    with pytest.raises(ValidationError):
        Functional.parse("alpha3", 3)
    with pytest.raises(ValidationError):
        Functional.parse("bogus", 3)
