"""Cartan and Jordan projections, phi-lengths and the metric d^phi for
representations of the surface group into SL(n,R).

Small singular values and eigenvalue moduli of long products are swamped
by rounding, so projections take the top half of the spectrum from M and
the bottom half from M^-1 (evaluated as a product of inverse letters when
available); the middle entry, for odd n, comes from the zero sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveFunctional, Singular, TrivialWord, ValidationError
from .hyperbolic import FuchsianStructure, evaluate, evaluate_many, lengths
from .metric import TruncationContext, dilation_from_values, entropy_from_values
from .surface import ConjClass, cyclic_canonical, inverse, parse_word, presentation

SINGULAR_TOL = 1e-300


# ---------------------------------------------------------------------------
# representations


def sym_power(M, n: int) -> np.ndarray:
    """Action of a 2x2 matrix on homogeneous polynomials of degree n-1.

    Basis x^(n-1-k) y^k; column j holds the image of x^(n-1-j) y^j under
    x -> a x + c y, y -> b x + d y, which makes the map multiplicative.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    (a, b), (c, d) = np.asarray(M, dtype=float)
    S = np.zeros((n, n))
    for j in range(n):
        p = np.array([1.0])
        for _ in range(n - 1 - j):
            p = np.convolve(p, [a, c])
        for _ in range(j):
            p = np.convolve(p, [b, d])
        S[:, j] = p
    return S


@dataclass(frozen=True, eq=False)
class RepN:
    """Representation of the genus-g surface group into SL(n,R).

    ``letters`` is indexed by letter code like ``FuchsianStructure``;
    ``base`` is set for symmetric powers of a Fuchsian structure and enables
    the exact Jordan fast path.
    """

    n: int
    genus: int
    letters: np.ndarray = field(repr=False)
    label: str = "custom"
    base: FuchsianStructure | None = field(default=None, repr=False)

    def __post_init__(self):
        L = np.asarray(self.letters, dtype=float)
        L.setflags(write=False)
        object.__setattr__(self, "letters", L)

    @classmethod
    def from_generators(cls, gens: dict, label: str = "custom", check: bool = True):
        """Build from ``{"a1": M, ...}`` with |det| rescaled to 1."""
        if not gens:
            raise ValidationError("no generators given")
        genus = len(gens) // 2
        p = presentation(genus)
        first = np.asarray(next(iter(gens.values())), dtype=float)
        n = int(round(math.sqrt(first.size)))
        letters = np.zeros((4 * genus, n, n))
        for name in p.generators:
            if name not in gens:
                raise ValidationError(f"missing generator {name}")
            M = np.asarray(gens[name], dtype=float).reshape(n, n)
            det = np.linalg.det(M)
            if abs(det) < SINGULAR_TOL:
                raise Singular(f"generator {name} is singular")
            M = M / abs(det) ** (1.0 / n)
            (code,) = parse_word(name)
            letters[code] = M
            letters[code ^ 1] = np.linalg.inv(M)
        r = cls(n, genus, letters, label)
        if check:
            r.validate()
        return r

    @property
    def images(self) -> dict:
        p = presentation(self.genus)
        return {name: self.letters[parse_word(name)[0]].copy() for name in p.generators}

    def relator_residual(self) -> float:
        M = evaluate(self, presentation(self.genus).relator)
        I = np.eye(self.n)
        return float(min(np.abs(M - I).max(), np.abs(M + I).max()))

    def validate(self) -> None:
        tol = 1e-6 * self.n ** 2
        res = self.relator_residual()
        if res > tol:
            raise ValidationError(f"relator residual {res:.3g} exceeds {tol:.3g}")

    def conjugate(self, P) -> "RepN":
        """P r P^-1 (the symmetric-power fast path is dropped)."""
        P = np.asarray(P, dtype=float)
        Pi = np.linalg.inv(P)
        return RepN(self.n, self.genus, P @ self.letters @ Pi, f"{self.label}^P")

    def to_json(self) -> dict:
        return {"genus": self.genus, "n": self.n, "label": self.label,
                "generators": {k: [float(v) for v in M.ravel()] for k, M in self.images.items()}}


def rep_from_json(data: dict) -> RepN:
    """Representation file: the hyperbolic schema with n x n entries."""
    try:
        gens = data["generators"]
        label = data.get("label", "custom")
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed representation: {e}") from None
    return RepN.from_generators({k: np.asarray(v, dtype=float) for k, v in gens.items()}, label)


def sym_rep(x: FuchsianStructure, n: int) -> RepN:
    """Composition of a Fuchsian structure with the irreducible SL(2) -> SL(n)."""
    letters = np.stack([sym_power(M, n) for M in x.letters])
    return RepN(n, x.genus, letters, f"sym{n}({x.label})", base=x)


def identity_rep(n: int, genus: int = 2) -> RepN:
    return RepN(n, genus, np.broadcast_to(np.eye(n), (4 * genus, n, n)).copy(), f"trivial{n}")


# ---------------------------------------------------------------------------
# projections


def _split_spectrum(top: np.ndarray, bottom: np.ndarray) -> np.ndarray:
    """Merge log-spectra (sorted decreasing, last axis): top half of ``top``,
    bottom half of ``bottom``, middle from the zero sum."""
    n = top.shape[-1]
    h = n // 2
    out = np.empty(top.shape)
    out[..., :h] = top[..., :h]
    out[..., n - h:] = bottom[..., n - h:]
    if n % 2:
        out[..., h] = -(out[..., :h].sum(-1) + out[..., n - h:].sum(-1))
    else:
        out -= out.mean(-1, keepdims=True)
    return out


def _inv(M, Minv):
    if Minv is not None:
        return np.asarray(Minv, dtype=float)
    M = np.asarray(M, dtype=float)
    if abs(np.linalg.det(M)) < SINGULAR_TOL:
        raise Singular("matrix is singular")
    try:
        return np.linalg.inv(M)
    except np.linalg.LinAlgError:
        raise Singular("matrix is singular") from None


def cartan_projection(M, Minv=None) -> np.ndarray:
    """Sorted logs of singular values, normalised to sum zero."""
    M = np.asarray(M, dtype=float)
    return _cartan_stack(M[None], _inv(M, Minv)[None])[0]


def _cartan_stack(M: np.ndarray, Mi: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(M, compute_uv=False)
    si = np.linalg.svd(Mi, compute_uv=False)
    if np.any(s[..., -1] == 0) or np.any(si[..., -1] == 0):
        raise Singular("matrix is singular")
    return _split_spectrum(np.log(s), -np.log(si)[..., ::-1])


def jordan_projection(M, Minv=None) -> np.ndarray:
    """Sorted logs of eigenvalue moduli, normalised to sum zero."""
    M = np.asarray(M, dtype=float)
    return _jordan_stack(M[None], _inv(M, Minv)[None])[0]


def _jordan_stack(M: np.ndarray, Mi: np.ndarray) -> np.ndarray:
    e = -np.sort(-np.abs(np.linalg.eigvals(M)), axis=-1)
    ei = -np.sort(-np.abs(np.linalg.eigvals(Mi)), axis=-1)
    if np.any(e[..., -1] == 0) or np.any(ei[..., -1] == 0):
        raise Singular("matrix is singular")
    return _split_spectrum(np.log(e), -np.log(ei)[..., ::-1])


def _sym_jordan(ell: np.ndarray, n: int) -> np.ndarray:
    """Jordan vectors of symmetric powers from SL(2) translation lengths."""
    k = np.arange(n)
    return np.outer(ell, (n - 1 - 2 * k) / 2.0)


# ---------------------------------------------------------------------------
# functionals


@dataclass(frozen=True)
class Functional:
    coeffs: tuple
    name: str = "phi"

    def __call__(self, v):
        return np.asarray(v) @ np.asarray(self.coeffs, dtype=float)

    @property
    def n(self) -> int:
        return len(self.coeffs)

    def __mul__(self, a):
        return Functional(tuple(float(a) * c for c in self.coeffs), f"{a:g}*{self.name}")

    __rmul__ = __mul__

    def __neg__(self):
        return Functional(tuple(-c for c in self.coeffs), f"-{self.name}")

    def is_iota_invariant(self) -> bool:
        """phi(-w0 v) = phi(v), i.e. phi(mu(g^-1)) = phi(mu(g))."""
        c = np.asarray(self.coeffs, dtype=float)
        return bool(np.allclose(c - c.mean(), -(c[::-1] - c.mean()), atol=1e-15))

    @staticmethod
    def alpha(i: int, n: int) -> "Functional":
        c = np.zeros(n)
        c[i - 1], c[i] = 1.0, -1.0
        return Functional(tuple(c), f"alpha{i}")

    @staticmethod
    def omega(k: int, n: int) -> "Functional":
        c = np.zeros(n)
        c[:k] = 1.0
        return Functional(tuple(c), f"omega{k}")

    @staticmethod
    def lambda1(n: int) -> "Functional":
        c = np.zeros(n)
        c[0] = 1.0
        return Functional(tuple(c), "lambda1")

    @staticmethod
    def hilbert(n: int) -> "Functional":
        c = np.zeros(n)
        c[0], c[-1] = 1.0, -1.0
        return Functional(tuple(c), "hilbert")

    @staticmethod
    def parse(text: str, n: int) -> "Functional":
        """``lambda1``, ``hilbert``, ``alpha<i>``, ``omega<k>`` or comma-separated coefficients."""
        t = text.strip()
        if t == "lambda1":
            return Functional.lambda1(n)
        if t == "hilbert":
            return Functional.hilbert(n)
        for pre, f in (("alpha", Functional.alpha), ("omega", Functional.omega)):
            if t.startswith(pre) and t[len(pre):].isdigit():
                k = int(t[len(pre):])
                if not 1 <= k <= n - (pre == "alpha"):
                    raise ValidationError(f"{t} out of range for n={n}")
                return f(k, n)
        try:
            c = tuple(float(s) for s in t.split(","))
        except ValueError:
            raise ValidationError(f"unknown functional {text!r}") from None
        if len(c) != n:
            raise ValidationError(f"functional needs {n} coefficients")
        return Functional(c, t)


# ---------------------------------------------------------------------------
# lengths, entropy, distance


def _words(classes):
    return [c.word if isinstance(c, ConjClass) else tuple(c) for c in classes]


def jordan_many(r: RepN, classes) -> np.ndarray:
    """Jordan vectors for a list of classes (rows).

    Each class is evaluated at the cyclic rotation of its word with the
    smallest matrix norm: conjugates share the spectrum, and the one whose
    axis passes closest to the basepoint loses least to cancellation.
    """
    if r.base is not None:
        return _sym_jordan(lengths(r.base, classes), r.n)
    words = _words(classes)
    out = np.empty((len(words), r.n))
    by_len: dict[int, list[int]] = {}
    for i, w in enumerate(words):
        by_len.setdefault(len(w), []).append(i)
    for m, idx in by_len.items():
        if m == 0:
            out[idx] = 0.0
            continue
        arr = np.array([words[i] for i in idx], dtype=np.int64)
        rots = np.stack([np.roll(arr, -k, axis=1) for k in range(m)], axis=1)
        M = evaluate_many(r.letters, [tuple(w) for w in rots.reshape(-1, m)]).reshape(len(idx), m, r.n, r.n)
        best = np.argmin(np.linalg.norm(M, axis=(2, 3)), axis=1)
        Mb = M[np.arange(len(idx)), best]
        chosen = rots[np.arange(len(idx)), best]
        Mi = evaluate_many(r.letters, [inverse(tuple(w)) for w in chosen])
        out[idx] = _jordan_stack(Mb, Mi)
    return out


def phi_length(r: RepN, phi: Functional, c) -> float:
    """phi of the Jordan projection of r(c).

    Words are first reduced to their canonical conjugacy class, so
    conjugates give identical values."""
    if not isinstance(c, ConjClass):
        try:
            c = cyclic_canonical(c, presentation(r.genus))
        except TrivialWord:
            return 0.0
    return float(phi(jordan_many(r, [c])[0]))


def _phi_values(r: RepN, phi: Functional, ctx: TruncationContext) -> np.ndarray:
    if phi.n != r.n:
        raise ValidationError("functional dimension does not match the representation")
    key = ("jordan", id(r))
    J = ctx._values.get(key)
    if J is None:
        J = jordan_many(r, ctx.classes)
        ctx._values[key] = (J, r)  # keep r alive so its id stays unique
    else:
        J = J[0]
    v = phi(J)
    bad = np.nonzero(v <= 0)[0]
    if len(bad):
        raise NonPositiveFunctional(f"{phi.name} is not positive on {ctx.classes[int(bad[0])]}",
                                    witness=ctx.classes[int(bad[0])])
    return v


def phi_entropy(r: RepN, phi: Functional, ctx: TruncationContext):
    """Entropy of the phi-length spectrum, same estimator as for currents."""
    return entropy_from_values(_phi_values(r, phi, ctx), ctx.word_lengths, ctx.L)


@dataclass(frozen=True)
class AnosovDistance:
    value: float
    argmax: ConjClass
    entropy_1: float
    entropy_2: float
    functional: str
    L: int

    def __float__(self):
        return self.value

    def to_json(self):
        return {"value": self.value, "argmaxClass": str(self.argmax), "entropy1": self.entropy_1,
                "entropy2": self.entropy_2, "functional": self.functional, "L": self.L}


def anosov_distance_report(r1: RepN, r2: RepN, phi: Functional, ctx: TruncationContext) -> AnosovDistance:
    v1, v2 = _phi_values(r1, phi, ctx), _phi_values(r2, phi, ctx)
    h1 = entropy_from_values(v1, ctx.word_lengths, ctx.L).value
    h2 = entropy_from_values(v2, ctx.word_lengths, ctx.L).value
    D = dilation_from_values(v1, v2, ctx.classes, ctx.L)
    value = math.log(D.value) + math.log(h2) - math.log(h1)
    return AnosovDistance(value, D.argmax, h1, h2, phi.name, ctx.L)


def anosov_distance(r1: RepN, r2: RepN, phi: Functional, ctx: TruncationContext) -> float:
    """log sup_c h2 l2(c) / (h1 l1(c)) over the curve set."""
    return anosov_distance_report(r1, r2, phi, ctx).value


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class GapReport:
    slopes: tuple
    offsets: tuple
    residuals: tuple
    margin: float
    passes: bool
    L: int

    def to_json(self):
        return {"slopes": list(self.slopes), "offsets": list(self.offsets),
                "residuals": list(self.residuals), "margin": self.margin,
                "passes": self.passes, "L": self.L,
                "note": "linear growth of simple roots is sampled, not certified"}


def cartan_many(r: RepN, words) -> np.ndarray:
    words = _words(words)
    M = evaluate_many(r.letters, words)
    Mi = evaluate_many(r.letters, [inverse(w) for w in words])
    return _cartan_stack(M, Mi)


def anosov_gap_check(r: RepN, ctx: TruncationContext, functionals=None) -> GapReport:
    """Fit alpha_i(mu(r(w))) ~ q_i |w| - C_i over the enumerated words.

    ``offsets`` are the smallest C_i making the bound hold on the data and
    ``margin`` is min_i q_i.  Passes iff every slope is positive.
    """
    fs = functionals or [Functional.alpha(i, r.n) for i in range(1, r.n)]
    mu = cartan_many(r, ctx.classes)
    x = ctx.word_lengths.astype(float)
    slopes, offsets, res = [], [], []
    for f in fs:
        y = f(mu)
        q, c0 = np.polyfit(x, y, 1)
        slopes.append(float(q))
        offsets.append(float(-(y - q * x).min()))
        res.append(float(np.sqrt(np.mean((y - q * x - c0) ** 2))))
    margin = min(slopes)
    return GapReport(tuple(slopes), tuple(offsets), tuple(res), margin, margin > 1e-9, ctx.L)


def limit_cone_sample(r: RepN, ctx: TruncationContext) -> np.ndarray:
    """Unit-normalised Jordan vectors of the enumerated classes (rows)."""
    key = ("jordan", id(r))
    J = ctx._values[key][0] if key in ctx._values else jordan_many(r, ctx.classes)
    norms = np.linalg.norm(J, axis=1)
    return J / norms[:, None]


@dataclass(frozen=True)
class DualConeReport:
    passes: bool
    min_value: float
    witness: object
    samples: int

    def __bool__(self):
        return self.passes

    def to_json(self):
        return {"passes": self.passes, "minValue": self.min_value,
                "witness": None if self.witness is None else str(self.witness),
                "samples": self.samples,
                "note": "evidence from sampled Jordan directions only"}


def dual_cone_test(samples: np.ndarray, phi: Functional, classes=None) -> DualConeReport:
    """phi > 0 on every sampled direction."""
    v = phi(samples)
    j = int(np.argmin(v))
    w = classes[j] if classes is not None else j
    return DualConeReport(bool(v[j] > 0), float(v[j]), None if v[j] > 0 else w, len(v))


def busemann_potential(r: RepN, phi: Functional, g) -> float:
    """psi(g) = phi(mu(r(g)))."""
    if isinstance(g, str):
        g = parse_word(g, r.genus) if g else ()
    g = tuple(g)
    if not g:
        return 0.0
    M = evaluate(r, g)
    Mi = evaluate(r, inverse(g))
    return float(phi(cartan_projection(M, Mi)))


def busemann_power(r: RepN, phi: Functional, g, N: int) -> float:
    """psi(g^N) with the power taken by matrix powers."""
    g = tuple(parse_word(g, r.genus) if isinstance(g, str) else g)
    M = np.linalg.matrix_power(evaluate(r, g), N)
    Mi = np.linalg.matrix_power(evaluate(r, inverse(g)), N)
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(Mi))):
        raise ValidationError("matrix power overflowed; use a smaller N")
    return float(phi(cartan_projection(M, Mi)))


__all__ = [
    "AnosovDistance",
    "DualConeReport",
    "Functional",
    "GapReport",
    "RepN",
    "anosov_distance",
    "anosov_distance_report",
    "anosov_gap_check",
    "busemann_potential",
    "busemann_power",
    "cartan_many",
    "cartan_projection",
    "dual_cone_test",
    "identity_rep",
    "jordan_many",
    "jordan_projection",
    "limit_cone_sample",
    "phi_entropy",
    "phi_length",
    "rep_from_json",
    "sym_power",
    "sym_rep",
]
