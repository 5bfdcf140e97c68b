"""PSL(2,R) machinery: Fuchsian structures, translation lengths and axes.

A ``FuchsianStructure`` stores one unit-determinant 2x2 real matrix per
letter code (inverses included) so that words evaluate by plain products.
Matrices act on the upper half-plane by Mobius transformations and are
taken up to sign.
"""

from __future__ import annotations

import json
import re
import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath as mp
import numpy as np

from .errors import NotHyperbolic, ValidationError
from .surface import ConjClass, Word, format_word, parse_word, presentation

HYPERBOLIC_TOL = 1e-12
RELATOR_TOL = 1e-9


def normalize_sign(M: np.ndarray) -> np.ndarray:
    """Representative of ``+-M`` with nonnegative trace.

    When the trace is numerically zero the first entry of magnitude above
    1e-12 is made positive.
    """
    M = np.asarray(M, dtype=float)
    tr = M[0, 0] + M[1, 1]
    if abs(tr) > 1e-12:
        return M if tr > 0 else -M
    for v in M.ravel():
        if abs(v) > 1e-12:
            return M if v > 0 else -M
    return M


def normalize_det(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    det = np.linalg.det(M)
    if det <= 0:
        raise ValidationError("matrix must have positive determinant")
    return M / math.sqrt(det)


def inverse2(M: np.ndarray) -> np.ndarray:
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])


@dataclass(frozen=True, eq=False)
class FuchsianStructure:
    """Marked hyperbolic structure given by generator matrices.

    ``letters`` has shape ``(4g, 2, 2)`` and is indexed by letter code.
    Discreteness is evidenced by the relator residual and trace checks, not
    certified.
    """

    genus: int
    letters: np.ndarray = field(repr=False)
    label: str = "custom"

    def __post_init__(self):
        L = np.asarray(self.letters, dtype=float)
        L.setflags(write=False)
        object.__setattr__(self, "letters", L)

    @classmethod
    def from_generators(cls, gens: dict, label: str = "custom", check: bool = True):
        """Build from ``{"a1": M, "b1": M, ...}`` (2x2 arrays, determinant rescaled to 1)."""
        if not gens:
            raise ValidationError("no generators given")
        genus = len(gens) // 2
        p = presentation(genus)
        letters = np.zeros((4 * genus, 2, 2))
        for name in p.generators:
            if name not in gens:
                raise ValidationError(f"missing generator {name}")
            M = normalize_det(np.asarray(gens[name], dtype=float).reshape(2, 2))
            (code,) = parse_word(name)
            letters[code] = M
            letters[code ^ 1] = inverse2(M)
        x = cls(genus, letters, label)
        if check:
            x.validate()
        return x

    def generator_matrices(self) -> dict:
        p = presentation(self.genus)
        return {name: self.letters[parse_word(name)[0]].copy() for name in p.generators}

    def relator_residual(self) -> float:
        M = evaluate(self, presentation(self.genus).relator)
        return float(np.abs(M - np.eye(2)).max())

    def validate(self) -> None:
        res = self.relator_residual()
        if res > RELATOR_TOL:
            raise ValidationError(f"relator residual {res:.3g} exceeds {RELATOR_TOL}")
        for name, M in self.generator_matrices().items():
            if abs(np.trace(M)) <= 2 + HYPERBOLIC_TOL:
                raise ValidationError(f"generator {name} is not hyperbolic")

    def to_json(self) -> dict:
        return {
            "genus": self.genus,
            "label": self.label,
            "generators": {k: [float(v) for v in M.ravel()] for k, M in self.generator_matrices().items()},
        }


def evaluate(x, w: Word) -> np.ndarray:
    """Product of the letter images along ``w``, sign-normalised (trace >= 0)."""
    M = np.eye(x.letters.shape[-1])
    for c in w:
        M = M @ x.letters[c]
    if M.shape == (2, 2):
        return normalize_sign(M)
    return M


def evaluate_many(letters: np.ndarray, words) -> np.ndarray:
    """Batched products for a list of words; returns an array of matrices.

    Words are grouped by length and multiplied position by position, which
    keeps the work in numpy.  Signs are not normalised.
    """
    words = list(words)
    d = letters.shape[-1]
    out = np.empty((len(words), d, d))
    by_len: dict[int, list[int]] = {}
    for i, w in enumerate(words):
        by_len.setdefault(len(w), []).append(i)
    for n, idx in by_len.items():
        if n == 0:
            out[idx] = np.eye(d)
            continue
        arr = np.array([words[i] for i in idx], dtype=np.int64)
        M = letters[arr[:, 0]].copy()
        for j in range(1, n):
            M = M @ letters[arr[:, j]]
        out[idx] = M
    return out


def abs_traces(x: FuchsianStructure, classes) -> np.ndarray:
    mats = evaluate_many(x.letters, [c.word if isinstance(c, ConjClass) else c for c in classes])
    return np.abs(mats[:, 0, 0] + mats[:, 1, 1])


def length_from_trace(tr) -> np.ndarray:
    tr = np.abs(np.asarray(tr, dtype=float))
    return 2.0 * np.arccosh(np.maximum(tr, 2.0) / 2.0)


def translation_length(M: np.ndarray) -> float:
    """Hyperbolic translation length ``2 arccosh(|tr|/2)``."""
    tr = abs(float(M[0, 0] + M[1, 1]))
    if tr <= 2 + HYPERBOLIC_TOL:
        raise NotHyperbolic(f"|trace| = {tr} is not > 2")
    return 2.0 * math.acosh(tr / 2.0)


def lengths(x: FuchsianStructure, classes) -> np.ndarray:
    """Translation lengths of a list of classes (vectorised)."""
    return length_from_trace(abs_traces(x, classes))


def class_length(x: FuchsianStructure, c) -> float:
    w = c.word if isinstance(c, ConjClass) else c
    return translation_length(evaluate(x, w))


def _proj(v) -> float:
    return math.inf if abs(v[1]) < 1e-300 else float(v[0] / v[1])


def fixed_vectors(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit eigenvectors (attracting, repelling) of a hyperbolic 2x2 matrix."""
    M = normalize_sign(M)
    a, b, c, d = M.ravel()
    tr = a + d
    if abs(tr) <= 2 + HYPERBOLIC_TOL:
        raise NotHyperbolic(f"|trace| = {abs(tr)} is not > 2")
    disc = math.sqrt(tr * tr - 4.0)
    lam_big = (tr + disc) / 2.0
    lam_small = 1.0 / lam_big
    vecs = []
    for lam in (lam_big, lam_small):
        # (M - lam) v = 0: pick the better-conditioned row
        r1 = (a - lam, b)
        r2 = (c, d - lam)
        r = r1 if abs(r1[0]) + abs(r1[1]) >= abs(r2[0]) + abs(r2[1]) else r2
        v = np.array([-r[1], r[0]], dtype=float)
        vecs.append(v / np.linalg.norm(v))
    return vecs[0], vecs[1]


def axis_endpoints(M: np.ndarray) -> tuple[float, float]:
    """Attracting and repelling fixed points on R u {inf}."""
    att, rep = fixed_vectors(M)
    return _proj(att), _proj(rep)


def mobius(M: np.ndarray, z):
    if z == math.inf:
        return math.inf if M[1, 0] == 0 else M[0, 0] / M[1, 0]
    den = M[1, 0] * z + M[1, 1]
    if den == 0:
        return math.inf
    return (M[0, 0] * z + M[0, 1]) / den


# ---------------------------------------------------------------------------
# built-in structures

# Symplectic basis of the Bolza group by systoles, written in the four
# opposite-side pairings x1..x4 of the regular octagon (x_k maps side k to
# side k+4).  These satisfy x1 X2 x3 X4 X1 x2 X3 x4 = 1 and the words below
# satisfy [a1,b1][a2,b2] = 1 and generate the group.
_BOLZA_BASIS = {"a1": (1,), "b1": (-2,), "a2": (-3, 4), "b2": (1, -2, 3)}


def _octagon_pairings() -> dict:
    r_in = mp.acosh(1 + mp.sqrt(2))
    t = mp.tanh(r_in / 2)
    halfturn0 = mp.matrix([[1j, 0], [0, -1j]])
    out = {}
    for k in range(4):
        p = t * mp.expjpi(mp.mpf(2 * (k + 4)) / 8)
        s = 1 / mp.sqrt(1 - abs(p) ** 2)
        T = mp.matrix([[s, s * p], [s * mp.conj(p), s]])
        H = T * halfturn0 * T ** -1
        out[k + 1] = H * halfturn0
    return out


@lru_cache(maxsize=None)
def bolza_structure() -> FuchsianStructure:
    """Bolza surface from the regular octagon with angles pi/4, centred at i."""
    # 50-digit arithmetic so the float generators satisfy the relator to
    # rounding level; tilings built from them inherit that accuracy
    gens = {}
    with mp.workdps(50):
        pair = _octagon_pairings()
        # disk -> upper half-plane conjugation
        C = mp.matrix([[1, -1j], [1, 1j]])
        Ci = C ** -1
        for name, w in _BOLZA_BASIS.items():
            M = mp.eye(2)
            for k in w:
                M = M * (pair[k] if k > 0 else pair[-k] ** -1)
            R = Ci * M * C
            if max(abs(mp.im(R[i, j])) for i in range(2) for j in range(2)) > 1e-30:
                raise AssertionError("Bolza generator not real after conjugation")
            R = np.array([[float(mp.re(R[i, j])) for j in range(2)] for i in range(2)])
            gens[name] = normalize_sign(R)
    return FuchsianStructure.from_generators(gens, label="bolza")


def translation_along(M: np.ndarray, s: float) -> np.ndarray:
    """Pure translation of displacement ``s`` along the axis of hyperbolic ``M``."""
    att, rep = fixed_vectors(M)
    P = np.column_stack([att, rep])
    P = P / math.sqrt(abs(np.linalg.det(P)))
    D = np.diag([math.exp(s / 2.0), math.exp(-s / 2.0)])
    return P @ D @ np.linalg.inv(P)


def twist_family(x: FuchsianStructure, s: float) -> FuchsianStructure:
    """Twist the second handle by ``s`` along the separating curve [a1,b1] (genus 2).

    ``a2`` and ``b2`` are conjugated by the translation of length ``s`` along
    the axis of [a1,b1], moving towards its repelling end.  The relator is
    preserved because the translation commutes with [a1,b1].
    """
    if x.genus != 2:
        raise ValidationError("twist_family is defined for genus 2 only")
    if s == 0:
        return x
    sep = evaluate(x, parse_word("a1b1A1B1"))
    T = translation_along(sep, -s)
    Ti = np.linalg.inv(T)
    gens = x.generator_matrices()
    for name in ("a2", "b2"):
        gens[name] = T @ gens[name] @ Ti
    label = x.label if s == 0 else f"{x.label}+twist({s:g})"
    return FuchsianStructure.from_generators(gens, label=label)


# ---------------------------------------------------------------------------
# JSON representation files

REPRESENTATION_SCHEMA = {
    "type": "object",
    "required": ["genus", "generators"],
    "additionalProperties": False,
    "properties": {
        "genus": {"type": "integer", "minimum": 2},
        "label": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 2},
        "generators": {
            "type": "object",
            "patternProperties": {"^[ab][0-9]+$": {"type": "array", "items": {"type": "number"}}},
            "additionalProperties": False,
        },
    },
}


def validate_representation_json(data: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(data, REPRESENTATION_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"representation file: {exc.message}") from exc
    g = data["genus"]
    n = data.get("dimension", 2)
    names = set(presentation(g).generators)
    if set(data["generators"]) != names:
        raise ValidationError(f"generators must be exactly {sorted(names)}")
    for k, v in data["generators"].items():
        if len(v) != n * n:
            raise ValidationError(f"generator {k} needs {n * n} entries")


def load_structure(path) -> FuchsianStructure:
    with open(path) as fh:
        data = json.load(fh)
    return structure_from_json(data)


def structure_from_json(data: dict) -> FuchsianStructure:
    validate_representation_json(data)
    if data.get("dimension", 2) != 2:
        raise ValidationError("a Fuchsian structure needs 2x2 matrices")
    gens = {k: np.array(v, dtype=float).reshape(2, 2) for k, v in data["generators"].items()}
    return FuchsianStructure.from_generators(gens, label=data.get("label", "custom"))


_REGISTRY: dict = {}
_TWIST = re.compile(r"^(.*)\+twist\(([-+0-9.eE]+)\)$")


def register_structure(x: FuchsianStructure) -> FuchsianStructure:
    """Make ``x`` resolvable by its label (used by Liouville atoms in files)."""
    _REGISTRY[x.label] = x
    return x


def structure_by_label(label: str) -> FuchsianStructure:
    """Resolve ``bolza``, registered labels and ``<label>+twist(<s>)``."""
    if label in _REGISTRY:
        return _REGISTRY[label]
    if label == "bolza":
        return bolza_structure()
    m = _TWIST.match(label)
    if m:
        x = twist_family(structure_by_label(m.group(1)), float(m.group(2)))
        return register_structure(x)
    raise ValidationError(f"unknown structure label {label!r}")


def describe(x: FuchsianStructure) -> str:
    return f"{x.label} (genus {x.genus}, relator residual {x.relator_residual():.1e})"


__all__ = [
    "FuchsianStructure",
    "abs_traces",
    "axis_endpoints",
    "bolza_structure",
    "class_length",
    "describe",
    "evaluate",
    "evaluate_many",
    "register_structure",
    "structure_by_label",
    "fixed_vectors",
    "format_word",
    "length_from_trace",
    "lengths",
    "load_structure",
    "normalize_sign",
    "translation_along",
    "translation_length",
    "twist_family",
]
