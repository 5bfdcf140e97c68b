"""Hyperboloid-model geometry for intersection counting.

Points of the hyperbolic plane are vectors ``X`` with ``<X, X> = -1`` and
``X0 > 0`` for the form ``<a, b> = -a0 b0 + a1 b1 + a2 b2``; boundary points are
future null vectors and Klein coordinates are ``(X1/X0, X2/X0)``.  A 2x2
matrix ``M`` acts through ``P -> M P M^T`` on the symmetric matrix
``P = X0 I + X1 diag(1,-1) + X2 [[0,1],[1,0]]``, which matches its Mobius
action on the upper half-plane (``i`` is the origin ``(1, 0, 0)``).

The ``DirichletDomain`` of a structure is computed numerically at a generic
base point and checked against Gauss-Bonnet.  ``walk_axis`` follows the axis
of a hyperbolic element across the tiling and returns the chords it cuts in
the domain.  Both are the substrate for the intersection engine in
``currents``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import CurrentLabError, NotHyperbolic
from .hyperbolic import FuchsianStructure, evaluate_many, fixed_vectors

J = np.diag([-1.0, 1.0, 1.0])
ORIGIN = np.array([1.0, 0.0, 0.0])

# Generic base point for Dirichlet domains.  Symmetric structures such as
# Bolza have closed geodesics through the vertices of the domain centred at
# i; moving the centre off every symmetry axis avoids such coincidences.
GENERIC_BASEPOINT = complex(0.0731, 1.0917)


def mink(a, b):
    return -a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def so21(M: np.ndarray) -> np.ndarray:
    """3x3 matrix of the action of a 2x2 matrix (or a stack of them)."""
    M = np.asarray(M, dtype=float)
    a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    out = np.empty(M.shape[:-2] + (3, 3))
    # images of I, diag(1,-1) and [[0,1],[1,0]] under P -> M P M^T
    p00 = (a * a + b * b, a * a - b * b, 2 * a * b)
    p11 = (c * c + d * d, c * c - d * d, 2 * c * d)
    p01 = (a * c + b * d, a * c - b * d, a * d + b * c)
    for j in range(3):
        out[..., 0, j] = (p00[j] + p11[j]) / 2
        out[..., 1, j] = (p00[j] - p11[j]) / 2
        out[..., 2, j] = p01[j]
    return out


def so21_inv(G: np.ndarray) -> np.ndarray:
    return J @ np.swapaxes(G, -1, -2) @ J


def null_from_vector(v) -> np.ndarray:
    """Null vector of the boundary point with homogeneous coordinates ``v = (u, w)``."""
    v = np.asarray(v, dtype=float)
    u, w = v[..., 0], v[..., 1]
    return np.stack([(u * u + w * w) / 2, (u * u - w * w) / 2, u * w], axis=-1)


def to_klein(X):
    X = np.asarray(X, dtype=float)
    return X[..., 1:] / X[..., :1]


def from_klein(k):
    k = np.asarray(k, dtype=float)
    r2 = np.sum(k * k, axis=-1, keepdims=True)
    return np.concatenate([np.ones_like(r2), k], axis=-1) / np.sqrt(1 - r2)


def plane_normal(e, f):
    """Normal ``n`` with ``<n, e> = <n, f> = 0`` for the geodesic from ``e`` to ``f``."""
    return np.cross(e, f) @ J


def hyperbolic_distance(X, Y):
    return np.arccosh(np.maximum(-mink(X, Y), 1.0))


def uhp_to_hyperboloid(z: complex) -> np.ndarray:
    x, y = z.real, z.imag
    r = x * x + y * y
    return np.array([(r + 1) / (2 * y), (r - 1) / (2 * y), x / y])


def _clip(poly, labels, a, b, label):
    """Clip a convex polygon (Klein coordinates) by ``a . k <= b``."""
    n = len(poly)
    f = poly @ a - b
    out, out_labels = [], []
    for i in range(n):
        j = (i + 1) % n
        pi, pj, fi, fj = poly[i], poly[j], f[i], f[j]
        if fi <= 0:
            out.append(pi)
            if fj <= 0:
                out_labels.append(labels[i])
            else:
                t = fi / (fi - fj)
                out_labels.append(labels[i])
                out.append(pi + t * (pj - pi))
                out_labels.append(label)
        elif fj <= 0:
            t = fi / (fi - fj)
            out.append(pi + t * (pj - pi))
            out_labels.append(labels[i])
    if not out:
        return np.zeros((0, 2)), []
    return np.array(out), out_labels


@dataclass
class DirichletDomain:
    """Dirichlet polygon of a Fuchsian group at a base point, in its own frame.

    ``frame`` conjugates the structure so that the base point sits at ``i``
    (the hyperboloid origin).  Side ``k`` lies on the bisector of the origin
    and ``pairings[k]`` applied to the origin; crossing side ``k`` leads to
    the tile ``pairings[k] D``.
    """

    structure: FuchsianStructure
    basepoint: complex
    frame: np.ndarray
    letters: np.ndarray
    pairings: np.ndarray  # (m, 3, 3)
    pairing_words: list
    normals: np.ndarray  # (m, 3) outward unit normals
    rows: np.ndarray  # (m, 2) Klein half-plane a . k <= b
    rhs: np.ndarray
    vertices: np.ndarray
    area: float
    _pairing_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._pairing_inv = so21_inv(self.pairings)

    @property
    def n_sides(self) -> int:
        return len(self.pairings)

    def inside(self, X, tol=1e-12) -> bool:
        return bool(np.all(self.normals @ (J @ X) <= tol * X[0]))

    def reduce(self, X, max_steps=100_000):
        """Return ``(h, Xloc)`` with ``X = h Xloc`` and ``Xloc`` in the domain."""
        h, Y, ok = _nb_reduce(np.asarray(X, dtype=float), self.normals, self.pairings,
                              self._pairing_inv, max_steps)
        if not ok:
            raise CurrentLabError("point reduction did not terminate")
        return h, Y

    def to_frame(self, M: np.ndarray) -> np.ndarray:
        F = self.frame
        Fi = np.array([[F[1, 1], -F[0, 1]], [-F[1, 0], F[0, 0]]])
        return F @ M @ Fi


def _ball_words(n_letters: int, radius: int):
    words = [()]
    frontier = [()]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for c in range(n_letters):
                if w and c == w[-1] ^ 1:
                    continue
                nxt.append(w + (c,))
        words.extend(nxt)
        frontier = nxt
    return words


def dirichlet_domain(x: FuchsianStructure, basepoint: complex = GENERIC_BASEPOINT,
                     radius: int = 5) -> DirichletDomain:
    """Compute the Dirichlet polygon by clipping with bisectors of a word ball.

    Raises if the polygon is not compact, its area differs from
    ``4 pi (g - 1)`` by more than 1e-6, or some side has no paired side.
    """
    y = basepoint.imag
    F = np.array([[1 / math.sqrt(y), -basepoint.real / math.sqrt(y)], [0.0, math.sqrt(y)]])
    Fi = np.linalg.inv(F)
    letters = np.einsum("ij,njk,kl->nil", F, x.letters, Fi)
    words = _ball_words(4 * x.genus, radius)[1:]
    mats = evaluate_many(letters, words)
    G = so21(mats)
    Q = G[:, :, 0]
    order = np.argsort(Q[:, 0])
    poly = np.array([[-1.5, -1.5], [1.5, -1.5], [1.5, 1.5], [-1.5, 1.5]])
    labels = [-1, -1, -1, -1]
    for idx in order:
        q = Q[idx]
        a = q[1:]
        b = q[0] - 1.0
        # skip bisectors that cannot touch the current polygon
        if np.all(poly @ a - b <= 0):
            continue
        poly, labels = _clip(poly, labels, a, b, int(idx))
    if len(poly) == 0 or min(labels) < 0:
        raise CurrentLabError("Dirichlet polygon is not compact; increase radius")
    # drop degenerate edges
    keep = []
    m = len(poly)
    for i in range(m):
        if np.linalg.norm(poly[(i + 1) % m] - poly[i]) > 1e-12:
            keep.append(i)
    edge_labels = [labels[i] for i in keep]
    verts = poly[keep]
    sides = []
    for lab in edge_labels:
        if lab not in sides:
            sides.append(lab)
    pairings = G[sides]
    normals = []
    for lab in sides:
        n = Q[lab] - ORIGIN
        n = n / math.sqrt(mink(n, n))
        normals.append(n)
    normals = np.array(normals)
    # interior angles from outward unit normals of consecutive edges
    m = len(edge_labels)
    angle_sum = 0.0
    for i in range(m):
        n1 = normals[sides.index(edge_labels[i - 1])]
        n2 = normals[sides.index(edge_labels[i])]
        angle_sum += math.pi - math.acos(max(-1.0, min(1.0, float(mink(n1, n2)))))
    area = (m - 2) * math.pi - angle_sum
    expected = 4 * math.pi * (x.genus - 1)
    if abs(area - expected) > 1e-6:
        raise CurrentLabError(f"Dirichlet polygon area {area} != {expected}; increase radius")
    # side pairing check
    keys = [tuple(np.round(Q[lab], 6)) for lab in sides]
    for lab in sides:
        inv = so21_inv(G[lab])[:, 0]
        if tuple(np.round(inv, 6)) not in keys:
            raise CurrentLabError("Dirichlet polygon side has no paired side")
    rows = Q[sides][:, 1:]
    rhs = Q[sides][:, 0] - 1.0
    return DirichletDomain(
        structure=x,
        basepoint=basepoint,
        frame=F,
        letters=letters,
        pairings=pairings,
        pairing_words=[words[lab] for lab in sides],
        normals=normals,
        rows=rows,
        rhs=rhs,
        vertices=verts,
        area=area,
    )


# ---------------------------------------------------------------------------
# walking along an axis
#
# The inner loops are compiled with numba; vectors are 3-arrays in the
# hyperboloid model and domain data is passed as plain arrays.


@njit(cache=True)
def _mk(a, b):
    return -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit(cache=True)
def _mv(A, x):
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i, 0] * x[0] + A[i, 1] * x[1] + A[i, 2] * x[2]
    return out


@njit(cache=True)
def _mm(A, B):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return out


@njit(cache=True)
def _sinv(G):
    out = G.T.copy()
    out[0, 1] = -out[0, 1]
    out[0, 2] = -out[0, 2]
    out[1, 0] = -out[1, 0]
    out[2, 0] = -out[2, 0]
    return out


@njit(cache=True)
def _nb_reduce(X, normals, pair, pinv, max_steps):
    h = np.eye(3)
    X = X.copy()
    m = normals.shape[0]
    for _ in range(max_steps):
        best = -1e300
        k = -1
        for j in range(m):
            v = -normals[j, 0] * X[0] + normals[j, 1] * X[1] + normals[j, 2] * X[2]
            if v > best:
                best = v
                k = j
        if best <= 1e-13 * X[0]:
            return h, X, True
        X = _mv(pinv[k], X)
        X = X / math.sqrt(max(-_mk(X, X), 1e-300))
        h = _mm(h, pair[k])
    return h, X, False


@njit(cache=True)
def _param_nb(k0, k1, xi, eta):
    # parameter of the Klein point (k0, k1) along the geodesic xi -> eta
    r = math.sqrt(max(1.0 - k0 * k0 - k1 * k1, 1e-300))
    X = np.array([1.0 / r, k0 / r, k1 / r])
    return 0.5 * math.log(_mk(X, xi) / _mk(X, eta))


@njit(cache=True)
def _nb_chord(rows, rhs, xi, eta, off):
    ka0, ka1, kb0, kb1 = xi[1], xi[2], eta[1], eta[2]
    d0, d1 = kb0 - ka0, kb1 - ka1
    lo, hi = -1e300, 1e300
    for j in range(rows.shape[0]):
        nu = rhs[j] - (rows[j, 0] * ka0 + rows[j, 1] * ka1)
        de = rows[j, 0] * d0 + rows[j, 1] * d1
        if de > 1e-300:
            hi = min(hi, nu / de)
        elif de < -1e-300:
            lo = max(lo, nu / de)
        elif nu < 0:
            return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    if not lo < hi:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    p0, p1 = ka0 + lo * d0, ka1 + lo * d1
    q0, q1 = ka0 + hi * d0, ka1 + hi * d1
    return (True, p0, p1, q0, q1,
            _param_nb(p0, p1, xi, eta) + off, _param_nb(q0, q1, xi, eta) + off)


@njit(cache=True)
def _on_circle_nb(v):
    r = math.sqrt(v[1] * v[1] + v[2] * v[2])
    return np.array([1.0, v[1] / r, v[2] / r])


@njit(cache=True)
def _nb_walk(normals, pair, pinv, rows, rhs, h, xi, eta, off, s_t, tstart, tend,
             tol_s, tol_m, max_steps, T, S, E, P, Q, SIN, SOUT):
    """Walk forward storing chords until the target chord is met.

    Returns the number of stored chords, or a negative code: -1 target
    missed, -2 start outside the domain, -3 output full, -4 reduction
    failed, -5 stalled, -6 step budget.
    """
    cap = SIN.shape[0]
    n = 0
    ok, p0, p1, q0, q1, si, so = _nb_chord(rows, rhs, xi, eta, off)
    if not ok:
        return -2
    for _ in range(max_steps):
        if abs(si - s_t) < tol_s:
            dm = 0.0
            for i in range(3):
                dm = max(dm, abs(xi[i] - tstart[i]), abs(eta[i] - tend[i]))
            if dm < tol_m:
                return n
        if si > s_t + tol_s:
            return -1
        if n >= cap:
            return -3
        T[n] = h
        S[n] = xi
        E[n] = eta
        P[n, 0], P[n, 1], Q[n, 0], Q[n, 1] = p0, p1, q0, q1
        SIN[n], SOUT[n] = si, so
        n += 1
        eps = 1e-9
        moved = False
        while eps <= 1e-3:
            c = math.sqrt(-1.0 / (2.0 * _mk(xi, eta)))
            t = so + eps - off
            X = c * (math.exp(-t) * xi + math.exp(t) * eta)
            g, _, okr = _nb_reduce(X, normals, pair, pinv, 100000)
            if not okr:
                return -4
            gi = _sinv(g)
            nxi, neta = _mv(gi, xi), _mv(gi, eta)
            noff = off + 0.5 * math.log(nxi[0] / neta[0])
            nxi, neta = _on_circle_nb(nxi), _on_circle_nb(neta)
            ok, a0, a1, b0, b1, nsi, nso = _nb_chord(rows, rhs, nxi, neta, noff)
            if ok and nso > so + 1e-15:
                h = _mm(h, g)
                xi, eta, off = nxi, neta, noff
                p0, p1, q0, q1, si, so = a0, a1, b0, b1, nsi, nso
                moved = True
                break
            eps *= 10.0
        if not moved:
            return -5
    return -6


@dataclass
class AxisWalk:
    """Chords cut in the domain by one period of a closed geodesic.

    Row ``i`` describes one chord: ``tiles[i]`` maps the domain onto the tile
    it crosses (relative to the frame of the whole walk), ``starts``/``ends``
    are the geodesic's ideal endpoints seen from the domain (null vectors with
    ``X0 = 1``), ``p``/``q`` the Klein coordinates of the clipped segment and
    ``s_in``/``s_out`` arclength parameters along the closed geodesic, which
    run over one period from about 0.  ``offsets`` converts the local
    parameter of a chord's own endpoints to the common one.
    """

    length: float
    repelling: np.ndarray
    attracting: np.ndarray
    tiles: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    p: np.ndarray
    q: np.ndarray
    s_in: np.ndarray
    s_out: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        X = from_klein(self.p)
        local = 0.5 * np.log(mink(X, self.starts) / mink(X, self.ends))
        return self.s_in - local

    def __len__(self):
        return len(self.s_in)


def _point_at(xi, eta, s):
    c = -1.0 / (2.0 * mink(xi, eta))
    return math.sqrt(c) * (math.exp(-s) * xi + math.exp(s) * eta)


def _param(X, xi, eta):
    return 0.5 * math.log(mink(X, xi) / mink(X, eta))


def _scaled_product(letters, word):
    M = np.eye(2)
    logscale = 0.0
    for c in word:
        M = M @ letters[c]
        m = np.abs(M).max()
        if m > 1e100:
            M = M / m
            logscale += math.log(m)
    return M, logscale


def word_axis(letters, word):
    """Attracting and repelling unit vectors and translation length of a word.

    Long words are multiplied with rescaling; the attracting vector is then
    the dominant column of the product and the repelling one that of the
    inverse word.
    """
    M, logscale = _scaled_product(letters, word)
    if logscale == 0.0 and abs(M[0, 0] + M[1, 1]) < 1e12:
        tr = abs(M[0, 0] + M[1, 1])
        if tr <= 2 + 1e-12:
            raise NotHyperbolic(f"|trace| = {tr} is not > 2")
        att, rep = fixed_vectors(M)
        return att, rep, 2.0 * math.acosh(tr / 2.0)
    inv = tuple(c ^ 1 for c in reversed(word))
    Mi, _ = _scaled_product(letters, inv)

    def dominant(A):
        col = A[:, int(np.argmax(np.abs(A).sum(axis=0)))]
        return col / np.linalg.norm(col)

    tr = abs(M[0, 0] + M[1, 1])
    return dominant(M), dominant(Mi), 2.0 * (math.log(tr) + logscale)


class _Frame:
    """Axis of a rotation of the word, seen from the domain.

    ``state`` is ``(h, xi, eta, off)``: the tile map, the axis endpoints seen
    from the tile normalised onto the unit circle, and the offset with
    ``s = s_local + off`` the arclength parameter on this rotation's axis.
    """

    def __init__(self, dom: DirichletDomain, word):
        att, rep, self.length = word_axis(dom.letters, word)
        eta, xi = null_from_vector(att), null_from_vector(rep)
        self.xi, self.eta = xi / xi[0], eta / eta[0]
        X0 = (self.xi + self.eta) / math.sqrt(-2.0 * mink(self.xi, self.eta))
        self.s0 = _param(X0, self.xi, self.eta)
        h, _, ok = _nb_reduce(X0, dom.normals, dom.pairings, dom._pairing_inv, 100000)
        if not ok:
            raise CurrentLabError("point reduction did not terminate")
        gi = so21_inv(h)
        nxi, neta = gi @ self.xi, gi @ self.eta
        off = 0.5 * math.log(nxi[0] / neta[0])
        self.state = (h, _on_circle_nb(nxi), _on_circle_nb(neta), off)
        ok, *rest = _nb_chord(dom.rows, dom.rhs, self.state[1], self.state[2], off)
        if not ok:
            raise CurrentLabError("axis start point not inside the domain")
        self.start_s_in = rest[4]


_WALK_ERRORS = {
    -1: "axis walk lost track of the period",
    -2: "axis start point not inside the domain",
    -4: "point reduction did not terminate",
    -5: "axis walk stalled",
    -6: "axis walk exceeded step budget",
}


def walk_word(dom: DirichletDomain, word, span: float = 8.0,
              max_steps: int = 1_000_000) -> AxisWalk:
    """Chords cut in the domain by one period of the axis of ``word``.

    The walk is re-anchored at cyclic rotations of the word whose axes pass
    near the base point, at most ``span`` apart along the axis, so rounding
    drift stays at the ``exp(span)`` scale whatever the length.  Pieces are
    joined by matching the next anchor's first chord through its ideal
    endpoints.  Chords are listed with multiplicity: a proper power ``d^k``
    gives each chord of ``d`` ``k`` times.
    """
    word = tuple(int(c) for c in word)
    n = len(word)
    if n == 0:
        raise NotHyperbolic("empty word")
    G = so21(dom.letters)
    frames = {0: _Frame(dom, word)}
    ell = frames[0].length
    # anchors: from anchor i, the furthest k with 0 < offset <= span
    anchors, offsets = [0], []
    i, acc = 0, 0.0
    while True:
        F = frames[i]
        best = None
        g = np.eye(3)
        for k in range(i + 1, n):
            g = g @ G[word[k - 1]]
            if g[0, 0] > 1e5:
                # offsets of far orbit points lose precision like g0^2
                break
            q = g[:, 0]
            u, v = mink(q, F.xi), mink(q, F.eta)
            if u < 0 and v < 0:
                d = 0.5 * math.log(u / v) - F.s0
                if 0 < d <= span:
                    best = (k, d)
        # anchor 0 one period later
        d = ell - acc
        if d <= span or best is None:
            best = (n, d)
        k, d = best
        offsets.append(d)
        if k == n:
            break
        frames[k] = _Frame(dom, word[k:] + word[:k])
        anchors.append(k)
        acc += d
        i = k
    pieces = []
    prefix = np.eye(3)
    pos = 0
    budget = max_steps
    shift = 0.0
    for j, i in enumerate(anchors):
        while pos < i:
            prefix = prefix @ G[word[pos]]
            pos += 1
        F = frames[i]
        nf = frames[anchors[j + 1]] if j + 1 < len(anchors) else frames[0]
        # entry parameter the target chord must have in this frame
        s_t = F.s0 + offsets[j] - (nf.s0 - nf.start_s_in)
        cap = 64
        while True:
            out = (np.empty((cap, 3, 3)), np.empty((cap, 3)), np.empty((cap, 3)),
                   np.empty((cap, 2)), np.empty((cap, 2)), np.empty(cap), np.empty(cap))
            h, xi, eta, off = F.state
            # repeated chords (proper powers) are a systole apart
            m = _nb_walk(dom.normals, dom.pairings, dom._pairing_inv, dom.rows, dom.rhs,
                         h, xi, eta, off, s_t, nf.state[1], nf.state[2], 0.25, 1e-7,
                         budget, *out)
            if m != -3:
                break
            cap *= 4
        if m < 0:
            raise CurrentLabError(_WALK_ERRORS[m])
        budget -= m
        T, S, E, P, Q, SIN, SOUT = (a[:m] for a in out)
        # shift to a common parameter: 0 at anchor 0's point nearest the base point
        d = shift - F.s0
        pieces.append((np.einsum("ij,njk->nik", prefix, T), S, E, P, Q, SIN + d, SOUT + d))
        shift += offsets[j]
    cols = [np.concatenate(c) for c in zip(*pieces)]
    return AxisWalk(ell, frames[0].xi, frames[0].eta, *cols)


def walk_axis(dom: DirichletDomain, x: FuchsianStructure, word) -> AxisWalk:
    """Convenience wrapper taking a word over the structure's letters."""
    if dom.structure is not x:
        dom = dirichlet_domain(x)
    return walk_word(dom, word)
