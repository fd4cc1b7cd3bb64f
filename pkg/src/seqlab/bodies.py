"""Catalog of closed convex bodies with projection-based oracles.

Every body takes points as ``(n,)`` or ``(m, n)`` arrays; projections are
vectorised over rows.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from ._rng import substream, tag_of
from .errors import (DimensionMismatch, EmptyIntersection, InvalidSpec,
                     NonConvergence, UnsupportedMode)

PROJ_TOL = 1e-9
DYKSTRA_TOL = 1e-7
MAX_ITER = 100_000

KINDS = ("L2Ball", "L1Ball", "LpBall", "HyperRectangle", "Ellipsoid", "IsotonicTV",
         "IsotonicBox", "MultiIsotonicLattice", "Subspace", "Pyramid",
         "SolidOfRevolution", "Singleton", "FullSpace")


@dataclass
class BodySpec:
    """Serializable description of a convex body: ``kind``, ``n`` and parameters."""
    kind: str
    n: int | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.n is not None:
            out["n"] = int(self.n)
        for k, v in self.params.items():
            out[k] = v.to_dict() if isinstance(v, BodySpec) else _jsonable(v)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "BodySpec":
        d = dict(d)
        if "kind" not in d:
            raise InvalidSpec("body spec needs a 'kind'")
        kind = d.pop("kind")
        n = d.pop("n", None)
        if "base" in d and isinstance(d["base"], dict):
            d["base"] = cls.from_dict(d["base"])
        return cls(kind, n, d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and math.isinf(v):
        return None
    return v


class Diameter(NamedTuple):
    lower: float
    upper: float
    bounded: bool


@dataclass
class SeparationResult:
    status: str  # "Inside" or "Outside"
    normal: np.ndarray | None = None
    value: float | None = None  # support value: <normal, y> <= value for y in K


def _as2d(x, n):
    x = np.asarray(x, dtype=float)
    one = x.ndim == 1
    X = x[None, :] if one else x
    if X.ndim != 2 or X.shape[1] != n:
        raise DimensionMismatch(f"expected dimension {n}, got shape {x.shape}")
    return X, one


class ConvexBody:
    """Immutable handle; subclasses implement ``_project`` and ``_contains``."""
    kind = "?"
    symmetric = False       # centrally symmetric about the origin
    bounded = True

    def __init__(self, spec: BodySpec, n: int):
        self.spec = spec
        self.n = int(n)

    # ---- public oracles
    def project(self, y):
        Y, one = _as2d(y, self.n)
        P = self._project(Y)
        return P[0] if one else P

    def contains(self, x, tol=1e-9):
        """Closed-form membership with slack ``tol``."""
        X, one = _as2d(x, self.n)
        r = self._contains(X, tol)
        return bool(r[0]) if one else r

    def membership(self, x, tol=PROJ_TOL):
        X, one = _as2d(x, self.n)
        ok = self._contains(X, 0.0)
        if not ok.all():
            bad = ~ok
            dist = np.linalg.norm(X[bad] - self._project(X[bad]), axis=1)
            ok[bad] = dist <= tol
        return bool(ok[0]) if one else ok

    # ---- geometry helpers (overridden per kind)
    def center(self):
        return np.zeros(self.n)

    def radius_bound(self):
        """Radius about ``center()`` of a ball containing K, or None if unbounded."""
        d = self.diameter()
        return d.upper if d.bounded else None

    def affine_dim(self):
        return self.n

    def structured_points(self):
        return [self.center()]

    def diameter(self) -> Diameter:
        raise NotImplementedError

    def _contains(self, X, tol):
        return np.linalg.norm(X - self._project(X), axis=1) <= max(tol, 1e-12)

    def __repr__(self):
        return f"{self.kind}(n={self.n})"


# -------------------------------------------------------------------- balls
class L2Ball(ConvexBody):
    kind, symmetric = "L2Ball", True

    def __init__(self, spec, n, radius=1.0):
        super().__init__(spec, n)
        self.r = float(radius)
        if not self.r > 0:
            raise InvalidSpec("radius must be positive")

    def _project(self, Y):
        nr = np.linalg.norm(Y, axis=1)
        s = np.where(nr > self.r, self.r / np.maximum(nr, 1e-300), 1.0)
        return Y * s[:, None]

    def _contains(self, X, tol):
        return np.linalg.norm(X, axis=1) <= self.r + tol

    def diameter(self):
        return Diameter(2 * self.r, 2 * self.r, True)

    def radius_bound(self):
        return self.r

    def structured_points(self):
        pts = [np.zeros(self.n)]
        for j in range(self.n):
            for s in (1, -1):
                e = np.zeros(self.n)
                e[j] = s * self.r
                pts.append(e)
        return pts


class L1Ball(L2Ball):
    kind = "L1Ball"

    def _project(self, Y):
        return K.l1_project(Y, self.r)

    def _contains(self, X, tol):
        return np.abs(X).sum(axis=1) <= self.r + tol


class LpBall(L2Ball):
    kind = "LpBall"

    def __init__(self, spec, n, p, radius=1.0):
        super().__init__(spec, n, radius)
        self.p = float(p)
        if not 1 < self.p < 2:
            raise InvalidSpec("LpBall needs 1 < p < 2")

    def _project(self, Y):
        return K.lp_project(Y, self.p, self.r)

    def _contains(self, X, tol):
        return (np.abs(X) ** self.p).sum(axis=1) ** (1 / self.p) <= self.r + tol


class HyperRectangle(ConvexBody):
    kind, symmetric = "HyperRectangle", True

    def __init__(self, spec, n, a):
        a = np.asarray(a, dtype=float)
        super().__init__(spec, a.size)
        if a.ndim != 1 or not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise InvalidSpec("half-widths must be positive and finite")
        self.a = a

    def _project(self, Y):
        return np.clip(Y, -self.a, self.a)

    def _contains(self, X, tol):
        return np.all(np.abs(X) <= self.a + tol, axis=1)

    def diameter(self):
        d = 2 * float(np.linalg.norm(self.a))
        return Diameter(d, d, True)

    def radius_bound(self):
        return float(np.linalg.norm(self.a))

    def vertices(self, limit=1024):
        if self.n <= 10:
            signs = itertools.product((-1.0, 1.0), repeat=self.n)
            return [np.array(s) * self.a for s in signs]
        rng = substream(0, tag_of("vertices", self.n))
        return [rng.choice((-1.0, 1.0), self.n) * self.a for _ in range(limit)]

    def structured_points(self):
        pts = [np.zeros(self.n)] + self.vertices()
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = self.a[j]
            pts.append(e)
        return pts


class Ellipsoid(ConvexBody):
    """{x : ||D x||_2 <= 1} with D = diag(d), d descending."""
    kind, symmetric = "Ellipsoid", True

    def __init__(self, spec, n, d):
        d = np.asarray(d, dtype=float)
        super().__init__(spec, d.size)
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise InvalidSpec("ellipsoid axes must be positive")
        if np.any(np.diff(d) > 0):
            raise InvalidSpec("ellipsoid entries must be sorted descending")
        self.d = d

    def _project(self, Y):
        return K.ellipsoid_project(Y, self.d)

    def _contains(self, X, tol):
        return np.linalg.norm(X * self.d, axis=1) <= 1 + tol * self.d[0]

    def diameter(self):
        v = 2.0 / self.d[-1]
        return Diameter(v, v, True)

    def radius_bound(self):
        return 1.0 / self.d[-1]

    def axis_points(self):
        pts = []
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = 1.0 / self.d[j]
            pts.append(e)
        return pts

    def structured_points(self):
        tips = self.axis_points()
        return [np.zeros(self.n)] + tips[::-1] + [-t for t in tips[::-1]]


class FullSpace(ConvexBody):
    kind, symmetric, bounded = "FullSpace", True, False

    def _project(self, Y):
        return Y.copy()

    def _contains(self, X, tol):
        return np.ones(X.shape[0], dtype=bool)

    def diameter(self):
        return Diameter(math.inf, math.inf, False)

    def structured_points(self):
        pts = [np.zeros(self.n)]
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = 1.0
            pts += [e, -e]
        return pts


class Singleton(ConvexBody):
    kind = "Singleton"

    def __init__(self, spec, n, point):
        p = np.asarray(point, dtype=float).ravel()
        super().__init__(spec, p.size)
        self.p = p
        self.symmetric = bool(np.all(p == 0))

    def _project(self, Y):
        return np.broadcast_to(self.p, Y.shape).copy()

    def _contains(self, X, tol):
        return np.linalg.norm(X - self.p, axis=1) <= tol

    def center(self):
        return self.p.copy()

    def affine_dim(self):
        return 0

    def diameter(self):
        return Diameter(0.0, 0.0, True)

    def radius_bound(self):
        return 0.0


class Subspace(ConvexBody):
    kind, symmetric, bounded = "Subspace", True, False

    def __init__(self, spec, n, basis):
        U = np.atleast_2d(np.asarray(basis, dtype=float))
        if n is not None and U.shape[0] != n and U.shape[1] == n:
            U = U.T
        super().__init__(spec, U.shape[0])
        if U.shape[1] > U.shape[0]:
            raise InvalidSpec("subspace dimension exceeds ambient dimension")
        if not np.allclose(U.T @ U, np.eye(U.shape[1]), atol=1e-8):
            raise InvalidSpec("subspace basis must be orthonormal")
        self.U = U
        self.k = U.shape[1]

    def _project(self, Y):
        return (Y @ self.U) @ self.U.T

    def affine_dim(self):
        return self.k

    def diameter(self):
        if self.k == 0:
            return Diameter(0.0, 0.0, True)
        return Diameter(math.inf, math.inf, False)

    def structured_points(self):
        pts = [np.zeros(self.n)]
        for j in range(self.k):
            pts += [self.U[:, j].copy(), -self.U[:, j]]
        return pts


# -------------------------------------------------------------------- isotonic
class IsotonicTV(ConvexBody):
    """Nondecreasing vectors with total rise mu_n - mu_1 <= V."""
    kind, bounded = "IsotonicTV", False

    def __init__(self, spec, n, V=math.inf):
        super().__init__(spec, n)
        self.V = math.inf if V is None else float(V)
        if self.V < 0:
            raise InvalidSpec("V must be nonnegative")

    def _project(self, Y):
        Z = K.pava_rows(Y)
        if math.isinf(self.V) or self.n == 1:
            return Z
        V = self.V
        over = Z[:, -1] - Z[:, 0] > V
        if not over.any():
            return Z
        Zo = Z[over]
        lo, hi = Zo[:, 0].copy(), Zo[:, -1] - V
        # optimal lower clip level a solves a monotone piecewise-linear equation
        for _ in range(200):
            a = 0.5 * (lo + hi)
            F = (np.maximum(a[:, None] - Zo, 0).sum(1)
                 - np.maximum(Zo - a[:, None] - V, 0).sum(1))
            pos = F > 0
            hi = np.where(pos, a, hi)
            lo = np.where(pos, lo, a)
            if np.all(hi - lo <= 1e-15 * (1 + np.abs(hi))):
                break
        a = 0.5 * (lo + hi)
        Z[over] = np.clip(Zo, a[:, None], a[:, None] + V)
        return Z

    def _contains(self, X, tol):
        mono = np.all(np.diff(X, axis=1) >= -tol, axis=1)
        return mono & (X[:, -1] - X[:, 0] <= self.V + tol)

    def diameter(self):
        return Diameter(math.inf, math.inf, False)

    def structured_points(self):
        n, V = self.n, (1.0 if math.isinf(self.V) else self.V)
        pts = [np.zeros(n), np.linspace(0, V, n)]
        for m in sorted(set(np.linspace(1, n - 1, min(n - 1, 16)).astype(int))):
            s = np.zeros(n)
            s[m:] = V
            pts.append(s)
        for steps in (2, 4, 8):
            if steps < n:
                pts.append(np.floor(np.arange(n) * steps / n) * V / (steps - 1 if steps > 1 else 1))
        return pts


class IsotonicBox(ConvexBody):
    """Nondecreasing vectors with a <= mu_1 <= ... <= mu_n <= b."""
    kind = "IsotonicBox"

    def __init__(self, spec, n, a=0.0, b=1.0):
        super().__init__(spec, n)
        self.a, self.b = float(a), float(b)
        if not self.a < self.b:
            raise InvalidSpec("IsotonicBox needs a < b")

    def _project(self, Y):
        return np.clip(K.pava_rows(Y), self.a, self.b)

    def _contains(self, X, tol):
        mono = np.all(np.diff(X, axis=1) >= -tol, axis=1)
        return mono & np.all(X >= self.a - tol, axis=1) & np.all(X <= self.b + tol, axis=1)

    def center(self):
        return np.full(self.n, 0.5 * (self.a + self.b))

    def diameter(self):
        v = (self.b - self.a) * math.sqrt(self.n)
        return Diameter(v, v, True)

    def radius_bound(self):
        return 0.5 * (self.b - self.a) * math.sqrt(self.n)

    def structured_points(self):
        n, a, b = self.n, self.a, self.b
        pts = [self.center(), np.full(n, a), np.full(n, b), np.linspace(a, b, n)]
        for m in sorted(set(np.linspace(1, n - 1, min(n - 1, 16)).astype(int))):
            s = np.full(n, a)
            s[m:] = b
            pts.append(s)
        return pts


class MultiIsotonicLattice(ConvexBody):
    """Coordinatewise nondecreasing functions on the p-dimensional grid, values in [a, b].

    Points are stored in C order of the grid with side ``n ** (1/p)``.
    """
    kind = "MultiIsotonicLattice"

    def __init__(self, spec, n, p=2, a=0.0, b=1.0):
        super().__init__(spec, n)
        self.p = int(p)
        if self.p < 2:
            raise InvalidSpec("lattice dimension p must be >= 2")
        side = round(self.n ** (1.0 / self.p))
        if side ** self.p != self.n:
            raise InvalidSpec("n ** (1/p) must be an integer")
        self.side = side
        self.a, self.b = float(a), float(b)
        if not self.a < self.b:
            raise InvalidSpec("range needs a < b")

    def _lines(self):
        if getattr(self, "_line_idx", None) is None:
            flat = np.arange(self.n).reshape((self.side,) * self.p)
            self._line_idx = np.stack([np.moveaxis(flat, j, -1).reshape(-1, self.side)
                                       for j in range(self.p)])
        return self._line_idx

    def _project(self, Y):
        x, used = K.lattice_iso(Y, self._lines(), 1e-9, MAX_ITER)
        if np.any(used < 0):
            raise NonConvergence("lattice isotonic projection", MAX_ITER, None)
        return np.clip(x, self.a, self.b)

    def _monotone(self, X, tol):
        G = X.reshape((X.shape[0],) + (self.side,) * self.p)
        ok = np.ones(X.shape[0], dtype=bool)
        for j in range(self.p):
            ok &= np.all(np.diff(G, axis=j + 1) >= -tol, axis=tuple(range(1, self.p + 1)))
        return ok

    def _contains(self, X, tol):
        box = np.all(X >= self.a - tol, axis=1) & np.all(X <= self.b + tol, axis=1)
        return box & self._monotone(X, tol)

    def grid_index(self):
        """Integer lattice coordinates (0-based) of each entry, shape (n, p)."""
        return np.array(list(itertools.product(range(self.side), repeat=self.p)))

    def center(self):
        return np.full(self.n, 0.5 * (self.a + self.b))

    def diameter(self):
        v = (self.b - self.a) * math.sqrt(self.n)
        return Diameter(v, v, True)

    def radius_bound(self):
        return 0.5 * (self.b - self.a) * math.sqrt(self.n)

    def structured_points(self):
        pts = [self.center(), np.full(self.n, self.a), np.full(self.n, self.b)]
        s = self.grid_index().sum(axis=1)
        for t in range(1, self.p * (self.side - 1) + 1):
            pts.append(np.where(s >= t, self.b, self.a).astype(float))
        pts.append(self.a + (self.b - self.a) * s / max(1, s.max()))
        return pts


# -------------------------------------------------------------------- pyramid
def _householder_basis(v):
    """Orthogonal H with H e_n = v/|v|; its first n-1 columns span v-perp."""
    n = v.size
    u = v / np.linalg.norm(v)
    e = np.zeros(n)
    e[-1] = 1.0
    w = e - u
    nw = np.linalg.norm(w)
    if nw < 1e-14:
        return np.eye(n)
    w /= nw
    return np.eye(n) - 2.0 * np.outer(w, w)


class Pyramid(ConvexBody):
    """Convex hull of an apex v and a symmetric base placed in the complement of v.

    The base spec has dimension n - 1 and is embedded through an orthonormal
    basis of v-perp.
    """
    kind = "Pyramid"

    def __init__(self, spec, n, apex, base):
        v = np.asarray(apex, dtype=float)
        super().__init__(spec, v.size)
        self.v = v
        self.H = float(np.linalg.norm(v))
        if not self.H > 0:
            raise InvalidSpec("apex must be nonzero")
        self.base = make_body(base)
        if self.base.n != self.n - 1:
            raise InvalidSpec("pyramid base must live in dimension n - 1")
        if not self.base.symmetric or not self.base.bounded:
            raise InvalidSpec("pyramid base must be bounded and symmetric")
        self.Q = _householder_basis(v)
        self.vhat = v / self.H

    def _split(self, X):
        C = X @ self.Q  # Q is symmetric orthogonal
        return C[:, -1], C[:, :-1]

    def _join(self, h, Z):
        return np.hstack([Z, h[:, None]]) @ self.Q.T

    def _project(self, Y):
        t, W = self._split(Y)
        H = self.H
        out_h = np.clip(t, 0.0, H)
        out_Z = W.copy()
        s0 = 1.0 - out_h / H
        inside = (t >= 0) & (t <= H)
        if inside.any():
            sc = np.maximum(s0[inside], 1e-12)
            q = self.base._contains(W[inside] / sc[:, None], 0.0)
            idx = np.flatnonzero(inside)
            inside[idx[~q]] = False
        rows = np.flatnonzero(~inside)
        if rows.size:
            tr, Wr = t[rows], W[rows]
            lo, hi = np.zeros(rows.size), np.full(rows.size, H)

            def grad(h):
                s = np.maximum(1.0 - h / H, 1e-12)
                q = self.base._project(Wr / s[:, None])
                return 2 * (h - tr) + (2.0 / H) * np.einsum("ij,ij->i", Wr - s[:, None] * q, q), s, q

            g0, _, _ = grad(lo)
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                g, _, _ = grad(mid)
                pos = g > 0
                hi = np.where(pos, mid, hi)
                lo = np.where(pos, lo, mid)
            h = np.where(g0 >= 0, 0.0, 0.5 * (lo + hi))
            s = np.maximum(1.0 - h / H, 0.0)
            far = s > 1e-12
            Zr = np.zeros_like(Wr)
            if far.any():
                Zr[far] = s[far, None] * self.base._project(Wr[far] / s[far, None])
            out_h[rows] = h
            out_Z[rows] = Zr
        return self._join(out_h, out_Z)

    def _contains(self, X, tol):
        h, Z = self._split(X)
        H = self.H
        ok = (h >= -tol) & (h <= H + tol)
        s = np.clip(1.0 - h / H, 0, 1)
        res = np.zeros(X.shape[0], dtype=bool)
        pos = s > 1e-12
        if pos.any():
            Zs = Z[pos] / s[pos, None]
            gap = np.linalg.norm(Z[pos] - s[pos, None] * self.base._project(Zs), axis=1)
            res[pos] = self.base._contains(Zs, 0.0) | (gap <= tol)
        res[~pos] = np.linalg.norm(Z[~pos], axis=1) <= tol
        return ok & res

    def embed_base(self, z, height=0.0):
        z = np.atleast_2d(z)
        return self._join(np.full(z.shape[0], float(height)), (1 - height / self.H) * z)

    def center(self):
        return 0.5 * self.v

    def diameter(self):
        db = self.base.diameter().upper
        val = max(db, math.hypot(self.H, db / 2))
        return Diameter(val, val, True)

    def structured_points(self):
        bp = self.base.structured_points()
        pts = [self.v.copy(), np.zeros(self.n), 0.5 * self.v]
        pts += list(self.embed_base(np.array(bp[1:2 * self.n + 1])))
        return pts


# -------------------------------------------------------------------- solid of revolution
class SolidOfRevolution(ConvexBody):
    """{(x, r) : 0 <= x <= b, ||r|| <= f(x)} with f piecewise linear, concave, symmetric."""
    kind = "SolidOfRevolution"

    def __init__(self, spec, n, knots, values):
        super().__init__(spec, n)
        x = np.asarray(knots, dtype=float)
        f = np.asarray(values, dtype=float)
        if self.n < 2 or x.ndim != 1 or x.shape != f.shape or x.size < 2:
            raise InvalidSpec("profile needs matching knot/value arrays and n >= 2")
        if np.any(np.diff(x) <= 0) or x[0] != 0:
            raise InvalidSpec("knots must start at 0 and increase")
        if f[0] != 0 or f[-1] != 0 or np.any(f < 0):
            raise InvalidSpec("profile must vanish at both ends and be nonnegative")
        slope = np.diff(f) / np.diff(x)
        if np.any(np.diff(slope) > 1e-12 * (1 + np.abs(slope[1:]))):
            raise InvalidSpec("profile is not concave")
        b = x[-1]
        if not np.allclose(np.interp(b - x, x, f), f, atol=1e-12 * (1 + f.max())):
            raise InvalidSpec("profile is not symmetric about b/2")
        self.x, self.f, self.b = x, f, float(b)

    def profile(self, t):
        return np.interp(t, self.x, self.f, left=-np.inf, right=-np.inf)

    def _project(self, Y):
        t = Y[:, 0]
        R = Y[:, 1:]
        rho = np.linalg.norm(R, axis=1)
        inside = (t >= 0) & (t <= self.b) & (rho <= self.profile(t))
        xs, fs = self.x, self.f
        A = np.stack([xs[:-1], fs[:-1]], 1)
        B = np.stack([xs[1:], fs[1:]], 1)
        P = np.stack([t, rho], 1)
        D = B - A
        lam = np.clip(((P[:, None, :] - A[None]) * D[None]).sum(-1) / (D * D).sum(-1)[None], 0, 1)
        C = A[None] + lam[..., None] * D[None]
        dist = ((P[:, None, :] - C) ** 2).sum(-1)
        best = C[np.arange(P.shape[0]), dist.argmin(1)]
        out = Y.copy()
        o = ~inside
        out[o, 0] = best[o, 0]
        u = np.where(rho[:, None] > 0, R / np.maximum(rho, 1e-300)[:, None], 0.0)
        out[o, 1:] = best[o, 1][:, None] * u[o]
        return out

    def _contains(self, X, tol):
        t = X[:, 0]
        rho = np.linalg.norm(X[:, 1:], axis=1)
        tc = np.clip(t, 0, self.b)
        return (t >= -tol) & (t <= self.b + tol) & (rho <= np.interp(tc, self.x, self.f) + tol)

    def center(self):
        c = np.zeros(self.n)
        c[0] = self.b / 2
        return c

    def diameter(self):
        x, f = self.x, self.f
        v = float(np.sqrt((x[:, None] - x[None]) ** 2 + (f[:, None] + f[None]) ** 2).max())
        return Diameter(v, v, True)

    def structured_points(self):
        pts = [self.center(), np.zeros(self.n)]
        e = np.zeros(self.n)
        e[0] = self.b
        pts.append(e)
        for xj, fj in zip(self.x[1:-1], self.f[1:-1]):
            p = np.zeros(self.n)
            p[0] = xj
            pts.append(p.copy())
            p[1] = fj
            pts.append(p)
        return pts


# -------------------------------------------------------------------- construction
_CLASSES = dict(L2Ball=L2Ball, L1Ball=L1Ball, LpBall=LpBall, HyperRectangle=HyperRectangle,
                Ellipsoid=Ellipsoid, IsotonicTV=IsotonicTV, IsotonicBox=IsotonicBox,
                MultiIsotonicLattice=MultiIsotonicLattice, Subspace=Subspace, Pyramid=Pyramid,
                SolidOfRevolution=SolidOfRevolution, Singleton=Singleton, FullSpace=FullSpace)


def make_body(spec) -> ConvexBody:
    """Validate a spec (``BodySpec``, dict, or existing body) and build its handle."""
    if isinstance(spec, ConvexBody):
        return spec
    if isinstance(spec, dict):
        spec = BodySpec.from_dict(spec)
    if spec.kind not in _CLASSES:
        raise InvalidSpec(f"unknown body kind {spec.kind!r}")
    for k, v in spec.params.items():
        if isinstance(v, (int, float)) and v is not None and not isinstance(v, bool):
            if math.isnan(v) or (math.isinf(v) and k != "V"):
                raise InvalidSpec(f"parameter {k} must be finite")
    n = spec.n
    if n is not None and (int(n) != n or n < 1):
        raise InvalidSpec("n must be a positive integer")
    needs_n = spec.kind in ("L2Ball", "L1Ball", "LpBall", "IsotonicTV", "IsotonicBox",
                            "MultiIsotonicLattice", "SolidOfRevolution", "FullSpace")
    if needs_n and n is None:
        raise InvalidSpec(f"{spec.kind} needs n")
    try:
        body = _CLASSES[spec.kind](spec, n, **spec.params)
    except TypeError as exc:
        raise InvalidSpec(str(exc)) from exc
    if n is not None and body.n != n:
        raise InvalidSpec(f"declared n={n} does not match parameters (n={body.n})")
    return body


# -------------------------------------------------------------------- module-level operations
def membership(body, x, tol=PROJ_TOL):
    return make_body(body).membership(x, tol)


def project(body, y):
    return make_body(body).project(y)


def separation_oracle(body, x, tol=PROJ_TOL) -> SeparationResult:
    body = make_body(body)
    x = np.asarray(x, dtype=float)
    if body.membership(x, tol):
        return SeparationResult("Inside")
    px = body.project(x)
    a = x - px
    return SeparationResult("Outside", a, float(a @ px))


def diameter(body) -> Diameter:
    return make_body(body).diameter()


def _dist_center(body, c):
    return float(np.linalg.norm(c - body.project(c)))


def intersect_dual(body, center, radius, Y, tol=DYKSTRA_TOL, max_iter=300):
    """Projection of rows of ``Y`` onto B(center, radius) ∩ K.

    Uses the one-dimensional dual: x(lam) = P_K((y + lam c)/(1 + lam)) with lam
    chosen so that ||x(lam) - c|| = radius; stops on a duality gap below tol**2.
    """
    body = make_body(body)
    Y, one = _as2d(Y, body.n)
    c = np.asarray(center, dtype=float)
    r = float(radius)
    if _dist_center(body, c) > r + tol:
        raise EmptyIntersection("ball misses the body")
    X = body._project(Y)
    phi = np.linalg.norm(X - c, axis=1)
    act = np.flatnonzero(phi > r)
    if act.size:
        Ya = Y[act]
        yc2 = ((Ya - c) ** 2).sum(1)
        lo = np.zeros(act.size)
        hi = np.ones(act.size)
        best = body._project(np.broadcast_to(c, Ya.shape).copy())
        fbest = ((best - Ya) ** 2).sum(1)
        # q(0) = ||P_K y - y||^2 is a valid lower bound
        qbest = ((X[act] - Ya) ** 2).sum(1)

        def evaluate(lam, rows):
            z = (Ya[rows] + lam[:, None] * c) / (1 + lam[:, None])
            x = body._project(z)
            dc = np.linalg.norm(x - c, axis=1)
            q = (1 + lam) * ((x - z) ** 2).sum(1) + lam * yc2[rows] / (1 + lam) - lam * r * r
            return x, dc, q

        bracketed = np.zeros(act.size, dtype=bool)
        for it in range(max_iter):
            live = np.flatnonzero(fbest - qbest > tol * tol * np.maximum(1.0, yc2))
            if live.size == 0:
                break
            lam = np.where(bracketed[live], np.where(lo[live] > 0, np.sqrt(lo[live] * hi[live]),
                                                     0.5 * hi[live]), hi[live])
            x, dc, q = evaluate(lam, live)
            qbest[live] = np.maximum(qbest[live], q)
            feas = dc <= r
            f = ((x - Ya[live]) ** 2).sum(1)
            upd = feas & (f < fbest[live])
            fbest[live[upd]] = f[upd]
            best[live[upd]] = x[upd]
            hi[live[feas]] = lam[feas]
            bracketed[live[feas]] = True
            nf = ~feas
            lo[live[nf]] = lam[nf]
            grow = nf & ~bracketed[live]
            hi[live[grow]] = lam[grow] * 4.0
            stuck = bracketed[live] & (hi[live] <= lo[live] * (1 + 1e-15))
            qbest[live[stuck]] = fbest[live[stuck]]
        else:
            gap = float(np.max(fbest - qbest))
            raise NonConvergence("ball-body projection", max_iter, gap)
        X[act] = best
    return X[0] if one else X


def dykstra(body, center, radius, y, tol=DYKSTRA_TOL, max_iter=MAX_ITER):
    """Dykstra alternating projections between the ball and K (rows vectorised)."""
    body = make_body(body)
    Y, one = _as2d(y, body.n)
    c = np.asarray(center, dtype=float)
    r = float(radius)
    if _dist_center(body, c) > r + tol:
        raise EmptyIntersection("ball misses the body")
    x = Y.copy()
    p = np.zeros_like(Y)
    q = np.zeros_like(Y)
    for it in range(1, max_iter + 1):
        w = x + p
        d = w - c
        nd = np.linalg.norm(d, axis=1)
        u = c + d * np.where(nd > r, r / np.maximum(nd, 1e-300), 1.0)[:, None]
        p = w - u
        xn = body._project(u + q)
        q = u + q - xn
        res = float(np.max(np.linalg.norm(xn - x, axis=1)))
        gap = float(np.max(np.linalg.norm(u - xn, axis=1)))
        x = xn
        if res <= tol and gap <= tol:
            break
    else:
        raise NonConvergence("Dykstra", max_iter, res)
    nd = np.linalg.norm(x - c, axis=1)
    x = np.where((nd > r)[:, None], u, x) if np.any(nd > r + tol) else x
    return x[0] if one else x


def project_intersection(body, center, radius, y, method="dykstra", tol=DYKSTRA_TOL,
                         max_iter=MAX_ITER):
    """Euclidean projection of ``y`` onto B(center, radius) ∩ K.

    ``method="dykstra"`` runs corrected alternating projections;
    ``method="dual"`` bisects the scalar multiplier of the ball constraint.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if method == "dual":
        return intersect_dual(body, center, radius, y, tol=tol)
    return dykstra(body, center, radius, y, tol=tol, max_iter=max_iter)


def sample_points(body, count, mode="Interior", rng_seed=0):
    """Deterministic member points; see module docs for the three modes."""
    body = make_body(body)
    if count < 1:
        raise ValueError("count must be >= 1")
    if isinstance(body, Singleton):
        return [body.p.copy() for _ in range(count)]
    rng = substream(rng_seed, tag_of("sample", mode, body.kind, body.n))
    c = body.center()
    R = body.radius_bound()
    scale = R if R is not None and R > 0 else math.sqrt(body.n)
    if mode == "ProbeGrid":
        pts = [np.asarray(p, float) for p in body.structured_points()]
        extra = max(0, count - len(pts))
        if extra:
            pts += sample_points(body, extra, "Interior", rng_seed)
        return pts
    if mode == "Boundary":
        if isinstance(body, (FullSpace, Subspace)):
            raise UnsupportedMode(f"{body.kind} has no boundary sampler")
        g = rng.standard_normal((count, body.n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return list(body.project(c + 10.0 * scale * g))
    if mode == "Interior":
        g = rng.standard_normal((count, body.n)) * (1.5 * scale / math.sqrt(body.n))
        P = body.project(c + g)
        lam = rng.uniform(size=(count, 1))
        return list(c + lam * (P - c))
    raise UnsupportedMode(f"unknown mode {mode}")
