"""Inner loops with a numba implementation and a pure numpy fallback.

Set ``SEQLAB_NO_NUMBA=1`` before import to force the numpy versions.  Both
implementations are exposed through ``NUMBA_IMPL`` and ``NUMPY_IMPL`` so the
benchmark and the tests can call either one directly.
"""
import os

import numpy as np
from scipy.optimize import isotonic_regression

try:
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f
        if args and callable(args[0]):
            return args[0]
        return deco

USE_NUMBA = HAS_NUMBA and os.environ.get("SEQLAB_NO_NUMBA", "0") not in ("1", "true", "yes")


# ---------------------------------------------------------------- isotonic
@njit(cache=True)
def _pava_rows_nb(Y):
    m, n = Y.shape
    out = np.empty_like(Y)
    val = np.empty(n)
    wt = np.empty(n)
    cnt = np.empty(n, dtype=np.int64)
    for r in range(m):
        k = -1
        for i in range(n):
            k += 1
            val[k] = Y[r, i]
            wt[k] = 1.0
            cnt[k] = 1
            while k > 0 and val[k - 1] > val[k]:
                w = wt[k - 1] + wt[k]
                val[k - 1] = (wt[k - 1] * val[k - 1] + wt[k] * val[k]) / w
                wt[k - 1] = w
                cnt[k - 1] += cnt[k]
                k -= 1
        pos = 0
        for j in range(k + 1):
            for _ in range(cnt[j]):
                out[r, pos] = val[j]
                pos += 1
    return out


def _pava_rows_np(Y):
    out = np.empty_like(Y)
    for r in range(Y.shape[0]):
        out[r] = isotonic_regression(Y[r]).x
    return out


@njit(cache=True)
def _pava_line(v, out, val, wt, cnt):
    k = -1
    for i in range(v.size):
        k += 1
        val[k] = v[i]
        wt[k] = 1.0
        cnt[k] = 1
        while k > 0 and val[k - 1] > val[k]:
            w = wt[k - 1] + wt[k]
            val[k - 1] = (wt[k - 1] * val[k - 1] + wt[k] * val[k]) / w
            wt[k - 1] = w
            cnt[k - 1] += cnt[k]
            k -= 1
    pos = 0
    for j in range(k + 1):
        for _ in range(cnt[j]):
            out[pos] = val[j]
            pos += 1


@njit(cache=True)
def _lattice_iso_nb(Y, lines, tol, maxit):
    m, n = Y.shape
    p, L, s = lines.shape
    out = np.empty_like(Y)
    used = np.empty(m, dtype=np.int64)
    x = np.empty(n)
    prev = np.empty(n)
    inc = np.empty((p, n))
    v = np.empty(s)
    z = np.empty(s)
    val = np.empty(s)
    wt = np.empty(s)
    cnt = np.empty(s, dtype=np.int64)
    for r in range(m):
        x[:] = Y[r]
        inc[:] = 0.0
        used[r] = -1
        for it in range(maxit):
            prev[:] = x
            for j in range(p):
                for l in range(L):
                    for i in range(s):
                        q = lines[j, l, i]
                        v[i] = x[q] + inc[j, q]
                    _pava_line(v, z, val, wt, cnt)
                    for i in range(s):
                        q = lines[j, l, i]
                        inc[j, q] = v[i] - z[i]
                        x[q] = z[i]
            change = 0.0
            for i in range(n):
                change = max(change, abs(x[i] - prev[i]))
            if change <= tol:
                ok = True
                for j in range(p):
                    for l in range(L):
                        for i in range(s - 1):
                            if x[lines[j, l, i + 1]] - x[lines[j, l, i]] < -10 * tol:
                                ok = False
                if ok:
                    used[r] = it + 1
                    break
        out[r] = x
    return out, used


def _lattice_iso_np(Y, lines, tol, maxit):
    m, n = Y.shape
    p, L, side = lines.shape
    out = Y.copy()
    used = np.full(m, -1, dtype=np.int64)
    act = np.arange(m)
    x = Y.copy()
    inc = np.zeros((p, m, n))
    for it in range(maxit):
        prev = x.copy()
        for j in range(p):
            idx = lines[j]
            v = x[:, idx] + inc[j][:, idx]
            z = _pava_rows_np(v.reshape(-1, side)).reshape(v.shape)
            inc[j][:, idx] = v - z
            x[:, idx] = z
        conv = np.max(np.abs(x - prev), axis=1) <= tol
        for j in range(p):
            conv &= np.all(np.diff(x[:, lines[j]], axis=2) >= -10 * tol, axis=(1, 2))
        out[act] = x
        used[act[conv]] = it + 1
        keep = ~conv
        act, x, inc = act[keep], x[keep], inc[:, keep]
        if act.size == 0:
            break
    return out, used


# ---------------------------------------------------------------- greedy packing
@njit(cache=True)
def _greedy_pack_nb(X, delta2, limit):
    m, n = X.shape
    keep = np.empty(m, dtype=np.int64)
    acc = np.empty((m, n))  # kept rows, contiguous
    k = 0
    for i in range(m):
        ok = True
        for j in range(k):
            s = 0.0
            for c in range(n):
                t = X[i, c] - acc[j, c]
                s += t * t
                if s > delta2:
                    break
            if s <= delta2:
                ok = False
                break
        if ok:
            keep[k] = i
            acc[k] = X[i]
            k += 1
            if k >= limit:
                break
    return keep[:k]


def _greedy_pack_np(X, delta2, limit):
    m = X.shape[0]
    acc = np.empty_like(X)
    keep = []
    for i in range(m):
        k = len(keep)
        if k:
            d = acc[:k] - X[i]
            if np.einsum("ij,ij->i", d, d).min() <= delta2:
                continue
        acc[k] = X[i]
        keep.append(i)
        if len(keep) >= limit:
            break
    return np.asarray(keep, dtype=np.int64)


# ---------------------------------------------------------------- l1 ball
@njit(cache=True)
def _l1_project_nb(Y, r):
    m, n = Y.shape
    out = np.empty_like(Y)
    for i in range(m):
        a = np.abs(Y[i])
        if a.sum() <= r:
            out[i] = Y[i]
            continue
        u = np.sort(a)[::-1]
        css = 0.0
        theta = 0.0
        for j in range(n):
            css += u[j]
            t = (css - r) / (j + 1)
            if u[j] - t > 0:
                theta = t
        for j in range(n):
            v = a[j] - theta
            out[i, j] = np.sign(Y[i, j]) * (v if v > 0 else 0.0)
    return out


def _l1_project_np(Y, r):
    a = np.abs(Y)
    inside = a.sum(axis=1) <= r
    u = -np.sort(-a, axis=1)
    css = np.cumsum(u, axis=1) - r
    idx = np.arange(1, Y.shape[1] + 1)
    cond = u - css / idx > 0
    rho = Y.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(Y.shape[0]), rho] / (rho + 1)
    out = np.sign(Y) * np.maximum(a - theta[:, None], 0.0)
    out[inside] = Y[inside]
    return out


# ---------------------------------------------------------------- ellipsoid
@njit(cache=True)
def _ellipsoid_project_nb(Y, d, tol, maxit):
    m, n = Y.shape
    out = np.empty_like(Y)
    d2 = d * d
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += d2[j] * Y[i, j] ** 2
        if s <= 1.0:
            out[i] = Y[i]
            continue
        lam = 0.0
        for _ in range(maxit):
            f = -1.0
            g = 0.0
            for j in range(n):
                q = 1.0 + lam * d2[j]
                t = d2[j] * Y[i, j] ** 2 / (q * q)
                f += t
                g -= 2.0 * t * d2[j] / q
            if abs(f) < tol or g == 0.0:
                break
            lam -= f / g
        for j in range(n):
            out[i, j] = Y[i, j] / (1.0 + lam * d2[j])
    return out


def _ellipsoid_project_np(Y, d, tol, maxit):
    d2 = d * d
    s = (Y * Y) @ d2
    out = Y.copy()
    act = s > 1.0
    if not act.any():
        return out
    Ya = Y[act]
    lam = np.zeros(Ya.shape[0])
    for _ in range(maxit):
        q = 1.0 + lam[:, None] * d2
        t = d2 * Ya * Ya / (q * q)
        f = t.sum(axis=1) - 1.0
        g = -2.0 * (t * d2 / q).sum(axis=1)
        live = np.abs(f) >= tol
        if not live.any():
            break
        lam = np.where(live, lam - f / np.where(g == 0, -1.0, g), lam)
    out[act] = Ya / (1.0 + lam[:, None] * d2)
    return out


# ---------------------------------------------------------------- lp ball, 1 < p < 2
# Coordinates solve t + lam p t^(p-1) = a.  In v = t^(p-1) this reads
# v^q + lam p v = a with q = 1/(p-1) > 1, convex and increasing, so Newton from
# v0 = min(a/(lam p), a^(p-1)) >= root decreases monotonically to the root.
# The multiplier lam solves sum u^p = r^p by safeguarded Newton in a bracket.
@njit(cache=True)
def _lp_inner_nb(a, lam, p, u, du):
    n = a.shape[0]
    q = 1.0 / (p - 1.0)
    for j in range(n):
        aj = a[j]
        if aj == 0.0 or lam == 0.0:
            u[j] = aj
            du[j] = 0.0 if aj == 0.0 else -p * aj ** (p - 1.0)
            continue
        v = min(aj / (lam * p), aj ** (p - 1.0))
        for _ in range(100):
            f = v ** q + lam * p * v - aj
            if f <= 0.0:
                break
            step = f / (q * v ** (q - 1.0) + lam * p)
            v -= step
            if step <= 1e-16 * v:
                break
        t = v ** q
        u[j] = t
        du[j] = -p * v / (1.0 + lam * p * (p - 1.0) * v / t) if t > 0 else 0.0


@njit(cache=True)
def _lp_project_nb(Y, p, r, tol, maxit):
    m, n = Y.shape
    out = np.empty_like(Y)
    u = np.empty(n)
    du = np.empty(n)
    rp = r ** p
    for i in range(m):
        a = np.abs(Y[i])
        if (a ** p).sum() <= rp:
            out[i] = Y[i]
            continue
        lo = 0.0
        hi = 1.0
        while True:
            _lp_inner_nb(a, hi, p, u, du)
            if (u ** p).sum() <= rp:
                break
            lo = hi
            hi *= 4.0
        lam = 0.5 * (lo + hi)
        for _ in range(maxit):
            _lp_inner_nb(a, lam, p, u, du)
            phi = (u ** p).sum() - rp
            if phi > 0:
                lo = lam
            else:
                hi = lam
            if abs(phi) <= tol * rp or hi - lo <= tol * max(1.0, hi):
                break
            dphi = 0.0
            for j in range(n):
                if u[j] > 0:
                    dphi += p * u[j] ** (p - 1.0) * du[j]
            nl = lam - phi / dphi if dphi < 0 else 0.5 * (lo + hi)
            if not (lo < nl < hi):
                nl = 0.5 * (lo + hi)
            lam = nl
        _lp_inner_nb(a, lam, p, u, du)
        tot = (u ** p).sum()
        if tot > rp:  # converged from the infeasible side; the radial fix is O(tol)
            u *= (rp / tot) ** (1.0 / p)
        for j in range(n):
            out[i, j] = np.sign(Y[i, j]) * u[j]
    return out


def _lp_inner_np(A, lam, p):
    q = 1.0 / (p - 1.0)
    lamc = np.broadcast_to(np.asarray(lam, float).reshape(-1, 1), A.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.minimum(A / (lamc * p), A ** (p - 1.0))
        v = np.where(A == 0, 0.0, v)
        for _ in range(100):
            f = v ** q + lamc * p * v - A
            act = f > 0
            if not act.any():
                break
            step = np.where(act, f / (q * v ** (q - 1.0) + lamc * p), 0.0)
            v = v - step
            if np.all(step <= 1e-16 * v):
                break
        t = np.where(A == 0, 0.0, v ** q)
        du = np.where(t > 0, -p * v / (1.0 + lamc * p * (p - 1.0) * v / t), 0.0)
    zero_lam = lamc == 0
    if zero_lam.any():
        t = np.where(zero_lam, A, t)
        du = np.where(zero_lam, -p * A ** (p - 1.0), du)
    return t, du


def _lp_project_np(Y, p, r, tol, maxit):
    out = Y.copy()
    A = np.abs(Y)
    act = (A ** p).sum(axis=1) > r ** p
    if not act.any():
        return out
    A = A[act]
    rp = r ** p
    lo = np.zeros(A.shape[0])
    hi = np.ones(A.shape[0])
    for _ in range(200):
        big = (_lp_inner_np(A, hi, p)[0] ** p).sum(axis=1) > rp
        if not big.any():
            break
        lo = np.where(big, hi, lo)
        hi = np.where(big, hi * 4.0, hi)
    lam = 0.5 * (lo + hi)
    for _ in range(maxit):
        u, du = _lp_inner_np(A, lam, p)
        phi = (u ** p).sum(axis=1) - rp
        lo = np.where(phi > 0, lam, lo)
        hi = np.where(phi > 0, hi, lam)
        if np.all((np.abs(phi) <= tol * rp) | (hi - lo <= tol * np.maximum(1.0, hi))):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = np.where(u > 0, p * u ** (p - 1.0) * du, 0.0).sum(axis=1)
            nl = np.where(dphi < 0, lam - phi / dphi, 0.5 * (lo + hi))
        lam = np.where((nl > lo) & (nl < hi), nl, 0.5 * (lo + hi))
    u, _ = _lp_inner_np(A, lam, p)
    tot = (u ** p).sum(axis=1)
    u *= np.where(tot > rp, (rp / tot) ** (1.0 / p), 1.0)[:, None]
    out[act] = np.sign(Y[act]) * u
    return out


NUMBA_IMPL = dict(pava_rows=_pava_rows_nb, greedy_pack=_greedy_pack_nb,
                  l1_project=_l1_project_nb, ellipsoid_project=_ellipsoid_project_nb,
                  lp_project=_lp_project_nb, lattice_iso=_lattice_iso_nb)
NUMPY_IMPL = dict(pava_rows=_pava_rows_np, greedy_pack=_greedy_pack_np,
                  l1_project=_l1_project_np, ellipsoid_project=_ellipsoid_project_np,
                  lp_project=_lp_project_np, lattice_iso=_lattice_iso_np)
_IMPL = NUMBA_IMPL if USE_NUMBA else NUMPY_IMPL


def _c(Y):
    return np.ascontiguousarray(Y, dtype=np.float64)


def pava_rows(Y):
    """Row-wise projection onto the nondecreasing cone."""
    return _IMPL["pava_rows"](_c(Y))


def greedy_pack(X, delta, limit=None):
    """Indices kept by a greedy pass: pairwise distance strictly above ``delta``."""
    X = _c(X)
    lim = X.shape[0] if limit is None else int(limit)
    return _IMPL["greedy_pack"](X, float(delta) ** 2, lim)


def l1_project(Y, r):
    return _IMPL["l1_project"](_c(Y), float(r))


def ellipsoid_project(Y, d, tol=1e-13, maxit=200):
    return _IMPL["ellipsoid_project"](_c(Y), _c(d), tol, maxit)


def lp_project(Y, p, r, tol=1e-14, maxit=200):
    return _IMPL["lp_project"](_c(Y), float(p), float(r), tol, maxit)


def lattice_iso(Y, lines, tol=1e-11, maxit=100_000):
    """Dykstra over per-axis PAVA on a lattice; ``lines[j]`` lists flat indices along axis j.

    Returns (projection, iterations used per row, -1 where not converged).
    """
    return _IMPL["lattice_iso"](_c(Y), np.ascontiguousarray(lines, dtype=np.int64),
                                float(tol), int(maxit))
