"""Solver-independent reference computations used by the tests."""
import math

import numpy as np
from scipy import special

PER_AXIS = {1: 101, 2: 31, 3: 17, 4: 11}


def gauss_norm_mean(n):
    """E|g| for g ~ N(0, I_n)."""
    return math.sqrt(2) * math.exp(special.gammaln((n + 1) / 2) - special.gammaln(n / 2))


def _grid(lo, hi, m):
    axes = [np.linspace(a, b, m) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))


def grid_search(member, score, lo, hi, x0, final_step=1e-5, per_axis=None, embed=None):
    """Maximise ``score`` over grid members, halving the window around the incumbent.

    ``member(X)`` is a closed-form membership mask.  With ``embed`` the grid lives in
    parameter space and is mapped to ambient points before scoring.
    Returns (argmax in ambient coordinates, best score).
    """
    emb = embed or (lambda G: G)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    m = per_axis or PER_AXIS[lo.size]
    best = np.asarray(x0, float)
    best_s = float(score(emb(best[None]))[0])
    while True:
        G = _grid(lo, hi, m)
        G = G[member(G)]
        if len(G):
            s = score(emb(G))
            j = int(np.argmax(s))
            if s[j] > best_s:
                best, best_s = G[j], float(s[j])
        if float(np.max(hi - lo)) / (m - 1) <= final_step:
            return emb(best[None])[0], best_s
        # halving: a faster shrink loses the optimum along flat or curved faces
        half = 0.25 * float(np.max(hi - lo))
        lo, hi = best - half, best + half


def grid_project(member, y, x0, **kw):
    """Nearest grid member to y; ``x0`` is any member, so the minimiser lies within |y - x0| of y."""
    y = np.asarray(y, float)
    R = float(np.linalg.norm(y - x0)) + 1e-9
    return grid_search(member, lambda X: -((X - y) ** 2).sum(1), y - R, y + R, x0, **kw)


def projection_certificate(member, y, p, x0, **kw):
    """Grid maximum of <y - p, x - p> over members x in the box that must hold Pi_K(y).

    For a member p this bounds |p - Pi_K(y)|^2 from above (up to grid error).
    """
    y, p = np.asarray(y, float), np.asarray(p, float)
    R = float(np.linalg.norm(y - x0)) + 1e-9
    d = y - p
    return grid_search(member, lambda X: (X - p) @ d, y - R, y + R, p, **kw)[1]


def brute_linear_max(members, nu, eps, xi):
    """max <xi, x - nu> over the given members of K that lie in B(nu, eps)."""
    M = np.asarray(members, float)
    ok = np.linalg.norm(M - nu, axis=1) <= eps
    return float(((M[ok] - nu) @ xi).max())


def clamp_risk_closed_form(a, sigma, mu=0.0):
    """Truncated-normal moments: E (clip(mu + sigma z, -a, a) - mu)^2."""
    from scipy.stats import norm
    lo, hi = (-a - mu) / sigma, (a - mu) / sigma
    inner = sigma ** 2 * (norm.cdf(hi) - norm.cdf(lo) - (hi * norm.pdf(hi) - lo * norm.pdf(lo)))
    return inner + (a - mu) ** 2 * norm.sf(hi) + (a + mu) ** 2 * norm.cdf(lo)
