"""Local Gaussian widths by Monte Carlo over an exact linear-maximization subroutine."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._rng import CHUNK, chunk_bounds, gaussian_rows, ordered_map, tag_of
from .bodies import intersect_dual, make_body
from .errors import InvalidPrecision, NonConvergence

WIDTH_TAG = tag_of("width-draws")


@dataclass
class LinMaxResult:
    maximizer: np.ndarray
    value: float
    iterations: int
    residual: float  # certified gap: dual upper bound minus returned value


@dataclass
class WidthEstimate:
    value: float
    center: np.ndarray
    radius: float
    sample_count: int
    precision: float
    confidence: float
    seed: int
    stderr: float = 0.0
    failed_fraction: float = 0.0
    raw_value: float | None = None
    smoothed: bool = False
    meta: dict = field(default_factory=dict)

    def csv_row(self, body_id="", center_id=""):
        return [body_id, center_id, repr(self.radius), repr(self.value), repr(self.precision),
                repr(self.confidence), self.sample_count, self.seed]


CSV_HEADER = ["body_id", "center_id", "eps", "value", "t", "delta", "N", "seed"]


def mc_sample_count(eps: float, t: float, delta: float) -> int:
    """Sample size making the Monte-Carlo mean t-accurate with probability 1 - delta."""
    if not t > 0 or not 0 < delta < 1:
        raise InvalidPrecision("need t > 0 and 0 < delta < 1")
    if eps < 0:
        raise InvalidPrecision("radius must be nonnegative")
    return max(1, math.ceil(2 * eps * eps * math.log(2 / delta) / (t * t)))


def _path_max(body, nu, eps, Xi, abs_tol, max_iter=400, return_s=False):
    """Row-wise sup of <xi, eta - nu> over B(nu, eps) ∩ K.

    Follows s -> P_K(nu + s xi): by Lagrange duality with multiplier 1/(2s),
    ub(s) = <xi, eta_s - nu> + (eps^2 - |eta_s - nu|^2)/(2s) bounds the optimum
    from above, and any eta_s inside the ball is a feasible lower bound.
    ``|eta_s - nu|`` is nondecreasing in s, so a bracketing search on s closes
    the gap: log-log regula falsi toward |eta_s - nu| = eps, with a geometric
    bisection whenever the bracket fails to halve (in log s).
    """
    m, n = Xi.shape
    xn = np.linalg.norm(Xi, axis=1)
    best = np.broadcast_to(nu, (m, n)).copy()
    lo = np.zeros(m)
    s_best = np.full(m, np.inf)
    ub = np.where(xn > 0, eps * xn, 0.0)
    iters = np.zeros(m, dtype=int)
    s = np.where(xn > 0, eps / np.maximum(xn, 1e-300), 1.0)
    s_lo = np.zeros(m)
    s_hi = np.full(m, np.inf)
    d_lo = np.zeros(m)
    d_hi = np.full(m, np.inf)
    width = np.full(m, np.inf)          # log(s_hi / s_lo) before the last step
    log_eps = math.log(eps)
    act = np.flatnonzero(ub - lo > abs_tol)
    for it in range(max_iter):
        if act.size == 0:
            break
        sa = s[act]
        eta = body._project(nu + sa[:, None] * Xi[act])
        diff = eta - nu
        dist2 = (diff * diff).sum(1)
        val = (Xi[act] * diff).sum(1)
        ub[act] = np.minimum(ub[act], val + (eps * eps - dist2) / (2 * sa))
        feas = dist2 <= eps * eps * (1 + 1e-12)
        better = feas & (val > lo[act])
        lo[act[better]] = val[better]
        best[act[better]] = eta[better]
        s_best[act[better]] = sa[better]
        dist = np.sqrt(dist2)
        s_lo[act[feas]] = sa[feas]
        d_lo[act[feas]] = dist[feas]
        s_hi[act[~feas]] = sa[~feas]
        d_hi[act[~feas]] = dist[~feas]
        iters[act] += 1
        a_lo, a_hi = s_lo[act], s_hi[act]
        bracketed = np.isfinite(a_hi) & (a_lo > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            lw = np.where(bracketed, np.log(a_hi / np.where(a_lo > 0, a_lo, 1.0)), np.inf)
            geo = np.sqrt(a_lo * np.where(np.isinf(a_hi), 1, a_hi))
            ld_lo, ld_hi = np.log(d_lo[act]), np.log(d_hi[act])
            frac = (log_eps - ld_lo) / (ld_hi - ld_lo)
            usable = bracketed & (d_lo[act] > 0) & np.isfinite(frac) & (lw <= 0.5 * width[act])
            frac = np.clip(np.where(usable, frac, 0.5), 0.02, 0.98)
            falsi = a_lo * np.exp(frac * np.where(bracketed, lw, 0.0))
        width[act] = lw
        nxt = np.where(np.isinf(a_hi), 2 * sa,
                       np.where(a_lo > 0, np.where(usable, falsi, geo), 0.5 * a_hi))
        s[act] = nxt
        stuck = np.isfinite(a_hi) & (a_lo > 0) & (a_hi <= a_lo * (1 + 1e-15))
        huge = np.isinf(a_hi) & (sa > 1e300)
        done = (ub[act] - lo[act] <= abs_tol) | stuck | huge
        act = act[~done]
    else:
        raise NonConvergence("linear maximization", max_iter, float(np.max(ub[act] - lo[act])))
    if return_s:
        return lo, best, iters, np.maximum(ub - lo, 0.0), s_best
    return lo, best, iters, np.maximum(ub - lo, 0.0)


def _intersection_max(body, nu, eps, Xi, abs_tol, max_iter=60):
    # project nu + s xi onto B ∩ K for growing s; the value increases to the optimum
    m = Xi.shape[0]
    prev = np.zeros(m)
    xn = np.maximum(np.linalg.norm(Xi, axis=1), 1e-300)
    for it in range(1, max_iter + 1):
        s = eps / xn * 2.0 ** it
        eta = intersect_dual(body, nu, eps, nu + s[:, None] * Xi, tol=1e-12)
        val = ((eta - nu) * Xi).sum(1)
        if np.all(np.abs(val - prev) <= abs_tol):
            return val, eta, np.full(m, it), np.abs(val - prev)
        prev = val
    raise NonConvergence("linear maximization by intersection projection", max_iter,
                         float(np.max(np.abs(val - prev))))


def linear_max(body, nu, eps, xi, tol=1e-8, method="path") -> LinMaxResult:
    """Maximize <xi, eta - nu> over B(nu, eps) ∩ K to relative accuracy ``tol``."""
    body = make_body(body)
    nu = np.asarray(nu, dtype=float)
    xi = np.asarray(xi, dtype=float)[None, :]
    if eps <= 0:
        return LinMaxResult(nu.copy(), 0.0, 0, 0.0)
    abs_tol = tol * eps * max(float(np.linalg.norm(xi)), 1e-300)
    fn = _path_max if method == "path" else _intersection_max
    val, eta, it, res = fn(body, nu, float(eps), xi, abs_tol)
    return LinMaxResult(eta[0], max(float(val[0]), 0.0), int(it[0]), float(res[0]))


def width_samples(body, nu, eps, Xi, abs_tol, method="path"):
    """Per-draw suprema for a block of Gaussian rows (values clipped at 0)."""
    if eps <= 0:
        return np.zeros(Xi.shape[0])
    fn = _path_max if method == "path" else _intersection_max
    return np.maximum(fn(body, nu, float(eps), Xi, abs_tol)[0], 0.0)


def _mc_values(body, nu, eps, draws, abs_tol, method="path"):
    blocks = chunk_bounds(draws.shape[0], CHUNK)
    parts = ordered_map(lambda ab: width_samples(body, nu, eps, draws[ab[0]:ab[1]], abs_tol, method),
                        blocks)
    return np.concatenate(parts) if parts else np.zeros(0)


def local_width(body, nu, eps, t, delta, seed, method="path") -> WidthEstimate:
    """Monte-Carlo local Gaussian width at ``nu`` and radius ``eps``.

    Inner maximizations are solved to absolute accuracy t/10; a failed inner
    solve raises instead of being silently dropped.
    """
    body = make_body(body)
    nu = np.asarray(nu, dtype=float)
    N = mc_sample_count(eps, t, delta)
    draws = gaussian_rows(seed, WIDTH_TAG, N, body.n)
    vals = _mc_values(body, nu, eps, draws, t / 10, method)
    se = float(vals.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    return WidthEstimate(float(vals.mean()), nu, float(eps), N, float(t), float(delta), int(seed),
                         stderr=se)


def width_profile(body, nu, eps_grid, t, delta, seed, method="path") -> list[WidthEstimate]:
    """Widths on an increasing grid with common draws, then isotonic smoothing."""
    body = make_body(body)
    grid = np.asarray(eps_grid, dtype=float)
    if grid.size and np.any(np.diff(grid) <= 0):
        raise ValueError("radius grid must be strictly increasing")
    nu = np.asarray(nu, dtype=float)
    N = mc_sample_count(float(grid.max()) if grid.size else 0.0, t, delta)
    draws = gaussian_rows(seed, WIDTH_TAG, N, body.n)
    raw = np.array([_mc_values(body, nu, e, draws, t / 10, method).mean() for e in grid])
    smooth = K.pava_rows(raw[None, :])[0] if raw.size else raw
    return [WidthEstimate(float(v), nu, float(e), N, float(t), float(delta), int(seed),
                          raw_value=float(r), smoothed=True)
            for e, r, v in zip(grid, raw, smooth)]


class WidthOracle:
    """Cached widths with relative precision ``t = t_rel * eps`` and fixed draws.

    Because t scales with eps the sample size does not depend on eps, so one
    draw matrix is shared by every center and radius (common random numbers).
    """

    def __init__(self, body, t_rel=0.05, delta=0.05, seed=0, max_samples=None, method="path"):
        self.body = make_body(body)
        self.t_rel, self.delta, self.seed = float(t_rel), float(delta), int(seed)
        self.N = mc_sample_count(1.0, self.t_rel, self.delta)
        if max_samples is not None:
            self.N = min(self.N, int(max_samples))
        self.draws = gaussian_rows(self.seed, WIDTH_TAG, self.N, self.body.n)
        self.method = method
        self._cache = {}

    def __call__(self, nu, eps) -> float:
        nu = np.asarray(nu, dtype=float)
        key = (nu.tobytes(), float(eps))
        if key not in self._cache:
            v = _mc_values(self.body, nu, float(eps), self.draws, self.t_rel * eps / 10, self.method)
            self._cache[key] = float(v.mean()) if v.size else 0.0
        return self._cache[key]

    def estimate(self, nu, eps) -> WidthEstimate:
        return WidthEstimate(self(nu, eps), np.asarray(nu, float), float(eps), self.N,
                             self.t_rel * eps, self.delta, self.seed)


def global_width(body, t=0.05, delta=0.05, seed=0) -> WidthEstimate:
    """w(K) = E sup over K of <xi, eta - c>, using a ball that contains K."""
    body = make_body(body)
    R = body.radius_bound()
    if R is None:
        return WidthEstimate(math.inf, body.center(), math.inf, 0, t, delta, seed)
    return local_width(body, body.center(), R * (1 + 1e-9) + 1e-12, t, delta, seed)
