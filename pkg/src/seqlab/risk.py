"""Monte-Carlo risk of the LSE and of simple comparison estimators; 1-D oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from ._rng import CHUNK, chunk_bounds, ordered_map, substream, tag_of
from .bodies import make_body, sample_points
from .errors import UnsupportedEstimator

ESTIMATORS = ("LSE", "Identity", "SubspaceProj", "AxisProj", "Clamp1D", "PackingDescent1D")
RISK_TAG = tag_of("risk-draws")
RISK_CSV_HEADER = ["body_id", "mu_id", "sigma", "estimator", "mean", "stderr", "reps", "seed"]


@dataclass
class RiskEstimate:
    mean: float
    std_error: float
    replications: int
    mu: np.ndarray
    sigma: float
    estimator: str = "LSE"
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def csv_row(self, body_id="", mu_id=""):
        return [body_id, mu_id, repr(self.sigma), self.estimator, repr(self.mean), repr(self.std_error),
                str(self.replications), str(self.seed)]

    def to_dict(self):
        return {"mean": self.mean, "std_error": self.std_error, "replications": self.replications,
                "sigma": self.sigma, "estimator": self.estimator, "seed": self.seed, **self.meta}


def _mc(estimate_fn, mu, sigma, reps, seed, antithetic):
    """Per-replication squared errors, or per-pair means when ``antithetic``."""
    mu = np.asarray(mu, float)
    n = mu.size
    draws = reps // 2 if antithetic else reps

    def block(args):
        j, (a, b) = args
        xi = substream(seed, RISK_TAG, j).standard_normal((b - a, n))
        err = estimate_fn(mu + sigma * xi) - mu
        e2 = (err * err).sum(1)
        if antithetic:
            err = estimate_fn(mu - sigma * xi) - mu
            e2 = 0.5 * (e2 + (err * err).sum(1))
        return e2

    parts = ordered_map(block, list(enumerate(chunk_bounds(draws, CHUNK))))
    return np.concatenate(parts) if parts else np.zeros(0)


def _summarize(vals, reps, mu, sigma, name, seed, antithetic, **meta):
    m = vals.size
    mean = float(vals.mean()) if m else 0.0
    se = float(vals.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return RiskEstimate(max(mean, 0.0), se, int(reps), np.asarray(mu, float), float(sigma), name, int(seed),
                        {"antithetic": bool(antithetic), **meta})


def lse_risk(body, mu, sigma, reps=2000, seed=0, antithetic=None) -> RiskEstimate:
    """E |P_K(mu + sigma xi) - mu|^2 by Monte Carlo.

    Antithetic pairs (xi, -xi) are used on centrally symmetric bodies; the
    standard error is then computed over pair means.
    """
    body = make_body(body)
    if reps < 2:
        raise ValueError("reps must be at least 2")
    anti = body.symmetric if antithetic is None else bool(antithetic)
    vals = _mc(body.project, mu, sigma, reps, seed, anti)
    return _summarize(vals, reps, mu, sigma, "LSE", seed, anti)


def default_probes(body, budget=16, seed=0):
    """Structured points of the body (axis tips, base points, staircases, ...), then ProbeGrid fill."""
    body = make_body(body)
    return [np.asarray(p, float) for p in sample_points(body, budget, "ProbeGrid", seed)[:budget]]


def worst_case_risk(body, sigma, probes=None, reps=2000, seed=0, budget=16):
    """(argmax probe, its RiskEstimate): a Monte-Carlo lower bound on the worst-case risk."""
    body = make_body(body)
    probes = default_probes(body, budget, seed) if probes is None else [np.asarray(p, float) for p in probes]
    best, arg = None, None
    risks = []
    for p in probes:
        r = lse_risk(body, p, sigma, reps, seed)
        risks.append(r.mean)
        if best is None or r.mean > best.mean:
            best, arg = r, p
    best.meta["probe_risks"] = risks
    best.meta["argmax"] = int(np.argmax(risks))
    return arg, best


def _estimator_fn(body, estimator, basis=None, axis=0):
    kind = body.kind
    if estimator == "LSE":
        return body.project
    if estimator == "Identity":
        return lambda Y: Y
    if estimator == "SubspaceProj":
        if basis is None:
            if kind == "Subspace":
                U = body.U
            elif kind == "Pyramid":
                U = body.vhat[:, None]
            else:
                raise UnsupportedEstimator(f"SubspaceProj needs a basis for {kind}")
        else:
            U = np.asarray(basis, float)
            if U.ndim == 1:
                U = U[:, None]
            if U.shape[0] != body.n:
                U = U.T
            U, _ = np.linalg.qr(U)
        return lambda Y: (Y @ U) @ U.T
    if estimator == "AxisProj":
        def axis_proj(Y):
            out = np.zeros_like(Y)
            out[:, axis] = Y[:, axis]
            return out
        return axis_proj
    if estimator in ("Clamp1D", "PackingDescent1D"):
        if kind != "HyperRectangle" or body.n != 1:
            raise UnsupportedEstimator(f"{estimator} applies to a one-dimensional interval only")
        a = float(body.a[0])
        if estimator == "Clamp1D":
            return lambda Y: np.clip(Y, -a, a)
        return lambda Y: packing_descent_1d(Y[:, 0], a, 5.0, 60)[:, None]
    raise UnsupportedEstimator(f"unknown estimator {estimator!r}")


def alt_estimator_risk(body, estimator, mu, sigma, reps=2000, seed=0, basis=None, axis=0) -> RiskEstimate:
    """Monte-Carlo risk of a named comparison estimator (same draws as ``lse_risk``)."""
    body = make_body(body)
    fn = _estimator_fn(body, estimator, basis, axis)
    vals = _mc(fn, mu, sigma, reps, seed, False)
    return _summarize(vals, reps, mu, sigma, estimator, seed, False)


def clamp_risk_1d(a, sigma, mu=0.0) -> float:
    """E (clamp(mu + sigma z, -a, a) - mu)^2 for standard normal z.

    Quadrature over the unclipped range plus closed-form clipped tails.
    """
    if a < 0 or abs(mu) > a + 1e-12:
        raise ValueError("need |mu| <= a")
    if sigma == 0 or a == 0:
        return 0.0
    lo, hi = (-a - mu) / sigma, (a - mu) / sigma
    # the Gaussian mass past |z| = 40 is below double precision; wide ranges hide the peak from quad
    zl, zh = max(lo, -40.0), min(hi, 40.0)
    mid = 0.0
    if zh > zl:
        mid, _ = integrate.quad(lambda z: (sigma * z) ** 2 * stats.norm.pdf(z), zl, zh,
                                epsabs=1e-10, epsrel=1e-10, limit=200, points=[0.0] if zl < 0 < zh else None)
    tails = (a - mu) ** 2 * stats.norm.sf(hi) + (a + mu) ** 2 * stats.norm.cdf(lo)
    return float(mid + tails)


def packing_descent_1d(y, a, c=5.0, iters=30):
    """Multiscale packing descent on [-a, a].

    Starting from 0, step k packs B(nu, d/2^(k-1)) ∩ [-a, a] by a grid of
    spacing d/(2^(k-1) c) anchored at the left end and moves to the grid point
    nearest y; after k steps the iterate is within d/2^k of clamp(y).
    Vectorized over y.
    """
    if not a > 0 or not c > 2:
        raise ValueError("need a > 0 and c > 2")
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, float))
    d = 2.0 * a
    nu = np.zeros_like(y)
    for k in range(1, iters + 1):
        R = d / 2 ** (k - 1)
        step = R / c
        lo = np.maximum(nu - R, -a)
        hi = np.minimum(nu + R, a)
        top = np.floor((hi - lo) / step)
        j = np.clip(np.rint((y - lo) / step), 0, top)
        nu = lo + j * step
    return float(nu[0]) if scalar else nu
