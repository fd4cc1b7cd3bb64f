"""Packing sets, local and global metric entropy, and the minimax fixed point."""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels as K
from ._rng import ordered_map, substream, tag_of
from .bodies import intersect_dual, make_body, sample_points
from .errors import OrderViolation, RegimeViolation, Unbounded
from .records import MINIMAX_STAR, Budgets, RateBracket

SPACING_GUARD = 1e-12


@dataclass
class PackingSet:
    points: np.ndarray
    spacing: float
    domain: tuple | str = "WholeBody"  # (center, radius) or "WholeBody"
    maximal_wrt: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    @property
    def log_count(self):
        return math.log(max(len(self.points), 1))

    def min_distance(self):
        P = np.asarray(self.points, dtype=float)
        if len(P) < 2:
            return math.inf
        d, _ = cKDTree(P).query(P, k=2)
        return float(d[:, 1].min())

    def validate(self, body=None, tol=1e-7):
        """Spacing (with a 1e-12 relative guard) and membership of every point."""
        ok = self.min_distance() > self.spacing * (1 - SPACING_GUARD)
        if body is not None and len(self.points):
            ok &= bool(np.all(make_body(body).membership(np.asarray(self.points), tol)))
            if isinstance(self.domain, tuple):
                c, r = self.domain
                ok &= bool(np.all(np.linalg.norm(np.asarray(self.points) - c, axis=1) <= r + tol))
        return bool(ok)


@dataclass
class EntropyEstimate:
    eps: float
    log_count_lower: float
    log_count_upper: float | None
    c_star: float
    probe_centers_used: int
    packing: PackingSet | None = None
    best_center: np.ndarray | None = None


def greedy_packing(candidates, delta, limit=None) -> PackingSet:
    """Greedy pass in candidate order keeping points at distance > delta from all kept."""
    X = np.atleast_2d(np.asarray(candidates, dtype=float))
    if X.shape[0] == 1 and np.asarray(candidates).ndim == 1:
        X = X.T  # scalars on a line
    if not delta > 0:
        raise ValueError("delta must be positive")
    idx = K.greedy_pack(X, delta, limit)
    return PackingSet(X[idx], float(delta), "WholeBody", X.shape[0])


def yang_barron_interval(logM_fine, logM_coarse):
    """Local entropy sandwich from two global entropies (fine at eps/c*, coarse at eps)."""
    if logM_coarse < 0 or logM_fine < logM_coarse:
        raise OrderViolation("need logM_fine >= logM_coarse >= 0")
    return (logM_fine - logM_coarse, logM_fine)


# -------------------------------------------------------------------- clouds and entropy
def _ball_cloud(rng, center, radius, count):
    n = center.size
    g = rng.standard_normal((count, n))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    r = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    return center + r * g


def local_cloud(body, theta, eps, count, seed):
    """Candidate members of B(theta, eps) ∩ K: theta, structured points, projected ball samples."""
    rng = substream(seed, tag_of("local-cloud", repr(float(eps))), zlib.crc32(theta.tobytes()))
    pts = [theta[None, :]]
    S = np.array(body.structured_points())
    near = S[np.linalg.norm(S - theta, axis=1) <= eps]
    if near.size:
        pts.append(near)
    m = max(0, count - sum(len(p) for p in pts))
    if m:
        half = m // 2
        raw = np.vstack([_ball_cloud(rng, theta, eps, m - half), _ball_cloud(rng, theta, 2 * eps, half)])
        pts.append(intersect_dual(body, theta, eps, raw, tol=1e-9))
    return np.vstack(pts)


def _local_upper(body, eps, c_star):
    ub = body.affine_dim() * math.log(1 + 2 * c_star)
    kind = body.kind
    if kind in ("IsotonicTV", "IsotonicBox"):
        V = body.V if kind == "IsotonicTV" else body.b - body.a
        if math.isfinite(V):
            ub = min(ub, 3 * c_star * (V * math.sqrt(body.n) + eps) / eps)
    return ub


def probe_centers(body, budget, seed):
    return [np.asarray(p, float) for p in sample_points(body, max(budget, 1), "ProbeGrid", seed)[:max(budget, 1)]]


def local_entropy(body, eps, c_star=5.0, probe_budget=16, cloud_budget=20000, seed=0,
                  probes=None) -> EntropyEstimate:
    """Certified lower bound (explicit packing) on the local entropy at scale eps."""
    body = make_body(body)
    if not eps > 0 or not c_star > 1:
        raise ValueError("need eps > 0 and c_star > 1")
    upper = _local_upper(body, eps, c_star)
    if body.kind == "Singleton":
        P = PackingSet(body.center()[None, :], eps / c_star, (body.center(), eps), 1)
        return EntropyEstimate(eps, 0.0, 0.0, c_star, 1, P, body.center())
    probes = probe_centers(body, probe_budget, seed) if probes is None else list(probes)

    def one(theta):
        cloud = local_cloud(body, theta, eps, cloud_budget, seed)
        P = greedy_packing(cloud, eps / c_star)
        P.domain = (theta, eps)
        return P

    packs = ordered_map(one, probes)
    j = int(np.argmax([len(P) for P in packs]))
    best = packs[j]
    lo = best.log_count
    return EntropyEstimate(eps, lo, max(upper, lo), c_star, len(probes), best, probes[j])


class EntropyOracle:
    """Memoised local-entropy lower/upper bounds at a fixed c*, probe set and budget."""

    def __init__(self, body, c_star=5.0, probe_budget=16, cloud_budget=20000, seed=0):
        self.body = make_body(body)
        self.c_star = float(c_star)
        self.cloud_budget = int(cloud_budget)
        self.seed = int(seed)
        self.probes = probe_centers(self.body, probe_budget, seed)
        self._cache = {}

    def estimate(self, eps) -> EntropyEstimate:
        key = float(eps)
        if key not in self._cache:
            self._cache[key] = local_entropy(self.body, key, self.c_star, cloud_budget=self.cloud_budget,
                                             seed=self.seed, probes=self.probes)
        return self._cache[key]

    def lower(self, eps):
        return self.estimate(eps).log_count_lower

    def upper(self, eps):
        return self.estimate(eps).log_count_upper

    def lower_envelope(self, eps):
        """Running max from the right over evaluated scales (entropy is nonincreasing)."""
        vals = [e.log_count_lower for k, e in self._cache.items() if k >= eps]
        return max(vals + [self.lower(eps)])

    def upper_envelope(self, eps):
        vals = [e.log_count_upper for k, e in self._cache.items() if k <= eps]
        return min(vals + [self.upper(eps)])

    def curve(self):
        ks = sorted(self._cache)
        return [(k, self._cache[k].log_count_lower, self._cache[k].log_count_upper) for k in ks]


def global_entropy(body, eps, cloud_budget=20000, seed=0) -> EntropyEstimate:
    """Greedy eps-packing of the whole body from structured, interior and boundary samples."""
    body = make_body(body)
    if not body.bounded:
        raise Unbounded(f"{body.kind} is unbounded")
    if body.kind == "Singleton":
        P = PackingSet(body.center()[None, :], eps, "WholeBody", 1)
        return EntropyEstimate(eps, 0.0, None, 1.0, 0, P)
    S = [np.asarray(p, float) for p in body.structured_points()]
    m = max(0, cloud_budget - len(S))
    cloud = np.vstack([np.array(S)] + ([np.array(sample_points(body, m - m // 2, "Interior", seed)),
                                        np.array(sample_points(body, max(m // 2, 1), "Boundary", seed))] if m else []))
    P = greedy_packing(cloud, eps)
    return EntropyEstimate(eps, P.log_count, None, 1.0, 0, P)


# -------------------------------------------------------------------- fixed point
def _fixed_point(pred, lo, hi, iters, rel=1e-3):
    """Largest eps in [lo, hi] with pred true, pred monotone (true then false)."""
    if pred(hi):
        return hi
    if not pred(lo):
        return 0.0
    for _ in range(iters):
        if hi / lo - 1 <= rel:
            break
        mid = math.sqrt(lo * hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def minimax_rate(body, sigma, c_star=5.0, budgets: Budgets | None = None, seed=0,
                 oracle: EntropyOracle | None = None, C1=1.0, C2=1.0) -> RateBracket:
    """Bracket for eps*^2 ∧ d^2 from the certified local entropy.

    ``C1, C2`` rescale the defining inequality C1 eps^2/sigma^2 <= C2 log M.
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    d = body.diameter()
    if not d.bounded:
        raise Unbounded(f"{body.kind} is unbounded")
    if d.upper == 0:
        return RateBracket(0.0, 0.0, MINIMAX_STAR, sigma, {"c_star": c_star})
    if oracle is None:
        oracle = EntropyOracle(body, c_star, budgets.probes, budgets.cloud, seed)
    D = d.upper
    s2 = sigma * sigma
    lo_eps = _fixed_point(lambda e: C1 * e * e / s2 <= C2 * oracle.lower_envelope(e),
                          1e-6 * D, 2 * D, budgets.bisect_iters)
    hi_eps = _fixed_point(lambda e: C1 * e * e / s2 <= C2 * oracle.upper_envelope(e),
                          1e-6 * D, 2 * D, budgets.bisect_iters)
    lo_eps = min(lo_eps, D)
    hi_eps = max(min(hi_eps, D), lo_eps)
    return RateBracket(lo_eps ** 2, hi_eps ** 2, MINIMAX_STAR, sigma,
                       {"c_star": c_star, "eps_lower": lo_eps, "eps_upper": hi_eps, "d": D,
                        "C1": C1, "C2": C2, "probes": len(oracle.probes), "cloud": oracle.cloud_budget})


# -------------------------------------------------------------------- explicit constructions
def hamming_code(L, dmin, target, seed=0, max_points=4096) -> np.ndarray:
    """0/1 words of length L with pairwise Hamming distance >= dmin (greedy selection)."""
    if L == 0:
        return np.zeros((1, 0))
    want = int(min(max_points, max(1, math.ceil(target))))
    if L <= 16:
        cand = ((np.arange(2 ** L)[:, None] >> np.arange(L)[::-1]) & 1).astype(float)
    else:
        rng = substream(seed, tag_of("vg", L, dmin))
        cand = rng.integers(0, 2, size=(min(max(8 * want, 2000), 100000), L)).astype(float)
    idx = K.greedy_pack(cand, math.sqrt(dmin - 0.5), max_points)
    return cand[idx]


def isotonic_vg_packing(n, a=0.0, b=1.0, eps=1.0, seed=0, max_points=4096) -> PackingSet:
    """Staircase-plus-bump packing of monotone sequences in [a, b]."""
    n = int(n)
    if b == a:
        return PackingSet(np.full((1, n), float(a)), float(eps), "WholeBody", 1,
                          {"k": 0, "blocks": 0, "free": 0})
    if not b > a:
        raise ValueError("need b >= a")
    k_exact = eps * math.sqrt(n) / (b - a)
    k = int(round(k_exact))
    if k < 1:
        raise RegimeViolation(f"eps={eps} below (b-a)/sqrt(n) scale: k={k_exact:.3g} < 1")
    nb = n // k
    if nb < 3:
        return PackingSet(np.full((1, n), 0.5 * (a + b)), float(eps), "WholeBody", 1,
                          {"k": k, "k_exact": k_exact, "blocks": nb, "free": 0})
    h = (b - a) / nb
    sizes = np.full(nb, k)
    sizes[-1] += n - nb * k
    L = nb - 2
    dmin = math.ceil(L / 8)
    codes = hamming_code(L, dmin, math.exp(L / 8), seed, max_points)
    level = np.repeat(np.arange(nb) * h, sizes)
    bump = np.zeros((len(codes), nb))
    bump[:, 1:-1] = codes * h
    pts = a + level[None, :] + np.repeat(bump, sizes, axis=1)
    spacing = math.sqrt(k * h * h * dmin)
    meta = {"k": k, "k_exact": k_exact, "rounded": k != k_exact, "blocks": nb, "free": L,
            "hamming_min": dmin, "target_log_count": L / 8, "log_count": math.log(len(pts)),
            "distance_const": spacing / eps, "count_const": math.log(len(pts)) / (math.sqrt(n) * (b - a) / eps),
            "proof_distance_sq": k * (eps / math.sqrt(n)) ** 2 * (n / k - 2) / 8}
    return PackingSet(pts, spacing * (1 - 1e-9), "WholeBody", len(codes), meta)


def weak_compositions(total, parts):
    """All nonnegative integer p-tuples summing to ``total``."""
    out = []
    for bars in combinations(range(total + parts - 1), parts - 1):
        prev, comp = -1, []
        for bpos in bars:
            comp.append(bpos - prev - 1)
            prev = bpos
        comp.append(total + parts - 2 - prev)
        out.append(comp)
    return np.array(out, dtype=int).reshape(-1, parts)


def multiiso_vg_packing(p, n, eps, a=0.0, b=1.0, seed=0, max_points=4096) -> PackingSet:
    """Antichain-cube indicator packing of coordinatewise monotone lattice functions.

    ``eps = 2**-m`` is the coarse cube side; cubes on the level sum(r) = 2**m - 1 are free.
    """
    p, n = int(p), int(n)
    side = round(n ** (1.0 / p))
    if p < 2 or side ** p != n:
        raise ValueError("need p >= 2 and n ** (1/p) integral")
    if eps >= 1:
        return PackingSet(np.full((1, n), float(a)), 1.0, "WholeBody", 1, {"m": 0, "free": 0})
    m = -math.log2(eps)
    if abs(m - round(m)) > 1e-9:
        raise RegimeViolation("internal scale must be a power of 1/2")
    m = int(round(m))
    if side % (2 ** m):
        raise RegimeViolation(f"lattice side {side} not divisible by 2^{m}: eps below lattice scale")
    k = side // 2 ** m
    level = 2 ** m - 1
    W = weak_compositions(level, p)
    W = W[np.all(W <= 2 ** m - 1, axis=1)]
    nW = len(W)
    grid = np.array(list(product(range(side), repeat=p)))
    cube = grid // k
    s = cube.sum(1)
    free_id = -np.ones(n, dtype=int)
    lookup = {tuple(w): i for i, w in enumerate(W)}
    on = np.flatnonzero(s == level)
    for j in on:
        free_id[j] = lookup[tuple(cube[j])]
    dmin = math.ceil(nW / 4)
    codes = hamming_code(nW, dmin, math.exp(nW / 32), seed, max_points)
    base = (s > level).astype(float)
    pts = np.repeat(base[None, :], len(codes), axis=0)
    pts[:, on] = codes[:, free_id[on]]
    pts = a + (b - a) * pts
    spacing = (b - a) * math.sqrt(dmin * k ** p)
    lo_w = (1 / eps) ** (p - 1) / (p - 1) ** (p - 1)
    hi_w = (1 / eps) ** (p - 1) * p ** (p - 1) / math.factorial(p - 1)
    meta = {"m": m, "k": k, "free": nW, "antichain_bounds": [lo_w, hi_w], "hamming_min": dmin,
            "target_log_count": nW / 32, "log_count": math.log(len(pts)),
            "proof_distance": math.sqrt(nW * k ** p / 4) * (b - a)}
    return PackingSet(pts, spacing * (1 - 1e-9), "WholeBody", len(codes), meta)
