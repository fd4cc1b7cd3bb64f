"""Variational LSE radius, rate brackets, optimality checks and closed-form rates."""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .bodies import intersect_dual, make_body, sample_points
from .errors import InconclusiveRegime, RegimeViolation, Unbounded
from .packing import EntropyOracle, minimax_rate
from .records import (CLOSED_FORM, DUDLEY, ENTROPY_SUP_CROSSING, EPSILON_MU, GEOMETRIC_MEAN,
                      INCONCLUSIVE, INNER_MIN_GAP, LIPSCHITZ_SLOPE, NECESSARY_VIOLATED,
                      PAIR_GAP_ENTROPY, RESTRICTED_WIDTH_CROSSING, SUFFICIENT, WIDTH_CROSSING,
                      WIDTH_GAP, WIDTH_GLOBAL, Budgets, ConditionReport, ConstantsConfig,
                      RateBracket)
from ._rng import substream, tag_of
from .widths import WidthOracle

GOLD = (math.sqrt(5) - 1) / 2


# -------------------------------------------------------------------- helpers
def effective_diameter(body, consts: ConstantsConfig):
    """(D, substituted): the diameter, or the configured effective radius for unbounded bodies."""
    d = body.diameter()
    if d.bounded:
        return d.upper, False
    if consts.r_eff is not None and consts.r_eff <= 0:
        raise Unbounded(f"{body.kind} is unbounded and no effective radius is configured")
    R = consts.r_eff if consts.r_eff is not None else 1e3 * consts.sigma * math.sqrt(body.n)
    return float(R), True


def eps_grid(D, per_decade=25, lo_frac=1e-3, hi_frac=2.0, sigma=None):
    """Geometric grid from lo_frac*D to hi_frac*D, reaching down to sigma/100 when given."""
    if D <= 0:
        return np.zeros(0)
    lo = lo_frac * D if sigma is None else min(lo_frac * D, 1e-2 * min(sigma, D))
    decades = math.log10(hi_frac * D / lo)
    return np.geomspace(lo, hi_frac * D, int(round(decades * per_decade)) + 1)


def _width_oracle(body, consts, budgets, oracle):
    if oracle is not None:
        return oracle
    return WidthOracle(body, consts.t_rel, consts.delta, consts.seed, budgets.width_samples)


def _probes(body, budgets, seed):
    return [np.asarray(p, float) for p in sample_points(body, budgets.probes, "ProbeGrid", seed)[:budgets.probes]]


def _crossing(pred, lo, hi, iters=60, rel=1e-4):
    """Largest x in [lo, hi] with pred(x), pred true-then-false in x."""
    if pred(hi):
        return hi
    if not pred(lo):
        return 0.0
    for _ in range(iters):
        if hi / lo - 1 <= rel:
            break
        mid = math.sqrt(lo * hi)
        lo, hi = (mid, hi) if pred(mid) else (lo, mid)
    return lo


# -------------------------------------------------------------------- variational radius
def epsilon_mu(body, mu, consts: ConstantsConfig, budgets: Budgets | None = None, oracle=None,
               rel_tol=1e-3) -> float:
    """argmax over [0, D] of sigma*w_mu(eps) - eps^2/2, by golden section in log eps.

    The objective is concave in eps, hence unimodal along any monotone
    reparametrisation; the log scale keeps the tolerance relative.
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    W = _width_oracle(body, consts, budgets, oracle)
    D, _ = effective_diameter(body, consts)
    if D == 0:
        return 0.0
    sigma = consts.sigma
    mu = np.asarray(mu, float)

    def F(e):
        return sigma * W(mu, e) - 0.5 * e * e

    a, b = math.log(1e-6 * D), math.log(D)
    x1, x2 = b - GOLD * (b - a), a + GOLD * (b - a)
    f1, f2 = F(math.exp(x1)), F(math.exp(x2))
    seen = {x1: f1, x2: f2}
    while b - a > math.log1p(rel_tol):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLD * (b - a)
            f1 = F(math.exp(x1))
            seen[x1] = f1
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLD * (b - a)
            f2 = F(math.exp(x2))
            seen[x2] = f2
    for x in (a, b):
        seen[x] = F(math.exp(x))
    xb = max(seen, key=seen.get)
    if seen[xb] <= 0:
        return 0.0
    return min(math.exp(xb), D)


def epsilon_K_bar(body, consts: ConstantsConfig, budgets: Budgets | None = None, probes=None,
                  oracle=None) -> RateBracket:
    """Max of epsilon_mu over probe points; the max is a certified lower side, D the upper."""
    body = make_body(body)
    budgets = budgets or Budgets()
    W = _width_oracle(body, consts, budgets, oracle)
    D, sub = effective_diameter(body, consts)
    probes = _probes(body, budgets, consts.seed) if probes is None else [np.asarray(p, float) for p in probes]
    vals = [epsilon_mu(body, p, consts, budgets, W) for p in probes]
    j = int(np.argmax(vals)) if vals else 0
    best = vals[j] if vals else 0.0
    return RateBracket(best, max(D, best), EPSILON_MU, consts.sigma,
                       {"scale": "eps", "argmax": j, "values": vals, "D": D, "substituted_radius": sub})


# -------------------------------------------------------------------- width-based upper bounds
def width_crossing_bound(body, consts: ConstantsConfig, budgets: Budgets | None = None,
                         restrict_to=None, oracle=None) -> RateBracket:
    """Crossing of eps^2/(2 sigma) with sup_mu w_mu(eps), capped at D.

    ``restrict_to`` replaces the probe set by a given subset of K.
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    W = _width_oracle(body, consts, budgets, oracle)
    D, sub = effective_diameter(body, consts)
    if D == 0:
        return RateBracket(0.0, 0.0, WIDTH_CROSSING, consts.sigma, {"scale": "eps"})
    pts = _probes(body, budgets, consts.seed) if restrict_to is None else [np.asarray(p, float) for p in restrict_to]
    s = consts.sigma

    def pred(e):  # e/(2 sigma) <= sup w/e, which is nonincreasing in e
        return e * e / (2 * s) <= max(W(p, e) for p in pts)

    x = _crossing(pred, 1e-6 * D, 2 * D)
    method = WIDTH_CROSSING if restrict_to is None else RESTRICTED_WIDTH_CROSSING
    return RateBracket(0.0, min(x, D), method, s,
                       {"scale": "eps", "crossing": x, "D": D, "probes": len(pts), "substituted_radius": sub})


def width_global_bound(body, consts: ConstantsConfig, budgets: Budgets | None = None, oracle=None) -> RateBracket:
    """sqrt(2 sigma w(K)) with w(K) from a width at radius D about the center."""
    body = make_body(body)
    budgets = budgets or Budgets()
    W = _width_oracle(body, consts, budgets, oracle)
    D, sub = effective_diameter(body, consts)
    if D == 0:
        return RateBracket(0.0, 0.0, WIDTH_GLOBAL, consts.sigma, {"scale": "eps", "w": 0.0})
    R = body.radius_bound()
    R = D if R is None else R
    w = W(body.center(), R * (1 + 1e-9))
    return RateBracket(0.0, math.sqrt(2 * consts.sigma * max(w, 0.0)), WIDTH_GLOBAL, consts.sigma,
                       {"scale": "eps", "w": w, "substituted_radius": sub})


# -------------------------------------------------------------------- entropy-based bounds
def log_factor_Cn(n, c_star, C=1.0):
    return 4 * C * (1 + math.log(math.sqrt(2 * math.pi * n)) / math.log(c_star)) ** 1.5


def _sup_entropy_profile(entropy: EntropyOracle, e, c_star):
    """sup over evaluated delta <= e of delta * sqrt(log M(delta)) / c*."""
    entropy.lower(e)
    return max(k * math.sqrt(max(v.log_count_lower, 0.0)) / c_star
               for k, v in entropy._cache.items() if k <= e)


def entropy_sup_bound(body, consts: ConstantsConfig, budgets: Budgets | None = None,
                      entropy: EntropyOracle | None = None, minimax: RateBracket | None = None):
    """(crossing bracket, geometric-mean bracket) built from the local entropy curve.

    The crossing solves eps^2/(2 sigma) = (1/2) sup_{delta<=eps} delta sqrt(log M(delta))/c*
    and is scaled by 4*C_n (C = 1); the second value is sqrt(sigma) C_n sqrt(eps*) n^(1/4).
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    d = body.diameter()
    if not d.bounded:
        raise Unbounded(f"{body.kind} is unbounded")
    D = d.upper
    s, cs = consts.sigma, consts.c_star
    Cn = log_factor_Cn(body.n, cs)
    if D == 0:
        z = RateBracket(0.0, 0.0, ENTROPY_SUP_CROSSING, s, {"scale": "eps", "C_n": Cn})
        return z, RateBracket(0.0, 0.0, GEOMETRIC_MEAN, s, {"scale": "eps"})
    entropy = entropy or EntropyOracle(body, cs, budgets.probes, budgets.cloud, consts.seed)
    under = _crossing(lambda e: e * e / (2 * s) <= 0.5 * _sup_entropy_profile(entropy, e, cs),
                      1e-6 * D, 2 * D, iters=budgets.bisect_iters, rel=1e-3)
    b1 = RateBracket(0.0, min(4 * Cn * under, D), ENTROPY_SUP_CROSSING, s,
                     {"scale": "eps", "underline_eps": under, "C_n": Cn, "C": 1.0, "c_star": cs})
    if minimax is None:
        minimax = minimax_rate(body, s, cs, budgets, consts.seed, oracle=entropy)
    est = math.sqrt(minimax.upper)
    gm = math.sqrt(s) * Cn * math.sqrt(est) * body.n ** 0.25
    b2 = RateBracket(0.0, gm, GEOMETRIC_MEAN, s, {"scale": "eps", "eps_star_used": est, "C_n": Cn})
    return b1, b2


def underline_eps_star(body, consts: ConstantsConfig, entropy: EntropyOracle, C=None) -> float:
    """sup{eps : C^2 eps^2 / (4 sigma^2) <= (L/c*)^2 log M(eps)} on the certified curve."""
    body = make_body(body)
    d = body.diameter()
    if not d.bounded:
        raise Unbounded(f"{body.kind} is unbounded")
    if d.upper == 0:
        return 0.0
    cs, L, s = consts.c_star, consts.L, consts.sigma
    C = 8 + 8 / cs if C is None else C
    D = d.upper
    x = _crossing(lambda e: C * C * e * e / (4 * s * s) <= (L / cs) ** 2 * entropy.lower_envelope(e),
                  1e-6 * D, 2 * D, iters=40, rel=1e-3)
    return min(x, D)


# -------------------------------------------------------------------- characterizations
def _largest_satisfying(grid, pred):
    for e in grid[::-1]:
        if pred(e):
            return float(e)
    return 0.0


def _ball_members(body, center, radius, count, seed):
    rng = substream(seed, tag_of("ball-members", repr(float(radius))), zlib.crc32(center.tobytes()))
    g = rng.standard_normal((count, body.n))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    raw = center + radius * g * rng.uniform(0.5, 2.0, size=(count, 1))
    return list(intersect_dual(body, center, radius, raw, tol=1e-9))


def characterization_bracket(body, consts: ConstantsConfig, variant="A", budgets: Budgets | None = None,
                             entropy: EntropyOracle | None = None, oracle=None, probes=None,
                             grid=None) -> RateBracket:
    """Bracket on the worst-case LSE rate from one of three width-difference conditions.

    A: sup_mu [w_mu(C eps) - w_mu(c eps)] >= (C^2 - c^2) eps^2 / (2 sigma).
    B: sup_mu [w_mu(eps) - inf_{nu in B(mu,eps)∩K} w_nu(eps/c)] >= (4 + 4/c) eps^2/(2 sigma), c = c*.
    C: sup_{|nu1-nu2|<=2eps} w_nu1(eps/c*) - w_nu2(eps/c*) - C eps^2/(2 sigma)
       + (L/c*) eps sqrt(log M(eps)) >= 0, C = 8 + 8/c*.
    Raises InconclusiveRegime when the relevant radius sits between sigma/kappa and kappa*sigma.
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    W = _width_oracle(body, consts, budgets, oracle)
    D, sub = effective_diameter(body, consts)
    s, cs, k = consts.sigma, consts.c_star, consts.kappa
    method = {"A": WIDTH_GAP, "B": INNER_MIN_GAP, "C": PAIR_GAP_ENTROPY}[variant]
    small = min(s, D)
    notes = {"scale": "eps", "variant": variant, "D": D, "kappa": k, "substituted_radius": sub}
    if D == 0:
        return RateBracket(0.0, 0.0, method, s, notes)
    pts = _probes(body, budgets, consts.seed) if probes is None else [np.asarray(p, float) for p in probes]
    grid = eps_grid(D, budgets.grid_per_decade, sigma=s) if grid is None else np.asarray(grid, float)

    if variant == "A":
        Cc, cc = consts.C_char, consts.c_char

        def eps_bar(sig):
            return _largest_satisfying(grid, lambda e: max(W(p, Cc * e) - W(p, cc * e) for p in pts)
                                       >= (Cc ** 2 - cc ** 2) * e * e / (2 * sig))
        eb = eps_bar(s)
        notes.update(eps_bar=eb, C=Cc, c=cc)
        if eb >= k * s:
            return RateBracket(cc * eb, min(Cc * eb, max(D, cc * eb)), method, s, notes)
        if eb <= s / k:
            return RateBracket(small, small, method, s, notes)
        raise InconclusiveRegime("radius in the undecided band", eb, s)

    if variant == "B":
        c = cs
        sig2 = 4 * c * s / (c - 1)
        inner = {}

        def gap(p, e):
            key = (p.tobytes(), e)
            if key not in inner:
                cands = [p] + _ball_members(body, p, e, budgets.pairs, consts.seed)
                inner[key] = W(p, e) - min(W(q, e / c) for q in cands)
            return inner[key]

        def eps_bar(sig):
            return _largest_satisfying(grid, lambda e: max(gap(p, e) for p in pts)
                                       >= (4 + 4 / c) * e * e / (2 * sig))
        eb, eb2 = eps_bar(s), eps_bar(sig2)
        notes.update(eps_bar=eb, eps_bar_shifted=eb2, sigma_shifted=sig2, c=c)
        if eb >= k * s:
            return RateBracket(eb / c, max(eb2, eb / c), method, s, notes)
        if eb2 <= s / k:
            return RateBracket(small, small, method, s, notes)
        raise InconclusiveRegime("radius in the undecided band", eb, s)

    if variant == "C":
        if not body.bounded:
            ent_term = lambda e: 0.0  # noqa: E731  (entropy needs a bounded body)
        else:
            entropy = entropy or EntropyOracle(body, cs, budgets.probes, budgets.cloud, consts.seed)
            ent_term = lambda e: math.sqrt(max(entropy.lower_envelope(e), 0.0))  # noqa: E731
        Cd = 8 + 8 / cs
        L = consts.L
        sig2 = Cd * s / (1 - 1 / cs ** 2)
        pair_cache = {}

        def best_gap(e):
            if e not in pair_cache:
                r = e / cs
                vals = [W(p, r) for p in pts]
                g = 0.0
                for i, p in enumerate(pts):
                    others = [q for q in pts if np.linalg.norm(p - q) <= 2 * e]
                    others += _ball_members(body, p, 2 * e, budgets.pairs, consts.seed)
                    g = max(g, max(vals[i] - W(q, r) for q in others))
                    g = max(g, max(W(q, r) - vals[i] for q in others))
                pair_cache[e] = g
            return pair_cache[e]

        def eps_bar(sig):
            return _largest_satisfying(grid, lambda e: best_gap(e) - Cd * e * e / (2 * sig)
                                       + (L / cs) * e * ent_term(e) >= 0)
        eb, eb2 = eps_bar(s), eps_bar(sig2)
        notes.update(eps_bar=eb, eps_bar_shifted=eb2, sigma_shifted=sig2, C=Cd, L=L,
                     entropy_side="certified lower bound")
        if eb >= k * s:
            return RateBracket(eb / cs, max(eb2, eb / cs), method, s, notes)
        if eb2 <= s / k:
            return RateBracket(small, small, method, s, notes)
        raise InconclusiveRegime("radius in the undecided band", eb, s)
    raise ValueError(f"unknown variant {variant}")


# -------------------------------------------------------------------- condition checks
def lipschitz_check(body, consts: ConstantsConfig, eps_grid_=None, budgets: Budgets | None = None,
                    eps_star_lower=0.0, oracle=None, pairs=None) -> ConditionReport:
    """Slope of nu -> w_nu(eps/c*) over probe pairs versus kappa (1 + 2/c*) eps / sigma.

    A flagged radius is a witnessed violation (Monte-Carlo error is subtracted
    from the slope); an unflagged grid is only indicative of optimality.
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    W = _width_oracle(body, consts, budgets, oracle)
    D, _ = effective_diameter(body, consts)
    s, cs, k = consts.sigma, consts.c_star, consts.kappa
    grid = eps_grid(D, 5, sigma=s) if eps_grid_ is None else np.asarray(eps_grid_, float)
    grid = [float(e) for e in grid if e >= eps_star_lower]
    if pairs is None:
        pts = _probes(body, budgets, consts.seed)
        bnd = [] if body.kind in ("FullSpace", "Subspace") else \
            [np.asarray(p) for p in sample_points(body, max(2, budgets.pairs // 2), "Boundary", consts.seed)]
        c0 = body.center()
        pairs = [(c0, q) for q in pts[1:] + bnd] + [(pts[i], pts[j]) for i in range(len(pts))
                                                      for j in range(i + 1, min(len(pts), i + 3))]
    pairs = [(np.asarray(a, float), np.asarray(b, float)) for a, b in pairs
             if np.linalg.norm(np.asarray(a) - np.asarray(b)) > 1e-12]
    thr_c = k * (1 + 2 / cs)
    lhs, rhs, sat = [], [], []
    for e in grid:
        slope = 0.0
        for a, b in pairs:
            dist = float(np.linalg.norm(a - b))
            r = e / cs
            err = 2 * consts.t_rel * r  # two widths, each within t = t_rel * radius
            slope = max(slope, max(abs(W(a, r) - W(b, r)) - err, 0.0) / dist)
        lhs.append(slope)
        rhs.append(thr_c * e / s)
        sat.append(bool(slope <= thr_c * e / s))
    verdict = SUFFICIENT if all(sat) else NECESSARY_VIOLATED
    return ConditionReport("lipschitz", grid, lhs, rhs, sat, verdict,
                           {"threshold_const": thr_c, "pairs": len(pairs), "certified": verdict != SUFFICIENT})


def sufficient_condition_check(body, consts: ConstantsConfig, eps_grid_=None, budgets: Budgets | None = None,
                               oracle=None, entropy: EntropyOracle | None = None) -> ConditionReport:
    """sup_mu w_mu(eps)/eps against sqrt(log M(c eps)) using the certified entropy side.

    All-satisfied gives SufficientForOptimal; any failure is Inconclusive, because
    the condition is not necessary.
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    W = _width_oracle(body, consts, budgets, oracle)
    d = body.diameter()
    if not d.bounded:
        raise Unbounded(f"{body.kind} is unbounded")
    grid = eps_grid(d.upper, 5, hi_frac=1.0) if eps_grid_ is None else np.asarray(eps_grid_, float)
    entropy = entropy or EntropyOracle(body, consts.c_star, budgets.probes, budgets.cloud, consts.seed)
    pts = [body.center()] if body.symmetric else _probes(body, budgets, consts.seed)
    c, k = consts.c_char, consts.kappa
    lhs, rhs, sat = [], [], []
    for e in grid:
        e = float(e)
        l_ = max(W(p, e) for p in pts) / e
        r_ = math.sqrt(max(entropy.lower_envelope(c * e), 0.0))
        lhs.append(l_)
        rhs.append(r_)
        sat.append(bool(l_ <= k * r_))
    verdict = SUFFICIENT if all(sat) else INCONCLUSIVE
    return ConditionReport("sufficient_entropy", [float(e) for e in grid], lhs, rhs, sat, verdict,
                           {"kappa": k, "c": c, "centers": "origin" if body.symmetric else "probes"})


# -------------------------------------------------------------------- Dudley-type diagnostic
def dudley_bound(body, consts: ConstantsConfig, entropy_curve, c_prime=1.0, grid=None) -> RateBracket:
    """Smallest eps with int_{c' eps^2/16}^{2 eps} sqrt(log M(t)) dt <= eps^2 / sigma.

    ``entropy_curve``: pairs (t, log M(t)); log-linear interpolation, flat
    extrapolation to the left and zero beyond the last point.  With certified
    (lower) entropies the returned eps is optimistic.
    """
    curve = sorted((float(t), float(v)) for t, v in entropy_curve)
    s = consts.sigma
    if not curve:
        return RateBracket(0.0, 0.0, DUDLEY, s, {"scale": "eps"})
    ts = np.array([t for t, _ in curve])
    hs = np.sqrt(np.maximum([v for _, v in curve], 0.0))

    def h(t):
        t = np.asarray(t, float)
        val = np.interp(np.log(t), np.log(ts), hs)
        return np.where(t > ts[-1] * (1 + 1e-12), 0.0, val)

    def integral(lo, hi):
        if hi <= lo:
            return 0.0
        u = np.linspace(math.log(lo), math.log(hi), 2001)
        t = np.exp(u)
        return float(np.trapezoid(h(t) * t, u))

    grid = np.geomspace(ts[0], ts[-1], 200) if grid is None else np.asarray(grid, float)
    for e in grid:
        if integral(c_prime * e * e / 16, 2 * e) <= e * e / s:
            return RateBracket(0.0, float(e), DUDLEY, s,
                               {"scale": "eps", "c_prime": c_prime, "optimistic": True,
                                "sigma_convention": "n_eff = 1/sigma^2"})
    return RateBracket(0.0, float(grid[-1]), DUDLEY, s, {"scale": "eps", "not_reached": True})


def radius_risk_constant():
    """C = int_0^inf 6x exp(-x^4 / (32 (1+x)^2)) dx, evaluated by quadrature."""
    val, _ = integrate.quad(lambda x: 6 * x * math.exp(-x ** 4 / (32 * (1 + x) ** 2)), 0, math.inf, limit=200)
    return val


# -------------------------------------------------------------------- closed forms
@dataclass
class ClosedFormReport:
    example_id: str
    minimax: float | None = None      # squared scale
    lse: float | None = None          # squared scale
    windows: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    def bracket(self, which="minimax"):
        v = getattr(self, which)
        return RateBracket(v, v, CLOSED_FORM, self.values.get("sigma"), {"name": self.example_id, "scale": "eps^2"})


def hyperrect_k(a, sigma):
    """Largest k with (k+1) sigma^2 <= sum of the n-k smallest squared half-widths (0 if none)."""
    a2 = np.sort(np.asarray(a, float) ** 2)
    n = a2.size
    csum = np.concatenate([[0.0], np.cumsum(a2)])
    best = 0
    for k in range(n):
        if (k + 1) * sigma ** 2 <= csum[n - k]:
            best = k
    return best


def _ellipsoid_k(d, sigma):
    d = np.asarray(d, float)
    n = d.size
    if 1 / d[-1] ** 2 <= sigma ** 2:
        return None
    for k in range(n):
        ok1 = 1 / d[n - k - 1] ** 2 <= (k + 1) * sigma ** 2
        ok2 = k == 0 or 1 / d[n - k] ** 2 > k * sigma ** 2
        if ok1 and ok2:
            return k
    return n - 1


def closed_form_rates(example_id: str, params: dict) -> ClosedFormReport:
    """Arithmetic evaluation of the closed-form rates for the catalog examples."""
    p = dict(params)
    eid = example_id
    if eid == "hyperrect":
        a = np.asarray(p["a"], float)
        s = float(p.get("sigma", 1.0))
        exact = float(np.minimum(a ** 2, s * s).sum())
        k = hyperrect_k(a, s)
        approx = min((k + 2) * s * s, float((a ** 2).sum()))
        return ClosedFormReport(eid, exact, exact, {}, {"sum_min": exact, "k": k, "approx": approx,
                                                        "ratio": exact / approx, "sigma": s})
    if eid == "ellipsoid_minimax":
        d = np.asarray(p["d"], float)
        s = float(p["sigma"])
        diam2 = (2 / d[-1]) ** 2
        k = _ellipsoid_k(d, s)
        mm = diam2 if k is None else min((k + 1) * s * s, diam2)
        return ClosedFormReport(eid, mm, None, {}, {"k": k, "diam2": diam2, "sigma": s})
    if eid == "ellipsoid_prelude_lower":
        d = np.asarray(p["d"], float)
        w = float(p["width"]) if "width" in p else None
        lam = d ** 2 / (2 * d[-1])
        val = None if w is None else w * w / float((1 / lam).sum())
        diam = 2 / d[-1]
        return ClosedFormReport(eid, None, None if val is None else val ** 2,
                                {"sigma_min": None if w is None else diam ** 2 / w},
                                {"lambda": lam.tolist(), "eps_bar_lower": val, "unit_sum_form": 1 / (2 * d[-1])})
    if eid == "l1_local_entropy":
        n, e = int(p["n"]), float(p["eps"])
        val = n if e <= 1 / math.sqrt(n) else math.log(max(e * e * n, math.e)) / (e * e)
        return ClosedFormReport(eid, None, None, {}, {"log_M_loc": val, "branch": "n" if e <= 1 / math.sqrt(n) else "log"})
    if eid == "isotonic_entropy":
        n, e, cs = int(p["n"]), float(p["eps"]), float(p.get("c_star", 5.0))
        V = float(p.get("V", 1.0))
        return ClosedFormReport(eid, None, None, {"eps_min": V / math.sqrt(n)},
                                {"upper": 3 * cs * (V * math.sqrt(n) + e) / e, "lower_order": math.sqrt(n) * V / e})
    if eid == "isotonic_rate":
        n, V, s = int(p["n"]), float(p.get("V", 1.0)), float(p.get("sigma", 1.0))
        e = min(n ** (1 / 6) * V ** (1 / 3) * s ** (2 / 3), math.sqrt(n) * s)
        return ClosedFormReport(eid, e * e, e * e, {}, {"eps": e, "sigma": s})
    if eid == "multiiso_minimax":
        pp, s = int(p["p"]), float(p["sigma"])
        return ClosedFormReport(eid, s ** (2 / pp), None, {}, {"eps": s ** (1 / pp), "sigma": s})
    if eid == "multiiso_lse_log":
        pp, s, n = int(p["p"]), float(p["sigma"]), int(p["n"])
        e = s ** (1 / pp) * math.log(n) ** 2
        return ClosedFormReport(eid, None, e * e, {}, {"eps_upper": e, "sigma": s})
    if eid == "multiiso_suboptimal_window":
        pp, n = int(p["p"]), int(p["n"])
        if pp <= 2:
            raise RegimeViolation("suboptimality window needs p > 2")
        lo = max(n ** -0.5, n ** ((2 - pp) / (2 * pp - 2)) * math.log(n) ** (4 * pp / (pp - 1)))
        hi = n ** (-0.5 + 1 / pp)
        if not lo < hi:
            raise RegimeViolation(f"window empty at n={n}, p={pp}: lower {lo:.3g} >= upper {hi:.3g}")
        return ClosedFormReport(eid, None, None, {"sigma": (lo, hi)}, {})
    if eid == "zhang_ellipsoid":
        n = int(p["n"])
        d = np.ones(n)
        d[-1] = n ** -0.25
        s = 1.0 / (d[-1] ** 2 * math.sqrt(float((1 / d ** 2).sum())))
        k = _ellipsoid_k(d, s)
        diam2 = (2 / d[-1]) ** 2
        mm = diam2 if k is None else min((k + 1) * s * s, diam2)
        return ClosedFormReport(eid, mm, math.sqrt(n), {}, {"sigma": s, "k": k, "diam2": diam2, "d": d.tolist()})
    if eid == "sobolev_ellipsoid":
        n, al = int(p["n"]), float(p["alpha"])
        if not 0 < al < 0.5:
            raise RegimeViolation("need 0 < alpha < 1/2")
        s = math.sqrt(n ** (-1 + 2 * al))
        k = math.ceil(n ** ((1 - 2 * al) / (1 + 2 * al)))
        return ClosedFormReport(eid, n ** (-2 * al * (1 - 2 * al) / (1 + 2 * al)), 1.0, {},
                                {"sigma": s, "k": k})
    if eid == "lp_strong_convexity":
        pp, n = float(p["p"]), int(p["n"])
        if not 1 < pp < 2:
            raise RegimeViolation("need 1 < p < 2")
        kk = (pp - 1) * n ** (0.5 - 1 / pp)
        sb = 1 / n ** (1 - 1 / pp)
        return ClosedFormReport(eid, None, 4.0, {"sigma_bad": sb},
                                {"k": kk, "sigma_bad": sb, "d": 2.0})
    if eid == "extreme_sigma":
        r, d, n, s = float(p["r"]), float(p["d"]), int(p["n"]), float(p["sigma"])
        small, large = s <= r / math.sqrt(n), s >= d
        return ClosedFormReport(eid, None, None, {"small": r / math.sqrt(n), "large": d},
                                {"optimal_regime": bool(small or large), "small": small, "large": large})
    if eid == "geometric_mean":
        s, es, n = float(p["sigma"]), float(p["eps_star"]), int(p["n"])
        cs = float(p.get("c_star", 5.0))
        v = math.sqrt(s) * log_factor_Cn(n, cs) * math.sqrt(es) * n ** 0.25
        return ClosedFormReport(eid, None, v * v, {}, {"value": v})
    raise KeyError(f"unknown closed-form id {example_id!r}")


CLOSED_FORM_IDS = ("hyperrect", "ellipsoid_minimax", "ellipsoid_prelude_lower", "l1_local_entropy",
                   "isotonic_entropy", "isotonic_rate", "multiiso_minimax", "multiiso_lse_log",
                   "multiiso_suboptimal_window", "zhang_ellipsoid", "sobolev_ellipsoid",
                   "lp_strong_convexity", "extreme_sigma", "geometric_mean")
