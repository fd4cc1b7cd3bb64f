"""Tree-structured local packing search and the doubling global packing search."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .bodies import intersect_dual, make_body, sample_points
from .errors import BudgetExhausted, Unbounded
from .packing import EntropyOracle, greedy_packing, local_cloud, probe_centers
from .rates import _ball_members, underline_eps_star
from .records import GLOBAL_PACK, LOCAL_PACK, Budgets, ConstantsConfig, RateBracket
from .widths import WidthOracle, _path_max


def local_constants(c_star):
    """(C, c') for the local search: C = 4 - 1/c*^2 and the case-split factor c'."""
    C = 4 - 1 / c_star ** 2
    cp = (2 * c_star - 4) * (4 * c_star - 1 / c_star) / ((c_star - 4) * c_star)
    return C, cp


def global_constants(c_star):
    """(C, c') for the global search: C = 8 + 8/c* and c' = (1+c*^2)/(c*^2 (10 + 8/c*))."""
    return 8 + 8 / c_star, (1 + c_star ** 2) / (c_star ** 2 * (10 + 8 / c_star))


class ChildrenDistance(NamedTuple):
    value: float        # Psi - T (an upper bound on it when ``shortcut``)
    psi: float
    T: float
    delta: float
    packing: np.ndarray
    shortcut: bool


@dataclass
class LocalPackResult:
    terminated: bool
    level: int
    beta: float | None
    bracket: RateBracket
    tree_stats: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)


@dataclass
class GlobalPackResult:
    eps: float
    terminated_on_init: bool
    iterations: int
    delta_history: list
    bracket: RateBracket
    psi_history: list = field(default_factory=list)
    T_history: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)


def _oracle(body, consts, budgets, oracle):
    if oracle is not None:
        return oracle
    return WidthOracle(body, consts.t_rel, consts.delta, consts.seed, budgets.width_samples)


# -------------------------------------------------------------------- local search
def children_distance(body, nu, k, consts: ConstantsConfig, budgets: Budgets | None = None, seed=0,
                      oracle=None, d=None, shortcut=True) -> ChildrenDistance:
    """Psi - T at node nu on level k, with delta = d / (2^(k-1) c*).

    The children are a greedy delta-packing of B(nu, delta c*) ∩ K.  Widths are
    nonnegative, so when w_nu(delta c*) <= T the sign is already decided and the
    child widths are skipped (``shortcut``); the returned value is then an upper
    bound on Psi - T.
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    W = _oracle(body, consts, budgets, oracle)
    if d is None:
        dd = body.diameter()
        if not dd.bounded:
            raise Unbounded(f"{body.kind} is unbounded")
        d = dd.upper
    nu = np.asarray(nu, float)
    cs = consts.c_star
    C, _ = local_constants(cs)
    delta = d / (2 ** (k - 1) * cs)
    R = delta * cs
    T = C * R * R / (2 * consts.sigma)
    if delta == 0:
        return ChildrenDistance(-T, 0.0, T, 0.0, nu[None, :], False)
    count = min(budgets.cloud, 32 * budgets.max_children)
    cloud = local_cloud(body, nu, R, count, seed)
    kids = greedy_packing(cloud, delta, limit=budgets.max_children).points
    wp = W(nu, R)
    if shortcut and wp <= T:
        return ChildrenDistance(wp - T, wp, T, delta, kids, True)
    psi = wp - min(W(q, delta) for q in kids)
    return ChildrenDistance(psi - T, psi, T, delta, kids, False)


def local_packing_algorithm(body, consts: ConstantsConfig, max_depth=None, budgets: Budgets | None = None,
                            seed=None, oracle=None, start=None,
                            distance_fn: Callable | None = None) -> LocalPackResult:
    """Breadth-first search of the packing tree for a node with positive children distance.

    The queue is consumed from its end and children are pushed at its start, so
    the levels are visited in order.  ``distance_fn(nu, k) -> (value, children)``
    replaces the width-based node evaluation (used to instrument the traversal).
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    max_depth = budgets.max_depth if max_depth is None else max_depth
    seed = consts.seed if seed is None else seed
    dd = body.diameter()
    if not dd.bounded:
        raise Unbounded(f"{body.kind} is unbounded")
    d, s, cs, kap = dd.upper, consts.sigma, consts.c_star, consts.kappa
    C, cp = local_constants(cs)
    notes = {"scale": "eps", "C": C, "c_prime": cp, "c_star": cs, "d": d, "kappa": kap,
             "max_children": budgets.max_children}
    if d == 0:
        return LocalPackResult(False, 0, None, RateBracket(0.0, 0.0, LOCAL_PACK, s, notes), {}, [])
    W = None if distance_fn is not None else _oracle(body, consts, budgets, oracle)
    root = body.center() if start is None else np.asarray(start, float)
    Q = deque([(root, 1, 0)])
    next_id = 1
    stats: dict[int, int] = {}
    trace = []
    done_level = 0
    evaluated = 0
    while Q:
        nu, k, nid = Q.pop()
        if k > max_depth:
            done_level = max_depth
            break
        if evaluated >= budgets.max_nodes:
            err = BudgetExhausted(f"node budget {budgets.max_nodes} reached on level {k}", k - 1)
            err.partial = LocalPackResult(False, k - 1, None, RateBracket(0.0, d, LOCAL_PACK, s, notes),
                                          stats, trace)
            raise err
        if distance_fn is not None:
            gamma, kids = distance_fn(nu, k)
            info = {}
        else:
            cd = children_distance(body, nu, k, consts, budgets, seed, W, d)
            gamma, kids = cd.value, cd.packing
            info = {"delta": cd.delta, "psi": cd.psi, "T": cd.T, "shortcut": cd.shortcut}
        evaluated += 1
        stats[k] = stats.get(k, 0) + 1
        trace.append({"node": nid, "level": k, "gamma": float(gamma), "children": len(kids), **info})
        beta = d / (2 ** (k - 1) * cs)
        if gamma > 0:
            br = RateBracket(beta / kap, d, LOCAL_PACK, s, {**notes, "case": "terminated", "level": k})
            return LocalPackResult(True, k, beta, br, stats, trace)
        for q in kids:
            Q.appendleft((np.asarray(q, float), k + 1, next_id))
            next_id += 1
        done_level = k
    thr = cp * d / 2 ** done_level
    small = min(s, d)
    if s >= thr:
        br = RateBracket(small / kap, min(kap * small, d), LOCAL_PACK, s,
                         {**notes, "case": "noise_dominated", "level": done_level, "threshold": thr})
    else:
        br = RateBracket(0.0, min(thr, d), LOCAL_PACK, s,
                         {**notes, "case": "depth_bound", "level": done_level, "threshold": thr})
    return LocalPackResult(False, done_level, None, br, stats, trace)


# -------------------------------------------------------------------- global search
def width_and_supergradient(body, nu, r, draws, abs_tol):
    """Monte-Carlo w_nu(r) and a supergradient of the concave map nu -> w_nu(r).

    With eta = P_K(nu + s xi) optimal for multiplier 1/(2s), the derivative of
    the Lagrangian in nu is -xi + (eta - nu)/s.
    """
    val, eta, _, _, sb = _path_max(body, nu, r, draws, abs_tol, return_s=True)
    inv = np.where(np.isfinite(sb), 1.0 / np.maximum(sb, 1e-300), 0.0)
    g = -draws + (eta - nu) * inv[:, None]
    return float(np.maximum(val, 0).mean()), g.mean(0)


def _ascend(body, center, radius, r, W, budgets, seed):
    """Multistart projected supergradient ascent of w_.(r) over B(center, radius) ∩ K."""
    starts = [center] + _ball_members(body, center, radius, max(budgets.ascent_starts - 1, 0), seed)
    tol = W.t_rel * r / 10
    best = -math.inf
    for x in starts:
        x = np.asarray(x, float)
        for t in range(budgets.ascent_steps):
            v, g = width_and_supergradient(body, x, r, W.draws, tol)
            best = max(best, v)
            gn = float(np.linalg.norm(g))
            if gn <= 1e-12:
                break
            step = radius / (2 * math.sqrt(t + 1))
            x = intersect_dual(body, center, radius, (x + step * g / gn)[None, :], tol=1e-9)[0]
        best = max(best, W(x, r))
    return best


def _k_cloud(body, count, seed):
    parts = [np.asarray(body.structured_points(), float)]
    parts.append(sample_points(body, count // 2, "Interior", seed))
    parts.append(sample_points(body, count - count // 2, "Boundary", seed))
    return np.vstack(parts)


def global_packing_algorithm(body, consts: ConstantsConfig, budgets: Budgets | None = None, seed=None,
                             max_doublings=None, oracle=None, entropy: EntropyOracle | None = None
                             ) -> GlobalPackResult:
    """Doubling search from eps = 2 * underline eps* until Psi < T.

    Psi is maximized over at most ``budgets.pairs`` packing centers (the
    packing itself is greedy over a finite cloud); the entropy in T is the
    certified lower bound, which enlarges T.  Both choices can only stop the
    loop earlier and are flagged in the result.
    """
    body = make_body(body)
    budgets = budgets or Budgets()
    seed = consts.seed if seed is None else seed
    max_doublings = budgets.max_doublings if max_doublings is None else max_doublings
    dd = body.diameter()
    if not dd.bounded:
        raise Unbounded(f"{body.kind} is unbounded")
    d, s, cs, L, kap = dd.upper, consts.sigma, consts.c_star, consts.L, consts.kappa
    C, cp = global_constants(cs)
    notes = {"scale": "eps", "C": C, "c_prime": cp, "L": L, "c_star": cs, "d": d, "kappa": kap,
             "entropy_side": "certified lower bound (enlarges T)"}
    entropy = entropy or EntropyOracle(body, cs, budgets.probes, budgets.cloud, seed)
    eps0 = 2 * underline_eps_star(body, consts, entropy, C=C)
    if eps0 == 0 or d == 0:
        return GlobalPackResult(0.0, True, 0, [], RateBracket(0.0, 0.0, GLOBAL_PACK, s, notes), [], [],
                                {"underline_eps_star": eps0 / 2})
    W = _oracle(body, consts, budgets, oracle)
    probes = probe_centers(body, budgets.probes, seed)
    cloud = _k_cloud(body, budgets.cloud, seed)
    eps, it = eps0, 0
    hist_d, hist_p, hist_t = [], [], []
    flags = {"underline_eps_star": eps0 / 2, "centers_truncated": False, "packing_truncated": False}
    while True:
        r = eps / cs
        supw = max(W(p, r) for p in probes)
        delta = min(eps ** 3 / (4 * cs * supw * s), eps) if supw > 0 else eps
        P = greedy_packing(cloud, delta, limit=budgets.cloud).points
        if len(P) >= len(cloud):
            flags["packing_truncated"] = True
        centers = P[:budgets.pairs]
        if len(P) > budgets.pairs:
            flags["centers_truncated"] = True
        rad = max(2 * eps - delta, 0.0)
        psi = max(_ascend(body, c, rad, r, W, budgets, seed) - W(c, r) for c in centers)
        T = C * eps * eps / (2 * s) - (L / cs) * eps * math.sqrt(max(entropy.lower_envelope(eps), 0.0))
        hist_d.append(delta)
        hist_p.append(psi)
        hist_t.append(T)
        if psi < T:
            break
        if it >= max_doublings:
            raise BudgetExhausted(f"no exit after {max_doublings} doublings", it)
        eps *= 2
        it += 1
    on_init = it == 0
    if d <= s:
        br = RateBracket(d / kap, d, GLOBAL_PACK, s, {**notes, "case": "large_noise"})
    else:
        br = RateBracket(min(eps / (2 * cs), d), min(eps / cp, d), GLOBAL_PACK, s,
                         {**notes, "case": "init" if on_init else "doubled"})
    return GlobalPackResult(eps, on_init, it, hist_d, br, hist_p, hist_t, flags)
