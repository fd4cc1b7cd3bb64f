"""Acceptance gate: one test per criterion, each recording a one-line summary."""
import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.stats import linregress

from seqlab.algorithms import global_packing_algorithm, local_packing_algorithm
from seqlab.bodies import make_body
from seqlab.experiments import build_body, list_experiments
from seqlab.packing import (EntropyOracle, global_entropy, isotonic_vg_packing, local_entropy,
                            minimax_rate, multiiso_vg_packing, yang_barron_interval)
from seqlab.rates import closed_form_rates, epsilon_mu
from seqlab.records import Budgets, ConstantsConfig
from seqlab.risk import (alt_estimator_risk, clamp_risk_1d, default_probes, lse_risk,
                         packing_descent_1d, worst_case_risk)
from seqlab.widths import WidthOracle, local_width

from oracles import gauss_norm_mean, grid_search, projection_certificate
from test_projection_oracle import CASES, QUERIES, RES, members, queries

FAILURE_BUDGET = 1e-3


def within_budget(fails, trials):
    return fails <= FAILURE_BUDGET * trials


# ---------------------------------------------------------------- AC1
def test_ac01_width_calibration(record_property):
    t0 = time.perf_counter()
    worst = {}
    for n in (2, 4, 8):
        ref = gauss_norm_mean(n)
        hits = 0
        for seed in range(100):
            w = local_width({"kind": "FullSpace", "n": n}, np.zeros(n), 1.0, 0.05, 0.01, seed)
            hits += abs(w.value - ref) <= 2 * 0.05
        worst[n] = hits
    dt = time.perf_counter() - t0
    record_property("summary", f"hits/100 per n {worst}, {dt:.1f}s")
    assert all(h >= 99 for h in worst.values())
    assert dt < 60


# ---------------------------------------------------------------- AC2
def test_ac02_projection_oracle(record_property):
    worst = {}
    for kind, spec in sorted(CASES.items()):
        K = make_body(spec)
        assert K.n <= 4
        Y = queries(K, QUERIES)
        P = K.project(Y)
        if kind == "Subspace":
            errs = []
            for y, p in zip(Y, P):
                R = np.linalg.norm(y) + 1e-9
                g, _ = grid_search(lambda C: np.ones(len(C), bool), lambda X: -((X - y) ** 2).sum(1),
                                   -R * np.ones(2), R * np.ones(2), np.zeros(2), embed=lambda C: C @ K.U.T)
                errs.append(np.linalg.norm(p - g))
        else:
            errs = [math.sqrt(max(projection_certificate(members(K), y, p, K.center()), 0.0))
                    for y, p in zip(Y, P)]
        worst[kind] = max(errs)
    bad = {k: v for k, v in worst.items() if v > RES}
    record_property("summary", f"{len(CASES)} kinds x {QUERIES} queries, max error "
                               f"{max(worst.values()):.2e} (resolution {RES})")
    assert not bad, bad


# ---------------------------------------------------------------- AC3
def test_ac03_hyperrect_risk_identity(record_property):
    n, s = 16, 1.0
    a = np.random.default_rng(2024).uniform(0.1, 3.0, n)
    K = make_body({"kind": "HyperRectangle", "a": a.tolist()})
    r = lse_risk(K, np.zeros(n), s, 100_000, seed=3)
    exact = sum(clamp_risk_1d(ai, s, 0.0) for ai in a)
    cf = closed_form_rates("hyperrect", {"a": a.tolist(), "sigma": s})
    approx = cf.values["approx"]
    ratio = r.mean / approx
    record_property("summary", f"MC {r.mean:.4f}+-{r.std_error:.4f} vs clamp sum {exact:.4f}; "
                               f"closed-form ratio {ratio:.2f}")
    assert abs(r.mean - exact) <= 0.01 * exact + 3 * r.std_error
    assert 1 / 3 <= ratio <= 3


# ---------------------------------------------------------------- AC4
def test_ac04_isotonic_scaling(record_property):
    ns = [16, 32, 64, 128, 256, 512]
    risks = [worst_case_risk({"kind": "IsotonicTV", "n": n, "V": 1.0}, 1.0, reps=2000, budget=16)[1].mean
             for n in ns]
    slope = linregress(np.log(ns), np.log(risks)).slope
    record_property("summary", f"log-log slope {slope:.3f} (target 1/3, window [0.23, 0.43])")
    assert 0.23 <= slope <= 0.43


# ---------------------------------------------------------------- AC5
def test_ac05_zhang_suboptimality(record_property):
    tips, uppers = [], []
    for n in (64, 256, 1024):
        s = closed_form_rates("zhang_ellipsoid", {"n": n}).values["sigma"]
        K = make_body(build_body("ellipsoid_zhang", {"n": n}, 0))
        tip = np.zeros(n)
        tip[-1] = 1 / K.d[-1]
        tips.append(lse_risk(K, tip, s, 4000, seed=1).mean)
        uppers.append(minimax_rate(K, s, budgets=Budgets(probes=2, cloud=2000)).upper)
    ratios = [tips[1] / tips[0], tips[2] / tips[1]]
    growth = max(uppers) / uppers[0]
    record_property("summary", f"tip risk ratios {ratios[0]:.2f}, {ratios[1]:.2f}; "
                               f"minimax upper growth x{growth:.1f}")
    assert min(ratios) >= 1.5
    assert growth <= 8 and min(uppers) >= uppers[0] / 8


# ---------------------------------------------------------------- AC6
GAP_CASES = [("pyramid", {"n": 100, "r": 2.0, "H": 6.0}, "SubspaceProj"),
             ("solid_of_revolution", {"n": 100, "b": 10.0, "h": 1.0}, "AxisProj")]


@pytest.mark.parametrize("eid,params,alt", GAP_CASES, ids=[c[0] for c in GAP_CASES])
def test_ac06_suboptimality_gaps(eid, params, alt, record_property):
    K = make_body(build_body(eid, params, 0))
    probes = default_probes(K, 16, 0)
    _, lse = worst_case_risk(K, 1.0, probes=probes, reps=20_000)
    alts = [alt_estimator_risk(K, alt, q, 1.0, 20_000) for q in probes]
    top = max(alts, key=lambda r: r.mean)
    sep = lse.mean - 2 * top.mean - 3 * (lse.std_error + 2 * top.std_error)
    record_property("summary", f"{eid}: LSE {lse.mean:.3f} / {alt} {top.mean:.3f} = "
                               f"{lse.mean / top.mean:.2f}, margin {sep:.3f}")
    assert sep > 0


# ---------------------------------------------------------------- AC7
WIDTH_BODIES = [
    {"kind": "L1Ball", "n": 4, "radius": 1.0},
    {"kind": "LpBall", "n": 4, "p": 1.5, "radius": 1.0},
    {"kind": "HyperRectangle", "a": [1.0, 0.5, 0.25, 2.0]},
    {"kind": "Ellipsoid", "d": [2.0, 1.0, 1.0, 0.5]},
    {"kind": "IsotonicBox", "n": 4},
]
RATE_BODIES = [{"kind": "L1Ball", "n": 3}, {"kind": "HyperRectangle", "a": [1.0, 0.3, 0.6]},
               {"kind": "Ellipsoid", "d": [2.0, 1.0, 0.5]}]
PB = Budgets(probes=2, cloud=400, width_samples=300)


def _width_trials(rng, trials):
    oracles = [WidthOracle(make_body(s), t_rel=0.05, delta=0.05, seed=i, max_samples=300)
               for i, s in enumerate(WIDTH_BODIES)]
    for _ in range(trials):
        W = oracles[rng.integers(len(oracles))]
        pick = lambda: W.body.project(rng.uniform(-2, 2, W.body.n))  # noqa: E731
        yield W, pick, float(rng.uniform(0.05, 2.0))


def _width_properties(rng, trials):
    fails = dict.fromkeys(["monotone", "slope", "concave", "lipschitz"], 0)
    for W, pick, eps in _width_trials(rng, trials):
        nu, mu = pick(), pick()
        f = float(rng.uniform(1.05, 3.0))
        tol = W.t_rel * eps / 10    # accuracy of each inner maximization
        a, b = W(nu, eps), W(nu, f * eps)
        fails["monotone"] += b < a - tol
        fails["slope"] += b / (f * eps) > (a + tol) / eps
        al = float(rng.uniform())
        mid = al * nu + (1 - al) * mu
        fails["concave"] += W(mid, eps) < al * a + (1 - al) * W(mu, eps) - tol
        gap = abs(a - W(mu, eps))
        fails["lipschitz"] += gap > math.sqrt(W.body.n) * np.linalg.norm(nu - mu) + 3 * W.t_rel * eps + 1e-9
    return fails


def _volumetric(K, delta):
    return K.n * math.log1p(2 * K.radius_bound() / delta)


def _rate_properties(rng, trials):
    fails = dict.fromkeys(["eps_mu<=d", "eps_mu sigma-monotone", "eps_mu scaling",
                           "eps_dagger invariance", "eps_star floor", "yang-barron"], 0)
    kappa = ConstantsConfig().kappa
    for _ in range(trials):
        ix = int(rng.integers(len(RATE_BODIES)))
        K = make_body(RATE_BODIES[ix])
        d = K.diameter().upper
        s, c = float(rng.uniform(0.05, 2.0)), float(rng.uniform(1.0, 4.0))
        mu = K.project(rng.uniform(-1, 1, K.n))
        a = epsilon_mu(K, mu, ConstantsConfig(sigma=s), PB)
        b = epsilon_mu(K, mu, ConstantsConfig(sigma=c * s), PB)
        tol = 0.05 * max(a, b) + 1e-9
        fails["eps_mu<=d"] += max(a, b) > d + 1e-12
        fails["eps_mu sigma-monotone"] += b < a - tol
        fails["eps_mu scaling"] += b > c * a + tol
        E = EntropyOracle(K, 5.0, 2, 400, ix)
        base = math.sqrt(minimax_rate(K, s, budgets=PB, oracle=E).lower)
        for C1, C2 in ((0.5, 2.0), (2.0, 0.5)):
            alt = math.sqrt(minimax_rate(K, s, budgets=PB, oracle=E, C1=C1, C2=C2).lower)
            fails["eps_dagger invariance"] += not base / 8 <= alt <= 8 * base
        fails["eps_star floor"] += base < min(s, d) / kappa
        # certified lower bounds against volumetric upper bounds on both sides
        eps = float(rng.uniform(0.1, 1.0)) * d
        fine = global_entropy(K, eps / 5.0, 3000, seed=ix).log_count_lower
        loc = local_entropy(K, eps, 5.0, probe_budget=1, cloud_budget=1500, seed=ix)
        lo, hi = yang_barron_interval(_volumetric(K, eps / 5.0), global_entropy(K, eps, 3000, seed=ix).log_count_lower)
        fails["yang-barron"] += not (loc.log_count_lower <= hi and fine <= hi
                                     and fine - _volumetric(K, eps) <= loc.log_count_upper and lo <= hi)
    return fails


def _vi_property(rng, trials):
    bodies = [make_body(s) for s in WIDTH_BODIES + RATE_BODIES]
    fails = 0
    for _ in range(trials):
        K = bodies[rng.integers(len(bodies))]
        y = rng.uniform(-4, 4, K.n)
        p, x = K.project(y), K.project(rng.uniform(-2, 2, K.n))
        fails += (y - p) @ (x - p) > 1e-8 * (1 + np.linalg.norm(y))
    return {"variational inequality": fails}


def test_ac07_property_suites(record_property):
    rng = np.random.default_rng(7)
    counts = {}
    for fn, trials in ((_width_properties, 1000), (_vi_property, 5000), (_rate_properties, 40)):
        for k, v in fn(rng, trials).items():
            counts[k] = (v, trials)
    bad = {k: v for k, v in counts.items() if not within_budget(*v)}
    record_property("summary", f"{len(counts)} properties, failures "
                               + ", ".join(f"{k} {f}/{t}" for k, (f, t) in counts.items()))
    assert not bad, bad


# ---------------------------------------------------------------- AC8
def test_ac08_radius_risk_regime(record_property):
    c = ConstantsConfig(sigma=1.0)
    cases = [({"kind": "FullSpace", "n": 4}, None), ({"kind": "FullSpace", "n": 16}, None),
             ({"kind": "HyperRectangle", "a": [10.0] * 8}, None),
             ({"kind": "HyperRectangle", "a": [5.0, 4.0, 3.0, 2.0, 1.0, 0.5]}, [1.0, -2.0, 0.0, 1.0, 0.0, 0.2])]
    ratios, skipped = [], 0
    for spec, mu in cases:
        K = make_body(spec)
        mu = np.zeros(K.n) if mu is None else np.asarray(mu)
        e = epsilon_mu(K, mu, c, Budgets(width_samples=2000))
        if e < 4 * c.C_hat * c.sigma:
            skipped += 1
            continue
        ratios.append(lse_risk(K, mu, c.sigma, 20_000, seed=5).mean / e ** 2)
    record_property("summary", f"risk/eps_mu^2 in [{min(ratios):.2f}, {max(ratios):.2f}] "
                               f"over {len(ratios)} cases")
    assert len(ratios) >= 3
    assert all(0.15 <= r <= 2.6 for r in ratios)


# ---------------------------------------------------------------- AC9
ALG_BUDGET = Budgets(width_samples=300, cloud=500, probes=4, pairs=4, max_children=6, max_nodes=20000,
                     ascent_starts=2, ascent_steps=10)


def test_ac09_algorithms_consistency(record_property):
    from test_algorithms import test_queue_order_on_synthetic_tree
    test_queue_order_on_synthetic_tree()
    lines, ok = [], True
    for spec, s in [({"kind": "L2Ball", "n": 8}, 0.05), ({"kind": "L2Ball", "n": 8}, 0.2),
                    ({"kind": "HyperRectangle", "a": [1.0] * 8}, 0.2)]:
        K = make_body(spec)
        c = ConstantsConfig(sigma=s)
        rate = math.sqrt(worst_case_risk(K, s, reps=2000, budget=16)[1].mean)
        loc = local_packing_algorithm(K, c, budgets=ALG_BUDGET)
        glob = global_packing_algorithm(K, c, ALG_BUDGET)
        ok &= loc.bracket.contains(rate, 20) and glob.bracket.contains(rate, 20)
        ok &= glob.iterations <= 20
        lines.append(f"{K.kind} s={s}: rate {rate:.3f} local [{loc.bracket.lower:.3g}, {loc.bracket.upper:.3g}] "
                     f"global [{glob.bracket.lower:.3g}, {glob.bracket.upper:.3g}] ({glob.iterations} doublings)")
    record_property("summary", "; ".join(lines))
    assert ok


# ---------------------------------------------------------------- AC10
def _exact_spacing(P):
    X = P.points
    if len(X) < 2:
        return True
    sq = (X * X).sum(1)
    D2 = sq[:, None] + sq[None] - 2 * X @ X.T
    np.fill_diagonal(D2, np.inf)
    return D2.min() > P.spacing ** 2


def test_ac10_vg_constructions(record_property):
    checked = 0
    for n, (a, b), eps in itertools.product((64, 256, 1024), ((0.0, 1.0), (-1.0, 2.0)), (1.0, 2.0, 4.0)):
        P = isotonic_vg_packing(n, a, b, eps * (b - a))
        K = make_body({"kind": "IsotonicBox", "n": n, "a": a, "b": b})
        assert P.validate(K, tol=0.0) and _exact_spacing(P)
        if P.meta.get("free", 0):
            assert P.log_count >= P.meta["target_log_count"] - 1e-12
            assert P.meta["distance_const"] > 0 and P.meta["count_const"] > 0
        checked += 1
    for p, n, eps in [(2, 256, 0.25), (2, 256, 0.125), (2, 1024, 0.125), (3, 512, 0.25), (3, 4096, 0.125)]:
        P = multiiso_vg_packing(p, n, eps)
        K = make_body({"kind": "MultiIsotonicLattice", "n": n, "p": p})
        assert P.validate(K, tol=1e-12) and _exact_spacing(P)
        lo, hi = P.meta["antichain_bounds"]
        assert lo <= P.meta["free"] <= hi
        assert P.log_count >= P.meta["target_log_count"] - 1e-12
        checked += 1
    record_property("summary", f"{checked} constructions re-validated (membership, spacing, log-count)")


# ---------------------------------------------------------------- AC11
def test_ac11_packing_descent_matches_clamp(record_property):
    rng = np.random.default_rng(11)
    a = rng.uniform(0.01, 10.0, 1000)
    y = rng.normal(scale=2 * a)
    worst = 0.0
    for k in (1, 2, 5, 10, 20, 40):
        got = np.array([packing_descent_1d(yi, ai, 5.0, k) for yi, ai in zip(y, a)])
        excess = np.abs(got - np.clip(y, -a, a)) / (2 * a * 2.0 ** -k)
        worst = max(worst, excess.max())
    record_property("summary", f"max |descent - clamp| / (2a 2^-k) = {worst:.3f} over 1000 pairs")
    assert worst <= 1 + 1e-9


# ---------------------------------------------------------------- AC12
REDUCED = ["budgets.reps=200", "budgets.probes=2", "budgets.width_samples=100", "budgets.cloud=300"]


def test_ac12_determinism_across_threads(tmp_path, record_property):
    mismatched = []
    eids = list_experiments()
    for eid in eids:
        outs = []
        for t in ("1", "8"):
            d = tmp_path / eid / t
            cmd = [sys.executable, "-m", "seqlab.cli", "--threads", t, "experiment", "run", eid,
                   "--seed", "3", "--out", str(d)]
            for kv in REDUCED:
                cmd += ["--set", kv]
            r = subprocess.run(cmd, capture_output=True, text=True)
            assert r.returncode in (0, 2), r.stderr
            outs.append(((d / f"{eid}.json").read_bytes(), (d / f"{eid}.csv").read_bytes()))
        if outs[0] != outs[1]:
            mismatched.append(eid)
    record_property("summary", f"{len(eids) - len(mismatched)}/{len(eids)} experiments byte-identical at 1 vs 8 threads")
    assert not mismatched, mismatched
