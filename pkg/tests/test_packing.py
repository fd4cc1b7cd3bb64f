import itertools
import math

import numpy as np
import pytest

from seqlab.bodies import make_body
from seqlab.errors import OrderViolation, RegimeViolation, Unbounded
from seqlab.packing import (EntropyOracle, global_entropy, greedy_packing, isotonic_vg_packing,
                            local_entropy, minimax_rate, multiiso_vg_packing, yang_barron_interval)
from seqlab.records import Budgets


def test_greedy_line():
    P = greedy_packing([0.0, 0.5, 1.0, 1.5], 0.6)
    np.testing.assert_allclose(P.points.ravel(), [0.0, 1.0])
    assert P.maximal_wrt == 4


def test_greedy_wide_spacing_single_point():
    X = np.random.default_rng(0).normal(size=(50, 3))
    assert len(greedy_packing(X, 100.0)) == 1


def test_greedy_interval_matches_brute_force():
    X = np.linspace(-1, 1, 2001)[:, None]
    P = greedy_packing(X, 0.5)
    # brute force: the most points of [-1, 1] with gaps strictly above 1/2
    best = max(m for m in range(1, 8) if 2.0 / (m - 1 if m > 1 else 1) > 0.5 or m == 1)
    assert len(P) == best == 4
    assert P.validate()


def test_greedy_maximal():
    X = np.random.default_rng(1).uniform(size=(400, 2))
    P = greedy_packing(X, 0.2)
    d = np.linalg.norm(X[:, None] - P.points[None], axis=2).min(1)
    assert np.all(d <= 0.2)


def test_local_entropy_singleton():
    e = local_entropy(make_body({"kind": "Singleton", "point": [1.0, 1.0]}), 0.5)
    assert e.log_count_lower == 0


@pytest.mark.parametrize("n", [2, 4, 8])
def test_local_entropy_ball_volumetric(n):
    e = local_entropy(make_body({"kind": "L2Ball", "n": n}), 0.5, 5.0, probe_budget=1,
                      cloud_budget=100_000 if n <= 4 else 20_000, seed=0)
    assert e.log_count_lower >= 0.3 * n
    assert e.packing.validate(make_body({"kind": "L2Ball", "n": n}))
    assert e.log_count_lower <= e.log_count_upper


def test_local_entropy_interval():
    K = make_body({"kind": "HyperRectangle", "a": [2.0]})
    for eps in (0.5, 1.0, 2.0):
        assert local_entropy(K, eps, 5.0, cloud_budget=500).log_count_lower >= math.log(2)


def test_global_entropy_examples():
    assert global_entropy(make_body({"kind": "L2Ball", "n": 3}), 2.1).log_count_lower == 0
    e = global_entropy(make_body({"kind": "HyperRectangle", "a": [1.0, 1.0]}), 0.9, 2000)
    assert len(e.packing) >= 4
    with pytest.raises(Unbounded):
        global_entropy(make_body({"kind": "FullSpace", "n": 2}), 1.0)


def test_global_entropy_agrees_with_vg_isotonic():
    n, eps = 64, 1.0
    K = make_body({"kind": "IsotonicBox", "n": n})
    vg = isotonic_vg_packing(n, 0.0, 1.0, eps)
    assert vg.validate(K)
    g = global_entropy(K, vg.spacing, 4000)
    assert g.packing.validate(K)
    # both certify lower bounds on the same packing number; neither exceeds the volumetric cap
    cap = 3 * 5.0 * (math.sqrt(n) + vg.spacing) / vg.spacing
    assert max(g.log_count_lower, vg.log_count) <= cap


def test_yang_barron_examples():
    assert yang_barron_interval(5.0, 2.0) == (3.0, 5.0)
    assert yang_barron_interval(2.0, 2.0) == (0.0, 2.0)
    with pytest.raises(OrderViolation):
        yang_barron_interval(1.0, 2.0)


def test_yang_barron_l1_ball():
    n, eps, c = 100, 1.0, 5.0
    K = make_body({"kind": "L1Ball", "n": n})
    fine = global_entropy(K, eps / c, 5000).log_count_lower
    coarse = global_entropy(K, eps, 5000).log_count_lower
    lo, hi = yang_barron_interval(fine, coarse)
    ref = math.log(eps * eps * n) / eps ** 2
    assert lo <= 10 * ref and hi >= ref / 10
    loc = local_entropy(K, eps, c, probe_budget=1, cloud_budget=3000).log_count_lower
    assert loc <= hi + 1e-12


def test_minimax_singleton_and_unbounded():
    b = Budgets(probes=2, cloud=300)
    assert minimax_rate(make_body({"kind": "Singleton", "point": [0.0]}), 1.0, budgets=b).upper == 0
    with pytest.raises(Unbounded):
        minimax_rate(make_body({"kind": "FullSpace", "n": 2}), 1.0, budgets=b)


def test_minimax_ball_min_one_nsigma2():
    b = Budgets(probes=2, cloud=1500)
    r = minimax_rate(make_body({"kind": "L2Ball", "n": 10}), 0.1, budgets=b)
    target = min(1.0, 10 * 0.01)
    assert r.lower <= 10 * target and r.upper >= target / 10


@pytest.mark.parametrize("sigma", [0.1, 1.0, 10.0])
def test_minimax_interval(sigma):
    a = 1.0
    b = Budgets(probes=3, cloud=400)
    r = minimax_rate(make_body({"kind": "HyperRectangle", "a": [a]}), sigma, budgets=b)
    t = min(a * a, sigma * sigma)
    assert r.lower <= 10 * t and r.upper >= t / 10
    assert r.lower <= r.upper <= (2 * a) ** 2


def test_entropy_envelope_monotone():
    K = make_body({"kind": "L1Ball", "n": 6})
    E = EntropyOracle(K, 5.0, 2, 800, 0)
    grid = np.geomspace(0.05, 2, 9)
    for e in grid:
        E.estimate(e)
    env = [E.lower_envelope(e) for e in grid]
    assert np.all(np.diff(env) <= 1e-12)


def test_l1_local_entropy_small_scale_is_order_n():
    for n in (4, 8, 16):
        K = make_body({"kind": "L1Ball", "n": n})
        e = local_entropy(K, 0.5 / math.sqrt(n), 5.0, probe_budget=1, cloud_budget=6000)
        assert e.log_count_lower >= 0.25 * n


# ---------------------------------------------------------------- explicit constructions
def test_isotonic_vg_examples():
    P = isotonic_vg_packing(64, 0.0, 1.0, 1.0)
    assert len(P) >= 2
    X = P.points
    assert np.all(np.diff(X, axis=1) >= 0) and X.min() >= 0 and X.max() <= 1
    D2 = ((X[:, None] - X[None]) ** 2).sum(-1)
    np.fill_diagonal(D2, np.inf)
    assert D2.min() >= P.meta["proof_distance_sq"] - 1e-12
    assert D2.min() > P.spacing ** 2
    assert len(isotonic_vg_packing(64, 0.5, 0.5, 1.0)) == 1
    with pytest.raises(RegimeViolation):
        isotonic_vg_packing(64, 0.0, 1.0, 0.01)


def test_multiiso_vg_examples():
    P = multiiso_vg_packing(2, 256, 0.25)
    X = P.points
    assert set(np.unique(X)) <= {0.0, 1.0}
    side = 16
    idx = list(itertools.product(range(side), repeat=2))
    order = [(i, j) for i, u in enumerate(idx) for j, v in enumerate(idx)
             if u != v and u[0] <= v[0] and u[1] <= v[1]]
    I, J = np.array(order).T
    assert np.all(X[:, I] <= X[:, J])
    lo, hi = P.meta["antichain_bounds"]
    assert lo <= P.meta["free"] <= hi
    assert P.validate(make_body({"kind": "MultiIsotonicLattice", "n": 256, "p": 2}))
    assert len(multiiso_vg_packing(2, 256, 1.0)) == 1
