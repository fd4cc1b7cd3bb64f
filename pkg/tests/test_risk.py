import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqlab.bodies import make_body
from seqlab.errors import UnsupportedEstimator
from seqlab.risk import (alt_estimator_risk, clamp_risk_1d, default_probes, lse_risk,
                         packing_descent_1d, worst_case_risk)

from oracles import clamp_risk_closed_form


def within(est, ref, k=3.0):
    return abs(est.mean - ref) <= k * est.std_error + 1e-12


# ---------------------------------------------------------------- LSE risk
def test_singleton_zero():
    r = lse_risk(make_body({"kind": "Singleton", "point": [1.0, 2.0]}), [1.0, 2.0], 1.0, 500)
    assert r.mean == 0 and r.std_error == 0
    arg, w = worst_case_risk({"kind": "Singleton", "point": [1.0, 2.0]}, 1.0, reps=200)
    assert w.mean == 0


@pytest.mark.parametrize("n", [1, 5])
def test_full_space_identity(n):
    r = lse_risk(make_body({"kind": "FullSpace", "n": n}), np.zeros(n), 0.7, 4000, seed=3)
    assert within(r, n * 0.49)


def test_interval_against_quadrature():
    s = 0.5
    K = make_body({"kind": "HyperRectangle", "a": [10 * s]})
    r = lse_risk(K, [0.0], s, 20000, seed=1)
    assert within(r, clamp_risk_1d(10 * s, s))
    r = lse_risk(K, [4 * s], s, 20000, seed=1)
    assert within(r, clamp_risk_1d(10 * s, s, 4 * s))


def test_antithetic_only_on_symmetric_bodies():
    box = lse_risk({"kind": "HyperRectangle", "a": [1.0, 0.5]}, [0.0, 0.0], 1.0, 1000)
    iso = lse_risk({"kind": "IsotonicBox", "n": 3, "a": 0.0, "b": 1.0}, [0.2, 0.5, 0.5], 1.0, 1000)
    assert box.meta["antithetic"] and not iso.meta["antithetic"]
    assert box.replications == 1000 == iso.replications
    plain = lse_risk({"kind": "HyperRectangle", "a": [1.0, 0.5]}, [0.0, 0.0], 1.0, 1000, antithetic=False)
    assert abs(box.mean - plain.mean) <= 3 * math.hypot(box.std_error, plain.std_error)


def test_determinism_and_seed_dependence():
    K = {"kind": "L1Ball", "n": 4}
    a = lse_risk(K, np.zeros(4), 0.3, 600, seed=9)
    b = lse_risk(K, np.zeros(4), 0.3, 600, seed=9)
    c = lse_risk(K, np.zeros(4), 0.3, 600, seed=10)
    assert a.mean == b.mean and a.mean != c.mean


def test_csv_row_schema():
    r = lse_risk({"kind": "FullSpace", "n": 2}, [0.0, 0.0], 1.0, 100, seed=2)
    row = r.csv_row("b", "m")
    assert row[:4] == ["b", "m", "1.0", "LSE"] and row[6:] == ["100", "2"]


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([{"kind": "L2Ball", "n": 3}, {"kind": "IsotonicBox", "n": 4, "a": 0.0, "b": 1.0},
                        {"kind": "Ellipsoid", "d": [2.0, 1.0, 0.5]}, {"kind": "L1Ball", "n": 3}]),
       st.floats(0.05, 3.0), st.integers(0, 10 ** 6))
def test_lse_never_worse_than_identity(spec, sigma, seed):
    K = make_body(spec)
    mu = K.project(np.random.default_rng(seed).normal(size=K.n))
    r = lse_risk(K, mu, sigma, 400, seed)
    assert r.mean <= K.n * sigma ** 2 + 3 * r.std_error + 1e-12


# ---------------------------------------------------------------- worst case
@pytest.mark.parametrize("a", [[0.2, 0.5, 1.0, 2.0], [10.0, 10.0], [0.05] * 8 + [3.0] * 8])
def test_box_worst_case_vs_clamp_sum(a):
    s = 1.0
    K = make_body({"kind": "HyperRectangle", "a": a})
    arg, w = worst_case_risk(K, s, reps=4000, seed=5)
    ref = sum(min(x * x, s * s) for x in a)
    assert ref / 3 <= w.mean <= 3 * ref
    assert w.mean >= max(w.meta["probe_risks"]) - 1e-15


def test_zhang_worst_at_long_axis_tip():
    n = 256
    d = [1.0] * (n - 1) + [n ** -0.25]
    K = make_body({"kind": "Ellipsoid", "d": d})
    s = 0.972
    arg, w = worst_case_risk(K, s, reps=1000, seed=0)
    assert abs(abs(arg[-1]) - n ** 0.25) < 1e-9 and np.allclose(arg[:-1], 0)
    assert 0.25 * math.sqrt(n) <= w.mean <= 4 * math.sqrt(n)


def test_default_probes_structured_first():
    K = make_body({"kind": "HyperRectangle", "a": [1.0, 2.0]})
    P = default_probes(K, 6)
    assert len(P) <= 6 and all(K.contains(p, 1e-12) for p in P)
    assert any(np.allclose(np.abs(p), [1.0, 2.0]) for p in P)


# ---------------------------------------------------------------- comparison estimators
def test_subspace_projection_risk():
    n, k, s = 6, 2, 0.8
    K = make_body({"kind": "Subspace", "basis": np.eye(n)[:, :k].tolist()})
    r = alt_estimator_risk(K, "SubspaceProj", np.zeros(n), s, 4000, seed=4)
    assert within(r, k * s * s)
    r2 = alt_estimator_risk({"kind": "L2Ball", "n": 3}, "SubspaceProj", np.zeros(3), 1.0, 500, basis=[1, 0, 0])
    assert within(r2, 1.0)


def test_pyramid_and_solid_alt_bounds():
    pyr = make_body({"kind": "Pyramid", "n": 20, "apex": [0.0] * 19 + [6.0],
                     "base": {"kind": "L2Ball", "n": 19, "radius": 2.0}})
    d2 = pyr.diameter().upper ** 2
    for mu in default_probes(pyr, 6):
        r = alt_estimator_risk(pyr, "SubspaceProj", mu, 1.0, 1000, seed=1)
        assert r.mean <= 1 + d2 + 3 * r.std_error
    h = 1.0
    sol = make_body({"kind": "SolidOfRevolution", "n": 20, "knots": [0, 5, 10], "values": [0, h, 0]})
    for mu in default_probes(sol, 6):
        r = alt_estimator_risk(sol, "AxisProj", mu, 1.0, 1000, seed=1)
        assert r.mean <= 1 + h * h + 3 * r.std_error


def test_unsupported_estimators():
    with pytest.raises(UnsupportedEstimator):
        alt_estimator_risk({"kind": "L2Ball", "n": 3}, "SubspaceProj", np.zeros(3), 1.0, 100)
    with pytest.raises(UnsupportedEstimator):
        alt_estimator_risk({"kind": "L2Ball", "n": 3}, "Clamp1D", np.zeros(3), 1.0, 100)
    with pytest.raises(UnsupportedEstimator):
        alt_estimator_risk({"kind": "L2Ball", "n": 3}, "Magic", np.zeros(3), 1.0, 100)


def test_one_dimensional_estimators_match_lse():
    K = make_body({"kind": "HyperRectangle", "a": [1.5]})
    a = lse_risk(K, [0.7], 1.0, 2000, seed=8, antithetic=False)
    b = alt_estimator_risk(K, "Clamp1D", [0.7], 1.0, 2000, seed=8)
    c = alt_estimator_risk(K, "PackingDescent1D", [0.7], 1.0, 2000, seed=8)
    assert a.mean == pytest.approx(b.mean, rel=1e-12)
    assert c.mean == pytest.approx(b.mean, rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------- 1-D oracles
def test_clamp_risk_examples():
    assert clamp_risk_1d(20.0, 1.0) == pytest.approx(1.0, abs=1e-6)
    assert clamp_risk_1d(0.0, 1.0) == 0.0
    v = clamp_risk_1d(1.0, 1.0)
    assert 0.25 <= v <= 1.0
    with pytest.raises(ValueError):
        clamp_risk_1d(1.0, 1.0, 2.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 30), st.floats(1e-2, 10), st.floats(-1, 1))
def test_clamp_risk_matches_truncated_moments(a, sigma, frac):
    mu = frac * a
    assert clamp_risk_1d(a, sigma, mu) == pytest.approx(clamp_risk_closed_form(a, sigma, mu), rel=1e-7, abs=1e-9)


def test_packing_descent_examples():
    assert packing_descent_1d(2.0, 1.0, iters=30) == pytest.approx(1.0, abs=2 * 2 ** -29)
    assert packing_descent_1d(-5.0, 1.0, iters=30) == pytest.approx(-1.0, abs=2 * 2 ** -29)
    y = 0.3141
    assert abs(packing_descent_1d(y, 1.0, iters=60) - y) <= 2 * 2 ** -60 + 1e-15
    with pytest.raises(ValueError):
        packing_descent_1d(0.0, 1.0, c=2.0)


def test_packing_descent_contract_and_geometric_rate():
    rng = np.random.default_rng(0)
    y = rng.normal(scale=3, size=500)
    a = rng.uniform(0.1, 5, size=500)
    errs = []
    for k in range(1, 21):
        e = np.abs(np.array([packing_descent_1d(yi, ai, iters=k) for yi, ai in zip(y, a)]) - np.clip(y, -a, a))
        assert np.all(e <= 2 * a * 2.0 ** -k + 1e-12)
        errs.append(np.mean(e / a))
    ratios = [errs[i + 1] / errs[i] for i in range(len(errs) - 1) if errs[i] > 1e-13]
    assert np.mean(ratios) <= 0.75
