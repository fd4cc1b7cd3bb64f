"""Experiment registry: configs, the per-example pipelines, and their certifications."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .algorithms import global_packing_algorithm, local_packing_algorithm
from .bodies import make_body
from .errors import BudgetExhausted, InvalidSpec, RegimeViolation
from .packing import EntropyOracle, minimax_rate
from .rates import (closed_form_rates, epsilon_K_bar, epsilon_mu, sufficient_condition_check,
                    width_crossing_bound, width_global_bound)
from .records import INCONCLUSIVE, Budgets, ConstantsConfig
from .risk import alt_estimator_risk, clamp_risk_1d, lse_risk, worst_case_risk
from .widths import WidthOracle

SLACK = 10.0  # ordering slack between brackets and Monte-Carlo risk at desk scale


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1, allow_nan=False)


@dataclass
class ExperimentConfig:
    experiment_id: str
    seed: int | None = None
    sigmas: list = field(default_factory=list)
    points: list = field(default_factory=list)     # parameter sweep, one dict per point
    constants: dict = field(default_factory=dict)
    budgets: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    out: str | None = None

    def to_dict(self):
        d = asdict(self)
        d.pop("out")
        return _jsonable(d)

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InvalidSpec(f"unknown config fields {sorted(extra)}")
        return cls(**copy.deepcopy(d))

    def config_hash(self):
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()

    def consts(self, sigma):
        return ConstantsConfig(**{**self.constants, "sigma": float(sigma), "seed": int(self.seed)})

    def budget(self):
        try:
            return Budgets(**self.budgets)
        except TypeError as e:
            raise InvalidSpec(f"bad budgets: {e}") from None


def set_path(d: dict, path: str, value):
    """Dot-path assignment, e.g. ``budgets.reps``; JSON values are decoded."""
    try:
        value = json.loads(value) if isinstance(value, str) else value
    except json.JSONDecodeError:
        pass
    keys = path.split(".")
    cur = d
    for k in keys[:-1]:
        if isinstance(cur, list):
            cur = cur[int(k)]
        else:
            cur = cur.setdefault(k, {})
    if isinstance(cur, list):
        cur[int(keys[-1])] = value
    else:
        cur[keys[-1]] = value
    return d


# -------------------------------------------------------------------- body builders
def _rand_rect(n, seed, lo=0.1, hi=3.0):
    rng = np.random.default_rng([int(seed), 16])
    return np.sort(rng.uniform(lo, hi, n)).tolist()


def _zhang(n):
    d = [1.0] * (n - 1) + [n ** -0.25]
    return {"kind": "Ellipsoid", "n": n, "d": sorted(d, reverse=True)}


def _sobolev(n, alpha):
    return {"kind": "Ellipsoid", "n": n, "d": [(n - k + 1) ** alpha for k in range(1, n + 1)]}


def _pyramid(n, r, H):
    return {"kind": "Pyramid", "n": n, "apex": [0.0] * (n - 1) + [float(H)],
            "base": {"kind": "L2Ball", "n": n - 1, "radius": float(r)}}


def _solid(n, b, h):
    return {"kind": "SolidOfRevolution", "n": n, "knots": [0.0, b / 2, float(b)], "values": [0.0, float(h), 0.0]}


def build_body(eid, p, seed):
    if eid in ("l2ball", "extreme_sigma", "algorithms_demo"):
        return {"kind": "L2Ball", "n": p["n"], "radius": p.get("radius", 1.0)}
    if eid == "l1ball":
        return {"kind": "L1Ball", "n": p["n"], "radius": p.get("radius", 1.0)}
    if eid == "lp_ball":
        return {"kind": "LpBall", "n": p["n"], "p": p["p"], "radius": 1.0}
    if eid == "hyperrectangle":
        return {"kind": "HyperRectangle", "n": p["n"], "a": p.get("a") or _rand_rect(p["n"], seed)}
    if eid == "hyperrect_counterexample":
        n = p["n"]
        return {"kind": "HyperRectangle", "n": n, "a": [n ** -0.5] * (n - 1) + [p.get("a_last", 10.0)]}
    if eid == "subspace":
        n, k = p["n"], p["k"]
        return {"kind": "Subspace", "n": n, "basis": np.eye(n)[:k].tolist()}
    if eid == "isotonic_tv":
        return {"kind": "IsotonicTV", "n": p["n"], "V": p.get("V", 1.0)}
    if eid == "isotonic_box":
        return {"kind": "IsotonicBox", "n": p["n"], "a": 0.0, "b": p.get("b", 1.0)}
    if eid in ("multi_isotonic_optimal", "multi_isotonic_suboptimal"):
        return {"kind": "MultiIsotonicLattice", "n": p["n"], "p": p["p"], "a": 0.0, "b": 1.0}
    if eid == "pyramid":
        return _pyramid(p["n"], p["r"], p["H"])
    if eid == "solid_of_revolution":
        return _solid(p["n"], p["b"], p["h"])
    if eid == "ellipsoid_zhang":
        return _zhang(p["n"])
    if eid == "ellipsoid_sobolev":
        return _sobolev(p["n"], p["alpha"])
    raise InvalidSpec(f"unknown experiment {eid!r}")


SMALL = {"probes": 4, "cloud": 1500, "reps": 2000, "width_samples": 300, "pairs": 4,
         "max_children": 4, "max_nodes": 1500, "ascent_starts": 2, "ascent_steps": 6}

REGISTRY = {
    "l2ball": dict(points=[{"n": 8}], sigmas=[0.05, 0.2, 1.0], options={"bounds": ["minimax", "width"]}),
    "l1ball": dict(points=[{"n": 8}], sigmas=[0.05, 0.5], options={"bounds": ["minimax", "width"]}),
    "lp_ball": dict(points=[{"n": 16, "p": 1.5}], sigmas=[0.397], options={
        "bounds": ["width"], "closed_form": "lp_strong_convexity"}),
    "hyperrectangle": dict(points=[{"n": 16}], sigmas=[1.0], options={
        "bounds": ["width"], "closed_form": "hyperrect", "clamp_oracle": True}),
    "hyperrect_counterexample": dict(points=[{"n": 256}], sigmas=[1.0], options={
        "bounds": [], "closed_form": "hyperrect", "clamp_oracle": True, "sufficient_check": True}),
    "subspace": dict(points=[{"n": 8, "k": 2}], sigmas=[0.5, 2.0], options={
        "bounds": [], "alt": "SubspaceProj", "mu_equal": True, "reference_rate2": "k_sigma2"}),
    "isotonic_tv": dict(points=[{"n": n} for n in (16, 32, 64)], sigmas=[1.0], options={
        "bounds": [], "closed_form": "isotonic_rate", "fit": "n"}),
    "isotonic_box": dict(points=[{"n": 32}], sigmas=[0.2], options={"bounds": ["width"]}),
    # lattice projections are iterative, so this entry runs on fewer probes and draws
    "multi_isotonic_optimal": dict(points=[{"n": 64, "p": 2}], sigmas=[0.5], options={
        "bounds": ["width"], "closed_form": "multiiso_minimax"}, budgets={"probes": 2, "width_samples": 200}),
    "multi_isotonic_suboptimal": dict(points=[{"n": 64, "p": 3}], sigmas=[0.5], options={
        "bounds": [], "closed_form": "multiiso_suboptimal_window"}),
    "pyramid": dict(points=[{"n": 100, "r": 2.0, "H": 6.0}], sigmas=[1.0], options={
        "bounds": [], "alt": "SubspaceProj", "gap": 2.0}),
    "solid_of_revolution": dict(points=[{"n": 100, "b": 10.0, "h": 1.0}], sigmas=[1.0], options={
        "bounds": [], "alt": "AxisProj", "gap": 2.0}),
    "ellipsoid_zhang": dict(points=[{"n": 64}, {"n": 256}], sigmas=["closed_form"], options={
        "bounds": [], "closed_form": "zhang_ellipsoid", "fit": "n"}),
    "ellipsoid_sobolev": dict(points=[{"n": 100, "alpha": 0.25}], sigmas=["closed_form"], options={
        "bounds": [], "closed_form": "sobolev_ellipsoid"}),
    "extreme_sigma": dict(points=[{"n": 8}], sigmas=[0.01, 10.0], options={
        "bounds": ["minimax"], "closed_form": "extreme_sigma"}),
    "algorithms_demo": dict(points=[{"n": 8}], sigmas=[0.05, 0.2], options={
        "bounds": [], "algorithms": True}),
}


def list_experiments():
    return list(REGISTRY)


def default_config(eid, seed=None) -> ExperimentConfig:
    if eid not in REGISTRY:
        raise InvalidSpec(f"unknown experiment {eid!r}; known: {', '.join(REGISTRY)}")
    r = copy.deepcopy(REGISTRY[eid])
    return ExperimentConfig(eid, seed, r["sigmas"], r["points"], {}, {**SMALL, **r.get("budgets", {})},
                            r["options"])


def _closed_params(cf, body, p, sigma):
    if cf == "hyperrect":
        return {"a": body.a.tolist(), "sigma": sigma}
    if cf == "lp_strong_convexity":
        return {"p": p["p"], "n": p["n"]}
    if cf == "isotonic_rate":
        return {"n": p["n"], "V": p.get("V", 1.0), "sigma": sigma}
    if cf in ("multiiso_minimax",):
        return {"p": p["p"], "sigma": sigma}
    if cf == "multiiso_suboptimal_window":
        return {"p": p["p"], "n": p["n"]}
    if cf == "zhang_ellipsoid":
        return {"n": p["n"]}
    if cf == "sobolev_ellipsoid":
        return {"n": p["n"], "alpha": p["alpha"]}
    if cf == "extreme_sigma":
        return {"r": body.radius if hasattr(body, "radius") else 1.0, "d": body.diameter().upper,
                "n": body.n, "sigma": sigma}
    raise InvalidSpec(f"no parameter map for closed form {cf!r}")


def _fit(xs, ys):
    lx, ly = np.log(xs), np.log(ys)
    if len(xs) < 2:
        return None
    if len(xs) == 2:
        s = float((ly[1] - ly[0]) / (lx[1] - lx[0]))
        return {"slope": s, "ci": [s, s], "points": 2}
    r = stats.linregress(lx, ly)
    return {"slope": float(r.slope), "ci": [float(r.slope - 1.96 * r.stderr), float(r.slope + 1.96 * r.stderr)],
            "points": len(xs)}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run the scripted pipeline; returns the report as a plain dict."""
    if cfg.seed is None:
        raise InvalidSpec("a seed is required")
    if cfg.experiment_id not in REGISTRY:
        raise InvalidSpec(f"unknown experiment {cfg.experiment_id!r}")
    eid, opt, bud = cfg.experiment_id, cfg.options, cfg.budget()
    seed = int(cfg.seed)
    rows, certs = [], []

    def certify(name, ok, **detail):
        certs.append({"name": name, "passed": bool(ok), **detail})

    for pi, p in enumerate(cfg.points):
        spec = build_body(eid, p, seed)
        body = make_body(spec)
        W = WidthOracle(body, cfg.constants.get("t_rel", 0.05), cfg.constants.get("delta", 0.05), seed,
                        bud.width_samples)
        ent = EntropyOracle(body, cfg.constants.get("c_star", 5.0), bud.probes, bud.cloud, seed) \
            if body.bounded else None
        cf = opt.get("closed_form")
        sigmas = cfg.sigmas
        for sv in sigmas:
            cf_rep = None
            if sv == "closed_form":
                cf_rep = closed_form_rates(cf, _closed_params(cf, body, p, 1.0))
                sigma = float(cf_rep.values["sigma"])
            else:
                sigma = float(sv)
            consts = cfg.consts(sigma)
            row = {"point": pi, "params": p, "sigma": sigma, "brackets": {}, "risk": {}, "verdicts": {},
                   "notes": {}}
            bounds = opt.get("bounds", [])
            if "minimax" in bounds and body.bounded:
                mm = minimax_rate(body, sigma, consts.c_star, bud, seed, oracle=ent)
                row["brackets"]["minimax"] = [math.sqrt(mm.lower), math.sqrt(mm.upper)]
            if "width" in bounds:
                row["brackets"]["eps_K_bar"] = list(epsilon_K_bar(body, consts, bud, oracle=W).as_pair())
                row["brackets"]["width_crossing"] = list(width_crossing_bound(body, consts, bud, oracle=W).as_pair())
                if body.bounded:
                    row["brackets"]["width_global"] = list(width_global_bound(body, consts, bud, oracle=W).as_pair())
            if cf and cf_rep is None:
                try:
                    cf_rep = closed_form_rates(cf, _closed_params(cf, body, p, sigma))
                except RegimeViolation as e:
                    row["notes"]["closed_form"] = f"outside validity window: {e}"
            if cf_rep is not None:
                row["closed_form"] = {"minimax": cf_rep.minimax, "lse": cf_rep.lse,
                                      "windows": cf_rep.windows, "values": cf_rep.values}
            arg, wr = worst_case_risk(body, sigma, reps=bud.reps, seed=seed, budget=bud.probes)
            row["risk"]["lse_worst"] = {"mean": wr.mean, "stderr": wr.std_error, "reps": wr.replications,
                                        "argmax": wr.meta["argmax"]}
            rate = math.sqrt(wr.mean)
            if opt.get("alt"):
                ar = alt_estimator_risk(body, opt["alt"], arg, sigma, bud.reps, seed)
                row["risk"]["alt"] = {"estimator": opt["alt"], "mean": ar.mean, "stderr": ar.std_error}
                worst_alt = ar.mean
                if "gap" in opt:
                    # alt risk is bounded uniformly; check it at every probe used
                    for q in [body.center()]:
                        worst_alt = max(worst_alt, alt_estimator_risk(body, opt["alt"], q, sigma, bud.reps, seed).mean)
                    sep = wr.mean - opt["gap"] * worst_alt - 3 * (wr.std_error + opt["gap"] * ar.std_error)
                    certify("lse_gap", sep > 0, ratio=wr.mean / max(worst_alt, 1e-300), point=pi, sigma=sigma)
                    if sep > 0:
                        row["verdicts"]["optimality"] = "Suboptimal"
            if opt.get("clamp_oracle"):
                exact = sum(clamp_risk_1d(a, sigma, 0.0) for a in body.a)
                r0 = lse_risk(body, np.zeros(body.n), sigma, bud.reps, seed)
                row["risk"]["center"] = {"mean": r0.mean, "stderr": r0.std_error, "oracle": exact}
                certify("clamp_identity", abs(r0.mean - exact) <= 0.01 * exact + 3 * r0.std_error,
                        point=pi, sigma=sigma)
            if opt.get("sufficient_check"):
                rep = sufficient_condition_check(body, consts, None, bud, oracle=W, entropy=ent)
                row["verdicts"]["sufficient_condition"] = rep.verdict
                certify("sufficient_not_necessary", rep.verdict == INCONCLUSIVE, point=pi, sigma=sigma)
            if opt.get("mu_equal"):
                mus = [np.zeros(body.n)] + [np.asarray(q) for q in body.structured_points()[1:3]]
                vals = [epsilon_mu(body, m, consts, bud, W) for m in mus]
                row["notes"]["eps_mu"] = vals
                certify("eps_mu_translation_invariant", max(vals) - min(vals) <= 0.05 * max(vals), point=pi)
            if opt.get("reference_rate2") == "k_sigma2":
                ref = p["k"] * sigma * sigma
                row["closed_form"] = {"minimax": ref, "lse": ref}
                certify("subspace_risk", abs(wr.mean - ref) <= 3 * wr.std_error + 0.02 * ref, point=pi, sigma=sigma)
                row["verdicts"]["optimality"] = "Optimal" if abs(wr.mean - ref) <= 0.1 * ref else INCONCLUSIVE
            if opt.get("algorithms"):
                try:
                    a2 = local_packing_algorithm(body, consts, budgets=bud, max_depth=min(bud.max_depth, 6))
                    row["brackets"]["local_pack"] = list(a2.bracket.as_pair())
                    row["notes"]["local_pack"] = {"terminated": a2.terminated, "level": a2.level}
                except BudgetExhausted as e:
                    row["notes"]["local_pack"] = {"budget_exhausted": e.level}
                a3 = global_packing_algorithm(body, consts, bud, entropy=ent, oracle=W)
                row["brackets"]["global_pack"] = list(a3.bracket.as_pair())
                row["notes"]["global_pack"] = {"eps": a3.eps, "iterations": a3.iterations}
            # ordering: certified lower sides below, upper sides above the MC risk rate
            lows = [v[0] for k, v in row["brackets"].items()]
            ups = [v[1] for k, v in row["brackets"].items() if k not in ("minimax",)]
            if lows:
                certify("lower_sides_below_risk", max(lows) <= SLACK * rate + 1e-12, point=pi, sigma=sigma)
            if ups:
                certify("risk_below_upper_sides", rate <= SLACK * min(ups) + 1e-12, point=pi, sigma=sigma)
            if "optimality" not in row["verdicts"]:
                row["verdicts"]["optimality"] = _verdict(row, rate)
            rows.append(row)

    fits = {}
    if opt.get("fit"):
        key = opt["fit"]
        xs = [r["params"][key] for r in rows]
        ys = [r["risk"]["lse_worst"]["mean"] for r in rows]
        if all(y > 0 for y in ys):
            fits["risk_vs_" + key] = _fit(xs, ys)
            mm = [(r.get("closed_form") or {}).get("minimax") for r in rows]
            if len(rows) >= 2 and all(m and m > 0 for m in mm):
                ref = _fit(xs, mm)
                fits["minimax_vs_" + key] = ref
                # LSE risk outgrowing the minimax rate across the sweep
                if fits["risk_vs_" + key]["slope"] - ref["slope"] >= 0.2:
                    for r in rows:
                        r["verdicts"]["optimality"] = "Suboptimal"
    return {"experiment_id": eid, "config": cfg.to_dict(), "config_hash": cfg.config_hash(),
            "rows": _jsonable(rows), "fits": _jsonable(fits), "certifications": _jsonable(certs),
            "passed": all(c["passed"] for c in certs), "manifest": _manifest()}


def _verdict(row, rate):
    cf = row.get("closed_form") or {}
    ref = None
    if cf.get("minimax") is not None:
        ref = math.sqrt(cf["minimax"])
    elif "minimax" in row["brackets"]:
        ref = row["brackets"]["minimax"][1]
    if not ref:
        return INCONCLUSIVE
    ratio = rate / ref
    if ratio <= 2.0:
        return "Optimal"
    if ratio >= 4.0:
        return "Suboptimal"
    return INCONCLUSIVE


def _manifest():
    import scipy
    from importlib.metadata import PackageNotFoundError, version
    try:
        v = version("seqlab")
    except PackageNotFoundError:
        v = "unknown"
    return {"seqlab": v, "numpy": np.__version__, "scipy": scipy.__version__}
