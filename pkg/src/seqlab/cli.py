"""Command-line front end: ``seqlab <subcommand>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import errors
from ._rng import set_threads

EXIT_OK, EXIT_CERT, EXIT_BUDGET, EXIT_CONFIG = 0, 2, 3, 4
log = logging.getLogger("seqlab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _load_json(text):
    p = Path(text)
    if not text.lstrip().startswith(("{", "[")) and p.exists():
        text = p.read_text()
    return json.loads(text)


def _vec(text):
    if text is None:
        return None
    v = _load_json(text) if text.lstrip().startswith("[") else [float(t) for t in text.split(",")]
    return np.asarray(v, float)


def _consts(a, sigma=None):
    from .records import ConstantsConfig
    kw = {"seed": a.seed}
    if sigma is not None:
        kw["sigma"] = sigma
    if getattr(a, "c_star", None) is not None:
        kw["c_star"] = a.c_star
    return ConstantsConfig(**kw)


def _emit(obj):
    from .experiments import canonical_json
    print(canonical_json(obj))


# ---------------------------------------------------------------- subcommands
def cmd_list(a):
    from .experiments import list_experiments
    for e in list_experiments():
        print(e)
    return EXIT_OK


def cmd_body(a):
    from .bodies import diameter, make_body, membership
    body = make_body(_load_json(a.spec))
    out = {"kind": body.kind, "n": body.n, "bounded": body.bounded}
    d = diameter(body)
    out["diameter"] = {"lower": d.lower, "upper": d.upper, "bounded": d.bounded}
    if a.point is not None:
        out["member"] = bool(membership(body, _vec(a.point), a.tol))
    if a.project is not None:
        out["projection"] = body.project(_vec(a.project)[None, :])[0].tolist()
    _emit(out)
    return EXIT_OK


def cmd_width(a):
    from .bodies import make_body
    from .widths import local_width
    body = make_body(_load_json(a.spec))
    c = _vec(a.center) if a.center is not None else body.center()
    est = local_width(body, c, a.eps, a.t, a.delta, a.seed)
    _emit({"value": est.value, "eps": a.eps, "t": a.t, "delta": a.delta, "N": est.sample_count,
           "seed": a.seed, "stderr": est.stderr})
    return EXIT_OK


def cmd_pack(a):
    from .bodies import make_body
    from .packing import global_entropy, isotonic_vg_packing, local_entropy, multiiso_vg_packing
    if a.construction == "isotonic_vg":
        P = isotonic_vg_packing(a.n, 0.0, 1.0, a.eps, a.seed)
        _emit({"count": len(P), "log_count": P.log_count, "spacing": P.spacing, "meta": P.meta})
        return EXIT_OK
    if a.construction == "multiiso_vg":
        P = multiiso_vg_packing(a.p, a.n, a.eps, 0.0, 1.0, a.seed)
        _emit({"count": len(P), "log_count": P.log_count, "spacing": P.spacing, "meta": P.meta})
        return EXIT_OK
    body = make_body(_load_json(a.spec))
    if a.construction == "global":
        e = global_entropy(body, a.eps, a.cloud, a.seed)
    else:
        e = local_entropy(body, a.eps, a.c_star, a.probes, a.cloud, a.seed)
    _emit({"eps": e.eps, "log_count_lower": e.log_count_lower, "log_count_upper": e.log_count_upper,
           "c_star": e.c_star})
    return EXIT_OK


def cmd_rate(a):
    from . import rates
    from .bodies import make_body
    from .packing import minimax_rate
    from .records import Budgets
    body = make_body(_load_json(a.spec)) if a.spec else None
    c = _consts(a, a.sigma)
    b = Budgets(probes=a.probes, cloud=a.cloud, width_samples=a.width_samples)
    m = a.method
    if m == "closed_form":
        rep = rates.closed_form_rates(a.example, _load_json(a.params or "{}"))
        _emit({"minimax": rep.minimax, "lse": rep.lse, "windows": rep.windows, "values": rep.values})
        return EXIT_OK
    if body is None:
        raise errors.InvalidSpec("--spec is required for this method")
    if m == "minimax":
        br = minimax_rate(body, a.sigma, c.c_star, b, a.seed)
    elif m == "eps_mu":
        mu = _vec(a.mu) if a.mu is not None else body.center()
        _emit({"eps_mu": rates.epsilon_mu(body, mu, c, b)})
        return EXIT_OK
    elif m == "eps_bar":
        br = rates.epsilon_K_bar(body, c, b)
    elif m == "width_crossing":
        br = rates.width_crossing_bound(body, c, b)
    elif m == "width_global":
        br = rates.width_global_bound(body, c, b)
    elif m == "entropy_sup":
        b1, b2 = rates.entropy_sup_bound(body, c, b)
        _emit({"crossing": b1.to_dict(), "geometric_mean": b2.to_dict()})
        return EXIT_OK
    elif m in ("char_A", "char_B", "char_C"):
        try:
            br = rates.characterization_bracket(body, c, m[-1], b)
        except errors.InconclusiveRegime as e:
            _emit({"verdict": "Inconclusive", "eps_bar": e.eps_bar, "sigma": e.sigma})
            return EXIT_OK
    elif m in ("lipschitz", "sufficient"):
        fn = rates.lipschitz_check if m == "lipschitz" else rates.sufficient_condition_check
        rep = fn(body, c, None, b)
        _emit(rep.to_dict())
        return EXIT_OK
    else:
        raise errors.InvalidSpec(f"unknown method {m}")
    _emit(br.to_dict())
    return EXIT_OK


def cmd_risk(a):
    from .bodies import make_body
    from .risk import alt_estimator_risk, lse_risk, worst_case_risk
    body = make_body(_load_json(a.spec))
    if a.worst:
        arg, r = worst_case_risk(body, a.sigma, reps=a.reps, seed=a.seed, budget=a.probes)
        out = r.to_dict()
        out["argmax_point"] = np.asarray(arg).tolist()
    else:
        mu = _vec(a.mu) if a.mu is not None else body.center()
        r = (lse_risk(body, mu, a.sigma, a.reps, a.seed) if a.estimator == "LSE"
             else alt_estimator_risk(body, a.estimator, mu, a.sigma, a.reps, a.seed))
        out = r.to_dict()
    out.pop("probe_risks", None)
    _emit(out)
    return EXIT_OK


def cmd_alg(a, which):
    from .algorithms import global_packing_algorithm, local_packing_algorithm
    from .bodies import make_body
    from .records import Budgets
    body = make_body(_load_json(a.spec))
    c = _consts(a, a.sigma)
    b = Budgets(probes=a.probes, cloud=a.cloud, width_samples=a.width_samples, max_children=a.max_children,
                max_nodes=a.max_nodes, pairs=a.pairs)
    if which == 2:
        r = local_packing_algorithm(body, c, a.max_depth, b)
        if a.trace:
            Path(a.trace).write_text("".join(json.dumps(t, sort_keys=True) + "\n" for t in r.trace))
        _emit({"terminated": r.terminated, "level": r.level, "beta": r.beta, "bracket": r.bracket.to_dict(),
               "tree_stats": r.tree_stats})
    else:
        r = global_packing_algorithm(body, c, b, max_doublings=a.max_doublings)
        _emit({"eps": r.eps, "terminated_on_init": r.terminated_on_init, "iterations": r.iterations,
               "delta_history": r.delta_history, "bracket": r.bracket.to_dict(), "flags": r.flags})
    return EXIT_OK


def cmd_experiment(a):
    from .experiments import ExperimentConfig, default_config, list_experiments, run_experiment, set_path
    from .report import emit_report
    if a.action == "list":
        for e in list_experiments():
            print(e)
        return EXIT_OK
    if not a.id:
        raise errors.InvalidSpec("experiment id required")
    if a.config:
        d = _load_json(a.config)
        d.setdefault("experiment_id", a.id)
        if d["experiment_id"] != a.id:
            raise errors.InvalidSpec("config experiment_id does not match the command line")
        base = default_config(a.id).to_dict()
        for k, v in d.items():
            if isinstance(v, dict) and isinstance(base.get(k), dict):
                base[k].update(v)
            else:
                base[k] = v
        d = base
    else:
        d = default_config(a.id).to_dict()
    if a.seed is not None:
        d["seed"] = a.seed
    for s in a.set or []:
        if "=" not in s:
            raise errors.InvalidSpec(f"--set expects key=value, got {s!r}")
        k, v = s.split("=", 1)
        set_path(d, k, v)
    if d.get("seed") is None:
        raise errors.InvalidSpec("a seed is required (config 'seed' or --seed)")
    cfg = ExperimentConfig.from_dict(d)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rep = run_experiment(cfg)
    for fmt in ("json", "csv", "md", "plot"):
        emit_report(rep, fmt, out)
    with open(out / "run.log", "a", encoding="utf-8") as f:
        f.write(f"{cfg.experiment_id} hash={rep['config_hash']} wall={time.perf_counter() - t0:.2f}s "
                f"passed={rep['passed']}\n")
    print(f"{cfg.experiment_id}: {'pass' if rep['passed'] else 'FAIL'} -> {out}")
    return EXIT_OK if rep["passed"] else EXIT_CERT


# ---------------------------------------------------------------- parser
def build_parser():
    p = _Parser(prog="seqlab", description="Least-squares estimation over convex bodies.")
    p.add_argument("--threads", type=int, default=None, help="cap worker threads (results unchanged)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp, seed=True, spec=True):
        if spec:
            sp.add_argument("--spec", required=True, help="body spec as JSON text or a JSON file")
        if seed:
            sp.add_argument("--seed", type=int, required=True)

    sub.add_parser("list", help="list experiment ids")

    sp = sub.add_parser("body", help="membership, diameter and projection")
    common(sp, seed=False)
    sp.add_argument("--point")
    sp.add_argument("--project")
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = sub.add_parser("width", help="Monte-Carlo local Gaussian width")
    common(sp)
    sp.add_argument("--center")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--t", type=float, default=0.05)
    sp.add_argument("--delta", type=float, default=0.05)

    sp = sub.add_parser("pack", help="packing-number lower bounds")
    sp.add_argument("--spec")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--construction", choices=["local", "global", "isotonic_vg", "multiiso_vg"], default="local")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--c-star", dest="c_star", type=float, default=5.0)
    sp.add_argument("--probes", type=int, default=16)
    sp.add_argument("--cloud", type=int, default=20000)

    sp = sub.add_parser("rate", help="rate brackets, condition checks and closed forms")
    sp.add_argument("--spec")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--method", required=True,
                    choices=["minimax", "eps_mu", "eps_bar", "width_crossing", "width_global", "entropy_sup",
                             "char_A", "char_B", "char_C", "lipschitz", "sufficient", "closed_form"])
    sp.add_argument("--mu")
    sp.add_argument("--example")
    sp.add_argument("--params")
    sp.add_argument("--c-star", dest="c_star", type=float)
    sp.add_argument("--probes", type=int, default=16)
    sp.add_argument("--cloud", type=int, default=20000)
    sp.add_argument("--width-samples", dest="width_samples", type=int)

    sp = sub.add_parser("risk", help="Monte-Carlo estimator risk")
    common(sp)
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--mu")
    sp.add_argument("--reps", type=int, default=2000)
    sp.add_argument("--estimator", default="LSE",
                    choices=["LSE", "Identity", "SubspaceProj", "AxisProj", "Clamp1D", "PackingDescent1D"])
    sp.add_argument("--worst", action="store_true", help="maximize over body-aware probes")
    sp.add_argument("--probes", type=int, default=16)

    for name, which in (("alg2", 2), ("alg3", 3)):
        sp = sub.add_parser(name, help="local packing search" if which == 2 else "global packing search")
        common(sp)
        sp.add_argument("--sigma", type=float, required=True)
        sp.add_argument("--c-star", dest="c_star", type=float)
        sp.add_argument("--probes", type=int, default=8)
        sp.add_argument("--cloud", type=int, default=2000)
        sp.add_argument("--width-samples", dest="width_samples", type=int, default=300)
        sp.add_argument("--max-children", dest="max_children", type=int, default=4)
        sp.add_argument("--max-nodes", dest="max_nodes", type=int, default=4096)
        sp.add_argument("--pairs", type=int, default=4)
        sp.add_argument("--max-depth", dest="max_depth", type=int, default=6)
        sp.add_argument("--max-doublings", dest="max_doublings", type=int, default=20)
        sp.add_argument("--trace", help="JSON-lines node trace output (alg2)")

    sp = sub.add_parser("experiment", help="run a registered experiment")
    sp.add_argument("action", choices=["run", "list"])
    sp.add_argument("id", nargs="?")
    sp.add_argument("--config")
    sp.add_argument("--out", default="out")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    return p


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(message)s")
    set_threads(a.threads)
    handlers = {"list": cmd_list, "body": cmd_body, "width": cmd_width, "pack": cmd_pack, "rate": cmd_rate,
                "risk": cmd_risk, "alg2": lambda x: cmd_alg(x, 2), "alg3": lambda x: cmd_alg(x, 3),
                "experiment": cmd_experiment}
    try:
        return handlers[a.cmd](a)
    except errors.BudgetExhausted as e:
        print(f"budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (errors.InvalidSpec, errors.DimensionMismatch, errors.InvalidPrecision, errors.UnsupportedMode,
            errors.UnsupportedEstimator, errors.OrderViolation, errors.RegimeViolation, errors.Unbounded,
            json.JSONDecodeError, FileNotFoundError, KeyError, TypeError, ValueError) as e:
        print(f"invalid configuration: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (errors.NonConvergence, errors.EmptyIntersection) as e:
        print(f"certification failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())
