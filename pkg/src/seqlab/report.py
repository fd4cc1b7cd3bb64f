"""Deterministic CSV / JSON / Markdown rendering of experiment reports."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .experiments import canonical_json

CSV_COLUMNS = ["experiment_id", "point", "sigma", "quantity", "lower", "upper", "value", "stderr"]
PLOT_COLUMNS = ["point", "param", "sigma", "risk", "stderr"]


def _fmt(x):
    return "" if x is None else repr(float(x)) if isinstance(x, (int, float)) else str(x)


def csv_text(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    eid = report["experiment_id"]
    for r in report["rows"]:
        base = [eid, r["point"], _fmt(r["sigma"])]
        for name in sorted(r["brackets"]):
            lo, hi = r["brackets"][name]
            w.writerow(base + [name, _fmt(lo), _fmt(hi), "", ""])
        for name in sorted(r["risk"]):
            rk = r["risk"][name]
            w.writerow(base + ["risk_" + name, "", "", _fmt(rk["mean"]), _fmt(rk.get("stderr"))])
        cf = r.get("closed_form") or {}
        for name in ("minimax", "lse"):
            if cf.get(name) is not None:
                w.writerow(base + ["closed_form_" + name, "", "", _fmt(cf[name]), ""])
    return buf.getvalue()


def plot_text(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_COLUMNS)
    for r in report["rows"]:
        param = json.dumps(r["params"], sort_keys=True)
        rk = r["risk"]["lse_worst"]
        w.writerow([r["point"], param, _fmt(r["sigma"]), _fmt(rk["mean"]), _fmt(rk["stderr"])])
    return buf.getvalue()


def md_text(report) -> str:
    lines = [f"# {report['experiment_id']}", "", f"config hash `{report['config_hash']}`", ""]
    names = sorted({k for r in report["rows"] for k in r["brackets"]})
    head = ["point", "sigma", "LSE risk rate"] + names + ["verdict"]
    lines.append("| " + " | ".join(head) + " |")
    lines.append("|" + "---|" * len(head))
    for r in report["rows"]:
        rate = r["risk"]["lse_worst"]["mean"] ** 0.5
        cells = [str(r["point"]), f"{r['sigma']:.4g}", f"{rate:.4g}"]
        for k in names:
            b = r["brackets"].get(k)
            cells.append("" if b is None else f"[{b[0]:.3g}, {b[1]:.3g}]")
        cells.append(r["verdicts"].get("optimality", ""))
        lines.append("| " + " | ".join(cells) + " |")
    lines += ["", "## Certifications", ""]
    for c in report["certifications"]:
        lines.append(f"- {c['name']}: {'pass' if c['passed'] else 'FAIL'}")
    for k, f in sorted(report["fits"].items()):
        if f:
            lines.append(f"- fit {k}: slope {f['slope']:.3f} (ci {f['ci'][0]:.3f}, {f['ci'][1]:.3f})")
    return "\n".join(lines) + "\n"


def emit_report(report, fmt, out_dir) -> Path:
    """Write one format to ``out_dir``; returns the file path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eid = report["experiment_id"]
    if fmt == "json":
        path, text = out / f"{eid}.json", canonical_json(report) + "\n"
    elif fmt == "csv":
        path, text = out / f"{eid}.csv", csv_text(report)
    elif fmt == "md":
        path, text = out / f"{eid}.md", md_text(report)
    elif fmt == "plot":
        path, text = out / f"{eid}_plot.csv", plot_text(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path.write_text(text, encoding="utf-8")
    return path


def load_report(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
