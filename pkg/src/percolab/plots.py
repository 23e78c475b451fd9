"""Report rendering: CSV tables and matplotlib figures from run records."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .cardy import cardy_crossing
from .harness import RunRecord


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


_EST_COLS = ("p_hat", "ci_low", "ci_high", "n", "successes")


def _est_row(d):
    return [d[c] for c in _EST_COLS]


def _emit_crossing(rec, out):
    est = rec.results["estimate"]
    return [_write_csv(out / "crossing.csv", _EST_COLS, [_est_row(est)])]


def _emit_cardy_compare(rec, out):
    pts = rec.results["points"]
    files = [
        _write_csv(
            out / "cardy_compare.csv",
            ("aspect", "cardy") + _EST_COLS,
            [[p["aspect"], p["cardy"]] + _est_row(p) for p in pts],
        )
    ]
    fig, ax = plt.subplots(figsize=(5, 4))
    grid = np.linspace(min(p["aspect"] for p in pts) * 0.8, max(p["aspect"] for p in pts) * 1.1, 200)
    ax.plot(grid, [cardy_crossing(a) for a in grid], "k-", lw=1, label="conformal prediction")
    aspects = [p["aspect"] for p in pts]
    phat = [p["p_hat"] for p in pts]
    yerr = np.array([[p["p_hat"] - p["ci_low"] for p in pts], [p["ci_high"] - p["p_hat"] for p in pts]])
    ax.errorbar(aspects, phat, yerr=yerr, fmt="o", ms=4, capsize=3, label="Monte Carlo")
    ax.set_xlabel("aspect ratio")
    ax.set_ylabel("crossing probability")
    ax.legend()
    files.append(_save(fig, out / "cardy_compare.png"))
    return files


def _emit_rg_map(rec, out):
    pts = rec.results["points"]
    files = [
        _write_csv(
            out / "rg_map.csv",
            ("t", "p", "clamped", "r1", "r1_ci_low", "r1_ci_high", "r2", "r2_ci_low", "r2_ci_high"),
            [
                [p["t"], p["p"], int(p["clamped"]), p["r1"]["p_hat"], p["r1"]["ci_low"],
                 p["r1"]["ci_high"], p["r2"]["p_hat"], p["r2"]["ci_low"], p["r2"]["ci_high"]]
                for p in pts
            ],
        )
    ]
    r1 = np.array([p["r1"]["p_hat"] for p in pts])
    r2 = np.array([p["r2"]["p_hat"] for p in pts])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, 1], [0, 1], "k--", lw=0.8, label="diagonal")
    ax.plot(r1, r2, "o-", ms=4, label="renormalization map")
    fp = rec.results.get("fixed_point", {})
    if "r_star" in fp:
        rs, m = fp["r_star"], fp["slope"]
        ax.plot([rs], [rs], "r*", ms=12, label=f"fixed point (slope {m:.2f})")
        w = np.array([-0.15, 0.15])
        ax.plot(rs + w, rs + m * w, "r-", lw=1)
    ax.set_xlabel("crossing probability, unit square")
    ax.set_ylabel("crossing probability, doubled square")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="upper left", fontsize=8)
    files.append(_save(fig, out / "rg_map.png"))
    return files


def _emit_collapse(rec, out):
    cells = rec.results["cells"]
    files = [
        _write_csv(
            out / "collapse.csv",
            ("t", "delta") + _EST_COLS,
            [[c["t"], c["delta"]] + _est_row(c) for c in cells],
        )
    ]
    fig, ax = plt.subplots(figsize=(5, 4))
    for d in rec.results["deltas"]:
        sub = [c for c in cells if c["delta"] == d]
        sub.sort(key=lambda c: c["t"])
        ax.plot([c["t"] for c in sub], [c["p_hat"] for c in sub], "o-", ms=3,
                label=f"spacing 1/{round(1 / d)}")
    ax.set_xlabel("scaling parameter t")
    ax.set_ylabel("crossing probability")
    ax.set_title(f"max vertical spread {rec.results['spread']:.3f}")
    ax.legend(fontsize=8)
    files.append(_save(fig, out / "collapse.png"))
    return files


def _emit_web_stats(rec, out):
    per = rec.results["per_delta"]
    files = [
        _write_csv(
            out / "web_stats.csv",
            ("rows", "delta", "curves", "mean_length", "exponent_mean", "kappa_mean"),
            [[d["rows"], d["delta"], d["curves"], d["mean_length"], d["exponent_mean"],
              d["kappa_mean"]] for d in per],
        )
    ]
    tails = rec.results.get("kappa_tails")
    if tails:
        u = np.asarray(tails["u_grid"])
        rows = []
        fig, ax = plt.subplots(figsize=(5, 4))
        for key, tail in sorted(tails["tails"].items(), key=lambda kv: -float(kv[0])):
            d = float(key)
            ax.step(u, tail, where="post", label=f"spacing 1/{round(1 / d)}")
            rows.extend([d, ui, ti] for ui, ti in zip(u, tail))
        ax.set_xlabel("u")
        ax.set_ylabel("P(kappa >= u)")
        ax.set_title(f"tail spread {tails['spread']:.3f}")
        ax.legend(fontsize=8)
        files.append(_save(fig, out / "kappa_tails.png"))
        files.append(_write_csv(out / "kappa_tails.csv", ("delta", "u", "tail"), rows))
    return files


def _emit_duality_audit(rec, out):
    rows = []
    ex = rec.results.get("exhaustive")
    if ex:
        rows.append(["exhaustive", ex["grid"], ex["configs"], ex["xor_holds"],
                     ex["crossing_probability"]])
    rnd = rec.results["random"]
    rows.append(["random", rnd["grid"], rnd["n"], rnd["xor_holds"], ""])
    return [_write_csv(out / "duality_audit.csv",
                       ("mode", "grid", "configs", "xor_holds", "crossing_probability"), rows)]


def _emit_droplet_rotation(rec, out):
    pts = rec.results["points"]
    files = [
        _write_csv(
            out / "droplet_rotation.csv",
            ("angle_deg",) + _EST_COLS,
            [[p["angle_deg"]] + _est_row(p) for p in pts],
        )
    ]
    fig, ax = plt.subplots(figsize=(5, 4))
    angles = [p["angle_deg"] for p in pts]
    phat = [p["p_hat"] for p in pts]
    yerr = np.array([[p["p_hat"] - p["ci_low"] for p in pts], [p["ci_high"] - p["p_hat"] for p in pts]])
    ax.errorbar(angles, phat, yerr=yerr, fmt="o", capsize=3)
    ax.axhline(np.mean(phat), color="k", lw=0.8, ls="--")
    ax.set_xlabel("rotation angle (degrees)")
    ax.set_ylabel("crossing probability")
    ax.set_title(f"max pairwise z = {rec.results['max_pairwise_z']:.2f}")
    files.append(_save(fig, out / "droplet_rotation.png"))
    return files


def _emit_independence(rec, out):
    r = rec.results["report"]
    return [
        _write_csv(
            out / "independence.csv",
            ("p_a", "p_b", "p_both", "covariance", "covariance_se", "z_score", "n"),
            [[r["p_a"], r["p_b"], r["p_both"], r["covariance"], r["covariance_se"],
              r["z_score"], r["n"]]],
        )
    ]


_EMITTERS = {
    "crossing": _emit_crossing,
    "cardy_compare": _emit_cardy_compare,
    "rg_map": _emit_rg_map,
    "collapse": _emit_collapse,
    "web_stats": _emit_web_stats,
    "duality_audit": _emit_duality_audit,
    "droplet_rotation": _emit_droplet_rotation,
    "independence": _emit_independence,
}


def emit_plots(record: RunRecord, outdir: str | Path) -> list[Path]:
    """Write the record's CSV tables and figures into `outdir`.

    Incomplete records are refused: a truncated run must not silently
    produce plausible-looking reports.
    """
    if not record.complete:
        raise ValueError("record is incomplete; refusing to render a report")
    experiment = record.config["experiment"]
    if experiment not in _EMITTERS:
        raise ValueError(f"unknown experiment {experiment!r}")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    return _EMITTERS[experiment](record, out)
