"""Experiment runner: validated configs, dispatch, persistent run records.

A run record's results block is a canonical-JSON dict whose digest must be
identical when the same config is run again (any worker count): that is the
reproducibility contract the CI determinism audit checks.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cardy import cardy_crossing
from .clusters import crossing_indicator, duality_xor_check
from .droplet import critical_intensity, rotation_invariance_report
from .lattice import LatticeKind, LatticeSpec, enumerate_configurations, sample_configuration
from .rng import SeedSchedule, derive_seed
from .scaling import (
    BOND_PC,
    ScalingFamily,
    aspect_spec,
    estimate_crossing,
    fixed_point_and_slope,
    independence_test,
    rg_scan,
    scaling_collapse,
)
from .web import (
    dyadic_scales,
    extract_lowest_crossing,
    fit_tortuosity_exponent,
    holder_kappa,
    kappa_tail_report,
    tortuosity_profile,
)

EXPERIMENTS = (
    "crossing",
    "cardy_compare",
    "rg_map",
    "collapse",
    "web_stats",
    "duality_audit",
    "droplet_rotation",
    "independence",
)

# required -> type, optional -> (type, default); unknown keys are rejected
_COMMON_REQUIRED = {"experiment": str, "master_seed": int, "n_samples": int}
_COMMON_OPTIONAL = {"workers": (int, 1), "output": (str, None)}

_SCHEMAS = {
    "crossing": (
        {"kind": str, "rows": int, "p": float},
        {"aspect": (float, 1.0), "direction": (str, "left_right")},
    ),
    "cardy_compare": (
        {"kind": str, "rows": int},
        {"p": (float, BOND_PC), "aspects": (list, [0.5, 1.0, 1.5, 2.0])},
    ),
    "rg_map": (
        {"kind": str, "rows": int},
        {
            "p_c": (float, BOND_PC),
            "nu": (float, 4.0 / 3.0),
            "t_min": (float, -2.0),
            "t_max": (float, 2.0),
            "t_count": (int, 11),
        },
    ),
    "collapse": (
        {"kind": str, "deltas": list},
        {
            "p_c": (float, BOND_PC),
            "nu": (float, 4.0 / 3.0),
            "t_min": (float, -2.0),
            "t_max": (float, 2.0),
            "t_count": (int, 5),
        },
    ),
    "web_stats": (
        {"kind": str, "rows_list": list},
        {
            "p": (float, BOND_PC),
            "curves_per_delta": (int, 200),
            "alpha": (float, 2.0 / 3.0),
            "u_max": (float, 8.0),
            "u_count": (int, 41),
        },
    ),
    "duality_audit": (
        {"rows": int},
        {"exhaustive": (bool, True)},
    ),
    "droplet_rotation": (
        {"radius": float},
        {
            "intensity": (float, None),
            "rect_width": (float, 0.6),
            "rect_height": (float, 0.2),
            "angles_deg": (list, [0.0, 15.0, 30.0, 45.0]),
        },
    ),
    "independence": (
        {"kind": str, "rows": int, "p": float, "rect_a": list, "rect_b": list},
        {"direction": (str, "left_right")},
    ),
}


class ConfigError(ValueError):
    """Raised for malformed experiment configurations."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    master_seed: int
    n_samples: int
    workers: int = 1
    output: str | None = None
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        experiment = raw.get("experiment")
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
        required, optional = _SCHEMAS[experiment]
        known = (
            set(_COMMON_REQUIRED) | set(_COMMON_OPTIONAL) | set(required) | set(optional)
        )
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values = {}
        for key, typ in {**_COMMON_REQUIRED, **required}.items():
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
            values[key] = _coerce(key, raw[key], typ)
        for key, (typ, default) in {**_COMMON_OPTIONAL, **optional}.items():
            if raw.get(key) is None:  # absent or explicit null: use default
                values[key] = default
            else:
                values[key] = _coerce(key, raw[key], typ)
        if values["n_samples"] < 1:
            raise ConfigError("n_samples must be >= 1")
        if values["workers"] < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= values["master_seed"] < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        params = {
            k: v
            for k, v in values.items()
            if k not in ("experiment", "master_seed", "n_samples", "workers", "output")
        }
        return cls(
            experiment=values["experiment"],
            master_seed=values["master_seed"],
            n_samples=values["n_samples"],
            workers=values["workers"],
            output=values["output"],
            params=params,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "master_seed": self.master_seed,
            "n_samples": self.n_samples,
            "workers": self.workers,
            "output": self.output,
            **self.params,
        }


def _coerce(key, value, typ):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, bool):
        raise ConfigError(f"key {key!r} must be {typ.__name__}, got bool")
    if not isinstance(value, typ):
        raise ConfigError(f"key {key!r} must be {typ.__name__}, got {type(value).__name__}")
    return value


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha(obj) -> str:
    return hashlib.sha256(_canonical_json(obj).encode()).hexdigest()


@dataclass(frozen=True)
class RunRecord:
    config: dict
    config_digest: str
    results: dict
    results_digest: str
    duration_s: float
    version: str
    complete: bool

    def to_json(self) -> str:
        return _canonical_json(
            {
                "config": self.config,
                "config_digest": self.config_digest,
                "results": self.results,
                "results_digest": self.results_digest,
                "duration_s": self.duration_s,
                "version": self.version,
                "complete": self.complete,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        d = json.loads(text)
        return cls(
            d["config"], d["config_digest"], d["results"], d["results_digest"],
            d["duration_s"], d["version"], d["complete"],
        )


def _estimate_dict(est) -> dict:
    return {
        "p_hat": est.p_hat,
        "n": est.n_samples,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "successes": est.successes,
        "digest": est.config_digest,
    }


# -- experiment bodies -----------------------------------------------------


def _run_crossing(cfg: ExperimentConfig, results: dict):
    p = cfg.params
    spec = LatticeSpec(LatticeKind(p["kind"]), p["rows"], p["rows"])
    est = estimate_crossing(
        spec, p["p"], p["aspect"], p["direction"], cfg.n_samples,
        SeedSchedule(cfg.master_seed), cfg.workers,
    )
    results["estimate"] = _estimate_dict(est)


def _run_cardy_compare(cfg: ExperimentConfig, results: dict):
    p = cfg.params
    base = LatticeSpec(LatticeKind(p["kind"]), p["rows"], p["rows"])
    rows_out = []
    sched = SeedSchedule(cfg.master_seed)
    for k, aspect in enumerate(p["aspects"]):
        est = estimate_crossing(
            base, p["p"], float(aspect), "left_right", cfg.n_samples,
            sched.shifted(k * cfg.n_samples), cfg.workers,
        )
        rows_out.append(
            {
                "aspect": float(aspect),
                "cardy": cardy_crossing(float(aspect)),
                **_estimate_dict(est),
            }
        )
        results["points"] = rows_out


def _run_rg_map(cfg: ExperimentConfig, results: dict):
    p = cfg.params
    spec = LatticeSpec(LatticeKind(p["kind"]), p["rows"], p["rows"])
    family = ScalingFamily(
        p["p_c"], p["nu"], np.linspace(p["t_min"], p["t_max"], p["t_count"]), (spec.spacing,)
    )
    points = rg_scan(spec, family, cfg.n_samples, SeedSchedule(cfg.master_seed), cfg.workers)
    results["points"] = [
        {
            "t": pt.t,
            "p": pt.p,
            "clamped": pt.clamped,
            "r1": _estimate_dict(pt.r1),
            "r2": _estimate_dict(pt.r2),
        }
        for pt in points
    ]
    try:
        rep = fixed_point_and_slope(points)
        results["fixed_point"] = {
            "r_star": rep.r_star,
            "t_star": rep.t_star,
            "slope": rep.slope,
            "slope_ci": list(rep.slope_ci),
            "degenerate": rep.degenerate,
        }
    except ValueError as exc:
        results["fixed_point"] = {"error": str(exc)}


def _run_collapse(cfg: ExperimentConfig, results: dict):
    p = cfg.params
    family = ScalingFamily(
        p["p_c"], p["nu"], np.linspace(p["t_min"], p["t_max"], p["t_count"]),
        [float(d) for d in p["deltas"]],
    )
    report = scaling_collapse(
        LatticeKind(p["kind"]), family, cfg.n_samples, SeedSchedule(cfg.master_seed), cfg.workers
    )
    results["t_grid"] = list(family.t_grid)
    results["deltas"] = list(family.delta_grid)
    results["cells"] = [
        {"t": t, "delta": d, **_estimate_dict(report.estimates[(t, d)])}
        for t in family.t_grid
        for d in family.delta_grid
    ]
    results["spread"] = report.spread


def _run_web_stats(cfg: ExperimentConfig, results: dict):
    p = cfg.params
    kind = LatticeKind(p["kind"])
    u_grid = np.linspace(0.0, p["u_max"], p["u_count"])
    sched = SeedSchedule(cfg.master_seed)
    per_delta = []
    kappa_groups = {}
    stream = 0
    for rows in p["rows_list"]:
        spec = LatticeSpec(kind, int(rows), int(rows))
        scales = dyadic_scales(spec.spacing)
        exponents, kappas, lengths = [], [], []
        found = 0
        attempts = 0
        while found < p["curves_per_delta"] and attempts < 20 * p["curves_per_delta"]:
            config = sample_configuration(spec, p["p"], derive_seed(sched, stream))
            stream += 1
            attempts += 1
            curve = extract_lowest_crossing(config)
            if curve is None:
                continue
            found += 1
            lengths.append(len(curve))
            kappas.append(holder_kappa(curve, p["alpha"]).kappa)
            try:
                exponent, _ = fit_tortuosity_exponent(tortuosity_profile(curve, scales))
                exponents.append(exponent)
            except ValueError:
                pass  # curve too short for the dyadic grid
        kappa_groups[spec.spacing] = kappas
        per_delta.append(
            {
                "rows": int(rows),
                "delta": spec.spacing,
                "curves": found,
                "mean_length": float(np.mean(lengths)) if lengths else None,
                "exponents": exponents,
                "exponent_mean": float(np.mean(exponents)) if exponents else None,
                "kappa_mean": float(np.mean(kappas)) if kappas else None,
            }
        )
        results["per_delta"] = per_delta
    if len(kappa_groups) >= 2:
        tail = kappa_tail_report(kappa_groups, u_grid)
        results["kappa_tails"] = {
            "u_grid": list(u_grid),
            "tails": {repr(d): list(v) for d, v in tail.tails.items()},
            "envelope": list(tail.envelope),
            "spread": tail.spread,
        }


def _run_duality_audit(cfg: ExperimentConfig, results: dict):
    p = cfg.params
    n = p["rows"]
    if p["exhaustive"]:
        spec = LatticeSpec(LatticeKind.BOND, 3, 2)
        total = ok = crossings = 0
        for config in enumerate_configurations(spec):
            total += 1
            ok += duality_xor_check(config)
            crossings += crossing_indicator(config, "left_right")
        results["exhaustive"] = {
            "grid": "3x2",
            "configs": total,
            "xor_holds": ok,
            "crossing_probability": crossings / total,
        }
    spec = LatticeSpec(LatticeKind.BOND, n + 1, n)
    sched = SeedSchedule(cfg.master_seed)
    ok = 0
    for i in range(cfg.n_samples):
        config = sample_configuration(spec, 0.5, derive_seed(sched, i))
        ok += duality_xor_check(config)
    results["random"] = {"grid": f"{n + 1}x{n}", "n": cfg.n_samples, "xor_holds": ok}


def _run_droplet_rotation(cfg: ExperimentConfig, results: dict):
    p = cfg.params
    sched = SeedSchedule(cfg.master_seed)
    intensity = p["intensity"]
    if intensity is None:
        intensity = critical_intensity(p["radius"], sched.shifted(10**9))
        results["bisected_intensity"] = intensity
    report = rotation_invariance_report(
        intensity, p["radius"], (p["rect_width"], p["rect_height"]),
        [float(a) for a in p["angles_deg"]], cfg.n_samples, sched,
    )
    results["intensity"] = intensity
    results["radius"] = p["radius"]
    results["points"] = [
        {"angle_deg": a, **_estimate_dict(report.estimates[a])} for a in report.angles_deg
    ]
    results["max_pairwise_z"] = report.max_pairwise_z


def _run_independence(cfg: ExperimentConfig, results: dict):
    p = cfg.params
    spec = LatticeSpec(LatticeKind(p["kind"]), p["rows"], p["rows"])
    rep = independence_test(
        spec, p["p"], tuple(p["rect_a"]), tuple(p["rect_b"]),
        cfg.n_samples, SeedSchedule(cfg.master_seed), p["direction"],
    )
    results["report"] = {
        "p_a": rep.p_a,
        "p_b": rep.p_b,
        "p_both": rep.p_both,
        "covariance": rep.covariance,
        "covariance_se": rep.covariance_se,
        "z_score": rep.z_score,
        "n": rep.n_samples,
    }


_RUNNERS = {
    "crossing": _run_crossing,
    "cardy_compare": _run_cardy_compare,
    "rg_map": _run_rg_map,
    "collapse": _run_collapse,
    "web_stats": _run_web_stats,
    "duality_audit": _run_duality_audit,
    "droplet_rotation": _run_droplet_rotation,
    "independence": _run_independence,
}


def run(config: ExperimentConfig) -> RunRecord:
    """Execute one experiment and return its record.

    On interruption the partial results collected so far are returned in a
    record marked incomplete.
    """
    started = time.perf_counter()
    results: dict = {}
    complete = True
    try:
        _RUNNERS[config.experiment](config, results)
    except KeyboardInterrupt:
        complete = False
    duration = time.perf_counter() - started
    cfg_dict = config.to_dict()
    return RunRecord(
        config=cfg_dict,
        config_digest=_sha(cfg_dict),
        results=results,
        results_digest=_sha(results),
        duration_s=duration,
        version=__version__,
        complete=complete,
    )


def append_record(record: RunRecord, outdir: str | Path) -> Path:
    """One JSON record per line in the run log."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "records.jsonl"
    with path.open("a") as fh:
        fh.write(record.to_json() + "\n")
    return path
