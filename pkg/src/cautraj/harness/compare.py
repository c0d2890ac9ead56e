"""Paired baseline/causal runs over many scenarios."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..causal.weights import CausalWeights, WeightModel
from ..planner.mpc import MODES, MpcConfig, plan_trajectory, resolve_weights
from .metrics import METRIC_NAMES, compute_metrics, five_number_summary


def _clean(obj):
    """JSON-safe copy: NaN/inf become ``None``, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def run_case(scenario, config: MpcConfig, weights: Optional[CausalWeights] = None,
             weight_model: Optional[WeightModel] = None, keep_trajectories=False):
    """Both modes on one scenario; errors are captured, never raised."""
    entry = {"case_id": scenario.name, "status": "ok", "error": None}
    plans = {}
    try:
        w = resolve_weights("causal", scenario, weights, weight_model)
        entry["weights"] = w.to_dict()
        for mode in MODES:
            plan = plan_trajectory(scenario, config, mode, weights=w if mode == "causal" else None)
            metrics = compute_metrics(plan, scenario.reference, config)
            entry[mode] = {"outcome": plan.outcome, "steps": plan.n - 1, **metrics.to_dict()}
            if keep_trajectories:
                plans[mode] = plan
    except Exception as exc:  # one bad case must not stop the run
        entry.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        for mode in MODES:
            entry.pop(mode, None)
    return entry, plans


def _run_case_args(args):
    return run_case(*args)


@dataclass
class ComparisonReport:
    cases: list
    config: dict = field(default_factory=dict)

    @property
    def n_failed(self):
        return sum(1 for c in self.cases if c["status"] != "ok")

    def rows(self):
        """One row per successful (case, mode)."""
        out = []
        for c in self.cases:
            if c["status"] != "ok":
                continue
            for mode in MODES:
                out.append({"case_id": c["case_id"], "mode": mode,
                            **{k: c[mode][k] for k in ("outcome", *METRIC_NAMES)}})
        return out

    def summary(self):
        rows = self.rows()
        return {mode: {m: five_number_summary([r[m] for r in rows if r["mode"] == mode])
                       for m in METRIC_NAMES}
                for mode in MODES}

    def paired(self):
        ok = [c for c in self.cases if c["status"] == "ok"]

        def med(mode, key):
            vals = [c[mode][key] for c in ok if math.isfinite(c[mode][key])]
            return float(np.median(vals)) if vals else math.nan

        both = [c for c in ok if math.isfinite(c["baseline"]["max_trajectory_deviation"])
                and math.isfinite(c["causal"]["max_trajectory_deviation"])]
        return {
            "n_paired": len(ok),
            "lateral_speed_std_median": {m: med(m, "lateral_speed_std") for m in MODES},
            "yaw_std_median": {m: med(m, "yaw_std") for m in MODES},
            "accel_std_median": {m: med(m, "accel_std") for m in MODES},
            "deviation_not_worse": sum(1 for c in both if c["causal"]["max_trajectory_deviation"]
                                       <= c["baseline"]["max_trajectory_deviation"]),
            "deviation_compared": len(both),
        }

    def to_dict(self):
        return _clean({
            "config": self.config,
            "n_cases": len(self.cases),
            "n_failed": self.n_failed,
            "cases": self.cases,
            "summary": self.summary(),
            "paired": self.paired(),
        })

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def table_text(self):
        cols = ("case_id", "mode", "outcome", "max_trajectory_deviation", "lateral_speed_std",
                "yaw_std", "accel_std", "violations")
        heads = ("case", "mode", "outcome", "max_dev", "vy_std", "yaw_std", "acc_std", "viol")
        body = []
        for r in self.rows():
            body.append([str(r[c]) if not isinstance(r[c], float) else f"{r[c]:.3f}" for c in cols])
        for c in self.cases:
            if c["status"] != "ok":
                body.append([c["case_id"], "-", "FAILED", "-", "-", "-", "-", "-"])
        widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(heads)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(heads, widths))]
        lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
        return "\n".join(lines) + "\n"


def run_comparison(scenarios, config: MpcConfig = MpcConfig(), weights: Optional[CausalWeights] = None,
                   weight_model: Optional[WeightModel] = None, workers: int = 1,
                   keep_trajectories=False):
    """Paired runs; returns ``(report, trajectories)``.

    ``trajectories`` maps case id to ``{mode: PlannedTrajectory}`` when
    ``keep_trajectories`` is set. The report is sorted by case id, so the
    worker count never changes its contents.
    """
    tasks = [(s, config, weights, weight_model, keep_trajectories) for s in scenarios]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_case_args, tasks))
    else:
        results = [_run_case_args(t) for t in tasks]
    order = sorted(range(len(results)), key=lambda i: (str(results[i][0]["case_id"]), i))
    cases = [results[i][0] for i in order]
    trajectories = {results[i][0]["case_id"]: results[i][1] for i in order if results[i][1]}
    return ComparisonReport(cases, config.to_dict()), trajectories
