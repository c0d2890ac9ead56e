"""End-to-end run: synthetic fixture -> cases -> risk -> effects -> weights -> comparison."""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import pandas as pd

from ..causal import (EffectDataset, estimate_ate, estimate_cate, placebo_test,
                      train_weight_predictor)
from ..errors import CautrajError
from ..factors import STAGE1_FACTORS, TREATMENT_CONDITIONERS
from ..interaction_risk import FieldParams, stage3_risk
from ..planner.mpc import MpcConfig
from ..trajectory_data import (cases_to_frame, dump_trajectories, extract_cases, load_trajectories,
                               save_cases)
from .compare import _clean, run_comparison
from .synthetic import LANES, generate_fixture, lanes_config_text, scenario_suite


def annotate_risk(cases, table, params: FieldParams = FieldParams()):
    """Fill ``case.risk``; cases whose stage-3 window is unusable keep ``None``."""
    for case in cases:
        try:
            case.risk = stage3_risk(case, table, params)
        except CautrajError:
            case.risk = None
    return cases


def analyze_effects(frame: pd.DataFrame, treatments=None, seed=0, n_placebo=0):
    """ATE and CATE per treatment with its default conditioner.

    Returns ``(summary, cate_columns)``: a JSON-ready dict keyed by treatment
    and per-row CATE arrays aligned with ``frame`` (NaN where a row was not
    used). Failures are recorded per treatment.
    """
    treatments = list(treatments or TREATMENT_CONDITIONERS)
    summary, cate_cols = {}, {}
    for treatment in treatments:
        cond = TREATMENT_CONDITIONERS.get(treatment)
        entry = {"conditioner": cond}
        try:
            data = EffectDataset.from_frame(frame, treatment, cond)
            entry["n"] = data.n
            entry["ate"] = estimate_ate(data).to_dict()
            cate = estimate_cate(data, seed=seed)
            entry["cate"] = {k: v for k, v in cate.to_dict().items() if k not in ("effects", "index")}
            col = np.full(len(frame), np.nan)
            col[frame.index.get_indexer(cate.index)] = cate.effects
            cate_cols[treatment] = col
            if n_placebo:
                entry["placebo"] = placebo_test(data, "ate", n_placebo, seed).to_dict()
        except CautrajError as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        summary[treatment] = entry
    return summary, cate_cols


def run_pipeline(out_dir, seed=0, n_episodes=150, n_scenarios=10, n_placebo=20, workers=1,
                 config: MpcConfig = MpcConfig()):
    """Write every intermediate artefact to ``out_dir`` and return the report dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = generate_fixture(n_episodes, seed)
    traj_path = out / "trajectories.csv"
    with open(traj_path, "w", newline="") as fh:
        dump_trajectories(table, fh)
    (out / "lanes.cfg").write_text(lanes_config_text(LANES))

    table = load_trajectories(os.fspath(traj_path))
    cases, skipped = extract_cases(table, LANES)
    annotate_risk(cases, table)
    save_cases(cases, out / "cases.json")

    frame = cases_to_frame(cases)
    effects, cate_cols = analyze_effects(frame, seed=seed, n_placebo=n_placebo)
    with open(out / "effects.json", "w") as fh:
        json.dump(_clean(effects), fh, indent=1, sort_keys=True)
        fh.write("\n")

    model = train_weight_predictor(frame[list(STAGE1_FACTORS)], cate_cols, seed=seed)
    model.save(out / "weights.json")

    scenarios = scenario_suite(n_scenarios, seed + 1000, LANES)
    report, _ = run_comparison(scenarios, config, weight_model=model, workers=workers)
    result = report.to_dict()
    result["pipeline"] = _clean({
        "seed": seed, "n_episodes": n_episodes, "n_cases": len(cases), "n_skipped": len(skipped),
        "effects": effects,
        "weight_test_rmse": {f"{k}:{sv}": v for (k, sv), v in model.test_rmse.items()},
    })
    text = json.dumps(result, indent=1, sort_keys=True) + "\n"
    (out / "report.json").write_text(text)
    return result
