"""Command-line entry point: ``cautraj <command> [options]``.

Exit codes: 0 success, 1 partial or runtime failure, 2 configuration or
input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from .causal import (CausalWeights, EffectDataset, WeightModel, estimate_ate, estimate_cate,
                     placebo_test, train_weight_predictor)
from .config import read_kv
from .errors import CautrajError, ConfigError, IoFailure, MissingColumn, NoProgress
from .factors import STAGE1_FACTORS, TREATMENT_CONDITIONERS
from .interaction_risk import FieldParams
from .trajectory_data import (LaneGeometry, cases_to_frame, extract_cases, load_cases,
                              load_trajectories, read_schema, save_cases)

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("cautraj")


def _write_json(path, obj):
    from .harness.compare import _clean

    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_clean(obj), indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _load_table(args):
    schema = read_schema(args.schema) if getattr(args, "schema", None) else None
    return load_trajectories(str(args.trajectories if hasattr(args, "trajectories") else args.input),
                             schema)


def load_weights(path):
    """A trained :class:`WeightModel` or fixed :class:`CausalWeights`, told apart by ``kind``."""
    d = _read_json(path)
    try:
        if isinstance(d, dict) and d.get("kind") == "weight_model":
            return None, WeightModel.from_dict(d)
        return CausalWeights.from_dict(d), None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a weights file ({exc})") from None


def _effects_frame(path):
    frame = pd.read_csv(path)
    if "Y" not in frame.columns:
        raise MissingColumn("Y")
    return frame


# ----------------------------------------------------------------- commands

def cmd_ingest(args):
    table = load_trajectories(str(args.input), read_schema(args.schema) if args.schema else None)
    lanes = LaneGeometry.load(args.lanes)
    cases, skipped = extract_cases(table, lanes)
    save_cases(cases, args.out)
    for vid, reason in skipped:
        log.warning("vehicle %s skipped: %s", vid, reason)
    print(f"{len(cases)} cases written to {args.out} ({len(skipped)} skipped)")
    return EXIT_OK


def cmd_risk(args):
    from .harness.pipeline import annotate_risk

    cases = load_cases(args.cases)
    table = _load_table(args)
    params = FieldParams.from_config(read_kv(args.field)) if args.field else FieldParams()
    annotate_risk(cases, table, params)
    save_cases(cases, args.out)
    if args.effects:
        cases_to_frame(cases).to_csv(args.effects, index=False, lineterminator="\n")
    n_missing = sum(c.risk is None for c in cases)
    print(f"risk computed for {len(cases) - n_missing}/{len(cases)} cases")
    return EXIT_OK


def cmd_ate(args):
    data = EffectDataset.from_frame(_effects_frame(args.data), args.treatment)
    result = estimate_ate(data).to_dict()
    _write_json(args.out, result)
    print(f"ATE[{args.treatment}] = {result['ate']:.6g} (n = {data.n})")
    return EXIT_OK


def cmd_cate(args):
    cond = args.conditioner or TREATMENT_CONDITIONERS.get(args.treatment)
    if cond is None:
        raise ConfigError(f"no default conditioner for {args.treatment}; pass --conditioner")
    data = EffectDataset.from_frame(_effects_frame(args.data), args.treatment, cond)
    result = estimate_cate(data, seed=args.seed)
    _write_json(args.out, result.to_dict())
    print(f"CATE[{args.treatment} | {cond}] mean = {result.mean:.6g} (n = {data.n})")
    return EXIT_OK


def cmd_placebo(args):
    data = EffectDataset.from_frame(_effects_frame(args.data), args.treatment,
                                    TREATMENT_CONDITIONERS.get(args.treatment)
                                    if args.estimator == "cate" else None)
    report = placebo_test(data, args.estimator, args.reps, args.seed)
    _write_json(args.out, report.to_dict())
    verdict = "passed" if report.passed else "failed"
    print(f"placebo {verdict}: original {report.original:.4g}, "
          f"band [{report.lower:.4g}, {report.upper:.4g}]")
    return EXIT_OK


def cmd_weights(args):
    from .harness.pipeline import analyze_effects

    frame = _effects_frame(args.data)
    _, cate_cols = analyze_effects(frame, seed=args.seed)
    model = train_weight_predictor(frame[list(STAGE1_FACTORS)], cate_cols, seed=args.seed)
    model.save(args.out)
    print(f"weight model written to {args.out}")
    return EXIT_OK


def _mpc_config(path):
    from .planner.mpc import MpcConfig

    return MpcConfig.load(path) if path else MpcConfig()


def cmd_plan(args):
    from .planner.mpc import plan_trajectory
    from .planner.scenario import Scenario

    scenario = Scenario.load(args.scenario)
    config = _mpc_config(args.config)
    weights, model = load_weights(args.weights) if args.weights else (None, None)
    try:
        plan = plan_trajectory(scenario, config, args.mode, weights=weights, weight_model=model,
                               keep_linearizations=bool(args.dump_linearization))
        code = EXIT_OK
    except NoProgress as exc:
        log.error("%s", exc)
        plan, code = exc.trajectory, EXIT_PARTIAL
    plan.save_csv(args.out)
    if args.dump_linearization:
        _write_json(args.dump_linearization, [lin.to_dict() for lin in plan.linearizations])
    print(f"{args.mode}: {plan.outcome} after {plan.n - 1} steps, "
          f"{plan.bound_violations(config)} bound violations")
    return code


def _failed_entry(case_id, exc):
    return {"case_id": case_id, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def cmd_compare(args):
    from .harness.compare import ComparisonReport, run_comparison
    from .harness.plots import emit_plots
    from .harness.synthetic import LANES, scenario_from_case, scenario_suite

    config = _mpc_config(args.mpc)
    weights, model = load_weights(args.weights) if args.weights else (None, None)
    failed = []
    if args.cases:
        if not (args.trajectories and args.lanes):
            raise ConfigError("--cases needs --trajectories and --lanes")
        lanes = LaneGeometry.load(args.lanes)
        table = _load_table(args)
        scenarios = []
        for case in load_cases(args.cases):
            try:
                scenarios.append(scenario_from_case(case, table, lanes))
            except Exception as exc:  # reported as a failed case
                failed.append(_failed_entry(case.case_id, exc))
    else:
        scenarios = scenario_suite(args.scenarios, args.seed, LANES)
    if weights is None and model is None:
        raise ConfigError("compare needs --weights")
    report, trajectories = run_comparison(scenarios, config, weights, model, args.workers,
                                          keep_trajectories=bool(args.plots))
    if failed:
        cases = report.cases + failed
        cases.sort(key=lambda c: str(c["case_id"]))
        report = ComparisonReport(cases, report.config)
    try:
        Path(args.out).write_text(report.to_json())
    except OSError as exc:
        raise IoFailure(f"cannot write {args.out}: {exc}") from exc
    if args.plots:
        refs = {s.name: s.reference for s in scenarios if s.reference is not None}
        emit_plots(report, trajectories, args.plots, refs)
    sys.stdout.write(report.table_text())
    return EXIT_PARTIAL if report.n_failed else EXIT_OK


def cmd_plot(args):
    from .harness.plots import trajectory_svgs
    from .planner.mpc import PlannedTrajectory

    plan = PlannedTrajectory.load_csv(args.planned)
    svgs = trajectory_svgs(Path(args.planned).stem, {plan.mode or "planned": plan})
    out = Path(args.out)
    key = next(k for k in svgs if k.endswith(f"_{args.kind}.svg"))
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(svgs[key])
    except OSError as exc:
        raise IoFailure(f"cannot write {out}: {exc}") from exc
    return EXIT_OK


def cmd_pipeline(args):
    from .harness.pipeline import run_pipeline

    result = run_pipeline(args.out, seed=args.seed, n_episodes=args.episodes,
                          n_scenarios=args.scenarios, n_placebo=args.placebo_reps,
                          workers=args.workers)
    print(f"report written to {Path(args.out) / 'report.json'}")
    return EXIT_PARTIAL if result["n_failed"] else EXIT_OK


# ------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="cautraj", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="extract staged lane-change cases from a trajectory CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--lanes", required=True, help="lane geometry key=value file")
    s.add_argument("--schema", help="column remapping key=value file")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("risk", help="attach stage-3 interaction risk to each case")
    s.add_argument("--cases", required=True)
    s.add_argument("--trajectories", required=True)
    s.add_argument("--schema")
    s.add_argument("--field", help="field parameter key=value file")
    s.add_argument("--out", required=True)
    s.add_argument("--effects", help="also write the per-case effects CSV here")
    s.set_defaults(func=cmd_risk)

    s = sub.add_parser("ate", help="average treatment effect via the generalised propensity score")
    s.add_argument("--data", required=True)
    s.add_argument("--treatment", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ate)

    s = sub.add_parser("cate", help="conditional treatment effects via cross-fitted double ML")
    s.add_argument("--data", required=True)
    s.add_argument("--treatment", required=True)
    s.add_argument("--conditioner")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cate)

    s = sub.add_parser("placebo", help="permuted-treatment refutation test")
    s.add_argument("--data", required=True)
    s.add_argument("--treatment", required=True)
    s.add_argument("--reps", type=int, default=50)
    s.add_argument("--estimator", choices=("ate", "cate"), default="ate")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_placebo)

    s = sub.add_parser("weights", help="train the stage-1 to MPC-weight predictor")
    s.add_argument("--data", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_weights)

    s = sub.add_parser("plan", help="plan one scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--config", help="MPC key=value file")
    s.add_argument("--mode", choices=("baseline", "causal"), default="baseline")
    s.add_argument("--weights")
    s.add_argument("--out", required=True)
    s.add_argument("--dump-linearization", metavar="JSON")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("compare", help="paired baseline/causal runs with metrics")
    s.add_argument("--cases")
    s.add_argument("--trajectories")
    s.add_argument("--schema")
    s.add_argument("--lanes")
    s.add_argument("--scenarios", type=int, default=10, help="synthetic suite size without --cases")
    s.add_argument("--seed", type=int, default=1000)
    s.add_argument("--mpc")
    s.add_argument("--weights")
    s.add_argument("--out", required=True)
    s.add_argument("--plots")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("plot", help="SVG of a planned trajectory CSV")
    s.add_argument("--planned", required=True)
    s.add_argument("--kind", choices=("trajectory", "lateral_speed", "yaw", "acceleration"),
                   default="trajectory")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("pipeline", help="synthetic end-to-end run")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--episodes", type=int, default=150)
    s.add_argument("--scenarios", type=int, default=10)
    s.add_argument("--placebo-reps", type=int, default=20)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, MissingColumn, FileNotFoundError, IsADirectoryError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (CautrajError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
