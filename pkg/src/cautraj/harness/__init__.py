"""Paired baseline/causal comparison, metrics, plots and the synthetic world."""
from .compare import ComparisonReport, run_case, run_comparison
from .metrics import METRIC_NAMES, ComparisonMetrics, compute_metrics, five_number_summary
from .plots import boxplot_svg, emit_plots, line_plot_svg, trajectory_svgs
from .synthetic import (LANES, generate_fixture, scenario_from_case, scenario_suite,
                        standard_scenario, straight_scenario)

__all__ = [
    "LANES", "METRIC_NAMES", "ComparisonMetrics", "ComparisonReport", "boxplot_svg",
    "compute_metrics", "emit_plots", "five_number_summary", "generate_fixture", "line_plot_svg",
    "run_case", "run_comparison", "scenario_from_case", "scenario_suite", "standard_scenario",
    "straight_scenario", "trajectory_svgs",
]
