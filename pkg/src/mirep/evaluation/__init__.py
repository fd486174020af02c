"""Split planning, training runs, baselines, and result aggregation."""

from .csp import csp_filters, csp_lda_baseline
from .protocol import (ProtocolPlan, SplitRun, plan_scenario1, plan_scenario2,
                       trial_hash)
from .results import (ResultRow, ResultTable, aggregate, read_results_csv,
                      write_results_csv, write_results_json)
from .runner import (VARIANTS, AblationVariant, build_components,
                     run_ablation, run_protocol, run_split, variant_by_name)

__all__ = [
    "AblationVariant",
    "ProtocolPlan",
    "ResultRow",
    "ResultTable",
    "SplitRun",
    "VARIANTS",
    "aggregate",
    "build_components",
    "csp_filters",
    "csp_lda_baseline",
    "plan_scenario1",
    "plan_scenario2",
    "read_results_csv",
    "run_ablation",
    "run_protocol",
    "run_split",
    "trial_hash",
    "variant_by_name",
    "write_results_csv",
    "write_results_json",
]
