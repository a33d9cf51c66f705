from .config import ExperimentConfig, build_config, desk_config, load_config_file
from .experiment import (
    Report, RoundRecord, RunResult, comm_overhead, fn_rate, fp_rate, rates_at_quorum,
    run_experiment, sweep,
)
from .report import emit_report, load_rounds, load_summary

__all__ = [
    "ExperimentConfig", "Report", "RoundRecord", "RunResult", "build_config", "comm_overhead",
    "desk_config", "emit_report", "fn_rate", "fp_rate", "load_config_file", "load_rounds",
    "load_summary", "rates_at_quorum", "run_experiment", "sweep",
]
