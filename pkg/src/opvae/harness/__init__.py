"""Experiment orchestration: configs, runs, aggregation, ablations and the CLI."""
from .ablation import AXES, ablation_matrix
from .summary import INSUFFICIENT, aggregate, final_points, mean_ci, write_summary, write_tidy
from .config import METHODS, ExperimentConfig, UsageError, builtin_config, load_defaults, parse_seeds
from .runner import RunRecord, load_records, load_trained, oracle_optimum, run, run_dir_for, run_seed
