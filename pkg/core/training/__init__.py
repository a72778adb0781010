"""Optimization: initialization, Adam, density control, the training loop and studies."""

from core.training.optimizer import OptimizerState, adam_step, learning_rates, position_lr
from core.training.density import DensifyReport, DensifyStats, densify_and_prune
from core.training.init import initialize_cloud, nearest_neighbour_scale
from core.training.trainer import IterationRecord, RunReport, read_run_report, train, write_run_report
from core.training.comparison import (
    ComparisonRow,
    EvalResult,
    evaluate_cloud,
    format_table,
    run_comparison,
)

__all__ = [
    'OptimizerState',
    'adam_step',
    'learning_rates',
    'position_lr',
    'DensifyReport',
    'DensifyStats',
    'densify_and_prune',
    'initialize_cloud',
    'nearest_neighbour_scale',
    'IterationRecord',
    'RunReport',
    'read_run_report',
    'train',
    'write_run_report',
    'ComparisonRow',
    'EvalResult',
    'evaluate_cloud',
    'format_table',
    'run_comparison',
]
