"""Optimal multi-mode switching under Levy noise: solver and oracle bindings."""

from ._core import (
    Config,
    Grid,
    SolveDiagnostics,
    ValueFields,
    basis_table,
    char_exponent,
    evaluate,
    mean_l1,
    oracle_values,
    residual,
    run_subcommand,
    solve,
)

__all__ = [
    "Config",
    "Grid",
    "SolveDiagnostics",
    "ValueFields",
    "basis_table",
    "char_exponent",
    "evaluate",
    "mean_l1",
    "oracle_values",
    "residual",
    "run_subcommand",
    "solve",
]
