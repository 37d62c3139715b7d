"""Solve diagnostics container shared by the solvers and the oracles."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class SolveReport:
    """Residual norms and truncation diagnostics for one solve.

    All entries are finite and nonnegative; fields that do not apply to a
    given solver are zero.
    """

    pde_residual_linf: float = 0.0
    boundary_residual_linf: float = 0.0
    interface_value_gap: float = 0.0
    interface_flux_gap: float = 0.0
    series_terms_used: int = 0
    truncation_proxy: float = 0.0
    quadrature_error: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"report field {name}={value} must be "
                                 "finite and nonnegative")

    def as_dict(self) -> dict:
        return asdict(self)
