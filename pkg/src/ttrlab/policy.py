"""Numeric tolerance policy shared across the package."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances threaded through every constructor and check.

    rank_tol       : relative eigenvalue threshold below which a spectral
                     weight counts as zero (relative to the largest eigenvalue)
    cptp_tol       : allowed defect for trace preservation / positivity checks
    equality_tol   : allowed defect when two maps or matrices are compared
    degeneracy_gap : neighbouring eigenvalues closer than this are treated as
                     one degenerate cluster
    """

    rank_tol: float = 1e-10
    cptp_tol: float = 1e-9
    equality_tol: float = 1e-9
    degeneracy_gap: float = 1e-9

    def __post_init__(self) -> None:
        for field in ("rank_tol", "cptp_tol", "equality_tol", "degeneracy_gap"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be positive")


DEFAULT_POLICY = NumericPolicy()
