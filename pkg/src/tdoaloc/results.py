"""Common result record shared by all localization solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LocalizationResult:
    """Uniform output of every solver.

    Attributes
    ----------
    delays : ndarray or None
        Estimated delay vector (M-1 relative delays in seconds), when the
        method produces one. Multilateration solvers that fit a position
        directly still report the pairwise delays they consumed.
    position : ndarray or None
        Estimated source position in meters. ``None`` when the method
        could not produce a consistent position.
    criterion : float
        Value of the method's objective at the returned estimate.
    feasible : bool
        Whether the estimate passed the geometric consistency checks
        (or, for direct position fits, whether the fit converged).
    method : str
        Registry name of the method that produced the result.
    wall_time : float
        Wall-clock seconds spent by the solver.
    """

    delays: np.ndarray | None = None
    position: np.ndarray | None = None
    criterion: float = np.nan
    feasible: bool = False
    method: str = ""
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)
