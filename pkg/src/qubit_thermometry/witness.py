"""Re-coherence witness of non-Markovianity and steady-state coherence.

The l1-coherence of a qubit in Bloch form is C(t) = sqrt(Dx^2 + Dy^2).
Information backflow shows up as intervals with dC/dt > 0; accumulating the
positive increments,

    N_C = integral over {dC/dt > 0} of (dC/dt) dt,

gives the witness value.  On a discrete trajectory this becomes the sum of
positive forward differences above a jitter threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .errors import DomainError

__all__ = ["WitnessReport", "coherence", "non_markovianity", "steady_coherence"]


@dataclass
class WitnessReport:
    """Witness quantities of one trajectory at a fixed coupling mix."""

    coherence: np.ndarray
    n_markov: float
    steady_dx_abs: float
    steady_converged: bool

    def csv_row(self, alpha: float) -> str:
        return (f"{alpha:.17g},{self.n_markov:.17g},{self.steady_dx_abs:.17g},"
                f"{int(self.steady_converged)}")


def coherence(traj: Trajectory) -> np.ndarray:
    """C(t) = sqrt(Dx^2 + Dy^2) per sample."""
    return np.hypot(traj.dx, traj.dy)


def non_markovianity(C: np.ndarray, rise_tol: float = 1e-10) -> float:
    """Sum of coherence rises: sum_i max(C_{i+1} - C_i, 0) above rise_tol.

    Converges to the re-coherence integral as the grid is refined; the
    threshold suppresses floating-point jitter on flat stretches.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 1 or len(C) < 2:
        raise DomainError("need a series of at least 2 coherence samples")
    d = np.diff(C)
    return float(d[d > rise_tol].sum())


def steady_coherence(traj: Trajectory, window_frac: float = 0.2,
                     conv_tol: float = 1e-4) -> tuple:
    """Estimate |Dx(t -> infinity)| from the trailing window of a trajectory.

    For a splitting eps > 0 the tail of Dx oscillates at the precession
    frequency even when the envelope has settled, so |Dx| is averaged over
    whole precession periods (2 pi / eps) inside the window; the estimate is
    the mean of the period averages and the convergence flag records whether
    their spread stays below ``conv_tol``.  The window must hold at least 10
    periods.  Returns (|Dx(inf)| estimate, converged flag).
    """
    if not (0.0 < window_frac <= 1.0):
        raise DomainError(f"window_frac must lie in (0, 1], got {window_frac}")
    n = len(traj.grid)
    dt = float(traj.grid[1] - traj.grid[0])
    win = int(math.floor(window_frac * (n - 1)))
    if win < 2:
        raise DomainError("trailing window holds fewer than 2 samples")
    eps = traj.config.epsilon if traj.config is not None else 0.0
    if eps > 0.0:
        period = 2.0 * math.pi / eps
        m = max(1, int(round(period / dt)))
    else:
        m = max(1, win // 10)
    blocks = win // m
    if blocks < 10:
        raise DomainError(
            f"trailing window holds {blocks} precession periods; need >= 10 "
            f"(increase t_end or window_frac)")
    tail = np.abs(traj.dx[n - blocks * m:])
    means = tail.reshape(blocks, m).mean(axis=1)
    spread = float(means.max() - means.min())
    return float(means.mean()), spread < conv_tol
