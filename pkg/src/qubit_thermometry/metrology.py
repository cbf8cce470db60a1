"""Temperature sensitivity of the probe: quantum and classical Fisher information.

The temperature enters the dynamics only through the coth(w/2T) occupation
factors, so the Bloch vector's T-derivative is obtained by re-simulating at
T +- delta and T +- 2 delta (delta = delta_rel * T) on the frozen base mesh
and applying the five-point stencil

    df/dT = [-f(T+2d) + 8 f(T+d) - 8 f(T-d) + f(T-2d)] / (12 d),

exact through quartic order.  For a qubit with Bloch vector D the quantum
Fisher information is

    F_Q = (dD/dT)^T . M^{-1} . (dD/dT),   M^{-1} = I_3 + D D^T / (1 - |D|^2),

with the pure-state limit F_Q = |dD/dT|^2 on the unit sphere.  Measuring
sigma_x (coherences) or sigma_z (populations) delivers the classical Fisher
information F_C = (d<O>/dT)^2 / (1 - <O>^2), never exceeding F_Q.  The
closed-form Born-Markov benchmark F_BM = eps^2 e^{-eps/T} / (2 T^4)
(equivalently dT^2 >= 2 T^4 e^{eps/T} / (M eps^2)) serves as the comparator
that collapses exponentially at low temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ProbeConfig, Trajectory, integrate
from .errors import DomainError, NumericError
from .kernels import KernelSet, QuadratureConfig, precompute, rebuild_for_temperature

__all__ = [
    "StencilConfig",
    "StencilKernels",
    "MetrologyResult",
    "five_point_derivative",
    "stencil_kernel_sets",
    "bloch_T_derivative",
    "d_bloch_dT",
    "qfi",
    "cfi",
    "qcrb",
    "markov_comparator",
    "metrology_scan",
    "loglog_slope",
]

_PURE_NORM2 = 1.0 - 1e-12
_CFI_SLACK = 1e-8


@dataclass(frozen=True)
class StencilConfig:
    """Relative step of the temperature stencil, delta = delta_rel * T.

    The default follows the finite-difference prescription with
    delta = 1e-7 * T; very small steps lose significance in the shifted
    simulations, which the cross-check against a coarser Richardson
    derivative guards in the tests.
    """

    delta_rel: float = 1e-7

    def __post_init__(self):
        if not (1e-12 < self.delta_rel < 1e-3):
            raise DomainError(f"delta_rel must lie in (1e-12, 1e-3), got {self.delta_rel}")


@dataclass(frozen=True)
class StencilKernels:
    """Kernel sets for one stencil: base plus (T-2d, T-d, T+d, T+2d)."""

    base: KernelSet
    shifted: tuple
    temps: tuple


@dataclass
class MetrologyResult:
    """Fisher quantities of one (probing time, temperature, mixing) point."""

    t: float
    T: float
    alpha: float
    qfi: float
    cfi_x: float
    cfi_z: float
    qcrb: float
    markov_fisher: float

    def __post_init__(self):
        if self.qfi < 0.0 or self.cfi_x < 0.0 or self.cfi_z < 0.0:
            raise NumericError("Fisher information must be nonnegative")
        slack = _CFI_SLACK * self.qfi + 1e-300
        if self.cfi_x > self.qfi + slack or self.cfi_z > self.qfi + slack:
            raise NumericError(
                f"classical Fisher information exceeds the quantum bound: "
                f"qfi={self.qfi}, cfi_x={self.cfi_x}, cfi_z={self.cfi_z}")
        want = qcrb(self.qfi, 1)
        if not (self.qcrb == want or abs(self.qcrb - want) <= 1e-12 * want):
            raise NumericError("qcrb must equal 1/sqrt(qfi)")

    def csv_row(self) -> str:
        return ",".join(f"{v:.17g}" for v in (
            self.t, self.T, self.alpha, self.qfi, self.cfi_x, self.cfi_z,
            self.qcrb, self.markov_fisher))


def five_point_derivative(f, x: float, delta: float) -> float:
    """Five-point central stencil (-f(x+2d) + 8f(x+d) - 8f(x-d) + f(x-2d)) / (12d).

    Grouped as differences of symmetric pairs, which is algebraically the
    same but avoids amplifying rounding when the four values nearly coincide.
    """
    if not (delta > 0.0):
        raise DomainError(f"stencil step must be > 0, got {delta}")
    inner = f(x + delta) - f(x - delta)
    outer = f(x + 2.0 * delta) - f(x - 2.0 * delta)
    return (8.0 * inner - outer) / (12.0 * delta)


def stencil_kernel_sets(cfg: ProbeConfig, stencil: StencilConfig = StencilConfig(),
                        quad: QuadratureConfig = QuadratureConfig(),
                        workers: int = None, base: KernelSet = None) -> StencilKernels:
    """Base kernel set plus the four temperature-shifted rebuilds.

    Only the coth-bearing kernels are recomputed for the shifts, on the base
    set's frozen mesh.
    """
    T = cfg.T
    delta = stencil.delta_rel * T
    if not (T > 0.0) or T - 2.0 * delta <= 0.0:
        raise DomainError(f"stencil needs T - 2*delta > 0, got T={T}")
    if base is None:
        base = precompute(cfg.kernel_params, cfg.t_end, cfg.dt, quad, workers=workers)
    temps = (T - 2.0 * delta, T - delta, T + delta, T + 2.0 * delta)
    shifted = tuple(rebuild_for_temperature(base, Ts) for Ts in temps)
    return StencilKernels(base=base, shifted=shifted, temps=temps)


def bloch_T_derivative(cfg: ProbeConfig, sk: StencilKernels) -> np.ndarray:
    """dD/dT on the whole grid from the four temperature-shifted trajectories."""
    trajs = []
    for Ts, ks in zip(sk.temps, sk.shifted):
        cfg_s = ProbeConfig(epsilon=cfg.epsilon, alpha=cfg.alpha, T=Ts, sd=cfg.sd,
                            initial=cfg.initial, t_end=cfg.t_end, dt=cfg.dt)
        trajs.append(integrate(cfg_s, ks).states)
    m2, m1, p1, p2 = trajs
    delta = sk.temps[2] - cfg.T
    return (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * delta)


def d_bloch_dT(cfg: ProbeConfig, t_eval: float,
               stencil: StencilConfig = StencilConfig(),
               quad: QuadratureConfig = QuadratureConfig(),
               workers: int = None, base: KernelSet = None) -> np.ndarray:
    """Temperature derivative of the Bloch vector at one grid time.

    Runs the four shifted simulations (rebuilding only the T-dependent
    kernels R, K, X) and applies the five-point stencil componentwise.
    """
    sk = stencil_kernel_sets(cfg, stencil, quad, workers=workers, base=base)
    deriv = bloch_T_derivative(cfg, sk)
    ref = Trajectory(grid=sk.base.grid, states=deriv, config=cfg)
    return deriv[ref.index_of(t_eval)]


def qfi(delta, ddelta) -> float:
    """Quantum Fisher information from the Bloch vector and its T-derivative.

    Uses F_Q = |d|^2 + (D.d)^2 / (1 - |D|^2); on the pure-state shell the
    derivative must stay tangent (|D.d| <= 1e-8 |d|) and the limit |d|^2
    applies.
    """
    D = np.asarray(delta, dtype=float)
    d = np.asarray(ddelta, dtype=float)
    if D.shape != (3,) or d.shape != (3,):
        raise DomainError("qfi expects 3-component Bloch vectors")
    n2 = float(D @ D)
    if n2 > 1.0 + 1e-8:
        raise DomainError(f"Bloch vector leaves the unit ball: |D|^2 = {n2}")
    d2 = float(d @ d)
    Dd = float(D @ d)
    if n2 > _PURE_NORM2:
        if abs(Dd) > 1e-8 * math.sqrt(d2):
            raise NumericError(
                "temperature derivative is not tangent to the pure-state shell "
                f"(|D.d| = {abs(Dd):.3g}, |d| = {math.sqrt(d2):.3g})")
        return d2
    return d2 + Dd * Dd / (1.0 - n2)


def cfi(observable: str, delta, ddelta) -> float:
    """Classical Fisher information of a sigma_x or sigma_z measurement."""
    axes = {"x": 0, "z": 2}
    if observable not in axes:
        raise DomainError(f"observable must be 'x' or 'z', got {observable!r}")
    i = axes[observable]
    D = float(np.asarray(delta, dtype=float)[i])
    d = float(np.asarray(ddelta, dtype=float)[i])
    if abs(D) >= 1.0:
        if d == 0.0:
            return 0.0
        raise NumericError(
            f"measurement Fisher information diverges at |D_{observable}| = {abs(D)}")
    return d * d / (1.0 - D * D)


def qcrb(fisher: float, shots: int = 1) -> float:
    """Cramer-Rao bound on the temperature deviation, 1/sqrt(M F)."""
    if fisher < 0.0:
        raise DomainError(f"Fisher information must be >= 0, got {fisher}")
    if shots < 1:
        raise DomainError(f"shot count must be >= 1, got {shots}")
    if fisher == 0.0:
        return math.inf
    return 1.0 / math.sqrt(shots * fisher)


def markov_comparator(epsilon: float, T: float, shots: int = 1) -> tuple:
    """Born-Markov steady-state benchmark: (Fisher value, minimal dT^2).

    F_BM = eps^2 e^{-eps/T} / (2 T^4) and dT^2_min = 2 T^4 e^{eps/T} /
    (M eps^2); undefined for a gapless probe.
    """
    if epsilon <= 0.0:
        raise DomainError("the Markovian benchmark is undefined at epsilon = 0")
    if T <= 0.0:
        raise DomainError(f"temperature must be > 0, got {T}")
    if shots < 1:
        raise DomainError(f"shot count must be >= 1, got {shots}")
    fisher = epsilon**2 * math.exp(-epsilon / T) / (2.0 * T**4)
    bound = 2.0 * T**4 * math.exp(epsilon / T) / (shots * epsilon**2)
    return fisher, bound


def metrology_scan(cfg: ProbeConfig, times,
                   stencil: StencilConfig = StencilConfig(),
                   quad: QuadratureConfig = QuadratureConfig(),
                   sk: StencilKernels = None, workers: int = None) -> list:
    """MetrologyResult at each probing time for one (alpha, T) scenario.

    ``sk`` may carry shared kernel sets (they do not depend on alpha, so
    sweeps over the mixing parameter reuse one stencil bundle).
    """
    if sk is None:
        sk = stencil_kernel_sets(cfg, stencil, quad, workers=workers)
    base_traj = integrate(cfg, sk.base)
    deriv = bloch_T_derivative(cfg, sk)
    try:
        mk_fisher, _ = markov_comparator(cfg.epsilon, cfg.T)
    except DomainError:
        mk_fisher = math.nan
    out = []
    for t in times:
        i = base_traj.index_of(t)
        D = base_traj.states[i]
        d = deriv[i]
        f_q = qfi(D, d)
        out.append(MetrologyResult(
            t=float(t), T=cfg.T, alpha=cfg.alpha, qfi=f_q,
            cfi_x=cfi("x", D, d), cfi_z=cfi("z", D, d),
            qcrb=qcrb(f_q, 1), markov_fisher=mk_fisher))
    return out


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0.0) or np.any(y <= 0.0):
        raise DomainError("log-log fit needs at least two positive points")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
