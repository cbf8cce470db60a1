"""Generalized Bloch equations of the probe and their fixed-step integrator.

The probe couples to the bath through sigma_alpha = (1-alpha) sigma_z +
alpha sigma_x.  With D = (Dx, Dy, Dz) the Bloch vector and R, K, L, X, F, G
the bath kernels, the equations of motion are

    dDx/dt = -e Dy - 4 a(a-1) G - 4 a(a-1) Dz K - 4 (a-1)^2 Dx R
    dDy/dt = Dx (e + 4 a^2 X) + 4 (a-1) a (F - L)
             - 4 Dy (a^2 K + (a-1)^2 R) - 4 (a-1) a Dz X
    dDz/dt = -4 a^2 G - 4 a^2 Dz K - 4 (a-1) a Dx R

The a(1-a) cross terms couple populations and coherences; they vanish
identically at a = 0 (pure dephasing, Dz conserved) and a = 1 (pure
dissipation).  Time stepping is classical RK4 with the stage times pinned to
the kernel grid and its midpoints, so no kernel interpolation enters the
error budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, IntegrationError, NumericError
from .kernels import KernelParams, KernelSet, QuadratureConfig, _engine, precompute
from .spectral import SpectralDensity

__all__ = [
    "BlochState",
    "ProbeConfig",
    "Trajectory",
    "rhs",
    "integrate",
    "dephasing_oracle",
    "kernels_for",
    "PHYSICALITY_SLACK",
]

PHYSICALITY_SLACK = 1e-8


@dataclass(frozen=True)
class BlochState:
    """Real Bloch vector (Dx, Dy, Dz); |D| <= 1 for a physical qubit state."""

    dx: float
    dy: float
    dz: float

    def norm(self) -> float:
        return math.sqrt(self.dx**2 + self.dy**2 + self.dz**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz])


@dataclass(frozen=True)
class ProbeConfig:
    """Physical scenario plus integration controls.

    ``initial`` defaults to the |+> state (1, 0, 0), a pure state on the
    equator of the Bloch sphere.
    """

    epsilon: float
    alpha: float
    T: float
    sd: SpectralDensity
    initial: tuple = (1.0, 0.0, 0.0)
    t_end: float = 50.0
    dt: float = 1e-2

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (self.epsilon >= 0.0 and self.T >= 0.0):
            raise DomainError("epsilon and T must be >= 0")
        if len(self.initial) != 3:
            raise DomainError("initial Bloch vector needs three components")
        n2 = sum(c * c for c in self.initial)
        if n2 > 1.0 + PHYSICALITY_SLACK:
            raise DomainError(f"initial Bloch vector has norm^2 = {n2} > 1")
        if not (self.dt > 0.0 and self.t_end >= self.dt):
            raise DomainError("need dt > 0 and t_end >= dt")

    @property
    def kernel_params(self) -> KernelParams:
        return KernelParams(sd=self.sd, epsilon=self.epsilon, T=self.T)


@dataclass
class Trajectory:
    """Bloch vector sampled on the integration grid; ``states[i]`` is
    (Dx, Dy, Dz) at ``grid[i]`` and ``states[0]`` equals the initial state."""

    grid: np.ndarray
    states: np.ndarray
    config: ProbeConfig = field(repr=False, default=None)

    @property
    def dx(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def dy(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def dz(self) -> np.ndarray:
        return self.states[:, 2]

    def state(self, i: int) -> BlochState:
        return BlochState(*self.states[i])

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; rejects off-grid times."""
        dt = float(self.grid[1] - self.grid[0])
        i = int(round(t / dt))
        if i < 0 or i >= len(self.grid) or abs(self.grid[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"t={t} is not on the trajectory grid")
        return i

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,dx,dy,dz\n")
            for t, (x, y, z) in zip(self.grid, self.states):
                fh.write(f"{t:.17g},{x:.17g},{y:.17g},{z:.17g}\n")


def _rhs_scalar(dx, dy, dz, R, K, L, X, F, G, eps, aa, am2, a2):
    fx = -eps * dy - aa * G - aa * dz * K - am2 * dx * R
    fy = dx * (eps + a2 * X) + aa * (F - L) - dy * (a2 * K + am2 * R) - aa * dz * X
    fz = -a2 * G - a2 * dz * K - aa * dx * R
    return fx, fy, fz


def rhs(state: BlochState, kernels_at_t, epsilon: float, alpha: float) -> BlochState:
    """Right-hand side of the Bloch equations at one time.

    ``kernels_at_t`` is the 6-tuple (R, K, L, X, F, G).  Returns the time
    derivative of the Bloch vector (not itself a state).
    """
    vals = tuple(float(v) for v in kernels_at_t)
    if len(vals) != 6:
        raise DomainError("kernels_at_t must supply the six values (R, K, L, X, F, G)")
    probe = (state.dx, state.dy, state.dz) + vals + (epsilon, alpha)
    if not all(math.isfinite(v) for v in probe):
        raise NumericError("non-finite input to the Bloch equations")
    aa = 4.0 * alpha * (alpha - 1.0)
    am2 = 4.0 * (alpha - 1.0) ** 2
    a2 = 4.0 * alpha * alpha
    return BlochState(*_rhs_scalar(state.dx, state.dy, state.dz, *vals,
                                   epsilon, aa, am2, a2))


def _check_kernelset(cfg: ProbeConfig, ks: KernelSet):
    p = ks.params
    if p.sd != cfg.sd or p.epsilon != cfg.epsilon or p.T != cfg.T:
        raise ConfigurationError(
            f"kernel set built for (sd={p.sd}, eps={p.epsilon}, T={p.T}) does not "
            f"match probe (sd={cfg.sd}, eps={cfg.epsilon}, T={cfg.T})")
    if abs(ks.dt - cfg.dt) > 1e-12 * cfg.dt or abs(ks.t_end - cfg.t_end) > 1e-9 * cfg.t_end:
        raise ConfigurationError(
            f"kernel grid (dt={ks.dt}, t_end={ks.t_end}) does not match probe "
            f"(dt={cfg.dt}, t_end={cfg.t_end})")


def integrate(cfg: ProbeConfig, ks: KernelSet) -> Trajectory:
    """Classical fixed-step RK4 over the kernel grid.

    Raises IntegrationError at the first step whose Bloch norm exceeds
    1 + PHYSICALITY_SLACK (surfacing a weak-coupling breakdown rather than
    renormalizing it away).
    """
    _check_kernelset(cfg, ks)
    grid = ks.grid
    n = len(grid) - 1
    kv = [ks.values[name].tolist() for name in ("R", "K", "L", "X", "F", "G")]
    kh = [ks.half_values[name].tolist() for name in ("R", "K", "L", "X", "F", "G")]
    Rg, Kg, Lg, Xg, Fg, Gg = kv
    Rh, Kh, Lh, Xh, Fh, Gh = kh

    alpha = cfg.alpha
    eps = cfg.epsilon
    aa = 4.0 * alpha * (alpha - 1.0)
    am2 = 4.0 * (alpha - 1.0) ** 2
    a2 = 4.0 * alpha * alpha
    dt = cfg.dt
    half = 0.5 * dt
    sixth = dt / 6.0
    limit = 1.0 + PHYSICALITY_SLACK

    out = np.empty((n + 1, 3))
    x, y, z = (float(c) for c in cfg.initial)
    out[0] = (x, y, z)
    f = _rhs_scalar
    for i in range(n):
        k1 = f(x, y, z, Rg[i], Kg[i], Lg[i], Xg[i], Fg[i], Gg[i], eps, aa, am2, a2)
        k2 = f(x + half * k1[0], y + half * k1[1], z + half * k1[2],
               Rh[i], Kh[i], Lh[i], Xh[i], Fh[i], Gh[i], eps, aa, am2, a2)
        k3 = f(x + half * k2[0], y + half * k2[1], z + half * k2[2],
               Rh[i], Kh[i], Lh[i], Xh[i], Fh[i], Gh[i], eps, aa, am2, a2)
        j = i + 1
        k4 = f(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2],
               Rg[j], Kg[j], Lg[j], Xg[j], Fg[j], Gg[j], eps, aa, am2, a2)
        x += sixth * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0])
        y += sixth * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])
        z += sixth * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2])
        if not (x * x + y * y + z * z <= limit):
            raise IntegrationError(
                f"Bloch norm left the unit ball at t={grid[j]:g} "
                f"(|D|^2 = {x*x + y*y + z*z:.6g})", t=float(grid[j]))
        out[j] = (x, y, z)
    return Trajectory(grid=grid, states=out, config=cfg)


def kernels_for(cfg: ProbeConfig, quad: QuadratureConfig = QuadratureConfig(),
                workers: int = None) -> KernelSet:
    """Precompute the kernel set matching ``cfg``'s grid and parameters."""
    return precompute(cfg.kernel_params, cfg.t_end, cfg.dt, quad, workers=workers)


def dephasing_oracle(cfg: ProbeConfig,
                     quad: QuadratureConfig = QuadratureConfig()) -> Trajectory:
    """Exact trajectory for the purely dephasing coupling (alpha = 0).

    Dz is conserved; the transverse vector rotates by eps*t and is damped by
    exp(-Gamma(t)) with Gamma(t) = 4 int J(w) coth(w/2T) (1 - cos wt)/w^2 dw,
    a single frequency-space quadrature that never touches the ODE path.
    """
    if cfg.alpha != 0.0:
        raise DomainError("the dephasing oracle applies only to alpha = 0")
    n = int(round(cfg.t_end / cfg.dt))
    if n < 1 or abs(n * cfg.dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise DomainError(f"t_end={cfg.t_end} is not an integer multiple of dt={cfg.dt}")
    grid = np.arange(n + 1) * cfg.dt
    eng = _engine(cfg.kernel_params, quad)
    gam, _ = eng.evaluate(grid, gamma=True)
    damp = np.exp(-gam["Gamma"])
    c = np.cos(cfg.epsilon * grid)
    s = np.sin(cfg.epsilon * grid)
    x0, y0, z0 = cfg.initial
    out = np.empty((n + 1, 3))
    out[:, 0] = damp * (x0 * c - y0 * s)
    out[:, 1] = damp * (x0 * s + y0 * c)
    out[:, 2] = z0
    out[0] = (x0, y0, z0)
    return Trajectory(grid=grid, states=out, config=cfg)
