import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qubit_thermometry import (
    BlochState,
    ConfigurationError,
    DomainError,
    IntegrationError,
    KernelSet,
    NumericError,
    ProbeConfig,
    SpectralDensity,
    dephasing_oracle,
    integrate,
    rhs,
)
from qubit_thermometry.dynamics import kernels_for
from qubit_thermometry.witness import coherence

from oracles import dephasing_coherence_T0, quad_gamma


def _probe(sd, alpha, T=0.2, eps=0.5, t_end=10.0, dt=0.01, initial=(1.0, 0.0, 0.0)):
    return ProbeConfig(epsilon=eps, alpha=alpha, T=T, sd=sd, initial=initial,
                       t_end=t_end, dt=dt)


# -- rhs ------------------------------------------------------------------------

def test_rhs_pure_dephasing_conserves_population():
    state = BlochState(0.3, -0.2, 0.7)
    deriv = rhs(state, (0.1, 0.2, 0.3, 0.4, 0.5, 0.6), epsilon=0.5, alpha=0.0)
    assert deriv.dz == 0.0  # every Dz term carries alpha


def test_rhs_closed_system_precession():
    deriv = rhs(BlochState(1.0, 0.0, 0.0), (0.0,) * 6, epsilon=0.7, alpha=0.6)
    assert (deriv.dx, deriv.dy, deriv.dz) == (0.0, 0.7, 0.0)


def test_rhs_half_mixing_coefficient():
    # at alpha = 1/2 the cross coefficient -4 a (a-1) equals +1, so from
    # D = (0, 0, 1) the x-equation reads G + K
    r, k, l, x, f, g = 0.11, 0.23, 0.31, 0.41, 0.53, 0.61
    deriv = rhs(BlochState(0.0, 0.0, 1.0), (r, k, l, x, f, g), epsilon=0.5, alpha=0.5)
    assert deriv.dx == pytest.approx(g + k, rel=1e-15)
    assert deriv.dz == pytest.approx(-g - k, rel=1e-15)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9),
       st.sampled_from([0.0, 1.0]))
def test_rhs_cross_terms_vanish_at_endpoints(dx, dy, dz, alpha):
    # the interference terms carry alpha*(1-alpha) and must be exactly zero
    kernels = (0.3, 0.5, 0.7, 0.11, 0.13, 0.17)
    deriv = rhs(BlochState(dx, dy, dz), kernels, epsilon=0.5, alpha=alpha)
    if alpha == 0.0:
        # pure dephasing never moves the population
        assert deriv.dz == 0.0
    else:
        # pure dissipation: no population-coherence feedback terms in dx, dz
        assert deriv.dx == -0.5 * dy
        assert deriv.dz == -4.0 * kernels[5] - 4.0 * dz * kernels[1]


def test_rhs_rejects_non_finite():
    with pytest.raises(NumericError):
        rhs(BlochState(math.nan, 0.0, 0.0), (0.0,) * 6, 0.5, 0.5)
    with pytest.raises(NumericError):
        rhs(BlochState(0.0, 0.0, 0.0), (math.inf, 0, 0, 0, 0, 0), 0.5, 0.5)


# -- integrate --------------------------------------------------------------------

def test_free_precession():
    sd0 = SpectralDensity(eta=0.0)
    cfg = _probe(sd0, alpha=0.5, T=0.2, eps=0.5, t_end=10.0, dt=1e-3)
    ks = kernels_for(cfg)
    traj = integrate(cfg, ks)
    expect = np.stack([np.cos(0.5 * traj.grid), np.sin(0.5 * traj.grid),
                       np.zeros_like(traj.grid)], axis=1)
    assert np.max(np.abs(traj.states - expect)) < 1e-8
    assert abs(np.linalg.norm(traj.states[-1]) - 1.0) < 1e-8


def test_initial_state_exact(sd, ks_short):
    cfg = _probe(sd, alpha=0.3, initial=(0.4, 0.1, -0.5))
    traj = integrate(cfg, ks_short)
    assert tuple(traj.states[0]) == (0.4, 0.1, -0.5)


def test_dephasing_against_oracle_T0(sd):
    # exact solution C(t) = (1 + t^2)^(-2 eta) at T = 0
    cfg = ProbeConfig(epsilon=0.5, alpha=0.0, T=0.0, sd=sd, t_end=10.0, dt=1e-2)
    traj = integrate(cfg, kernels_for(cfg))
    C = coherence(traj)
    ref = dephasing_coherence_T0(0.05, 1.0, traj.grid)
    assert np.max(np.abs(C - ref)) < 1e-6
    i3 = traj.index_of(3.0)
    assert C[i3] == pytest.approx(10.0 ** -0.1, abs=1e-7)


def test_dephasing_against_oracle_finite_T(sd, ks_short):
    # ODE vs the analytic damping exp(-Gamma(t)) at T = 0.2
    cfg = _probe(sd, alpha=0.0, t_end=10.0)
    traj = integrate(cfg, ks_short)
    oracle = dephasing_oracle(cfg)
    assert np.array_equal(traj.grid, oracle.grid)
    dC = np.abs(coherence(traj) - coherence(oracle))
    assert np.max(dC) < 1e-6
    assert np.max(np.abs(traj.dz - oracle.dz)) < 1e-12


@pytest.mark.parametrize("T,eta", [(0.0, 0.1), (0.4, 0.02)])
def test_oracle_agreement_full_window(T, eta):
    # alpha = 0 ODE vs the frequency-space oracle over the figure window
    sd_ = SpectralDensity(eta=eta)
    cfg = ProbeConfig(epsilon=0.5, alpha=0.0, T=T, sd=sd_, t_end=50.0, dt=1e-2)
    traj = integrate(cfg, kernels_for(cfg))
    oracle = dephasing_oracle(cfg)
    assert np.max(np.abs(coherence(traj) - coherence(oracle))) <= 1e-6


def test_step_halving_fourth_order(sd):
    # NOTE: error differences between dt and dt/2 shrink 16x per halving
    ends = []
    for dt in (0.2, 0.1, 0.05):
        cfg = _probe(sd, alpha=0.5, t_end=8.0, dt=dt)
        traj = integrate(cfg, kernels_for(cfg))
        ends.append(traj.states[-1])
    d1 = np.linalg.norm(ends[0] - ends[1])
    d2 = np.linalg.norm(ends[1] - ends[2])
    order = math.log2(d1 / d2)
    assert 3.5 <= order <= 4.5


def test_mismatched_kernelset_rejected(sd, ks_short):
    cfg = _probe(sd, alpha=0.5, T=0.3)  # kernel set was built at T=0.2
    with pytest.raises(ConfigurationError):
        integrate(cfg, ks_short)
    cfg2 = _probe(sd, alpha=0.5, t_end=5.0)  # wrong horizon
    with pytest.raises(ConfigurationError):
        integrate(cfg2, ks_short)


def test_physicality_breach_detected(sd, ks_short):
    # negative dephasing rate feeds coherence growth beyond the unit ball
    bad = KernelSet(
        grid=ks_short.grid,
        values={n: (-0.1 * np.ones_like(ks_short.grid) if n == "R" else
                    np.zeros_like(ks_short.grid)) for n in ("R", "K", "L", "X", "F", "G")},
        half_values={n: (-0.1 * np.ones(len(ks_short.grid) - 1) if n == "R" else
                         np.zeros(len(ks_short.grid) - 1)) for n in ("R", "K", "L", "X", "F", "G")},
        params=ks_short.params, quad=ks_short.quad)
    cfg = _probe(ks_short.params.sd, alpha=0.0)
    with pytest.raises(IntegrationError) as err:
        integrate(cfg, bad)
    assert err.value.t is not None and err.value.t > 0.0


def test_markov_fixed_point(sd, ks_long):
    # weak-coupling steady state of the dissipative probe: Dz -> -tanh(eps/2T)
    cfg = _probe(sd, alpha=1.0, t_end=200.0, dt=0.01)
    traj = integrate(cfg, ks_long)
    assert traj.dz[-1] == pytest.approx(-math.tanh(0.5 / 0.4), abs=5 * 0.05)
    assert abs(traj.dz[-1] + math.tanh(0.5 / 0.4)) < 1e-4  # actually much tighter


def test_probe_config_validation(sd):
    with pytest.raises(DomainError):
        _probe(sd, alpha=1.2)
    with pytest.raises(DomainError):
        _probe(sd, alpha=0.5, initial=(1.0, 0.5, 0.0))
    with pytest.raises(DomainError):
        ProbeConfig(epsilon=0.5, alpha=0.5, T=0.2, sd=sd, t_end=1.0, dt=0.0)


# -- dephasing oracle ----------------------------------------------------------------

def test_oracle_requires_alpha_zero(sd):
    with pytest.raises(DomainError):
        dephasing_oracle(_probe(sd, alpha=0.5))


def test_oracle_t0_and_zero_coupling(sd):
    cfg = _probe(sd, alpha=0.0, initial=(0.6, 0.0, 0.8), t_end=1.0, dt=0.5)
    traj = dephasing_oracle(cfg)
    assert tuple(traj.states[0]) == (0.6, 0.0, 0.8)
    free = ProbeConfig(epsilon=0.5, alpha=0.0, T=0.2, sd=SpectralDensity(eta=0.0),
                       t_end=10.0, dt=0.1)
    traj0 = dephasing_oracle(free)
    norms = np.hypot(traj0.dx, traj0.dy)
    assert np.max(np.abs(norms - 1.0)) < 1e-12  # pure rotation


def test_oracle_gamma_against_scipy(sd):
    cfg = _probe(sd, alpha=0.0, t_end=4.0, dt=1.0)
    traj = dephasing_oracle(cfg)
    for i, t in enumerate(traj.grid[1:], start=1):
        gamma_ref = quad_gamma(0.05, 1.0, 0.2, float(t))
        assert np.hypot(traj.dx[i], traj.dy[i]) == pytest.approx(
            math.exp(-gamma_ref), rel=1e-8)


def test_trajectory_csv(tmp_path, sd, ks_short):
    cfg = _probe(sd, alpha=0.5)
    traj = integrate(cfg, ks_short)
    path = tmp_path / "trajectory.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,dx,dy,dz"
    assert len(lines) == len(traj.grid) + 1
    row = lines[1].split(",")
    assert [float(v) for v in row] == [0.0, 1.0, 0.0, 0.0]
    assert float(lines[-1].split(",")[1]) == traj.dx[-1]
