import math

import numpy as np
import pytest

from qubit_thermometry import (
    DomainError,
    KERNEL_NAMES,
    KernelParams,
    QuadratureConfig,
    SpectralDensity,
    decoherence_exponent,
    kernels_at,
    kernel_L,
    kernel_R,
    precompute,
    rebuild_for_temperature,
)

from oracles import kernel_R_T0, markov_K_limit, riemann_gamma, riemann_kernel

# frozen midpoint-Riemann references (n = 2e7, wmax = 100, converged to ~1e-13)
# at eta=0.05, omega_c=1, eps=0.5, T=0.2
RIEMANN_T1 = {
    "R": 2.998512465733198e-02,
    "K": 2.934349991558519e-02,
    "L": 2.499999999999996e-02,
    "X": 5.005009001318693e-03,
    "F": 2.380754963723134e-02,
    "G": 6.986370853451937e-03,
}
RIEMANN_T27 = {
    "R": 2.853358815967843e-02,
    "K": 2.875839468327407e-02,
    "L": 4.396863691194207e-02,
    "X": 3.622380912105348e-03,
    "F": 3.674006799684664e-02,
    "G": 2.019813300200331e-02,
}
GAMMA_T1 = 7.936864476471366e-02


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 5.0])
def test_all_kernels_vanish_then_match_oracle(params, quad, t):
    vals = kernels_at(params, t, quad)
    if t == 0.0:
        for name in KERNEL_NAMES:
            assert abs(vals[name]) < 1e-12
    else:
        for name in KERNEL_NAMES:
            ref = riemann_kernel(name, 0.05, 1.0, 0.5, 0.2, t, n=500_000)
            assert vals[name] == pytest.approx(ref, rel=1e-7, abs=1e-9)


def test_frozen_oracle_values(params, quad):
    v1 = kernels_at(params, 1.0, quad)
    v2 = kernels_at(params, 2.7, quad)
    for name in KERNEL_NAMES:
        assert v1[name] == pytest.approx(RIEMANN_T1[name], rel=1e-9)
        assert v2[name] == pytest.approx(RIEMANN_T27[name], rel=1e-9)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_R_closed_form_at_T0(sd, quad, t):
    p = KernelParams(sd=sd, epsilon=0.5, T=0.0)
    assert kernel_R(p, t, quad) == pytest.approx(kernel_R_T0(0.05, 1.0, t), rel=1e-8)


def test_L_long_time_limit(params, quad):
    # L(t) -> eta * omega_c; the residual at t = 1e3 is ~ eta/t^2
    assert kernel_L(params, 1e3, quad) == pytest.approx(0.05, abs=1e-4)


def test_R_long_time_vanishes_at_T0(sd, quad):
    p = KernelParams(sd=sd, epsilon=0.5, T=0.0)
    assert abs(kernel_R(p, 1e3, quad)) < 1e-4


def test_K_long_time_markov_average(params, quad):
    # tail average over one precession period approaches (pi/2) J(eps) coth(eps/2T);
    # the residual oscillation decays like 1/t
    from qubit_thermometry.kernels import _engine
    eng = _engine(params, quad)
    ts = 200.0 + np.linspace(0.0, 2.0 * math.pi / 0.5, 41)
    vals, _ = eng.evaluate(ts)
    avg = float(np.trapezoid(vals["K"], ts) / (ts[-1] - ts[0]))
    assert avg == pytest.approx(markov_K_limit(0.05, 1.0, 0.5, 0.2), rel=2e-2)


def test_eta_linearity(sd, quad):
    p1 = KernelParams(sd=sd, epsilon=0.5, T=0.2)
    p2 = KernelParams(sd=SpectralDensity(eta=0.1), epsilon=0.5, T=0.2)
    for t in (0.4, 3.1, 17.0):
        v1 = kernels_at(p1, t, quad)
        v2 = kernels_at(p2, t, quad)
        for name in KERNEL_NAMES:
            assert v2[name] == pytest.approx(2.0 * v1[name], rel=1e-13, abs=1e-300)


def test_zero_coupling(quad):
    p = KernelParams(sd=SpectralDensity(eta=0.0), epsilon=0.5, T=0.2)
    vals = kernels_at(p, 3.0, quad)
    assert all(vals[name] == 0.0 for name in KERNEL_NAMES)


def test_gapless_probe(sd, quad):
    # eps = 0: denominators become -w^2; X and G vanish identically, F = L
    p = KernelParams(sd=sd, epsilon=0.0, T=0.2)
    vals = kernels_at(p, 2.0, quad)
    assert vals["X"] == 0.0
    assert vals["G"] == 0.0
    assert vals["F"] == pytest.approx(vals["L"], rel=1e-13)
    ref = riemann_kernel("K", 0.05, 1.0, 0.0, 0.2, 2.0, n=500_000)
    assert vals["K"] == pytest.approx(ref, rel=1e-7)


def test_resonance_guard_insensitive(sd):
    # shrinking the direct-evaluation window by 10x must not move the values
    p = KernelParams(sd=sd, epsilon=0.5, T=0.2)
    qa = QuadratureConfig(resonance_guard=1e-4)
    qb = QuadratureConfig(resonance_guard=1e-5)
    for t in (1.0, 20.0):
        va = kernels_at(p, t, qa)
        vb = kernels_at(p, t, qb)
        for name in KERNEL_NAMES:
            assert abs(va[name] - vb[name]) <= 10.0 * qa.rel_tol * max(1.0, abs(va[name]))


def test_resonance_window_wider(sd, quad):
    # a much wider direct window changes the path but not the value
    p = KernelParams(sd=sd, epsilon=0.5, T=0.2)
    qwide = QuadratureConfig(resonance_guard=0.3)
    for t in (1.0, 7.7):
        va = kernels_at(p, t, quad)
        vb = kernels_at(p, t, qwide)
        for name in KERNEL_NAMES:
            assert vb[name] == pytest.approx(va[name], rel=1e-9, abs=1e-12)


def test_truncation_consistency(params):
    qa = QuadratureConfig(omega_max_factor=60)
    qb = QuadratureConfig(omega_max_factor=120)
    for t in (1.0, 30.0):
        va = kernels_at(params, t, qa)
        vb = kernels_at(params, t, qb)
        for name in KERNEL_NAMES:
            assert abs(va[name] - vb[name]) < qa.abs_tol


def test_panel_density_consistency(params):
    # doubling the panels-per-oscillation floor must not move the values
    qa = QuadratureConfig()
    qb = QuadratureConfig(panels_per_oscillation=8)
    for t in (5.0, 40.0):
        va = kernels_at(params, t, qa)
        vb = kernels_at(params, t, qb)
        for name in KERNEL_NAMES:
            assert vb[name] == pytest.approx(va[name], rel=1e-8, abs=1e-11)


def test_negative_time_rejected(params, quad):
    with pytest.raises(DomainError):
        kernel_R(params, -1.0, quad)
    with pytest.raises(DomainError):
        decoherence_exponent(params, -0.5, quad)


def test_config_validation():
    with pytest.raises(DomainError):
        QuadratureConfig(rel_tol=0.0)
    with pytest.raises(DomainError):
        QuadratureConfig(omega_max_factor=5.0)
    with pytest.raises(DomainError):
        QuadratureConfig(panels_per_oscillation=1)
    with pytest.raises(DomainError):
        KernelParams(sd=SpectralDensity(eta=0.1), epsilon=-0.5, T=0.2)
    with pytest.raises(DomainError):
        KernelParams(sd=SpectralDensity(eta=0.1), epsilon=0.5, T=-0.1)


def test_decoherence_exponent_against_oracles(params, quad):
    got = decoherence_exponent(params, 1.0, quad)
    assert got == pytest.approx(GAMMA_T1, rel=1e-9)
    assert got == pytest.approx(riemann_gamma(0.05, 1.0, 0.2, 1.0, n=500_000), rel=1e-7)
    # closed form at T = 0: Gamma = 2 eta ln(1 + t^2)
    p0 = KernelParams(sd=params.sd, epsilon=0.5, T=0.0)
    for t in (0.5, 3.0, 20.0):
        assert decoherence_exponent(p0, t, quad) == pytest.approx(
            2 * 0.05 * math.log1p(t * t), rel=1e-9)
    assert decoherence_exponent(params, 0.0, quad) == 0.0


# -- precompute ---------------------------------------------------------------

def test_precompute_grid_shape(params, quad):
    ks = precompute(params, 5.0, 0.01, quad)
    assert len(ks.grid) == 501
    assert len(ks.half_values["R"]) == 500
    assert ks.grid[0] == 0.0
    for name in KERNEL_NAMES:
        assert ks.values[name][0] == 0.0
        assert len(ks.values[name]) == 501


def test_precompute_matches_direct_calls_exactly(params, quad, ks_short):
    rng = np.random.default_rng(3)
    for i in rng.integers(0, len(ks_short.grid), 20):
        t = float(ks_short.grid[i])
        direct = kernels_at(params, t, quad)
        for name in KERNEL_NAMES:
            assert direct[name] == ks_short.values[name][i]  # same code path, 0 ulp
    for i in rng.integers(0, len(ks_short.grid) - 1, 5):
        t = float(ks_short.grid[i] + 0.005)
        direct = kernels_at(params, t, quad)
        for name in KERNEL_NAMES:
            assert direct[name] == ks_short.half_values[name][i]


def test_precompute_worker_count_invariance(params, quad):
    a = precompute(params, 3.0, 0.01, quad)
    b = precompute(params, 3.0, 0.01, quad, workers=4)
    for name in KERNEL_NAMES:
        assert np.array_equal(a.values[name], b.values[name])
        assert np.array_equal(a.half_values[name], b.half_values[name])


def test_precompute_validation(params, quad):
    with pytest.raises(DomainError):
        precompute(params, 0.0, 0.01, quad)
    with pytest.raises(DomainError):
        precompute(params, 1.0, 0.3, quad)  # not an integer multiple


def test_thermal_kernels_only_depend_on_T(sd, quad):
    pa = KernelParams(sd=sd, epsilon=0.5, T=0.1)
    pb = KernelParams(sd=sd, epsilon=0.5, T=0.3)
    ka = precompute(pa, 2.0, 0.05, quad)
    kb = precompute(pb, 2.0, 0.05, quad)
    for name in ("L", "F", "G"):
        # same integrals; only the quadrature mesh differs with T
        np.testing.assert_allclose(ka.values[name], kb.values[name],
                                   rtol=1e-12, atol=1e-15)
    assert np.max(np.abs(ka.values["R"] - kb.values["R"])) > 1e-4


def test_rebuild_for_temperature(params, quad, ks_short):
    kr = rebuild_for_temperature(ks_short, 0.3)
    for name in ("L", "F", "G"):
        assert kr.values[name] is ks_short.values[name]
    fresh = precompute(KernelParams(sd=params.sd, epsilon=0.5, T=0.3),
                       10.0, 0.01, quad)
    for name in ("R", "K", "X"):
        np.testing.assert_allclose(kr.values[name], fresh.values[name],
                                   rtol=1e-9, atol=1e-12)
    with pytest.raises(DomainError):
        rebuild_for_temperature(ks_short, 0.0)


def test_kernelset_csv(tmp_path, ks_short):
    path = tmp_path / "kernels.csv"
    ks_short.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,R,K,L,X,F,G"
    assert len(lines) == len(ks_short.grid) + 1
    first = [float(v) for v in lines[1].split(",")]
    assert first == [0.0] * 7
    row = [float(v) for v in lines[101].split(",")]
    assert row[0] == 1.0
    assert row[1] == ks_short.values["R"][100]  # 17 significant digits round-trip
