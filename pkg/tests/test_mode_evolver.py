import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from parametric_cavity.cavity_model import CavityConfig
from parametric_cavity.mode_evolver import (
    CoupledModes,
    IntegrationError,
    ModeState,
    ParticleSpectrum,
    extract_bogoliubov,
    initial_state,
    integrate,
    mathieu_growth_rate,
    monodromy,
    numeric_spectrum,
    system_rhs,
    trajectory,
)


def _g(k, j):
    return 0.0 if k == j else (-1) ** (k - j) * 2 * k * j / (j * j - k * k)


def _linear_oracle(t, X, cfg):
    """Linear-in-eps mode equations in (Q, P) form, mapped back to X."""
    K = cfg.K
    w = cfg.omega_1 * np.arange(1, K + 1)
    G = np.array([[_g(k, j) for j in range(1, K + 1)] for k in range(1, K + 1)])
    xm, xp = X[:, :K][:, ::-1], X[:, K:]
    Q = (xm + xp) / np.sqrt(2 * w)
    P = -1j * np.sqrt(w / 2) * (xm - xp)
    e, Om = cfg.epsilon, cfg.Omega
    lam, lam_dot = e * Om * math.cos(Om * t), -e * Om * Om * math.sin(Om * t)
    Qdot = P
    Pdot = -w * w * Q + 2 * e * math.sin(Om * t) * w * w * Q + 2 * lam * P @ G.T + lam_dot * Q @ G.T
    # X_- = sqrt(w/2) Q + i P / sqrt(2w), X_+ = conj-partner
    dxm = np.sqrt(w / 2) * Qdot + 1j * Pdot / np.sqrt(2 * w)
    dxp = np.sqrt(w / 2) * Qdot - 1j * Pdot / np.sqrt(2 * w)
    return np.concatenate([dxm[:, ::-1], dxp], axis=1)


def _random_state(K, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(3, 2 * K)) + 1j * rng.normal(size=(3, 2 * K))


# --- state and rhs ------------------------------------------------------------------

def test_initial_state_layout():
    cfg = CavityConfig(K=4)
    s = initial_state(cfg)
    assert s.X.shape == (4, 8)
    np.testing.assert_array_equal(s.minus(), np.eye(4))
    np.testing.assert_array_equal(s.plus(), np.zeros((4, 4)))
    # Q_nn = 1/sqrt(2 omega_n), P_nn = -i omega_n Q_nn
    np.testing.assert_allclose(np.diag(s.Q()), 1 / np.sqrt(2 * np.arange(1, 5)))
    np.testing.assert_allclose(np.diag(s.P()), -1j * np.arange(1, 5) * np.diag(s.Q()))


def test_rhs_without_motion_is_free_rotation():
    cfg = CavityConfig(epsilon=0.0, K=4)
    s = initial_state(cfg)
    d = system_rhs(s, 0.7, cfg)
    assert d[0, 3] == pytest.approx(-1j)
    assert np.count_nonzero(d) == 4


def test_rhs_rejects_wrong_width():
    cfg = CavityConfig(K=4)
    with pytest.raises(ValueError):
        system_rhs(ModeState(0.0, np.zeros((4, 6), complex), 1.0), 0.0, cfg)


@given(st.floats(0.0, 30.0), st.integers(0, 2**16))
@settings(max_examples=25, deadline=None)
def test_linearized_rhs_matches_qp_oracle(t, seed):
    cfg = CavityConfig(epsilon=0.01, gamma=3, K=7)
    X = _random_state(7, seed)
    got = CoupledModes(cfg, "linearized").rhs(t, X)
    np.testing.assert_allclose(got, _linear_oracle(t, X, cfg), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("t", [0.4, 2.9])
def test_exact_minus_linearized_is_second_order(t):
    X = _random_state(6, 1)
    diffs = []
    for eps in (1e-2, 5e-3):
        cfg = CavityConfig(epsilon=eps, gamma=2, K=6)
        a = CoupledModes(cfg, "exact").perturbation(t, X)
        b = CoupledModes(cfg, "linearized").perturbation(t, X)
        diffs.append(np.abs(a - b).max())
    assert diffs[0] / diffs[1] == pytest.approx(4.0, rel=0.05)


def test_rhs_stops_with_wall():
    cfg = CavityConfig(epsilon=0.01, K=4, T=10.0)
    X = _random_state(4, 3)
    dyn = CoupledModes(cfg)
    assert np.abs(dyn.perturbation(10.5, X)).max() == 0.0
    assert np.abs(dyn.perturbation(9.5, X)).max() > 0.0


# --- integration --------------------------------------------------------------------

@pytest.mark.parametrize("variant", ["linearized", "exact"])
def test_static_wall_gives_exact_phases(variant):
    cfg = CavityConfig(epsilon=0.0, K=5, T=7.3)
    s = integrate(cfg, variant)
    np.testing.assert_allclose(s.minus(), np.diag(np.exp(-1j * np.arange(1, 6) * 7.3)), atol=1e-14)
    assert np.abs(s.plus()).max() == 0.0


def test_integration_is_deterministic():
    cfg = CavityConfig(epsilon=1e-3, gamma=3, K=12, T=20)
    a, b = integrate(cfg).X, integrate(cfg).X
    assert np.array_equal(a, b)


def test_trajectory_ends_on_integrate():
    cfg = CavityConfig(epsilon=1e-3, gamma=2, K=8, T=5)
    traj = trajectory(cfg, t_end=6.0, every=4)
    assert traj[0].t == 0.0 and traj[-1].t == 6.0
    np.testing.assert_allclose(traj[-1].X, integrate(cfg, t_end=6.0).X, atol=1e-14)


def test_integration_error_carries_time(monkeypatch):
    cfg = CavityConfig(epsilon=1e-3, K=4, T=10)

    def blow_up(self, t, X):
        return np.full_like(X, np.nan) if t > 3 else np.zeros_like(X)

    monkeypatch.setattr(CoupledModes, "perturbation", blow_up)
    with pytest.raises(IntegrationError) as info:
        integrate(cfg)
    assert 3 < info.value.t < 3 + 2 * cfg.step


def test_bad_t_end():
    with pytest.raises(ValueError):
        integrate(CavityConfig(), t_end=-1)


# --- Bogoliubov -------------------------------------------------------------------

def test_first_order_beta_for_gamma_2():
    cfg = CavityConfig(epsilon=1e-3, gamma=2, K=16, T=100)
    _, bog = numeric_spectrum(cfg)
    # eps omega_1 T |v| = 0.1 * 1/2
    assert abs(bog.beta[0, 0]) == pytest.approx(0.05, rel=0.02)
    assert bog.unitarity_residual()[:8].max() < 1e-3


def test_bogoliubov_frozen_after_stop():
    cfg = CavityConfig(epsilon=1e-3, gamma=3, K=10, T=40)
    a = extract_bogoliubov(integrate(cfg), cfg)
    b = extract_bogoliubov(integrate(cfg, t_end=40 + 2.37), cfg)
    np.testing.assert_allclose(a.alpha, b.alpha, atol=1e-13)
    np.testing.assert_allclose(a.beta, b.beta, atol=1e-13)


def test_extraction_before_stop_rejected():
    cfg = CavityConfig(epsilon=1e-3, K=4, T=10)
    with pytest.raises(ValueError):
        extract_bogoliubov(integrate(cfg, t_end=5), cfg)


def test_spectrum_rejects_negative():
    with pytest.raises(ValueError):
        ParticleSpectrum(np.array([1.0, -0.1]), "numeric", {})


def test_spectrum_mirror_symmetry():
    cfg = CavityConfig(epsilon=1e-3, gamma=5, T=100)
    N = numeric_spectrum(cfg)[0].N
    assert N[0] == pytest.approx(N[3], rel=0.05)
    assert N[1] == pytest.approx(N[2], rel=0.05)


def test_quadratic_growth_in_T():
    N = [numeric_spectrum(CavityConfig(epsilon=1e-3, gamma=2, K=16, T=T))[0].N[0] for T in (50, 100)]
    assert N[1] / N[0] == pytest.approx(4.0, rel=0.1)


def test_exact_and_linearized_spectra_agree():
    cfg = CavityConfig(epsilon=1e-3, gamma=3, K=12, T=50)
    a = numeric_spectrum(cfg, "linearized")[0].N
    b = numeric_spectrum(cfg, "exact")[0].N
    np.testing.assert_allclose(a[:2], b[:2], rtol=0.02)


# --- monodromy ----------------------------------------------------------------------

def test_monodromy_at_rest_is_diagonal():
    cfg = CavityConfig(epsilon=0.0, gamma=3, K=4)
    phi = monodromy(cfg)
    ks = np.array([-4, -3, -2, -1, 1, 2, 3, 4])
    np.testing.assert_allclose(phi, np.diag(np.exp(1j * ks * cfg.period)), atol=1e-14)


def test_monodromy_determinant_converges_to_one():
    devs = []
    for spp in (64, 128, 256):
        cfg = CavityConfig(epsilon=1e-2, gamma=2, K=8, steps_per_period=spp)
        devs.append(abs(abs(np.linalg.det(monodromy(cfg))) - 1))
    assert devs[0] < 1e-5
    # traceless generator: any deviation is RK4 error, shrinking ~2^5 per halving
    assert devs[1] / devs[2] > 16


def _mathieu_rate_ivp(k, gamma, eps):
    w, Om = float(k), float(gamma)
    tau = 2 * math.pi / Om

    def f(t, y):
        return [y[1], -w * w * (1 - 2 * eps * math.sin(Om * t)) * y[0], y[3], -w * w * (1 - 2 * eps * math.sin(Om * t)) * y[2]]

    sol = solve_ivp(f, (0, tau), [1, 0, 0, 1], rtol=1e-12, atol=1e-14, method="DOP853")
    y = sol.y[:, -1]
    mult = np.linalg.eigvals(np.array([[y[0], y[2]], [y[1], y[3]]]))
    return float(np.log(np.abs(mult)).max() / tau)


@pytest.mark.parametrize("k,gamma", [(1, 2.0), (2, 4.0), (1, 2.5), (1, 1.5)])
def test_mathieu_rate_matches_scalar_ode(k, gamma):
    eps = 0.05
    got = mathieu_growth_rate(k, gamma, eps, steps_per_period=256)
    assert got == pytest.approx(_mathieu_rate_ivp(k, gamma, eps), abs=1e-6)


def test_mathieu_resonance_rate():
    assert mathieu_growth_rate(1, 2.0, 1e-2) == pytest.approx(0.005, rel=0.01)
    assert mathieu_growth_rate(1, 2.5, 1e-2) < 1e-6


def test_convergence_check_detects_coarse_steps():
    # canary: 8x fewer steps leaves the asymptotic regime and the order check must fail
    from parametric_cavity.acceptance import convergence_order

    assert not convergence_order(base=4).passed
