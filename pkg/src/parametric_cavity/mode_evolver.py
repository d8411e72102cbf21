"""Integration of the truncated coupled-mode system.

The state of initial mode ``n`` is the row ``X[n-1, :]`` over signed indices
(``X_{n,-k}`` carries the ``e^{-i omega_k t}`` component of mode ``k`` and
``X_{n,+k}`` the ``e^{+i omega_k t}`` one). Two dynamics are available:

* ``linearized``: ``dX/dt = [V0 + eps V1(t)] X`` with ``V1`` assembled from
  :func:`~parametric_cavity.cavity_model.coupling_v`.
* ``exact``: the full instantaneous-basis equations for ``Q_{nk}`` with
  ``omega_k(t) = k pi / L(t)`` and all orders of ``Ldot/L``.

Both are stepped with classical RK4 at a fixed step. The static part
``V0 = diag(i k omega_1)`` is removed analytically (rotating frame), so the
stepper only sees the slow O(eps) dynamics and the fast phases carry no
truncation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .cavity_model import (
    CavityConfig,
    Variant,
    drive_matrices,
    g_matrix,
    signed_modes,
    signed_position,
)

__all__ = [
    "BogoliubovMatrices",
    "CoupledModes",
    "IntegrationError",
    "ModeState",
    "ParticleSpectrum",
    "extract_bogoliubov",
    "initial_state",
    "integrate",
    "mathieu_growth_rate",
    "monodromy",
    "numeric_spectrum",
    "particle_spectrum_numeric",
    "system_rhs",
    "trajectory",
]


class IntegrationError(RuntimeError):
    """Non-finite values appeared during integration."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


@dataclass
class ModeState:
    t: float
    X: np.ndarray
    omega_1: float = 1.0

    @property
    def K(self) -> int:
        return self.X.shape[1] // 2

    def minus(self) -> np.ndarray:
        """``X_{n,k-}`` ordered by mode number ``k = 1..K``."""
        return self.X[:, : self.K][:, ::-1]

    def plus(self) -> np.ndarray:
        return self.X[:, self.K :]

    def Q(self) -> np.ndarray:
        w = self.omega_1 * np.arange(1, self.K + 1)
        return (self.minus() + self.plus()) / np.sqrt(2 * w)

    def P(self) -> np.ndarray:
        w = self.omega_1 * np.arange(1, self.K + 1)
        return -1j * np.sqrt(w / 2) * (self.minus() - self.plus())


@dataclass
class BogoliubovMatrices:
    alpha: np.ndarray
    beta: np.ndarray
    T: float

    def unitarity_residual(self) -> np.ndarray:
        """``|sum_n (|alpha_nk|^2 - |beta_nk|^2) - 1|`` for each ``k``."""
        s = (np.abs(self.alpha) ** 2 - np.abs(self.beta) ** 2).sum(axis=0)
        return np.abs(s - 1.0)


@dataclass
class ParticleSpectrum:
    N: np.ndarray
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=float)
        if np.any(self.N < 0):
            raise ValueError("particle numbers must be non-negative")


class CoupledModes:
    """Right-hand side of the truncated mode equations for one configuration.

    ``modes`` overrides the default window ``1..cfg.K``; ``couple=False``
    drops all inter-mode couplings; ``periodic=True`` ignores the stop time
    (wall driven forever), as needed for the monodromy matrix.
    """

    def __init__(
        self,
        cfg: CavityConfig,
        variant: Variant = "linearized",
        modes: Iterable[int] | None = None,
        couple: bool = True,
        periodic: bool = False,
    ):
        if variant not in ("exact", "linearized"):
            raise ValueError(f"unknown variant {variant!r}")
        self.cfg = cfg
        self.variant = variant
        self.periodic = periodic
        self.pos = np.arange(1, cfg.K + 1) if modes is None else np.asarray(sorted(modes), dtype=int)
        self.ks = signed_modes(self.pos)
        self.n = self.pos.size
        w1 = cfg.omega_1
        self.kappa = self.ks * w1
        self.w = self.pos * w1
        if variant == "linearized":
            _, vp, vm = drive_matrices(self.pos, cfg.gamma, couple=couple)
            self._vp = cfg.epsilon * w1 * vp
            self._vm = cfg.epsilon * w1 * vm
        else:
            G = g_matrix(self.pos) if couple else np.zeros((self.n, self.n))
            self._G = G
            self._GG = G.T @ G

    def moving(self, t: float) -> bool:
        return self.periodic or 0.0 <= t <= self.cfg.T

    def perturbation(self, t: float, X: np.ndarray) -> np.ndarray:
        """``dX/dt - i kappa X``: the part of the dynamics driven by the wall."""
        if not self.moving(t) or self.cfg.epsilon == 0.0:
            return np.zeros_like(X)
        if self.variant == "linearized":
            Om = self.cfg.Omega
            V = self._vp * np.exp(1j * Om * t) + self._vm * np.exp(-1j * Om * t)
            return X @ V.T
        return self._exact_perturbation(t, X)

    def _exact_perturbation(self, t: float, X: np.ndarray) -> np.ndarray:
        cfg, n, w = self.cfg, self.n, self.w
        eps, Om = cfg.epsilon, cfg.Omega
        xm = X[:, :n][:, ::-1]
        xp = X[:, n:]
        Q = (xm + xp) / np.sqrt(2 * w)
        P = -1j * np.sqrt(w / 2) * (xm - xp)
        s, c = math.sin(Om * t), math.cos(Om * t)
        den = 1.0 + eps * s
        lam = eps * Om * c / den
        lam_dot = -eps * Om * Om * s / den - lam * lam
        wt2 = (w / den) ** 2
        # Qddot + w^2 Q, with w the rest frequency
        dq = (w * w - wt2) * Q + 2 * lam * P @ self._G.T + lam_dot * Q @ self._G.T + lam * lam * Q @ self._GG.T
        d = 1j * dq / np.sqrt(2 * w)
        return np.concatenate([d[:, ::-1], -d], axis=1)

    def rhs(self, t: float, X: np.ndarray) -> np.ndarray:
        return 1j * self.kappa * X + self.perturbation(t, X)


def initial_state(cfg: CavityConfig) -> ModeState:
    """``X_{n,-k}(0) = delta_nk``, every ``sigma = +`` entry zero."""
    K = cfg.K
    X = np.zeros((K, 2 * K), dtype=complex)
    for n in range(1, K + 1):
        X[n - 1, signed_position(-n, K)] = 1.0
    return ModeState(0.0, X, cfg.omega_1)


def system_rhs(state: ModeState, t: float, cfg: CavityConfig, variant: Variant = "linearized") -> np.ndarray:
    """Time derivative of ``state.X`` at time ``t`` (lab frame)."""
    if state.X.ndim != 2 or state.X.shape[1] != 2 * cfg.K:
        raise ValueError(f"state has {state.X.shape[-1]} columns, config needs 2K = {2 * cfg.K}")
    return CoupledModes(cfg, variant).rhs(t, state.X)


def _rk4_rotating(
    dyn: CoupledModes,
    X0: np.ndarray,
    t0: float,
    t1: float,
    h: float,
    callback: Callable[[float, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Advance ``X0`` from ``t0`` to ``t1`` with fixed-step RK4 in the frame rotating with ``kappa``.

    The last step is shortened to land on ``t1``. Step times are computed as
    ``t0 + i h`` so the grid does not drift.
    """
    kappa = dyn.kappa

    def f(t, Y):
        ph = np.exp(1j * kappa * t)
        return dyn.perturbation(t, Y * ph) * ph.conj()

    nsteps = max(1, math.ceil((t1 - t0) / h - 1e-9))
    # Y(t) = X(t) exp(-i kappa t)
    Y = X0 * np.exp(-1j * kappa * t0)
    for i in range(nsteps):
        ta = t0 + i * h
        hh = h if i < nsteps - 1 else t1 - ta
        k1 = f(ta, Y)
        k2 = f(ta + hh / 2, Y + (hh / 2) * k1)
        k3 = f(ta + hh / 2, Y + (hh / 2) * k2)
        k4 = f(ta + hh, Y + hh * k3)
        Y = Y + (hh / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        tb = ta + hh
        if not np.isfinite(Y).all():
            raise IntegrationError(f"non-finite state at t = {tb:.6g} (instability or step too large)", tb)
        if callback is not None:
            callback(tb, Y * np.exp(1j * kappa * tb))
    return Y * np.exp(1j * kappa * t1)


def integrate(
    cfg: CavityConfig,
    variant: Variant = "linearized",
    t_end: float | None = None,
    X0: np.ndarray | None = None,
    dyn: CoupledModes | None = None,
) -> ModeState:
    """Evolve the initial state (or ``X0``) from 0 to ``t_end`` (default ``cfg.T``).

    The wall motion on ``[0, T]`` is integrated numerically; beyond ``T`` the
    modes are free and advance by their exact phases.
    """
    t_end = cfg.T if t_end is None else t_end
    if not t_end > 0 or not math.isfinite(t_end):
        raise ValueError(f"t_end must be positive and finite, got {t_end!r}")
    dyn = CoupledModes(cfg, variant) if dyn is None else dyn
    X = initial_state(cfg).X if X0 is None else np.asarray(X0, dtype=complex)
    t_move = t_end if dyn.periodic else min(t_end, cfg.T)
    if t_move > 0:
        X = _rk4_rotating(dyn, X, 0.0, t_move, cfg.step)
    if t_end > t_move:
        X = X * np.exp(1j * dyn.kappa * (t_end - t_move))
    return ModeState(t_end, X, cfg.omega_1)


def trajectory(cfg: CavityConfig, variant: Variant = "linearized", t_end: float | None = None, every: int = 1):
    """States at every ``every``-th step of the integration grid (including ``t = 0``)."""
    t_end = cfg.T if t_end is None else t_end
    dyn = CoupledModes(cfg, variant)
    X0 = initial_state(cfg).X
    out = [ModeState(0.0, X0.copy(), cfg.omega_1)]
    counter = [0]

    def keep(t, X):
        counter[0] += 1
        if counter[0] % every == 0:
            out.append(ModeState(t, X.copy(), cfg.omega_1))

    t_move = min(t_end, cfg.T)
    X = _rk4_rotating(dyn, X0, 0.0, t_move, cfg.step, keep) if t_move > 0 else X0
    if out[-1].t != t_move:
        out.append(ModeState(t_move, X.copy(), cfg.omega_1))
    if t_end > t_move:
        out.append(ModeState(t_end, X * np.exp(1j * dyn.kappa * (t_end - t_move)), cfg.omega_1))
    return out


def extract_bogoliubov(state: ModeState, cfg: CavityConfig) -> BogoliubovMatrices:
    """Read ``alpha_{nk}``, ``beta_{nk}`` from a state taken after the wall stopped.

    ``alpha = X_{n,-k} e^{+i omega_k t}``, ``beta = X_{n,+k} e^{-i omega_k t}``.
    """
    if state.t < cfg.T * (1 - 1e-12):
        raise ValueError(f"state at t = {state.t} precedes the wall stop time T = {cfg.T}")
    w = cfg.omega_1 * np.arange(1, state.K + 1)
    alpha = state.minus() * np.exp(1j * w * state.t)
    beta = state.plus() * np.exp(-1j * w * state.t)
    return BogoliubovMatrices(alpha, beta, state.t)


def particle_spectrum_numeric(bog: BogoliubovMatrices, params: dict | None = None) -> ParticleSpectrum:
    """``N_k = sum_n |beta_nk|^2``."""
    N = (np.abs(bog.beta) ** 2).sum(axis=0)
    return ParticleSpectrum(N, "numeric", dict(params or {}))


def numeric_spectrum(cfg: CavityConfig, variant: Variant = "linearized"):
    """Integrate to ``T`` and return ``(ParticleSpectrum, BogoliubovMatrices)``."""
    state = integrate(cfg, variant)
    bog = extract_bogoliubov(state, cfg)
    params = cfg.to_dict() | {"dynamics": variant}
    return particle_spectrum_numeric(bog, params), bog


def monodromy(
    cfg: CavityConfig,
    variant: Variant = "linearized",
    modes: Iterable[int] | None = None,
    couple: bool = True,
) -> np.ndarray:
    """State-transition matrix over one drive period for an eternally driven wall.

    Column ``b`` is the solution started from the ``b``-th unit vector.
    """
    dyn = CoupledModes(cfg, variant, modes=modes, couple=couple, periodic=True)
    X0 = np.eye(dyn.ks.size, dtype=complex)
    X = _rk4_rotating(dyn, X0, 0.0, cfg.period, cfg.step)
    return X.T


def mathieu_growth_rate(
    k: int,
    gamma: float,
    epsilon: float,
    variant: Variant = "linearized",
    steps_per_period: int = 64,
) -> float:
    """Exponential growth rate of the isolated mode ``k`` (all couplings off).

    Largest ``log|multiplier| / tau`` of the single-mode monodromy matrix.
    """
    cfg = CavityConfig(epsilon=epsilon, gamma=gamma, K=max(k, int(math.ceil(gamma)) + 1), T=math.inf,
                       steps_per_period=steps_per_period)
    phi = monodromy(cfg, variant, modes=(k,), couple=False)
    return float(np.log(np.abs(np.linalg.eigvals(phi))).max() / cfg.period)
