"""Cavity geometry, wall trajectory, mode frequencies and mode couplings.

Conventions
-----------
Times are physical times with c = 1. The fundamental frequency is
``omega_1 = pi / L0`` and the wall is driven at ``Omega = gamma * omega_1``;
with the default ``L0 = pi`` both coincide with dimensionless units.

Mode components are labelled by a *signed* index ``k``: ``k > 0`` is the
``sigma = +`` component of mode ``|k|`` and ``k < 0`` the ``sigma = -``
component. State vectors are ordered ``-K, ..., -1, 1, ..., K``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Literal

import numpy as np

Variant = Literal["exact", "linearized"]


def default_truncation(gamma: float) -> int:
    """Default mode count ``max(4 * gamma, 16)`` (rounded up for non-integer gamma)."""
    return max(int(math.ceil(4 * gamma)), 16)


def is_integer_gamma(gamma: float) -> bool:
    return float(gamma).is_integer()


@dataclass(frozen=True)
class CavityConfig:
    """Physical and numerical parameters of one experiment.

    ``K=None`` selects :func:`default_truncation`. ``T`` is the time at which
    the wall stops; it may be ``math.inf`` for an eternally driven wall.
    """

    L0: float = math.pi
    epsilon: float = 1e-3
    gamma: float = 2.0
    K: int | None = None
    T: float = 100.0
    steps_per_period: int = 64

    def __post_init__(self):
        if self.K is None:
            object.__setattr__(self, "K", default_truncation(self.gamma))
        if not (self.L0 > 0 and math.isfinite(self.L0)):
            raise ValueError(f"L0 must be positive and finite, got {self.L0!r}")
        if not (0.0 <= self.epsilon < 1.0):
            raise ValueError(f"epsilon must satisfy 0 <= epsilon < 1, got {self.epsilon!r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma!r}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        object.__setattr__(self, "K", int(self.K))
        if is_integer_gamma(self.gamma) and self.K < self.gamma + 1:
            raise ValueError(
                f"K={self.K} truncates the resonance partner of mode 1; need K >= gamma + 1 = {int(self.gamma) + 1}"
            )
        if not self.T >= 0:
            raise ValueError(f"T must be non-negative, got {self.T!r}")
        if int(self.steps_per_period) != self.steps_per_period or self.steps_per_period < 1:
            raise ValueError(f"steps_per_period must be a positive integer, got {self.steps_per_period!r}")
        object.__setattr__(self, "steps_per_period", int(self.steps_per_period))

    @property
    def omega_1(self) -> float:
        return math.pi / self.L0

    @property
    def Omega(self) -> float:
        return self.gamma * self.omega_1

    @property
    def period(self) -> float:
        """Drive period ``2 pi / Omega``."""
        return 2 * math.pi / self.Omega

    @property
    def step(self) -> float:
        return self.period / self.steps_per_period

    def to_dict(self) -> dict:
        return asdict(self)


def check_signed(k: int) -> int:
    """Validate a signed mode index (a nonzero integer) and return it as ``int``."""
    if int(k) != k or k == 0:
        raise ValueError(f"signed mode index must be a nonzero integer, got {k!r}")
    return int(k)


def signed_modes(modes: int | Iterable[int]) -> np.ndarray:
    """Signed indices ``[-m_last, ..., -m_first, m_first, ..., m_last]``.

    ``modes`` is either a truncation count K (modes ``1..K``) or an explicit
    increasing collection of positive mode numbers.
    """
    pos = np.arange(1, modes + 1) if isinstance(modes, (int, np.integer)) else np.asarray(sorted(modes), dtype=int)
    if pos.size == 0 or pos[0] < 1:
        raise ValueError("mode numbers must be positive")
    return np.concatenate([-pos[::-1], pos])


def signed_position(k: int, K: int) -> int:
    """Column of signed index ``k`` in a ``-K..-1, 1..K`` vector."""
    k = check_signed(k)
    if abs(k) > K:
        raise IndexError(f"mode {k} outside truncation K={K}")
    return K + k if k < 0 else K + k - 1


# ---------------------------------------------------------------------------
# wall motion
# ---------------------------------------------------------------------------

def _moving(t: float, cfg: CavityConfig) -> bool:
    return 0.0 < t < cfg.T


def wall_position(t: float, cfg: CavityConfig) -> float:
    """``L0 * (1 + eps sin(Omega t))`` while the wall moves (``0 < t < T``), ``L0`` otherwise.

    The trajectory is continuous at ``t = T`` only when ``sin(Omega T) = 0``.
    """
    if not _moving(t, cfg):
        return cfg.L0
    return cfg.L0 * (1.0 + cfg.epsilon * math.sin(cfg.Omega * t))


def wall_log_derivatives(t: float, cfg: CavityConfig, order: Literal["exact", "linearized"] = "exact"):
    """Return ``(Ldot/L, Lddot/L)`` of the sinusoidal wall law at time ``t``.

    The analytic formula is evaluated on the closed interval; callers decide
    when the wall is at rest. ``order="linearized"`` returns the O(eps) forms
    ``eps Omega cos(Omega t)`` and ``-eps Omega^2 sin(Omega t)``.
    """
    eps, Om = cfg.epsilon, cfg.Omega
    s, c = math.sin(Om * t), math.cos(Om * t)
    if order == "linearized":
        return eps * Om * c, -eps * Om * Om * s
    den = 1.0 + eps * s
    return eps * Om * c / den, -eps * Om * Om * s / den


def mode_frequency(k: int, t: float, cfg: CavityConfig, variant: Variant = "exact") -> float:
    """Instantaneous frequency of mode ``k >= 1``.

    ``exact`` gives ``k pi / L(t)``; ``linearized`` gives the first-order
    expansion ``k omega_1 (1 - eps sin(Omega t))`` (its square is used as
    ``omega_k^2 (1 - 2 eps sin(Omega t))`` in the linearized dynamics).
    """
    if int(k) != k or k < 1:
        raise ValueError(f"mode number must be a positive integer, got {k!r}")
    if variant == "exact":
        return k * math.pi / wall_position(t, cfg)
    if variant == "linearized":
        if not _moving(t, cfg):
            return k * cfg.omega_1
        return k * cfg.omega_1 * (1.0 - cfg.epsilon * math.sin(cfg.Omega * t))
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# couplings
# ---------------------------------------------------------------------------

def coupling_g(k: int, j: int) -> float:
    """Mode-coupling coefficient ``(-1)^(k-j) 2kj / (j^2 - k^2)``, zero when ``|j| == |k|``."""
    k, j = check_signed(k), check_signed(j)
    if abs(k) == abs(j):
        return 0.0
    sign = -1.0 if (k - j) % 2 else 1.0
    return sign * 2.0 * k * j / (j * j - k * k)


def coupling_v(s: int, k: int, j: int, gamma: float) -> float:
    """Drive coefficient ``v^s_{k,j}`` on signed indices.

    ``gamma g(k,j) sqrt|j/k| (1/2 + s gamma / (4 j)) - s (k/2) [|k| == |j|]``
    """
    if s not in (1, -1):
        raise ValueError(f"s must be +1 or -1, got {s!r}")
    k, j = check_signed(k), check_signed(j)
    val = gamma * coupling_g(k, j) * math.sqrt(abs(j / k)) * (0.5 + s * gamma / (4.0 * j))
    if abs(k) == abs(j):
        val -= s * k / 2.0
    return val


def coupling_v_sigma(s: int, k: int, sigma: int, j: int, sigma_p: int, gamma: float) -> float:
    """Four-index form ``v^s_{k sigma, j sigma'}`` for positive mode numbers ``k, j``."""
    if k < 1 or j < 1:
        raise ValueError("four-index form takes positive mode numbers")
    if sigma not in (1, -1) or sigma_p not in (1, -1):
        raise ValueError("sigma and sigma' must be +1 or -1")
    return coupling_v(s, sigma * k, sigma_p * j, gamma)


def g_matrix(K: int | Iterable[int]) -> np.ndarray:
    """``g_{kj}`` over positive modes (``1..K`` or an explicit list)."""
    pos = signed_modes(K)
    pos = pos[pos > 0]
    return np.array([[coupling_g(int(a), int(b)) for b in pos] for a in pos])


def drive_matrices(modes: int | Iterable[int], gamma: float, couple: bool = True):
    """Signed indices and the coefficient matrices ``v^+``, ``v^-`` of the drive.

    The first-order generator is ``omega_1 * sum_s v^s exp(s i Omega t)``.
    ``couple=False`` keeps only the ``|k| == |j|`` (frequency modulation)
    entries, i.e. independent parametric oscillators.
    """
    ks = signed_modes(modes)
    n = ks.size
    vp = np.zeros((n, n))
    vm = np.zeros((n, n))
    for a, k in enumerate(ks):
        for b, j in enumerate(ks):
            if not couple and abs(k) != abs(j):
                continue
            vp[a, b] = coupling_v(1, int(k), int(j), gamma)
            vm[a, b] = coupling_v(-1, int(k), int(j), gamma)
    return ks, vp, vm
