"""Closed-form first-order results for an exactly resonant drive (integer gamma)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .cavity_model import CavityConfig, coupling_v, is_integer_gamma
from .mode_evolver import ParticleSpectrum

#: Warn above this value of ``eps * omega_1 * T``, refuse above the second.
SHORT_TIME_WARN = 0.3
SHORT_TIME_LIMIT = 1.0


class ShortTimeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ResonanceEntry:
    branch: str  # "gamma-n" (beta), "n+gamma" or "n-gamma" (alpha)
    n: int
    k: int
    s: int
    sigma: int
    v: float


@dataclass
class ResonanceTable:
    gamma: int
    K: int
    entries: list[ResonanceEntry] = field(default_factory=list)

    def branch(self, name: str) -> list[ResonanceEntry]:
        return [e for e in self.entries if e.branch == name]


def _require_integer_gamma(gamma: float) -> int:
    if not is_integer_gamma(gamma) or gamma < 1:
        raise ValueError(
            f"closed-form resonance results need an exactly resonant drive (positive integer gamma), got {gamma!r}"
        )
    return int(gamma)


# (branch name, s, sigma, k as a function of n and gamma)
_BRANCHES = (
    ("gamma-n", +1, +1, lambda n, g: g - n),
    ("n+gamma", -1, -1, lambda n, g: n + g),
    ("n-gamma", +1, -1, lambda n, g: n - g),
)


def resonance_table(gamma: float, K: int) -> ResonanceTable:
    """All ``(n, k)`` inside ``1..K`` whose first-order term grows secularly.

    The secular condition ``sigma k - s gamma + n = 0`` has three solutions
    with positive ``k``: ``k = gamma - n`` (``sigma=+, s=+``, feeds beta),
    ``k = n + gamma`` (``sigma=-, s=-``) and ``k = n - gamma``
    (``sigma=-, s=+``), the latter two feeding alpha.
    """
    g = _require_integer_gamma(gamma)
    table = ResonanceTable(g, K)
    for name, s, sigma, kfun in _BRANCHES:
        for n in range(1, K + 1):
            k = kfun(n, g)
            if 1 <= k <= K:
                v = coupling_v(s, sigma * k, -n, g)
                table.entries.append(ResonanceEntry(name, n, k, s, sigma, v))
    return table


def _check_short_time(x: float):
    if x > SHORT_TIME_LIMIT:
        raise ValueError(
            f"eps*omega_1*T = {x:.3g} > {SHORT_TIME_LIMIT}: outside the short-time regime of the first-order formula"
        )
    if x > SHORT_TIME_WARN:
        warnings.warn(f"eps*omega_1*T = {x:.3g} exceeds {SHORT_TIME_WARN}; first-order result is unreliable",
                      ShortTimeWarning, stacklevel=3)


def beta_first_order(n: int, k: int, cfg: CavityConfig) -> float:
    """``eps omega_1 T v^+_{k+, n-}`` on the branch ``k = gamma - n``, zero elsewhere."""
    g = _require_integer_gamma(cfg.gamma)
    if n < 1 or k < 1:
        raise ValueError("mode numbers must be positive")
    if k != g - n:
        return 0.0
    return cfg.epsilon * cfg.omega_1 * cfg.T * coupling_v(1, k, -n, g)


def particle_spectrum_perturbative(cfg: CavityConfig) -> ParticleSpectrum:
    """``N_k = (gamma - k) k (eps omega_1 T)^2 / 4`` for ``k < gamma``, zero otherwise."""
    g = _require_integer_gamma(cfg.gamma)
    x = cfg.epsilon * cfg.omega_1 * cfg.T
    _check_short_time(x)
    k = np.arange(1, cfg.K + 1)
    N = np.where(k < g, 0.25 * (g - k) * k * x * x, 0.0)
    return ParticleSpectrum(N, "perturbative", cfg.to_dict())


def dominant_mode(gamma: int) -> set[int]:
    """Modes receiving the most photons: ``{gamma/2}`` or ``{(gamma-1)/2, (gamma+1)/2}``."""
    g = _require_integer_gamma(gamma)
    if g < 2:
        raise ValueError("gamma = 1 creates no photons at first order; no dominant mode")
    if g % 2 == 0:
        return {g // 2}
    return {(g - 1) // 2, (g + 1) // 2}
