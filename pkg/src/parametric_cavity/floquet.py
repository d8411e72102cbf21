"""Long-time behaviour from first-order Floquet exponents.

Writing ``X_k(t) = exp(eps mu omega_1 t) C_k exp(i k omega_1 t)`` and removing
secular terms gives the three-term recurrence

    v^-_{k,k+gamma} C_{k+gamma} - mu C_k + v^+_{k,k-gamma} C_{k-gamma} = 0,

i.e. ``(A - mu I) C = 0`` on the signed window ``-K..-1, 1..K``. The
characteristic exponents are the eigenvalues of ``A``. Two fillings of ``A``
are supported: ``eq44`` evaluates the drive coefficients literally, while
``printed4x4`` doubles the ``|k| == |j|`` entries so the published 4x4 gamma=2
example is reproduced. :func:`arbitrate` decides between them against the
monodromy matrix of the integrated dynamics.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cavity_model import CavityConfig, Variant, coupling_v, is_integer_gamma, signed_modes
from .mode_evolver import monodromy

RecurrenceVariant = Literal["eq44", "printed4x4"]
RECURRENCE_VARIANTS: tuple[str, ...] = ("eq44", "printed4x4")


class EigenSolverError(RuntimeError):
    """Eigenpairs could not be refined to the residual target."""

    def __init__(self, message, exponents=None, residuals=None):
        super().__init__(message)
        self.exponents = exponents
        self.residuals = residuals


class IllConditionedError(RuntimeError):
    """Eigenvector matrix too close to singular (degenerate exponents)."""


class BranchAmbiguityError(RuntimeError):
    def __init__(self, message, candidates):
        super().__init__(message)
        self.candidates = candidates


@dataclass
class RecurrenceMatrix:
    gamma: int
    modes: np.ndarray
    variant: str
    A: np.ndarray

    @property
    def ks(self) -> np.ndarray:
        return signed_modes(self.modes)

    def M(self, mu: complex) -> np.ndarray:
        return self.A - mu * np.eye(self.A.shape[0])


@dataclass
class FloquetSpectrum:
    exponents: np.ndarray
    vectors: np.ndarray  # column A is C^A over signed indices
    residuals: np.ndarray
    recurrence: RecurrenceMatrix
    combination: np.ndarray | None = None  # row per signed n, column per A

    @property
    def ks(self) -> np.ndarray:
        return self.recurrence.ks


def build_recurrence_matrix(
    gamma: float,
    K: int | None = None,
    variant: RecurrenceVariant = "eq44",
    modes: Iterable[int] | None = None,
) -> RecurrenceMatrix:
    """Fill ``A`` with ``A[k, k+gamma] = v^-_{k,k+gamma}``, ``A[k, k-gamma] = v^+_{k,k-gamma}``.

    Couplings leaving the window are dropped. ``modes`` selects an explicit
    set of positive modes instead of ``1..K``.
    """
    if not is_integer_gamma(gamma) or gamma < 1:
        raise ValueError(f"recurrence needs a positive integer gamma, got {gamma!r}")
    if variant not in RECURRENCE_VARIANTS:
        raise ValueError(f"unknown recurrence variant {variant!r}")
    g = int(gamma)
    if modes is None:
        if K is None:
            raise ValueError("give K or modes")
        if K < g:
            raise ValueError(f"K = {K} < gamma = {g}: window holds no coupled pair")
        pos = np.arange(1, K + 1)
    else:
        pos = np.asarray(sorted(modes), dtype=int)
    ks = signed_modes(pos)
    where = {int(k): a for a, k in enumerate(ks)}
    A = np.zeros((ks.size, ks.size))
    for a, k in enumerate(ks):
        k = int(k)
        for s, j in ((-1, k + g), (1, k - g)):
            b = where.get(j)
            if b is None:
                continue
            val = coupling_v(s, k, j, g)
            if variant == "printed4x4" and abs(j) == abs(k):
                val *= 2.0
            A[a, b] = val
    return RecurrenceMatrix(g, pos, variant, A)


def _sort_key(mu: np.ndarray, scale: float):
    re = np.round(mu.real / scale, 10)
    im = np.round(mu.imag / scale, 10)
    return np.lexsort((-im, -re))


def _refine(A, mu, c, target, max_iter):
    n = A.shape[0]
    c = c / np.linalg.norm(c)
    r = np.linalg.norm(A @ c - mu * c)
    it = 0
    while r > target and it < max_iter:
        # shifted slightly off the eigenvalue so the solve stays nonsingular
        shift = mu + target * (1 + 1j)
        y = np.linalg.solve(A - shift * np.eye(n), c)
        c = y / np.linalg.norm(y)
        mu = np.vdot(c, A @ c)
        r = np.linalg.norm(A @ c - mu * c)
        it += 1
    return mu, c, r


def characteristic_exponents(rec: RecurrenceMatrix, rtol: float = 1e-10, max_iter: int = 20) -> FloquetSpectrum:
    """All eigenpairs of ``A``, refined by inverse iteration until ``||(A - mu) C|| <= rtol ||A||``.

    Exponents are sorted by real part, then imaginary part, both descending.
    Eigenvectors are normalised to unit 2-norm.
    """
    A = rec.A
    if not np.isfinite(A).all():
        raise ValueError("recurrence matrix has non-finite entries")
    scale = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    mu, C = np.linalg.eig(A)
    mu = mu.astype(complex)
    C = C.astype(complex)
    res = np.empty(mu.size)
    for a in range(mu.size):
        mu[a], C[:, a], res[a] = _refine(A, mu[a], C[:, a], rtol * scale, max_iter)
    order = _sort_key(mu, scale)
    mu, C, res = mu[order], C[:, order], res[order]
    if np.any(res > rtol * scale):
        raise EigenSolverError(
            f"eigenpair residual {res.max():.3g} above {rtol:g}*||A|| after {max_iter} refinement steps", mu, res
        )
    return FloquetSpectrum(mu, C, res, rec)


def solve_initial_coefficients(spec: FloquetSpectrum, n: int, cond_limit: float = 1e12) -> np.ndarray:
    """Solve ``sum_A d_A C^A_k = delta_{nk} [n < 0]`` over signed ``k``.

    A negative label ``n = -m`` is the ``sigma = -`` excitation of mode ``m``;
    positive labels give the zero right-hand side.
    """
    ks = spec.ks
    if n == 0 or n not in ks:
        raise ValueError(f"label {n} not in the window {ks.min()}..{ks.max()}")
    cond = np.linalg.cond(spec.vectors)
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditionedError(f"eigenvector matrix condition number {cond:.3g} > {cond_limit:g}; degenerate exponents")
    rhs = np.zeros(ks.size, dtype=complex)
    if n < 0:
        rhs[int(np.flatnonzero(ks == n)[0])] = 1.0
    return np.linalg.solve(spec.vectors, rhs)


def with_combination(spec: FloquetSpectrum) -> FloquetSpectrum:
    """Copy of ``spec`` with ``combination`` filled for every signed label."""
    d = np.array([solve_initial_coefficients(spec, int(n)) for n in spec.ks])
    return dataclasses.replace(spec, combination=d)


def evaluate_solution(spec: FloquetSpectrum, d: np.ndarray, t: float, cfg: CavityConfig) -> np.ndarray:
    """``X_k(t) = sum_A d_A exp(eps mu_A omega_1 t) C^A_k exp(i k omega_1 t)``."""
    w1 = cfg.omega_1
    amp = d * np.exp(cfg.epsilon * spec.exponents * w1 * t)
    return (spec.vectors @ amp) * np.exp(1j * spec.ks * w1 * t)


def particle_numbers(spec: FloquetSpectrum, t: float, cfg: CavityConfig) -> np.ndarray:
    """``N_k(t) = sum_m |X_{-m,+k}(t)|^2`` for ``k = 1..K`` (vacuum start).

    ``X_{-m,+k}`` plays the role of ``|beta_{mk}(t)|`` in the Floquet solution.
    """
    if spec.combination is None:
        spec = with_combination(spec)
    ks = spec.ks
    neg = np.flatnonzero(ks < 0)
    pos = np.flatnonzero(ks > 0)
    w1 = cfg.omega_1
    amp = spec.combination[neg] * np.exp(cfg.epsilon * spec.exponents * w1 * t)[None, :]
    X = amp @ spec.vectors.T * np.exp(1j * ks * w1 * t)[None, :]
    return (np.abs(X[:, pos]) ** 2).sum(axis=0)


# ---------------------------------------------------------------------------
# monodromy oracle
# ---------------------------------------------------------------------------

def _unwrap(nu: complex, target_im: float, Omega: float, tol: float):
    x = (target_im - nu.imag) / Omega
    m = round(x)
    ambiguous = abs(abs(x - math.floor(x)) - 0.5) < tol
    return nu + 1j * m * Omega, ambiguous


def floquet_exponents_from_monodromy(
    cfg: CavityConfig,
    variant: Variant = "linearized",
    ramp_steps: int = 4,
    tol: float = 1e-9,
) -> np.ndarray:
    """Floquet exponents ``log(multiplier) / tau`` on continuous branches.

    Returns one exponent per signed index ``k`` of the window, the one that
    continues from ``i k omega_1`` at ``eps = 0``. The continuation runs over
    ``eps / 2^ramp_steps, ..., eps / 2, eps``; each step pairs the new
    eigenpairs with the previous ones (multiplier distance plus eigenvector
    overlap, optimal assignment) and chooses the ``2 pi / tau`` branch nearest
    the predecessor.
    """
    if ramp_steps < 4:
        raise ValueError("branch continuation needs at least 4 ramp steps")
    ks = signed_modes(cfg.K)
    w1, Om, tau = cfg.omega_1, cfg.Omega, cfg.period
    prev_nu = 1j * ks * w1
    if cfg.epsilon == 0:
        return prev_nu
    prev_vec = np.eye(ks.size, dtype=complex)
    for i in range(ramp_steps + 1):
        e = cfg.epsilon * 2.0 ** (i - ramp_steps)
        phi = monodromy(dataclasses.replace(cfg, epsilon=e, T=math.inf), variant)
        lam, vec = np.linalg.eig(phi)
        vec = vec / np.linalg.norm(vec, axis=0)
        prev_lam = np.exp(prev_nu * tau)
        cost = np.abs(lam[:, None] - prev_lam[None, :]) + (1 - np.abs(vec.conj().T @ prev_vec))
        rows, cols = linear_sum_assignment(cost)
        nu = np.log(lam) / tau
        new_nu = np.empty_like(prev_nu)
        new_vec = np.empty_like(prev_vec)
        for r, c in zip(rows, cols):
            val, amb = _unwrap(nu[r], prev_nu[c].imag, Om, tol)
            best = np.argsort(cost[r])[:2]
            isolated = np.sum(np.abs(lam - lam[r]) < tol) == 1
            tie = best.size > 1 and cost[r, best[1]] - cost[r, best[0]] < tol
            # a tie between degenerate predecessors is a labelling choice:
            # the candidates then differ by a multiple of i Omega
            distinct = best.size > 1 and abs(prev_lam[best[0]] - prev_lam[best[1]]) > tol
            if amb or (isolated and tie and distinct):
                cands = [complex(_unwrap(nu[r], prev_nu[j].imag, Om, tol)[0]) for j in best]
                if amb or abs(cands[0] - cands[1]) > tol:
                    raise BranchAmbiguityError(
                        f"branch of multiplier {lam[r]:.6g} ambiguous at eps = {e:.3g}", cands
                    )
            new_nu[c] = val
            new_vec[:, c] = vec[:, r]
        prev_nu, prev_vec = new_nu, new_vec
    return prev_nu


@dataclass
class ArbitrationRow:
    K: int
    epsilon: float
    monodromy_max_re: float
    recurrence_max_re: dict  # variant -> max Re mu_1 (unscaled)
    gap: dict  # variant -> |monodromy - eps omega_1 max Re mu_1|


@dataclass
class Arbitration:
    gamma: int
    dynamics: str
    rows: list
    verdicts: dict  # K -> variant
    gap_ratio: dict  # (K, variant) -> gap(eps_0) / gap(eps_1)
    gap_constant: dict  # (K, variant) -> gap(eps_0) / eps_0^2

    @property
    def stable(self) -> bool:
        return len(set(self.verdicts.values())) == 1

    @property
    def verdict(self) -> str | None:
        return next(iter(self.verdicts.values())) if self.stable else None

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "dynamics": self.dynamics,
            "verdict": self.verdict,
            "stable": self.stable,
            "verdicts": {str(k): v for k, v in self.verdicts.items()},
            "gap_ratio": {f"K={k},{v}": r for (k, v), r in self.gap_ratio.items()},
            "gap_constant": {f"K={k},{v}": c for (k, v), c in self.gap_constant.items()},
            "rows": [dataclasses.asdict(r) for r in self.rows],
        }


def arbitrate(
    gamma: int = 2,
    Ks: Sequence[int] = (8, 12),
    epsilons: Sequence[float] = (1e-2, 5e-3),
    dynamics: Variant = "linearized",
    steps_per_period: int = 64,
    L0: float = math.pi,
) -> Arbitration:
    """Compare ``eps omega_1 max Re mu_1`` of each recurrence variant with the monodromy oracle.

    The verdict for each ``K`` is the variant with the smaller gap at the
    smallest ``eps``.
    """
    rows = []
    verdicts, ratio, const = {}, {}, {}
    for K in Ks:
        rec_re = {}
        for var in RECURRENCE_VARIANTS:
            spec = characteristic_exponents(build_recurrence_matrix(gamma, K, var))
            rec_re[var] = float(spec.exponents.real.max())
        gaps = {var: [] for var in RECURRENCE_VARIANTS}
        for eps in epsilons:
            cfg = CavityConfig(L0=L0, epsilon=eps, gamma=gamma, K=K, T=math.inf, steps_per_period=steps_per_period)
            mono = float(floquet_exponents_from_monodromy(cfg, dynamics).real.max())
            gap = {var: abs(mono - eps * cfg.omega_1 * rec_re[var]) for var in RECURRENCE_VARIANTS}
            for var in RECURRENCE_VARIANTS:
                gaps[var].append(gap[var])
            rows.append(ArbitrationRow(K, eps, mono, dict(rec_re), gap))
        i_small = int(np.argmin(epsilons))
        verdicts[K] = min(RECURRENCE_VARIANTS, key=lambda v: gaps[v][i_small])
        for var in RECURRENCE_VARIANTS:
            ratio[(K, var)] = gaps[var][0] / gaps[var][1] if len(epsilons) > 1 and gaps[var][1] > 0 else math.nan
            const[(K, var)] = gaps[var][0] / epsilons[0] ** 2
    return Arbitration(int(gamma), dynamics, rows, verdicts, ratio, const)
