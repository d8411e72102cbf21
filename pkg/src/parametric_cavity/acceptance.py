"""Release criteria, runnable from the CLI (``validate``) and from pytest.

Each check returns a :class:`CriterionResult`; tolerances are fixed here.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .cavity_model import CavityConfig, default_truncation
from .floquet import arbitrate, build_recurrence_matrix, characteristic_exponents
from .mode_evolver import integrate, mathieu_growth_rate, numeric_spectrum
from .perturbation import particle_spectrum_perturbative

EPS = 1e-3
T_STOP = 100.0
SPECTRUM_GAMMAS = (2, 3, 4, 5, 6)
SPECTRUM_RTOL = 0.05
TAIL_FRACTION = 1e-2
EIG_ATOL = 1e-12
EIGVEC_RTOL = 1e-10
GAP_RATIO_RANGE = (3.0, 5.0)
UNITARITY_TOL = 1e-3
ORDER_RANGE = (3.5, 4.5)
TRUNCATION_RTOL = 1e-2


@dataclass
class CriterionResult:
    id: str
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.id:<3} {self.name}: {self.detail}"


@lru_cache(maxsize=None)
def _spectrum(gamma: int, K: int | None = None, steps_per_period: int = 64):
    cfg = CavityConfig(epsilon=EPS, gamma=gamma, K=K, T=T_STOP, steps_per_period=steps_per_period)
    spec, bog = numeric_spectrum(cfg, "linearized")
    return cfg, spec, bog


def spectrum_formula() -> CriterionResult:
    """1a: numeric N_k within 5% of (gamma-k)k(eps omega_1 T)^2/4 for k < gamma."""
    worst, values = 0.0, {}
    for g in SPECTRUM_GAMMAS:
        cfg, num, _ = _spectrum(g)
        pert = particle_spectrum_perturbative(cfg)
        rel = np.abs(num.N[: g - 1] / pert.N[: g - 1] - 1)
        values[g] = rel.tolist()
        worst = max(worst, float(rel.max()))
    return CriterionResult("1a", "spectrum formula, k < gamma", worst <= SPECTRUM_RTOL,
                           f"max rel diff {worst:.4f} (tol {SPECTRUM_RTOL})", values)


def spectrum_tail() -> CriterionResult:
    """1b: numeric N_k <= 1e-2 max N for k >= gamma."""
    values, bad = {}, []
    for g in SPECTRUM_GAMMAS:
        _, num, _ = _spectrum(g)
        ratio = float(num.N[g - 1 :].max() / num.N.max())
        values[g] = ratio
        if ratio > TAIL_FRACTION:
            bad.append(f"gamma={g}: {ratio:.4f}")
    detail = "tail/max " + ", ".join(f"{g}:{r:.4f}" for g, r in values.items()) + f" (tol {TAIL_FRACTION})"
    return CriterionResult("1b", "spectrum tail, k >= gamma", not bad, detail, values)


def dominant_mode_numeric() -> CriterionResult:
    """2: argmax of the numeric spectrum is gamma/2 or (gamma +- 1)/2."""
    values, ok = {}, True
    for g in SPECTRUM_GAMMAS:
        _, num, _ = _spectrum(g)
        k = int(np.argmax(num.N)) + 1
        values[g] = k
        ok &= (k == g // 2) if g % 2 == 0 else k in {(g - 1) // 2, (g + 1) // 2}
    return CriterionResult("2", "dominant mode", ok, "argmax " + ", ".join(f"{g}->{k}" for g, k in values.items()),
                           values)


def reference_eigenvector(mu: complex) -> np.ndarray:
    r3 = math.sqrt(3.0)
    return np.array([1.0, -2 * mu / r3, r3 / 2 + 2 * mu * mu / r3, mu + 4 * mu * (mu * mu - 1) / 3])


def printed_example() -> CriterionResult:
    """3: printed 4x4 eigenvalues and eigenvectors."""
    spec = characteristic_exponents(build_recurrence_matrix(2, variant="printed4x4", modes=(1, 3)))
    r2 = math.sqrt(2.0)
    expected = [complex(a * 1, a * b * r2) / 2 for a in (1, -1) for b in (1, -1)]
    eig_err, vec_res = 0.0, 0.0
    for mu in expected:
        a = int(np.argmin(np.abs(spec.exponents - mu)))
        eig_err = max(eig_err, abs(spec.exponents[a] - mu))
        p = reference_eigenvector(mu)
        c = spec.vectors[:, a]
        scale = np.vdot(p, c) / np.vdot(p, p)
        vec_res = max(vec_res, float(np.linalg.norm(c - scale * p) / np.linalg.norm(c)))
    ok = eig_err <= EIG_ATOL and vec_res <= EIGVEC_RTOL
    return CriterionResult("3", "printed 4x4 Floquet example", ok,
                           f"eigenvalue err {eig_err:.2e} (tol {EIG_ATOL:g}), eigenvector residual {vec_res:.2e}"
                           f" (tol {EIGVEC_RTOL:g})", {"eig_err": eig_err, "vec_res": vec_res})


@lru_cache(maxsize=None)
def _arbitration():
    return arbitrate(2, (8, 12), (1e-2, 5e-3), "linearized")


def arbitration_verdict() -> CriterionResult:
    """4a: verdict emitted and identical for K = 8 and 12."""
    arb = _arbitration()
    return CriterionResult("4a", "arbitration verdict stable", arb.stable,
                           f"verdicts {arb.verdicts}", {"verdicts": arb.verdicts})


def arbitration_gap_bound() -> CriterionResult:
    """4b: |gap| <= C eps^2 at both eps (C measured at eps = 1e-2), K = 8."""
    arb = _arbitration()
    var = arb.verdict or "eq44"
    C = arb.gap_constant[(8, var)]
    rows = [r for r in arb.rows if r.K == 8]
    ok = all(r.gap[var] <= C * r.epsilon ** 2 * (1 + 1e-12) for r in rows)
    gaps = {r.epsilon: r.gap[var] for r in rows}
    return CriterionResult("4b", "monodromy gap <= C eps^2", ok,
                           f"variant {var}, C = {C:.4g}, gaps {', '.join(f'{e:g}:{g:.3e}' for e, g in gaps.items())}",
                           {"C": C, "gaps": gaps})


def arbitration_gap_ratio() -> CriterionResult:
    """4c: gap(1e-2)/gap(5e-3) in [3, 5] for the selected variant, K = 8."""
    arb = _arbitration()
    var = arb.verdict or "eq44"
    ratio = arb.gap_ratio[(8, var)]
    lo, hi = GAP_RATIO_RANGE
    return CriterionResult("4c", "monodromy gap ratio (order eps^2)", lo <= ratio <= hi,
                           f"variant {var}, ratio {ratio:.3f} (range [{lo:g}, {hi:g}])", {"ratio": ratio})


def bogoliubov_unitarity() -> CriterionResult:
    """5: max_{k <= K/2} |sum_n (|alpha|^2 - |beta|^2) - 1| <= 1e-3 at K = 16."""
    values = {}
    for g in (2, 3, 4):
        _, _, bog = _spectrum(g, 16)
        values[g] = float(bog.unitarity_residual()[:8].max())
    worst = max(values.values())
    return CriterionResult("5", "Bogoliubov unitarity", worst <= UNITARITY_TOL,
                           f"max residual {worst:.2e} (tol {UNITARITY_TOL:g})", values)


def mathieu_check() -> CriterionResult:
    """6: single-mode growth rate peaks at gamma = 2k."""
    values, ok = {}, True
    for k in (1, 2):
        rates = {g: mathieu_growth_rate(k, g, 1e-2) for g in (2 * k - 0.5, 2 * k, 2 * k + 0.5)}
        values[k] = rates
        ok &= rates[2 * k] > max(rates[2 * k - 0.5], rates[2 * k + 0.5])
    detail = "; ".join(f"k={k}: " + ", ".join(f"{g:g}:{r:.2e}" for g, r in rates.items()) for k, rates in values.items())
    return CriterionResult("6", "Mathieu single-mode resonance", ok, detail, values)


def convergence_order(base: int = 32) -> CriterionResult:
    """7a: global RK error order from steps_per_period = base, 2 base, 4 base."""
    Xs = []
    for spp in (base, 2 * base, 4 * base):
        cfg = CavityConfig(epsilon=EPS, gamma=2, K=16, T=T_STOP, steps_per_period=spp)
        Xs.append(integrate(cfg, "linearized").X)
    e1 = np.abs(Xs[0] - Xs[1]).max()
    e2 = np.abs(Xs[1] - Xs[2]).max()
    order = math.log2(e1 / e2)
    lo, hi = ORDER_RANGE
    return CriterionResult("7a", "RK4 convergence order", lo <= order <= hi,
                           f"order {order:.3f} (range [{lo:g}, {hi:g}])", {"order": order})


def byte_identical() -> CriterionResult:
    """7b: two CLI runs with the same config give identical files."""
    from .cli import load_config, run_command

    run = load_config(None, ["T=20"])
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for name in ("a", "b"):
            out = Path(tmp) / name
            run_command("spectrum", run, out)
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = outs[0] == outs[1]
    return CriterionResult("7b", "byte-identical reruns", same, f"files {sorted(outs[0])}", {})


def truncation_stability() -> CriterionResult:
    """7c: N_k (k <= gamma) changes by < 1% when K grows by 50%."""
    values, worst, worst_res = {}, 0.0, 0.0
    for g in SPECTRUM_GAMMAS:
        K = default_truncation(g)
        _, a, _ = _spectrum(g)
        _, b, _ = _spectrum(g, int(math.ceil(1.5 * K)))
        rel = np.abs(b.N[:g] / a.N[:g] - 1)
        values[g] = rel.tolist()
        worst = max(worst, float(rel.max()))
        worst_res = max(worst_res, float(rel[: g - 1].max()))
    return CriterionResult("7c", "truncation stability K -> 1.5K", worst <= TRUNCATION_RTOL,
                           f"max rel change {worst:.4f} over k <= gamma (k < gamma: {worst_res:.1e}; tol "
                           f"{TRUNCATION_RTOL:g})", values)


CRITERIA = (
    spectrum_formula,
    spectrum_tail,
    dominant_mode_numeric,
    printed_example,
    arbitration_verdict,
    arbitration_gap_bound,
    arbitration_gap_ratio,
    bogoliubov_unitarity,
    mathieu_check,
    convergence_order,
    byte_identical,
    truncation_stability,
)


def run_all() -> list[CriterionResult]:
    return [check() for check in CRITERIA]


def format_table(results) -> str:
    lines = [r.line() for r in results]
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} criteria passed")
    return "\n".join(lines)
