"""Command-line experiment runner.

    parametric-cavity spectrum --config run.json --out results/
    parametric-cavity floquet --set gamma=2 --variant both --out results/
    parametric-cavity evolve --set T=50 --out results/
    parametric-cavity validate

Config is one JSON document with a ``physical`` block (``L0``, ``epsilon``,
``gamma``, ``T``) and an optional ``numerical`` block; see
``configs/default.json``. ``--set key=value`` overrides any field, addressed
either as ``block.key`` or by its bare name.

Exit codes: 0 success, 1 configuration error or failed validation,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .cavity_model import CavityConfig, is_integer_gamma
from .floquet import (
    RECURRENCE_VARIANTS,
    BranchAmbiguityError,
    EigenSolverError,
    IllConditionedError,
    arbitrate,
    build_recurrence_matrix,
    characteristic_exponents,
    floquet_exponents_from_monodromy,
    particle_numbers,
    with_combination,
)
from .jsonio import write_csv, write_json
from .mode_evolver import IntegrationError, extract_bogoliubov, numeric_spectrum, trajectory
from .perturbation import SHORT_TIME_LIMIT, particle_spectrum_perturbative

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

REQUIRED_PHYSICAL = ("epsilon", "gamma", "T")
PHYSICAL_DEFAULTS = {"L0": math.pi}
NUMERICAL_DEFAULTS = {
    "K": None,
    "steps_per_period": 64,
    "dynamics": "linearized",
    "variant": "both",
    "floquet_K": [8, 12],
    "floquet_epsilons": [0.01, 0.005],
    "samples": 101,
}
DEFAULT_DOCUMENT = {"physical": {"L0": math.pi, "epsilon": 1e-3, "gamma": 2.0, "T": 100.0}, "numerical": {}}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    cavity: CavityConfig
    dynamics: str = "linearized"
    variant: str = "both"
    floquet_K: tuple = (8, 12)
    floquet_epsilons: tuple = (0.01, 0.005)
    samples: int = 101

    @property
    def variants(self) -> tuple[str, ...]:
        return RECURRENCE_VARIANTS if self.variant == "both" else (self.variant,)

    def to_dict(self) -> dict:
        c = self.cavity
        return {
            "physical": {"L0": c.L0, "epsilon": c.epsilon, "gamma": c.gamma, "T": c.T},
            "numerical": {
                "K": c.K,
                "steps_per_period": c.steps_per_period,
                "dynamics": self.dynamics,
                "variant": self.variant,
                "floquet_K": list(self.floquet_K),
                "floquet_epsilons": list(self.floquet_epsilons),
                "samples": self.samples,
            },
        }


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides) -> dict:
    doc = {"physical": dict(doc.get("physical", {})), "numerical": dict(doc.get("numerical", {}))}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if "." in key:
            block, name = key.split(".", 1)
            if block not in doc:
                raise ConfigError(f"--set {key}: unknown block {block!r}")
        elif key in PHYSICAL_DEFAULTS or key in REQUIRED_PHYSICAL:
            block, name = "physical", key
        elif key in NUMERICAL_DEFAULTS:
            block, name = "numerical", key
        else:
            raise ConfigError(f"--set {key}: unknown field")
        doc[block][name] = _parse_value(raw)
    return doc


def _number(block: dict, name: str, where: str):
    val = block[name]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"field {where}.{name}: expected a number, got {val!r}")
    return float(val)


def parse_config(doc: dict) -> RunConfig:
    """Validate a config document and build the run configuration."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - {"physical", "numerical"}
    if unknown:
        raise ConfigError(f"unknown top-level block(s): {sorted(unknown)}")
    phys = doc.get("physical")
    if not isinstance(phys, dict):
        raise ConfigError("missing required block 'physical'")
    num = doc.get("numerical", {}) or {}
    for name in REQUIRED_PHYSICAL:
        if name not in phys:
            raise ConfigError(f"missing required field physical.{name}")
    for name in set(phys) - set(REQUIRED_PHYSICAL) - set(PHYSICAL_DEFAULTS):
        raise ConfigError(f"unknown field physical.{name}")
    for name in set(num) - set(NUMERICAL_DEFAULTS):
        raise ConfigError(f"unknown field numerical.{name}")
    p = {**PHYSICAL_DEFAULTS, **phys}
    n = {**NUMERICAL_DEFAULTS, **num}
    values = {k: _number(p, k, "physical") for k in p}
    K = n["K"]
    if K is not None and (isinstance(K, bool) or not isinstance(K, (int, float)) or int(K) != K):
        raise ConfigError(f"field numerical.K: expected an integer or null, got {K!r}")
    try:
        cavity = CavityConfig(
            L0=values["L0"], epsilon=values["epsilon"], gamma=values["gamma"], T=values["T"],
            K=None if K is None else int(K), steps_per_period=n["steps_per_period"],
        )
    except (ValueError, TypeError) as err:
        raise ConfigError(f"invalid physical/numerical parameters: {err}") from None
    if not math.isfinite(cavity.T):
        raise ConfigError("field physical.T: must be finite")
    if n["dynamics"] not in ("linearized", "exact"):
        raise ConfigError(f"field numerical.dynamics: expected 'linearized' or 'exact', got {n['dynamics']!r}")
    if n["variant"] not in (*RECURRENCE_VARIANTS, "both"):
        raise ConfigError(f"field numerical.variant: expected eq44, printed4x4 or both, got {n['variant']!r}")
    fK = n["floquet_K"]
    if not isinstance(fK, list) or not fK or any(isinstance(k, bool) or not isinstance(k, int) or k < 1 for k in fK):
        raise ConfigError(f"field numerical.floquet_K: expected a non-empty list of positive integers, got {fK!r}")
    fe = n["floquet_epsilons"]
    if (not isinstance(fe, list) or len(fe) < 2
            or any(isinstance(e, bool) or not isinstance(e, (int, float)) or not 0 < e < 1 for e in fe)):
        raise ConfigError(f"field numerical.floquet_epsilons: expected >= 2 numbers in (0, 1), got {fe!r}")
    samples = n["samples"]
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 2:
        raise ConfigError(f"field numerical.samples: expected an integer >= 2, got {samples!r}")
    return RunConfig(cavity, n["dynamics"], n["variant"], tuple(fK), tuple(float(e) for e in fe), samples)


def load_config(path: str | None, overrides=(), variant: str | None = None) -> RunConfig:
    if path is None:
        doc = DEFAULT_DOCUMENT
    else:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    doc = apply_overrides(doc, overrides)
    if variant is not None:
        doc["numerical"]["variant"] = variant
    return parse_config(doc)


# ---------------------------------------------------------------------------
# commands: each returns (report, {filename: (header, rows)})
# ---------------------------------------------------------------------------

def _report_head(command: str, run: RunConfig) -> dict:
    return {"tool": {"name": "parametric-cavity", "version": __version__}, "command": command, "config": run.to_dict()}


def _perturbative(cfg: CavityConfig):
    if not is_integer_gamma(cfg.gamma):
        return None, "gamma is not an integer: no closed-form resonance result"
    x = cfg.epsilon * cfg.omega_1 * cfg.T
    if x > SHORT_TIME_LIMIT:
        return None, f"eps*omega_1*T = {x:.6g} > {SHORT_TIME_LIMIT}: outside the short-time regime"
    import warnings

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        spec = particle_spectrum_perturbative(cfg)
    note = str(caught[0].message) if caught else None
    return spec, note


def _bogoliubov_summary(bog) -> dict:
    res = bog.unitarity_residual()
    K = res.size
    return {
        "T": bog.T,
        "alpha_frobenius": float(np.linalg.norm(bog.alpha)),
        "beta_frobenius": float(np.linalg.norm(bog.beta)),
        "unitarity_residual_lower_half_max": float(res[: max(1, K // 2)].max()),
        "unitarity_residual": res,
    }


def cmd_spectrum(run: RunConfig):
    cfg = run.cavity
    numeric, bog = numeric_spectrum(cfg, run.dynamics)
    pert, note = _perturbative(cfg)
    rows = []
    for i in range(cfg.K):
        nn = float(numeric.N[i])
        if pert is None:
            pn, rel = math.nan, math.nan
        else:
            pn = float(pert.N[i])
            rel = abs(nn - pn) / pn if pn > 0 else math.nan
        rows.append((i + 1, pn, nn, rel))
    report = _report_head("spectrum", run)
    report["spectra"] = {
        "numeric": {"method": "numeric", "dynamics": run.dynamics, "N": numeric.N},
        "perturbative": None if pert is None else {"method": "perturbative", "N": pert.N},
        "perturbative_note": note,
    }
    report["bogoliubov"] = _bogoliubov_summary(bog)
    return report, {"spectrum.csv": (("k", "N_k_perturbative", "N_k_numeric", "rel_diff"), rows)}


def cmd_evolve(run: RunConfig):
    cfg = run.cavity
    nsteps = math.ceil(cfg.T / cfg.step - 1e-9)
    every = max(1, nsteps // (run.samples - 1))
    states = trajectory(cfg, run.dynamics, every=every)
    rows = []
    for st in states:
        N = (np.abs(st.plus()) ** 2).sum(axis=0)
        rows.append((st.t, *N))
    bog = extract_bogoliubov(states[-1], cfg)
    report = _report_head("evolve", run)
    report["bogoliubov"] = _bogoliubov_summary(bog)
    report["spectra"] = {"numeric": {"method": "numeric", "dynamics": run.dynamics,
                                     "N": (np.abs(bog.beta) ** 2).sum(axis=0)}}
    header = ("t", *(f"N_{k}" for k in range(1, cfg.K + 1)))
    return report, {"timeseries.csv": (header, rows)}


def cmd_floquet(run: RunConfig):
    cfg = run.cavity
    if not is_integer_gamma(cfg.gamma):
        raise ConfigError("floquet: the recurrence needs an integer gamma")
    g = int(cfg.gamma)
    exp_rows = []
    summary = {}
    specs = {}
    for var in run.variants:
        minimal = characteristic_exponents(build_recurrence_matrix(g, variant=var, modes=(1, 1 + g)))
        full = characteristic_exponents(build_recurrence_matrix(g, cfg.K, var))
        specs[var] = full
        for a, mu in enumerate(minimal.exponents):
            exp_rows.append(("recurrence-minimal", var, 1 + g, math.nan, a, mu.real, mu.imag))
        for a, mu in enumerate(full.exponents):
            exp_rows.append(("recurrence", var, cfg.K, math.nan, a, mu.real, mu.imag))
        summary[var] = {
            "minimal_modes": [1, 1 + g],
            "minimal_exponents": minimal.exponents,
            "max_re_mu1": float(full.exponents.real.max()),
            "max_residual": float(full.residuals.max()),
        }
    mono_cfg = dataclasses.replace(cfg, T=math.inf)
    mono = floquet_exponents_from_monodromy(mono_cfg, run.dynamics) if cfg.epsilon > 0 else None
    if mono is not None:
        ks = np.concatenate([np.arange(-cfg.K, 0), np.arange(1, cfg.K + 1)])
        scaled = (mono - 1j * ks * cfg.omega_1) / (cfg.epsilon * cfg.omega_1)
        for k, mu in zip(ks, scaled):
            exp_rows.append(("monodromy", run.dynamics, cfg.K, cfg.epsilon, int(k), mu.real, mu.imag))
    arb = arbitrate(g, run.floquet_K, run.floquet_epsilons, run.dynamics, cfg.steps_per_period, cfg.L0)
    arb_rows = []
    Kfirst, Klast = run.floquet_K[0], run.floquet_K[-1]
    for row in arb.rows:
        for var in RECURRENCE_VARIANTS:
            r0 = next(r for r in arb.rows if r.K == Kfirst).recurrence_max_re[var]
            r1 = next(r for r in arb.rows if r.K == Klast).recurrence_max_re[var]
            drift = abs(r1 - r0) / abs(r0) if r0 else math.nan
            arb_rows.append((row.K, row.epsilon, var, row.monodromy_max_re,
                             row.epsilon * cfg.omega_1 * row.recurrence_max_re[var], row.gap[var],
                             arb.gap_ratio[(row.K, var)], arb.gap_constant[(row.K, var)], drift))
    chosen = arb.verdict or "eq44"
    spec = with_combination(specs.get(chosen) or characteristic_exponents(build_recurrence_matrix(g, cfg.K, chosen)))
    times = np.linspace(0.0, cfg.T, run.samples)
    ts_rows = [(t, *particle_numbers(spec, t, cfg)) for t in times]
    report = _report_head("floquet", run)
    report["floquet"] = {
        "recurrence": summary,
        "monodromy_max_re": None if mono is None else float(mono.real.max()),
        "arbitration": arb.to_dict(),
        "timeseries_variant": chosen,
    }
    files = {
        "exponents.csv": (("source", "variant", "K", "epsilon", "label", "mu_re", "mu_im"), exp_rows),
        "arbitration.csv": (("K", "epsilon", "variant", "monodromy_max_re", "scaled_recurrence_max_re", "gap",
                             "gap_ratio", "gap_constant", "K_drift"), arb_rows),
        "timeseries.csv": (("t", *(f"N_{k}" for k in range(1, cfg.K + 1))), ts_rows),
    }
    return report, files


COMMANDS = {"spectrum": cmd_spectrum, "evolve": cmd_evolve, "floquet": cmd_floquet}


def write_outputs(out: Path, report: dict, files: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in files.items():
        write_csv(out / name, header, rows)
    write_json(out / "report.json", report)


def run_command(command: str, run: RunConfig, out: Path, timing: bool = False) -> dict:
    t0 = time.perf_counter()
    report, files = COMMANDS[command](run)
    if timing:
        report["timing_seconds"] = time.perf_counter() - t0
    write_outputs(out, report, files)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parametric-cavity", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("spectrum", "perturbative vs numeric photon spectrum"),
        ("evolve", "photon numbers along the integration"),
        ("floquet", "characteristic exponents, monodromy oracle and arbitration"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file (default: built-in gamma=2 example)")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field")
        p.add_argument("--variant", choices=(*RECURRENCE_VARIANTS, "both"))
        p.add_argument("--timing", action="store_true", help="record wall-clock time in report.json")
    sub.add_parser("validate", help="run the acceptance criteria")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        from .acceptance import format_table, run_all

        results = run_all()
        print(format_table(results))
        return EXIT_OK if all(r.passed for r in results) else EXIT_CONFIG
    try:
        run = load_config(args.config, args.set, args.variant)
        run_command(args.command, run, Path(args.out), args.timing)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, EigenSolverError, IllConditionedError, BranchAmbiguityError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {args.command} results to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
