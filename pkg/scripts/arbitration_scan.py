"""Gap between monodromy exponents and both recurrence fillings as eps shrinks.

Extends the two-point arbitration to a geometric eps ladder, so the order of
the gap can be read off directly.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from parametric_cavity.cavity_model import CavityConfig
from parametric_cavity.floquet import (
    RECURRENCE_VARIANTS,
    build_recurrence_matrix,
    characteristic_exponents,
    floquet_exponents_from_monodromy,
)
from parametric_cavity.jsonio import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=int, default=2)
    ap.add_argument("--K", type=int, nargs="+", default=[8, 12])
    ap.add_argument("--epsilons", type=float, nargs="+", default=[2e-2, 1e-2, 5e-3, 2.5e-3])
    ap.add_argument("--dynamics", choices=("linearized", "exact"), default="linearized")
    ap.add_argument("--out", type=Path, default=Path("results/arbitration_scan.csv"))
    args = ap.parse_args()

    rows = []
    for K in args.K:
        rec = {v: characteristic_exponents(build_recurrence_matrix(args.gamma, K, v)).exponents.real.max()
               for v in RECURRENCE_VARIANTS}
        prev = {}
        for eps in args.epsilons:
            cfg = CavityConfig(epsilon=eps, gamma=args.gamma, K=K, T=math.inf)
            mono = floquet_exponents_from_monodromy(cfg, args.dynamics).real.max()
            for v in RECURRENCE_VARIANTS:
                gap = abs(mono - eps * cfg.omega_1 * rec[v])
                order = math.log(prev[v][1] / gap) / math.log(prev[v][0] / eps) if v in prev else np.nan
                prev[v] = (eps, gap)
                rows.append((K, eps, v, mono, gap, order))
                print(f"K={K} eps={eps:g} {v}: gap={gap:.3e} local order={order:.2f}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(args.out, ("K", "epsilon", "variant", "monodromy_max_re", "gap", "local_order"), rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
