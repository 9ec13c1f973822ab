"""Temporal convergence of the implicit and semi-explicit order-2 schemes on the FEM benchmark.

    python3 scripts/poro_convergence.py --n 32 --out results/poro.csv
"""

import argparse
import csv
import os

from semiexplicit.harness import DEFAULT_PORO_TAUS, build_poro_benchmark, convergence_study, reference_solution
from semiexplicit.integrators import SchemeKind


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--ref-factor", type=int, default=8, help="reference step is min(tau) / factor")
    ap.add_argument("--out", default="results/poro_convergence.csv")
    a = ap.parse_args()

    sys_ = build_poro_benchmark(a.n)
    ref = reference_solution(sys_, sys_.T, min(DEFAULT_PORO_TAUS) / a.ref_factor)
    os.makedirs(os.path.dirname(a.out) or ".", exist_ok=True)
    with open(a.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "tau", "rel_err_p", "rel_err_u"])
        for scheme in (SchemeKind.ImplicitBdf2, SchemeKind.SemiExplicit2):
            tab = convergence_study(sys_, scheme, DEFAULT_PORO_TAUS, ref)
            for tau, ep, eu in zip(tab.taus, tab.err_p, tab.err_u):
                w.writerow([scheme.value, f"{tau:.17g}", f"{ep:.17g}", f"{eu:.17g}"])
            print(f"{scheme.value:16s} slope p {tab.slope_p:.3f}  u {tab.slope_u:.3f}")
    print("wrote", a.out)


if __name__ == "__main__":
    main()
