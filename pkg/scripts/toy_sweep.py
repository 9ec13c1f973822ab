"""Error landscape over coupling strength and step size for the toy problem.

    python3 scripts/toy_sweep.py --order 2 --threads 4
"""

import argparse
import os

from semiexplicit.harness import DEFAULT_OMEGAS, DEFAULT_TOY_TAUS, TOY_REF_TAU, omega_tau_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--order", type=int, choices=(2, 3), default=2)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default=None)
    a = ap.parse_args()
    out = a.out or f"results/toy_sweep_order{a.order}.csv"

    res = omega_tau_sweep(a.order, DEFAULT_OMEGAS, DEFAULT_TOY_TAUS, TOY_REF_TAU, threads=a.threads)
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    with open(out, "w", newline="") as fh:
        fh.write(res.to_csv())
    for om, ok, q in zip(res.omegas, res.stable, res.slopes):
        print(f"omega {om:5.2f}  {'stable  ' if ok else 'unstable'}  slope {q:7.3f}")
    lo, hi = res.boundary()
    print(f"boundary between {lo} and {hi}; wrote {out}")


if __name__ == "__main__":
    main()
