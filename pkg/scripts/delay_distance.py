"""Distance between the delay-equation solution and the undelayed reference as the delay shrinks.

    python3 scripts/delay_distance.py --omegas 0.05,0.1,0.2
"""

import argparse
import os

from semiexplicit.harness import delay_compare


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--omegas", default="0.05,0.1,0.2")
    ap.add_argument("--m", type=int, default=64)
    ap.add_argument("--out", default="results/delay_distance.csv")
    a = ap.parse_args()

    taus = [2.0**-k for k in range(3, 8)]
    os.makedirs(os.path.dirname(a.out) or ".", exist_ok=True)
    with open(a.out, "w", newline="") as fh:
        for i, om in enumerate(float(x) for x in a.omegas.split(",")):
            cmp = delay_compare(om, taus, a.m)
            text = cmp.to_csv()
            fh.write(text if i == 0 else text.split("\n", 1)[1])
            print(f"omega {om:g}: slope {cmp.slope:.3f}")
    print("wrote", a.out)


if __name__ == "__main__":
    main()
