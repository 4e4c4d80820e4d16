"""Scan box size and bubble separation for the two-bubble interaction test.

For each geometry the measured deviation ``J - b_2`` is compared with the
expansion's prediction at each concentration.
"""

import argparse
import itertools

import numpy as np

from navier_bubbles.bubbles import Configuration, constants
from navier_bubbles.energy import ResolutionError, verify_expansion
from navier_bubbles.grid import make_domain


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sides", type=float, nargs="+", default=[0.25, 0.4, 1.0])
    ap.add_argument("--shifts", type=int, nargs="+", default=[2, 4, 6])
    ap.add_argument("--N", type=int, default=23)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[10, 15, 20])
    args = ap.parse_args()

    b2 = constants(5).b(2)
    print("side,shift,lambda,measured,predicted,ratio")
    for side, shift in itertools.product(args.sides, args.shifts):
        d = make_domain("box", 5, side=side, N=args.N)
        e0 = np.eye(5)[0] * shift * d.spacing
        c = Configuration.common([0.5, 0.5], [d.center + e0, d.center - e0], args.lambdas[0])
        try:
            rep = verify_expansion(d, c, args.lambdas)
        except ResolutionError as exc:
            print(f"# side={side} shift={shift}: skipped ({exc})")
            continue
        for lam, J, ps in zip(rep.lams, rep.J_num, rep.psi):
            m, p = J - b2, ps - b2
            print(f"{side:g},{shift},{lam:g},{m:.6g},{p:.6g},{m / p:.4f}")


if __name__ == "__main__":
    main()
