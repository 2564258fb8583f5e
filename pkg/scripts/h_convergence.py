"""Refinement study against the exact classical profile.

With theta=0 the flat and sharp thresholds coincide and the scheme must
reproduce the classical solution of the cubic problem 1.0 -> -0.8: a
tangent shock at x = 0.75 t ahead of a fan out to x = 1.92 t.  The L1
error at T=1 should shrink linearly in the strength cap h.
"""

import argparse

import numpy as np

from ncft import tracking
from ncft.kinetics import KineticFunction
from ncft.models import cubic_model


def exact_profile(x):
    fan = -np.sqrt(np.maximum(x, 0.0) / 3.0)
    return np.where(x < 0.75, 1.0, np.where(x > 1.92, -0.8, fan))


def l1_error(result, mids, exact, dx):
    fronts = sorted(result.final.fronts, key=lambda f: f.position)
    pos = np.array([f.position for f in fronts])
    vals = np.array([fronts[0].wave.left[0]] +
                    [f.wave.right[0] for f in fronts])
    approx = vals[np.searchsorted(pos, mids, side="right")]
    return float(np.sum(np.abs(approx - exact)) * dx)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--h", type=float, action="append",
                        help="strength cap, repeatable; default 0.04..0.005")
    args = parser.parse_args()
    hs = args.h or [0.04, 0.02, 0.01, 0.005]

    model = cubic_model()
    kin = KineticFunction(theta=0.0, nucleation_gamma=0.0)
    xs = np.linspace(-0.5, 2.5, 60001)
    dx = xs[1] - xs[0]
    mids = 0.5 * (xs[:-1] + xs[1:])
    exact = exact_profile(mids)

    print(f"{'h':>8} {'L1 error':>12} {'error/h':>10} {'fronts':>8}")
    for h in hs:
        fronts0 = tracking.init_fronts(model, kin, [[1.0], [-0.8]], [0.0],
                                       h=h, strong_jumps=[0])
        result = tracking.run(model, kin, fronts0, t_end=1.0)
        err = l1_error(result, mids, exact, dx)
        print(f"{h:>8g} {err:>12.5f} {err / h:>10.3f} "
              f"{len(result.final.fronts):>8}")


if __name__ == "__main__":
    main()
