"""Compare the compiled and pure-Python relaxation kernels.

Times a batch of steady-state solves on the Wheatstone network over a
simplex grid of routings and checks that both backends agree.

    python3 benchmarks/bench_kernels.py --resolution 1/32 --repeat 3
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from ctmroute import kernels
from ctmroute.assignment import RoutingVector
from ctmroute.equilibrium import simplex_grid
from ctmroute.generalnet import steady_states, wheatstone


def run(backend, net, phi, routings, repeat):
    best, states = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        states = steady_states(net, phi, routings, backend=backend, workers=1)
        best = min(best, time.perf_counter() - start)
    return best, states


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--phi", type=float, default=1600.0)
    parser.add_argument("--resolution", default="1/32")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    steps = round(1 / Fraction(args.resolution))
    net = wheatstone()
    routings = [RoutingVector(tuple(g / steps)) for g in simplex_grid(net.n_routes, steps)]
    print(f"{len(routings)} routings, phi {args.phi:g} veh/h, backends {kernels.available()}")

    results = {}
    for backend in kernels.available():
        secs, states = run(backend, net, args.phi, routings, args.repeat)
        results[backend] = states
        print(f"{backend:>9}: {secs:8.4f} s  ({1e3 * secs / len(routings):.3f} ms/solve)")

    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        diff = max(float(np.max(np.abs(np.asarray(x.densities) - np.asarray(y.densities)))) for x, y in zip(a, b))
        print(f"max density difference between backends: {diff:.2e} veh/km")


if __name__ == "__main__":
    main()
