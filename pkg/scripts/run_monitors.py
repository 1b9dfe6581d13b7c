"""Drift, second-moment and oscillation monitors along rays in the chamber."""

import argparse

from weylwalk.sampling import AParams, BcParams, RngStream
from weylwalk.spectral import ray_monitor

from _common import dump

RAYS = {
    "BC q=2 R p=3.5": (BcParams(2, "R", 3.5), [1.0, 0.5]),
    "BC q=2 C p=4": (BcParams(2, "C", 4.0), [1.0, 0.3]),
    "BC q=3 R p=5.5": (BcParams(3, "R", 5.5), [1.0, 0.6, 0.2]),
    "A q=2 R": (AParams(2, "R"), [1.0, -0.5]),
    "A q=3 C": (AParams(3, "C"), [1.0, 0.2, -0.6]),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-mc", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--cs", type=float, nargs="+", default=[20.0, 27.5, 35.0, 42.5, 50.0])
    ap.add_argument("--out")
    ns = ap.parse_args()
    out = {}
    for i, (name, (params, direction)) in enumerate(RAYS.items()):
        mon = ray_monitor(params, direction, cs=ns.cs, n_mc=ns.n_mc, rng=RngStream(ns.seed, (i,)))
        out[name] = mon.to_record()
    dump({"seed": ns.seed, "n_mc": ns.n_mc, "rays": out}, ns.out)


if __name__ == "__main__":
    main()
