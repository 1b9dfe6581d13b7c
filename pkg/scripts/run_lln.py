"""Law-of-large-numbers runs for the two-atom scenario in both cases."""

import argparse
from dataclasses import asdict, dataclass

from weylwalk.limits import lln_experiment
from weylwalk.sampling import AParams, BcParams

from _common import dump, two_atom


@dataclass
class LlnConfig:
    p: float = 3.5
    k: int = 2000
    R: int = 200
    n_mc: int = 100_000
    seed: int = 2026
    workers: int = 1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    for name, val in asdict(LlnConfig()).items():
        ap.add_argument(f"--{name.replace('_', '-')}", type=type(val), default=val)
    ap.add_argument("--out")
    ns = ap.parse_args()
    cfg = LlnConfig(**{k: getattr(ns, k) for k in asdict(LlnConfig())})
    reports = {
        "BC": lln_experiment(two_atom("B"), BcParams(2, "R", cfg.p), cfg.k, cfg.R, cfg.seed,
                             cfg.n_mc, cfg.workers),
        "A": lln_experiment(two_atom("A"), AParams(2, "R"), cfg.k, cfg.R, cfg.seed, cfg.n_mc, cfg.workers),
    }
    dump({"config": asdict(cfg), "reports": {k: r.to_dict() for k, r in reports.items()}}, ns.out)


if __name__ == "__main__":
    main()
