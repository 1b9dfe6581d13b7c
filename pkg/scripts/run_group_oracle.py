"""Group-level oracles against the chamber kernels over several fields."""

import argparse

from weylwalk.limits import group_oracle_A, group_oracle_BC

from _common import dump, two_atom

BC_CASES = [
    (2, "R", 4, [1.0, 0.5], [1.0, 0.5]),
    (1, "C", 3, [0.8], [1.3]),
    (2, "C", 4, [1.5, 0.3], [0.6, 0.2]),
    (2, "H", 4, [1.2, 0.2], [0.7, 0.4]),
    (3, "R", 6, [1.0, 0.6, 0.1], [0.9, 0.5, 0.2]),
]
A_CASES = [(2, "R", 1), (2, "R", 2), (2, "C", 5), (2, "H", 3)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--out")
    ns = ap.parse_args()
    out = []
    for q, f, p, s, t in BC_CASES:
        out.append(group_oracle_BC(q, f, p, s, t, ns.N, ns.seed).to_dict())
    for q, f, k in A_CASES:
        out.append(group_oracle_A(q, f, two_atom("A"), k, ns.N, ns.seed).to_dict())
    dump({"N": ns.N, "seed": ns.seed, "all_passed": all(r["passed"] for r in out), "reports": out}, ns.out)


if __name__ == "__main__":
    main()
