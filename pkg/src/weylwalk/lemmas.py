"""Numerical spot checks of the matrix-analysis facts the moment bounds rest on.

Each check draws random instances, measures the worst violation and compares
it with a fixed tolerance.  ``run_lemma_suite`` runs all of them over the
three fields and returns one :class:`LemmaResult` per (check, field, q).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from math import comb

import numpy as np

from .algebra import (
    Field,
    MatrixF,
    ct,
    det_modulus,
    elementary_symmetric_mean,
    log_principal_minors,
    principal_minor,
)
from .sampling import _p_map, as_stream, ball_point, haar_unitary

__all__ = [
    "LemmaResult",
    "signed_minor",
    "check_equal_block_dets",
    "check_minor_coefficients",
    "check_symmetric_mean_bound",
    "check_p_map_determinant",
    "check_log_minor_independence",
    "check_minor_bounds",
    "run_lemma_suite",
    "format_table",
]


@dataclass
class LemmaResult:
    name: str
    field: str
    q: int
    statistic: float
    tolerance: float
    passed: bool
    detail: dict = dc_field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "name": self.name, "field": self.field, "q": self.q,
            "statistic": float(self.statistic), "tolerance": float(self.tolerance),
            "passed": bool(self.passed), "detail": self.detail,
        }


def _result(name, field, q, stat, tol, **detail) -> LemmaResult:
    return LemmaResult(name, Field.parse(field).name, q, float(stat), tol, bool(stat <= tol), detail)


def signed_minor(x: np.ndarray, r: int, e: int) -> np.ndarray:
    """Signed Delta_r of Hermitian (embedded) matrices, as a product of eigenvalues.

    Unlike a determinant modulus this can go negative, which is what the
    nonnegativity check needs to see.  Quaternion eigenvalues appear in equal
    pairs in the embedding; one of each pair is kept.
    """
    blk = x[..., : r * e, : r * e]
    vals = np.linalg.eigvalsh(0.5 * (blk + ct(blk)))
    return np.prod(vals[..., ::e], axis=-1)


def check_equal_block_dets(q: int, field, n: int = 1000, rng=0) -> LemmaResult:
    """|det u_1| = |det u_2| for the diagonal blocks of r x r and (q-r) x (q-r)."""
    field = Field.parse(field)
    e = field.e
    u = haar_unitary(q, field, rng, size=n).data
    worst = 0.0
    for r in range(1, q):
        d1 = det_modulus(MatrixF(field, u[:, : r * e, : r * e]))
        d2 = det_modulus(MatrixF(field, u[:, r * e :, r * e :]))
        worst = max(worst, float(np.max(np.abs(d1 - d2))))
    return _result("equal_block_dets", field, q, worst, 1e-9, draws=n)


def _subset_coefficients(u: np.ndarray, r: int, q: int, e: int):
    subsets = list(itertools.combinations(range(q), r))
    cs = []
    for S in subsets:
        ind = np.zeros(q)
        ind[list(S)] = 1.0
        D = np.repeat(ind, e)
        cs.append(signed_minor(ct(u) @ (D[:, None] * u), r, e))
    return subsets, np.stack(cs, axis=-1)


def check_minor_coefficients(q: int, field, n: int = 200, n_a: int = 20, rng=0) -> list[LemmaResult]:
    """Delta_r(u* diag(a) u) = sum_S c_S(u) prod_{i in S} a_i with c_S >= 0, sum c_S = 1.

    Coefficients are read off at indicator vectors a = 1_S; the polynomial
    identity is then checked at random positive a.
    """
    field = Field.parse(field)
    e = field.e
    stream = as_stream(rng)
    u = haar_unitary(q, field, stream.spawn(0), size=n).data
    a = stream.spawn(1).gen.uniform(0.1, 3.0, size=(n_a, q))
    neg, sum_err, poly_err = 0.0, 0.0, 0.0
    for r in range(1, q + 1):
        subsets, c = _subset_coefficients(u, r, q, e)
        neg = max(neg, float(np.max(-c)))
        sum_err = max(sum_err, float(np.max(np.abs(c.sum(axis=-1) - 1.0))))
        for av in a:
            lhs = signed_minor(ct(u) @ (np.repeat(av, e)[:, None] * u), r, e)
            prods = np.array([np.prod(av[list(S)]) for S in subsets])
            rhs = c @ prods
            poly_err = max(poly_err, float(np.max(np.abs(lhs - rhs) / np.abs(rhs))))
    return [
        _result("minor_coefficients_nonnegative", field, q, neg, 1e-12, draws=n),
        _result("minor_coefficients_sum_to_one", field, q, sum_err, 1e-9, draws=n),
        _result("minor_polynomial_identity", field, q, poly_err, 1e-8, draws=n, points=n_a),
    ]


def check_symmetric_mean_bound(q: int, field, n: int = 200, n_a: int = 20, rng=0) -> list[LemmaResult]:
    """0 < C_r(a) / h_r(a) <= binom(q, r)^{-1} sum_S c_S^{-1}, and C_r against brute force."""
    field = Field.parse(field)
    e = field.e
    stream = as_stream(rng)
    u = haar_unitary(q, field, stream.spawn(0), size=n).data
    a = stream.spawn(1).gen.uniform(0.1, 3.0, size=(n_a, q))
    excess, brute = 0.0, 0.0
    for r in range(1, q + 1):
        subsets, c = _subset_coefficients(u, r, q, e)
        bound = np.sum(1.0 / np.maximum(c, 1e-300), axis=-1) / comb(q, r)
        for av in a:
            Cr = elementary_symmetric_mean(av, r)
            direct = np.mean([np.prod(av[list(S)]) for S in subsets])
            brute = max(brute, abs(Cr - direct) / direct)
            h = signed_minor(ct(u) @ (np.repeat(av, e)[:, None] * u), r, e)
            # bound may be huge; compare in relative terms
            excess = max(excess, float(np.max((Cr / h - bound) / bound)))
    return [
        _result("symmetric_mean_ratio_bound", field, q, excess, 1e-9, draws=n),
        _result("symmetric_mean_brute_force", field, q, brute, 1e-12),
    ]


def check_p_map_determinant(q: int, field, n: int = 1000, rng=0) -> LemmaResult:
    """|det P(y_1, ..., y_q)| = |det (y_1; ...; y_q)| for y_j in the unit ball."""
    field = Field.parse(field)
    stream = as_stream(rng)
    ys = [ball_point(q, field, 0.0, stream.spawn(j), size=n).data for j in range(q)]
    P = _p_map(ys)
    Y = np.concatenate(ys, axis=-2)
    d1 = det_modulus(MatrixF(field, P))
    d2 = det_modulus(MatrixF(field, Y))
    return _result("p_map_determinant", field, q, float(np.max(np.abs(d1 - d2))), 1e-9, draws=n)


def _swap(q: int, i: int, j: int) -> np.ndarray:
    k = np.eye(q)
    k[[i, j]] = k[[j, i]]
    return k


def check_log_minor_independence(q: int, field, n: int = 20, rng=0) -> list[LemmaResult]:
    """ln Delta_r(k* a k), r < q, and the constant 1 are linearly independent on U(q).

    Two checks.  The explicit permutation construction gives a matrix
    A_{r,l} = ln Delta_r(k_l* a k_l) (last row all ones) whose |det| must be
    (y_1 - x)^s prod_{l >= 2} (y_l - x) with x = ln a_1 (repeated s times)
    and y_l = ln a_{s+l}.  Independently, the same matrix evaluated at q Haar
    draws must be nonsingular for generic a.
    """
    field = Field.parse(field)
    e = field.e
    stream = as_stream(rng)
    gen = stream.spawn(0).gen
    worst_rel, min_haar = 0.0, np.inf
    for trial in range(n):
        s = int(gen.integers(1, q))
        x = gen.uniform(-1.0, 1.0)
        ys = x + np.sign(gen.uniform(-1, 1, size=q - s)) * gen.uniform(0.2, 1.5, size=q - s)
        loga = np.concatenate([np.full(s, x), ys])
        a = np.exp(loga)
        ks = [np.eye(q)]
        for l in range(2, s + 1):
            ks.append(_swap(q, l - 2, s))
        for l in range(s + 1, q + 1):
            ks.append(_swap(q, s - 1, l - 1))
        A = np.ones((q, q))
        for col, k in enumerate(ks):
            kk = MatrixF.from_real(field, k)
            x_mat = kk.H() @ MatrixF.from_real(field, np.diag(a)) @ kk
            for r in range(1, q):
                A[r - 1, col] = principal_minor(x_mat, r, log=True)
        det = abs(np.linalg.det(A))
        expected = abs((ys[0] - x) ** s * np.prod(ys[1:] - x))
        worst_rel = max(worst_rel, abs(det - expected) / expected)
        # generic unitaries
        u = haar_unitary(q, field, stream.spawn(1, trial), size=q).data
        x_h = ct(u) @ (np.repeat(a, e)[:, None] * u)
        H = np.ones((q, q))
        for r in range(1, q):
            H[r - 1] = np.log(signed_minor(x_h, r, e))
        sv = np.linalg.svd(H, compute_uv=False)
        min_haar = min(min_haar, sv[-1] / sv[0])
    return [
        _result("log_minor_permutation_determinant", field, q, worst_rel, 1e-9, trials=n),
        LemmaResult("log_minor_independence_haar", field.name, q, float(min_haar), 1e-12,
                    bool(min_haar > 1e-12), {"trials": n, "statistic": "min inverse condition number"}),
    ]


def check_minor_bounds(q: int, field, n: int = 1000, rng=0) -> LemmaResult:
    """r t_q <= 1/2 ln Delta_r(u* e^{2t} u) <= t_1 + ... + t_r for Haar u."""
    field = Field.parse(field)
    e = field.e
    stream = as_stream(rng)
    t = -np.sort(-stream.spawn(0).gen.uniform(-3, 3, size=q))
    u = haar_unitary(q, field, stream.spawn(1), size=n).data
    x = ct(u) @ (np.repeat(np.exp(2 * t), e)[:, None] * u)
    lm = log_principal_minors(MatrixF(field, x))
    worst = 0.0
    for r in range(1, q + 1):
        half = 0.5 * lm[:, r - 1]
        lo = r * t[-1]
        hi = t[:r].sum()
        worst = max(worst, float(np.max(np.maximum(lo - half, half - hi))))
    return _result("minor_sandwich_bounds", field, q, max(worst, 0.0), 1e-10, draws=n, t=t.tolist())


def run_lemma_suite(qs=(2, 3), fields=("R", "C", "H"), rng=0) -> list[LemmaResult]:
    stream = as_stream(rng)
    out: list[LemmaResult] = []
    for i, f in enumerate(fields):
        for j, q in enumerate(qs):
            sub = stream.spawn(i, j)
            out.append(check_equal_block_dets(q, f, 1000, sub.spawn(0)))
            out.extend(check_minor_coefficients(q, f, 200, 20, sub.spawn(1)))
            out.extend(check_symmetric_mean_bound(q, f, 200, 20, sub.spawn(2)))
            out.append(check_p_map_determinant(q, f, 1000, sub.spawn(3)))
            out.extend(check_log_minor_independence(q, f, 20, sub.spawn(4)))
            out.append(check_minor_bounds(q, f, 1000, sub.spawn(5)))
    return out


def format_table(results) -> str:
    rows = [("check", "field", "q", "statistic", "tolerance", "result")]
    for r in results:
        rows.append((r.name, r.field, str(r.q), f"{r.statistic:.3e}", f"{r.tolerance:.0e}",
                     "pass" if r.passed else "FAIL"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows)
