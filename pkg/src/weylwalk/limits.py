"""Statistical experiments for the limit theorems, and matrix-group oracles.

The law of large numbers and the central limit theorem for the chamber
walks are checked against dispersion and covariance estimated independently
by Monte Carlo (module ``spectral``).  The group oracles simulate the walk
on the matrix group itself and project to the chamber, a code path that
shares nothing with the chamber-level kernels beyond basic linear algebra.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np
from scipy import stats

from .algebra import ChamberPoint, Field, NumericDomainError, a_matrix_BC, repeat_diag
from .hypergroup import DiscreteMeasure, step_batch, walk_checkpoints, walk_endpoints
from .sampling import AParams, BcParams, RngStream, as_stream, haar_unitary
from .spectral import MonteCarloEstimate, eigen_with_stderr, local_moments, measure_moments

__all__ = [
    "ALPHA",
    "EIG_FLOOR",
    "DegenerateCovariance",
    "ExperimentReport",
    "ks_two_sample",
    "mahalanobis_chi2",
    "classify_rank",
    "lln_experiment",
    "clt_experiment",
    "group_oracle_A",
    "group_oracle_BC",
]

ALPHA = 1e-3
EIG_FLOOR = 1e-10
ORACLE_RESOLUTION = 9  # decimals kept before comparing oracle arms
LOG_SPREAD_MAX = 18.0  # keeps the smallest log singular value accurate to ~1e-8


class DegenerateCovariance(ValueError):
    """Covariance has eigenvalues below the relative floor."""


@dataclass
class ExperimentReport:
    name: str
    config: dict
    estimates: dict = dc_field(default_factory=dict)
    tests: list = dc_field(default_factory=list)
    passed: bool = True
    seed: int = 0
    wall_clock: float = 0.0
    samples: object = dc_field(default=None, repr=False, compare=False)  # raw endpoints, not serialized

    def add_test(self, name: str, statistic: float, pvalue: float | None = None,
                 alpha: float | None = None, passed: bool | None = None, **extra):
        if passed is None:
            passed = bool(pvalue > alpha)
        rec = {"name": name, "statistic": float(statistic)}
        if pvalue is not None:
            rec["pvalue"] = float(min(max(pvalue, 0.0), 1.0))
        if alpha is not None:
            rec["alpha"] = float(alpha)
        rec.update(extra)
        rec["passed"] = bool(passed)
        self.tests.append(rec)
        self.passed = bool(self.passed and passed)
        return rec

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        d.pop("samples")
        if not timing:
            d.pop("wall_clock")
        return _jsonable(d)

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def params_record(params) -> dict:
    rec = {"case": "BC" if isinstance(params, BcParams) else "A", "q": params.q, "d": params.d}
    if isinstance(params, BcParams):
        rec["p"] = params.p
    return rec


def measure_record(nu: DiscreteMeasure) -> dict:
    return {"atoms": nu.atom_array.tolist(), "weights": nu.weights.tolist()}


# ---------------------------------------------------------------------------
# test statistics


def ks_two_sample(x, y) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("KS test needs nonempty samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("KS test got non-finite values")
    res = stats.ks_2samp(x, y, method="asymp")
    return float(res.statistic), float(res.pvalue)


def _whitener(Sigma: np.ndarray, floor: float = EIG_FLOOR):
    Sigma = 0.5 * (np.asarray(Sigma, dtype=float) + np.asarray(Sigma, dtype=float).T)
    vals, vecs = np.linalg.eigh(Sigma)
    tr = np.trace(Sigma)
    keep = vals > floor * tr if tr > 0 else np.zeros_like(vals, dtype=bool)
    return vals, vecs, keep


def mahalanobis_chi2(Z, Sigma, floor: float = EIG_FLOOR) -> tuple[float, float]:
    """KS test of d^2 = z Sigma^{-1} z^T against chi^2_q over the rows of Z.

    Sigma is inverted through its eigendecomposition; any eigenvalue below
    ``floor * trace`` raises :class:`DegenerateCovariance`.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] == 0:
        raise ValueError("Mahalanobis test needs a nonempty sample")
    vals, vecs, keep = _whitener(Sigma, floor)
    if not np.all(keep):
        raise DegenerateCovariance(f"covariance has rank {int(keep.sum())} < {len(vals)}")
    d2 = np.sum((Z @ vecs) ** 2 / vals, axis=1)
    res = stats.kstest(d2, stats.chi2(df=len(vals)).cdf)
    return float(res.statistic), float(res.pvalue)


def classify_rank(est: MonteCarloEstimate, Y: np.ndarray | None = None, k: float = 3.0,
                  floor: float = 1e-12) -> dict:
    """Eigenvalue pattern of a covariance estimate.

    An eigenvalue counts as positive when it exceeds k stderrs and as zero
    when it lies within k stderrs (plus ``floor * trace``) of 0.
    """
    vals, se = eigen_with_stderr(est, Y)
    tr = max(float(np.trace(np.asarray(est.value))), 0.0)
    pos = vals > k * se + floor * tr
    zero = np.abs(vals) <= k * se + floor * tr
    return {
        "eigenvalues": vals[::-1].tolist(),
        "stderr": se[::-1].tolist(),
        "n_positive": int(pos.sum()),
        "n_zero": int(zero.sum()),
    }


# ---------------------------------------------------------------------------
# limit theorems


def _base_config(name, nu, params, **kw) -> dict:
    cfg = {"experiment": name, "params": params_record(params), "measure": measure_record(nu)}
    cfg.update(kw)
    return cfg


def lln_experiment(nu: DiscreteMeasure, params, k: int, R: int, rng, n_mc: int = 100_000,
                   workers: int = 1) -> ExperimentReport:
    """Law of large numbers: S_k / k against the dispersion m_1(nu).

    Passes when the mean deviation over R walks is at most
    4 sqrt(trace Sigma^2(nu) / k) + 3 |stderr m_1(nu)|.  In type A the
    trace coordinate is also checked against the classical walk of the
    atom sums to 1e-9.  The statistic |S_k - k m_1| k^{-0.6} is reported
    along a grid of steps as a monitor, never gated.
    """
    if k < 100 or R < 50:
        raise ValueError("lln_experiment needs k >= 100 and R >= 50")
    t0 = time.perf_counter()
    stream = as_stream(rng)
    rep = ExperimentReport("lln", _base_config("lln", nu, params, k=k, R=R, n_mc=n_mc),
                           seed=stream.master_seed)
    mm = measure_moments(nu, params, n_mc, stream.spawn(1))
    m1 = mm.dispersion()
    cov = mm.covariance()
    steps = np.unique(np.round(np.geomspace(10, k, 12)).astype(int))
    path, tsum = walk_checkpoints(nu, k, params, R, stream.spawn(2), steps, workers)
    S = path[:, -1, :]
    rep.samples = S
    dev = np.linalg.norm(S / k - m1.value, axis=1)
    tol = 4.0 * np.sqrt(max(np.trace(cov.value), 0.0) / k) + 3.0 * float(np.linalg.norm(m1.stderr))
    rep.estimates.update({
        "dispersion": m1.value, "dispersion_stderr": m1.stderr,
        "covariance": cov.value, "covariance_stderr": cov.stderr,
        "mean_deviation": float(dev.mean()), "max_deviation": float(dev.max()),
        "tolerance": tol,
    })
    rep.add_test("mean_deviation", dev.mean(), passed=bool(dev.mean() <= tol), tolerance=tol)
    rate = np.linalg.norm(path - steps[None, :, None] * m1.value, axis=2) / steps[None, :] ** 0.6
    rep.estimates["rate_monitor"] = {
        "steps": steps.tolist(),
        "mean_over_walks": rate.mean(axis=0).tolist(),
        "max_over_steps": float(rate.max()),
    }
    if isinstance(params, AParams):
        err = np.abs(S.sum(axis=1) - tsum)
        scale = np.maximum(1.0, np.abs(tsum))
        worst = float(np.max(err / scale))
        rep.estimates["trace_walk_max_error"] = worst
        rep.add_test("trace_matches_classical_walk", worst, passed=bool(worst <= 1e-9))
    rep.wall_clock = time.perf_counter() - t0
    return rep


def clt_experiment(nu: DiscreteMeasure, params, k: int, R: int, rng, n_mc: int = 1_000_000,
                   alpha: float = ALPHA, workers: int = 1) -> ExperimentReport:
    """Central limit theorem: (S_k - k m_1(nu)) / sqrt(k) against N(0, Sigma^2(nu)).

    Runs q per-coordinate KS tests and one Mahalanobis chi^2 KS test, each
    at level alpha / (q + 1).  When Sigma^2(nu) is singular within the
    eigenvalue floor the report is marked degenerate with its rank, and the
    tests are restricted to the nondegenerate coordinates and subspace.
    """
    if k < 200 or R < 1000:
        raise ValueError("clt_experiment needs k >= 200 and R >= 1000")
    t0 = time.perf_counter()
    stream = as_stream(rng)
    rep = ExperimentReport("clt", _base_config("clt", nu, params, k=k, R=R, n_mc=n_mc, alpha=alpha),
                           seed=stream.master_seed)
    mm = measure_moments(nu, params, n_mc, stream.spawn(1))
    m1 = mm.dispersion()
    cov = mm.covariance()
    S = walk_endpoints(nu, k, params, R, stream.spawn(2), workers)
    rep.samples = S
    Z = (S - k * m1.value) / np.sqrt(k)
    q = params.q
    level = alpha / (q + 1)
    vals, vecs, keep = _whitener(cov.value)
    rank = int(keep.sum())
    rep.estimates.update({
        "dispersion": m1.value, "dispersion_stderr": m1.stderr,
        "covariance": cov.value, "covariance_stderr": cov.stderr,
        "covariance_eigenvalues": vals[::-1], "rank": rank,
        "degenerate": rank < q, "bonferroni_level": level,
        "z_mean": Z.mean(axis=0), "z_cov": np.cov(Z.T).reshape(q, q),
    })
    tr = np.trace(cov.value)
    for i in range(q):
        var = cov.value[i, i]
        if tr <= 0 or var <= EIG_FLOOR * tr:
            continue
        res = stats.kstest(Z[:, i], stats.norm(scale=np.sqrt(var)).cdf)
        rep.add_test(f"ks_coord_{i + 1}", res.statistic, res.pvalue, level)
    if rank > 0:
        W = Z @ vecs[:, keep]
        d2 = np.sum(W ** 2 / vals[keep], axis=1)
        res = stats.kstest(d2, stats.chi2(df=rank).cdf)
        rep.add_test("mahalanobis_chi2", res.statistic, res.pvalue, level, df=rank)
    rep.estimates["centering_diagnostic"] = _centering_diagnostic(Z, k, m1.value, cov.value, params,
                                                                  n_mc, stream.spawn(3))
    rep.wall_clock = time.perf_counter() - t0
    return rep


def _centering_diagnostic(Z, k, m1, cov, params, n_mc, rng) -> dict:
    """Finite-k offset of the centering, reported but never gated.

    m_1 is additive under convolution, so E m_1(S_k) = k m_1(nu) exactly and
    E S_k - k m_1(nu) = E[S_k - m_1(S_k)], which tends to the bounded gap
    t - m_1(t) far out in the chamber.  Evaluating that gap at t = k m_1(nu)
    predicts the mean of Z; the KS p-values after removing it show how much
    of any misfit is this O(k^{-1/2}) offset.
    """
    tstar = k * np.asarray(m1)
    if not np.any(tstar) or np.any(np.diff(tstar) > 0) or (isinstance(params, BcParams) and tstar[-1] < 0):
        return {}
    gap = tstar - local_moments(tstar, params, max(n_mc // 10, 2), rng).m1().value
    shift = gap / np.sqrt(k)
    pv = []
    for i in range(Z.shape[1]):
        if cov[i, i] > 0:
            pv.append(float(stats.kstest(Z[:, i] - shift[i], stats.norm(scale=np.sqrt(cov[i, i])).cdf).pvalue))
    return {"predicted_z_mean": shift, "observed_z_mean": Z.mean(axis=0), "shifted_ks_pvalues": pv}


# ---------------------------------------------------------------------------
# group oracles


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.round(x, ORACLE_RESOLUTION)


def group_products_A(q: int, field, nu: DiscreteMeasure, k: int, N: int, rng) -> np.ndarray:
    """ln sigma_sing of X_1 ... X_k with X_i = u_i a_{t_i} v_i, t_i ~ nu, u_i, v_i Haar.

    The product is carried as U diag(e^l) V with the log singular values l
    renormalized by an SVD after every factor, so entries never overflow.
    """
    field = Field.parse(field)
    e = field.e
    stream = as_stream(rng)
    atoms = nu.atom_array
    cdf = np.cumsum(nu.weights)
    ell = np.zeros((N, q))
    V = np.broadcast_to(np.eye(q * e), (N, q * e, q * e))
    for i in range(k):
        sub = stream.spawn(i)
        idx = np.minimum(np.searchsorted(cdf, sub.spawn(0).gen.uniform(size=N) * cdf[-1], side="right"),
                         len(cdf) - 1)
        T = atoms[idx]
        u = haar_unitary(q, field, sub.spawn(1), size=N).data
        v = haar_unitary(q, field, sub.spawn(2), size=N).data
        top = ell.max(axis=1, keepdims=True)
        Tmax = T.max(axis=1, keepdims=True)
        left = np.exp(repeat_diag(ell - top, field))
        right = np.exp(repeat_diag(T - Tmax, field))
        M = left[:, :, None] * (V @ u) * right[:, None, :]
        M = M @ v
        _, sig, Vh = np.linalg.svd(M)
        ell = np.log(sig[:, ::e]) + top + Tmax
        if np.any(ell[:, 0] - ell[:, -1] > LOG_SPREAD_MAX):
            raise NumericDomainError(
                "singular values spread beyond double precision; reduce k or the atom sizes")
        V = Vh
    return ell


def group_oracle_A(q: int, field, nu: DiscreteMeasure, k: int, N: int, rng,
                   alpha: float = ALPHA) -> ExperimentReport:
    """Type-A walk endpoints against projected matrix products, KS per coordinate."""
    if N < 10_000:
        raise ValueError("group_oracle_A needs N >= 10^4 per arm")
    t0 = time.perf_counter()
    field = Field.parse(field)
    params = AParams(q, field)
    stream = as_stream(rng)
    rep = ExperimentReport("group_oracle_A",
                           {"experiment": "group_oracle_A", "params": params_record(params),
                            "measure": measure_record(nu), "k": k, "N": N, "alpha": alpha},
                           seed=stream.master_seed)
    grp = _quantize(group_products_A(q, field, nu, k, N, stream.spawn(1)))
    hyp = _quantize(walk_endpoints(nu, k, params, N, stream.spawn(2)))
    rep.estimates.update({"group_mean": grp.mean(axis=0), "walk_mean": hyp.mean(axis=0)})
    for i in range(q):
        D, p = ks_two_sample(grp[:, i], hyp[:, i])
        rep.add_test(f"ks_coord_{i + 1}", D, p, alpha)
    rep.wall_clock = time.perf_counter() - t0
    return rep


def group_step_BC(q: int, field, p: int, s, t, N: int, rng) -> np.ndarray:
    """Chamber projections of k1 a_s k2 a_t with k1, k2 Haar in U(q) x U(p)."""
    field = Field.parse(field)
    e = field.e
    stream = as_stream(rng)
    a_s = a_matrix_BC(np.asarray(s, dtype=float), p, field).data
    a_t = a_matrix_BC(np.asarray(t, dtype=float), p, field).data
    n = a_s.shape[0]

    def kmat(key):
        A = haar_unitary(q, field, stream.spawn(key, 0), size=N).data
        B = haar_unitary(p, field, stream.spawn(key, 1), size=N).data
        K = np.zeros((N, n, n), dtype=np.result_type(A, B))
        K[:, : q * e, : q * e] = A
        K[:, q * e :, q * e :] = B
        return K

    g = kmat(0) @ a_s @ kmat(1) @ a_t
    sig = np.linalg.svd(g[:, : q * e, : q * e], compute_uv=False)[:, ::e]
    if np.any(sig < 1 - 1e-9):
        raise NumericDomainError("A-block singular value below 1")
    return np.arccosh(np.maximum(sig, 1.0))


def group_oracle_BC(q: int, field, p: int, s, t, N: int, rng, alpha: float = ALPHA) -> ExperimentReport:
    """One convolution step delta_s * delta_t: group arm against the chamber kernel."""
    if int(p) != p or p <= q:
        raise ValueError(f"group oracle needs an integer p > q, got {p}")
    if N < 20_000:
        raise ValueError("group_oracle_BC needs N >= 2*10^4 per arm")
    p = int(p)
    t0 = time.perf_counter()
    field = Field.parse(field)
    params = BcParams(q, field, p)
    s = ChamberPoint("B", s).values
    t = ChamberPoint("B", t).values
    stream = as_stream(rng)
    rep = ExperimentReport("group_oracle_BC",
                           {"experiment": "group_oracle_BC", "params": params_record(params),
                            "s": s, "t": t, "N": N, "alpha": alpha},
                           seed=stream.master_seed)
    grp = _quantize(group_step_BC(q, field, p, s, t, N, stream.spawn(1)))
    hyp = _quantize(step_batch(np.tile(s, (N, 1)), np.tile(t, (N, 1)), params, stream.spawn(2)))
    rep.estimates.update({"group_mean": grp.mean(axis=0), "kernel_mean": hyp.mean(axis=0)})
    for i in range(q):
        D, pv = ks_two_sample(grp[:, i], hyp[:, i])
        rep.add_test(f"ks_coord_{i + 1}", D, pv, alpha)
    rep.wall_clock = time.perf_counter() - t0
    return rep
