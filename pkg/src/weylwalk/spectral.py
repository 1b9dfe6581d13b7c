"""Monte Carlo evaluation of spherical functions and moment functions.

Both cases reduce to one per-sample quantity, the vector of half log-ratios
of consecutive principal minors

    Y_r = 1/2 ln(Delta_r(x) / Delta_{r-1}(x)),   r = 1..q,

of x = u* e^{2t} u (type A, u Haar) or x = g(t, u, w) (type BC, u Haar,
w ~ m_p).  In terms of Y the integrands are

    spherical:  Delta_{(i lam - rho)/2}(x) = exp(sum_r (i lam_r - rho_r) Y_r)
    moments:    m_l(t) = E[prod_r Y_r^{l_r}]

so every estimator here is a sample mean over draws of Y, and the first and
second moments at one point are estimated from one shared sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
from scipy import stats

from .algebra import ChamberPoint, Field, ct, log_gram_minors, repeat_diag
from .sampling import AParams, BcParams, RngStream, as_stream, haar_unitary, sample_mp

__all__ = [
    "MonteCarloEstimate",
    "MomentIndex",
    "SpectralParams",
    "rho_A",
    "rho_BC",
    "spectral_params",
    "log_minor_ratios",
    "LocalMoments",
    "local_moments",
    "spherical",
    "moment",
    "m1_vec",
    "m2_mat",
    "sigma2_local",
    "dispersion",
    "covariance",
    "MeasureMoments",
    "measure_moments",
    "fourier_transform",
    "oscillation_residual",
    "drift_gap",
    "second_moment_gap",
    "RayMonitor",
    "ray_monitor",
    "eigen_with_stderr",
    "trend_test",
    "conjecture_report",
]

DEFAULT_N_MC = 100_000
CHUNK = 16_384


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: object
    stderr: object
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not np.all(np.isfinite(self.stderr)):
            raise ValueError("stderr must be finite")

    def to_record(self) -> dict:
        return {"value": _jsonable(self.value), "stderr": _jsonable(self.stderr), "n": self.n}


def _jsonable(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return {"re": v.real.tolist(), "im": v.imag.tolist()}
    return v.tolist()


@dataclass(frozen=True)
class MomentIndex:
    l: tuple[int, ...]

    def __post_init__(self):
        l = tuple(int(x) for x in self.l)
        if any(x < 0 for x in l):
            raise ValueError("moment index entries must be nonnegative")
        object.__setattr__(self, "l", l)

    @property
    def order(self) -> int:
        return sum(self.l)


def rho_A(q: int, d: int) -> np.ndarray:
    """Half sum of positive roots for type A: rho_l = d/2 (q + 1 - 2l)."""
    l = np.arange(1, q + 1)
    return d / 2 * (q + 1 - 2 * l)


def rho_BC(params: BcParams) -> np.ndarray:
    """rho_i = d/2 (p + q + 2 - 2i) - 1."""
    i = np.arange(1, params.q + 1)
    return params.d / 2 * (params.p + params.q + 2 - 2 * i) - 1


@dataclass(frozen=True)
class SpectralParams:
    case: str
    rho: np.ndarray
    q: int
    d: int
    p: float | None = None


def spectral_params(params) -> SpectralParams:
    if isinstance(params, BcParams):
        return SpectralParams("BC", rho_BC(params), params.q, params.d, params.p)
    return SpectralParams("A", rho_A(params.q, params.d), params.q, params.d)


def _rho(params) -> np.ndarray:
    return rho_BC(params) if isinstance(params, BcParams) else rho_A(params.q, params.d)


def _tvalues(t, params) -> np.ndarray:
    if isinstance(t, ChamberPoint):
        if t.chamber != params.chamber:
            raise ValueError(f"point lies in chamber {t.chamber}, params need {params.chamber}")
        v = t.values
    else:
        v = ChamberPoint(params.chamber, t).values
    if v.size != params.q:
        raise ValueError(f"point has q={v.size}, params have q={params.q}")
    return v


def _log_cosh(t: np.ndarray) -> np.ndarray:
    return t + np.log1p(np.exp(-2.0 * t)) - np.log(2.0)


def _ratios_from_logminors(lm: np.ndarray) -> np.ndarray:
    prev = np.concatenate([np.zeros(lm.shape[:-1] + (1,)), lm[..., :-1]], axis=-1)
    return 0.5 * (lm - prev)


def _chunk_ratios(t: np.ndarray, params, n: int, stream: RngStream) -> np.ndarray:
    q, field = params.q, params.field
    e = field.e
    u = haar_unitary(q, field, stream.spawn(0), size=n).data
    ks = [e * r for r in range(1, q + 1)]
    if isinstance(params, BcParams):
        w = sample_mp(params, stream.spawn(1), size=n).data
        # g = N* N with N = (I + w* T) C u, C = cosh t, T = tanh t.  With
        # I + w* T = Q R, the Gram minors of N equal those of C (R~ u),
        # R~_ij = R_ij c_j / c_i bounded because c is non-increasing.
        lc = repeat_diag(_log_cosh(t), field)
        T = repeat_diag(np.tanh(t), field)
        K = np.eye(q * e) + ct(w) * T[None, None, :]
        _, R = np.linalg.qr(K)
        expo = np.minimum(lc[None, :] - lc[:, None], 0.0)
        Rt = R * np.triu(np.exp(expo))
        lm = log_gram_minors(lc, Rt @ u, ks) / e
    else:
        ls = repeat_diag(t, field)
        lm = log_gram_minors(ls, u, ks) / e
        # |det u| = 1 exactly
        lm[..., -1] = 2.0 * t.sum()
    return _ratios_from_logminors(lm)


def log_minor_ratios(t, params, n: int, rng) -> np.ndarray:
    """Draws of Y (shape ``(n, q)``) at the chamber point t.

    Sampling runs in fixed chunks with one substream each, so the result
    depends only on (t, params, n, rng address).
    """
    tv = _tvalues(t, params)
    stream = as_stream(rng)
    if n < 1:
        raise ValueError("n must be positive")
    if isinstance(params, BcParams):
        if not np.any(tv):
            return np.zeros((n, params.q))
    elif tv[0] == tv[-1]:
        # x = e^{2c} I: every minor ratio is exactly c
        return np.full((n, params.q), tv[0])
    parts = []
    for i, start in enumerate(range(0, n, CHUNK)):
        m = min(CHUNK, n - start)
        parts.append(_chunk_ratios(tv, params, m, stream.spawn(i)))
    return np.concatenate(parts, axis=0)


def _mean_se(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    mean = x.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(np.real(mean), dtype=float)
    dev = x - x[0]
    se = np.sqrt(np.maximum(np.mean(np.abs(dev) ** 2, axis=0) - np.abs(dev.mean(axis=0)) ** 2, 0.0) / (n - 1))
    return mean, se


@dataclass
class LocalMoments:
    """Shared-sample moment estimates at one chamber point."""

    t: np.ndarray
    Y: np.ndarray
    params: object = dc_field(repr=False)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    def m1(self) -> MonteCarloEstimate:
        v, se = _mean_se(self.Y)
        return MonteCarloEstimate(v, se, self.n)

    def m2(self) -> MonteCarloEstimate:
        prod = self.Y[:, :, None] * self.Y[:, None, :]
        v, se = _mean_se(prod)
        return MonteCarloEstimate(v, se, self.n)

    def sigma2(self) -> MonteCarloEstimate:
        """m_2 - m_1^T m_1 as the (1/n) empirical covariance of Y.

        Centered at the first draw, so constant samples give exactly zero.
        """
        D = self.Y - self.Y[0]
        mu = D.mean(axis=0)
        val = (D.T @ D) / self.n - np.outer(mu, mu)
        C = self.Y - self.Y.mean(axis=0)
        infl = C[:, :, None] * C[:, None, :]
        _, se = _mean_se(infl)
        return MonteCarloEstimate(0.5 * (val + val.T), se, self.n)

    def moment(self, l) -> MonteCarloEstimate:
        l = MomentIndex(tuple(l)).l
        if len(l) != self.q:
            raise ValueError("moment index has wrong length")
        v, se = _mean_se(np.prod(self.Y ** np.asarray(l), axis=1))
        return MonteCarloEstimate(float(v), float(se), self.n)

    def abs_moment(self, l) -> MonteCarloEstimate:
        v, se = _mean_se(np.abs(np.prod(self.Y ** np.asarray(l), axis=1)))
        return MonteCarloEstimate(float(v), float(se), self.n)

    def spherical(self, lam) -> MonteCarloEstimate:
        lam = np.asarray(lam, dtype=complex)
        expo = (1j * lam - _rho(self.params)) @ self.Y.T if self.Y.size else 0
        vals = np.exp(expo)
        v, se = _mean_se(vals)
        return MonteCarloEstimate(complex(v), float(se), self.n)

    def transform_at(self, lam) -> np.ndarray:
        """Per-sample integrand of phi_{-i rho - lam}: exp(-i <lam, Y>)."""
        return np.exp(-1j * (self.Y @ np.asarray(lam, dtype=float)))


def local_moments(t, params, n_mc: int = DEFAULT_N_MC, rng=0) -> LocalMoments:
    tv = _tvalues(t, params)
    return LocalMoments(tv, log_minor_ratios(tv, params, n_mc, rng), params)


def spherical(lam, t, params, n_mc: int = DEFAULT_N_MC, rng=0) -> MonteCarloEstimate:
    """phi_lambda(t) by its Harish-Chandra integral representation."""
    lam = np.asarray(lam, dtype=complex)
    if lam.shape != (params.q,):
        raise ValueError("lambda has wrong length")
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    return local_moments(t, params, n_mc, rng).spherical(lam)


def moment(l, t, params, n_mc: int = DEFAULT_N_MC, rng=0) -> MonteCarloEstimate:
    idx = MomentIndex(tuple(l))
    if idx.order > 2:
        raise ValueError("built-in moment estimators cover orders <= 2")
    if idx.order == 0:
        return MonteCarloEstimate(1.0, 0.0, n_mc)
    return local_moments(t, params, n_mc, rng).moment(idx.l)


def m1_vec(t, params, n_mc: int = DEFAULT_N_MC, rng=0) -> MonteCarloEstimate:
    return local_moments(t, params, n_mc, rng).m1()


def m2_mat(t, params, n_mc: int = DEFAULT_N_MC, rng=0) -> MonteCarloEstimate:
    return local_moments(t, params, n_mc, rng).m2()


def sigma2_local(t, params, n_mc: int = DEFAULT_N_MC, rng=0) -> MonteCarloEstimate:
    return local_moments(t, params, n_mc, rng).sigma2()


# ---------------------------------------------------------------------------
# measure level


@dataclass
class MeasureMoments:
    """Dispersion m_1(nu) and covariance Sigma^2(nu) of a finitely supported nu."""

    weights: np.ndarray
    locals: list[LocalMoments]

    def dispersion(self) -> MonteCarloEstimate:
        vals = np.array([lm.m1().value for lm in self.locals])
        ses = np.array([lm.m1().stderr for lm in self.locals])
        v = self.weights @ vals
        se = np.sqrt((self.weights ** 2) @ (ses ** 2))
        return MonteCarloEstimate(v, se, min(lm.n for lm in self.locals))

    def m2(self) -> MonteCarloEstimate:
        vals = np.array([lm.m2().value for lm in self.locals])
        ses = np.array([lm.m2().stderr for lm in self.locals])
        v = np.tensordot(self.weights, vals, axes=1)
        se = np.sqrt(np.tensordot(self.weights ** 2, ses ** 2, axes=1))
        return MonteCarloEstimate(v, se, min(lm.n for lm in self.locals))

    def covariance(self) -> MonteCarloEstimate:
        """sum_i w_i Sigma^2(t_i) + covariance over atoms of m_1(t_i).

        Algebraically equal to int m_2 dnu - m_1(nu)^T m_1(nu), arranged so that
        the atom-local parts keep their exact zeros.
        """
        m1s = np.array([lm.m1().value for lm in self.locals])
        m1se = np.array([lm.m1().stderr for lm in self.locals])
        s2 = np.array([lm.sigma2().value for lm in self.locals])
        s2se = np.array([lm.sigma2().stderr for lm in self.locals])
        w = self.weights
        D = m1s - m1s[0]
        mu = w @ D
        between = (D.T * w) @ D - np.outer(mu, mu)
        val = np.tensordot(w, s2, axes=1) + between
        # delta method for the between-atom part
        C = m1s - w @ m1s
        dvar = np.zeros_like(val)
        for i in range(len(w)):
            g = w[i] * (np.abs(C[i])[:, None] * m1se[i][None, :] + m1se[i][:, None] * np.abs(C[i])[None, :])
            dvar += g ** 2
        se = np.sqrt(np.tensordot(w ** 2, s2se ** 2, axes=1) + dvar)
        return MonteCarloEstimate(0.5 * (val + val.T), se, min(lm.n for lm in self.locals))

    def transform(self, lam) -> MonteCarloEstimate:
        vals, ses = [], []
        for lm in self.locals:
            v, se = _mean_se(lm.transform_at(lam))
            vals.append(v)
            ses.append(se)
        v = self.weights @ np.array(vals)
        se = np.sqrt((self.weights ** 2) @ np.array(ses) ** 2)
        return MonteCarloEstimate(complex(v), float(se), min(lm.n for lm in self.locals))


def measure_moments(nu, params, n_mc: int = DEFAULT_N_MC, rng=0) -> MeasureMoments:
    stream = as_stream(rng)
    locs = [local_moments(a, params, n_mc, stream.spawn(i)) for i, a in enumerate(nu.atoms)]
    return MeasureMoments(np.asarray(nu.weights, dtype=float), locs)


def dispersion(nu, params, n_mc: int = DEFAULT_N_MC, rng=0) -> MonteCarloEstimate:
    return measure_moments(nu, params, n_mc, rng).dispersion()


def covariance(nu, params, n_mc: int = DEFAULT_N_MC, rng=0) -> MonteCarloEstimate:
    return measure_moments(nu, params, n_mc, rng).covariance()


def fourier_transform(nu, lam, params, n_mc: int = DEFAULT_N_MC, rng=0) -> MonteCarloEstimate:
    """nu~(lam) = int phi_{-i rho - lam} dnu for real lam."""
    lam = np.asarray(lam, dtype=float)
    if not np.any(lam):
        return MonteCarloEstimate(1 + 0j, 0.0, n_mc)
    return measure_moments(nu, params, n_mc, rng).transform(lam)


# ---------------------------------------------------------------------------
# monitors


def oscillation_residual(lm: LocalMoments, lam, with_stderr: bool = False):
    """|phi_{-i rho - lam}(t) - exp(-i <lam, m_1(t)>)| on the shared sample.

    Follows the sign of the integral representation literally; the residual
    is second order in lam because the first-order terms cancel per sample.
    With ``with_stderr`` also returns a delta-method standard error.
    """
    lam = np.asarray(lam, dtype=float)
    f = lm.transform_at(lam)
    A = f.mean()
    ybar = lm.Y.mean(axis=0)
    B = np.exp(-1j * lam @ ybar)
    D = A - B
    r = float(np.abs(D))
    if not with_stderr:
        return r
    if r == 0.0 or lm.n < 2:
        return r, 0.0
    psi = (f - A) + 1j * B * ((lm.Y - ybar) @ lam)
    infl = np.real(np.conj(D) * psi) / r
    return r, float(infl.std(ddof=1) / np.sqrt(lm.n))


def drift_gap(lm: LocalMoments) -> tuple[float, float]:
    """|m_1(t) - t| with delta-method stderr."""
    ybar = lm.Y.mean(axis=0)
    g = ybar - lm.t
    r = float(np.linalg.norm(g))
    if r == 0.0 or lm.n < 2:
        return r, 0.0
    infl = (lm.Y - ybar) @ (g / r)
    return r, float(infl.std(ddof=1) / np.sqrt(lm.n))


def second_moment_gap(lm: LocalMoments) -> tuple[float, float]:
    """|m_{1,1}(t) - t_1^2| / (|t_1| + 1) with stderr."""
    y2 = lm.Y[:, 0] ** 2
    scale = abs(lm.t[0]) + 1.0
    v, se = _mean_se(y2)
    return float(abs(v - lm.t[0] ** 2) / scale), float(se / scale)


@dataclass
class RayMonitor:
    """Growth statistics along t = c * direction for c in ``cs``."""

    cs: np.ndarray
    eps: np.ndarray
    lam_dir: np.ndarray
    drift: np.ndarray  # (len(cs), 2) value, stderr
    second: np.ndarray  # (len(cs), 2)
    oscillation: np.ndarray  # (len(cs), len(eps), 2), residual / |lam|^2
    halving: np.ndarray  # (len(cs), len(eps) - 1) residual ratios
    trends: dict

    def to_record(self) -> dict:
        return {
            "c": self.cs.tolist(),
            "eps": self.eps.tolist(),
            "lambda_direction": self.lam_dir.tolist(),
            "drift_gap": self.drift.tolist(),
            "second_moment_gap": self.second.tolist(),
            "oscillation_ratio": self.oscillation.tolist(),
            "halving_ratios": self.halving.tolist(),
            "trends": self.trends,
        }


def ray_monitor(params, direction, cs=(20.0, 27.5, 35.0, 42.5, 50.0),
                eps=(0.2, 0.1, 0.05, 0.025), lam_dir=None, n_mc: int = DEFAULT_N_MC,
                rng=0, alpha: float = 1e-3) -> RayMonitor:
    """Monitors for the bounded-constant statements along a ray in the chamber.

    At each c, one shared sample gives |m_1(t) - t|, the second-moment gap
    and |phi_{-i rho - lam}(t) - exp(-i <lam, m_1(t)>)| / |lam|^2 for
    lam = eps * lam_dir.  Each statistic gets a weighted trend test over c;
    the constants are unknown, so "bounded" is read as "no slope".
    """
    cs = np.asarray(cs, dtype=float)
    eps = np.asarray(eps, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if lam_dir is None:
        # e_1; in type A a multiple of (1, ..., 1) would see no fluctuation at all
        lam_dir = np.eye(params.q)[0]
    lam_dir = np.asarray(lam_dir, dtype=float)
    lam_dir = lam_dir / np.linalg.norm(lam_dir)
    stream = as_stream(rng)
    drift, second, osc, halving = [], [], [], []
    for i, c in enumerate(cs):
        lm = local_moments(c * direction, params, n_mc, stream.spawn(i))
        drift.append(drift_gap(lm))
        second.append(second_moment_gap(lm))
        row = []
        for e in eps:
            r, se = oscillation_residual(lm, e * lam_dir, with_stderr=True)
            row.append((r / e ** 2, se / e ** 2))
        osc.append(row)
        res = np.array([x[0] * e ** 2 for x, e in zip(row, eps)])
        halving.append(res[:-1] / res[1:])
    drift = np.array(drift)
    second = np.array(second)
    osc = np.array(osc)
    trends = {
        "drift_gap": trend_test(cs, drift[:, 0], drift[:, 1], alpha),
        "second_moment_gap": trend_test(cs, second[:, 0], second[:, 1], alpha),
    }
    for j, e in enumerate(eps):
        trends[f"oscillation_eps_{e:g}"] = trend_test(cs, osc[:, j, 0], osc[:, j, 1], alpha)
    return RayMonitor(cs, eps, lam_dir, drift, second, osc, np.array(halving), trends)


def eigen_with_stderr(est: MonteCarloEstimate, Y: np.ndarray | None = None):
    """Eigenvalues of a symmetric matrix estimate with delta-method stderrs.

    With the per-sample draws Y, the influence of eigenvalue k is
    (v_k . (Y - mean))^2; otherwise the entrywise stderrs are propagated.
    """
    vals, vecs = np.linalg.eigh(np.asarray(est.value))
    if Y is not None:
        C = Y - Y.mean(axis=0)
        proj = (C @ vecs) ** 2
        se = proj.std(axis=0, ddof=1) / np.sqrt(Y.shape[0])
    else:
        S = np.asarray(est.stderr)
        se = np.sqrt(np.einsum("ik,ij,jk->k", vecs ** 2, S ** 2, vecs ** 2))
    return vals, se


def trend_test(x: Sequence[float], y: Sequence[float], se: Sequence[float], alpha: float = 1e-3):
    """Weighted least-squares slope of y on x with known stderrs.

    Returns (slope, slope_se, lo, hi, contains_zero) for a two-sided
    (1 - alpha) normal confidence interval.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1.0 / np.maximum(np.asarray(se, dtype=float), 1e-300) ** 2
    xb = np.sum(w * x) / np.sum(w)
    yb = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xb) ** 2)
    slope = np.sum(w * (x - xb) * (y - yb)) / sxx
    slope_se = np.sqrt(1.0 / sxx)
    z = stats.norm.ppf(1 - alpha / 2)
    lo, hi = slope - z * slope_se, slope + z * slope_se
    return float(slope), float(slope_se), float(lo), float(hi), bool(lo <= 0 <= hi)


def conjecture_report(points, params: BcParams, n_mc: int = 20_000, rng=0) -> list[dict]:
    """Exploratory: t_1 + ... + t_r - s_r(t) for BC points; never asserted."""
    stream = as_stream(rng)
    rows = []
    for i, t in enumerate(points):
        lm = local_moments(t, params, n_mc, stream.spawn(i))
        s = np.cumsum(lm.m1().value)
        gap = np.cumsum(lm.t) - s
        rows.append({"t": lm.t.tolist(), "gap": gap.tolist(), "nonnegative": bool(np.all(gap >= 0))})
    return rows
