"""Convolution kernels on the chambers and the random-walk engine.

One step from position s with step atom t is a single draw of the
chamber-valued convolution delta_s * delta_t:

    type A :  ln sigma_sing(a_s u a_t),  u Haar on U(q, F)
    type BC:  arcosh sigma_sing(sinh t w sinh s + cosh t v cosh s),
              v Haar on U(q, F), w ~ m_p

Positions grow linearly in the number of steps, so both kernels evaluate
the singular values in log form (see ``algebra.log_singular_values``) and
never form e^s or cosh s.  Close to the origin the BC kernel switches to
sinh^2 eigenvalues, since arcosh near 1 halves the number of correct digits.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .algebra import (
    ARCOSH_WINDOW,
    ChamberPoint,
    NumericDomainError,
    arcosh_from_log,
    ct,
    log_singular_values,
    repeat_diag,
)
from .sampling import AParams, BcParams, RngStream, as_stream, haar_unitary, sample_mp

__all__ = [
    "DiscreteMeasure",
    "Trajectory",
    "measure_sample",
    "conv_step_A",
    "conv_step_BC",
    "step_batch",
    "walk",
    "walk_endpoints",
    "walk_checkpoints",
    "emit_csv",
    "read_csv",
]

BLOCK = 256
# below this s_1 + t_1 the BC kernel works with sinh^2 directly
NEAR_SCALE = 1.0


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure on a chamber."""

    atoms: tuple[ChamberPoint, ...]
    weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(self.atoms)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if not atoms:
            raise ValueError("measure needs at least one atom")
        if len(atoms) != w.size:
            raise ValueError("atoms and weights differ in length")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if len({(a.chamber, a.q) for a in atoms}) != 1:
            raise ValueError("atoms must share chamber and q")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, t: ChamberPoint) -> "DiscreteMeasure":
        return cls((t,), np.ones(1))

    @classmethod
    def from_lists(cls, chamber: str, atoms, weights) -> "DiscreteMeasure":
        return cls(tuple(ChamberPoint(chamber, a) for a in atoms), np.asarray(weights, dtype=float))

    @property
    def chamber(self) -> str:
        return self.atoms[0].chamber

    @property
    def q(self) -> int:
        return self.atoms[0].q

    @property
    def atom_array(self) -> np.ndarray:
        return np.array([a.values for a in self.atoms])

    def is_identity(self) -> bool:
        return self.chamber == "B" and all(not np.any(a.values) for a in self.atoms)


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray  # (k + 1, q)
    params: object
    seed: int
    stream_id: tuple

    @property
    def k(self) -> int:
        return self.points.shape[0] - 1

    def point(self, i: int) -> ChamberPoint:
        return ChamberPoint(self.params.chamber, self.points[i])


def measure_sample(nu: DiscreteMeasure, rng, size: int | None = None):
    """Atoms drawn by CDF inversion; returns a ChamberPoint or an ``(size, q)`` array."""
    gen = as_stream(rng).gen
    n = 1 if size is None else size
    if len(nu.atoms) == 1:
        idx = np.zeros(n, dtype=int)
    else:
        cdf = np.cumsum(nu.weights)
        idx = np.minimum(np.searchsorted(cdf, gen.uniform(size=n) * cdf[-1], side="right"), len(cdf) - 1)
    if size is None:
        return nu.atoms[int(idx[0])]
    return nu.atom_array[idx]


def _sorted_desc(x: np.ndarray) -> np.ndarray:
    return -np.sort(-x, axis=-1, kind="stable")


def _kernel_A(S: np.ndarray, T: np.ndarray, u: np.ndarray, field) -> np.ndarray:
    e = field.e
    out = log_singular_values(repeat_diag(S, field), u, repeat_diag(T, field), e=e)
    # |det(a_s u a_t)| = e^{sum s + sum t} exactly
    out[..., -1] = S.sum(axis=-1) + T.sum(axis=-1) - out[..., :-1].sum(axis=-1)
    return _sorted_desc(out)


def _log_cosh(x: np.ndarray) -> np.ndarray:
    return x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0)


def _kernel_BC_near(Se: np.ndarray, Te: np.ndarray, v: np.ndarray, w: np.ndarray, e: int) -> np.ndarray:
    # M = v + A with A formed from sinh and cosh - 1 = 2 sinh^2(x/2), so the
    # eigenvalues sinh^2 of M*M - I = A*v + v*A + A*A keep their accuracy
    # near the origin, where arcosh of a singular value loses half the digits.
    cs = np.cosh(Se)
    dt = 2.0 * np.sinh(0.5 * Te) ** 2
    ds = 2.0 * np.sinh(0.5 * Se) ** 2
    A = (np.sinh(Te)[..., :, None] * w * np.sinh(Se)[..., None, :]
         + dt[..., :, None] * v * cs[..., None, :]
         + v * ds[..., None, :])
    Ah = ct(A)
    N = Ah @ v + ct(v) @ A + Ah @ A
    ev = np.linalg.eigvalsh(0.5 * (N + ct(N)))[..., ::-1][..., ::e]
    return np.arcsinh(np.sqrt(np.maximum(ev, 0.0)))


def _kernel_BC(S: np.ndarray, T: np.ndarray, v: np.ndarray, w: np.ndarray, field) -> np.ndarray:
    e = field.e
    Se = repeat_diag(S, field)
    Te = repeat_diag(T, field)
    out = np.empty(S.shape)
    near = S[:, 0] + T[:, 0] < NEAR_SCALE
    if np.any(near):
        out[near] = _kernel_BC_near(Se[near], Te[near], v[near], w[near], e)
    far = ~near
    if np.any(far):
        Se, Te, v, w = Se[far], Te[far], v[far], w[far]
        # sinh t w sinh s + cosh t v cosh s = K diag(cosh s)
        K = (np.sinh(Te)[..., :, None] * w * np.tanh(Se)[..., None, :]
             + np.cosh(Te)[..., :, None] * v)
        L = log_singular_values(0.0, K, _log_cosh(Se), e=e)
        if np.any(L < np.log1p(-ARCOSH_WINDOW)):
            raise NumericDomainError("convolution argument has a singular value below 1")
        out[far] = arcosh_from_log(np.maximum(L, 0.0))
    return _sorted_desc(out)


def _apply_identity(S, T, out):
    s0 = ~np.any(S, axis=-1)
    t0 = ~np.any(T, axis=-1)
    out[s0] = T[s0]
    out[t0] = S[t0]
    return out


def step_batch(S: np.ndarray, T: np.ndarray, params, rng) -> np.ndarray:
    """One convolution draw per row: delta_{S[i]} * delta_{T[i]}."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if S.shape != T.shape or S.shape[-1] != params.q:
        raise ValueError("position and step arrays must both be (n, q)")
    stream = as_stream(rng)
    n = S.shape[0]
    v = haar_unitary(params.q, params.field, stream.spawn(0), size=n).data
    if isinstance(params, BcParams):
        w = sample_mp(params, stream.spawn(1), size=n).data
        out = _kernel_BC(S, T, v, w, params.field)
    else:
        out = _kernel_A(S, T, v, params.field)
    return _apply_identity(S, T, out)


def _check_point(t: ChamberPoint, params):
    if t.chamber != params.chamber:
        raise ValueError(f"point lies in chamber {t.chamber}, params need {params.chamber}")
    if t.q != params.q:
        raise ValueError(f"mismatched q: {t.q} vs {params.q}")


def conv_step_A(s: ChamberPoint, t: ChamberPoint, params: AParams, rng) -> ChamberPoint:
    _check_point(s, params)
    _check_point(t, params)
    out = step_batch(s.values[None], t.values[None], params, rng)[0]
    return ChamberPoint("A", out)


def conv_step_BC(s: ChamberPoint, t: ChamberPoint, params: BcParams, rng) -> ChamberPoint:
    _check_point(s, params)
    _check_point(t, params)
    out = step_batch(s.values[None], t.values[None], params, rng)[0]
    return ChamberPoint("B", out)


def _walk_block(nu: DiscreteMeasure, k: int, params, stream: RngStream, n: int, record=()):
    """Run n walks for k steps; returns (S_k, step sums, positions at ``record``)."""
    S = np.zeros((n, params.q))
    tsum = np.zeros(n)
    record = sorted(set(int(r) for r in record))
    rec = {}
    if 0 in record:
        rec[0] = S.copy()
    for step in range(k):
        sub = stream.spawn(step)
        T = measure_sample(nu, sub.spawn(0), size=n)
        tsum += T.sum(axis=1)
        S = step_batch(S, T, params, sub.spawn(1))
        if step + 1 in record:
            rec[step + 1] = S.copy()
    path = np.stack([rec[r] for r in record], axis=1) if record else None
    return S, tsum, path


def _check_measure(nu: DiscreteMeasure, params):
    if nu.chamber != params.chamber or nu.q != params.q:
        raise ValueError("measure does not match params")


def walk(nu: DiscreteMeasure, k: int, params, rng) -> Trajectory:
    """One trajectory S_0 = 0, S_{i+1} ~ delta_{S_i} * nu."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    _check_measure(nu, params)
    stream = as_stream(rng)
    _, _, path = _walk_block(nu, k, params, stream, 1, record=range(k + 1))
    return Trajectory(path[0], params, stream.master_seed, stream.stream_id)


def _block_task(args):
    nu, k, params, seed, sid, n, record = args
    return _walk_block(nu, k, params, RngStream(seed, sid), n, record)


def _run_blocks(nu, k, params, R, rng, workers, record):
    if k < 0 or R < 1:
        raise ValueError("need k >= 0 and R >= 1")
    _check_measure(nu, params)
    stream = as_stream(rng)
    tasks = []
    for b, start in enumerate(range(0, R, BLOCK)):
        sub = stream.spawn(b)
        tasks.append((nu, k, params, sub.master_seed, sub.stream_id, min(BLOCK, R - start), tuple(record)))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_block_task, tasks))
    else:
        parts = [_block_task(t) for t in tasks]
    return parts


def walk_endpoints(nu: DiscreteMeasure, k: int, params, R: int, rng, workers: int = 1,
                   return_step_sums: bool = False):
    """Endpoints S_k of R independent walks, shape ``(R, q)``.

    Replications are grouped in fixed blocks of 256, one substream per block,
    so the result does not depend on ``workers``.  With ``return_step_sums``
    also returns, per walk, the sum over steps of the coordinates of the
    drawn atoms (the classical walk followed by the type-A trace).
    """
    parts = _run_blocks(nu, k, params, R, rng, workers, ())
    S = np.concatenate([p[0] for p in parts], axis=0)
    if return_step_sums:
        return S, np.concatenate([p[1] for p in parts])
    return S


def walk_checkpoints(nu: DiscreteMeasure, k: int, params, R: int, rng, steps, workers: int = 1):
    """Positions at the given step indices, shape ``(R, len(steps), q)``.

    Uses the same substreams as :func:`walk_endpoints`, so the column for
    step k equals its output.  Also returns the per-walk step sums.
    """
    steps = sorted(set(int(s) for s in steps))
    if steps and (steps[0] < 0 or steps[-1] > k):
        raise ValueError("checkpoints must lie in [0, k]")
    parts = _run_blocks(nu, k, params, R, rng, workers, steps)
    return np.concatenate([p[2] for p in parts], axis=0), np.concatenate([p[1] for p in parts])


def emit_csv(samples, path, header=None) -> Path:
    """Write rows (step index first) with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2:
        q = len(header) - 1 if header else 0
        arr = arr.reshape(0, q)
    q = arr.shape[1]
    header = header or ["step"] + [f"coord_{i + 1}" for i in range(q)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for i, row in enumerate(arr):
            wr.writerow([i] + [format(x, ".17g") for x in row])
    return path


def read_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    body = [[float(x) for x in r[1:]] for r in rows[1:]]
    return np.array(body).reshape(len(body), len(rows[0]) - 1)
