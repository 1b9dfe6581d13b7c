"""Seeded random generation: Haar unitaries, ball points and the matrix-ball law m_p.

All samplers draw batches: ``size`` is the number of independent draws and
the result carries it as a leading axis (``size=None`` returns one draw).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import Field, MatrixF, ct, embed

__all__ = [
    "RngStream",
    "AParams",
    "BcParams",
    "haar_unitary",
    "ball_point",
    "sample_mp",
    "sample_mp_rejection",
    "mp_exponent",
]


class RngStream:
    """Counter-based random stream addressed by ``(master_seed, stream_id)``.

    Substreams are derived by key with :meth:`spawn`; a child depends only on
    the parent's address and the key, never on how many draws the parent made,
    so parallel tasks that each own a child reproduce bit-identically.
    """

    def __init__(self, master_seed: int, stream_id: tuple[int, ...] = ()):
        self.master_seed = int(master_seed)
        self.stream_id = tuple(int(s) for s in stream_id)
        self._gen: np.random.Generator | None = None

    def spawn(self, *key: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id + tuple(int(k) for k in key))

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_id)
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def __repr__(self):
        return f"RngStream({self.master_seed}, {self.stream_id})"


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))


@dataclass(frozen=True)
class AParams:
    """Type-A setting GL(q,F)/U(q,F)."""

    q: int
    field: Field

    def __post_init__(self):
        object.__setattr__(self, "field", Field.parse(self.field))
        if self.q < 1:
            raise ValueError("q must be positive")

    chamber = "A"

    @property
    def d(self) -> int:
        return self.field.d


@dataclass(frozen=True)
class BcParams:
    """Type-BC setting with continuous dimension parameter p > 2q - 1."""

    q: int
    field: Field
    p: float

    def __post_init__(self):
        object.__setattr__(self, "field", Field.parse(self.field))
        if self.q < 1:
            raise ValueError("q must be positive")
        if not self.p > 2 * self.q - 1:
            raise ValueError(f"p must exceed 2q-1 = {2 * self.q - 1}, got {self.p}")

    chamber = "B"

    @property
    def d(self) -> int:
        return self.field.d

    @property
    def multiplicity(self) -> tuple[float, float, float]:
        d, p, q = self.d, self.p, self.q
        return (d * (p - q) / 2, (d - 1) / 2, d / 2)


def mp_exponent(params: BcParams) -> float:
    """Exponent of Delta(I - w*w) in the density of m_p."""
    return params.d * (params.p / 2 + 0.5 - params.q) - 1


def _gaussian(field: Field, shape, gen) -> np.ndarray:
    """Standard F-Gaussian entries (each real component N(0, 1)), embedded."""
    return embed(field, gen.standard_normal(tuple(shape) + (field.d,)))


def _orthonormalize(X: np.ndarray, e: int) -> np.ndarray:
    """Block Gram-Schmidt (twice) on F-columns; R ends up with positive diagonal."""
    n = X.shape[-1] // e
    Q = np.array(X, copy=True)
    for j in range(n):
        v = Q[..., :, j * e : (j + 1) * e]
        for _ in range(2):
            if j:
                prev = Q[..., :, : j * e]
                v = v - prev @ (ct(prev) @ v)
        nrm = np.sqrt(np.sum(np.abs(v) ** 2, axis=-2, keepdims=True)[..., :, :1])
        Q[..., :, j * e : (j + 1) * e] = v / nrm
    return Q


def haar_unitary(q: int, field: Field, rng, size: int | None = None) -> MatrixF:
    """Haar-distributed element of U(q, F) via Gram-Schmidt of a Ginibre matrix.

    Gram-Schmidt over F with real positive normalization is the QR factorization
    whose R has positive real diagonal, which makes Q exactly Haar.
    """
    field = Field.parse(field)
    gen = as_stream(rng).gen
    shape = (q, q) if size is None else (size, q, q)
    return MatrixF(field, _orthonormalize(_gaussian(field, shape, gen), field.e))


def _ball_draw(q: int, field: Field, a: float, gen, n: int):
    """n embedded ball rows and their exact gaps 1 - |y|^2.

    The gap is drawn directly as Beta(a+1, dq/2); forming 1 - r^2 from a
    Beta(dq/2, a+1) draw would round to 0 when a + 1 is small.
    """
    dim = field.d * q
    g = gen.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    gap = gen.beta(a + 1, dim / 2, size=n)
    r = np.sqrt(1.0 - gap)
    comps = (r[:, None] * g).reshape(n, 1, q, field.d)
    return embed(field, comps), gap


def ball_point(q: int, field: Field, a: float, rng, size: int | None = None) -> MatrixF:
    """Row vector y in the open unit ball of F^q with density prop. to (1 - |y|^2)^a.

    Direction uniform on the sphere, |y|^2 ~ Beta(dq/2, a+1).
    """
    if not a > -1:
        raise ValueError(f"exponent a must exceed -1, got {a}")
    field = Field.parse(field)
    gen = as_stream(rng).gen
    data, _ = _ball_draw(q, field, a, gen, 1 if size is None else size)
    return MatrixF(field, data[0] if size is None else data)


def _p_map(ys: list[np.ndarray], gaps: list[np.ndarray] | None = None) -> np.ndarray:
    """Rows y_j (I - y_{j-1}* y_{j-1})^{1/2} ... (I - y_1* y_1)^{1/2}, stacked.

    The square root is applied in closed form:
    (I - y*y)^{1/2} = I - y*y / (1 + sqrt(1 - |y|^2)).
    """
    rows = []
    coef = []
    for j, y in enumerate(ys):
        if gaps is not None:
            gap = gaps[j]
        else:
            gap = np.maximum(1.0 - np.sum(np.abs(y[..., :1, :]) ** 2, axis=(-1, -2)), 0.0)
        coef.append(1.0 / (1.0 + np.sqrt(gap)))
    for j, y in enumerate(ys):
        v = y
        for i in range(j - 1, -1, -1):
            yi = ys[i]
            v = v - coef[i][..., None, None] * ((v @ ct(yi)) @ yi)
        rows.append(v)
    return np.concatenate(rows, axis=-2)


def sample_mp(params: BcParams, rng, size: int | None = None) -> MatrixF:
    """w ~ m_p on the matrix ball B_q, drawn through the diffeomorphism P.

    Row j of the preimage has density prop. to (1 - |y_j|^2)^(d(p-q-j+1)/2 - 1),
    which stays integrable on all of p > 2q - 1.
    """
    q, field = params.q, params.field
    gen = as_stream(rng).gen
    n = 1 if size is None else size
    ys, gaps = [], []
    for j in range(1, q + 1):
        a = params.d * (params.p - q - j + 1) / 2 - 1
        y, gap = _ball_draw(q, field, a, gen, n)
        ys.append(y)
        gaps.append(gap)
    w = _p_map(ys, gaps)
    return MatrixF(field, w[0] if size is None else w)


def _uniform_ball(q: int, field: Field, n: int, gen) -> np.ndarray:
    out = []
    have = 0
    while have < n:
        m = max(1024, 2 * (n - have))
        cube = embed(field, gen.uniform(-1.0, 1.0, size=(m, q, q, field.d)))
        smax = np.linalg.svd(cube, compute_uv=False)[:, 0]
        keep = cube[smax <= 1.0]
        out.append(keep)
        have += keep.shape[0]
    return np.concatenate(out)[:n]


def sample_mp_rejection(params: BcParams, rng, size: int | None = None) -> MatrixF:
    """Accept/reject sampler for m_p from the uniform law on B_q.

    Only valid when the density exponent is nonnegative (bounded density).
    """
    gamma = mp_exponent(params)
    if gamma < 0:
        raise ValueError(f"rejection sampler needs exponent >= 0, got {gamma}")
    q, field = params.q, params.field
    gen = as_stream(rng).gen
    n = 1 if size is None else size
    I = np.eye(q * field.e)
    out = []
    have = 0
    while have < n:
        w = _uniform_ball(q, field, max(256, n - have), gen)
        _, logdet = np.linalg.slogdet(I - ct(w) @ w)
        dens = np.exp(gamma * logdet / field.e) if gamma > 0 else np.ones(w.shape[0])
        keep = w[gen.uniform(size=w.shape[0]) < dens]
        out.append(keep)
        have += keep.shape[0]
    w = np.concatenate(out)[:n]
    return MatrixF(field, w[0] if size is None else w)
