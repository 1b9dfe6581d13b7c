"""Linear algebra over R, C and H.

Matrices over a division algebra are stored through their canonical complex
embedding.  Real and complex matrices are stored as-is; a quaternion
``a + b i + c j + d k`` becomes the 2x2 block

    [[ a + b i,  c + d i],
     [-c + d i,  a - b i]]

so a q x q quaternion matrix is a 2q x 2q complex array whose leading
2r x 2r block embeds the leading r x r quaternion block.  All spectral work
(SVD, eigenvalues, determinants) runs on that embedding; the quaternionic
(Dieudonne) determinant is the square root of the complex one.

Every array routine accepts leading batch dimensions.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "Field",
    "MatrixF",
    "ChamberPoint",
    "DimensionError",
    "NumericDomainError",
    "det_modulus",
    "principal_minor",
    "log_principal_minors",
    "power_function",
    "singular_spectrum",
    "chamber_project_A",
    "chamber_project_BC",
    "a_matrix_A",
    "a_matrix_BC",
    "g_matrix",
    "elementary_symmetric_mean",
    "psd_sqrt",
    "log_gram_minors",
    "log_singular_values",
    "arcosh_from_log",
]

HERMITIAN_RTOL = 1e-10
ARCOSH_WINDOW = 1e-9
SINGULAR_FLOOR = 1e-300


class DimensionError(ValueError):
    pass


class NumericDomainError(ArithmeticError):
    """Input lies outside the domain where a projection or power is defined."""


class Field(enum.Enum):
    R = 1
    C = 2
    H = 4

    @property
    def d(self) -> int:
        return self.value

    @property
    def e(self) -> int:
        """Embedding block size: 2 for H, else 1."""
        return 2 if self is Field.H else 1

    @property
    def k(self) -> float:
        """Multiplicity d/2 of the type-A root system."""
        return self.value / 2

    @classmethod
    def from_d(cls, d: int) -> "Field":
        for f in cls:
            if f.value == d:
                return f
        raise ValueError(f"d must be one of 1, 2, 4, got {d}")

    @classmethod
    def parse(cls, s) -> "Field":
        if isinstance(s, Field):
            return s
        if isinstance(s, (int, np.integer)):
            return cls.from_d(int(s))
        s = str(s).strip().upper()
        if s.isdigit():
            return cls.from_d(int(s))
        return cls[s]


def embed(field: Field, comps: np.ndarray) -> np.ndarray:
    """Embed F-scalars given as ``(..., rows, cols, d)`` real components."""
    comps = np.asarray(comps, dtype=float)
    if comps.shape[-1] != field.d:
        raise DimensionError(f"expected {field.d} components per entry")
    if field is Field.R:
        return comps[..., 0].copy()
    if field is Field.C:
        return comps[..., 0] + 1j * comps[..., 1]
    z1 = comps[..., 0] + 1j * comps[..., 1]
    z2 = comps[..., 2] + 1j * comps[..., 3]
    *batch, r, c = z1.shape
    out = np.empty((*batch, r, 2, c, 2), dtype=complex)
    out[..., :, 0, :, 0] = z1
    out[..., :, 0, :, 1] = z2
    out[..., :, 1, :, 0] = -z2.conj()
    out[..., :, 1, :, 1] = z1.conj()
    return out.reshape(*batch, 2 * r, 2 * c)


def unembed(field: Field, data: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed`; returns ``(..., rows, cols, d)``."""
    if field is Field.R:
        return np.real(data)[..., None].astype(float)
    if field is Field.C:
        return np.stack([data.real, data.imag], axis=-1)
    *batch, R2, C2 = data.shape
    blk = data.reshape(*batch, R2 // 2, 2, C2 // 2, 2)
    z1 = blk[..., :, 0, :, 0]
    z2 = blk[..., :, 0, :, 1]
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def ct(x: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(x, -1, -2))


def eye(n: int, field: Field) -> np.ndarray:
    m = n * field.e
    return np.eye(m) if field is Field.R else np.eye(m, dtype=complex)


def repeat_diag(v: np.ndarray, field: Field) -> np.ndarray:
    """Per-row scalars of an F-matrix, repeated to the embedded row count."""
    return np.repeat(np.asarray(v), field.e, axis=-1) if field.e > 1 else np.asarray(v)


@dataclass(frozen=True, eq=False)
class MatrixF:
    """Dense matrix over F, held as its complex embedding (batch dims allowed)."""

    field: Field
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim < 2:
            raise DimensionError("matrix data needs at least 2 dimensions")
        e = self.field.e
        if data.shape[-1] % e or data.shape[-2] % e:
            raise DimensionError("embedded shape not divisible by block size")
        if not np.all(np.isfinite(data)):
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_components(cls, field: Field, comps) -> "MatrixF":
        return cls(field, embed(field, comps))

    @classmethod
    def from_real(cls, field: Field, m) -> "MatrixF":
        m = np.asarray(m, dtype=float)
        comps = np.zeros(m.shape + (field.d,))
        comps[..., 0] = m
        return cls.from_components(field, comps)

    @classmethod
    def identity(cls, q: int, field: Field) -> "MatrixF":
        return cls(field, eye(q, field))

    def components(self) -> np.ndarray:
        return unembed(self.field, self.data)

    @property
    def rows(self) -> int:
        return self.data.shape[-2] // self.field.e

    @property
    def cols(self) -> int:
        return self.data.shape[-1] // self.field.e

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def H(self) -> "MatrixF":
        return MatrixF(self.field, ct(self.data))

    def __matmul__(self, other: "MatrixF") -> "MatrixF":
        if other.field is not self.field:
            raise TypeError("field mismatch")
        return MatrixF(self.field, self.data @ other.data)

    def block(self, rows: slice, cols: slice) -> "MatrixF":
        """Sub-block addressed in F-indices."""
        e = self.field.e
        r = slice(rows.start * e if rows.start else None, rows.stop * e if rows.stop else None)
        c = slice(cols.start * e if cols.start else None, cols.stop * e if cols.stop else None)
        return MatrixF(self.field, self.data[..., r, c])


@dataclass(frozen=True, eq=False)
class ChamberPoint:
    """A point of the Weyl chamber C_q^A (``chamber='A'``) or C_q^B (``'B'``)."""

    chamber: str
    values: np.ndarray

    def __post_init__(self):
        ch = str(self.chamber).upper()
        if ch == "BC":
            ch = "B"
        if ch not in ("A", "B"):
            raise ValueError(f"unknown chamber {self.chamber!r}")
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ValueError("chamber point needs finite coordinates")
        if np.any(np.diff(v) > 0):
            raise ValueError(f"coordinates must be non-increasing, got {v.tolist()}")
        if ch == "B" and v[-1] < 0:
            raise ValueError(f"C_q^B needs t_q >= 0, got {v.tolist()}")
        v.setflags(write=False)
        object.__setattr__(self, "chamber", ch)
        object.__setattr__(self, "values", v)

    @property
    def q(self) -> int:
        return self.values.size

    @classmethod
    def zero(cls, chamber: str, q: int) -> "ChamberPoint":
        return cls(chamber, np.zeros(q))

    def __eq__(self, other):
        return (
            isinstance(other, ChamberPoint)
            and self.chamber == other.chamber
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.chamber, self.values.tobytes()))

    def __repr__(self):
        return f"ChamberPoint({self.chamber!r}, {self.values.tolist()})"


# ---------------------------------------------------------------------------
# determinants and minors


def _as_matrix(m, field: Field | None = None) -> MatrixF:
    if isinstance(m, MatrixF):
        return m
    return MatrixF.from_real(field or Field.R, m)


def det_modulus(m: MatrixF) -> float | np.ndarray:
    """|det m|, with the Dieudonne convention for quaternion matrices."""
    m = _as_matrix(m)
    if not m.is_square:
        raise DimensionError(f"det needs a square matrix, got {m.rows}x{m.cols}")
    sign, logabs = np.linalg.slogdet(m.data)
    out = np.where(sign == 0, 0.0, np.exp(logabs / m.field.e))
    return float(out) if out.ndim == 0 else out


def _check_hermitian(x: np.ndarray) -> None:
    scale = np.max(np.abs(x), axis=(-1, -2), keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    if np.any(np.abs(x - ct(x)) > HERMITIAN_RTOL * scale):
        raise ValueError("matrix is not Hermitian within tolerance")


def log_principal_minors(x: MatrixF) -> np.ndarray:
    """ln Delta_r(x) for r = 1..q of a Hermitian positive definite matrix.

    Uses the Cholesky factor of the embedding: ln Delta_r is the cumulative sum
    of 2 ln|L_ii| over the first r embedded blocks, divided by the block size.
    """
    x = _as_matrix(x)
    if not x.is_square:
        raise DimensionError("principal minors need a square matrix")
    _check_hermitian(x.data)
    herm = 0.5 * (x.data + ct(x.data))
    try:
        L = np.linalg.cholesky(herm)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite") from exc
    diag = 2.0 * np.log(np.abs(np.diagonal(L, axis1=-2, axis2=-1)))
    e = x.field.e
    cums = np.cumsum(diag, axis=-1)[..., e - 1 :: e]
    return cums / e


def principal_minor(x: MatrixF, r: int, log: bool = False):
    """The r-th leading principal minor Delta_r(x) (or its logarithm)."""
    x = _as_matrix(x)
    if not 1 <= r <= x.rows:
        raise ValueError(f"r must lie in 1..{x.rows}, got {r}")
    lm = log_principal_minors(x)[..., r - 1]
    out = lm if log else np.exp(lm)
    return float(out) if np.ndim(out) == 0 else out


def power_function(x: MatrixF, lam) -> complex | np.ndarray:
    """Delta_lambda(x) = prod_r Delta_r(x)^(lambda_r - lambda_{r+1}), lambda_{q+1} = 0."""
    lm = log_principal_minors(x)
    lam = np.asarray(lam, dtype=complex)
    if lam.shape[-1] != lm.shape[-1]:
        raise DimensionError("lambda has wrong length")
    diffs = lam - np.append(lam[1:], 0)
    out = np.exp(np.sum(diffs * lm, axis=-1))
    return complex(out) if np.ndim(out) == 0 else out


def singular_spectrum(m: MatrixF) -> np.ndarray:
    """Ordered singular values sigma_1 >= ... >= sigma_min(rows, cols) >= 0."""
    m = _as_matrix(m)
    s = np.linalg.svd(m.data, compute_uv=False)
    e = m.field.e
    if e > 1:
        # embedded quaternion singular values come in equal pairs
        s = 0.5 * (s[..., 0::2] + s[..., 1::2])
    return s


def chamber_project_A(g: MatrixF) -> ChamberPoint:
    """ln of the singular spectrum, the projection GL(q,F) -> C_q^A."""
    g = _as_matrix(g)
    if not g.is_square:
        raise DimensionError("chamber_project_A needs a square matrix")
    s = singular_spectrum(g)
    if s[-1] < SINGULAR_FLOOR:
        raise NumericDomainError("matrix is singular")
    return ChamberPoint("A", np.log(s))


def arcosh_from_log(L: np.ndarray) -> np.ndarray:
    """arcosh(exp(L)) for L >= 0 without forming exp(L)."""
    L = np.asarray(L, dtype=float)
    return L + np.log1p(np.sqrt(-np.expm1(-2.0 * L)))


def _arcosh_clamped(s: np.ndarray) -> np.ndarray:
    if np.any(s < 1.0 - ARCOSH_WINDOW):
        raise NumericDomainError(
            f"singular value {float(np.min(s))!r} below 1; not a valid BC group element"
        )
    return np.arccosh(np.maximum(s, 1.0))


def chamber_project_BC(g: MatrixF, q: int) -> ChamberPoint:
    """arcosh of the singular spectrum of the upper-left q x q block."""
    g = _as_matrix(g)
    if not g.is_square or g.rows <= q:
        raise DimensionError("chamber_project_BC needs a square (q+p)x(q+p) matrix")
    A = g.block(slice(0, q), slice(0, q))
    return ChamberPoint("B", _arcosh_clamped(singular_spectrum(A)))


def _values(t) -> np.ndarray:
    return t.values if isinstance(t, ChamberPoint) else np.asarray(t, dtype=float)


def a_matrix_A(t, field: Field = Field.R) -> MatrixF:
    v = _values(t)
    return MatrixF.from_real(field, np.diag(np.exp(v)))


def a_matrix_BC(t, p: int, field: Field = Field.R) -> MatrixF:
    """The (q+p)x(q+p) block matrix [[cosh t, sinh t, 0], [sinh t, cosh t, 0], [0, 0, I]]."""
    v = _values(t)
    q = v.size
    if p <= q:
        raise ValueError(f"a_matrix_BC needs p > q, got p={p}, q={q}")
    n = q + p
    m = np.eye(n)
    idx = np.arange(q)
    m[idx, idx] = np.cosh(v)
    m[q + idx, q + idx] = np.cosh(v)
    m[idx, q + idx] = np.sinh(v)
    m[q + idx, idx] = np.sinh(v)
    return MatrixF.from_real(field, m)


def g_matrix(t, u: MatrixF, w: MatrixF) -> MatrixF:
    """u* (cosh t + sinh t w)(cosh t + sinh t w)* u."""
    field = u.field
    v = repeat_diag(_values(t), field)
    n = v.size
    I = np.eye(n)
    if np.max(np.abs(ct(u.data) @ u.data - I)) > 1e-10:
        raise ValueError("u is not unitary")
    if np.max(np.linalg.eigvalsh(ct(w.data) @ w.data)) > 1.0 + 1e-10:
        raise ValueError("w is not in the matrix ball")
    B = np.diag(np.cosh(v)) + np.sinh(v)[:, None] * w.data
    return MatrixF(field, ct(u.data) @ B @ ct(B) @ u.data)


def elementary_symmetric_mean(a, r: int) -> float:
    """C_r(a): the r-th elementary symmetric polynomial divided by binom(q, r)."""
    a = np.asarray(a, dtype=float)
    q = a.size
    if not 1 <= r <= q:
        raise ValueError(f"r must lie in 1..{q}")
    # e_j via the product recursion prod (1 + a_i x); all terms positive
    e = np.zeros(r + 1)
    e[0] = 1.0
    for ai in a:
        e[1:] = e[1:] + ai * e[:-1]
    return float(e[r] / comb(q, r))


def psd_sqrt(h: MatrixF) -> MatrixF:
    h = _as_matrix(h)
    _check_hermitian(h.data)
    herm = 0.5 * (h.data + ct(h.data))
    vals, vecs = np.linalg.eigh(herm)
    scale = np.max(np.abs(vals), axis=-1, keepdims=True)
    if np.any(vals < -1e-10 * np.maximum(scale, 1.0)):
        raise ValueError("matrix has a negative eigenvalue")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return MatrixF(h.field, (vecs * root[..., None, :]) @ ct(vecs))


# ---------------------------------------------------------------------------
# log-domain kernels for graded matrices


@lru_cache(maxsize=None)
def _subsets(n: int, k: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n), k)), dtype=np.intp).reshape(-1, k)


def log_gram_minors(log_scale: np.ndarray, m: np.ndarray, ks) -> np.ndarray:
    """ln det of the Gram matrix of the first k columns of diag(exp(log_scale)) @ m.

    Expands each Gram determinant by Cauchy-Binet into a sum of positive terms
    exp(2 sum_S log_scale) |det m[S, :k]|^2 over k-subsets S of rows and sums
    them with logsumexp, so strongly graded row scales lose no precision.

    ``log_scale`` has shape ``(..., n)``, ``m`` shape ``(..., n, kmax)``.
    Returns shape ``(..., len(ks))``.
    """
    log_scale = np.asarray(log_scale, dtype=float)
    n = m.shape[-2]
    out = []
    for k in ks:
        S = _subsets(n, k)
        sub = m[..., S, :k]  # (..., nS, k, k)
        _, logabs = np.linalg.slogdet(sub)
        terms = 2.0 * logabs + 2.0 * log_scale[..., S].sum(axis=-1)
        out.append(logsumexp(terms, axis=-1))
    return np.stack(out, axis=-1)


def _compound(m: np.ndarray, k: int) -> np.ndarray:
    n = m.shape[-1]
    S = _subsets(n, k)
    sub = m[..., S[:, None, :, None], S[None, :, None, :]]
    return np.linalg.det(sub)


def log_singular_values(log_left, m: np.ndarray, log_right, e: int = 1) -> np.ndarray:
    """Logarithms of the singular values of diag(e^log_left) @ m @ diag(e^log_right).

    The product of the top k singular values is the spectral norm of the k-th
    compound matrix, whose diagonal scalings are products of the outer scales.
    Both scalings are normalized by their maxima, so no entry overflows and
    each partial product is computed to relative accuracy.  ``e`` is the
    embedding block size; quaternion singular values appear e-fold.
    """
    n = m.shape[-1]
    batch = m.shape[:-2]
    a = np.broadcast_to(np.asarray(log_left, dtype=float), batch + (n,))
    b = np.broadcast_to(np.asarray(log_right, dtype=float), batch + (n,))
    L = np.zeros(batch + (n // e + 1,))
    for j, k in enumerate(range(e, n + 1, e), start=1):
        S = _subsets(n, k)
        aS = a[..., S].sum(axis=-1)
        bS = b[..., S].sum(axis=-1)
        amax = aS.max(axis=-1, keepdims=True)
        bmax = bS.max(axis=-1, keepdims=True)
        if k == n:
            _, logabs = np.linalg.slogdet(m)
            L[..., j] = logabs + aS[..., 0] + bS[..., 0]
            continue
        C = _compound(m, k)
        C = np.exp(aS - amax)[..., :, None] * C * np.exp(bS - bmax)[..., None, :]
        top = np.linalg.svd(C, compute_uv=False)[..., 0]
        with np.errstate(divide="ignore"):
            L[..., j] = np.log(top) + amax[..., 0] + bmax[..., 0]
    ls = np.diff(L, axis=-1) / e
    return ls
