import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylwalk.algebra import (
    ChamberPoint,
    DimensionError,
    Field,
    MatrixF,
    NumericDomainError,
    a_matrix_A,
    a_matrix_BC,
    arcosh_from_log,
    chamber_project_A,
    chamber_project_BC,
    ct,
    det_modulus,
    elementary_symmetric_mean,
    g_matrix,
    log_principal_minors,
    log_singular_values,
    power_function,
    principal_minor,
    psd_sqrt,
    repeat_diag,
    singular_spectrum,
)
from weylwalk.sampling import BcParams, haar_unitary, sample_mp

from conftest import FIELDS, random_matrix, random_pd


# --- fields and embedding


def test_field_parse():
    assert Field.parse("h") is Field.H
    assert Field.parse(2) is Field.C
    assert Field.parse("4") is Field.H
    with pytest.raises(ValueError):
        Field.from_d(3)


@pytest.mark.parametrize("field", FIELDS)
def test_embedding_is_multiplicative(field, gen):
    a = random_matrix(field, 3, 2, gen)
    b = random_matrix(field, 2, 4, gen)
    prod = a @ b
    assert prod.rows == 3 and prod.cols == 4
    # round trip through components
    again = MatrixF.from_components(field, prod.components())
    assert np.allclose(again.data, prod.data)


def test_quaternion_noncommutative(gen):
    a = random_matrix(Field.H, 1, 1, gen)
    b = random_matrix(Field.H, 1, 1, gen)
    assert not np.allclose((a @ b).data, (b @ a).data)


# --- determinant


@pytest.mark.parametrize("field", FIELDS)
def test_det_identity(field):
    assert det_modulus(MatrixF.identity(3, field)) == pytest.approx(1.0, abs=1e-15)


def test_det_diagonal():
    assert det_modulus(MatrixF.from_real(Field.R, np.diag([2.0, 3.0]))) == pytest.approx(6.0)


def test_det_quaternion_against_embedding(gen):
    for _ in range(20):
        m = random_matrix(Field.H, 3, 3, gen)
        lhs = det_modulus(m) ** 2
        rhs = abs(np.linalg.det(m.data))
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, rhs)


def test_det_singular_and_nonsquare():
    assert det_modulus(MatrixF.from_real(Field.R, np.zeros((2, 2)))) == 0.0
    with pytest.raises(DimensionError):
        det_modulus(MatrixF.from_real(Field.R, np.ones((2, 3))))


# --- principal minors and power function


@pytest.mark.parametrize("field", FIELDS)
def test_minors_of_identity(field):
    x = MatrixF.identity(3, field)
    for r in (1, 2, 3):
        assert principal_minor(x, r) == pytest.approx(1.0, abs=1e-14)


def test_minors_diagonal():
    x = MatrixF.from_real(Field.R, np.diag([4.0, 1.0]))
    assert principal_minor(x, 1) == pytest.approx(4.0)
    assert principal_minor(x, 2) == pytest.approx(4.0)


def test_quaternion_minors_against_embedding(gen):
    for _ in range(20):
        x = random_pd(Field.H, 2, gen)
        for r in (1, 2):
            direct = np.sqrt(np.linalg.det(x.data[: 2 * r, : 2 * r]).real)
            assert abs(principal_minor(x, r) - direct) <= 1e-9 * max(1.0, direct)


@pytest.mark.parametrize("field", FIELDS)
def test_last_minor_is_determinant(field, gen):
    x = random_pd(field, 3, gen)
    assert principal_minor(x, 3) == pytest.approx(det_modulus(x), rel=1e-10)


def test_minor_errors(gen):
    x = random_pd(Field.R, 2, gen)
    with pytest.raises(ValueError):
        principal_minor(x, 3)
    with pytest.raises(ValueError):
        principal_minor(MatrixF.from_real(Field.R, np.array([[1.0, 2.0], [0.0, 1.0]])), 1)
    with pytest.raises(ValueError):
        log_principal_minors(MatrixF.from_real(Field.R, np.diag([1.0, -1.0])))


def test_power_function_examples():
    x = MatrixF.from_real(Field.R, np.diag([4.0, 1.0]))
    assert power_function(x, [1, 0]) == pytest.approx(4.0)
    assert power_function(x, [0, 1]) == pytest.approx(1.0)
    assert power_function(MatrixF.identity(2, Field.C), [0.3 + 2j, -1j]) == pytest.approx(1.0)


# --- singular spectrum and chamber projections


def test_singular_spectrum_examples():
    assert np.allclose(singular_spectrum(MatrixF.identity(3, Field.H)), 1.0)
    assert np.allclose(singular_spectrum(MatrixF.from_real(Field.R, np.diag([3.0, -1.0]))), [3.0, 1.0])
    assert np.allclose(chamber_project_A(MatrixF.identity(3, Field.H)).values, 0.0)


@pytest.mark.parametrize("field", FIELDS)
def test_singular_spectrum_eigen_oracle(field, gen):
    m = random_matrix(field, 3, 3, gen)
    s = singular_spectrum(m)
    ev = np.sort(np.linalg.eigvalsh(ct(m.data) @ m.data))[::-1][:: field.e]
    assert np.allclose(s ** 2, ev, rtol=1e-9)


def test_chamber_project_A_examples():
    g = MatrixF.from_real(Field.R, np.diag([np.e ** 2, np.e]))
    assert np.allclose(chamber_project_A(g).values, [2.0, 1.0])
    t = ChamberPoint("A", [1.0, 0.0])
    assert np.allclose(a_matrix_A(t).data, np.diag([np.e, 1.0]))
    with pytest.raises(NumericDomainError):
        chamber_project_A(MatrixF.from_real(Field.R, np.zeros((2, 2))))


@pytest.mark.parametrize("field", FIELDS)
def test_chamber_project_A_biinvariant(field):
    t = ChamberPoint("A", [1.3, 0.2, -0.7])
    k1 = haar_unitary(3, field, 1)
    k2 = haar_unitary(3, field, 2)
    g = k1 @ a_matrix_A(t, field) @ k2
    assert np.allclose(chamber_project_A(g).values, t.values, atol=1e-10)


def test_a_matrix_BC_examples():
    assert np.allclose(a_matrix_BC([0.0, 0.0], 3).data, np.eye(5))
    m = a_matrix_BC([0.7], 2).data
    assert m.shape == (3, 3)
    assert m[0, 0] == pytest.approx(np.cosh(0.7))
    with pytest.raises(ValueError):
        a_matrix_BC([1.0, 0.5], 2)


@pytest.mark.parametrize("field", FIELDS)
def test_chamber_project_BC_biinvariant(field, gen):
    q, p = 2, 3
    t = ChamberPoint("B", [1.1, 0.4])
    assert np.allclose(chamber_project_BC(a_matrix_BC(t, p, field), q).values, t.values)
    e = field.e
    K = []
    for key in range(2):
        k = np.zeros(((q + p) * e, (q + p) * e), dtype=complex)
        k[: q * e, : q * e] = haar_unitary(q, field, (10 + key)).data
        k[q * e :, q * e :] = haar_unitary(p, field, (20 + key)).data
        K.append(MatrixF(field, k))
    g = K[0] @ a_matrix_BC(t, p, field) @ K[1]
    assert np.allclose(chamber_project_BC(g, q).values, t.values, atol=1e-9)


def test_chamber_project_BC_domain():
    g = MatrixF.from_real(Field.R, np.diag([0.5, 1.0, 1.0]))
    with pytest.raises(NumericDomainError):
        chamber_project_BC(g, 1)
    # inside the clamp window
    g = MatrixF.from_real(Field.R, np.diag([1 - 1e-12, 1.0, 1.0]))
    assert chamber_project_BC(g, 1).values[0] == 0.0


def test_chamber_point_validation():
    with pytest.raises(ValueError):
        ChamberPoint("B", [0.3, 1.0])
    with pytest.raises(ValueError):
        ChamberPoint("B", [1.0, -0.1])
    assert ChamberPoint("A", [1.0, -0.1]).q == 2
    assert ChamberPoint("BC", [0.0]).chamber == "B"


# --- g(t, u, w)


@pytest.mark.parametrize("field", FIELDS)
def test_g_matrix_examples(field):
    q = 2
    u = haar_unitary(q, field, 3)
    w = sample_mp(BcParams(q, field, 4.0), 4)
    assert np.allclose(g_matrix([0.0, 0.0], u, w).data, np.eye(q * field.e))
    t = np.array([0.9, 0.3])
    zero = MatrixF(field, np.zeros((q * field.e, q * field.e)))
    assert det_modulus(g_matrix(t, u, zero)) == pytest.approx(np.prod(np.cosh(t) ** 2), rel=1e-10)
    # w = I turns cosh t + sinh t w into e^t
    eye_w = MatrixF.identity(q, field)
    direct = ct(u.data) @ np.diag(np.exp(2 * repeat_diag(t, field))) @ u.data
    assert np.allclose(g_matrix(t, u, eye_w).data, direct)


def test_g_matrix_rejects_bad_inputs():
    u = MatrixF.from_real(Field.R, np.array([[1.0, 1.0], [0.0, 1.0]]))
    w = MatrixF.from_real(Field.R, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        g_matrix([1.0, 0.0], u, w)
    with pytest.raises(ValueError):
        g_matrix([1.0, 0.0], MatrixF.identity(2, Field.R), MatrixF.from_real(Field.R, 2 * np.eye(2)))


# --- symmetric means and square roots


def test_elementary_symmetric_mean_examples(gen):
    assert elementary_symmetric_mean(np.ones(4), 2) == pytest.approx(1.0)
    assert elementary_symmetric_mean([4.0, 1.0], 1) == pytest.approx(2.5)
    a = gen.uniform(0.1, 3.0, size=3)
    for r in (1, 2, 3):
        brute = sum(np.prod(a[list(S)]) for S in itertools.combinations(range(3), r)) / comb(3, r)
        assert elementary_symmetric_mean(a, r) == pytest.approx(brute, rel=1e-12)


def test_psd_sqrt_examples(gen):
    assert np.allclose(psd_sqrt(MatrixF.identity(2, Field.R)).data, np.eye(2))
    assert np.allclose(psd_sqrt(MatrixF.from_real(Field.R, np.diag([4.0, 9.0]))).data, np.diag([2.0, 3.0]))
    for field in FIELDS:
        h = random_pd(field, 3, gen)
        s = psd_sqrt(h)
        assert np.max(np.abs(s.data @ s.data - h.data)) < 1e-9
    with pytest.raises(ValueError):
        psd_sqrt(MatrixF.from_real(Field.R, np.diag([1.0, -1.0])))


# --- log-domain kernels


def test_arcosh_from_log():
    L = np.array([0.0, 1e-8, 0.5, 3.0, 40.0])
    assert np.allclose(arcosh_from_log(L[:4]), np.arccosh(np.exp(L[:4])))
    # large L: arcosh(e^L) = L + ln 2 up to e^{-2L}
    assert arcosh_from_log(L[4:])[0] == pytest.approx(40.0 + np.log(2.0), rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=1, max_value=3),
    st.sampled_from(FIELDS),
    st.lists(st.floats(-4, 4), min_size=3, max_size=3),
    st.lists(st.floats(-4, 4), min_size=3, max_size=3),
    st.integers(0, 2 ** 32 - 1),
)
def test_log_singular_values_matches_svd(q, field, left, right, seed):
    e = field.e
    gen = np.random.default_rng(seed)
    m = random_matrix(field, q, q, gen).data
    a = repeat_diag(np.array(left[:q]), field)
    b = repeat_diag(np.array(right[:q]), field)
    L = log_singular_values(a, m, b, e=e)
    direct = np.linalg.svd(np.exp(a)[:, None] * m * np.exp(b)[None, :], compute_uv=False)[::e]
    assert np.allclose(L, np.log(direct), atol=1e-8)


def test_log_singular_values_far_scales():
    # scales far beyond exp overflow still give the exact leading exponents
    m = np.array([[1.0, 0.5], [0.25, 1.0]])
    L = log_singular_values(np.array([900.0, 0.0]), m, np.array([800.0, 0.0]))
    assert L[0] == pytest.approx(1700.0, abs=1e-9)
    assert L.sum() == pytest.approx(1700.0 + np.log(abs(np.linalg.det(m))), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(FIELDS), st.integers(2, 3), st.integers(0, 2 ** 32 - 1))
def test_minor_sandwich_property(field, q, seed):
    gen = np.random.default_rng(seed)
    t = np.sort(gen.uniform(-2, 2, size=q))[::-1]
    u = haar_unitary(q, field, seed)
    x = MatrixF(field, ct(u.data) @ np.diag(np.exp(2 * repeat_diag(t, field))) @ u.data)
    lm = 0.5 * log_principal_minors(x)
    for r in range(1, q + 1):
        assert r * t[-1] - 1e-10 <= lm[r - 1] <= t[:r].sum() + 1e-10
