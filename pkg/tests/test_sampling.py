import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from weylwalk.algebra import Field, MatrixF, ct, det_modulus, singular_spectrum
from weylwalk.sampling import (
    AParams,
    BcParams,
    RngStream,
    _p_map,
    ball_point,
    haar_unitary,
    mp_exponent,
    sample_mp,
    sample_mp_rejection,
)

from conftest import FIELDS
from oracles import ball_radial_pvalue, haar_invariance_suite, mp_against_rejection


# --- streams


def test_stream_reproducible():
    a = RngStream(5, (1, 2)).gen.standard_normal(10)
    b = RngStream(5, (1, 2)).gen.standard_normal(10)
    assert np.array_equal(a, b)


def test_stream_children_independent_of_parent_use():
    s = RngStream(5)
    fresh = s.spawn(3).gen.uniform(size=4)
    s.gen.uniform(size=1000)
    assert np.array_equal(s.spawn(3).gen.uniform(size=4), fresh)
    assert not np.array_equal(s.spawn(4).gen.uniform(size=4), fresh)


def test_stream_siblings_uncorrelated():
    x = RngStream(1, (0,)).gen.standard_normal(50_000)
    y = RngStream(1, (1,)).gen.standard_normal(50_000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / np.sqrt(50_000)


# --- params


def test_bc_params_boundary():
    with pytest.raises(ValueError, match="p must exceed 2q-1 = 3"):
        BcParams(2, "R", 3.0)
    assert BcParams(2, "R", 3.0001).p == 3.0001
    assert BcParams(1, 2, 1.5).field is Field.C
    with pytest.raises(ValueError):
        AParams(0, "R")


def test_mp_exponent_q1_matches_ball_exponent():
    # for q = 1, P is the identity and m_p is the ball law with a = d(p-1)/2 - 1
    for d in (1, 2, 4):
        for p in (1.5, 3.0, 7.25):
            params = BcParams(1, d, p)
            assert mp_exponent(params) == pytest.approx(d * (p - 1) / 2 - 1)


# --- Haar


@pytest.mark.parametrize("field", FIELDS)
@pytest.mark.parametrize("q", [1, 2, 3])
def test_haar_suite(q, field):
    res = haar_invariance_suite(q, field, seed=11 * q + field.d)
    failed = {k: v for k, v in res.items() if not v[1]}
    assert not failed


def test_haar_single_draw_shape():
    u = haar_unitary(3, Field.H, 0)
    assert u.data.shape == (6, 6)
    assert np.max(np.abs(ct(u.data) @ u.data - np.eye(6))) < 1e-12


# --- ball points


def test_ball_uniform_interval():
    y = ball_point(1, Field.R, 0.0, 3, size=100_000).data[:, 0, 0]
    se = y.std(ddof=1) / np.sqrt(y.size)
    assert abs(y.mean()) < 4 * se
    y2 = y ** 2
    assert abs(y2.mean() - 1 / 3) < 4 * y2.std(ddof=1) / np.sqrt(y.size)


@pytest.mark.parametrize("field", FIELDS)
@pytest.mark.parametrize("a", [-0.5, 0.0, 2.5])
def test_ball_radial_beta(field, a):
    assert ball_radial_pvalue(2, field, a, seed=int(10 * a) + 10 + field.d) > 1e-3


def test_ball_inside_and_domain():
    y = ball_point(3, Field.H, 0.0, 1, size=5000).data
    assert np.all(np.sum(np.abs(y) ** 2, axis=(-1, -2)) / 2 < 1)
    # mass piles up at the sphere for a near -1; only rounding may reach it
    y = ball_point(3, Field.H, -0.9, 1, size=5000).data
    assert np.all(np.sum(np.abs(y) ** 2, axis=(-1, -2)) / 2 <= 1 + 1e-15)
    with pytest.raises(ValueError):
        ball_point(2, Field.R, -1.0, 0)


# --- P map and m_p


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(FIELDS), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_p_map_determinant_property(field, q, seed):
    s = RngStream(seed)
    ys = [ball_point(q, field, 0.5, s.spawn(j)).data for j in range(q)]
    P = _p_map(ys)
    Y = np.concatenate(ys, axis=-2)
    assert abs(det_modulus(MatrixF(field, P)) - det_modulus(MatrixF(field, Y))) < 1e-9


@pytest.mark.parametrize("field", FIELDS)
def test_mp_inside_ball(field):
    for p in (2 * 2 - 1 + 1e-3, 3.5, 9.0):
        w = sample_mp(BcParams(2, field, p), 7, size=5000)
        assert np.all(np.isfinite(w.data))
        assert singular_spectrum(w)[:, 0].max() <= 1 + 1e-12


def test_mp_q1_density():
    # q = 1, d = 1, p = 5: density prop. to (1 - w^2)^1, so w^2 ~ Beta(1/2, 2)
    w = sample_mp(BcParams(1, "R", 5.0), 2, size=20_000).data[:, 0, 0]
    assert stats.kstest(w ** 2, stats.beta(0.5, 2).cdf).pvalue > 1e-3


def test_rejection_sampler():
    params = BcParams(1, "R", 3.0)
    w = sample_mp_rejection(params, 4, size=50_000).data[:, 0, 0]
    assert abs(w.mean()) < 4 * w.std(ddof=1) / np.sqrt(w.size)
    assert sample_mp_rejection(BcParams(2, "R", 6.0), 0, size=10).data.shape == (10, 2, 2)
    with pytest.raises(ValueError):
        sample_mp_rejection(BcParams(2, "R", 3.5), 0)


@pytest.mark.parametrize("q,field,p", [(2, "R", 6.0), (1, "C", 3.0), (2, "C", 4.0)])
def test_mp_against_rejection(q, field, p):
    assert mp_against_rejection(q, field, p, seed=3) > 1e-3
