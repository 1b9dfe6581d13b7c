import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylwalk import hypergroup
from weylwalk.algebra import ChamberPoint, Field
from weylwalk.hypergroup import (
    DiscreteMeasure,
    conv_step_A,
    conv_step_BC,
    emit_csv,
    measure_sample,
    read_csv,
    step_batch,
    walk,
    walk_checkpoints,
    walk_endpoints,
)
from weylwalk.limits import ks_two_sample
from weylwalk.sampling import AParams, BcParams

from conftest import FIELDS

NU_BC = DiscreteMeasure.from_lists("B", [(1.0, 0.3), (2.0, 1.0)], [0.5, 0.5])
NU_A = DiscreteMeasure.from_lists("A", [(1.0, 0.3), (2.0, -1.0)], [0.5, 0.5])


# --- measures


def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure.from_lists("B", [(1.0, 0.0)], [0.9])
    with pytest.raises(ValueError):
        DiscreteMeasure.from_lists("B", [(1.0, 0.0), (1.0,)], [0.5, 0.5])
    with pytest.raises(ValueError):
        DiscreteMeasure.from_lists("B", [(0.3, 1.0)], [1.0])
    assert DiscreteMeasure.point(ChamberPoint("B", [0.0, 0.0])).is_identity()


def test_measure_sample_single_atom():
    nu = DiscreteMeasure.point(ChamberPoint("A", [2.0, 1.0]))
    x = measure_sample(nu, 0, size=1000)
    assert np.all(x == [2.0, 1.0])
    assert measure_sample(nu, 0) == ChamberPoint("A", [2.0, 1.0])


@pytest.mark.parametrize("w", [0.5, 0.3])
def test_measure_sample_frequencies(w):
    nu = DiscreteMeasure.from_lists("B", [(1.0,), (2.0,)], [w, 1 - w])
    n = 100_000
    x = measure_sample(nu, 5, size=n)
    freq = np.mean(x[:, 0] == 1.0)
    assert abs(freq - w) < 4 * np.sqrt(w * (1 - w) / n)


# --- one convolution step


@pytest.mark.parametrize("field", FIELDS)
def test_identity_atom_exact(field):
    t = ChamberPoint("B", [1.7, 0.4])
    zero = ChamberPoint.zero("B", 2)
    params = BcParams(2, field, 3.5)
    assert np.array_equal(conv_step_BC(zero, t, params, 1).values, t.values)
    assert np.array_equal(conv_step_BC(t, zero, params, 1).values, t.values)
    assert np.array_equal(conv_step_BC(zero, zero, params, 1).values, [0.0, 0.0])
    ta = ChamberPoint("A", [1.7, -0.4])
    assert np.array_equal(conv_step_A(ChamberPoint.zero("A", 2), ta, AParams(2, field), 1).values, ta.values)


def test_identity_atom_exact_batched():
    # nonzero inputs that need the kernel must still give t exactly at s = 0
    S = np.zeros((500, 3))
    T = np.tile([40.0, 3.0, 0.5], (500, 1))
    out = step_batch(S, T, BcParams(3, "C", 5.5), 2)
    assert np.array_equal(out, T)


@settings(max_examples=30, deadline=None)
@given(
    st.sampled_from(FIELDS),
    st.lists(st.floats(-30, 30), min_size=3, max_size=3),
    st.lists(st.floats(-30, 30), min_size=3, max_size=3),
    st.integers(0, 2 ** 32 - 1),
)
def test_A_step_sum_exact(field, s, t, seed):
    s = np.sort(s)[::-1]
    t = np.sort(t)[::-1]
    out = step_batch(np.tile(s, (64, 1)), np.tile(t, (64, 1)), AParams(3, field), seed)
    assert np.all(np.diff(out, axis=1) <= 0)
    assert np.allclose(out.sum(axis=1), s.sum() + t.sum(), rtol=0, atol=1e-12 * (1 + abs(s).sum() + abs(t).sum()))


def test_BC_support_bound():
    s = np.array([1.2, 0.5])
    t = np.array([0.8, 0.1])
    out = step_batch(np.tile(s, (100_000, 1)), np.tile(t, (100_000, 1)), BcParams(2, "R", 3.5), 9)
    assert out.max() <= s[0] + t[0] + 1e-9
    assert out.min() >= 0.0


@settings(max_examples=30, deadline=None)
@given(
    st.sampled_from(FIELDS),
    st.floats(3.01, 12.0),
    st.lists(st.floats(0, 60), min_size=2, max_size=2),
    st.lists(st.floats(0, 60), min_size=2, max_size=2),
    st.integers(0, 2 ** 32 - 1),
)
def test_BC_step_in_chamber_and_bounded(field, p, s, t, seed):
    s = np.sort(s)[::-1]
    t = np.sort(t)[::-1]
    out = step_batch(np.tile(s, (32, 1)), np.tile(t, (32, 1)), BcParams(2, field, p), seed)
    assert np.all(np.isfinite(out))
    assert np.all(np.diff(out, axis=1) <= 0) and np.all(out[:, -1] >= 0)
    assert out.max() <= s[0] + t[0] + 1e-9


@pytest.mark.parametrize("field", FIELDS)
def test_BC_step_near_origin_is_accurate(field):
    # arcosh of a singular value near 1 would leave ~1e-8 noise here
    s = np.array([3e-12, 1e-12])
    t = np.array([2e-12, 0.0])
    out = step_batch(np.tile(s, (200, 1)), np.tile(t, (200, 1)), BcParams(2, field, 4.5), 3)
    assert out.max() <= (s[0] + t[0]) * (1 + 1e-9)
    assert out.min() >= 0.0


@pytest.mark.parametrize("field", FIELDS)
def test_BC_kernel_paths_agree(field, monkeypatch):
    params = BcParams(3, field, 6.5)
    gen = np.random.default_rng(4)
    S = -np.sort(-gen.uniform(0, 0.45, (500, 3)), axis=1)
    T = -np.sort(-gen.uniform(0, 0.45, (500, 3)), axis=1)
    near = step_batch(S, T, params, 11)
    monkeypatch.setattr(hypergroup, "NEAR_SCALE", -1.0)
    far = step_batch(S, T, params, 11)
    assert np.max(np.abs(near - far)) < 1e-11


def test_step_errors():
    params = BcParams(2, "R", 3.5)
    with pytest.raises(ValueError):
        conv_step_BC(ChamberPoint("B", [1.0]), ChamberPoint("B", [1.0, 0.0]), params, 0)
    with pytest.raises(ValueError):
        conv_step_BC(ChamberPoint("A", [1.0, 0.0]), ChamberPoint("B", [1.0, 0.0]), params, 0)
    with pytest.raises(ValueError):
        step_batch(np.zeros((3, 2)), np.zeros((4, 2)), params, 0)


# --- walks


def test_walk_trivial_cases():
    params = BcParams(2, "R", 3.5)
    tr = walk(NU_BC, 0, params, 1)
    assert tr.points.shape == (1, 2) and not np.any(tr.points)
    delta0 = DiscreteMeasure.point(ChamberPoint.zero("B", 2))
    tr = walk(delta0, 50, params, 1)
    assert tr.k == 50 and not np.any(tr.points)


def test_walk_first_step_is_nu():
    params = BcParams(2, "H", 3.5)
    n = 20_000
    S1 = walk_endpoints(NU_BC, 1, params, n, 4)
    direct = measure_sample(NU_BC, 99, size=n)
    for i in range(2):
        assert ks_two_sample(S1[:, i], direct[:, i])[1] > 1e-3


def test_walk_reproducible_and_worker_independent():
    params = BcParams(2, "C", 3.5)
    a = walk_endpoints(NU_BC, 30, params, 600, 12, workers=1)
    b = walk_endpoints(NU_BC, 30, params, 600, 12, workers=2)
    assert np.array_equal(a, b)
    path, _ = walk_checkpoints(NU_BC, 30, params, 600, 12, [0, 10, 30])
    assert np.array_equal(path[:, -1], a)
    assert not np.any(path[:, 0])
    c = walk_endpoints(NU_BC, 30, params, 600, 13)
    assert not np.array_equal(a, c)


def test_walk_A_step_sums():
    params = AParams(2, "R")
    S, tsum = walk_endpoints(NU_A, 200, params, 256, 3, return_step_sums=True)
    assert np.allclose(S.sum(axis=1), tsum, rtol=1e-12, atol=1e-9)


def test_trajectory_metadata():
    tr = walk(NU_BC, 5, BcParams(2, "R", 3.5), 77)
    assert tr.seed == 77 and tr.point(5).chamber == "B"


# --- CSV


def test_csv_roundtrip(tmp_path):
    tr = walk(NU_BC, 2, BcParams(2, "R", 3.5), 5)
    path = emit_csv(tr.points, tmp_path / "walk.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "step,coord_1,coord_2"
    assert len(lines) == 4
    assert np.array_equal(read_csv(path), tr.points)


def test_csv_empty(tmp_path):
    path = emit_csv(np.zeros((0, 2)), tmp_path / "empty.csv")
    assert path.read_text(encoding="utf-8") == "step,coord_1,coord_2\n"
    assert read_csv(path).shape == (0, 2)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=30))
def test_csv_bit_exact(tmp_path_factory, xs):
    arr = np.array(xs[: len(xs) // 3 * 3]).reshape(-1, 3)
    path = emit_csv(arr, tmp_path_factory.mktemp("csv") / "x.csv")
    assert np.array_equal(read_csv(path), arr)
