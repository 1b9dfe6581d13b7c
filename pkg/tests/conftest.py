import numpy as np
import pytest

from weylwalk.algebra import Field, MatrixF, ct


def random_matrix(field, rows, cols, gen, size=None) -> MatrixF:
    shape = (rows, cols, field.d) if size is None else (size, rows, cols, field.d)
    return MatrixF.from_components(field, gen.standard_normal(shape))


def random_pd(field, q, gen) -> MatrixF:
    m = random_matrix(field, q, q, gen)
    x = ct(m.data) @ m.data + 0.5 * np.eye(q * field.e)
    return MatrixF(field, 0.5 * (x + ct(x)))


@pytest.fixture
def gen():
    return np.random.default_rng(20261015)


FIELDS = [Field.R, Field.C, Field.H]
