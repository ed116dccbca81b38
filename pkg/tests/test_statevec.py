import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homnet.errors import ConstraintViolation, LengthMismatch
from homnet.models import random_mixture, random_superposition
from homnet.statevec import (
    DensityMatrix,
    coincidence_general,
    density_from_mixture,
    density_from_superposition,
    inner,
)


def e(k, n=4):
    v = np.zeros(n)
    v[k] = 1.0
    return v


def test_inner():
    assert inner(e(0), e(0)) == 1.0
    assert inner(e(0), e(1)) == 0.0
    assert inner([0.6, 0.8], [1, 0]) == pytest.approx(0.6, abs=1e-15)
    with pytest.raises(LengthMismatch):
        inner(e(0, 3), e(0, 4))


def test_density_from_mixture_examples():
    U = density_from_mixture(e(0)[None], [1.0])
    np.testing.assert_array_equal(U.entries, np.outer(e(0), e(0)))
    assert U.trace == 1.0
    U = density_from_mixture(np.stack([e(0), e(1)]), [0.5, 0.5])
    np.testing.assert_array_equal(U.entries, np.diag([0.5, 0.5, 0, 0]))


def test_density_from_mixture_random_is_psd(rng):
    m = random_mixture(rng, 8, 4)
    U = density_from_mixture(m.hidden, m.out_weights)
    assert U.is_symmetric()
    assert U.is_psd()
    assert abs(U.trace - 1.0) < 1e-9


def test_density_from_mixture_rejects_invalid():
    with pytest.raises(ConstraintViolation):
        density_from_mixture(np.stack([e(0), e(1)]), [0.7, 0.7])
    with pytest.raises(ConstraintViolation):
        density_from_mixture(np.stack([e(0), 2 * e(1)]), [0.5, 0.5])
    with pytest.raises(ConstraintViolation):
        density_from_mixture(np.stack([e(0), e(1)]), [1.5, -0.5])
    with pytest.raises(LengthMismatch):
        density_from_mixture(np.stack([e(0), e(1)]), [1.0])


def test_density_from_superposition_examples():
    U = density_from_superposition(e(0)[None], [1.0])
    np.testing.assert_array_equal(U.entries, np.outer(e(0), e(0)))
    rows = np.stack([e(0), e(1)])
    # trace 1/2: rejected rather than silently renormalized
    with pytest.raises(ConstraintViolation):
        density_from_superposition(rows, [0.5, 0.5])
    h = 1 / np.sqrt(2)
    U = density_from_superposition(rows, [h, h])
    assert abs(U.trace - 1.0) < 1e-12
    assert U.rank() == 1


def test_coincidence_examples():
    assert coincidence_general(e(0), np.outer(e(0), e(0))) == 0.0
    assert coincidence_general(e(0), np.outer(e(1), e(1))) == 0.5
    x = (e(0) + e(1)) / np.sqrt(2)
    assert coincidence_general(x, np.diag([0.5, 0.5, 0, 0])) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(LengthMismatch):
        coincidence_general(e(0, 3), np.eye(4) / 4)


def test_coincidence_explicit_C():
    # C overrides the normalization term
    assert coincidence_general(e(0), np.outer(e(1), e(1)), C=0.8) == pytest.approx(0.4)


def test_density_matrix_shape_check():
    with pytest.raises(LengthMismatch):
        DensityMatrix(np.zeros((2, 3)))


def _unit(rng, n):
    x = rng.normal(size=n)
    return x / np.linalg.norm(x)


def test_oracle_equivalence(rng):
    from homnet.models import forward_mixture, forward_superposition

    for _ in range(200):
        N = int(rng.integers(2, 33))
        M = int(rng.integers(1, 9))
        x = _unit(rng, N)
        mix = random_mixture(rng, N, M)
        p = coincidence_general(x, density_from_mixture(mix.hidden, mix.out_weights))
        assert abs(p - (1 - forward_mixture(mix, x)) / 2) <= 1e-12
        sup = random_superposition(rng, N, M)
        p = coincidence_general(x, density_from_superposition(sup.hidden, sup.out_weights))
        assert abs(p - (1 - forward_superposition(sup, x)) / 2) <= 1e-12


def test_coincidence_bounds(rng):
    for _ in range(300):
        N = int(rng.integers(2, 17))
        x = _unit(rng, N)
        m = random_mixture(rng, N, int(rng.integers(1, 6)))
        p = coincidence_general(x, density_from_mixture(m.hidden, m.out_weights))
        assert -1e-15 <= p <= 0.5 + 1e-15


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.integers(1, 5))
def test_coincidence_is_affine_in_U(seed, N, k):
    g = np.random.default_rng(seed)
    x = _unit(g, N)
    Us = [density_from_mixture(*_rand_mix(g, N)) for _ in range(k)]
    w = g.dirichlet(np.ones(k))
    mixed = sum(wi * U.entries for wi, U in zip(w, Us))
    lhs = coincidence_general(x, mixed)
    rhs = sum(wi * coincidence_general(x, U) for wi, U in zip(w, Us))
    assert abs(lhs - rhs) <= 1e-12


def _rand_mix(g, N):
    m = random_mixture(g, N, int(g.integers(1, 4)))
    return m.hidden, m.out_weights
