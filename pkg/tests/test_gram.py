import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as O
from nusl.gram import (HollowMatrix, RestrictedRowNorm, SubmatrixOpNorm, _power_norm,
                       cross_gram, gram_quantities, hollow_gram, operator_norm,
                       restricted_conditioning, restricted_max_row_norm, submatrix_norm)
from nusl.model import ModelError, Support, SupportModel

R2 = 2 ** -0.5
H2 = np.array([[0, R2], [R2, 0]])


def test_hollow_gram_examples():
    assert not np.any(np.asarray(hollow_gram(np.eye(4))))
    h = hollow_gram(np.array([[1, R2], [0, R2]]))
    np.testing.assert_allclose(np.asarray(h), H2, atol=1e-15)
    assert h.symmetric
    with pytest.raises(ModelError):
        hollow_gram(np.eye(2) * 2)


@settings(max_examples=30)
@given(st.integers(1, 8), st.integers(1, 12), st.integers(0, 10 ** 6))
def test_hollow_gram_zero_diagonal_and_coherence(d, K, seed):
    phi = O.unit_columns(d, K, np.random.default_rng(seed))
    h = np.asarray(hollow_gram(phi))
    assert np.all(np.diag(h) == 0)
    direct = max((abs(phi[:, i] @ phi[:, j]) for i in range(K) for j in range(K) if i != j),
                 default=0.0)
    assert np.max(np.abs(h)) == pytest.approx(direct, abs=1e-15)


def test_cross_gram_examples():
    q = O.orthonormal(4, np.random.default_rng(0))
    assert np.max(np.abs(np.asarray(cross_gram(q, q)))) < 1e-15
    assert np.max(np.abs(np.asarray(cross_gram(2 * q, q)))) < 1e-15
    h = cross_gram(np.eye(2), np.array([[1, R2], [0, R2]]))
    np.testing.assert_allclose(np.asarray(h), [[0, R2], [0, 0]], atol=1e-15)
    assert not h.symmetric
    with pytest.raises(ModelError):
        cross_gram(np.eye(2), np.eye(3))


def test_hollow_matrix_checks():
    with pytest.raises(ModelError):
        HollowMatrix(np.eye(2), symmetric=True)
    with pytest.raises(ModelError):
        HollowMatrix(np.array([[0, 1.0], [0, 0]]), symmetric=True)


def test_gram_quantities_examples():
    q = gram_quantities(np.zeros((3, 3)), SupportModel(np.array([1, 1, 1.0]), 3))
    assert q.as_row() == {"mu": 0, "hw_inf2": 0, "wh_21": 0, "whw_op": 0, "K": 3}
    q = gram_quantities(H2, SupportModel(np.array([1.0, 1.0]), 2))
    for v in (q.mu, q.hw_inf2, q.wh_21, q.whw_op):
        assert v == pytest.approx(R2, abs=1e-15)
    q = gram_quantities(H2, SupportModel(np.array([1.0, 0.0]), 1))
    assert (q.mu, q.hw_inf2, q.wh_21) == pytest.approx((R2, R2, R2), abs=1e-15)
    assert q.whw_op == 0.0


def test_gram_quantities_shape_mismatch():
    with pytest.raises(ModelError):
        gram_quantities(H2, SupportModel(np.array([1.0, 1.0, 0.0]), 2))


def test_restricted_conditioning_examples():
    q = O.orthonormal(5, np.random.default_rng(1))
    assert restricted_conditioning(q, Support((1, 3, 4))) < 1e-14
    phi = np.array([[1, R2], [0, R2]])
    assert restricted_conditioning(phi, Support((1, 2))) == pytest.approx(R2, abs=1e-15)
    assert restricted_conditioning(phi, Support((2,))) == pytest.approx(0, abs=1e-15)
    assert restricted_conditioning(phi, Support()) == 0.0


def test_restricted_max_row_norm_examples():
    assert restricted_max_row_norm(np.zeros((3, 3)), Support((1, 2))) == 0
    assert restricted_max_row_norm(H2, Support((2,))) == pytest.approx(R2)
    h = np.asarray(hollow_gram(O.unit_columns(4, 7, np.random.default_rng(2))))
    full = Support(tuple(range(1, 8)))
    assert restricted_max_row_norm(h, full) == pytest.approx(np.linalg.norm(h, axis=1).max())


def test_operator_norm_examples():
    assert operator_norm(np.eye(5)) == pytest.approx(1.0, abs=1e-15)
    assert operator_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0, abs=1e-14)
    assert operator_norm(H2) == pytest.approx(R2, abs=1e-15)


def test_operator_norm_matches_svd_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = rng.standard_normal((50, 50))
        ref = np.linalg.svd(m, compute_uv=False).max()
        assert abs(operator_norm(m) - ref) <= 1e-9 * ref
        # the power-iteration branch must agree as well
        assert abs(_power_norm(m) - ref) <= 1e-9 * ref


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_submatrix_norm_monotone_in_support(seed):
    rng = np.random.default_rng(seed)
    h = np.asarray(hollow_gram(O.unit_columns(6, 12, rng)))
    full = operator_norm(h)
    perm = rng.permutation(12)
    prev = 0.0
    for k in range(1, 13):
        v = submatrix_norm(h, Support.from_zero_based(perm[:k]))
        assert v <= full + 1e-12
        assert v >= prev - 1e-12
        prev = v


def test_batched_statistics_match_scalar_versions():
    rng = np.random.default_rng(4)
    phi = O.unit_columns(8, 20, rng)
    idx = np.sort(np.array([rng.choice(20, 5, replace=False) for _ in range(50)]), axis=1)
    for h in (hollow_gram(phi), cross_gram(O.unit_columns(8, 20, rng), phi)):
        for stat in (SubmatrixOpNorm(h, chunk=7), RestrictedRowNorm(h, chunk=7)):
            ref = [stat(Support.from_zero_based(r)) for r in idx]
            np.testing.assert_allclose(stat.batch(idx), ref, rtol=1e-12, atol=1e-14)


def _chain(phi, psi, p):
    w = np.sqrt(p)
    q = gram_quantities(cross_gram(psi, phi), SupportModel(p, int(round(p.sum()))))
    a = operator_norm(phi * w)
    b = operator_norm(psi * w)
    return q, a, b


def test_norm_chain_on_random_instances():
    rng = np.random.default_rng(5)
    for _ in range(100):
        d, K = rng.integers(4, 16), rng.integers(8, 40)
        phi, psi = O.unit_columns(d, K, rng), O.unit_columns(d, K, rng)
        p = rng.uniform(0, 1, K)
        S = max(1, int(p.sum()))
        p *= S / p.sum()
        if np.any(p > 1):
            continue
        q, a, b = _chain(phi, psi, p)
        assert q.hw_inf2 <= a + 1e-9
        assert q.wh_21 <= b + 1e-9
        assert q.whw_op <= a * b + 1e-9


def test_third_norm_chain_inequality_can_fail():
    # Householder reflection as Psi, identity as Phi, all p_i = 1. The first
    # two inequalities hold for any unit-norm dictionaries; the third does not.
    v = np.ones(3) / np.sqrt(3)
    psi = np.eye(3) - 2 * np.outer(v, v)
    psi /= np.linalg.norm(psi, axis=0)
    q, a, b = _chain(np.eye(3), psi, np.ones(3))
    assert q.hw_inf2 <= a + 1e-12 and q.wh_21 <= b + 1e-12
    assert q.whw_op == pytest.approx(4 / 3)
    assert q.whw_op > a * b
