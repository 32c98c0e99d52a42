import numpy as np
import pytest
from hypothesis import given, strategies as st

from mimo_bc.channel import (
    DecompositionError,
    SingularMatrixError,
    batch_modes,
    orthogonality,
    orthogonality_defect,
    random_unit_vectors,
    rng_stream,
    sample_channel,
    sample_channels,
    svd_modes,
)


def test_entries_zero_mean_unit_variance():
    H = sample_channels(250_000, 2, 2, rng_stream(1))
    x = H.ravel()
    n = x.size
    se = np.sqrt(0.5 / n)
    assert abs(x.real.mean()) < 3 * se
    assert abs(x.imag.mean()) < 3 * se
    # each part has variance 1/2, so |h|^2 has mean 1
    assert abs(x.real.var() - 0.5) < 0.01
    assert abs(x.imag.var() - 0.5) < 0.01
    assert abs(np.mean(x.real * x.imag)) < 4 * 0.5 / np.sqrt(n)


def test_frobenius_mean_matches_MK():
    H = sample_channels(100_000, 2, 2, rng_stream(2))
    fro = np.sum(np.abs(H) ** 2, axis=(1, 2))
    se = fro.std(ddof=1) / np.sqrt(fro.size)
    assert abs(fro.mean() - 4.0) < 3 * se


def test_sampling_is_deterministic():
    a = sample_channel(2, 3, rng_stream(7, 1, 2), user_id=4)
    b = sample_channel(2, 3, rng_stream(7, 1, 2), user_id=4)
    assert np.array_equal(a.entries, b.entries)
    assert (a.K, a.M, a.user_id) == (2, 3, 4)
    c = sample_channel(2, 3, rng_stream(7, 1, 3))
    assert not np.array_equal(a.entries, c.entries)


def test_sample_channel_rejects_bad_dims():
    with pytest.raises(ValueError):
        sample_channel(0, 2, rng_stream(0))


def test_rank_one_mode():
    (mode,) = svd_modes(np.array([[3.0, 4.0]]))
    assert mode.eigenvalue == pytest.approx(25.0)
    assert np.allclose(mode.right_vector, [0.6, 0.8])
    assert mode.mode_index == 1
    assert np.allclose(mode.gain_vector, [3.0, 4.0])


def test_diagonal_modes():
    modes = svd_modes(np.diag([2.0, 1.0]))
    assert [m.eigenvalue for m in modes] == pytest.approx([4.0, 1.0])
    assert np.allclose(modes[0].right_vector, [1, 0])
    assert np.allclose(modes[1].right_vector, [0, 1])


def test_reconstruction_and_invariants():
    for trial in range(50):
        h = sample_channel(2, 4, rng_stream(3, trial))
        modes = svd_modes(h)
        lam = np.array([m.eigenvalue for m in modes])
        assert np.all(np.diff(lam) <= 0)
        U = np.column_stack([m.left_vector for m in modes])
        V = np.column_stack([m.right_vector for m in modes])
        R = U @ np.diag(np.sqrt(lam)) @ V.conj().T
        assert np.linalg.norm(R - h.entries) < 1e-9
        assert np.allclose(np.linalg.norm(V, axis=0), 1, atol=1e-10)
        assert np.allclose(np.linalg.norm(U, axis=0), 1, atol=1e-10)
        assert abs(lam.sum() - np.sum(np.abs(h.entries) ** 2)) < 1e-9
        # the first non-negligible entry of every right vector is real positive
        for v in V.T:
            lead = v[np.argmax(np.abs(v) > 1e-12)]
            assert abs(lead.imag) < 1e-12 and lead.real > 0


def test_projected_receive_equation():
    # U_j^* H x = sqrt(lam_j) V_j^* x
    h = sample_channel(3, 4, rng_stream(4))
    x = sample_channel(4, 1, rng_stream(5)).entries[:, 0]
    for m in svd_modes(h):
        assert np.isclose(m.left_vector.conj() @ h.entries @ x, m.gain_vector @ x)


def test_more_receive_than_transmit_antennas():
    h = sample_channel(4, 2, rng_stream(6))
    assert len(svd_modes(h)) == 2


def test_batch_modes_matches_single():
    H = sample_channels(5, 2, 3, rng_stream(8))
    lam, right, left = batch_modes(H)
    for n in range(5):
        modes = svd_modes(H[n])
        assert np.allclose(lam[n], [m.eigenvalue for m in modes])
        assert np.allclose(right[n], [m.right_vector for m in modes])


def test_non_finite_channel_raises():
    with pytest.raises(DecompositionError):
        svd_modes(np.array([[np.nan, 1.0]]))


def test_orthogonality_examples():
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert orthogonality(e1, e1) == pytest.approx(1.0)
    assert orthogonality(e1, e2) == 0.0
    assert orthogonality(e1, np.array([1.0, 1.0]) / np.sqrt(2)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        orthogonality(e1, np.zeros(2))


@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * np.pi), st.floats(0.1, 10))
def test_orthogonality_symmetric_and_phase_invariant(seed, phi, scale):
    v, psi = random_unit_vectors(2, 3, rng_stream(seed))
    z = orthogonality(v, psi)
    assert 0.0 <= z <= 1.0
    assert orthogonality(psi, v) == pytest.approx(z, abs=1e-12)
    assert orthogonality(np.exp(1j * phi) * v, psi) == pytest.approx(z, abs=1e-12)
    assert orthogonality(v, scale * np.exp(-1j * phi) * psi) == pytest.approx(z, abs=1e-12)


def test_defect_examples():
    assert orthogonality_defect(np.eye(3)) == pytest.approx(1.0)
    rows = [np.array([1.0, 0.0]), np.array([1.0, 1.0]) / np.sqrt(2)]
    assert orthogonality_defect(rows) == pytest.approx(2.0)
    with pytest.raises(SingularMatrixError):
        orthogonality_defect([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(ValueError):
        orthogonality_defect(np.ones((2, 3)))


def test_defect_hadamard_bound():
    H = sample_channels(1000, 3, 3, rng_stream(9))
    assert min(orthogonality_defect(h) for h in H) >= 1 - 1e-12


def test_column_norm_product_bounded_by_defect():
    # for A = (B^{-1})^*, |b_i|^2 |a_i|^2 <= defect of the columns of B
    B = sample_channels(10_000, 3, 3, rng_stream(10))
    A = np.swapaxes(np.linalg.inv(B).conj(), 1, 2)
    nb = np.sum(np.abs(B) ** 2, axis=1)
    na = np.sum(np.abs(A) ** 2, axis=1)
    defect = np.array([orthogonality_defect(b.T) for b in B])
    assert np.all(nb * na <= defect[:, None] * (1 + 1e-9))


def test_eigenvalue_independent_of_eigenvector():
    H = sample_channels(100_000, 1, 3, rng_stream(11))
    lam, right, _ = batch_modes(H)
    z = np.abs(right[:, 0, 0]) ** 2
    r = np.corrcoef(lam[:, 0], z)[0, 1]
    assert abs(r) < 3 / np.sqrt(lam.shape[0])


def test_random_unit_vectors_are_unit():
    v = random_unit_vectors(100, 4, rng_stream(12))
    assert np.allclose(np.linalg.norm(v, axis=1), 1)
