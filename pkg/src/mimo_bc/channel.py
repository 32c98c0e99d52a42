"""
Rayleigh channel sampling, eigenmode decomposition and orthogonality
primitives.

Every channel entry is CN(0, 1): real and imaginary parts are independent
N(0, 1/2). Random streams are counter based (Philox) and addressed by a
master seed plus a tuple of integer indices, so any (trial, user, ...)
coordinate maps to the same numbers no matter which worker draws them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ChannelMatrix",
    "EigenMode",
    "DecompositionError",
    "SingularMatrixError",
    "rng_stream",
    "sample_channel",
    "sample_channels",
    "svd_modes",
    "batch_modes",
    "orthogonality",
    "orthogonality_defect",
    "random_unit_vectors",
]


class DecompositionError(np.linalg.LinAlgError):
    """The SVD of a channel did not converge or the input was not finite."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A matrix that must be invertible is singular or too ill-conditioned."""


def rng_stream(master_seed: int, *indices: int) -> np.random.Generator:
    """Independent generator for the coordinate ``indices`` under ``master_seed``.

    Streams with different index tuples are statistically independent and
    reproducible bit for bit.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class ChannelMatrix:
    """One user's K x M channel realization (rows: receive antennas)."""

    user_id: int
    entries: np.ndarray

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def M(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class EigenMode:
    """A (user, mode) coordinate of the transmit space.

    ``eigenvalue`` is an eigenvalue of H H*, i.e. the squared singular value,
    so the equivalent scalar channel gain along ``right_vector`` is
    ``sqrt(eigenvalue)``. ``mode_index`` is 1-based and follows the
    non-increasing eigenvalue order.
    """

    user_id: int
    mode_index: int
    eigenvalue: float
    right_vector: np.ndarray
    left_vector: np.ndarray

    @property
    def gain_vector(self) -> np.ndarray:
        """Row vector g = sqrt(eigenvalue) * V^*."""
        return np.sqrt(self.eigenvalue) * self.right_vector.conj()


def _complex_normal(stream: np.random.Generator, shape) -> np.ndarray:
    re = stream.standard_normal(shape)
    im = stream.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(0.5)


def sample_channel(K: int, M: int, stream: np.random.Generator, user_id: int = 0) -> ChannelMatrix:
    """Draw one K x M channel with i.i.d. CN(0, 1) entries."""
    if K < 1 or M < 1:
        raise ValueError(f"channel dimensions must be positive, got K={K}, M={M}")
    return ChannelMatrix(user_id, _complex_normal(stream, (K, M)))


def sample_channels(N: int, K: int, M: int, stream: np.random.Generator) -> np.ndarray:
    """Draw N channels at once as an (N, K, M) complex array; user ``n`` is
    ``out[n]``."""
    if N < 1 or K < 1 or M < 1:
        raise ValueError(f"dimensions must be positive, got N={N}, K={K}, M={M}")
    re = stream.standard_normal((N, K, M))
    im = stream.standard_normal((N, K, M))
    return (re + 1j * im) * np.sqrt(0.5)


def _canonical_phase(U: np.ndarray, V: np.ndarray, tol: float = 1e-12):
    """Rotate each singular pair so the first non-negligible entry of the
    right vector is real and positive. ``V`` holds right vectors as columns.
    """
    absV = np.abs(V)
    first = np.argmax(absV > tol * np.max(absV, axis=-2, keepdims=True), axis=-2)
    lead = np.take_along_axis(V, first[..., None, :], axis=-2)
    phase = np.ones_like(lead)
    nz = np.abs(lead) > 0
    phase[nz] = lead[nz] / np.abs(lead[nz])
    return U * phase.conj(), V * phase.conj()


def _decompose(H: np.ndarray):
    if not np.all(np.isfinite(H)):
        raise DecompositionError("channel contains non-finite entries")
    try:
        U, s, Vh = np.linalg.svd(H, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(str(exc)) from exc
    V = np.swapaxes(Vh.conj(), -1, -2)
    U, V = _canonical_phase(U, V)
    return U, s**2, V


def svd_modes(h: ChannelMatrix | np.ndarray, user_id: int | None = None) -> list[EigenMode]:
    """Eigenmodes of one channel, eigenvalues non-increasing.

    Returns ``min(K, M)`` modes; H = U diag(sqrt(eigenvalue)) V^* holds for the
    returned vectors.

    Raises
    ------
    DecompositionError
        If the input is not finite or the factorization fails.
    """
    if isinstance(h, ChannelMatrix):
        H, uid = h.entries, h.user_id
    else:
        H, uid = np.asarray(h, dtype=complex), 0
    if user_id is not None:
        uid = user_id
    if H.ndim == 1:
        H = H[None, :]
    U, lam, V = _decompose(H)
    return [
        EigenMode(uid, j + 1, float(lam[j]), V[:, j].copy(), U[:, j].copy())
        for j in range(lam.shape[0])
    ]


def batch_modes(H: np.ndarray):
    """Decompose an (N, K, M) stack of channels.

    Returns
    -------
    eigenvalues : (N, r) array, non-increasing along axis 1
    right : (N, r, M) array of unit right vectors
    left : (N, r, K) array of unit left vectors

    with ``r = min(K, M)``.
    """
    U, lam, V = _decompose(np.asarray(H, dtype=complex))
    return lam, np.swapaxes(V, -1, -2), np.swapaxes(U, -1, -2)


def orthogonality(v: np.ndarray, psi: np.ndarray) -> float:
    """|v^* psi|^2 / (|v|^2 |psi|^2), in [0, 1]; 0 means orthogonal."""
    v = np.asarray(v, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    nv = np.vdot(v, v).real
    npsi = np.vdot(psi, psi).real
    if nv == 0 or npsi == 0:
        raise ValueError("orthogonality is undefined for a zero vector")
    z = abs(np.vdot(v, psi)) ** 2 / (nv * npsi)
    return float(min(max(z, 0.0), 1.0))


def orthogonality_defect(rows: Sequence[np.ndarray] | np.ndarray) -> float:
    """prod_i |h_i|^2 / det(H H^*) for the square matrix with rows h_i.

    Always >= 1 (Hadamard), equal to 1 exactly when the rows are mutually
    orthogonal.
    """
    H = np.atleast_2d(np.asarray(rows, dtype=complex))
    if H.shape[0] != H.shape[1]:
        raise ValueError(f"orthogonality defect needs a square matrix, got {H.shape}")
    norms = np.sum(np.abs(H) ** 2, axis=1)
    # det(HH^*) = |det H|^2; slogdet keeps it stable for moderate sizes
    sign, logabs = np.linalg.slogdet(H)
    if sign == 0 or not np.isfinite(logabs):
        raise SingularMatrixError("rows are linearly dependent (infinite defect)")
    log_defect = np.sum(np.log(norms)) - 2.0 * logabs
    if log_defect > np.log(1e300):
        raise SingularMatrixError("orthogonality defect overflows; rows are numerically dependent")
    return float(np.exp(log_defect))


def random_unit_vectors(n: int, M: int, stream: np.random.Generator) -> np.ndarray:
    """n isotropically distributed unit vectors in C^M, shape (n, M)."""
    g = _complex_normal(stream, (n, M))
    return g / np.linalg.norm(g, axis=1, keepdims=True)
