"""Small dense matrix kernel for one- and two-qubit operators.

Basis ordering is |00>, |01>, |10>, |11> with qubit A as the left tensor
factor throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitianError, NotPSDError, QSEError

HERMITIAN_TOL = 1e-10
PSD_CLAMP_TOL = 1e-9
TRACE_TOL = 1e-9
FORM_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)

# sigma_i (x) 1, 1 (x) sigma_j and sigma_i (x) sigma_j, precomputed once
_SIGMA_A = np.array([np.kron(s, I2) for s in PAULIS])
_SIGMA_B = np.array([np.kron(I2, s) for s in PAULIS])
_SIGMA_AB = np.array([[np.kron(si, sj) for sj in PAULIS] for si in PAULIS])


def as_matrix(m, dims: tuple[int, ...] = (2, 4)) -> np.ndarray:
    """Coerce ``m`` to a finite square complex array of an allowed size."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] not in dims:
        raise QSEError(f"expected a square matrix of size {dims}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise QSEError("matrix contains NaN or Inf entries")
    return arr


def hermiticity_defect(m: np.ndarray) -> float:
    """Largest entrywise modulus of ``m - m^dagger``."""
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T)))


def hermitian_eig(m, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    m : array_like
        Square complex (or real symmetric) matrix.
    tol : float
        Maximum allowed entrywise ``|m - m^dagger|``.

    Returns
    -------
    eigenvalues : ndarray
        Real eigenvalues sorted in descending order.
    eigenvectors : ndarray
        Orthonormal eigenvectors stored as columns, matching ``eigenvalues``.

    Raises
    ------
    NotHermitianError
        If ``m`` is not Hermitian within ``tol``.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise QSEError(f"expected a square matrix, got shape {m.shape}")
    defect = hermiticity_defect(m)
    if defect > tol:
        raise NotHermitianError(f"matrix is not Hermitian: max|m - m^H| = {defect:.3e}")
    herm = 0.5 * (m + m.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def matrix_sqrt_psd(m) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in ``[-1e-9, 0)`` are treated as round-off and clamped to zero.
    """
    vals, vecs = hermitian_eig(m)
    if vals[-1] < -PSD_CLAMP_TOL:
        raise NotPSDError(f"matrix is not PSD: min eigenvalue {vals[-1]:.3e}")
    roots = np.sqrt(np.clip(vals, 0.0, None))
    out = (vecs * roots) @ vecs.conj().T
    if np.isrealobj(m):
        out = out.real
    return 0.5 * (out + out.conj().T)


@dataclass(frozen=True, eq=False)
class PauliForm:
    """Pauli-basis coordinates of a two-qubit operator.

    ``rho = (1 + a.sigma (x) 1 + 1 (x) b.sigma + sum_ij T_ij sigma_i (x) sigma_j) / 4``
    """

    a: np.ndarray
    b: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(3)
        b = np.asarray(self.b, dtype=float).reshape(3)
        T = np.asarray(self.T, dtype=float).reshape(3, 3)
        if max(np.linalg.norm(a), np.linalg.norm(b)) > 1 + FORM_TOL:
            raise QSEError(f"local Bloch vectors must have norm <= 1, got |a|={np.linalg.norm(a):.6g}, "
                           f"|b|={np.linalg.norm(b):.6g}")
        if np.abs(T).max() > 1 + FORM_TOL:
            raise QSEError(f"correlation entries must lie in [-1, 1], got max {np.abs(T).max():.6g}")
        for arr in (a, b, T):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "T", T)

    def swapped(self) -> PauliForm:
        """Same state with the roles of A and B exchanged."""
        return PauliForm(self.b, self.a, self.T.T)

    def allclose(self, other: PauliForm, atol: float = 1e-12) -> bool:
        return (
            np.allclose(self.a, other.a, rtol=0, atol=atol)
            and np.allclose(self.b, other.b, rtol=0, atol=atol)
            and np.allclose(self.T, other.T, rtol=0, atol=atol)
        )

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "b": self.b.tolist(), "T": self.T.tolist()}


def pauli_decompose(rho) -> PauliForm:
    """Bloch vectors and correlation matrix of a trace-one two-qubit operator."""
    rho = as_matrix(rho, dims=(4,))
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise QSEError(f"trace must be 1, got {tr.real:.12g}{tr.imag:+.3g}j")
    a = np.einsum("kij,ji->k", _SIGMA_A, rho).real
    b = np.einsum("kij,ji->k", _SIGMA_B, rho).real
    T = np.einsum("klij,ji->kl", _SIGMA_AB, rho).real
    return PauliForm(a, b, T)


def pauli_matrix(a, b, T) -> np.ndarray:
    """Hermitian, trace-one matrix from raw Pauli coordinates, without range checks."""
    rho = np.eye(4, dtype=complex)
    rho += np.tensordot(np.asarray(a, dtype=float), _SIGMA_A, axes=1)
    rho += np.tensordot(np.asarray(b, dtype=float), _SIGMA_B, axes=1)
    rho += np.tensordot(np.asarray(T, dtype=float), _SIGMA_AB, axes=2)
    return rho / 4


def pauli_compose(p: PauliForm) -> np.ndarray:
    """Density-operator matrix for a Pauli form (Hermitian, trace one)."""
    return pauli_matrix(p.a, p.b, p.T)


def partial_trace(rho, party: str) -> np.ndarray:
    """Reduced state of ``party`` ("A" or "B"), tracing out the other qubit."""
    rho = as_matrix(rho, dims=(4,)).reshape(2, 2, 2, 2)
    if party == "A":
        return np.einsum("ijkj->ik", rho)
    if party == "B":
        return np.einsum("ijil->jl", rho)
    raise QSEError(f"party must be 'A' or 'B', got {party!r}")


def bloch_vector(rho) -> np.ndarray:
    """Bloch vector of a single-qubit operator."""
    rho = as_matrix(rho, dims=(2,))
    return np.array([np.trace(rho @ s).real for s in PAULIS])


def qubit_matrix(r) -> np.ndarray:
    """Single-qubit operator ``(1 + r.sigma) / 2``."""
    r = np.asarray(r, dtype=float)
    return 0.5 * (I2 + r[0] * SX + r[1] * SY + r[2] * SZ)


def partial_transpose(rho, party: str = "B") -> np.ndarray:
    rho = as_matrix(rho, dims=(4,)).reshape(2, 2, 2, 2)
    if party == "B":
        out = rho.transpose(0, 3, 2, 1)
    elif party == "A":
        out = rho.transpose(2, 1, 0, 3)
    else:
        raise QSEError(f"party must be 'A' or 'B', got {party!r}")
    return out.reshape(4, 4)
