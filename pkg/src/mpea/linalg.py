"""Dense complex linear algebra at small dimension.

Matrices are plain ``numpy`` complex arrays. The helpers here add the
checks the rest of the package relies on: hermiticity before a Hermitian
eigendecomposition, a conditioning check before trusting a non-normal
diagonalisation, and a deterministic ordering of complex spectra.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import Defective, DimensionMismatch, NotHermitian

HERMITIAN_TOL = 1e-9
UNITARY_TOL = 1e-9
DEGENERACY_TOL = 1e-9
DEFECTIVE_CONDITION = 1e8


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a square complex128 array, raising on bad shapes."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    m = as_matrix(a)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def is_unitary(a, tol: float = UNITARY_TOL) -> bool:
    m = as_matrix(a)
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(len(m))), initial=0.0) <= tol)


def tensor_product(*factors) -> np.ndarray:
    """Kronecker product with the first factor as the slow index."""
    if not factors:
        raise ValueError("tensor_product needs at least one factor")
    return reduce(np.kron, (np.asarray(f, dtype=complex) for f in factors))


@dataclass(frozen=True)
class HermitianEigenSystem:
    eigenvalues: np.ndarray  # real, ascending
    eigenvectors: np.ndarray  # orthonormal columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def hermitian_eig(h, tol: float = HERMITIAN_TOL) -> HermitianEigenSystem:
    m = as_matrix(h)
    err = np.max(np.abs(m - m.conj().T), initial=0.0)
    if err > tol:
        raise NotHermitian(f"max |H - H^dagger| = {err:.3e} exceeds {tol:.1e}")
    # symmetrise so round-off in the input cannot leak into the eigenvectors
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return HermitianEigenSystem(w, v)


def matrix_exp_hermitian(h, t: float) -> np.ndarray:
    """``exp(-i H t)`` through the eigendecomposition of ``H``."""
    es = hermitian_eig(h)
    v = es.eigenvectors
    return (v * np.exp(-1j * es.eigenvalues * t)) @ v.conj().T


@dataclass(frozen=True)
class BiorthogonalEigenSystem:
    """Spectrum of a diagonalisable, possibly non-normal matrix.

    Right eigenvectors are unit-norm columns of ``right``; the columns of
    ``left`` are scaled so that ``left[:, j].conj() @ right[:, k] == delta_jk``.
    Eigenvalues run by descending modulus, ties broken by descending real
    part and then descending imaginary part.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition: float
    degenerate: bool  # |lambda_1| - |lambda_2| below DEGENERACY_TOL

    @property
    def dominant(self) -> complex:
        return complex(self.eigenvalues[0])

    def reconstruct(self) -> np.ndarray:
        return (self.right * self.eigenvalues) @ self.left.conj().T


def spectral_order(eigenvalues: np.ndarray, decimals: int = 9) -> np.ndarray:
    """Indices sorting ``eigenvalues`` by |lambda| desc, then Re desc, then Im desc."""
    lam = np.asarray(eigenvalues, dtype=complex)
    key_mod = -np.round(np.abs(lam), decimals)
    key_re = -np.round(lam.real, decimals)
    key_im = -np.round(lam.imag, decimals)
    return np.lexsort((key_im, key_re, key_mod))


def general_eig(m, max_condition: float = DEFECTIVE_CONDITION) -> BiorthogonalEigenSystem:
    a = as_matrix(m)
    lam, r = np.linalg.eig(a)
    order = spectral_order(lam)
    lam, r = lam[order], r[:, order]
    r = r / np.linalg.norm(r, axis=0)
    cond = float(np.linalg.cond(r))
    if not np.isfinite(cond) or cond > max_condition:
        raise Defective(cond, max_condition)
    # rows of R^{-1} are the dual (left) vectors, biorthogonal by construction
    left = np.linalg.inv(r).conj().T
    mods = np.abs(lam)
    degenerate = len(lam) > 1 and bool(mods[0] - mods[1] < DEGENERACY_TOL)
    return BiorthogonalEigenSystem(lam, r, left, cond, degenerate)
