"""Post-selected evolution matrices V_B(tau) = <phi_A| exp(-i H tau) |phi_A>.

Two independent routes build the same matrix: ``construct_vb`` takes the
partial inner product of the full propagator, ``construct_vb_spectral``
sums over the eigenstates of H with the A-components contracted against
|phi_A>. Their agreement is the cheapest whole-pipeline integrity check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .linalg import BiorthogonalEigenSystem, as_matrix, general_eig, hermitian_eig, matrix_exp_hermitian
from .models import BipartiteSystem


@dataclass(frozen=True)
class NonUnitaryEvolution:
    V: np.ndarray
    tau: float | tuple[float, ...]
    system: BipartiteSystem | None = None

    @property
    def dim(self) -> int:
        return self.V.shape[0]

    def in_basis(self, basis=None) -> np.ndarray:
        """Matrix elements W^dag V W; defaults to the system's reporting basis."""
        if basis is None:
            basis = None if self.system is None else self.system.basis
        if basis is None:
            return self.V.copy()
        W = as_matrix(basis)
        return W.conj().T @ self.V @ W

    def max_singular_value(self) -> float:
        return float(np.linalg.norm(self.V, 2))


def _check(system: BipartiteSystem, tau: float):
    if not np.isfinite(tau):
        raise ValueError(f"tau must be finite, got {tau!r}")


def construct_vb(system: BipartiteSystem, tau: float) -> NonUnitaryEvolution:
    _check(system, tau)
    dA, dB = system.dim_A, system.dim_B
    U = matrix_exp_hermitian(system.H, tau).reshape(dA, dB, dA, dB)
    phi = system.phi_A
    V = np.einsum("k,krls,l->rs", phi.conj(), U, phi)
    return NonUnitaryEvolution(V, float(tau), system)


def construct_vb_spectral(system: BipartiteSystem, tau: float) -> NonUnitaryEvolution:
    _check(system, tau)
    dA, dB = system.dim_A, system.dim_B
    es = hermitian_eig(system.H)
    # f[j, k, r]: amplitude of |psi_k^A>|psi_r^B> in the j-th eigenstate
    f = es.eigenvectors.T.reshape(-1, dA, dB)
    c = system.phi_A.conj()  # c_k = <phi_A|psi_k^A>
    g = np.einsum("jkr,k->jr", f, c)
    phases = np.exp(-1j * es.eigenvalues * tau)
    V = np.einsum("j,jr,js->rs", phases, g, g.conj())
    return NonUnitaryEvolution(V, float(tau), system)


def compose(evolutions) -> NonUnitaryEvolution:
    """Product of successive measurement intervals; the first list entry acts first."""
    evolutions = list(evolutions)
    if not evolutions:
        raise ValueError("compose needs at least one evolution")
    dim = evolutions[0].dim
    V = np.eye(dim, dtype=complex)
    for ev in evolutions:
        if ev.dim != dim:
            raise DimensionMismatch(f"cannot compose dimension {ev.dim} with {dim}")
        V = ev.V @ V
    systems = {id(ev.system) for ev in evolutions}
    system = evolutions[0].system if len(systems) == 1 else None
    taus = tuple(t for ev in evolutions for t in np.atleast_1d(ev.tau))
    return NonUnitaryEvolution(V, taus, system)


def from_unitary(U, tau: float = 0.0) -> NonUnitaryEvolution:
    """Wrap a plain unitary on B so it can be composed with measured intervals."""
    return NonUnitaryEvolution(as_matrix(U), tau)


def fraction_of(a: float) -> float:
    """f in [0, 1) with lambda = |lambda| exp(-2 pi i f)."""
    f = float((-a / (2 * np.pi)) % 1.0)
    # tiny positive phases wrap to exactly 1.0 in floating point
    return 0.0 if f >= 1.0 else f


@dataclass(frozen=True)
class NonUnitarySpectrum:
    eig: BiorthogonalEigenSystem
    evolution: NonUnitaryEvolution

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig.eigenvalues

    @property
    def degenerate(self) -> bool:
        return self.eig.degenerate

    @property
    def dominant(self) -> complex:
        return self.eig.dominant

    @property
    def dominant_right(self) -> np.ndarray:
        return self.eig.right[:, 0]

    @property
    def dominant_left(self) -> np.ndarray:
        return self.eig.left[:, 0]

    def rows(self, basis=None):
        """(lambda, |lambda|, phase, fraction) per eigenvalue, with the right
        eigenvector expressed in the reporting basis."""
        W = basis
        if W is None and self.evolution.system is not None:
            W = self.evolution.system.basis
        out = []
        for k, lam in enumerate(self.eigenvalues):
            u = self.eig.right[:, k]
            if W is not None:
                u = np.linalg.solve(as_matrix(W), u)
            phase = float(np.angle(lam))
            out.append({
                "lambda": complex(lam),
                "modulus": float(abs(lam)),
                "phase": phase,
                "fraction": fraction_of(phase),
                "right": u,
            })
        return out


def classical_spectrum(ev: NonUnitaryEvolution) -> NonUnitarySpectrum:
    return NonUnitarySpectrum(general_eig(ev.V), ev)
