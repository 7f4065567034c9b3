"""Bipartite Hamiltonians for the worked models.

Tensor ordering is A-slow throughout: the basis state |k>_A |r>_B sits at
index ``k * dim_B + r``. Two-spin registers use the computational basis
|00>, |01>, |10>, |11> with the first label belonging to spin 1.

Spin conventions: ``SIGMA_PLUS = |1><0|`` raises a spin and
``SIGMA_Z = |1><1| - |0><0|``, so |1> is the excited state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CutoffTooSmall, DimensionMismatch, NotHermitian
from .linalg import HERMITIAN_TOL, as_matrix, tensor_product

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
I2 = np.eye(2, dtype=complex)

A_SLOW = "A⊗B"


@dataclass(frozen=True)
class SpinPhotonBasis:
    """Singlet/triplet states of two spins, as vectors over |00>,|01>,|10>,|11>."""

    s: np.ndarray
    t_plus: np.ndarray
    t0: np.ndarray
    t_minus: np.ndarray

    labels = ("s", "t_plus", "t0", "t_minus")

    @property
    def matrix(self) -> np.ndarray:
        """Change-of-basis matrix with columns s, t+, t0, t-."""
        return np.column_stack([self.s, self.t_plus, self.t0, self.t_minus])

    def state(self, label: str) -> np.ndarray:
        return getattr(self, label).copy()


def singlet_triplet_basis() -> SpinPhotonBasis:
    r = 1 / np.sqrt(2)
    return SpinPhotonBasis(
        s=np.array([0, r, -r, 0], dtype=complex),
        t_plus=np.array([0, 0, 0, 1], dtype=complex),
        t0=np.array([0, r, r, 0], dtype=complex),
        t_minus=np.array([1, 0, 0, 0], dtype=complex),
    )


@dataclass(frozen=True)
class BipartiteSystem:
    """Hamiltonian on A⊗B plus the state |phi_A> that A is projected onto.

    ``basis`` optionally holds a change-of-basis matrix for B (columns are
    the reporting basis vectors) with matching ``basis_labels``.
    """

    dim_A: int
    dim_B: int
    H: np.ndarray
    phi_A: np.ndarray
    name: str = "generic"
    ordering: str = A_SLOW
    basis: np.ndarray | None = field(default=None, repr=False)
    basis_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        H = as_matrix(self.H)
        phi = np.asarray(self.phi_A, dtype=complex).reshape(-1)
        if H.shape[0] != self.dim_A * self.dim_B:
            raise DimensionMismatch(
                f"H has dimension {H.shape[0]}, expected {self.dim_A}*{self.dim_B}"
            )
        if phi.shape[0] != self.dim_A:
            raise DimensionMismatch(f"phi_A has length {phi.shape[0]}, expected {self.dim_A}")
        err = np.max(np.abs(H - H.conj().T))
        if err > HERMITIAN_TOL:
            raise NotHermitian(f"H deviates from hermiticity by {err:.3e}")
        norm = np.linalg.norm(phi)
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"phi_A must be normalised, |phi_A| = {norm!r}")
        if self.ordering != A_SLOW:
            raise ValueError(f"only the {A_SLOW} ordering is supported")
        if self.basis is not None:
            W = as_matrix(self.basis)
            if W.shape[0] != self.dim_B:
                raise DimensionMismatch("reporting basis does not match dim_B")
            object.__setattr__(self, "basis", W)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "phi_A", phi)

    @property
    def dim(self) -> int:
        return self.dim_A * self.dim_B

    def with_phi(self, phi_A) -> "BipartiteSystem":
        """Same Hamiltonian, different measurement state."""
        return BipartiteSystem(
            self.dim_A, self.dim_B, self.H, phi_A, self.name, self.ordering,
            self.basis, self.basis_labels,
        )


def build_generic(h_A, h_B, h_AB, phi_A, *, name="generic", basis=None, basis_labels=None):
    h_A, h_B, h_AB = as_matrix(h_A), as_matrix(h_B), as_matrix(h_AB)
    dA, dB = len(h_A), len(h_B)
    if h_AB.shape[0] != dA * dB:
        raise DimensionMismatch(
            f"interaction has dimension {h_AB.shape[0]}, expected {dA}*{dB}"
        )
    for label, h in (("h_A", h_A), ("h_B", h_B), ("h_AB", h_AB)):
        err = np.max(np.abs(h - h.conj().T))
        if err > HERMITIAN_TOL:
            raise NotHermitian(f"{label} deviates from hermiticity by {err:.3e}")
    H = tensor_product(h_A, np.eye(dB)) + tensor_product(np.eye(dA), h_B) + h_AB
    return BipartiteSystem(dA, dB, H, phi_A, name=name, basis=basis, basis_labels=basis_labels)


def fock_state(n: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[n] = 1
    return v


def annihilation(dim: int) -> np.ndarray:
    """Truncated bosonic lowering operator, b|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def two_spin_operators():
    """Collective (sum over both spins) sigma_z, sigma_+, sigma_- on a 4-dim register."""
    sz = np.kron(SIGMA_Z, I2) + np.kron(I2, SIGMA_Z)
    sp = np.kron(SIGMA_PLUS, I2) + np.kron(I2, SIGMA_PLUS)
    return sz, sp, sp.conj().T


def build_jaynes_cummings(w0=1.0, w1=1.0, J=1.0, n_max=4, photon=1):
    """Photon mode (A) coupled to two spins (B).

    H = w0 b^dag b + (w1/2)(sz_1 + sz_2) + J [b(s+_1 + s+_2) + b^dag(s-_1 + s-_2)]

    with Pauli ``sz`` and ladder ``s+ = |1><0|``. This is the resonant
    normalisation for which the spin splitting equals w1 and one excitation
    hops at rate J; at w0 = w1 the measurement sector is then diagonal in
    the singlet/triplet basis with the cos(sqrt(10) J tau), cos(sqrt(6) J tau),
    cos(sqrt(2) J tau) amplitudes. A is measured in the Fock state ``photon``.
    """
    if n_max < photon + 2:
        # two spins can absorb/emit at most two quanta around |photon>
        raise CutoffTooSmall(f"n_max={n_max} truncates the sector of |{photon}>; need >= {photon + 2}")
    dA = n_max + 1
    b = annihilation(dA)
    sz, sp, sm = two_spin_operators()
    h_A = w0 * (b.conj().T @ b)
    h_B = 0.5 * w1 * sz
    h_AB = J * (np.kron(b, sp) + np.kron(b.conj().T, sm))
    st = singlet_triplet_basis()
    return build_generic(
        h_A, h_B, h_AB, fock_state(photon, dA),
        name="jaynes_cummings", basis=st.matrix, basis_labels=st.labels,
    )


def excitation_number(n_max: int) -> np.ndarray:
    """b^dag b + (sz_1 + sz_2)/2 + 1 on the photon⊗spins space."""
    b = annihilation(n_max + 1)
    sz, _, _ = two_spin_operators()
    return (np.kron(b.conj().T @ b, np.eye(4)) + np.kron(np.eye(n_max + 1), 0.5 * sz)
            + np.eye(4 * (n_max + 1)))


def build_axial_symmetry(J=1.0):
    """One spin (A) exchanging with two spins (B): H = (J/2)[X(X1+X2) + Y(Y1+Y2)].

    A is measured in the sigma_z eigenstate |1>.
    """
    x12 = np.kron(SIGMA_X, I2) + np.kron(I2, SIGMA_X)
    y12 = np.kron(SIGMA_Y, I2) + np.kron(I2, SIGMA_Y)
    h_AB = 0.5 * J * (np.kron(SIGMA_X, x12) + np.kron(SIGMA_Y, y12))
    st = singlet_triplet_basis()
    return build_generic(
        np.zeros((2, 2)), np.zeros((4, 4)), h_AB, fock_state(1, 2),
        name="axial", basis=st.matrix, basis_labels=st.labels,
    )
