"""Circuit-level simulation of the measurement-based phase estimation loop.

Registers are ordered index ⊗ B (target) ⊗ A (interacting). One step
applies the controlled propagator |0><0| ⊗ 1 + |1><1| ⊗ exp(-i H tau) and
post-selects A on |phi_A>.

The controlled propagator is block diagonal in the index qubit, so the
joint density matrix is carried as its three independent blocks:

* ``idle``      the |0><0| block. A is already in |phi_A> and nothing evolves.
* ``active``    the |1><1| block, driven by K = (1 ⊗ |phi><phi|) U.
* ``coherence`` the |1><0| block, mapped X -> K X (1 ⊗ |phi><phi|).

``active`` and ``coherence`` are stored with unit scale next to their
natural logarithmic weights. The normalised joint state is rebuilt on
demand, and quantities such as the index-qubit contrast stay finite long
after |lambda|^m has dropped below double precision.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import Defective, InvalidDensityMatrix, ZeroProbability
from .evolution import NonUnitaryEvolution, classical_spectrum, construct_vb
from .linalg import as_matrix, matrix_exp_hermitian
from .models import BipartiteSystem

ZERO_PROBABILITY = 1e-300
DENSITY_TOL = 1e-9
# eigenvalues closer than this share an eigenspace when choosing a fidelity reference
EIGENSPACE_TOL = 1e-6

INDEX_AMPLITUDES = {
    "zero": (1.0 + 0j, 0j),
    "plus": (1 / np.sqrt(2) + 0j, 1 / np.sqrt(2) + 0j),
}


def check_density_matrix(rho, dim: int | None = None, tol: float = DENSITY_TOL) -> np.ndarray:
    rho = as_matrix(rho)
    if dim is not None and rho.shape[0] != dim:
        raise InvalidDensityMatrix(f"expected a {dim}x{dim} density matrix, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise InvalidDensityMatrix("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > tol:
        raise InvalidDensityMatrix(f"trace is {tr!r}, expected 1")
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w[0] < -tol:
        raise InvalidDensityMatrix(f"negative eigenvalue {w[0]:.3e}")
    return rho


def pure(state) -> np.ndarray:
    v = np.asarray(state, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


# -- operators on B⊗A -------------------------------------------------------

def propagator_BA(system: BipartiteSystem, tau: float) -> np.ndarray:
    """exp(-i H tau) reordered from A⊗B to B⊗A."""
    dA, dB = system.dim_A, system.dim_B
    U = matrix_exp_hermitian(system.H, tau).reshape(dA, dB, dA, dB)
    return U.transpose(1, 0, 3, 2).reshape(dB * dA, dB * dA)


def measurement_projector(system: BipartiteSystem) -> np.ndarray:
    """1_B ⊗ |phi_A><phi_A| on B⊗A."""
    return np.kron(np.eye(system.dim_B), np.outer(system.phi_A, system.phi_A.conj()))


def success_kraus(system: BipartiteSystem, tau: float) -> np.ndarray:
    return measurement_projector(system) @ propagator_BA(system, tau)


def controlled_unitary(system: BipartiteSystem, tau: float) -> np.ndarray:
    """The dense controlled propagator on index ⊗ B ⊗ A."""
    n = system.dim
    cu = np.zeros((2 * n, 2 * n), dtype=complex)
    cu[:n, :n] = np.eye(n)
    cu[n:, n:] = propagator_BA(system, tau)
    return cu


def trace_out_A(rho_BA: np.ndarray, dim_B: int, dim_A: int) -> np.ndarray:
    return np.einsum("iaja->ij", rho_BA.reshape(dim_B, dim_A, dim_B, dim_A))


def _fidelity(u: np.ndarray, rho: np.ndarray) -> float:
    f = (u.conj() @ rho @ u).real / (u.conj() @ u).real
    return float(min(max(f, 0.0), 1.0))


def _log(x: float) -> float:
    return float(np.log(x)) if x > 0 else -np.inf


# -- the run ----------------------------------------------------------------

@dataclass(frozen=True)
class MpeaRun:
    """Post-selected state of index ⊗ B ⊗ A after ``m`` controlled steps.

    The initial B⊗A state is kept as a factor L with L L^dag = rho_B ⊗ |phi><phi|.
    The driven branch is K^m L, stored normalised as ``factor`` with its
    log-norm in ``log_norm``. Every block of the joint state follows from these:
    the idle block is L L^dag, the driven block is K^m L L^dag K^dag^m and the
    index coherence is K^m L L^dag. Evolving amplitudes rather than density
    matrices keeps the driven block positive and halves the order of roundoff
    that leaks into faster-decaying directions.
    """

    system: BipartiteSystem
    index_mode: str
    amplitudes: tuple[complex, complex]
    initial: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)
    log_norm: float = 0.0
    m: int = 0
    survival: tuple[float, ...] = (1.0,)
    unconditional: tuple[float, ...] = (1.0,)
    fidelity: tuple[float, ...] = ()
    reference: np.ndarray | None = field(default=None, repr=False)

    @property
    def _weights(self):
        alpha, beta = self.amplitudes
        return abs(alpha) ** 2, abs(beta) ** 2

    @property
    def evolves(self) -> bool:
        return self._weights[1] > 0

    @property
    def log_active(self) -> float:
        """log P(m) on the driven branch."""
        return 2 * self.log_norm if self.evolves else 0.0

    @property
    def idle(self) -> np.ndarray:
        return self.initial @ self.initial.conj().T

    @property
    def active(self) -> np.ndarray:
        """Normalised driven block (trace 1)."""
        return self.factor @ self.factor.conj().T

    @property
    def coherence(self) -> np.ndarray:
        """K^m rho_0 divided by exp(log_norm)."""
        return self.factor @ self.initial.conj().T

    @property
    def conditional_survival(self) -> float:
        """Probability that all m projections succeed on the evolving branch."""
        return float(np.exp(self.log_active))

    @property
    def unconditional_survival(self) -> float:
        w0, w1 = self._weights
        return w0 + w1 * float(np.exp(self.log_active))

    def _reduce(self, f: np.ndarray) -> np.ndarray:
        g = f.reshape(self.system.dim_B, self.system.dim_A, -1)
        return np.einsum("iar,jar->ij", g, g.conj())

    @property
    def target_reduced(self) -> np.ndarray:
        """State of B on the branch the index control actually drives."""
        return self._reduce(self.factor if self.evolves else self.initial)

    @property
    def joint_state(self) -> np.ndarray:
        w0, w1 = self._weights
        alpha, beta = self.amplitudes
        z = self.unconditional_survival
        n = self.system.dim
        rho = np.zeros((2 * n, 2 * n), dtype=complex)
        rho[:n, :n] = w0 * self.idle / z
        rho[n:, n:] = w1 * np.exp(self.log_active) * self.active / z
        c = beta * np.conj(alpha) * np.exp(self.log_norm) * self.coherence / z
        rho[n:, :n] = c
        rho[:n, n:] = c.conj().T
        return rho

    def _coherence_trace(self) -> complex:
        return complex(np.sum(self.factor * self.initial.conj()))

    def index_state(self) -> np.ndarray:
        w0, w1 = self._weights
        alpha, beta = self.amplitudes
        z = self.unconditional_survival
        p1 = w1 * np.exp(self.log_active) / z
        c = beta * np.conj(alpha) * np.exp(self.log_norm) * self._coherence_trace() / z
        return np.array([[1 - p1, np.conj(c)], [c, p1]], dtype=complex)

    def index_coherence(self) -> tuple[float, float]:
        """(log |<1|rho_index|0>|, arg <1|rho_index|0>) without underflow."""
        alpha, beta = self.amplitudes
        tr = self._coherence_trace()
        pref = beta * np.conj(alpha)
        if pref == 0 or tr == 0:
            return -np.inf, 0.0
        w0, w1 = self._weights
        log_z = np.logaddexp(_log(w0), _log(w1) + self.log_active)
        log_mag = np.log(abs(pref)) + self.log_norm + np.log(abs(tr)) - log_z
        return float(log_mag), float(np.angle(pref * tr))

    def fidelity_with(self, u) -> float:
        return _fidelity(np.asarray(u, dtype=complex), self.target_reduced)


def default_reference(system: BipartiteSystem, tau: float, rho_B=None) -> np.ndarray | None:
    """Eigenvector of V_B(tau) that the post-selected state approaches.

    Without ``rho_B`` this is the dominant right eigenvector. With it, the
    largest-modulus eigenspace the input actually populates is used, and a
    degenerate eigenspace is resolved by projecting the input onto it.
    Returns None if V_B is defective.
    """
    try:
        spectrum = classical_spectrum(construct_vb(system, tau))
    except Defective:
        return None
    if rho_B is None:
        return spectrum.dominant_right
    rho = check_density_matrix(rho_B, system.dim_B)
    lam, R, L = spectrum.eigenvalues, spectrum.eig.right, spectrum.eig.left
    done = np.zeros(len(lam), dtype=bool)
    for k in range(len(lam)):
        if done[k]:
            continue
        group = ~done & (np.abs(lam - lam[k]) < EIGENSPACE_TOL)
        done |= group
        P = R[:, group] @ L[:, group].conj().T
        sub = P @ rho @ P.conj().T
        if np.trace(sub).real > 1e-12:
            w, v = np.linalg.eigh(0.5 * (sub + sub.conj().T))
            u = v[:, -1]
            return u / np.linalg.norm(u)
    return spectrum.dominant_right


def _state_factor(rho: np.ndarray) -> np.ndarray:
    """L with L L^dag = rho, dropping numerically empty directions."""
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    keep = w > 1e-15 * max(w[-1], 1e-300)
    return v[:, keep] * np.sqrt(w[keep])


def init_run(system: BipartiteSystem, rho_B, index_mode: str = "plus", reference=None) -> MpeaRun:
    if index_mode not in INDEX_AMPLITUDES:
        raise ValueError(f"index_mode must be one of {sorted(INDEX_AMPLITUDES)}")
    rho_B = check_density_matrix(rho_B, system.dim_B)
    L = np.kron(_state_factor(rho_B), system.phi_A[:, None])
    L = L / np.linalg.norm(L)
    run = MpeaRun(
        system=system,
        index_mode=index_mode,
        amplitudes=INDEX_AMPLITUDES[index_mode],
        initial=L,
        factor=L.copy(),
        reference=None if reference is None else np.asarray(reference, dtype=complex),
    )
    if run.reference is not None:
        run = replace(run, fidelity=(run.fidelity_with(run.reference),))
    return run


def _advance(run: MpeaRun, kraus: np.ndarray, steps: int, record: bool):
    """Apply ``steps`` controlled steps with post-selection; returns the new run
    and the list of per-step success probabilities of the whole register."""
    F, log_n = run.factor, run.log_norm
    w0, w1 = run._weights
    survival, uncond, fid = list(run.survival), list(run.unconditional), list(run.fidelity)
    step_probs = []
    log_z = np.logaddexp(_log(w0), _log(w1) + 2 * log_n)
    ref = run.reference
    for _ in range(steps):
        G = kraus @ F
        p = float(np.vdot(G, G).real)
        if p < ZERO_PROBABILITY:
            if run.evolves:
                raise ZeroProbability(
                    f"projection onto phi_A succeeds with probability {p:.3e} at step {run.m + len(step_probs) + 1}"
                )
            # the undriven branch carries no weight; leave it alone
        else:
            F = G / np.sqrt(p)
            if w1 > 0:
                log_n += 0.5 * np.log(p)
        new_log_z = np.logaddexp(_log(w0), _log(w1) + 2 * log_n)
        step_probs.append(float(np.exp(new_log_z - log_z)))
        log_z = new_log_z
        if record:
            survival.append(float(np.exp(2 * log_n)))
            uncond.append(float(np.exp(log_z)))
            if ref is not None:
                fid.append(_fidelity(ref, run._reduce(F if w1 > 0 else run.initial)))
    new = replace(run, factor=F, log_norm=float(log_n), m=run.m + steps)
    if not record:
        survival.append(float(np.exp(2 * log_n)))
        uncond.append(float(np.exp(log_z)))
        if ref is not None:
            fid.append(new.fidelity_with(ref))
    new = replace(new, survival=tuple(survival), unconditional=tuple(uncond), fidelity=tuple(fid))
    return new, step_probs


def step(run: MpeaRun, tau: float) -> tuple[MpeaRun, float]:
    """One controlled interval followed by a successful projection of A."""
    kraus = success_kraus(run.system, tau)
    new, probs = _advance(run, kraus, 1, record=True)
    return new, probs[0]


def run_post_selected(system: BipartiteSystem, rho_B, tau: float, m: int, reference=None,
                      index_mode: str = "plus") -> MpeaRun:
    if m < 1:
        raise ValueError("m must be at least 1")
    if reference is None:
        reference = default_reference(system, tau, rho_B)
    run = init_run(system, rho_B, index_mode, reference)
    run, _ = _advance(run, success_kraus(system, tau), m, record=True)
    return run


def evolve_block(run: MpeaRun, tau: float, steps: int) -> MpeaRun:
    """Advance ``steps`` intervals keeping only the endpoint in the history."""
    run, _ = _advance(run, success_kraus(run.system, tau), steps, record=False)
    return run


def survival_curve(ev: NonUnitaryEvolution, rho_B, m_max: int) -> np.ndarray:
    """P(m) = Tr[V^m rho_B V^dag^m] for m = 0..m_max, straight from the matrix."""
    V = ev.V
    rho = check_density_matrix(rho_B, V.shape[0])
    out = np.empty(m_max + 1)
    out[0] = 1.0
    log_p = 0.0
    for m in range(1, m_max + 1):
        rho = V @ rho @ V.conj().T
        p = np.trace(rho).real
        if p <= 0:
            out[m:] = 0.0
            break
        rho = rho / p
        log_p += np.log(p)
        out[m] = np.exp(log_p)
    return out


# -- Monte-Carlo post-selection ---------------------------------------------

TRAJECTORY_BLOCK = 1024


@dataclass(frozen=True)
class TrajectoryRecord:
    seed: int
    index: int
    attempted: int
    succeeded_chain_length: int
    success: bool


@dataclass(frozen=True)
class TrajectorySample:
    seed: int
    m: int
    step_probabilities: np.ndarray
    attempted: np.ndarray
    succeeded: np.ndarray

    @property
    def n_traj(self) -> int:
        return len(self.attempted)

    @property
    def success(self) -> np.ndarray:
        return self.succeeded == self.m

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.success))

    @property
    def records(self) -> list[TrajectoryRecord]:
        return [
            TrajectoryRecord(self.seed, i, int(a), int(s), bool(s == self.m))
            for i, (a, s) in enumerate(zip(self.attempted, self.succeeded))
        ]


def conditional_step_probabilities(system: BipartiteSystem, rho_B, tau: float, m: int) -> np.ndarray:
    """Success probability of each successive projection given all earlier ones
    succeeded, from the evolving B⊗A state."""
    rho_B = check_density_matrix(rho_B, system.dim_B)
    K = success_kraus(system, tau)
    F = np.kron(_state_factor(rho_B), system.phi_A[:, None])
    probs = np.empty(m)
    for j in range(m):
        F = K @ (F / np.linalg.norm(F))
        p = float(np.vdot(F, F).real)
        probs[j] = p
        if p < ZERO_PROBABILITY:
            probs[j:] = 0.0
            break
    return probs


def _trajectory_block(seed: int, block: int, count: int, probs: np.ndarray):
    # each block owns a generator keyed by (seed, block) so results do not
    # depend on how blocks are spread over workers
    rng = np.random.default_rng([seed, block])
    m = len(probs)
    if m == 0:
        return np.zeros(count, dtype=int), np.zeros(count, dtype=int)
    ok = rng.random((count, m)) < probs
    failed = ~ok
    first_fail = np.where(failed.any(axis=1), failed.argmax(axis=1), m)
    attempted = np.minimum(first_fail + 1, m)
    return attempted, first_fail


def sample_trajectories(system: BipartiteSystem, rho_B, tau: float, m: int, n_traj: int,
                        seed: int, workers: int = 1) -> TrajectorySample:
    """Monte-Carlo realisation of m sequential post-selections.

    A trajectory stops at its first failed projection. The fraction of
    trajectories that pass all m projections estimates P(m) without bias.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    probs = conditional_step_probabilities(system, rho_B, tau, m)
    starts = range(0, n_traj, TRAJECTORY_BLOCK)
    jobs = [(seed, b, min(TRAJECTORY_BLOCK, n_traj - s), probs) for b, s in enumerate(starts)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda j: _trajectory_block(*j), jobs))
    else:
        parts = [_trajectory_block(*j) for j in jobs]
    attempted = np.concatenate([p[0] for p in parts])
    succeeded = np.concatenate([p[1] for p in parts])
    return TrajectorySample(seed, m, probs, attempted, succeeded)
