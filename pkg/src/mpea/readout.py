"""Recover lambda = exp(i(a + ib)) = e^{-b} e^{ia} from the index qubit.

Two schemes are provided:

* single-qubit tomography of the index state after m post-selected steps
  (``qst_estimate_b``, ``qst_estimate_a``), and
* iterative measured-QFT bit extraction (``mqft_extract_bits``), one
  W(k) block of 2**k steps per bit, least-significant bit first.

The index state after m steps of an eigenstate input is the *normalised*
vector (|0> + lambda^m |1>) / sqrt(1 + |lambda|^{2m}); every inversion
below is written for that normalised form.

Phase convention: lambda = e^{-b} e^{-2 pi i f}, f in [0, 1), a = -2 pi f
wrapped to (-pi, pi].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import (
    MpeaRun, _advance, check_density_matrix, default_reference, init_run,
    measurement_projector, run_post_selected, success_kraus,
)
from .errors import AmbiguousQuadrant, InsufficientContrast, NonInvertible
from .evolution import classical_spectrum, construct_vb, fraction_of
from .models import SIGMA_X, SIGMA_Y, BipartiteSystem

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
EXACT_TOL = 1e-12


def _rot(pauli: np.ndarray, theta: float) -> np.ndarray:
    """exp(-i theta P) for a Pauli matrix P."""
    return np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * pauli


# computational-basis readout of the index qubit, |0> -> +1
Z_READOUT = np.diag([1.0, -1.0]).astype(complex)
# exp(-i pi/4 X) Z exp(i pi/4 X): the rotated observable for the sine of m*a
SINE_OBSERVABLE = _rot(SIGMA_X, np.pi / 4) @ Z_READOUT @ _rot(SIGMA_X, -np.pi / 4)
# the sigma_y-rotated counterpart, giving the cosine and fixing the quadrant
COSINE_OBSERVABLE = _rot(SIGMA_Y, np.pi / 4) @ Z_READOUT @ _rot(SIGMA_Y, -np.pi / 4)


@dataclass(frozen=True)
class IndexQubitEnsemble:
    """Copies of one index-qubit state. ``copies=None`` means exact access."""

    state: np.ndarray
    copies: int | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "state", check_density_matrix(self.state, 2))
        if self.copies is not None:
            if self.copies < 1:
                raise ValueError("copies must be at least 1")
            if self.seed is None:
                raise ValueError("a seed is required to sample a finite ensemble")

    @property
    def exact(self) -> bool:
        return self.copies is None

    def expectation(self, observable: np.ndarray, basis_tag: int) -> tuple[float, float]:
        """Mean of a +-1 valued observable and its standard error.

        Each basis draws a fresh batch of copies from a generator keyed by
        (seed, basis_tag).
        """
        exact = float(np.trace(self.state @ observable).real)
        if self.exact:
            return exact, 0.0
        rng = np.random.default_rng([self.seed, basis_tag])
        p_plus = min(max((1 + exact) / 2, 0.0), 1.0)
        n_plus = rng.binomial(self.copies, p_plus)
        mean = 2 * n_plus / self.copies - 1
        return mean, float(np.sqrt(max(1 - mean**2, 0.0) / self.copies))


def ensemble_from_run(run: MpeaRun, copies: int | None = None, seed: int | None = None):
    rho = run.index_state()
    return IndexQubitEnsemble(0.5 * (rho + rho.conj().T), copies, seed)


def qst_estimate_b(ensemble: IndexQubitEnsemble, m: int, return_stderr: bool = False):
    """Decay rate from P(1) = e^{-2mb} / (1 + e^{-2mb})."""
    mean_z, se_z = ensemble.expectation(Z_READOUT, basis_tag=0)
    p1, p0 = (1 - mean_z) / 2, (1 + mean_z) / 2
    if ensemble.exact:
        # read the populations directly; 1 - <Z> cancels badly once P(1) is small
        p0, p1 = float(ensemble.state[0, 0].real), float(ensemble.state[1, 1].real)
    se_p = se_z / 2
    tol = EXACT_TOL if ensemble.exact else 3 * 0.5 / np.sqrt(ensemble.copies)
    if p1 > 0.5 + tol:
        raise NonInvertible(f"P(1) = {p1:.6f} exceeds 1/2; no decay rate b >= 0 produces it")
    if p1 <= 0:
        raise NonInvertible("P(1) = 0: the decay is too strong to resolve with this ensemble")
    b = -np.log(p1 / p0) / (2 * m)
    b = max(b, 0.0)
    if not return_stderr:
        return float(b)
    se_b = se_p / (2 * m * p1 * (1 - p1))
    return float(b), float(se_b)


def qst_estimate_a(ensemble: IndexQubitEnsemble, b_hat: float, m: int, two_basis: bool = True,
                   assume_principal: bool = False, return_stderr: bool = False):
    """Phase a from the rotated-basis expectations.

    The sine observable gives -2 e^{-mb} sin(ma) / (1 + e^{-2mb}); with
    ``two_basis`` the cosine counterpart resolves the quadrant, otherwise
    ``assume_principal`` must be set and |ma| <= pi/2 is assumed. Returns
    the principal value of m*a divided by m.
    """
    e_sin, se_sin = ensemble.expectation(SINE_OBSERVABLE, basis_tag=1)
    s = -e_sin
    if two_basis:
        c, se_cos = ensemble.expectation(COSINE_OBSERVABLE, basis_tag=2)
        a = np.arctan2(s, c) / m
        r2 = s * s + c * c
        se = np.sqrt(c * c * se_sin**2 + s * s * se_cos**2) / (r2 * m) if r2 > 0 else np.inf
    else:
        if not assume_principal:
            raise AmbiguousQuadrant(
                "a single rotated basis fixes sin(ma) only; enable the two-basis protocol "
                "or pass assume_principal=True"
            )
        x = np.exp(-m * b_hat)
        scale = (1 + x * x) / (2 * x)
        sin_ma = np.clip(s * scale, -1.0, 1.0)
        a = np.arcsin(sin_ma) / m
        cos_ma = np.sqrt(max(1 - sin_ma**2, 1e-300))
        se = se_sin * scale / (cos_ma * m)
    if return_stderr:
        return float(a), float(se)
    return float(a)


def build_qk(a: float, b: float, k: int) -> np.ndarray:
    """Rotation that rebalances (|0> + e^{-b 2^k} e^{i a 2^k}|1>) onto equal weights.

    Written with x = e^{-b 2^k} so it stays finite for any decay; this is
    the same matrix as q_k [[1+c, e^{-i a 2^k}(1-c)], [e^{i a 2^k}(c-1), 1+c]]
    with c = e^{b 2^k}, q_k = 1/sqrt(2(1 + c^2)).
    """
    M = 2.0**k
    x = np.exp(-b * M)
    e = np.exp(1j * a * M)
    return np.array([[1 + x, np.conj(e) * (x - 1)], [e * (1 - x), 1 + x]]) / np.sqrt(2 * (1 + x * x))


@dataclass(frozen=True)
class EigenEstimate:
    a: float
    b: float
    f: float
    n_bits: int | None
    uncertainty: float
    mode: str
    bits: tuple[int, ...] = ()
    block_fidelity: tuple[float, ...] = field(default=(), repr=False)

    @property
    def lam(self) -> complex:
        return complex(np.exp(-self.b) * np.exp(1j * self.a))

    def to_dict(self) -> dict:
        lam = self.lam
        return {
            "a": self.a, "b": self.b, "f": self.f, "n_bits": self.n_bits,
            "uncertainty": self.uncertainty, "lambda_re": lam.real, "lambda_im": lam.imag,
            "mode": self.mode,
        }


def wrap_phase(a: float) -> float:
    """Map to (-pi, pi]."""
    w = -((-a + np.pi) % (2 * np.pi) - np.pi)
    return float(w)


def assemble_eigenvalue(a_hat: float, b_hat: float, n_bits: int | None = None,
                        uncertainty: float | None = None, mode: str = "exact") -> EigenEstimate:
    if b_hat < 0:
        raise ValueError("b_hat must be non-negative")
    if uncertainty is None:
        uncertainty = 2.0 ** -(n_bits - 1) if n_bits else 0.0
    return EigenEstimate(float(a_hat), float(b_hat), fraction_of(a_hat), n_bits, float(uncertainty), mode)


def qst_estimate(system: BipartiteSystem, rho_B, tau: float, m: int, copies: int | None = None,
                 seed: int | None = None, two_basis: bool = True) -> EigenEstimate:
    """Full tomographic readout after m post-selected steps."""
    run = run_post_selected(system, rho_B, tau, m, index_mode="plus")
    ens = ensemble_from_run(run, copies, seed)
    b, se_b = qst_estimate_b(ens, m, return_stderr=True)
    a, se_a = qst_estimate_a(ens, b, m, two_basis=two_basis, assume_principal=not two_basis,
                             return_stderr=True)
    mode = "qst-exact" if ens.exact else "qst-sample"
    return assemble_eigenvalue(a, b, None, se_a / (2 * np.pi), mode)


def _reference_phase(system, tau, rho_B, M) -> float:
    """Phase of the eigenvalue that dominates V^M rho_B V^dag^M."""
    spectrum = classical_spectrum(construct_vb(system, tau))
    eig = spectrum.eig
    best, best_w = 0, -np.inf
    for k, lam in enumerate(eig.eigenvalues):
        v = eig.left[:, k]
        overlap = (v.conj() @ rho_B @ v).real
        if overlap <= 1e-14 or abs(lam) == 0:
            continue
        w = 2 * M * np.log(abs(lam)) + np.log(overlap)
        if w > best_w + 1e-12:
            best, best_w = k, w
    return float(np.angle(eig.eigenvalues[best]))


def mqft_extract_bits(system: BipartiteSystem, rho_B, tau: float, n: int, b_hat: float,
                      sampling: str | int = "exact", qk_mode: str = "validation",
                      a_ref: float | None = None, seed: int | None = None,
                      min_sigmas: float = 1.0) -> EigenEstimate:
    """Iterative measured-QFT readout of n bits of f.

    For k = n-1 .. 0 the index qubit is prepared in |+>, 2**k post-selected
    steps act on the target register carried over from the previous block,
    then the index qubit is rebalanced, phase-corrected by the bits already
    found, Hadamard-rotated and measured.

    ``qk_mode='validation'`` applies Q_k built from ``a_ref`` (by default the
    phase of the eigenvalue dominating the input). ``qk_mode='blind'`` skips
    Q_k and divides the decision statistic by 2x/(1+x^2), x = e^{-b 2^k}.
    ``sampling`` is ``'exact'`` or a number of fresh copies per bit.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if qk_mode not in ("validation", "blind"):
        raise ValueError("qk_mode must be 'validation' or 'blind'")
    exact = sampling == "exact"
    if not exact:
        copies = int(sampling)
        if copies < 1:
            raise ValueError("copies must be at least 1")
        if seed is None:
            raise ValueError("a seed is required for sampled readout")
    rho_target = check_density_matrix(rho_B, system.dim_B)
    if qk_mode == "validation" and a_ref is None:
        a_ref = _reference_phase(system, tau, rho_target, 2 ** (n - 1))
    reference = default_reference(system, tau, rho_target)
    kraus = success_kraus(system, tau)

    bits = [0] * (n + 1)  # bits[j] is the j-th binary digit of f
    block_fid = []
    for k in range(n - 1, -1, -1):
        M = 2**k
        run = init_run(system, rho_target, "plus", reference)
        run, _ = _advance(run, kraus, M, record=False)
        if reference is not None:
            block_fid.append(run.fidelity[-1])
        t = run.target_reduced
        rho_target = 0.5 * (t + t.conj().T)
        rho_target = rho_target / np.trace(rho_target).real

        feedback = 2 * np.pi * sum(bits[j] * 2.0 ** -(j - k) for j in range(k + 2, n + 1))
        x = np.exp(-b_hat * M)
        if qk_mode == "validation":
            Q = build_qk(a_ref, b_hat, k)
            rho = Q @ run.index_state() @ Q.conj().T
            raw = 2 * (np.exp(1j * feedback) * rho[1, 0]).real
            scale = 1.0
            stat = raw
        else:
            log_mag, phase = run.index_coherence()
            scale = 2 * x / (1 + x * x)
            raw = 2 * np.exp(log_mag) * np.cos(phase + feedback)
            log_scale = np.log(2) - b_hat * M - np.log1p(x * x)
            stat = np.exp(np.log(2) + log_mag - log_scale) * np.cos(phase + feedback) if np.isfinite(log_mag) else 0.0

        if exact:
            bit = 0 if stat >= 0 else 1
        else:
            rng = np.random.default_rng([seed, 1000 + k])
            p0 = min(max((1 + raw) / 2, 0.0), 1.0)
            z_hat = 2 * rng.binomial(copies, p0) / copies - 1
            margin = min_sigmas / np.sqrt(copies) / scale if scale > 0 else np.inf
            stat = z_hat / scale if scale > 0 else 0.0
            if abs(stat) < margin:
                raise InsufficientContrast(k + 1, stat, margin)
            bit = 0 if stat >= 0 else 1
        bits[k + 1] = bit

    f = sum(bits[j] * 2.0**-j for j in range(1, n + 1))
    a_hat = wrap_phase(-2 * np.pi * f)
    mode = f"mqft-{'exact' if exact else 'sample'}-{qk_mode}"
    return EigenEstimate(
        a=a_hat, b=float(b_hat), f=float(f), n_bits=n, uncertainty=2.0 ** -(n - 1), mode=mode,
        bits=tuple(bits[1:]), block_fidelity=tuple(block_fid),
    )
