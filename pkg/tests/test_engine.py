import numpy as np
import pytest

from mpea import engine
from mpea.errors import InvalidDensityMatrix, ZeroProbability
from mpea.evolution import classical_spectrum, construct_vb, from_unitary
from mpea.linalg import matrix_exp_hermitian
from mpea.models import build_axial_symmetry, build_generic, build_jaynes_cummings, singlet_triplet_basis

TAU = 0.5
ST = singlet_triplet_basis()


@pytest.fixture(scope="module")
def jc():
    return build_jaynes_cummings(n_max=4)


@pytest.fixture(scope="module")
def axial():
    return build_axial_symmetry(2.0)


def mixed():
    return np.eye(4, dtype=complex) / 4


def jc_diagonal():
    return np.array([np.exp(-0.5j), (3 + 2 * np.cos(np.sqrt(10) / 2)) / 5 * np.exp(-1j),
                     np.cos(np.sqrt(6) / 2) * np.exp(-0.5j), np.cos(np.sqrt(2) / 2)])


def eq10(V, rho, m):
    Vm = np.linalg.matrix_power(V, m)
    out = Vm @ rho @ Vm.conj().T
    return out / np.trace(out).real


def dense_run(system, rho_B, tau, m, index_mode="plus"):
    """Full joint density matrix on index⊗B⊗A, evolved with the dense
    controlled propagator and the projector acting on A."""
    alpha, beta = engine.INDEX_AMPLITUDES[index_mode]
    psi = np.array([alpha, beta])
    phi = np.outer(system.phi_A, system.phi_A.conj())
    rho = np.kron(np.outer(psi, psi.conj()), np.kron(rho_B, phi))
    CU = engine.controlled_unitary(system, tau)
    Pi = np.kron(np.eye(2), engine.measurement_projector(system))
    states, probs = [rho], []
    for _ in range(m):
        rho = Pi @ CU @ rho @ CU.conj().T @ Pi
        p = np.trace(rho).real
        rho = rho / p
        states.append(rho)
        probs.append(p)
    return states, probs


class TestInit:
    def test_mixed_input(self, jc):
        run = engine.init_run(jc, mixed(), "plus")
        rho = run.joint_state
        assert abs(np.trace(rho) - 1) < 1e-12
        purity = np.trace(run.target_reduced @ run.target_reduced).real
        assert abs(purity - 0.25) < 1e-12
        assert run.m == 0 and run.survival == (1.0,)

    def test_pure_input(self, axial):
        run = engine.init_run(axial, engine.pure(ST.t0), "plus")
        assert abs(np.trace(run.target_reduced @ run.target_reduced).real - 1) < 1e-12

    @pytest.mark.parametrize("bad", [
        np.eye(4) / 2,                      # trace 2
        np.diag([1.5, -0.5, 0, 0]),         # negative eigenvalue
        np.eye(2) / 2,                      # wrong size
        np.triu(np.ones((4, 4))) / 4,       # not Hermitian
    ])
    def test_invalid_density(self, jc, bad):
        with pytest.raises(InvalidDensityMatrix):
            engine.init_run(jc, bad)

    def test_unknown_index_mode(self, jc):
        with pytest.raises(ValueError):
            engine.init_run(jc, mixed(), "minus")

    def test_fidelity_starts_with_overlap(self, jc):
        run = engine.init_run(jc, mixed(), reference=ST.s)
        assert run.fidelity == pytest.approx((0.25,))


class TestStep:
    def test_zero_index_never_fails(self, jc):
        run = engine.init_run(jc, mixed(), "zero")
        for _ in range(5):
            run, p = engine.step(run, TAU)
            assert p == 1.0
        assert run.survival == (1.0,) * 6
        np.testing.assert_allclose(run.target_reduced, mixed(), atol=1e-15)

    def test_conditional_survival_closed_form(self, jc):
        lam = jc_diagonal()
        run = engine.run_post_selected(jc, mixed(), TAU, 20)
        for m, P in enumerate(run.survival):
            assert abs(P - 0.25 * np.sum(np.abs(lam) ** (2 * m))) < 1e-10

    def test_unconditional_bookkeeping(self, jc):
        run = engine.init_run(jc, mixed(), "plus")
        total = 1.0
        for m in range(1, 6):
            run, p = engine.step(run, TAU)
            total *= p
            assert abs(run.unconditional[-1] - total) < 1e-12
            assert abs(run.unconditional_survival - (0.5 + 0.5 * run.conditional_survival)) < 1e-12

    @pytest.mark.parametrize("m", [1, 3, 10])
    def test_eigenstate_index_coherence(self, jc, m):
        lam = jc_diagonal()[1]
        run = engine.run_post_selected(jc, engine.pure(ST.t_plus), TAU, m)
        rho = run.index_state()
        x = abs(lam) ** m
        assert abs(abs(rho[1, 0]) - x / (1 + x * x)) < 1e-10
        assert abs(np.angle(rho[1, 0]) - np.angle(lam**m)) < 1e-10
        log_mag, phase = run.index_coherence()
        assert abs(log_mag - np.log(x / (1 + x * x))) < 1e-10

    def test_zero_probability(self):
        # a Kraus operator that annihilates everything: the projection cannot succeed
        sysm = build_generic(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((4, 4)), [1, 0])
        dead = np.zeros((4, 4), dtype=complex)
        run = engine.init_run(sysm, np.eye(2) / 2, "plus")
        with pytest.raises(ZeroProbability):
            engine._advance(run, dead, 1, record=True)
        # the idle branch alone never evolves, so nothing can fail there
        run = engine.init_run(sysm, np.eye(2) / 2, "zero")
        _, probs = engine._advance(run, dead, 1, record=True)
        assert probs == [1.0]

    def test_tiny_but_positive_probability_survives(self):
        # exp(-i X pi/2) leaves an amplitude of order 1e-17 on |0>
        X = np.array([[0, 1], [1, 0]])
        sysm = build_generic(X, np.zeros((2, 2)), np.zeros((4, 4)), [1, 0])
        run, p = engine.step(engine.init_run(sysm, np.eye(2) / 2, "plus"), np.pi / 2)
        assert 0 < run.conditional_survival < 1e-30


class TestCircuitConsistency:
    @pytest.mark.parametrize("index_mode", ["plus", "zero"])
    def test_block_form_matches_dense(self, jc, index_mode):
        rho_B = engine.pure(ST.t0) * 0.3 + mixed() * 0.7
        states, probs = dense_run(jc, rho_B, TAU, 6, index_mode)
        run = engine.init_run(jc, rho_B, index_mode)
        for m in range(1, 7):
            run, p = engine.step(run, TAU)
            assert abs(p - probs[m - 1]) < 1e-12
            np.testing.assert_allclose(run.joint_state, states[m], atol=1e-12)

    @pytest.mark.parametrize("name", ["jc", "axial", "random"])
    def test_b_marginal_matches_matrix_path(self, name, jc, axial):
        if name == "jc":
            sysm, tau, rho = jc, TAU, mixed()
        elif name == "axial":
            sysm, tau, rho = axial, 1.0, engine.pure(ST.t0) * 0.5 + engine.pure(ST.s) * 0.5
        else:
            rng = np.random.default_rng(4)
            h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
            sysm = build_generic(np.zeros((3, 3)), np.zeros((2, 2)), h + h.conj().T, [0.6, 0.8, 0])
            tau, rho = 0.4, np.eye(2) / 2
        V = construct_vb(sysm, tau).V
        run = engine.init_run(sysm, rho)
        P = engine.survival_curve(construct_vb(sysm, tau), rho, 20)
        for m in range(1, 21):
            run, _ = engine.step(run, tau)
            np.testing.assert_allclose(run.target_reduced, eq10(V, rho, m), atol=1e-9)
            assert abs(run.conditional_survival - P[m]) < 1e-9

    def test_joint_state_is_a_density_matrix(self, jc):
        run = engine.run_post_selected(jc, mixed(), TAU, 8)
        rho = run.joint_state
        assert abs(np.trace(rho) - 1) < 1e-10
        assert np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] > -1e-10


class TestRunPostSelected:
    def test_jc_mixed_converges_to_singlet(self, jc):
        run = engine.run_post_selected(jc, mixed(), TAU, 30)
        F = np.array(run.fidelity)
        assert np.all(np.diff(F) >= -1e-12)
        assert F[-1] > 1 - 1e-5
        np.testing.assert_allclose(run.target_reduced, engine.pure(ST.s), atol=1e-5)
        assert abs(run.survival[-1] - 0.25) < 1e-5

    def test_default_reference_follows_the_input(self, jc):
        # the singlet dominates, so it is the reference for a mixed input
        ref = engine.default_reference(jc, TAU, mixed())
        assert abs(abs(ref.conj() @ ST.s) - 1) < 1e-12

    def test_axial_t0(self, axial):
        run = engine.run_post_selected(axial, engine.pure(ST.t0), 1.0, 10)
        np.testing.assert_allclose(run.fidelity, 1.0, atol=1e-12)
        assert abs(run.survival[-1] - np.cos(2 * np.sqrt(2)) ** 20) < 1e-12
        assert abs(round(run.survival[-1], 2) - 0.37) < 1e-12

    def test_m_must_be_positive(self, jc):
        with pytest.raises(ValueError):
            engine.run_post_selected(jc, mixed(), TAU, 0)

    def test_survival_is_monotone(self, jc):
        run = engine.run_post_selected(jc, mixed(), TAU, 20)
        assert np.all(np.diff(run.survival) <= 1e-15)
        assert all(0 < p <= 1 for p in run.survival)


class TestSurvivalCurve:
    def test_unitary(self):
        U = from_unitary(matrix_exp_hermitian(np.array([[0, 1], [1, 0]]), 0.4))
        np.testing.assert_allclose(engine.survival_curve(U, np.eye(2) / 2, 10), 1.0, atol=1e-14)

    def test_axial_closed_form(self, axial):
        P = engine.survival_curve(construct_vb(axial, 1.0), engine.pure(ST.t0), 15)
        np.testing.assert_allclose(P, np.cos(2 * np.sqrt(2)) ** (2 * np.arange(16)), atol=1e-12)

    def test_deep_decay_stays_finite(self, jc):
        P = engine.survival_curve(construct_vb(jc, TAU), engine.pure(ST.t_plus), 2000)
        lam = abs(jc_diagonal()[1])
        m = np.arange(300)
        np.testing.assert_allclose(P[:300], lam ** (2 * m), rtol=1e-10)
        assert np.all(np.isfinite(P)) and np.all(P >= 0)

    def test_index_coherence_survives_long_blocks(self, jc):
        run = engine.init_run(jc, engine.pure(ST.t_plus))
        run = engine.evolve_block(run, TAU, 2**12)
        log_mag, phase = run.index_coherence()
        lam = jc_diagonal()[1]
        # |rho_10| = x / (1 + x^2) with x = |lam|^M, far below the smallest double
        assert abs(log_mag - 2**12 * np.log(abs(lam))) < 1e-6
        assert abs(np.exp(1j * phase) - (lam / abs(lam)) ** 2**12) < 1e-8

    def test_asymptotic_law(self, jc):
        ev = construct_vb(jc, TAU)
        spectrum = classical_spectrum(ev)
        u, v = spectrum.dominant_right, spectrum.dominant_left
        rho = mixed()
        P = engine.survival_curve(ev, rho, 60)
        pred = np.abs(spectrum.dominant) ** (2 * np.arange(61)) * (u.conj() @ u).real * (v.conj() @ rho @ v).real
        assert abs(P[60] / pred[60] - 1) < 1e-12

    def test_log_slope(self, jc):
        # the gap to |lambda_2| = 0.76 needs m well past 20 for a 1e-6 slope match
        ev = construct_vb(jc, TAU)
        lam = classical_spectrum(ev).dominant
        P = engine.survival_curve(ev, mixed(), 60)
        m = np.arange(40, 61)
        slope = np.polyfit(m, np.log(P[40:]), 1)[0]
        assert abs(slope - 2 * np.log(abs(lam))) < 1e-6

    def test_fidelity_gap_ratio(self, jc):
        ev = construct_vb(jc, TAU)
        lams = np.abs(classical_spectrum(ev).eigenvalues)
        r2 = (lams[1] / lams[0]) ** 2
        run = engine.run_post_selected(jc, mixed(), TAU, 16, reference=ST.s)
        gap = 1 - np.array(run.fidelity)
        for m in range(5, 15):
            ratio = gap[m + 1] / gap[m]
            assert r2 / 2 < ratio < 2 * r2


class TestTrajectories:
    def test_unitary_never_fails(self):
        sysm = build_generic(np.zeros((2, 2)), np.array([[0, 1], [1, 0]]), np.zeros((4, 4)), [1, 0])
        sample = engine.sample_trajectories(sysm, np.eye(2) / 2, 0.7, 5, 3000, seed=1)
        assert sample.success_rate == 1.0
        assert np.all(sample.attempted == 5)

    def test_axial_rate(self, axial):
        p = np.cos(2 * np.sqrt(2)) ** 20
        sample = engine.sample_trajectories(axial, engine.pure(ST.t0), 1.0, 10, 100_000, seed=2024)
        assert abs(sample.success_rate - p) <= 3 * np.sqrt(p * (1 - p) / 100_000)

    def test_same_seed_same_records(self, jc):
        a = engine.sample_trajectories(jc, mixed(), TAU, 6, 2500, seed=9)
        b = engine.sample_trajectories(jc, mixed(), TAU, 6, 2500, seed=9)
        assert a.records == b.records
        c = engine.sample_trajectories(jc, mixed(), TAU, 6, 2500, seed=10)
        assert a.records != c.records

    @pytest.mark.parametrize("workers", [2, 4, 7])
    def test_worker_count_independent(self, jc, workers):
        a = engine.sample_trajectories(jc, mixed(), TAU, 6, 5000, seed=3)
        b = engine.sample_trajectories(jc, mixed(), TAU, 6, 5000, seed=3, workers=workers)
        np.testing.assert_array_equal(a.attempted, b.attempted)
        np.testing.assert_array_equal(a.succeeded, b.succeeded)

    def test_record_invariants(self, jc):
        sample = engine.sample_trajectories(jc, mixed(), TAU, 8, 4000, seed=5)
        for r in sample.records:
            assert r.succeeded_chain_length <= r.attempted
            assert r.success == (r.succeeded_chain_length == 8)

    def test_step_probabilities_chain_to_survival(self, jc):
        probs = engine.conditional_step_probabilities(jc, mixed(), TAU, 12)
        P = engine.survival_curve(construct_vb(jc, TAU), mixed(), 12)
        np.testing.assert_allclose(np.cumprod(probs), P[1:], atol=1e-12)

    def test_needs_a_trajectory(self, jc):
        with pytest.raises(ValueError):
            engine.sample_trajectories(jc, mixed(), TAU, 3, 0, seed=1)
