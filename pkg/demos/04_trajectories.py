"""Monte-Carlo trajectories against the exact survival probability.

Each trajectory runs the projections one after another and stops at the
first failure. The fraction that survives all m steps is a binomial
estimate of P(m).
"""
import numpy as np

from mpea import build_axial_symmetry, sample_trajectories
from mpea.models import singlet_triplet_basis

system = build_axial_symmetry(J=2)
t0 = singlet_triplet_basis().t0
rho = np.outer(t0, t0.conj())
m = 10
exact = np.cos(2 * np.sqrt(2)) ** (2 * m)

for n in (1_000, 10_000, 100_000):
    sample = sample_trajectories(system, rho, 1.0, m, n, seed=20240611, workers=4)
    sigma = np.sqrt(exact * (1 - exact) / n)
    z = (sample.success_rate - exact) / sigma
    print(f"n = {n:6d}  rate = {sample.success_rate:.5f}  exact = {exact:.5f}  z = {z:+.2f}")

lengths = np.bincount(sample.attempted, minlength=m + 1)[1:]
print("\nprojections attempted per trajectory:", lengths.tolist())
