"""Central spin coupled along x and y to a pair of spins.

The t0 input is an eigenvector of V_B with eigenvalue cos(2 sqrt 2), so
every projection succeeds with the same probability and the state never
changes. Survival after m steps is cos(2 sqrt 2)^(2m).
"""
import numpy as np

from mpea import build_axial_symmetry, construct_vb, run_post_selected, survival_curve
from mpea.models import singlet_triplet_basis

system = build_axial_symmetry(J=2)
tau = 1.0
t0 = singlet_triplet_basis().t0
rho = np.outer(t0, t0.conj())

curve = survival_curve(construct_vb(system, tau), rho, 10)
run = run_post_selected(system, rho, tau, 10, reference=t0)
c = np.cos(2 * np.sqrt(2))
print(" m   matrix power   circuit       closed form")
for m in range(11):
    print(f"{m:2d}  {curve[m]:.10f}  {run.survival[m]:.10f}  {c ** (2 * m):.10f}")
print(f"\nfidelity with t0 after 10 steps: {run.fidelity[-1]:.12f}")
