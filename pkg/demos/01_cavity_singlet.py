"""Two spins in a cavity, photon counted after every interval.

Starting from the maximally mixed spin state, repeated successful photon
detections drive the spins toward the dark state s. Survival settles at
1/4, the weight of s in the mixed input.
"""
import numpy as np

from mpea import build_jaynes_cummings, classical_spectrum, construct_vb, run_post_selected
from mpea.engine import default_reference

system = build_jaynes_cummings(w0=1, w1=1, J=1, n_max=4)
tau = 0.5
ev = construct_vb(system, tau)

print("V_B in the singlet/triplet basis (s, t+, t0, t-):")
print(np.round(ev.in_basis(), 4))

spectrum = classical_spectrum(ev)
for row in spectrum.rows():
    print(f"  lambda = {row['lambda']:.6f}   |lambda| = {row['modulus']:.6f}   f = {row['fraction']:.6f}")

rho = np.eye(4) / 4
ref = default_reference(system, tau, rho)
run = run_post_selected(system, rho, tau, 20, reference=ref)
print("\n m   P(m)       F(m)")
for m in (0, 1, 2, 5, 10, 20):
    print(f"{m:2d}  {run.survival[m]:.6f}   {run.fidelity[m]:.6f}")
