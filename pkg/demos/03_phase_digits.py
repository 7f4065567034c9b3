"""Binary digits of the phase of a non-unitary eigenvalue.

For the t+ input of the cavity model the eigenvalue is
|lambda| exp(-i), so the phase fraction is 1/(2 pi). The measured-QFT
readout recovers it one bit at a time, least significant bit first.
"""
import numpy as np

from mpea import build_jaynes_cummings, mqft_extract_bits, qst_estimate
from mpea.models import singlet_triplet_basis

system = build_jaynes_cummings(n_max=4)
tau = 0.5
tp = singlet_triplet_basis().t_plus
rho = np.outer(tp, tp.conj())

b = qst_estimate(system, rho, tau, 1).b
print(f"decay rate b from tomography: {b:.6f}")
print(f"target fraction 1/(2 pi)     : {1 / (2 * np.pi):.10f}\n")
for n in (2, 4, 8, 12, 16):
    est = mqft_extract_bits(system, rho, tau, n, b)
    bits = "".join(str(x) for x in est.bits)
    print(f"n = {n:2d}  bits 0.{bits:<16s} f = {est.f:.10f}  +/- {est.uncertainty:.1e}")
