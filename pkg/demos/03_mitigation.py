"""Correct readout on a GHZ parity measurement.

Per-qubit readout errors follow from the POVM parameters. The tensor-product
confusion matrix is inverted under a probability-simplex constraint, and the
parity <X...X> of a GHZ state with phase pi/4 is compared before and after.
"""

# %%
import math

from spamcal import assemble_mitigation_matrix, amplitude_correction, mitigate_counts, prerotation_from_state
from spamcal.mitigation import expectation_parity, readout_eps
from spamcal.simulator import ghz_readout_distribution, make_generator

eps = readout_eps(pi0=0.505, piz=0.485)
print(f"readout flips: P(1|0) = {eps[0]:.3f}, P(0|1) = {eps[1]:.3f}")
ideal = math.cos(math.pi / 4)

for n in (3, 5, 7):
    pairs = [eps] * n
    matrix = assemble_mitigation_matrix(pairs)
    noisy = ghz_readout_distribution(n, math.pi / 4, pairs)
    counts = make_generator(n).multinomial(100_000, noisy)
    exact = mitigate_counts(noisy, matrix)
    sampled = mitigate_counts(counts, matrix)
    print(f"N={n}: raw {expectation_parity(noisy):.4f}  mitigated {expectation_parity(exact.probabilities):.4f}"
          f"  from 1e5 shots {expectation_parity(sampled.probabilities):.4f}  ideal {ideal:.4f}")

# %%
# Preparation errors: rotate the estimated initial state back onto +z.
rot = prerotation_from_state(0.05, -0.03, 0.99)
print(f"\npre-rotation phi0 = {rot.phi0:.4f}, theta0 = {rot.theta0:.4f}, rotate: {rot.apply_x_correction}")
print("rotated state", rot.apply([0.05, -0.03, 0.99]).round(12))

# Over-rotation feeds back into the pulse amplitude.
print(f"amplitude for theta = pi/100: {amplitude_correction(1.0, math.pi / 100):.4f}")
