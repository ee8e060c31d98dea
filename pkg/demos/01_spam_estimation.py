"""Estimate preparation and readout errors from six calibration sequences.

A simulated qubit starts slightly off the +z pole and has asymmetric readout.
We run the six gate sequences, compute the posterior over the five SPAM
parameters, and compare it with the truth. Run with ``python3 demos/01_spam_estimation.py``.
"""

# %%
import numpy as np

from spamcal import SIX_GATES, EstimationConfig, ExperimentPlan, FullParams, SpamParams, estimate_spam, run_experiment

truth = SpamParams(x0=0.05, y0=-0.03, z0=0.99, pi0=0.505, piz=0.485)
counts = run_experiment(FullParams(truth), ExperimentPlan(SIX_GATES, shots=16384, seed=1))

for seq, k, n in zip(counts.sequences, counts.successes, counts.shots):
    print(f"{seq.label:>6}: {k:5d} / {n} ones")

# %%
# 5e5 samples keeps this quick; the default 5e6 tightens the Monte Carlo error.
post = estimate_spam(counts, EstimationConfig(n_samples=500_000, seed=2))

print(f"\n{'param':>6} {'truth':>8} {'mean':>9} {'std':>8}  pull")
for name, true in zip(post.names, truth.as_array()):
    mean, std = post[name]
    print(f"{name:>6} {true:8.4f} {mean:9.5f} {std:8.5f}  {(mean - true) / std:+.2f}")

for name in ("rho0", "phi0"):
    mean, std = post[name]
    print(f"{name:>6}          {mean:9.5f} {std:8.5f}")
print(f"\neffective sample size {post.ess:.0f} of {post.n_samples}")

# %%
# z0 and piz are almost fully anticorrelated: both set the |0> readout probability.
corr = post.cov / np.outer(post.std, post.std)
print("\ncorrelation matrix")
print("        " + " ".join(f"{n:>7}" for n in post.names))
for name, row in zip(post.names, corr):
    print(f"{name:>7} " + " ".join(f"{v:7.3f}" for v in row))
