"""Over-rotation and depolarizing from repeated X90 pulses.

Adding long X90 trains to the six calibration sequences amplifies a small
over-rotation theta. This demo shows how the posterior width of theta shrinks
as the train length 4*n_rep grows.
"""

# %%
from spamcal import EstimationConfig, ExperimentPlan, FullParams, SpamParams, eight_gates, estimate_full, run_experiment

truth = FullParams(SpamParams(0.05, -0.03, 0.99, 0.505, 0.485), theta=0.01, eps=0.0005)
config = EstimationConfig(n_samples=500_000, seed=4)

print(f"{'n_rep':>5} {'theta':>9} {'std':>8} {'eps':>9} {'std':>9}")
for n_rep in (1, 2, 4, 8):
    counts = run_experiment(truth, ExperimentPlan(eight_gates(n_rep), shots=16384, seed=3))
    post = estimate_full(counts, config)
    (t, st), (e, se) = post["theta"], post["eps"]
    print(f"{n_rep:5d} {t:9.5f} {st:8.5f} {e:9.6f} {se:9.6f}")

# %%
# The two extra sequences at n_rep = 8: 32 and 33 X90 pulses.
print([g.label for g in eight_gates(8)])
