"""Killed paths in a disc: exit times, survival near the boundary, lambda_1.

Run:  python3 demos/02_killing_and_survival.py   (about a minute)
"""

import numpy as np

from cylstable import AlphaParam, SimConfig, ball_domain, estimate_lambda1, mean_exit_time, survival_probability

params = AlphaParam(1.0, 2)
cfg = SimConfig(dt=1e-3, n_paths=20_000, seed=3)

# Scaling: doubling the radius multiplies the mean exit time by 2**alpha.
m1, s1 = mean_exit_time(ball_domain(1.0), params, [0.0, 0.0], cfg)
m2, s2 = mean_exit_time(ball_domain(2.0), params, [0.0, 0.0], cfg)
print(f"E tau(B1) = {m1:.4f} +- {s1:.4f};  E tau(B2) = {m2:.4f} +- {s2:.4f}")
print(f"ratio {m2 / m1:.3f}  (2**alpha = {2 ** params.alpha:.3f})")

# Survival to t=1 from distance delta to the boundary decays like delta**(alpha/2).
disc = ball_domain(1.0)
deltas = np.array([0.2, 0.1, 0.05, 0.025])
surv = np.array([survival_probability(disc, params, [1 - d, 0.0], 1.0, cfg)[0] for d in deltas])
slope = np.polyfit(np.log(deltas), np.log(surv), 1)[0]
print("survival:", np.round(surv, 4), f"log-log slope {slope:.3f} (alpha/2 = {params.alpha / 2})")

# The principal eigenvalue from the exponential tail of the survival curve.
est = estimate_lambda1(disc, params, [(0.0, 0.0), (0.4, 0.0)], SimConfig(dt=1e-3, t_end=2.0, n_paths=40_000, seed=5),
                       n_boot=50)
print(f"lambda_1(B1) = {est.lambda1:.3f} +- {est.stderr:.3f}")
