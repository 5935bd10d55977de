"""Stationary phase of the sub-sampled sampler: the diffusion limit.

On the contraction scale xi = sqrt(n) (x - x_hat) the batch-of-one sampler
forgets its velocity and behaves like an Ornstein-Uhlenbeck process whose
damping matrix quantifies the mixing lost to sub-sampling.  The autocorrelation
of the simulated sampler matches exp(-A I0 s / 2) already at moderate n.
"""

import math

import numpy as np

from zzscale import experiments as ex
from zzscale.asymptotics import ou_params, simulate_ou
from zzscale.models import GaussianLocation, LocationTruth

p = ou_params(GaussianLocation(), LocationTruth("gaussian", 0.0), m=1)
print(f"damping A = {p.A[0,0]:.6f} (= sqrt(2 pi)), decay B = {p.B[0,0]:.6f}")
print(f"predicted lag-1 autocorrelation: {math.exp(-p.B[0,0]):.5f}")

_, path = simulate_ou(p, t_max=20_000.0, dt=0.25, rng_seed=3)
xi = path[:, 0]
print(f"direct OU simulation: var = {xi.var():.3f}, lag-1 acf = {np.corrcoef(xi[:-4], xi[4:])[0,1]:.4f}")

cfg = ex.ExperimentConfig(
    model_kind="gaussian",
    schemes=(ex.SchemeSpec("ss"),),
    n=2000,
    t_max=1500.0,
    dt=0.25,
    seed=4,
    out_dir="demo_out/ou",
)
summary, acf = ex.stationary_distribution_check(cfg)
print(f"\nzig-zag at n = 2000: KS to the limiting Gaussian {summary[0][1]:.4f}, var(xi) {summary[0][2]:.3f}")
for _, lag, emp, theo in acf:
    print(f"  lag {lag:<5} empirical acf {emp:+.4f}   OU prediction {theo:+.4f}")
