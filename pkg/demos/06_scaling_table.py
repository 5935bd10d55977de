"""Cost scaling in the data size: the complexity table at desk scale.

Per unit of stationary time the canonical sampler accepts O(sqrt(n)) switches
at O(n) per-proposal cost, vanilla sub-sampling accepts O(n) switches at O(1)
cost with O(1) mixing time, and control variates accept O(sqrt(n)) switches
at O(1) cost -- the O(n) speedup the mixed accounting predicts.
"""

from zzscale import experiments as ex

cfg = ex.ExperimentConfig(
    model_kind="gaussian",
    schemes=(ex.SchemeSpec("canonical"), ex.SchemeSpec("ss"), ex.SchemeSpec("cv")),
    n_grid=(2**8, 2**10, 2**12, 2**14),
    seed=6,
    out_dir="demo_out/scaling",
)
rows, fits = ex.scaling_study(cfg)
print(f"{'scheme':>10} {'n':>7} {'acc/t':>10} {'prop/t':>10} {'evals/prop':>11} {'iact':>9}")
for r in rows:
    print(
        f"{r.scheme:>10} {r.n:>7} {r.accepted_per_unit_time:>10.1f} "
        f"{r.proposals_per_unit_time:>10.1f} {r.grad_evals_per_proposal:>11.0f} {r.iact_x1:>9.4f}"
    )
print("\nfitted log-log slopes against n:")
for f in fits:
    print(f"  {f['scheme']:>10} {f['quantity']:<26} {f['slope']:+.3f}  (R2 {f['r2']:.3f})")
print("\nfull-size sweep: zzscale scaling --schemes can,ss,cv --ngrid 2^10..2^18")
