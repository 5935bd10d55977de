"""Experiments confronting the simulated sampler with its predicted limits.

Each experiment writes one or more CSVs plus a plain key=value manifest into
its output directory and returns the numbers it wrote.  Runs are reproducible
byte for byte from (config, root seed): replicate RNG streams are derived as
``default_rng([seed, tag, replicate])`` and no timestamps enter the outputs.

Replicates can run in parallel processes; set ``ZZSCALE_THREADS`` to cap the
worker count (1 disables pooling).
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats

from . import __version__
from .asymptotics import (
    DriftFunction,
    bvm_gaussian,
    limiting_zzcv_rate,
    ou_params,
    rescale_trajectory,
    solve_fluid_ode,
)
from .models import (
    CauchyLocation,
    Dataset,
    GaussianLocation,
    LaplaceLocation,
    LocationTruth,
    LogisticRegression,
    LogisticTruth,
    Model,
    fit_mle,
    generate_data,
    information,
)
from .pdmp import PhaseState, SimBudget, Skeleton, position_at, simulate
from .rates import (
    CanonicalScheme,
    FixedReference,
    MLEReference,
    PerturbedMLEReference,
    VanillaSubsampling,
    ZigZagProcess,
    choose_reference,
    control_variates,
    mixed_subsampling,
)

__all__ = [
    "ExperimentConfig",
    "InsufficientSamples",
    "ScalingRow",
    "SchemeSpec",
    "TooFewSamples",
    "confinement_check",
    "drift_table",
    "iact_batch_means",
    "iact_estimate",
    "limiting_rate_check",
    "make_model_truth",
    "mixed_comparison",
    "scaling_study",
    "stationary_distribution_check",
    "transient_experiment",
]

_FMT = "%.17g"


class TooFewSamples(ValueError):
    """Autocorrelation-time estimation needs more samples."""


class InsufficientSamples(RuntimeError):
    """Too few effective samples for a meaningful distribution check."""


# ---------------------------------------------------------------------------
# Output plumbing


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _FMT % (float(v) + 0.0)
    return str(v)


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_manifest(path, entries: dict) -> None:
    lines = [f"{k} = {_fmt(entries[k])}" for k in sorted(entries)]
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write(f"\nconfig_hash = {digest}\n")


def _thread_count() -> int:
    raw = os.environ.get("ZZSCALE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_replicates(fn, items):
    workers = _thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _rep_rng(seed: int, tag: int, k: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag, k])


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class SchemeSpec:
    """Which estimator drives the accept step, plus its knobs."""

    kind: str  # canonical | ss | cv | mixed
    m: int = 1
    reference: str = "mle"  # mle | perturbed:<delta> | fixed:<x...>
    mixed_radius: Optional[float] = None

    def label(self) -> str:
        return self.kind if self.kind != "ss" or self.m == 1 else f"ss{self.m}"


@dataclass(frozen=True)
class ExperimentConfig:
    model_kind: str = "gaussian"
    x0: tuple = (0.0,)
    truth_kind: Optional[str] = None  # defaults to the model family
    schemes: tuple = (SchemeSpec("ss"),)
    n: int = 1000
    n_grid: tuple = ()
    replicates: int = 1
    t_max: float = 10.0
    dt: float = 0.01
    seed: int = 2024
    start_offset: float = 3.0
    start_velocity: float = 0.0  # 0 = random per replicate, else +-1
    epsilon: float = 0.5
    out_dir: str = "out"

    def out_path(self) -> Path:
        p = Path(self.out_dir)
        p.mkdir(parents=True, exist_ok=True)
        return p

    def manifest_entries(self, extra=None) -> dict:
        ent = {
            "model": self.model_kind,
            "truth": self.truth_kind or self.model_kind,
            "x0": ";".join(_FMT % v for v in self.x0),
            "schemes": ";".join(s.kind + f":m={s.m}" for s in self.schemes),
            "n": self.n,
            "replicates": self.replicates,
            "t_max": self.t_max,
            "dt": self.dt,
            "seed": self.seed,
            "version": __version__,
        }
        if self.n_grid:
            ent["n_grid"] = ";".join(str(v) for v in self.n_grid)
        if extra:
            ent.update(extra)
        return ent


def make_model_truth(model_kind: str, x0=(0.0,), truth_kind: Optional[str] = None):
    """Instantiate the (model, truth) pair named in a config."""
    x0 = tuple(float(v) for v in np.atleast_1d(x0))
    if model_kind == "logistic":
        comps = tuple([("const", 1.0)] + [("normal", 0.0, 1.0)] * (len(x0) - 1))
        from .models import CovariateSpec

        return LogisticRegression(len(x0)), LogisticTruth(np.array(x0), CovariateSpec(comps))
    models = {"gaussian": GaussianLocation, "laplace": LaplaceLocation, "cauchy": CauchyLocation}
    if model_kind not in models:
        raise ValueError(f"unknown model kind {model_kind!r}")
    model = models[model_kind]()
    truth = LocationTruth(truth_kind or model_kind, loc=x0[0])
    return model, truth


def make_scheme(spec: SchemeSpec, dataset: Dataset, model: Model):
    """Resolve a scheme spec into a scheme object (reference point included)."""
    if spec.kind == "canonical":
        return CanonicalScheme()
    if spec.kind == "ss":
        return VanillaSubsampling(spec.m)
    strategy = _parse_reference(spec.reference)
    x_ref, _ = choose_reference(dataset, model, strategy)
    if spec.kind == "cv":
        return control_variates(dataset, model, spec.m, x_ref)
    if spec.kind == "mixed":
        if spec.mixed_radius is None:
            raise ValueError("mixed scheme needs mixed_radius")
        return mixed_subsampling(dataset, model, spec.m, x_ref, spec.mixed_radius)
    raise ValueError(f"unknown scheme kind {spec.kind!r}")


def _parse_reference(text: str):
    if text == "mle":
        return MLEReference()
    if text.startswith("perturbed:"):
        vals = [float(v) for v in text.split(":", 1)[1].split(",")]
        return PerturbedMLEReference(np.array(vals))
    if text.startswith("fixed:"):
        vals = [float(v) for v in text.split(":", 1)[1].split(",")]
        return FixedReference(np.array(vals))
    raise ValueError(f"unknown reference strategy {text!r}")


def _drift_for(spec: SchemeSpec, model, truth, dataset: Dataset) -> DriftFunction:
    x_star = None
    if spec.kind in ("cv", "mixed"):
        strategy = _parse_reference(spec.reference)
        x_star, _ = choose_reference(dataset, model, strategy)
    return DriftFunction(
        spec.kind, model, truth, m=spec.m, x_star=x_star, mixed_radius=spec.mixed_radius
    )


# ---------------------------------------------------------------------------
# Autocorrelation time


def iact_estimate(samples, dt: float) -> float:
    """Integrated autocorrelation time in time units (initial positive sequence).

    Geyer's pairwise truncation on the empirical autocorrelations, times the
    sample spacing ``dt``.  Cross-check against :func:`iact_batch_means`.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 1000:
        raise TooFewSamples(f"need >= 1000 samples, got {x.size}")
    rho = _autocorr(x)
    npairs = (len(rho) - 1) // 2
    tau = 0.0
    prev = math.inf
    for j in range(npairs):
        gamma = rho[2 * j] + rho[2 * j + 1]
        if gamma <= 0.0:
            break
        gamma = min(gamma, prev)  # enforce monotone initial sequence
        prev = gamma
        tau += gamma
    tau = max(1.0, 2.0 * tau - 1.0)
    return tau * dt


def iact_batch_means(samples, dt: float, n_batches: int = 0) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size < 1000:
        raise TooFewSamples(f"need >= 1000 samples, got {x.size}")
    if n_batches <= 0:
        n_batches = int(math.sqrt(x.size))  # batch count and length both grow
    length = x.size // n_batches
    means = x[: length * n_batches].reshape(n_batches, length).mean(axis=1)
    var = x.var()
    if var == 0.0:
        return dt
    tau = length * means.var(ddof=1) / var
    return max(1.0, tau) * dt


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: n // 3]
    if acov[0] <= 0:
        return np.zeros(2)
    return acov / acov[0]


def _ks_distance(samples: np.ndarray, cdf) -> float:
    return float(stats.kstest(samples, cdf).statistic)


# ---------------------------------------------------------------------------
# Chunked stationary runs (memory stays bounded for long horizons)


@dataclass
class _RunAccumulator:
    proposals: int = 0
    accepted: int = 0
    grad_term_evals: int = 0


def _run_samples(process, z0: PhaseState, t_total: float, sample_dt: float, rng, chunk_t: float = 200.0):
    """Positions sampled on the grid ``k * sample_dt`` over a chunked run."""
    samples = []
    acc = _RunAccumulator()
    t0 = 0.0
    z = z0
    next_t = 0.0
    while t0 < t_total - 1e-12:
        span = min(chunk_t, t_total - t0)
        skel, led = simulate(process, z, SimBudget(t_max=span), rng)
        acc.proposals += led.proposals
        acc.accepted += led.accepted
        acc.grad_term_evals += led.grad_term_evals
        while next_t <= t0 + skel.t_end + 1e-12:
            local = min(max(next_t - t0, 0.0), skel.t_end)
            samples.append(position_at(skel, local))
            next_t += sample_dt
        xe = position_at(skel, skel.t_end)
        z = PhaseState(xe, skel.vs[-1])
        t0 += skel.t_end
    return np.array(samples), acc


# ---------------------------------------------------------------------------
# Transient phase: sampler path against the fluid ODE


def transient_experiment(cfg: ExperimentConfig):
    """Overlay simulated trajectories with the fluid-limit ODE.

    Starts every run at ``x0 + start_offset`` and reports, per scheme and
    replicate, the sup distance to the RK4 solution up to the first time the
    ODE reaches the zero-rate locus (or ``t_max``).
    """
    model, truth = make_model_truth(cfg.model_kind, cfg.x0, cfg.truth_kind)
    out = cfg.out_path()
    data = generate_data(truth, cfg.n, _rep_rng(cfg.seed, 0, 0))
    x_start = np.atleast_1d(np.array(cfg.x0, dtype=float)) + cfg.start_offset
    grid = np.arange(0.0, cfg.t_max + 1e-12, cfg.dt)
    summary_rows = []
    for spec in cfg.schemes:
        drift = _drift_for(spec, model, truth, data)
        ode = solve_fluid_ode(drift, x_start, cfg.t_max, step=min(cfg.dt, 1e-3 * cfg.t_max))
        t_stop = ode.t_end if ode.status == "hit_h" else cfg.t_max
        ode_on_grid = np.array([ode.position_at(t) for t in grid if t <= t_stop + 1e-12])
        scheme = make_scheme(spec, data, model)
        process = ZigZagProcess(scheme, data, model)
        n_live = len(ode_on_grid)
        args = [
            (process, x_start, cfg.start_velocity, cfg.t_max, grid, cfg.seed, k)
            for k in range(cfg.replicates)
        ]
        results = _map_replicates(_transient_rep, args)
        for k, path in enumerate(results):
            sup_err = float(np.max(np.abs(path[:n_live] - ode_on_grid)))
            summary_rows.append((spec.label(), k, sup_err, t_stop))
            if k == 0:
                rows = [(t, *path[j], *ode.position_at(t)) for j, t in enumerate(grid)]
                d = model.dim
                hdr = ["t"] + [f"x_sim{i+1}" for i in range(d)] + [f"x_ode{i+1}" for i in range(d)]
                write_csv(out / f"transient_{spec.label()}.csv", hdr, rows)
    write_csv(out / "transient_summary.csv", ["scheme", "replicate", "sup_error", "t_stop"], summary_rows)
    write_manifest(out / "transient.manifest", cfg.manifest_entries())
    return summary_rows


def _transient_rep(args):
    process, x_start, v_start, t_max, grid, seed, k = args
    rng = _rep_rng(seed, 1, k)
    if v_start == 0.0:
        v0 = np.where(rng.random(x_start.size) < 0.5, -1.0, 1.0)
    else:
        v0 = np.full(x_start.size, float(np.sign(v_start)))
    skel, _ = simulate(process, PhaseState(x_start, v0), SimBudget(t_max=t_max), rng)
    return np.array([position_at(skel, min(t, skel.t_end)) for t in grid])


# ---------------------------------------------------------------------------
# Stationary phase: distribution and autocorrelation checks


def stationary_distribution_check(cfg: ExperimentConfig, ou_lags=(0.25, 0.5, 1.0, 2.0)):
    """KS distance of the rescaled stationary samples to the limiting Gaussian.

    Runs start at the MLE with a 10% burn-in; samples are thinned to at least
    three autocorrelation times before the KS test.  For vanilla sub-sampling
    the lagged autocorrelations are compared with the diffusion prediction
    ``exp(-A I0 s / 2)``.
    """
    model, truth = make_model_truth(cfg.model_kind, cfg.x0, cfg.truth_kind)
    out = cfg.out_path()
    data = generate_data(truth, cfg.n, _rep_rng(cfg.seed, 0, 0))
    x_hat = fit_mle(data, model)
    i0 = information(model, truth)
    ref = bvm_gaussian(i0)
    root = math.sqrt(cfg.n)
    summary = []
    acf_rows = []
    qq_rows = []
    for spec in cfg.schemes:
        scheme = make_scheme(spec, data, model)
        process = ZigZagProcess(scheme, data, model)
        rng = _rep_rng(cfg.seed, 2, 0)
        v0 = np.where(rng.random(model.dim) < 0.5, -1.0, 1.0)
        xs, acc = _run_samples(process, PhaseState(x_hat, v0), cfg.t_max, cfg.dt, rng)
        burn = len(xs) // 10
        xi = root * (xs[burn:, 0] - x_hat[0])
        iact = iact_estimate(xi, cfg.dt)
        n_eff = len(xi) * cfg.dt / iact
        if n_eff < 200:
            raise InsufficientSamples(f"{spec.label()}: {n_eff:.0f} effective samples < 200")
        stride = max(1, int(math.ceil(3.0 * iact / cfg.dt)))
        thinned = xi[::stride]
        ks = _ks_distance(thinned, lambda q: ref.cdf(q, 0))
        var_xi = float(xi.var())
        summary.append(
            (spec.label(), ks, var_xi, iact, n_eff, len(thinned), acc.proposals, acc.accepted)
        )
        probs = (np.arange(len(thinned)) + 0.5) / len(thinned)
        emp_q = np.sort(thinned)
        theo_q = stats.norm.ppf(probs) * ref.marginal_sd(0)
        step = max(1, len(thinned) // 512)
        qq_rows += [
            (spec.label(), tq, eq) for tq, eq in zip(theo_q[::step], emp_q[::step])
        ]
        if spec.kind == "ss":
            params = ou_params(model, truth, m=spec.m)
            decay = float((params.A @ params.I0)[0, 0]) / 2.0
            for s in ou_lags:
                lag = int(round(s / cfg.dt))
                if lag < 1 or lag >= len(xi) - 2:
                    continue
                emp = float(np.corrcoef(xi[:-lag], xi[lag:])[0, 1])
                acf_rows.append((spec.label(), s, emp, math.exp(-decay * s)))
    write_csv(
        out / "stationary_summary.csv",
        ["scheme", "ks", "var_xi", "iact", "n_eff", "n_thinned", "proposals", "accepted"],
        summary,
    )
    write_csv(out / "stationary_qq.csv", ["scheme", "theoretical", "empirical"], qq_rows)
    if acf_rows:
        write_csv(out / "stationary_acf.csv", ["scheme", "lag", "empirical", "theory"], acf_rows)
    write_manifest(out / "stationary.manifest", cfg.manifest_entries())
    return summary, acf_rows


# ---------------------------------------------------------------------------
# Confinement of the canonical sampler near the MLE


def confinement_check(cfg: ExperimentConfig):
    """Fraction of canonical runs leaving an epsilon-tube around the MLE."""
    model, truth = make_model_truth(cfg.model_kind, cfg.x0, cfg.truth_kind)
    out = cfg.out_path()
    grid = cfg.n_grid or (cfg.n,)
    rows = []
    for gi, n in enumerate(grid):
        data = generate_data(truth, int(n), _rep_rng(cfg.seed, 10 + gi, 0))
        x_hat = fit_mle(data, model)
        process = ZigZagProcess(CanonicalScheme(), data, model)
        args = [(process, x_hat, cfg.t_max, cfg.epsilon, cfg.seed, gi, k) for k in range(cfg.replicates)]
        exceed = _map_replicates(_confinement_rep, args)
        rows.append((int(n), cfg.epsilon, cfg.t_max, float(np.mean(exceed)), cfg.replicates))
    write_csv(out / "confinement.csv", ["n", "epsilon", "t", "fraction", "replicates"], rows)
    write_manifest(out / "confinement.manifest", cfg.manifest_entries())
    return rows


def _confinement_rep(args):
    process, x_hat, t_max, eps, seed, gi, k = args
    rng = _rep_rng(seed, 100 + gi, k)
    v0 = np.where(rng.random(x_hat.size) < 0.5, -1.0, 1.0)
    skel, _ = simulate(process, PhaseState(x_hat, v0), SimBudget(t_max=t_max), rng)
    dev = np.abs(skel.xs - x_hat[None, :]).max()
    dev = max(dev, float(np.abs(position_at(skel, skel.t_end) - x_hat).max()))
    return 1.0 if dev > eps else 0.0


# ---------------------------------------------------------------------------
# Complexity scaling (accepted/proposed switch rates, iact, charges)


@dataclass(frozen=True)
class ScalingRow:
    scheme: str
    n: int
    proposals_per_unit_time: float
    accepted_per_unit_time: float
    grad_evals_per_proposal: float
    iact_x1: float
    ks_to_bvm: float

    def as_tuple(self):
        return (
            self.scheme,
            self.n,
            self.proposals_per_unit_time,
            self.accepted_per_unit_time,
            self.grad_evals_per_proposal,
            self.iact_x1,
            self.ks_to_bvm,
        )


def _scaling_horizon(kind: str, n: int, target_events: float = 1.2e4) -> tuple[float, float]:
    """Per-n horizon and sampling step equalizing statistical power.

    Sub-sampling mixes in O(1) time, so its horizon is floored to resolve the
    autocorrelation time; canonical and control variates mix in O(n^-1/2) and
    get horizons and steps shrinking accordingly.
    """
    if kind == "ss":
        t = max(80.0, target_events / (0.4 * n))
        return t, 0.05
    t = max(120.0 / math.sqrt(n), target_events / (0.8 * math.sqrt(n)))
    return t, 0.15 / math.sqrt(n)


def scaling_study(cfg: ExperimentConfig):
    """Cost-scaling table over the n grid plus log-log slope fits."""
    model, truth = make_model_truth(cfg.model_kind, cfg.x0, cfg.truth_kind)
    out = cfg.out_path()
    grid = cfg.n_grid or (2**10, 2**12, 2**14, 2**16, 2**18)
    i0 = information(model, truth)
    ref = bvm_gaussian(i0)
    rows: list[ScalingRow] = []
    for spec in cfg.schemes:
        for gi, n in enumerate(grid):
            n = int(n)
            data = generate_data(truth, n, _rep_rng(cfg.seed, 20 + gi, 0))
            x_hat = fit_mle(data, model)
            scheme = make_scheme(spec, data, model)
            process = ZigZagProcess(scheme, data, model)
            t_total, dt = _scaling_horizon(spec.kind, n)
            rng = _rep_rng(cfg.seed, 30 + gi, hash(spec.kind) % 1000)
            v0 = np.where(rng.random(model.dim) < 0.5, -1.0, 1.0)
            xs, acc = _run_samples(process, PhaseState(x_hat, v0), t_total, dt, rng)
            burn = len(xs) // 10
            xi = math.sqrt(n) * (xs[burn:, 0] - x_hat[0])
            iact = iact_estimate(xi, dt)
            stride = max(1, int(math.ceil(3.0 * iact / dt)))
            ks = _ks_distance(xi[::stride], lambda q: ref.cdf(q, 0))
            charge = process.per_proposal_charge
            rows.append(
                ScalingRow(
                    scheme=spec.label(),
                    n=n,
                    proposals_per_unit_time=acc.proposals / t_total,
                    accepted_per_unit_time=acc.accepted / t_total,
                    grad_evals_per_proposal=float(charge) if charge is not None else acc.grad_term_evals / max(acc.proposals, 1),
                    iact_x1=iact,
                    ks_to_bvm=ks,
                )
            )
    write_csv(
        out / "scaling.csv",
        ["scheme", "n", "proposals_per_unit_time", "accepted_per_unit_time", "grad_evals_per_proposal", "iact_x1", "ks_to_bvm"],
        [r.as_tuple() for r in rows],
    )
    fits = fit_scaling_slopes(rows)
    write_csv(
        out / "scaling_fits.csv",
        ["scheme", "quantity", "slope", "stderr", "r2"],
        [(f["scheme"], f["quantity"], f["slope"], f["stderr"], f["r2"]) for f in fits],
    )
    write_manifest(out / "scaling.manifest", cfg.manifest_entries())
    return rows, fits


def fit_scaling_slopes(rows: Sequence[ScalingRow]):
    """Least-squares slopes of log quantity against log n, with R^2."""
    fits = []
    schemes = sorted({r.scheme for r in rows})
    quantities = {
        "proposals_per_unit_time": lambda r: r.proposals_per_unit_time,
        "accepted_per_unit_time": lambda r: r.accepted_per_unit_time,
        "grad_evals_per_proposal": lambda r: r.grad_evals_per_proposal,
        "iact_x1": lambda r: r.iact_x1,
    }
    for scheme in schemes:
        sub = [r for r in rows if r.scheme == scheme]
        logn = np.log([r.n for r in sub])
        for qname, getter in quantities.items():
            vals = np.array([getter(r) for r in sub], dtype=float)
            logv = np.log(np.maximum(vals, 1e-300))
            slope, intercept = np.polyfit(logn, logv, 1)
            pred = slope * logn + intercept
            ssr = float(np.sum((logv - pred) ** 2))
            sst = float(np.sum((logv - logv.mean()) ** 2))
            r2 = 1.0 - ssr / sst if sst > 0 else 1.0
            dof = max(len(sub) - 2, 1)
            se = math.sqrt(ssr / dof / float(np.sum((logn - logn.mean()) ** 2)))
            fits.append(
                {"scheme": scheme, "quantity": qname, "slope": float(slope), "stderr": se, "r2": r2}
            )
    return fits


# ---------------------------------------------------------------------------
# Limiting switching intensity of the rescaled control-variate sampler


def limiting_rate_check(cfg: ExperimentConfig, xi_edges=None, min_events: int = 500):
    """Empirical switch intensity per (xi-bin, v) against the limiting rate."""
    model, truth = make_model_truth(cfg.model_kind, cfg.x0, cfg.truth_kind)
    if model.dim != 1:
        raise NotImplementedError("rate binning is implemented for 1-d models")
    out = cfg.out_path()
    data = generate_data(truth, cfg.n, _rep_rng(cfg.seed, 0, 0))
    x_hat = fit_mle(data, model)
    spec = cfg.schemes[0]
    scheme = make_scheme(spec, data, model)
    process = ZigZagProcess(scheme, data, model)
    rng = _rep_rng(cfg.seed, 3, 0)
    skel, _ = simulate(process, PhaseState(x_hat, np.array([1.0])), SimBudget(t_max=cfg.t_max), rng)
    path = rescale_trajectory(skel, x_hat, cfg.n, mode="space_time")
    if xi_edges is None:
        xi_edges = np.arange(-2.4, 2.4001, 0.4)
    xi_edges = np.asarray(xi_edges, dtype=float)
    nbin = len(xi_edges) - 1
    occ = np.zeros((nbin, 2))  # time spent per (bin, v sign); unit speed in xi
    cnt = np.zeros((nbin, 2))  # switches out of v, binned by the switch location
    burn_t = 0.1 * path.t_end
    times, xis, vs = path.times, path.xis[:, 0], path.vs[:, 0]
    for k in range(len(times) - 1):
        if times[k + 1] <= burn_t:
            continue
        vslot = 0 if vs[k] > 0 else 1
        _bin_segment(occ[:, vslot], xi_edges, xis[k], xis[k + 1])
        b = np.searchsorted(xi_edges, xis[k + 1], side="right") - 1
        if 0 <= b < nbin:
            cnt[b, vslot] += 1.0
    xstar_offset = math.sqrt(cfg.n) * (np.atleast_1d(scheme.x_ref)[0] - x_hat[0]) if spec.kind == "cv" else 0.0

    if isinstance(model, GaussianLocation):
        # Constant curvature: the limiting rate is exactly (v xi)_+.
        def theory_rate(xi, vsign):
            r = vsign * xi
            return r if r > 0.0 else 0.0

    else:
        grid_pts = np.arange(xi_edges[0], xi_edges[-1] + 1e-9, 0.05)
        tables = {}
        for vsign in (1.0, -1.0):
            vals = [
                limiting_zzcv_rate(
                    np.array([g]), np.array([vsign]), np.array([xstar_offset]), model, truth, m=spec.m,
                    mc_budget=40_000,
                ).value[0]
                for g in grid_pts
            ]
            tables[vsign] = np.array(vals)

        def theory_rate(xi, vsign):
            return float(np.interp(xi, grid_pts, tables[vsign]))

    # Occupancy-weighted theory: counts estimate the integral of the limiting
    # rate along the path, so integrate it over each segment-bin overlap
    # (two-point Gauss per overlap; exact for the piecewise-linear rate away
    # from its kink).
    theo = np.zeros((nbin, 2))
    gauss = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))
    for k in range(len(times) - 1):
        if times[k + 1] <= burn_t:
            continue
        vslot = 0 if vs[k] > 0 else 1
        vsign = 1.0 if vs[k] > 0 else -1.0
        lo, hi = sorted((xis[k], xis[k + 1]))
        left = np.maximum(xi_edges[:-1], lo)
        right = np.minimum(xi_edges[1:], hi)
        spans = np.maximum(right - left, 0.0)
        for b in np.nonzero(spans)[0]:
            span = spans[b]
            acc = 0.0
            for w in gauss:
                acc += 0.5 * theory_rate(left[b] + w * span, vsign)
            theo[b, vslot] += span * acc
    rows = []
    ratios = []
    for b in range(nbin):
        for vslot, vsign in ((0, 1.0), (1, -1.0)):
            events = cnt[b, vslot]
            occ_t = occ[b, vslot]
            if occ_t <= 0:
                continue
            emp = events / occ_t
            theory = theo[b, vslot] / occ_t
            se = math.sqrt(max(events, 1.0)) / occ_t
            rows.append((xi_edges[b], xi_edges[b + 1], int(vsign), int(events), occ_t, emp, theory, se))
            if events >= min_events:
                ratios.append(abs(emp - theory) / se)
    write_csv(
        out / "limit_rate_bins.csv",
        ["xi_lo", "xi_hi", "v", "events", "occupancy", "empirical", "theory", "stderr"],
        rows,
    )
    write_manifest(out / "limit_rate.manifest", cfg.manifest_entries())
    return rows, ratios


def _bin_segment(occ: np.ndarray, edges: np.ndarray, a: float, b: float) -> None:
    """Add the time a unit-speed segment from xi=a to xi=b spends in each bin."""
    lo, hi = (a, b) if a <= b else (b, a)
    if hi == lo:
        return
    left = np.maximum(edges[:-1], lo)
    right = np.minimum(edges[1:], hi)
    occ += np.maximum(right - left, 0.0)


# ---------------------------------------------------------------------------
# Drift tables and the mixed-scheme comparison


def drift_table(cfg: ExperimentConfig, x_grid=None, x_star=None):
    """Tabulate the asymptotic drifts on a grid for the three base schemes."""
    model, truth = make_model_truth(cfg.model_kind, cfg.x0, cfg.truth_kind)
    out = cfg.out_path()
    if x_grid is None:
        x_grid = np.arange(-5.0, 5.0001, 0.01)
    if x_star is None:
        x_star = np.array(cfg.x0, dtype=float)
    d_can = DriftFunction("canonical", model, truth)
    d_ss = DriftFunction("ss", model, truth, m=1)
    d_cv = DriftFunction("cv", model, truth, m=1, x_star=x_star)
    rows = []
    for x in x_grid:
        b_can, _ = d_can.value_and_denominator(np.array([x]))
        b_ss, _ = d_ss.value_and_denominator(np.array([x]))
        b_cv, den_cv = d_cv.value_and_denominator(np.array([x]))
        bc = 0.0 if abs(x - cfg.x0[0]) < 1e-12 else float(np.sign(b_can[0]))
        rows.append((x, bc, b_ss[0], b_cv[0] if den_cv[0] > 1e-8 else 0.0))
    write_csv(out / "drift_table.csv", ["x", "b_can", "b_ss", "b_cv"], rows)
    write_manifest(out / "drift_table.manifest", cfg.manifest_entries())
    return rows


def find_mixed_radius(model, truth, x_star, lo: float = 0.3, hi: float = 3.0) -> float:
    """Radius where the ss and cv drift curves cross (bisection on their gap)."""
    d_ss = DriftFunction("ss", model, truth, m=1)
    d_cv = DriftFunction("cv", model, truth, m=1, x_star=x_star)
    gap = lambda x: d_ss(np.array([x]))[0] - d_cv(np.array([x]))[0]
    return float(optimize.brentq(gap, lo, hi, xtol=1e-6))


def mixed_comparison(cfg: ExperimentConfig):
    """Hitting-time comparison of ss, cv and the mixed scheme from the tails."""
    model, truth = make_model_truth(cfg.model_kind, cfg.x0, cfg.truth_kind)
    out = cfg.out_path()
    data = generate_data(truth, cfg.n, _rep_rng(cfg.seed, 0, 0))
    x0 = np.array(cfg.x0, dtype=float)
    radius = find_mixed_radius(model, truth, x0)
    specs = [
        SchemeSpec("ss"),
        SchemeSpec("cv", reference="mle"),
        SchemeSpec("mixed", reference="mle", mixed_radius=radius),
    ]
    start = np.atleast_1d(x0 + cfg.start_offset)
    grid = np.arange(0.0, cfg.t_max + 1e-12, cfg.dt)
    hit_rows = []
    traj_rows = {}
    for si, spec in enumerate(specs):
        scheme = make_scheme(spec, data, model)
        process = ZigZagProcess(scheme, data, model)
        args = [(process, start, x0[0], cfg.t_max, grid, cfg.seed, si, k) for k in range(cfg.replicates)]
        for k, (hit, traj) in enumerate(_map_replicates(_mixed_rep, args)):
            hit_rows.append((spec.label(), k, hit))
            if k == 0:
                traj_rows[spec.label()] = traj
    rows = [
        (t, traj_rows["ss"][j], traj_rows["cv"][j], traj_rows["mixed"][j]) for j, t in enumerate(grid)
    ]
    write_csv(out / "mixed_comparison.csv", ["t", "x_ss", "x_cv", "x_mixed"], rows)
    write_csv(out / "mixed_hitting.csv", ["scheme", "replicate", "hit_time"], hit_rows)
    write_manifest(out / "mixed.manifest", cfg.manifest_entries({"radius": radius}))
    return hit_rows, radius


def _mixed_rep(args):
    process, start, x0, t_max, grid, seed, si, k = args
    rng = _rep_rng(seed, 300 + si, k)
    skel, _ = simulate(process, PhaseState(start, np.array([-1.0])), SimBudget(t_max=t_max), rng)
    hit = _hitting_time(skel, x0, 0.1)
    traj = np.array([position_at(skel, min(t, skel.t_end))[0] for t in grid])
    return hit, traj


def _hitting_time(skel: Skeleton, center: float, width: float) -> float:
    """First time the path enters [center - width, center + width]; inf if never."""
    ts, xs, vs = skel.times, skel.xs[:, 0], skel.vs[:, 0]
    lo, hi = center - width, center + width
    ends = np.append(ts[1:], skel.t_end)
    for k in range(len(ts)):
        xk = xs[k]
        if lo <= xk <= hi:
            return float(ts[k])
        x_next = xk + vs[k] * (ends[k] - ts[k])
        target = hi if xk > hi else lo
        if (xk - target) * (x_next - target) <= 0.0 and ends[k] > ts[k]:
            return float(ts[k] + (target - xk) / vs[k])
    return math.inf
