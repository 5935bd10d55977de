"""Large-sample limit objects: asymptotic drifts, the fluid-limit ODE,
the stationary Ornstein-Uhlenbeck limit, limiting rescaled switching rates,
the rescaling of trajectories and the limiting Gaussian reference.

The asymptotic drift of the position process is, coordinate-wise,

    b_i(x) = -E_P[S_i(x; Y)] / D_i(x),

where the damping denominator ``D_i`` is the large-n limit of the summed
switching rates per datum and depends on the scheme:

    canonical:  |E_P S_i(x; Y)|
    ss:         E | m^-1 sum_{j<=m} S_i(x; Y_j) |
    cv:         E | m^-1 sum_{j<=m} (S_i(x;Y_j) - S_i(X*;Y_j)) + E S_i(X*;Y) |

Closed forms are used where the model admits them (Gaussian/Laplace, and the
Gaussian CV collapse); the Cauchy denominators integrate by adaptive
quadrature and the logistic ones by seeded Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, stats

from .models import (
    CauchyLocation,
    Dataset,
    GaussianLocation,
    LaplaceLocation,
    LocationTruth,
    LogisticRegression,
    Model,
    generate_data,
    information,
    potential_grad,
)
from .pdmp import Skeleton
from .rates import EnumerationTooLarge, _enumerate_subsets, _terms, srswor

__all__ = [
    "BvMGaussian",
    "DriftFunction",
    "FluidPath",
    "OUParams",
    "RescaledPath",
    "ZeroDenominator",
    "asymptotic_drift",
    "bvm_gaussian",
    "finite_n_drift",
    "limiting_zzcv_rate",
    "ou_params",
    "rescale_trajectory",
    "simulate_ou",
    "solve_fluid_ode",
    "unrescale_trajectory",
]

H_THRESHOLD = 1e-8  # below this the rate-sum denominator counts as zero
_QUAD_TOL = 1e-10


class ZeroDenominator(ArithmeticError):
    """Drift evaluated on the zero-rate locus."""


def _folded_normal_mean(c: float, sigma: float) -> float:
    """E|N(c, sigma^2)|."""
    if sigma == 0.0:
        return abs(c)
    z = c / sigma
    return c * (2.0 * stats.norm.cdf(z) - 1.0) + 2.0 * sigma * stats.norm.pdf(z)


def _binomial_abs_mean(m: int, p: float) -> float:
    """E|2 K / m - 1| for K ~ Bin(m, p)."""
    k = np.arange(m + 1)
    return float(np.sum(stats.binom.pmf(k, m, p) * np.abs(2.0 * k / m - 1.0)))


def _quad_expect(fn, dist, split_points=()) -> float:
    """Integrate fn(y) * pdf(y) over the real line, splitting at kinks."""
    pts = sorted(p for p in split_points if math.isfinite(p))
    edges = [-math.inf] + pts + [math.inf]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(
            lambda y: fn(y) * dist.pdf(y), lo, hi, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=300
        )
        total += val
    return total


@dataclass
class DriftFunction:
    """Asymptotic drift for one scheme/model/truth triple.

    ``x_star`` is the limiting reference point (cv/mixed only).  Evaluation
    uses closed forms where available, else quadrature (1-d) or seeded Monte
    Carlo (logistic); Monte Carlo results are cached per point.
    """

    scheme: str  # canonical | ss | cv | mixed
    model: Model
    truth: object
    m: int = 1
    x_star: Optional[np.ndarray] = None
    mixed_radius: Optional[float] = None
    mc_budget: int = 400_000
    seed: int = 767
    _mc_w: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.scheme in ("cv", "mixed") and self.x_star is None:
            raise ValueError("cv/mixed drifts need the limiting reference point")
        if self.scheme == "mixed" and self.mixed_radius is None:
            raise ValueError("mixed drift needs the switch radius")
        if self.x_star is not None:
            self.x_star = np.atleast_1d(np.asarray(self.x_star, dtype=float))

    # -- pieces ---------------------------------------------------------------
    def numerator(self, x) -> np.ndarray:
        """-E_P[S(x; Y)] as a (d,) vector."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        model, truth = self.model, self.truth
        if isinstance(model, GaussianLocation):
            return -(x - truth.frozen().mean())
        if isinstance(model, LaplaceLocation):
            return np.atleast_1d(-(2.0 * truth.frozen().cdf(x[0]) - 1.0))
        if isinstance(model, CauchyLocation):
            if isinstance(truth, LocationTruth) and truth.matches(model):
                u = x[0] - truth.loc
                return np.atleast_1d(-2.0 * u / (u * u + 4.0))
            return np.atleast_1d(
                -_quad_expect(lambda y: model.score(x[0], y), truth.frozen(), (x[0],))
            )
        if isinstance(model, LogisticRegression):
            w = self._covariates()
            px = _p_of(w, x)
            p0 = _p_of(w, truth.x0)
            return -np.mean(w * (px - p0)[:, None], axis=0)
        raise NotImplementedError(type(model).__name__)

    def denominator(self, x) -> np.ndarray:
        """Summed limiting switching rate per datum, per coordinate."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        scheme = self.scheme
        if scheme == "mixed":
            inner = np.linalg.norm(x) <= self.mixed_radius
            return self._denominator_for("cv" if inner else "ss", x)
        return self._denominator_for(scheme, x)

    def _denominator_for(self, scheme, x) -> np.ndarray:
        model, truth, m = self.model, self.truth, self.m
        if scheme == "canonical":
            return np.abs(self.numerator(x))
        if scheme == "ss":
            if isinstance(model, GaussianLocation):
                dist = truth.frozen()
                c = x[0] - float(dist.mean())
                if isinstance(truth, LocationTruth) and truth.dist_name == "gaussian":
                    return np.atleast_1d(_folded_normal_mean(c, truth.scale / math.sqrt(m)))
                return self._mc_location_denom(scheme, x)
            if isinstance(model, LaplaceLocation):
                p = float(truth.frozen().cdf(x[0]))
                return np.atleast_1d(_binomial_abs_mean(m, p))
            if isinstance(model, CauchyLocation):
                if m == 1:
                    return np.atleast_1d(
                        _quad_expect(lambda y: abs(model.score(x[0], y)), truth.frozen(), (x[0],))
                    )
                return self._mc_location_denom(scheme, x)
            if isinstance(model, LogisticRegression):
                if m == 1:
                    w = self._covariates()
                    px = _p_of(w, x)
                    p0 = _p_of(w, truth.x0)
                    return np.mean(np.abs(w) * (p0 + px - 2.0 * p0 * px)[:, None], axis=0)
                return self._mc_logistic_denom(scheme, x)
        if scheme == "cv":
            xs = self.x_star
            if isinstance(model, GaussianLocation):
                # Linear scores collapse the cv estimate to the exact gradient.
                return np.abs(self.numerator(x))
            if isinstance(model, LaplaceLocation) and m == 1:
                return np.atleast_1d(self._laplace_cv_denom(float(x[0])))
            if isinstance(model, CauchyLocation) and m == 1:
                dist = truth.frozen()
                cstar = _quad_expect(lambda y: self.model.score(xs[0], y), dist, (xs[0],))
                kinks = _cauchy_diff_kinks(float(x[0]), float(xs[0]))
                return np.atleast_1d(
                    _quad_expect(
                        lambda y: abs(model.score(x[0], y) - model.score(xs[0], y) + cstar),
                        dist,
                        (x[0], xs[0], *kinks),
                    )
                )
            if isinstance(model, LogisticRegression) and m == 1:
                w = self._covariates()
                px = _p_of(w, x)
                ps = _p_of(w, xs)
                es = np.mean(w * (ps - _p_of(w, truth.x0))[:, None], axis=0)
                return np.mean(np.abs(w * (px - ps)[:, None] + es[None, :]), axis=0)
            if isinstance(model, LogisticRegression):
                return self._mc_logistic_denom(scheme, x)
            return self._mc_location_denom(scheme, x)
        raise ValueError(f"unknown scheme {scheme!r}")

    def _laplace_cv_denom(self, x: float) -> float:
        """E|sgn(x-Y) - sgn(x*-Y) + E sgn(x*-Y)| for continuous Y (m = 1)."""
        dist = self.truth.frozen()
        p = float(dist.cdf(x))
        ps = float(dist.cdf(self.x_star[0]))
        es = 2.0 * ps - 1.0
        if x > self.x_star[0]:
            frac = p - ps  # P(x* < Y < x), where the score difference is 2
            return abs(es) * (1.0 - frac) + abs(es + 2.0) * frac
        if x < self.x_star[0]:
            frac = ps - p
            return abs(es) * (1.0 - frac) + abs(es - 2.0) * frac
        return abs(es)

    def _covariates(self) -> np.ndarray:
        if self._mc_w is None:
            rng = np.random.default_rng(self.seed)
            self._mc_w = self.truth.covariates.sample(self.mc_budget, rng)
        return self._mc_w

    def _mc_location_denom(self, scheme, x) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        draws = self.truth.sample(self.mc_budget * self.m, rng).reshape(self.mc_budget, self.m)
        s = self.model.score(x[0], draws)
        if scheme == "cv":
            s = s - self.model.score(self.x_star[0], draws) + self._mean_score_at_star()
        return np.atleast_1d(float(np.mean(np.abs(s.mean(axis=1)))))

    def _mean_score_at_star(self) -> float:
        dist = self.truth.frozen()
        return _quad_expect(lambda y: self.model.score(self.x_star[0], y), dist, (self.x_star[0],))

    def _mc_logistic_denom(self, scheme, x) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        w = self._covariates()
        p_true = _p_of(w, self.truth.x0)
        ydraw = (rng.random((self.mc_budget, self.m)) < p_true[:, None]).astype(float)
        widx = rng.integers(self.mc_budget, size=(self.mc_budget, self.m))
        wij = w[widx]
        px = _p_of(wij.reshape(-1, w.shape[1]), x).reshape(self.mc_budget, self.m)
        s = wij * (px - ydraw)[:, :, None]
        if scheme == "cv":
            ps = _p_of(wij.reshape(-1, w.shape[1]), self.x_star).reshape(self.mc_budget, self.m)
            sstar = wij * (ps - ydraw)[:, :, None]
            es = np.mean(w * (_p_of(w, self.x_star) - p_true)[:, None], axis=0)
            s = s - sstar + es[None, None, :]
        return np.mean(np.abs(s.mean(axis=1)), axis=0)

    # -- evaluation -----------------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        num = self.numerator(x)
        den = self.denominator(x)
        if np.any(den < H_THRESHOLD):
            raise ZeroDenominator(f"drift undefined at {x!r} (denominator {den!r})")
        return num / den

    def value_and_denominator(self, x):
        num = self.numerator(x)
        den = self.denominator(x)
        safe = np.maximum(den, H_THRESHOLD)
        return num / safe, den


def asymptotic_drift(drift: DriftFunction, x) -> np.ndarray:
    """Evaluate the limiting drift ``b`` at ``x`` (raises on the zero locus)."""
    return drift(x)


def _p_of(w: np.ndarray, x) -> np.ndarray:
    z = w @ np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _cauchy_diff_kinks(x: float, x_star: float):
    """Zeros of s(x; y) - s(x*; y): they satisfy (x - y)(x* - y) = 1."""
    disc = (x - x_star) ** 2 + 4.0
    mid = 0.5 * (x + x_star)
    half = 0.5 * math.sqrt(disc)
    return (mid - half, mid + half)


# ---------------------------------------------------------------------------
# Finite-n drift


def finite_n_drift(scheme, dataset: Dataset, model: Model, x, mc_subsets: int = 0, rng_seed: int = 0) -> np.ndarray:
    """Drift of the finite-n process: rate difference over rate sum, 0 on H^n.

    The difference of rates in opposite directions equals the exact gradient,
    so only the denominator needs subset averaging: full enumeration when
    feasible, otherwise ``mc_subsets`` sampled subsets.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = dataset.n
    grad = potential_grad(dataset, model, x)
    m = n if not hasattr(scheme, "m") else scheme.m
    terms = _terms(scheme, dataset, model, x, np.arange(n))
    out = np.zeros(model.dim)
    for i in range(model.dim):
        if m == n:
            den = abs(terms[:, i].sum())
        else:
            try:
                subsets = _enumerate_subsets(n, m)
                den = n * float(np.mean(np.abs(terms[subsets, i].sum(axis=1) / m)))
            except EnumerationTooLarge:
                if mc_subsets <= 0:
                    raise
                rng = np.random.default_rng(rng_seed)
                vals = [abs(terms[srswor(rng, n, m), i].mean()) for _ in range(mc_subsets)]
                den = n * float(np.mean(vals))
        out[i] = 0.0 if den <= H_THRESHOLD * max(1.0, abs(grad[i])) else -grad[i] / den
    return out


# ---------------------------------------------------------------------------
# Fluid-limit ODE


@dataclass(frozen=True)
class FluidPath:
    ts: np.ndarray
    xs: np.ndarray
    status: str  # "completed" | "hit_h"

    def position_at(self, t: float) -> np.ndarray:
        k = np.clip(np.searchsorted(self.ts, t, side="right") - 1, 0, len(self.ts) - 1)
        if k == len(self.ts) - 1:
            return self.xs[k]
        w = (t - self.ts[k]) / (self.ts[k + 1] - self.ts[k])
        return (1 - w) * self.xs[k] + w * self.xs[k + 1]

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])


def solve_fluid_ode(drift: DriftFunction, x_start, t_max: float, step: Optional[float] = None) -> FluidPath:
    """Classical fixed-step RK4 for ``dx/dt = b(x)``.

    Halts with status ``hit_h`` when the rate-sum denominator falls below the
    zero-locus threshold (the drift is undefined there, e.g. at the KL
    minimizer for the canonical scheme).
    """
    if step is None:
        step = 1e-3 * t_max
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.atleast_1d(np.asarray(x_start, dtype=float))
    _, den0 = drift.value_and_denominator(x)
    if np.any(den0 < H_THRESHOLD):
        raise ZeroDenominator("fluid ODE started on the zero-rate locus")
    ts = [0.0]
    xs = [x.copy()]
    t = 0.0
    status = "completed"
    num_prev = drift.numerator(x)
    nsteps = int(round(t_max / step))
    for _ in range(nsteps):
        b1, den = drift.value_and_denominator(x)
        if np.any(den < H_THRESHOLD):
            status = "hit_h"
            break
        b2, _ = drift.value_and_denominator(x + 0.5 * step * b1)
        b3, _ = drift.value_and_denominator(x + 0.5 * step * b2)
        b4, _ = drift.value_and_denominator(x + step * b3)
        x_next = x + (step / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        num_next = drift.numerator(x_next)
        flipped = (num_prev * num_next < 0) & (np.abs(num_prev) > 0)
        if np.any(flipped):
            # The trajectory crossed the zero-drift locus inside this step;
            # land on the crossing (linear interpolation of the numerator).
            i = int(np.argmax(flipped))
            w = abs(num_prev[i]) / (abs(num_prev[i]) + abs(num_next[i]))
            x = x + w * (x_next - x)
            t += w * step
            ts.append(t)
            xs.append(x.copy())
            status = "hit_h"
            break
        if np.max(np.abs(x_next - x)) < 0.25 * step * np.max(np.abs(b1)):
            # Stages cancel while the drift is not small: the step straddles a
            # drift discontinuity, i.e. the solution sits on the zero locus.
            ts.append(t + step)
            xs.append(x_next.copy())
            status = "hit_h"
            break
        x = x_next
        num_prev = num_next
        t += step
        ts.append(t)
        xs.append(x.copy())
    return FluidPath(np.array(ts), np.array(xs), status)


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck limit (vanilla sub-sampling, fixed m)


@dataclass(frozen=True)
class OUParams:
    """Parameters of the stationary limit ``d xi = -(A I0 / 2) xi dt + A^{1/2} dW``."""

    A: np.ndarray
    I0: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        I0 = np.atleast_2d(np.asarray(self.I0, dtype=float))
        if not np.allclose(A, np.diag(np.diag(A))) or np.any(np.diag(A) <= 0):
            raise ValueError("damping matrix must be diagonal with positive entries")
        if not np.allclose(I0, I0.T) or np.any(np.linalg.eigvalsh(I0) <= 0):
            raise ValueError("information matrix must be symmetric positive definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "I0", I0)

    @property
    def B(self) -> np.ndarray:
        return self.A @ self.I0 / 2.0

    @property
    def stationary_cov(self) -> np.ndarray:
        return np.linalg.inv(self.I0)

    @property
    def d(self) -> int:
        return self.A.shape[0]


def ou_params(model: Model, truth, m: int = 1, mc_budget: int = 1_000_000, rng_seed: int = 99) -> OUParams:
    """Damping and information matrices of the sub-sampling diffusion limit.

    ``A_ii = 2 / E|m^-1 sum_{j<=m} S_i(x0; Y_j)|`` with closed forms for the
    well-specified location families and Monte Carlo otherwise.
    """
    I0 = information(model, truth)
    d = model.dim
    denom = np.empty(d)
    if isinstance(model, GaussianLocation) and isinstance(truth, LocationTruth) and truth.matches(model):
        denom[:] = math.sqrt(2.0 / (math.pi * m))
    elif isinstance(model, LaplaceLocation) and isinstance(truth, LocationTruth) and truth.matches(model):
        denom[:] = _binomial_abs_mean(m, 0.5)
    elif isinstance(model, CauchyLocation) and isinstance(truth, LocationTruth) and truth.matches(model) and m == 1:
        denom[:] = 2.0 / math.pi
    else:
        rng = np.random.default_rng(rng_seed)
        x0 = truth.x0
        data = generate_data(truth, mc_budget * m, rng)
        s = model.grad_terms(data, x0 if model.dim > 1 else float(np.atleast_1d(x0)[0]))
        s = s.reshape(mc_budget, m, d)
        denom = np.mean(np.abs(s.mean(axis=1)), axis=0)
    return OUParams(A=np.diag(2.0 / denom), I0=I0)


def simulate_ou(params: OUParams, t_max: float, dt: float, rng_seed, xi0="stationary", noise_scale: float = 1.0):
    """Sample the limiting diffusion on a grid of spacing ``dt``.

    One dimension uses the exact Gaussian transition; higher dimensions use
    Euler-Maruyama with internal substeps ``<= 1e-3 / ||B||``.  ``xi0`` is
    ``"stationary"``, ``"zero"`` or an explicit vector.  ``noise_scale``
    rescales the diffusion coefficient (0 gives the deterministic decay).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    d = params.d
    nsteps = int(math.floor(t_max / dt + 1e-12))
    ts = np.arange(nsteps + 1) * dt
    if isinstance(xi0, str):
        if xi0 == "stationary":
            chol = np.linalg.cholesky(params.stationary_cov)
            x = chol @ rng.standard_normal(d)
        elif xi0 == "zero":
            x = np.zeros(d)
        else:
            raise ValueError(f"unknown start {xi0!r}")
    else:
        x = np.atleast_1d(np.asarray(xi0, dtype=float)).copy()
    out = np.empty((nsteps + 1, d))
    out[0] = x
    if d == 1:
        bscal = float(params.B[0, 0])
        phi = math.exp(-bscal * dt)
        var = float(params.A[0, 0]) / (2.0 * bscal) * (1.0 - phi * phi)
        sd = noise_scale * math.sqrt(var)
        eps = rng.standard_normal(nsteps)
        xi = float(x[0])
        for k in range(nsteps):
            xi = phi * xi + sd * eps[k]
            out[k + 1, 0] = xi
        return ts, out
    bnorm = np.linalg.norm(params.B, 2)
    nsub = max(1, int(math.ceil(dt * bnorm / 1e-3)))
    h = dt / nsub
    sqrt_a = np.sqrt(np.diag(params.A))
    for k in range(nsteps):
        for _ in range(nsub):
            x = x - (params.B @ x) * h + noise_scale * sqrt_a * rng.standard_normal(d) * math.sqrt(h)
        out[k + 1] = x
    return ts, out


# ---------------------------------------------------------------------------
# Limiting rescaled switching rates (control variates, fixed m)


@dataclass(frozen=True)
class LimitingRate:
    value: np.ndarray
    stderr: np.ndarray


def limiting_zzcv_rate(
    xi,
    v,
    xi_star,
    model: Model,
    truth,
    m: int = 1,
    mc_budget: int = 100_000,
    rng_seed: int = 7,
    m_infinite: bool = False,
) -> LimitingRate:
    """Limiting rescaled switching rate of the control-variate scheme.

    For finite m this is a Monte Carlo average over m-tuples of data draws of
    the positive part of the centred quadratic form; ``m_infinite`` returns
    the large-batch form ``(v_i (xi . I0 e_i))_+`` exactly.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    xi_star = np.atleast_1d(np.asarray(xi_star, dtype=float))
    d = model.dim
    I0 = information(model, truth)
    if m_infinite:
        vals = np.maximum(v * (I0 @ xi), 0.0)
        return LimitingRate(vals, np.zeros(d))
    rng = np.random.default_rng(rng_seed)
    x0 = truth.x0
    data = generate_data(truth, mc_budget * m, rng)
    hess = model.hess_terms(data, x0 if d > 1 else float(np.atleast_1d(x0)[0]))
    hess = hess.reshape(mc_budget, m, d, d)
    vals = np.empty(d)
    errs = np.empty(d)
    for i in range(d):
        cols = hess[:, :, :, i]  # gradient of S_i at x0, per draw
        inner = cols @ xi - (cols - I0[:, i][None, None, :]) @ xi_star
        group = np.maximum(v[i] * inner.sum(axis=1) / m, 0.0)
        vals[i] = float(group.mean())
        errs[i] = float(group.std(ddof=1) / math.sqrt(mc_budget))
    return LimitingRate(vals, errs)


# ---------------------------------------------------------------------------
# Trajectory rescaling and the limiting Gaussian


@dataclass(frozen=True)
class RescaledPath:
    """Skeleton mapped to ``xi = sqrt(n) (x - x_hat)`` (and optionally
    ``t -> sqrt(n) t``), with linear interpolation between stored events."""

    times: np.ndarray
    xis: np.ndarray
    vs: np.ndarray
    t_end: float
    n: int
    x_hat: np.ndarray
    mode: str  # "space" | "space_time"

    @property
    def time_scale(self) -> float:
        return math.sqrt(self.n) if self.mode == "space_time" else 1.0

    def position_at(self, t: float) -> np.ndarray:
        ks = np.searchsorted(self.times, t, side="right") - 1
        k = int(np.clip(ks, 0, len(self.times) - 1))
        slope = self.vs[k] * (math.sqrt(self.n) / self.time_scale)
        return self.xis[k] + slope * (t - self.times[k])

    def discretize(self, dt: float) -> np.ndarray:
        nsamp = int(math.floor(self.t_end / dt + 1e-12)) + 1
        ts = np.arange(nsamp) * dt
        ks = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, len(self.times) - 1)
        slopes = self.vs[ks] * (math.sqrt(self.n) / self.time_scale)
        return self.xis[ks] + slopes * (ts - self.times[ks])[:, None]


def rescale_trajectory(skeleton: Skeleton, x_hat, n: int, mode: str = "space") -> RescaledPath:
    """Map a skeleton to the contraction scale; ``mode`` picks the time scaling.

    ``"space"`` keeps natural time (sub-sampling diffusive limit);
    ``"space_time"`` speeds time by sqrt(n) (canonical / control variates).
    """
    if mode not in ("space", "space_time"):
        raise ValueError("mode must be 'space' or 'space_time'")
    x_hat = np.atleast_1d(np.asarray(x_hat, dtype=float))
    root = math.sqrt(n)
    scale_t = root if mode == "space_time" else 1.0
    return RescaledPath(
        times=skeleton.times * scale_t,
        xis=root * (skeleton.xs - x_hat[None, :]),
        vs=skeleton.vs,
        t_end=skeleton.t_end * scale_t,
        n=n,
        x_hat=x_hat,
        mode=mode,
    )


def unrescale_trajectory(path: RescaledPath) -> Skeleton:
    root = math.sqrt(path.n)
    return Skeleton(
        times=path.times / path.time_scale,
        xs=path.xis / root + path.x_hat[None, :],
        vs=path.vs,
        t_end=path.t_end / path.time_scale,
    )


class BvMGaussian:
    """The limiting Gaussian N(0, I0^-1) with sampling, cdf and log-density."""

    def __init__(self, I0):
        I0 = np.atleast_2d(np.asarray(I0, dtype=float))
        if not np.allclose(I0, I0.T) or np.any(np.linalg.eigvalsh(I0) <= 0):
            raise ValueError("information matrix must be symmetric positive definite")
        self.I0 = I0
        self.cov = np.linalg.inv(I0)
        self._chol = np.linalg.cholesky(self.cov)
        self.d = I0.shape[0]

    def marginal_sd(self, i: int = 0) -> float:
        return math.sqrt(self.cov[i, i])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_normal((size, self.d)) @ self._chol.T

    def cdf(self, x, i: int = 0):
        return stats.norm.cdf(np.asarray(x, dtype=float) / self.marginal_sd(i))

    def logpdf(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        quad = float(x @ self.I0 @ x)
        _, logdet = np.linalg.slogdet(self.cov)
        return -0.5 * (quad + logdet + self.d * math.log(2.0 * math.pi))


def bvm_gaussian(I0) -> BvMGaussian:
    """Reference distribution of the rescaled posterior."""
    return BvMGaussian(I0)
