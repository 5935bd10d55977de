"""Switching-rate processes for the sub-sampling schemes.

A scheme decides which unbiased per-datum decomposition ``E^j`` of the
potential gradient feeds the thinning acceptance step:

* canonical      -- the full gradient, deterministic, O(n) per evaluation;
* ss (vanilla)   -- ``E^j = s^j``, mini-batch of size m without replacement;
* cv             -- ``E^j = s^j(x) - s^j(x_ref) + mean_k s^k(x_ref)`` with the
                    reference gradient cached once at construction;
* mixed          -- ss outside a radius M, cv inside (both satisfy the local
                    rate identity, so the composite stays exact).

``ZigZagProcess`` packages a scheme with a dataset and model into the rate
process consumed by :func:`zzscale.pdmp.simulate`: dominating bound segments
plus randomized rate realizations, with per-datum evaluation charges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .models import Dataset, Model, fit_mle
from .pdmp import BoundSegment, RateRealization

__all__ = [
    "CanonicalScheme",
    "RateRealization",
    "ControlVariates",
    "EnumerationTooLarge",
    "FixedReference",
    "MLEReference",
    "MixedSubsampling",
    "NoBoundAvailable",
    "PerturbedMLEReference",
    "VanillaSubsampling",
    "ZigZagProcess",
    "choose_reference",
    "draw_estimate",
    "effective_rate_exact",
    "make_bounds",
    "per_datum_term",
    "rate_identity_check",
    "srswor",
]


class EnumerationTooLarge(ValueError):
    """The subset space is too large for the exact enumeration oracle."""


class NoBoundAvailable(ValueError):
    """The scheme/model pair exposes no usable thinning bound constants."""


def _scalar_score_diff(model):
    """Plain-float s(x1;y) - s(x2;y), exact where the model collapses it."""
    from .models import GaussianLocation

    if isinstance(model, GaussianLocation):
        return lambda x1, x2, y: x1 - x2
    score = getattr(model, "score_scalar", model.score)
    return lambda x1, x2, y: score(x1, y) - score(x2, y)


def srswor(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """Simple random sample without replacement via partial Fisher-Yates, O(m)."""
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    if m == 1:
        return np.array([rng.integers(n)])
    state: dict[int, int] = {}
    out = np.empty(m, dtype=np.int64)
    for k in range(m):
        j = int(rng.integers(k, n))
        out[k] = state.get(j, j)
        state[j] = state.get(k, k)
    return out


# ---------------------------------------------------------------------------
# Scheme descriptions


@dataclass(frozen=True)
class CanonicalScheme:
    kind = "canonical"

    def batch_size(self, n: int) -> int:
        return n


@dataclass(frozen=True)
class VanillaSubsampling:
    m: int
    kind = "ss"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("batch size must be >= 1")

    def batch_size(self, n: int) -> int:
        return self.m


@dataclass(frozen=True)
class ControlVariates:
    m: int
    x_ref: np.ndarray
    mean_grad: np.ndarray  # n^-1 sum_k s^k(x_ref), cached at construction
    kind = "cv"

    def __post_init__(self):
        object.__setattr__(self, "x_ref", np.atleast_1d(np.asarray(self.x_ref, dtype=float)))
        object.__setattr__(self, "mean_grad", np.atleast_1d(np.asarray(self.mean_grad, dtype=float)))
        if self.m < 1:
            raise ValueError("batch size must be >= 1")

    def batch_size(self, n: int) -> int:
        return self.m


@dataclass(frozen=True)
class MixedSubsampling:
    m: int
    x_ref: np.ndarray
    mean_grad: np.ndarray
    radius: float
    kind = "mixed"

    def __post_init__(self):
        object.__setattr__(self, "x_ref", np.atleast_1d(np.asarray(self.x_ref, dtype=float)))
        object.__setattr__(self, "mean_grad", np.atleast_1d(np.asarray(self.mean_grad, dtype=float)))
        if self.m < 1:
            raise ValueError("batch size must be >= 1")
        if not self.radius > 0:
            raise ValueError("mixed switch radius must be positive")

    def batch_size(self, n: int) -> int:
        return self.m


def control_variates(dataset: Dataset, model: Model, m: int, x_ref) -> ControlVariates:
    """Build a CV scheme, computing the cached mean gradient (O(n), once)."""
    x_ref = np.atleast_1d(np.asarray(x_ref, dtype=float))
    mean = model.grad_terms(dataset, x_ref if model.dim > 1 else float(x_ref[0])).mean(axis=0)
    return ControlVariates(m=m, x_ref=x_ref, mean_grad=mean)


def mixed_subsampling(dataset: Dataset, model: Model, m: int, x_ref, radius: float) -> MixedSubsampling:
    cv = control_variates(dataset, model, m, x_ref)
    return MixedSubsampling(m=m, x_ref=cv.x_ref, mean_grad=cv.mean_grad, radius=radius)


# -- reference-point strategies ---------------------------------------------


@dataclass(frozen=True)
class MLEReference:
    pass


@dataclass(frozen=True)
class PerturbedMLEReference:
    """Reference ``x_hat + delta / sqrt(n)``; the rescaled offset is exactly delta."""

    delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta", np.atleast_1d(np.asarray(self.delta, dtype=float)))


@dataclass(frozen=True)
class FixedReference:
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))


def choose_reference(dataset: Dataset, model: Model, strategy):
    """Resolve a reference point and its cached mean gradient."""
    if isinstance(strategy, MLEReference):
        x_ref = fit_mle(dataset, model)
    elif isinstance(strategy, PerturbedMLEReference):
        x_ref = fit_mle(dataset, model) + strategy.delta / math.sqrt(dataset.n)
    elif isinstance(strategy, FixedReference):
        x_ref = strategy.x
    else:
        raise ValueError(f"unknown reference strategy {strategy!r}")
    mean = model.grad_terms(dataset, x_ref if model.dim > 1 else float(x_ref[0])).mean(axis=0)
    return x_ref, mean


# ---------------------------------------------------------------------------
# Per-datum terms, randomized estimates and exact effective rates


def per_datum_term(scheme, dataset: Dataset, model: Model, j: int, x) -> np.ndarray:
    """The term ``E^j(x)`` of the scheme's decomposition (0-based datum index)."""
    if not 0 <= j < dataset.n:
        raise IndexError("datum index out of range")
    return _terms(scheme, dataset, model, x, np.array([j]))[0]


def _terms(scheme, dataset: Dataset, model: Model, x, idx: np.ndarray) -> np.ndarray:
    """E^j(x) for the rows in idx, as (k, d)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xq = x if model.dim > 1 else float(x[0])
    if isinstance(scheme, (CanonicalScheme, VanillaSubsampling)):
        return model.grad_terms(dataset, xq, idx)
    if isinstance(scheme, ControlVariates):
        return _cv_terms(scheme, dataset, model, xq, idx)
    if isinstance(scheme, MixedSubsampling):
        if np.linalg.norm(x) > scheme.radius:
            return model.grad_terms(dataset, xq, idx)
        return _cv_terms(scheme, dataset, model, xq, idx)
    raise ValueError(f"unknown scheme {scheme!r}")


def _cv_terms(scheme, dataset, model, xq, idx):
    ref = scheme.x_ref if model.dim > 1 else float(scheme.x_ref[0])
    if model.dim == 1 and hasattr(model, "score_diff"):
        y = dataset.y[idx]
        diff = model.score_diff(xq, ref, y).reshape(-1, 1)
        # The prior shares at xq and ref do not cancel; add their difference.
        if model.prior is not None:
            diff = diff + (model.prior.grad(xq) - model.prior.grad(ref))[None, :] / dataset.n
        return diff + scheme.mean_grad[None, :]
    return (
        model.grad_terms(dataset, xq, idx)
        - model.grad_terms(dataset, ref, idx)
        + scheme.mean_grad[None, :]
    )


def term_charge(scheme, dataset: Dataset, model: Model, x=None) -> int:
    """Fresh per-datum evaluations charged per rate draw."""
    n = dataset.n
    if isinstance(scheme, CanonicalScheme):
        return n
    if isinstance(scheme, VanillaSubsampling):
        return scheme.m
    if isinstance(scheme, ControlVariates):
        return 2 * scheme.m
    if isinstance(scheme, MixedSubsampling):
        if x is None:
            raise ValueError("mixed charge depends on the state")
        outer = np.linalg.norm(np.atleast_1d(x)) > scheme.radius
        return scheme.m if outer else 2 * scheme.m
    raise ValueError(f"unknown scheme {scheme!r}")


def draw_estimate(scheme, dataset: Dataset, model: Model, x, rng: np.random.Generator, ledger=None) -> np.ndarray:
    """One realization of the unbiased gradient estimate ``zeta(x)``."""
    n = dataset.n
    if isinstance(scheme, CanonicalScheme):
        zeta = _terms(scheme, dataset, model, x, np.arange(n)).sum(axis=0)
        charge = n
    else:
        m = scheme.m
        if m > n:
            raise ValueError("batch size exceeds dataset size")
        idx = srswor(rng, n, m)
        zeta = (n / m) * _terms(scheme, dataset, model, x, idx).sum(axis=0)
        charge = term_charge(scheme, dataset, model, x)
    if ledger is not None:
        ledger.grad_term_evals += charge
    return zeta


def _enumerate_subsets(n: int, m: int, limit: float = 1e6) -> np.ndarray:
    if math.comb(n, m) > limit:
        raise EnumerationTooLarge(f"C({n},{m}) = {math.comb(n, m)} exceeds {limit:g}")
    return np.array(list(combinations(range(n), m)), dtype=np.int64)


def effective_rate_exact(scheme, dataset: Dataset, model: Model, x, v, i: int) -> float:
    """Effective switching rate by full enumeration of all size-m subsets."""
    n = dataset.n
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if isinstance(scheme, CanonicalScheme):
        g = _terms(scheme, dataset, model, x, np.arange(n)).sum(axis=0)
        return max(v[i] * g[i], 0.0)
    m = scheme.m
    subsets = _enumerate_subsets(n, m)
    terms_i = _terms(scheme, dataset, model, x, np.arange(n))[:, i]
    subset_means = terms_i[subsets].sum(axis=1) / m
    return float(n * np.maximum(v[i] * subset_means, 0.0).mean())


def rate_identity_check(scheme, dataset: Dataset, model: Model, x) -> float:
    """Max residual of ``rate(v) - rate(flip v) - v_i grad_i U`` over coordinates."""
    from .models import potential_grad

    g = potential_grad(dataset, model, x)
    worst = 0.0
    d = model.dim
    for i in range(d):
        for vi in (-1.0, 1.0):
            v_plus = np.ones(d)
            v_plus[i] = vi
            v_minus = v_plus.copy()
            v_minus[i] = -vi
            lam_p = effective_rate_exact(scheme, dataset, model, x, v_plus, i)
            lam_m = effective_rate_exact(scheme, dataset, model, x, v_minus, i)
            worst = max(worst, abs(lam_p - lam_m - vi * g[i]))
    return worst


# ---------------------------------------------------------------------------
# Thinning bounds


def _prior_bound_terms(model: Model, dataset: Dataset, x) -> tuple[np.ndarray, float]:
    """Affine add-on dominating the prior share of the rates along any ray."""
    if model.prior is None:
        return np.zeros(model.dim), 0.0
    g = np.abs(model.prior.grad(x))
    return g, math.sqrt(model.dim) / model.prior.sd**2


def make_bounds(scheme, dataset: Dataset, model: Model, x, v, grad_cache=None, consts=None) -> list[BoundSegment]:
    """Per-coordinate dominating segments for the scheme at state ``(x, v)``.

    Segments dominate every realizable rate estimate along ``x + v t`` for
    ``t`` within their horizons, for every mini-batch realization.  ``consts``
    optionally carries precomputed ``(c_hat, lmax, lsum)`` so per-proposal
    refreshes avoid O(n) data reductions.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    n, d = dataset.n, model.dim
    pa, pb = _prior_bound_terms(model, dataset, x)
    if consts is None:
        consts = (model.per_datum_bound(dataset), model.lipschitz_max(dataset), model.lipschitz_sum(dataset))
    c_hat, lmax_c, lsum_c = consts
    segs = []
    if isinstance(scheme, CanonicalScheme):
        lsum = lsum_c
        if lsum is not None and not model.globally_bounded:
            if grad_cache is None:
                raise ValueError("canonical affine bounds need the current gradient")
            for i in range(d):
                a = max(v[i] * grad_cache[i], 0.0) + pa[i]
                segs.append(BoundSegment.affine(i, a, math.sqrt(d) * lsum[i] + pb))
        elif c_hat is not None:
            for i in range(d):
                segs.append(_capped_constant(i, n * c_hat[i], pa[i], pb))
        else:
            raise NoBoundAvailable("canonical bounds need Lipschitz or bounded scores")
        return segs
    if isinstance(scheme, VanillaSubsampling):
        if c_hat is not None:
            for i in range(d):
                segs.append(_capped_constant(i, n * c_hat[i], pa[i], pb))
            return segs
        if d == 1:
            env = model.score_envelope_1d(dataset, float(x[0]), float(v[0]))
            if env is not None:
                env_val, env_slope = env
                a = n * max(env_val, 0.0) + pa[0]
                return [BoundSegment.affine(0, a, n * env_slope + pb)]
        raise NoBoundAvailable("vanilla sub-sampling needs bounded scores or a score envelope")
    if isinstance(scheme, ControlVariates):
        return _cv_bounds(scheme, dataset, model, x, pa, pb, lmax_c, c_hat)
    if isinstance(scheme, MixedSubsampling):
        if c_hat is None:
            raise NoBoundAvailable("mixed scheme needs globally bounded scores")
        for i in range(d):
            c = n * (abs(scheme.mean_grad[i]) + 2.0 * c_hat[i])
            segs.append(_capped_constant(i, max(c, n * c_hat[i]), pa[i], pb))
        return segs
    raise ValueError(f"unknown scheme {scheme!r}")


def _capped_constant(i, c, pa, pb):
    if pb == 0.0:
        return BoundSegment.constant(i, c + pa)
    return BoundSegment.affine(i, c + pa, pb)


def _cv_bounds(scheme, dataset, model, x, pa, pb, lmax, c_hat):
    n, d = dataset.n, model.dim
    r = float(np.linalg.norm(x - scheme.x_ref))
    segs = []
    for i in range(d):
        gbar = abs(scheme.mean_grad[i])
        cap = math.inf if c_hat is None else n * (gbar + 2.0 * c_hat[i])
        if lmax is None:
            if math.isinf(cap):
                raise NoBoundAvailable("control variates need Lipschitz or bounded scores")
            segs.append(_capped_constant(i, cap, pa[i], pb))
            continue
        a = n * (gbar + lmax[i] * r)
        b = n * lmax[i] * math.sqrt(d)
        if a >= cap:
            segs.append(_capped_constant(i, cap, pa[i], pb))
        else:
            horizon = (cap - a) / b if math.isfinite(cap) else math.inf
            segs.append(BoundSegment.affine(i, a + pa[i], b + pb, horizon))
    return segs


# ---------------------------------------------------------------------------
# The rate process fed to the simulator


class ZigZagProcess:
    """Rate process binding (scheme, dataset, model) for the thinning simulator.

    Immutable after construction apart from a gradient cache that only
    affects charge accounting for the canonical scheme.
    """

    def __init__(self, scheme, dataset: Dataset, model: Model):
        self.scheme = scheme
        self.dataset = dataset
        self.model = model
        self.dim = model.dim
        self.n = dataset.n
        # Last evaluated gradient points: (xs (k, d) row-major, grads (k, d)).
        self._grad_cache: Optional[tuple[np.ndarray, np.ndarray]] = None
        self._canonical = isinstance(scheme, CanonicalScheme)
        self._needs_grad_anchor = self._canonical and not model.globally_bounded
        # Scalar 1-d thinning only for location models (element-wise scores).
        self.supports_scalar_1d = self.dim == 1 and hasattr(model, "score")
        self.setup_grad_evals = self.n if isinstance(scheme, (ControlVariates, MixedSubsampling)) else 0
        self.run_setup_charge = self.n if self._needs_grad_anchor else 0
        self._ysum = float(dataset.y.sum()) if self.supports_scalar_1d else 0.0
        self._bound_consts = (
            model.per_datum_bound(dataset),
            model.lipschitz_max(dataset),
            model.lipschitz_sum(dataset),
        )
        self._bounds_closure = self._build_bounds_scalar() if self.supports_scalar_1d else None

    def __getstate__(self):
        # Closures and the gradient cache are derived state; rebuild on load
        # so processes ship cleanly to worker pools.
        state = self.__dict__.copy()
        state["_bounds_closure"] = None
        state["_grad_cache"] = None
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        if self.supports_scalar_1d:
            self._bounds_closure = self._build_bounds_scalar()

    # -- charges -------------------------------------------------------------
    @property
    def per_proposal_charge(self) -> Optional[int]:
        if isinstance(self.scheme, MixedSubsampling):
            return None  # branch-dependent
        return term_charge(self.scheme, self.dataset, self.model)

    # -- protocol ------------------------------------------------------------
    def bounds(self, x, v, ledger=None) -> list[BoundSegment]:
        grad = None
        if self._needs_grad_anchor:
            grad = self._anchored_grad(np.atleast_1d(np.asarray(x, dtype=float)), ledger)
        return make_bounds(
            self.scheme, self.dataset, self.model, x, v, grad_cache=grad, consts=self._bound_consts
        )

    def _cache_lookup(self, x):
        if self._grad_cache is None:
            return None
        xs, gs = self._grad_cache
        hit = np.nonzero(np.all(xs == x[None, :], axis=1))[0]
        return gs[hit[-1]] if hit.size else None

    def _anchored_grad(self, x, ledger):
        # A sequential run evaluates the gradient at every proposal; bound
        # refreshes at an already-evaluated point reuse it free of charge.
        g = self._cache_lookup(x)
        if g is not None:
            return g
        from .models import potential_grad

        g = potential_grad(self.dataset, self.model, x, ledger=ledger)
        self._grad_cache = (x.copy().reshape(1, -1), g.reshape(1, -1))
        return g

    def switch_rate(self, x, v, i, rng, ledger=None) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self._canonical:
            from .models import potential_grad

            g = potential_grad(self.dataset, self.model, x, ledger=ledger)
            self._grad_cache = (x.copy().reshape(1, -1), g.reshape(1, -1))
            return max(float(v[i] * g[i]), 0.0)
        zeta = draw_estimate(self.scheme, self.dataset, self.model, x, rng, ledger=ledger)
        return max(float(v[i] * zeta[i]), 0.0)

    # -- scalar 1-d fast path --------------------------------------------------

    def bounds_scalar_1d(self, x: float, v: float):
        """Dominating ``(a, b, horizon)`` for the single coordinate at (x, v).

        Mirrors :func:`make_bounds` for 1-d location models on plain floats;
        bound constants are cached at construction and the prior share is
        folded in as an affine add-on.
        """
        return self._bounds_closure(x, v)

    def _build_bounds_scalar(self):
        model, data, n = self.model, self.dataset, self.n
        scheme = self.scheme
        inf = math.inf
        pa_mean, pb = 0.0, 0.0
        has_prior = model.prior is not None
        if has_prior:
            pa_mean = model.prior.mean[0]
            pb = 1.0 / model.prior.sd**2
        c_hat = model.per_datum_bound(data)
        c0 = None if c_hat is None else float(c_hat[0])

        if self._canonical:
            if self._needs_grad_anchor:
                lsum = float(model.lipschitz_sum(data)[0])
                grad = self._grad_fast

                def bounds_can(x, v):
                    g = v * grad(x)
                    a = g if g > 0.0 else 0.0
                    if has_prior:
                        return a + abs(x - pa_mean) * pb, lsum + pb, inf
                    return a, lsum, inf

                return bounds_can
            const = n * c0

            def bounds_const(x, v):
                if has_prior:
                    return const + abs(x - pa_mean) * pb, pb, inf
                return const, 0.0, inf

            return bounds_const

        if isinstance(scheme, VanillaSubsampling):
            if c0 is not None:
                const = n * c0

                def bounds_ss_const(x, v):
                    if has_prior:
                        return const + abs(x - pa_mean) * pb, pb, inf
                    return const, 0.0, inf

                return bounds_ss_const
            if hasattr(model, "score_envelope_1d"):
                ymin = float(data.y.min())
                ymax = float(data.y.max())
                nf = float(n)

                def bounds_ss_env(x, v):
                    env = x - ymin if v > 0.0 else ymax - x
                    a = nf * env if env > 0.0 else 0.0
                    if has_prior:
                        return a + abs(x - pa_mean) * pb, nf + pb, inf
                    return a, nf, inf

                return bounds_ss_env
            raise NoBoundAvailable("vanilla sub-sampling needs bounded scores or a score envelope")

        if isinstance(scheme, ControlVariates):
            lmax_arr = model.lipschitz_max(data)
            gbar = abs(float(scheme.mean_grad[0]))
            cap = inf if c0 is None else n * (gbar + 2.0 * c0)
            if lmax_arr is None:
                if math.isinf(cap):
                    raise NoBoundAvailable("control variates need Lipschitz or bounded scores")

                def bounds_cv_const(x, v):
                    if has_prior:
                        return cap + abs(x - pa_mean) * pb, pb, inf
                    return cap, 0.0, inf

                return bounds_cv_const
            lmax = float(lmax_arr[0])
            xref = float(scheme.x_ref[0])
            nl = n * lmax

            def bounds_cv(x, v):
                a = n * (gbar + lmax * abs(x - xref))
                if a >= cap:
                    if has_prior:
                        return cap + abs(x - pa_mean) * pb, pb, inf
                    return cap, 0.0, inf
                horizon = (cap - a) / nl if cap < inf else inf
                if has_prior:
                    return a + abs(x - pa_mean) * pb, nl + pb, horizon
                return a, nl, horizon

            return bounds_cv

        if isinstance(scheme, MixedSubsampling):
            if c0 is None:
                raise NoBoundAvailable("mixed scheme needs globally bounded scores")
            const = max(n * (abs(float(scheme.mean_grad[0])) + 2.0 * c0), n * c0)

            def bounds_mixed(x, v):
                if has_prior:
                    return const + abs(x - pa_mean) * pb, pb, inf
                return const, 0.0, inf

            return bounds_mixed

        raise ValueError(f"unknown scheme {scheme!r}")

    def _grad_fast(self, x: float) -> float:
        """Full potential gradient at a scalar point (sufficient statistic
        for the Gaussian family, data sweep otherwise); prior included."""
        from .models import GaussianLocation

        model, data, n = self.model, self.dataset, self.n
        if isinstance(model, GaussianLocation):
            g = n * x - self._ysum
        else:
            g = float(np.sum(model.score(x, data.y)))
        if model.prior is not None:
            g += (x - model.prior.mean[0]) / model.prior.sd**2
        return g

    def scalar_kernel_1d(self, rng: np.random.Generator):
        """Build ``rate(x, v) -> (realized rate, charge)`` on plain floats.

        Mini-batch indices are pre-drawn in blocks from ``rng`` so that the
        draw order, and hence the run, is reproducible.
        """
        model, data, n = self.model, self.dataset, self.n
        scheme = self.scheme
        score = getattr(model, "score_scalar", model.score)
        ylist = data.y.tolist()
        prior = model.prior
        pmean = prior.mean[0] if prior is not None else 0.0
        pvar = prior.sd**2 if prior is not None else 1.0

        if self._canonical:
            grad = self._grad_fast

            def rate_canonical(x, v):
                return max(v * grad(x), 0.0), n

            return rate_canonical

        m = scheme.m
        if m > n:
            raise ValueError("batch size exceeds dataset size")
        buf_size = 1 << 14
        state = {"buf": rng.integers(0, n, size=buf_size).tolist(), "pos": 0}

        def next_index():
            i = state["pos"]
            if i == buf_size:
                state["buf"] = rng.integers(0, n, size=buf_size).tolist()
                i = 0
            state["pos"] = i + 1
            return state["buf"][i]

        def batch_sum(fn):
            # sum of fn over a fresh SRSWOR batch (m > 1 path)
            return sum(fn(ylist[j]) for j in srswor(rng, n, m))

        if isinstance(scheme, VanillaSubsampling):
            if m == 1 and prior is None:
                nf = float(n)

                def rate_ss1(x, v):
                    i = state["pos"]
                    if i == buf_size:
                        state["buf"] = rng.integers(0, n, size=buf_size).tolist()
                        i = 0
                    state["pos"] = i + 1
                    s = v * nf * score(x, ylist[state["buf"][i]])
                    return (s if s > 0.0 else 0.0), 1

                return rate_ss1
            if m == 1:

                def rate_ss1p(x, v):
                    s = score(x, ylist[next_index()]) + (x - pmean) / (n * pvar)
                    return max(v * n * s, 0.0), 1

                return rate_ss1p

            def rate_ss(x, v):
                tot = batch_sum(lambda y: score(x, y))
                if prior is not None:
                    tot += m * (x - pmean) / (n * pvar)
                return max(v * (n / m) * tot, 0.0), m

            return rate_ss

        if isinstance(scheme, ControlVariates):
            xref = float(scheme.x_ref[0])
            nmean = n * float(scheme.mean_grad[0])
            pshift = 0.0
            if prior is not None:
                pshift = (xref - pmean) / (n * pvar)
            sdiff = _scalar_score_diff(model)
            if m == 1 and prior is None:
                nf = float(n)

                def rate_cv1(x, v):
                    i = state["pos"]
                    if i == buf_size:
                        state["buf"] = rng.integers(0, n, size=buf_size).tolist()
                        i = 0
                    state["pos"] = i + 1
                    r = v * (nf * sdiff(x, xref, ylist[state["buf"][i]]) + nmean)
                    return (r if r > 0.0 else 0.0), 2

                return rate_cv1
            if m == 1:

                def rate_cv1p(x, v):
                    zeta = n * sdiff(x, xref, ylist[next_index()]) + nmean
                    zeta += n * ((x - pmean) / (n * pvar) - pshift)
                    return max(v * zeta, 0.0), 2

                return rate_cv1p

            def rate_cv(x, v):
                tot = batch_sum(lambda y: sdiff(x, xref, y))
                zeta = (n / m) * tot + nmean
                if prior is not None:
                    zeta += n * ((x - pmean) / (n * pvar) - pshift)
                return max(v * zeta, 0.0), 2 * m

            return rate_cv

        if isinstance(scheme, MixedSubsampling):
            xref = float(scheme.x_ref[0])
            nmean = n * float(scheme.mean_grad[0])
            radius = scheme.radius
            sdiff = _scalar_score_diff(model)
            pshift = 0.0
            if prior is not None:
                pshift = (xref - pmean) / (n * pvar)

            def rate_mixed(x, v):
                if abs(x) > radius:
                    if m == 1:
                        tot = score(x, ylist[next_index()])
                    else:
                        tot = batch_sum(lambda y: score(x, y)) / m
                    zeta = n * tot
                    if prior is not None:
                        zeta += (x - pmean) / pvar
                    return max(v * zeta, 0.0), m
                if m == 1:
                    tot = sdiff(x, xref, ylist[next_index()])
                else:
                    tot = batch_sum(lambda y: sdiff(x, xref, y)) / m
                zeta = n * tot + nmean
                if prior is not None:
                    zeta += n * ((x - pmean) / (n * pvar) - pshift)
                return max(v * zeta, 0.0), 2 * m

            return rate_mixed

        raise ValueError(f"unknown scheme {scheme!r}")
