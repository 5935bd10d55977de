"""Event-driven simulation of the Zig-Zag process by Poisson thinning.

The Zig-Zag process moves with unit speed per coordinate, ``x_i' = v_i`` with
``v in {-1,+1}^d``, and flips the sign of coordinate ``i`` at a state-dependent
rate.  Switch times are simulated by thinning: each coordinate proposes
arrivals from a dominating bound (constant or affine in local time) and a
proposal at time ``t`` is accepted with probability ``rate(t) / bound(t)``,
where the rate may itself be a random realization (mini-batch estimate).
Exactness requires that the bound dominates every realizable rate on its
validity window; a violation aborts the run unless clamping is requested.

Trajectories are stored as skeletons (switch events only); positions between
events follow by linear interpolation.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundSegment",
    "BoundViolation",
    "CostLedger",
    "PhaseState",
    "RateRealization",
    "SimBudget",
    "Skeleton",
    "discretize",
    "flip",
    "path_average",
    "position_at",
    "simulate",
]

_FLOAT_FMT = "%.17g"


class BoundViolation(RuntimeError):
    """A realized rate estimate exceeded its thinning bound (exactness lost)."""

    def __init__(self, message, realization=None):
        super().__init__(message)
        self.realization = realization


@dataclass(frozen=True)
class RateRealization:
    """One draw of the randomized switching rate at a proposed time.

    Exactness requires ``rate <= bound_value``; a violating realization is
    attached to the :class:`BoundViolation` raised (or clamped over) by the
    simulator.
    """

    coordinate: int
    t: float
    rate: float
    bound_value: float

    @property
    def violates(self) -> bool:
        return self.rate > self.bound_value


def flip(v: np.ndarray, i: int) -> np.ndarray:
    """Return a copy of velocity ``v`` with coordinate ``i`` negated.

    Coordinates are 0-based.  ``flip(flip(v, i), i) == v``.
    """
    v = np.asarray(v, dtype=float)
    if not 0 <= i < v.shape[-1]:
        raise IndexError(f"coordinate {i} out of range for dimension {v.shape[-1]}")
    out = v.copy()
    out[i] = -out[i]
    return out


@dataclass(frozen=True)
class PhaseState:
    """Zig-Zag state: position ``x`` and velocity ``v in {-1,+1}^d``."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if x.shape != v.shape:
            raise ValueError("x and v must have the same length")
        if not np.all(np.isfinite(x)):
            raise ValueError("position has non-finite entries")
        if not np.all(np.abs(v) == 1.0):
            raise ValueError("velocity entries must be exactly -1 or +1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class SimBudget:
    """Stopping rules for a run; hitting any limit ends the run normally."""

    t_max: float
    max_events: int = 2**62
    max_proposals: int = 2**62

    def __post_init__(self):
        if not (self.t_max > 0 and self.max_events > 0 and self.max_proposals > 0):
            raise ValueError("budget limits must be strictly positive")


@dataclass
class CostLedger:
    """Cost counters for one run.

    ``grad_term_evals`` counts per-datum gradient-term evaluations charged by
    the rate process (the sequential algorithm's cost; speculative evaluations
    made by vectorized thinning are not charged).  ``wall_time`` is informative
    only and is never serialized.
    """

    proposals: int = 0
    accepted: int = 0
    grad_term_evals: int = 0
    wall_time: float = 0.0
    stopped_by: str = ""

    def check(self):
        if self.accepted > self.proposals:
            raise ValueError("accepted exceeds proposals")


@dataclass(frozen=True)
class BoundSegment:
    """Dominating rate ``a + b*t`` for one coordinate over local time ``[0, horizon]``."""

    coordinate: int
    a: float
    b: float = 0.0
    horizon: float = math.inf

    @classmethod
    def constant(cls, coordinate: int, c: float, horizon: float = math.inf) -> "BoundSegment":
        return cls(coordinate, float(c), 0.0, horizon)

    @classmethod
    def affine(cls, coordinate: int, a: float, b: float, horizon: float = math.inf) -> "BoundSegment":
        return cls(coordinate, float(a), float(b), horizon)

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("bound intercept must be nonnegative")
        if not self.horizon > 0:
            raise ValueError("bound horizon must be strictly positive")
        if self.b < 0:
            # Decreasing bounds stay valid only while nonnegative.
            if math.isinf(self.horizon) or self.a + self.b * self.horizon < -1e-12:
                raise ValueError("affine bound goes negative inside its horizon")

    def value_at(self, t: float) -> float:
        return self.a + self.b * t

    def integral(self, t: float) -> float:
        return self.a * t + 0.5 * self.b * t * t

    def first_arrival(self, rng: np.random.Generator) -> float:
        """First arrival of a Poisson process with this intensity; inf if none."""
        e = rng.standard_exponential()
        return self.invert_integral(e)

    def invert_integral(self, e: float) -> float:
        """Solve ``a*t + b*t^2/2 = e`` for the first crossing; inf when unreachable."""
        a, b = self.a, self.b
        if a == 0.0 and b == 0.0:
            return math.inf
        disc = a * a + 2.0 * b * e
        if disc < 0.0:  # b < 0 and the cumulative intensity saturates below e
            return math.inf
        return 2.0 * e / (a + math.sqrt(disc))


@dataclass(frozen=True)
class Skeleton:
    """Switch-event representation of a Zig-Zag path.

    ``times[k], xs[k], vs[k]`` give the state right after the k-th event
    (first event at t=0 is the initial condition); the path is linear with
    velocity ``vs[k]`` until the next event, and runs to ``t_end``.
    """

    times: np.ndarray
    xs: np.ndarray
    vs: np.ndarray
    t_end: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        xs = np.asarray(self.xs, dtype=float)
        vs = np.asarray(self.vs, dtype=float)
        if xs.ndim != 2 or vs.shape != xs.shape or times.shape != (xs.shape[0],):
            raise ValueError("inconsistent event array shapes")
        for arr in (times, xs, vs):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "vs", vs)

    @property
    def d(self) -> int:
        return self.xs.shape[1]

    @property
    def n_events(self) -> int:
        return self.times.shape[0]

    def validate(self, tol: float = 1e-12):
        """Assert unit speed, increasing times and single-coordinate flips."""
        t, x, v = self.times, self.xs, self.vs
        if t[0] != 0.0:
            raise ValueError("first event must be at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("event times must be strictly increasing")
        if self.t_end < t[-1]:
            raise ValueError("t_end precedes last event")
        dt = np.diff(t)[:, None]
        drift = x[:-1] + v[:-1] * dt
        scale = np.maximum(1.0, np.abs(t[1:, None]))
        if not np.allclose(drift, x[1:], rtol=0.0, atol=tol * scale.max()):
            raise ValueError("unit-speed interpolation violated between events")
        flips = np.sum(v[1:] != v[:-1], axis=1)
        if np.any(flips != 1):
            raise ValueError("consecutive velocities must differ in exactly one coordinate")

    def segment_index(self, t) -> np.ndarray:
        return np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.n_events - 1)

    def to_csv(self, path):
        """Write ``t,x1..xd,v1..vd`` rows (events plus a final row at t_end)."""
        d = self.d
        header = ["t"] + [f"x{i+1}" for i in range(d)] + [f"v{i+1}" for i in range(d)]
        x_end = position_at(self, self.t_end)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.n_events):
                w.writerow(
                    [_FLOAT_FMT % self.times[k]]
                    + [_FLOAT_FMT % c for c in self.xs[k]]
                    + [str(int(c)) for c in self.vs[k]]
                )
            w.writerow(
                [_FLOAT_FMT % self.t_end]
                + [_FLOAT_FMT % c for c in x_end]
                + [str(int(c)) for c in self.vs[-1]]
            )

    @classmethod
    def from_csv(cls, path) -> "Skeleton":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        d = (len(header) - 1) // 2
        body = np.array([[float(c) for c in row] for row in rows[1:]])
        # Final row records t_end, not an event.
        return cls(times=body[:-1, 0], xs=body[:-1, 1 : 1 + d], vs=body[:-1, 1 + d :], t_end=body[-1, 0])


def position_at(skeleton: Skeleton, t: float) -> np.ndarray:
    """Position at time ``t`` by linear interpolation (left-closed at events)."""
    if not 0.0 <= t <= skeleton.t_end:
        raise ValueError(f"time {t} outside [0, {skeleton.t_end}]")
    k = int(skeleton.segment_index(t))
    return skeleton.xs[k] + skeleton.vs[k] * (t - skeleton.times[k])


def discretize(skeleton: Skeleton, dt: float) -> np.ndarray:
    """Positions at times ``0, dt, 2*dt, ... <= t_end`` as an ``(m, d)`` array."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    m = int(math.floor(skeleton.t_end / dt + 1e-12)) + 1
    ts = np.arange(m) * dt
    ks = skeleton.segment_index(ts)
    return skeleton.xs[ks] + skeleton.vs[ks] * (ts - skeleton.times[ks])[:, None]


def _adaptive_simpson(g, lo, hi, rel_tol, scale, depth=36):
    mid = 0.5 * (lo + hi)
    glo, gmid, ghi = g(lo), g(mid), g(hi)
    whole = (hi - lo) / 6.0 * (glo + 4.0 * gmid + ghi)

    def recurse(a_, b_, fa, fm, fb, whole_, depth_):
        m_ = 0.5 * (a_ + b_)
        lm, rm = 0.5 * (a_ + m_), 0.5 * (m_ + b_)
        flm, frm = g(lm), g(rm)
        left = (m_ - a_) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b_ - m_) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole_
        if depth_ <= 0 or abs(err) <= 15.0 * rel_tol * max(scale, abs(left + right)):
            return left + right + err / 15.0
        return recurse(a_, m_, fa, flm, fm, left, depth_ - 1) + recurse(
            m_, b_, fm, frm, fb, right, depth_ - 1
        )

    return recurse(lo, hi, glo, gmid, ghi, whole, depth)


def path_average(skeleton: Skeleton, f, t0: float, t1: float, rel_tol: float = 1e-8) -> float:
    """Time average ``(1/(t1-t0)) * int_{t0}^{t1} f(X_s) ds``.

    Integrates segment by segment with adaptive Simpson; exact (up to rounding)
    for integrands polynomial of degree <= 3 along each linear segment.
    """
    if not (0.0 <= t0 < t1 <= skeleton.t_end):
        raise ValueError("need 0 <= t0 < t1 <= t_end")
    # Rough scale for the relative-tolerance test.
    probe = np.linspace(t0, t1, 9)
    scale = max(abs(float(f(position_at(skeleton, t)))) for t in probe) * (t1 - t0) / 8.0
    total = 0.0
    k0, k1 = int(skeleton.segment_index(t0)), int(skeleton.segment_index(t1))
    for k in range(k0, k1 + 1):
        lo = max(t0, float(skeleton.times[k]))
        hi = t1 if k == skeleton.n_events - 1 else min(t1, float(skeleton.times[k + 1]))
        if hi <= lo:
            continue
        xk, vk, tk = skeleton.xs[k], skeleton.vs[k], skeleton.times[k]
        total += _adaptive_simpson(lambda s: float(f(xk + vk * (s - tk))), lo, hi, rel_tol, scale)
    return total / (t1 - t0)


class _EventBuffer:
    def __init__(self, d, x0, v0):
        self.times = [0.0]
        self.xs = [np.array(x0, dtype=float)]
        self.vs = [np.array(v0, dtype=float)]
        self.d = d

    def append(self, t, x, v):
        self.times.append(t)
        self.xs.append(np.array(x, dtype=float))
        self.vs.append(np.array(v, dtype=float))

    def freeze(self, t_end):
        return Skeleton(
            times=np.array(self.times),
            xs=np.array(self.xs),
            vs=np.array(self.vs),
            t_end=float(t_end),
        )


def _as_rng(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def simulate(rate_process, z0: PhaseState, budget: SimBudget, rng_seed, clamp_bounds: bool = False):
    """Simulate a Zig-Zag path by Poisson thinning.

    Parameters
    ----------
    rate_process :
        Supplies ``bounds(x, v, ledger) -> list[BoundSegment]`` (one per
        coordinate, valid on their horizons from the current state) and
        ``switch_rate(x, v, i, rng, ledger) -> float`` drawing the realized
        switching-rate estimate for coordinate ``i`` at the proposal point.
        Processes with ``supports_batch_1d`` set expose the vectorized
        ``switch_rates_1d`` used by the fast one-dimensional loop.
    z0 : PhaseState
        Initial state.
    budget : SimBudget
        Horizon and event/proposal caps; the first limit hit stops the run.
    rng_seed :
        Integer seed or ``numpy.random.Generator``.  Identical seeds give
        byte-identical skeletons.
    clamp_bounds : bool
        When True, a realized rate above its bound is clamped with a warning
        instead of aborting; exactness is no longer guaranteed.

    Returns
    -------
    (Skeleton, CostLedger)
    """
    rng = _as_rng(rng_seed)
    t_start = time.perf_counter()
    if getattr(rate_process, "supports_scalar_1d", False) and z0.dim == 1:
        skel, ledger = _simulate_scalar_1d(rate_process, z0, budget, rng, clamp_bounds)
    else:
        skel, ledger = _simulate_generic(rate_process, z0, budget, rng, clamp_bounds)
    ledger.wall_time = time.perf_counter() - t_start
    ledger.check()
    return skel, ledger


def _handle_violation(clamp, i, t, rate, bound):
    msg = f"rate {rate:.6g} exceeds bound {bound:.6g} in coordinate {i} at t={t:.6g}"
    if clamp:
        warnings.warn("clamping " + msg, RuntimeWarning)
        return min(rate, bound)
    raise BoundViolation(msg, RateRealization(i, t, rate, bound))


_REL_SLACK = 1e-9  # floating-point slack when comparing rate against bound


def _simulate_generic(proc, z0, budget, rng, clamp):
    x = z0.x.copy()
    v = z0.v.copy()
    d = z0.dim
    t = 0.0
    buf = _EventBuffer(d, x, v)
    ledger = CostLedger()

    while True:
        if t >= budget.t_max:
            ledger.stopped_by = "t_max"
            break
        if ledger.accepted >= budget.max_events:
            ledger.stopped_by = "max_events"
            break
        if ledger.proposals >= budget.max_proposals:
            ledger.stopped_by = "max_proposals"
            break
        segs = proc.bounds(x, v, ledger)
        to_end = budget.t_max - t
        window = min(min(s.horizon for s in segs), to_end)
        # First proposed arrival across coordinates (independent segments).
        s_star, seg_star = math.inf, None
        for seg in segs:
            s = seg.first_arrival(rng)
            if s < s_star:
                s_star, seg_star = s, seg
        if s_star > window:
            # No proposal inside the joint validity window: drift and refresh.
            x = x + v * window
            t = budget.t_max if window == to_end else t + window
            continue
        x = x + v * s_star
        t = t + s_star
        ledger.proposals += 1
        i = seg_star.coordinate
        rate = proc.switch_rate(x, v, i, rng, ledger)
        bval = seg_star.value_at(s_star)
        if rate > bval * (1.0 + _REL_SLACK) + 1e-300:
            rate = _handle_violation(clamp, i, t, rate, bval)
        if bval > 0.0 and rng.random() * bval < rate:
            v = flip(v, i)
            buf.append(t, x, v)
            ledger.accepted += 1

    return buf.freeze(t), ledger


def _simulate_scalar_1d(proc, z0, budget, rng, clamp):
    """One-dimensional thinning loop on plain floats with buffered draws.

    Bounds stay anchored at the last event (they are valid on their whole
    horizon), so rejected proposals reuse the running segment; an acceptance
    or a horizon expiry triggers a refresh.  Draws are consumed in a fixed
    order, so identical seeds give identical skeletons.
    """
    x = float(z0.x[0])
    v = float(z0.v[0])
    t = 0.0
    ts = [0.0]
    xs = [x]
    vs = [v]
    ledger = CostLedger()
    rate_fn = proc.scalar_kernel_1d(rng)  # (x, v) -> (realized rate, charge)
    bounds_fn = proc.bounds_scalar_1d
    n_grad = proc.run_setup_charge
    t_max = budget.t_max
    max_ev = budget.max_events
    max_prop = budget.max_proposals
    sqrt = math.sqrt
    inf = math.inf
    # Draw buffers consumed inline; refills keep the order deterministic.
    BUF = 1 << 15
    ebuf = rng.standard_exponential(BUF).tolist()
    ubuf = rng.random(BUF).tolist()
    ie = iu = 0
    n_prop = 0
    n_acc = 0
    stopped = ""

    while True:
        if t >= t_max:
            stopped = "t_max"
            break
        if n_acc >= max_ev:
            stopped = "max_events"
            break
        if n_prop >= max_prop:
            stopped = "max_proposals"
            break
        a, b, horizon = bounds_fn(x, v)
        to_end = t_max - t
        window = to_end if horizon > to_end else horizon
        lam = 0.0  # cumulative intensity consumed inside this segment
        while True:
            if ie == BUF:
                ebuf = rng.standard_exponential(BUF).tolist()
                ie = 0
            lam += ebuf[ie]
            ie += 1
            if b == 0.0:
                tau = lam / a if a > 0.0 else inf
            else:
                disc = a * a + 2.0 * b * lam
                tau = 2.0 * lam / (a + sqrt(disc)) if disc >= 0.0 else inf
            if tau > window:
                x += v * window
                t = t_max if window == to_end else t + window
                break
            xp = x + v * tau
            n_prop += 1
            rate, charge = rate_fn(xp, v)
            n_grad += charge
            bval = a + b * tau
            if rate > bval * (1.0 + _REL_SLACK) + 1e-300:
                rate = _handle_violation(clamp, 0, t + tau, rate, bval)
            if iu == BUF:
                ubuf = rng.random(BUF).tolist()
                iu = 0
            u = ubuf[iu]
            iu += 1
            if u * bval < rate:
                t += tau
                x = xp
                v = -v
                ts.append(t)
                xs.append(x)
                vs.append(v)
                n_acc += 1
                break
            if n_prop >= max_prop:
                t += tau
                x = xp
                break

    ledger.proposals = n_prop
    ledger.accepted = n_acc
    ledger.grad_term_evals = n_grad
    ledger.stopped_by = stopped
    skel = Skeleton(
        times=np.array(ts),
        xs=np.array(xs).reshape(-1, 1),
        vs=np.array(vs).reshape(-1, 1),
        t_end=float(t),
    )
    return skel, ledger
