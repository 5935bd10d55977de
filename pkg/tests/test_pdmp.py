import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from zzscale.pdmp import (
    BoundSegment,
    BoundViolation,
    PhaseState,
    SimBudget,
    Skeleton,
    discretize,
    flip,
    path_average,
    position_at,
    simulate,
)


class ConstantRateProcess:
    """True rate lam, thinned from a constant bound c >= lam."""

    dim = 1
    supports_scalar_1d = False

    def __init__(self, lam, c):
        self.lam = lam
        self.c = c

    def bounds(self, x, v, ledger=None):
        return [BoundSegment.constant(0, self.c)]

    def switch_rate(self, x, v, i, rng, ledger=None):
        return self.lam


class StdGaussianTargetRate:
    """Canonical 1-d rate (v x)_+ with its exact affine bound."""

    dim = 1
    supports_scalar_1d = False

    def bounds(self, x, v, ledger=None):
        a = max(v[0] * x[0], 0.0)
        return [BoundSegment.affine(0, a, 1.0)]

    def switch_rate(self, x, v, i, rng, ledger=None):
        return max(v[0] * x[0], 0.0)


class ZeroRateProcess:
    dim = 1
    supports_scalar_1d = False

    def bounds(self, x, v, ledger=None):
        return [BoundSegment.constant(0, 0.0)]

    def switch_rate(self, x, v, i, rng, ledger=None):
        return 0.0


class LyingBoundProcess:
    """Claims bound 1 but realizes rate 5: must trip the violation guard."""

    dim = 1
    supports_scalar_1d = False

    def bounds(self, x, v, ledger=None):
        return [BoundSegment.constant(0, 1.0)]

    def switch_rate(self, x, v, i, rng, ledger=None):
        return 5.0


def state(x, v):
    return PhaseState(np.atleast_1d(np.array(x, float)), np.atleast_1d(np.array(v, float)))


class TestFlip:
    def test_first_coordinate(self):
        assert tuple(flip(np.array([1.0, 1.0]), 0)) == (-1.0, 1.0)

    def test_last_coordinate(self):
        assert tuple(flip(np.array([-1.0, 1.0, -1.0]), 2)) == (-1.0, 1.0, 1.0)

    @given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=1, max_size=6), st.data())
    def test_involution(self, vlist, data):
        v = np.array(vlist)
        i = data.draw(st.integers(0, len(vlist) - 1))
        assert np.array_equal(flip(flip(v, i), i), v)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            flip(np.array([1.0]), 1)


class TestPhaseState:
    def test_rejects_bad_velocity(self):
        with pytest.raises(ValueError):
            PhaseState(np.array([0.0]), np.array([0.5]))

    def test_rejects_nonfinite_position(self):
        with pytest.raises(ValueError):
            PhaseState(np.array([np.inf]), np.array([1.0]))


class TestBoundSegment:
    def test_constant_arrival_is_exponential(self):
        seg = BoundSegment.constant(0, 2.0)
        rng = np.random.default_rng(0)
        draws = np.array([seg.first_arrival(rng) for _ in range(20000)])
        assert abs(draws.mean() - 0.5) < 0.02

    def test_affine_inversion(self):
        seg = BoundSegment.affine(0, 1.0, 3.0)
        for e in (0.1, 1.0, 7.0):
            t = seg.invert_integral(e)
            assert abs(seg.integral(t) - e) < 1e-12

    def test_zero_bound_never_arrives(self):
        seg = BoundSegment.constant(0, 0.0)
        assert seg.invert_integral(1.0) == math.inf

    def test_decreasing_bound_saturates(self):
        seg = BoundSegment.affine(0, 1.0, -0.5, horizon=2.0)
        assert seg.invert_integral(0.3) < 2.0
        assert seg.invert_integral(5.0) == math.inf  # total mass is 1.0

    def test_negative_intercept_rejected(self):
        with pytest.raises(ValueError):
            BoundSegment.affine(0, -1.0, 0.0)

    def test_negative_slope_needs_finite_horizon(self):
        with pytest.raises(ValueError):
            BoundSegment.affine(0, 1.0, -1.0)  # would go negative


def make_skeleton(events, t_end):
    ts = np.array([e[0] for e in events], float)
    xs = np.array([np.atleast_1d(e[1]) for e in events], float)
    vs = np.array([np.atleast_1d(e[2]) for e in events], float)
    return Skeleton(times=ts, xs=xs, vs=vs, t_end=t_end)


class TestPositionAt:
    def test_unit_speed_interpolation(self):
        sk = make_skeleton([(0.0, (1.0, 2.0), (1.0, -1.0))], t_end=1.0)
        assert np.allclose(position_at(sk, 0.5), [1.5, 1.5])

    def test_at_event_time_left_closed(self):
        sk = make_skeleton([(0.0, 0.0, 1.0), (1.0, 1.0, -1.0)], t_end=2.0)
        assert position_at(sk, 1.0)[0] == 1.0

    def test_at_t_end(self):
        sk = make_skeleton([(0.0, 0.0, 1.0), (1.0, 1.0, -1.0)], t_end=2.0)
        assert position_at(sk, 2.0)[0] == 0.0

    def test_outside_range(self):
        sk = make_skeleton([(0.0, 0.0, 1.0)], t_end=1.0)
        with pytest.raises(ValueError):
            position_at(sk, 1.5)


class TestDiscretize:
    def test_two_samples_when_dt_is_t_end(self):
        sk = make_skeleton([(0.0, 0.0, 1.0)], t_end=3.0)
        out = discretize(sk, 3.0)
        assert out.shape == (2, 1)
        assert np.allclose(out[:, 0], [0.0, 3.0])

    def test_single_sample_when_dt_exceeds_t_end(self):
        sk = make_skeleton([(0.0, 0.0, 1.0)], t_end=1.0)
        assert discretize(sk, 2.0).shape == (1, 1)

    def test_straddling_a_switch_matches_hand_interpolation(self):
        sk = make_skeleton([(0.0, 0.0, 1.0), (1.0, 1.0, -1.0)], t_end=2.0)
        out = discretize(sk, 0.75)[:, 0]
        assert np.allclose(out, [0.0, 0.75, 0.5])  # 1.5 -> reflected to 0.5


class TestPathAverage:
    def setUp_segment(self):
        return make_skeleton([(0.0, 0.0, 1.0)], t_end=2.0)

    def test_linear_ramp_mean(self):
        sk = self.setUp_segment()
        assert abs(path_average(sk, lambda x: x[0], 0.0, 2.0) - 1.0) < 1e-12

    def test_quadratic_exact(self):
        sk = self.setUp_segment()
        assert abs(path_average(sk, lambda x: x[0] ** 2, 0.0, 2.0) - 4.0 / 3.0) < 1e-10

    def test_indicator_against_riemann_oracle(self):
        sk = make_skeleton([(0.0, -1.0, 1.0)], t_end=2.0)
        f = lambda x: float(x[0] > 0.0)
        got = path_average(sk, f, 0.0, 2.0)
        ts = np.linspace(0.0, 2.0, 2_000_001)
        oracle = np.mean((-1.0 + ts) > 0.0)
        assert abs(got - oracle) < 1e-4
        assert abs(got - 0.5) < 1e-4

    def test_invalid_interval(self):
        sk = self.setUp_segment()
        with pytest.raises(ValueError):
            path_average(sk, lambda x: x[0], 1.5, 1.0)


class TestSimulate:
    def test_zero_rate_pure_drift(self):
        skel, ledger = simulate(ZeroRateProcess(), state(2.0, 1.0), SimBudget(t_max=5.0), 0)
        assert skel.n_events == 1
        assert position_at(skel, skel.t_end)[0] == 7.0
        assert ledger.proposals == 0 and ledger.accepted == 0

    def test_first_switch_law_gaussian_target(self):
        # From (0, +1) the switch rate is t, so P(T1 > t) = exp(-t^2 / 2).
        proc = StdGaussianTargetRate()
        times = []
        for seed in range(3000):
            skel, _ = simulate(proc, state(0.0, 1.0), SimBudget(t_max=10.0, max_events=1), seed)
            assert skel.n_events == 2
            times.append(skel.times[1])
        res = stats.kstest(times, lambda t: 1.0 - np.exp(-0.5 * np.asarray(t) ** 2))
        assert res.pvalue > 0.01

    def test_constant_rate_long_run_intensity(self):
        lam, c, t_max = 2.0, 3.0, 1e4
        skel, ledger = simulate(ConstantRateProcess(lam, c), state(0.0, 1.0), SimBudget(t_max=t_max), 42)
        rate = ledger.accepted / t_max
        se = math.sqrt(lam / t_max)
        assert abs(rate - lam) < 3 * se

    def test_thinned_counts_are_poisson(self):
        lam, t = 2.0, 1.0
        proc = ConstantRateProcess(lam, 3.0)
        rng = np.random.default_rng(7)
        counts = np.array(
            [simulate(proc, state(0.0, 1.0), SimBudget(t_max=t), rng)[1].accepted for _ in range(10_000)]
        )
        kmax = 8
        observed = np.array([(counts == k).sum() for k in range(kmax)] + [(counts >= kmax).sum()])
        probs = [stats.poisson.pmf(k, lam * t) for k in range(kmax)]
        probs.append(1.0 - sum(probs))
        res = stats.chisquare(observed, np.array(probs) * counts.size)
        assert res.pvalue > 0.01

    def test_determinism_same_seed(self):
        proc = StdGaussianTargetRate()
        a, _ = simulate(proc, state(0.3, -1.0), SimBudget(t_max=50.0), 99)
        b, _ = simulate(proc, state(0.3, -1.0), SimBudget(t_max=50.0), 99)
        assert a.times.tobytes() == b.times.tobytes()
        assert a.xs.tobytes() == b.xs.tobytes()
        assert a.vs.tobytes() == b.vs.tobytes()
        assert a.t_end == b.t_end

    def test_budget_caps(self):
        proc = ConstantRateProcess(2.0, 3.0)
        skel, ledger = simulate(proc, state(0.0, 1.0), SimBudget(t_max=1e6, max_events=10), 0)
        assert ledger.accepted == 10
        assert ledger.stopped_by == "max_events"
        skel2, ledger2 = simulate(proc, state(0.0, 1.0), SimBudget(t_max=1e6, max_proposals=25), 0)
        assert ledger2.proposals == 25
        assert ledger2.stopped_by == "max_proposals"

    def test_bound_violation_is_fatal_by_default(self):
        with pytest.raises(BoundViolation):
            simulate(LyingBoundProcess(), state(0.0, 1.0), SimBudget(t_max=10.0), 1)

    def test_bound_violation_clamp_mode_warns(self):
        with pytest.warns(RuntimeWarning):
            skel, _ = simulate(
                LyingBoundProcess(), state(0.0, 1.0), SimBudget(t_max=5.0), 1, clamp_bounds=True
            )
        assert skel.n_events > 1

    def test_unit_speed_and_single_flips(self):
        skel, _ = simulate(StdGaussianTargetRate(), state(0.0, 1.0), SimBudget(t_max=200.0), 5)
        skel.validate()
        assert skel.n_events > 50


class TestSkeletonCsv:
    def test_round_trip_is_exact(self, tmp_path):
        skel, _ = simulate(StdGaussianTargetRate(), state(0.1, 1.0), SimBudget(t_max=20.0), 11)
        path = tmp_path / "skel.csv"
        skel.to_csv(path)
        back = Skeleton.from_csv(path)
        assert np.array_equal(back.times, skel.times)
        assert np.array_equal(back.xs, skel.xs)
        assert np.array_equal(back.vs, skel.vs)
        assert back.t_end == skel.t_end

    def test_header_and_final_row(self, tmp_path):
        sk = make_skeleton([(0.0, (0.0, 1.0), (1.0, -1.0))], t_end=2.0)
        path = tmp_path / "skel.csv"
        sk.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,x1,x2,v1,v2"
        assert len(lines) == 3  # header + initial event + t_end row
        assert lines[-1].startswith("2,")


class TestRateRealization:
    def test_violation_carries_the_realization(self):
        from zzscale.pdmp import RateRealization

        with pytest.raises(BoundViolation) as err:
            simulate(LyingBoundProcess(), state(0.0, 1.0), SimBudget(t_max=10.0), 1)
        real = err.value.realization
        assert isinstance(real, RateRealization)
        assert real.coordinate == 0
        assert real.rate == 5.0
        assert real.bound_value == pytest.approx(1.0)
        assert real.violates
