import math

import numpy as np
import pytest
from scipy import optimize, stats

from zzscale.models import (
    CauchyLocation,
    CovariateSpec,
    Dataset,
    GaussianLocation,
    GaussianPrior,
    LaplaceLocation,
    LocationTruth,
    LogisticRegression,
    LogisticTruth,
    NonConvergence,
    Separation,
    fit_mle,
    generate_data,
    information,
    kl_minimizer,
    observed_information,
    potential_grad,
)

ALL_LOCATION_MODELS = [GaussianLocation(), LaplaceLocation(), CauchyLocation()]
SMOOTH_LOCATION_MODELS = [GaussianLocation(), CauchyLocation()]


def location_data(values):
    return Dataset(y=np.array(values, float))


class TestGenerateData:
    def test_reproducible_given_seed(self):
        truth = LocationTruth("gaussian", 0.0)
        a = generate_data(truth, 3, 7)
        b = generate_data(truth, 3, 7)
        assert np.array_equal(a.y, b.y)

    def test_law_of_large_numbers(self):
        truth = LocationTruth("gaussian", 0.0)
        data = generate_data(truth, 1_000_000, 11)
        assert abs(data.y.mean()) < 4.0 / math.sqrt(data.n)

    def test_logistic_constant_covariate(self):
        truth = LogisticTruth(np.array([1.0, 2.0]), CovariateSpec((("const", 1.0), ("normal", 0.0, 1.0))))
        data = generate_data(truth, 200, 5)
        assert np.all(data.w[:, 0] == 1.0)
        assert set(np.unique(data.y)) <= {0.0, 1.0}

    def test_single_observation(self):
        data = generate_data(LocationTruth("cauchy", 1.0), 1, 0)
        assert data.n == 1

    def test_misspecified_generator(self):
        data = generate_data(LocationTruth("student_t", 0.0, df=3.0), 100, 1)
        assert data.n == 100


class TestPotentialGrad:
    def test_gaussian_linear_sum(self):
        assert potential_grad(location_data([-1.0, 0.0, 1.0]), GaussianLocation(), 2.0)[0] == 6.0

    def test_laplace_sign_cancellation(self):
        assert potential_grad(location_data([0.0, 2.0]), LaplaceLocation(), 1.0)[0] == 0.0

    def test_cauchy_single_datum(self):
        assert potential_grad(location_data([0.0]), CauchyLocation(), 1.0)[0] == pytest.approx(1.0)

    def test_ledger_charges_n(self):
        from zzscale.pdmp import CostLedger

        led = CostLedger()
        potential_grad(location_data([0.0, 1.0, 2.0]), GaussianLocation(), 0.5, ledger=led)
        assert led.grad_term_evals == 3

    def test_prior_share(self):
        model = GaussianLocation()
        model_p = GaussianLocation()
        model_p.prior = GaussianPrior(np.array([0.0]), 2.0)
        data = location_data([1.0, 2.0])
        base = potential_grad(data, model, 3.0)[0]
        with_prior = potential_grad(data, model_p, 3.0)[0]
        assert with_prior == pytest.approx(base + 3.0 / 4.0)


class TestFitMle:
    def test_gaussian_mean(self):
        assert fit_mle(location_data([-1.0, 0.0, 1.0]), GaussianLocation())[0] == 0.0

    def test_laplace_median_odd(self):
        assert fit_mle(location_data([0.0, 1.0, 5.0]), LaplaceLocation())[0] == 1.0

    def test_laplace_even_midpoint_satisfies_score(self):
        data = location_data([1.0, 2.0, 3.0, 10.0])
        xhat = fit_mle(data, LaplaceLocation())
        assert xhat[0] == 2.5
        assert abs(potential_grad(data, LaplaceLocation(), xhat[0])[0]) == 0.0

    def test_cauchy_symmetric_configuration(self):
        data = location_data([-1.0, 0.0, 1.0])
        xhat = fit_mle(data, CauchyLocation())
        # bisection oracle on the score sum
        model = CauchyLocation()
        oracle = optimize.brentq(lambda x: model.score(x, data.y).sum(), -0.9, 0.9)
        assert xhat[0] == pytest.approx(oracle, abs=1e-9)
        assert xhat[0] == pytest.approx(0.0, abs=1e-9)

    def test_cauchy_first_order_condition(self):
        data = generate_data(LocationTruth("cauchy", 2.0), 51, 3)
        xhat = fit_mle(data, CauchyLocation())
        assert abs(potential_grad(data, CauchyLocation(), xhat[0])[0]) <= 1e-10 * data.n

    def test_logistic_newton(self):
        truth = LogisticTruth(np.array([1.0, 2.0]), CovariateSpec((("const", 1.0), ("normal", 0.0, 1.0))))
        data = generate_data(truth, 2000, 9)
        model = LogisticRegression(2)
        xhat = fit_mle(data, model)
        g = model.grad_terms(data, xhat).sum(axis=0)
        assert np.max(np.abs(g)) <= 1e-10 * data.n
        assert np.linalg.norm(xhat - truth.x0) < 0.5

    def test_logistic_separation_detected(self):
        w = np.column_stack([np.ones(40), np.linspace(-2, 2, 40)])
        y = (w[:, 1] > 0).astype(float)  # perfectly separable
        data = Dataset(y=y, w=w)
        with pytest.raises((Separation, NonConvergence)):
            fit_mle(data, LogisticRegression(2))


class TestObservedInformation:
    def test_gaussian_identity(self):
        assert observed_information(location_data([4.0, 5.0]), GaussianLocation(), 1.0)[0, 0] == 1.0

    def test_cauchy_single_datum_and_fd(self):
        model = CauchyLocation()
        data = location_data([0.0])
        assert observed_information(data, model, 0.0)[0, 0] == pytest.approx(2.0)
        h = 1e-6
        fd = (model.score(h, 0.0) - model.score(-h, 0.0)) / (2 * h)
        assert fd == pytest.approx(2.0, rel=1e-6)

    def test_logistic_matches_finite_differences(self):
        truth = LogisticTruth(np.array([0.5, -1.0]), CovariateSpec((("const", 1.0), ("normal", 0.0, 1.0))))
        data = generate_data(truth, 50, 2)
        model = LogisticRegression(2)
        x = np.array([0.3, 0.7])
        hess = model.hess_terms(data, x).sum(axis=0)
        h = 1e-6
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd = (model.grad_terms(data, x + e).sum(axis=0) - model.grad_terms(data, x - e).sum(axis=0)) / (2 * h)
            assert np.allclose(fd, hess[:, k], rtol=1e-4, atol=1e-6)


class TestKlMinimizer:
    def test_stored_truth(self):
        res = kl_minimizer(LocationTruth("gaussian", 3.0), GaussianLocation())
        assert res.x0[0] == 3.0 and res.stderr == 0.0

    def test_laplace_data_under_gaussian_model(self):
        res = kl_minimizer(LocationTruth("laplace", 0.0), GaussianLocation())
        assert res.x0[0] == pytest.approx(0.0, abs=1e-12)
        # grid-search oracle on the Monte Carlo KL estimate
        rng = np.random.default_rng(4)
        sample = stats.laplace.rvs(size=200_000, random_state=rng)
        grid = np.arange(-0.5, 0.5001, 0.01)
        kl = [np.mean(0.5 * (sample - x) ** 2) for x in grid]
        assert abs(grid[int(np.argmin(kl))]) < 0.03

    def test_shifted_wide_gaussian_truth(self):
        res = kl_minimizer(LocationTruth("gaussian", 1.0, scale=2.0), GaussianLocation())
        assert res.x0[0] == pytest.approx(1.0, abs=1e-12)

    def test_monte_carlo_path_reports_error(self):
        res = kl_minimizer(LocationTruth("student_t", 0.5, df=5.0), CauchyLocation(), mc_budget=50_000, rng_seed=8)
        assert res.method == "monte_carlo"
        assert res.stderr > 0
        assert abs(res.x0[0] - 0.5) < 5 * res.stderr + 0.05


GRID = np.concatenate([np.linspace(-4.0, 4.0, 80), np.linspace(-0.45, 0.55, 20)])


class TestConsistencyInvariants:
    @pytest.mark.parametrize("model", SMOOTH_LOCATION_MODELS, ids=lambda m: m.family)
    def test_score_matches_neg_loglik_gradient(self, model):
        y = 0.35
        h = 1e-6
        for x in GRID:
            fd = (model.neg_loglik(x + h, y) - model.neg_loglik(x - h, y)) / (2 * h)
            assert fd == pytest.approx(model.score(x, y), rel=1e-6, abs=1e-6)

    def test_laplace_one_sided_away_from_kink(self):
        model = LaplaceLocation()
        y = 0.0
        h = 1e-6
        for x in (0.5, 1.5, -2.0):
            fd = (model.neg_loglik(x + h, y) - model.neg_loglik(x, y)) / h
            assert fd == pytest.approx(model.score(x, y), rel=1e-6)

    @pytest.mark.parametrize("model", SMOOTH_LOCATION_MODELS, ids=lambda m: m.family)
    def test_score_deriv_matches_fd(self, model):
        y = -0.2
        h = 1e-5
        for x in GRID:
            fd = (model.score(x + h, y) - model.score(x - h, y)) / (2 * h)
            assert fd == pytest.approx(model.score_deriv(x, y), rel=1e-4, abs=1e-4)

    @pytest.mark.parametrize("model", [LaplaceLocation(), CauchyLocation()], ids=lambda m: m.family)
    def test_declared_bounds_hold(self, model):
        rng = np.random.default_rng(0)
        data = location_data(rng.standard_normal(16))
        c = model.per_datum_bound(data)[0]
        xs = rng.uniform(-50, 50, size=100_000)
        ys = data.y[rng.integers(16, size=100_000)]
        assert np.all(np.abs(model.score(xs, ys)) <= c + 1e-12)

    def test_logistic_bound_is_covariate_envelope(self):
        truth = LogisticTruth(np.array([1.0, 2.0]), CovariateSpec((("const", 1.0), ("normal", 0.0, 1.0))))
        data = generate_data(truth, 300, 1)
        model = LogisticRegression(2)
        c = model.per_datum_bound(data)
        rng = np.random.default_rng(2)
        for _ in range(200):
            x = rng.uniform(-10, 10, size=2)
            s = model.grad_terms(data, x)
            assert np.all(np.abs(s) <= c[None, :] + 1e-12)

    @pytest.mark.parametrize("model", ALL_LOCATION_MODELS, ids=lambda m: m.family)
    def test_mle_first_order_condition(self, model):
        rng = np.random.default_rng(3)
        for k in range(5):
            data = location_data(rng.standard_normal(11 + k))
            xhat = fit_mle(data, model)
            assert abs(potential_grad(data, model, xhat[0])[0]) <= 1e-10 * data.n

    def test_lipschitz_constant_dominates_fd_slopes(self):
        rng = np.random.default_rng(5)
        data = location_data(rng.standard_normal(12))
        for model in (GaussianLocation(), CauchyLocation()):
            lmax = model.lipschitz_max(data)[0]
            xs = rng.uniform(-5, 5, size=300)
            h = 1e-5
            slopes = np.abs(model.score(xs[:, None] + h, data.y[None, :]) - model.score(xs[:, None] - h, data.y[None, :])) / (2 * h)
            assert np.max(slopes) <= lmax + 1e-6


class TestInformation:
    def test_location_analytic_values(self):
        assert information(GaussianLocation(), LocationTruth("gaussian", 0.0))[0, 0] == 1.0
        assert information(LaplaceLocation(), LocationTruth("laplace", 0.0))[0, 0] == 1.0
        assert information(CauchyLocation(), LocationTruth("cauchy", 0.0))[0, 0] == 0.5

    def test_logistic_monte_carlo_spd(self):
        truth = LogisticTruth(np.array([1.0, 2.0]), CovariateSpec((("const", 1.0), ("normal", 0.0, 1.0))))
        i0 = information(LogisticRegression(2), truth, mc_budget=200_000, rng_seed=0)
        assert np.allclose(i0, i0.T)
        assert np.all(np.linalg.eigvalsh(i0) > 0)


class TestDatasetCsv:
    def test_location_round_trip(self, tmp_path):
        data = generate_data(LocationTruth("gaussian", 0.0), 25, 3)
        p, m = tmp_path / "d.csv", tmp_path / "d.meta"
        data.to_csv(p, m)
        back = Dataset.from_csv(p, m)
        assert np.array_equal(back.y, data.y)
        assert back.provenance["generator"] == data.provenance["generator"]

    def test_logistic_round_trip(self, tmp_path):
        truth = LogisticTruth(np.array([1.0, 2.0]), CovariateSpec((("const", 1.0), ("normal", 0.0, 1.0))))
        data = generate_data(truth, 30, 3)
        p = tmp_path / "d.csv"
        data.to_csv(p)
        back = Dataset.from_csv(p)
        assert np.array_equal(back.w, data.w)
        assert np.array_equal(back.y, data.y)
