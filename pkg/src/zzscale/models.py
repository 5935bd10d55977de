"""Parametric model families, data generation, MLE fitting and information.

Each model supplies per-datum gradient terms ``s(x; y) = -d/dx log f(y; x)``
and curvature terms ``s'(x; y)``, together with the constants the thinning
bounds need (global score bounds, Lipschitz constants, score envelopes).
Data generation is decoupled from the model family so misspecified setups
(e.g. Student-t data under a Gaussian model) are expressed by pairing a
``TruthSpec`` with any model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

__all__ = [
    "CauchyLocation",
    "Dataset",
    "GaussianLocation",
    "GaussianPrior",
    "KLMinimizerResult",
    "LaplaceLocation",
    "LogisticRegression",
    "LocationTruth",
    "LogisticTruth",
    "Model",
    "NonConvergence",
    "Separation",
    "fit_mle",
    "generate_data",
    "information",
    "kl_minimizer",
    "observed_information",
    "potential_grad",
]


class NonConvergence(RuntimeError):
    """An iterative fit failed to converge."""


class Separation(RuntimeError):
    """Logistic data are (quasi-)separable; the MLE diverges."""


@dataclass(frozen=True)
class GaussianPrior:
    """Optional N(mean, sd^2) prior; contributes (x - mean)/sd^2 to the potential gradient."""

    mean: np.ndarray
    sd: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        if not self.sd > 0:
            raise ValueError("prior sd must be positive")

    def grad(self, x: np.ndarray) -> np.ndarray:
        return (np.atleast_1d(x) - self.mean) / self.sd**2


@dataclass(frozen=True)
class Dataset:
    """Observed data: ``y`` for location models, ``(w, y)`` for logistic."""

    y: np.ndarray
    w: Optional[np.ndarray] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.shape[0] < 1:
            raise ValueError("y must be a nonempty vector")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        if self.w is not None:
            w = np.asarray(self.w, dtype=float)
            if w.ndim != 2 or w.shape[0] != y.shape[0] or not np.all(np.isfinite(w)):
                raise ValueError("covariates must be a finite (n, d) matrix")
            if not np.all(np.isin(y, (0.0, 1.0))):
                raise ValueError("logistic labels must lie in {0, 1}")
            w.setflags(write=False)
            object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def kind(self) -> str:
        return "location" if self.w is None else "logistic"

    def to_csv(self, path, meta_path=None):
        with open(path, "w", newline="") as fh:
            wri = csv.writer(fh)
            if self.w is None:
                wri.writerow(["y"])
                for v in self.y:
                    wri.writerow(["%.17g" % v])
            else:
                d = self.w.shape[1]
                wri.writerow([f"w{i+1}" for i in range(d)] + ["y"])
                for row, v in zip(self.w, self.y):
                    wri.writerow(["%.17g" % c for c in row] + [str(int(v))])
        if meta_path is not None:
            with open(meta_path, "w") as fh:
                for k in sorted(self.provenance):
                    fh.write(f"{k} = {self.provenance[k]}\n")
                fh.write(f"n = {self.n}\n")

    @classmethod
    def from_csv(cls, path, meta_path=None) -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        provenance = {}
        if meta_path is not None:
            with open(meta_path) as fh:
                for line in fh:
                    if "=" in line:
                        k, _, v = line.partition("=")
                        provenance[k.strip()] = v.strip()
        if header == ["y"]:
            return cls(y=np.array([float(r[0]) for r in body]), provenance=provenance)
        d = len(header) - 1
        arr = np.array([[float(c) for c in r] for r in body])
        return cls(y=arr[:, d], w=arr[:, :d], provenance=provenance)


# ---------------------------------------------------------------------------
# Truths (data-generating processes)


@dataclass(frozen=True)
class LocationTruth:
    """Scalar data-generating law for location models."""

    dist_name: str  # gaussian | laplace | cauchy | student_t
    loc: float = 0.0
    scale: float = 1.0
    df: float = 3.0  # student_t only

    def frozen(self):
        if self.dist_name == "gaussian":
            return stats.norm(self.loc, self.scale)
        if self.dist_name == "laplace":
            return stats.laplace(self.loc, self.scale)
        if self.dist_name == "cauchy":
            return stats.cauchy(self.loc, self.scale)
        if self.dist_name == "student_t":
            return stats.t(self.df, loc=self.loc, scale=self.scale)
        raise ValueError(f"unknown truth {self.dist_name!r}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(self.frozen().rvs(size=n, random_state=rng), dtype=float)

    def matches(self, model: "Model") -> bool:
        return getattr(model, "family", None) == self.dist_name and self.scale == 1.0

    @property
    def x0(self) -> Optional[np.ndarray]:
        # Stored KL minimizer when the law is symmetric about loc (all four are).
        return np.array([self.loc])


@dataclass(frozen=True)
class CovariateSpec:
    """Product distribution over covariate coordinates: point mass / normal / uniform."""

    components: tuple  # of ("const", c) | ("normal", mu, sd) | ("uniform", a, b)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        cols = []
        for comp in self.components:
            kind = comp[0]
            if kind == "const":
                cols.append(np.full(n, float(comp[1])))
            elif kind == "normal":
                cols.append(rng.normal(comp[1], comp[2], size=n))
            elif kind == "uniform":
                cols.append(rng.uniform(comp[1], comp[2], size=n))
            else:
                raise ValueError(f"unknown covariate component {kind!r}")
        return np.column_stack(cols)

    @property
    def d(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class LogisticTruth:
    """Well-specified logistic data generator with covariates ~ Q (product law)."""

    x0_vec: np.ndarray
    covariates: CovariateSpec

    def __post_init__(self):
        object.__setattr__(self, "x0_vec", np.asarray(self.x0_vec, dtype=float))
        if self.x0_vec.shape[0] != self.covariates.d:
            raise ValueError("x0 dimension must match covariate dimension")

    def sample(self, n: int, rng: np.random.Generator):
        w = self.covariates.sample(n, rng)
        p = _sigmoid(w @ self.x0_vec)
        y = (rng.random(n) < p).astype(float)
        return w, y

    def matches(self, model: "Model") -> bool:
        return getattr(model, "family", None) == "logistic"

    @property
    def x0(self) -> np.ndarray:
        return self.x0_vec


def generate_data(truth, n: int, rng_seed) -> Dataset:
    """Draw ``n`` i.i.d. observations from the truth; deterministic given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    prov = {"generator": _truth_label(truth), "seed": str(rng_seed)}
    if isinstance(truth, LogisticTruth):
        w, y = truth.sample(n, rng)
        return Dataset(y=y, w=w, provenance=prov)
    return Dataset(y=truth.sample(n, rng), provenance=prov)


def _truth_label(truth) -> str:
    if isinstance(truth, LocationTruth):
        lbl = f"{truth.dist_name}(loc={truth.loc:g},scale={truth.scale:g}"
        if truth.dist_name == "student_t":
            lbl += f",df={truth.df:g}"
        return lbl + ")"
    if isinstance(truth, LogisticTruth):
        return f"logistic(x0={list(map(float, truth.x0_vec))},Q={truth.covariates.components})"
    return str(truth)


# ---------------------------------------------------------------------------
# Models


def _sigmoid(z):
    out = np.empty_like(np.asarray(z, dtype=float))
    z = np.asarray(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Model:
    """Interface shared by the concrete model families."""

    family: str = ""
    dim: int = 1
    globally_bounded: bool = False
    prior: Optional[GaussianPrior] = None

    # -- per-datum terms ----------------------------------------------------
    def grad_terms(self, dataset: Dataset, x, idx=None) -> np.ndarray:
        """Per-datum gradient terms ``s^j(x)`` as a ``(k, d)`` array.

        Includes the ``n^-1`` prior share when a prior is configured, so the
        terms sum to the full potential gradient.
        """
        raise NotImplementedError

    def hess_terms(self, dataset: Dataset, x, idx=None) -> np.ndarray:
        """Per-datum curvature terms ``s'^j(x)`` as ``(k, d, d)``."""
        raise NotImplementedError

    def loglik_terms(self, dataset: Dataset, x, idx=None) -> np.ndarray:
        raise NotImplementedError

    # -- constants for thinning bounds --------------------------------------
    def per_datum_bound(self, dataset: Dataset) -> Optional[np.ndarray]:
        """``sup_x |s_i(x; y_j)|`` maximized over the dataset, or None."""
        return None

    def lipschitz_max(self, dataset: Dataset) -> Optional[np.ndarray]:
        """``max_j sup_x ||grad_x s^j_i(x)||`` per coordinate, or None."""
        return None

    def lipschitz_sum(self, dataset: Dataset) -> Optional[np.ndarray]:
        lmax = self.lipschitz_max(dataset)
        return None if lmax is None else lmax * dataset.n

    def score_envelope_1d(self, dataset: Dataset, x: float, v: float):
        """``max_j v * s(x; y_j)`` and its slope along the ray, when cheap."""
        return None

    def _prior_share(self, dataset: Dataset, x) -> np.ndarray:
        if self.prior is None:
            return np.zeros(self.dim)
        return self.prior.grad(x) / dataset.n


class _LocationModel(Model):
    dim = 1

    # Element-wise score helpers; broadcast over arrays.
    def score(self, x, y):
        raise NotImplementedError

    def score_diff(self, x1, x2, y):
        """s(x1; y) - s(x2; y); overridden where exact algebra collapses it."""
        return self.score(x1, y) - self.score(x2, y)

    def score_deriv(self, x, y):
        raise NotImplementedError

    def neg_loglik(self, x, y):
        raise NotImplementedError

    def grad_terms(self, dataset, x, idx=None):
        y = dataset.y if idx is None else dataset.y[idx]
        s = self.score(np.asarray(x, dtype=float).reshape(()), y)
        return (s + self._prior_share(dataset, x)[0]).reshape(-1, 1)

    def hess_terms(self, dataset, x, idx=None):
        y = dataset.y if idx is None else dataset.y[idx]
        s = self.score_deriv(np.asarray(x, dtype=float).reshape(()), y)
        if self.prior is not None:
            s = s + 1.0 / (dataset.n * self.prior.sd**2)
        return s.reshape(-1, 1, 1)

    def loglik_terms(self, dataset, x, idx=None):
        y = dataset.y if idx is None else dataset.y[idx]
        return -self.neg_loglik(np.asarray(x, dtype=float).reshape(()), y)


class GaussianLocation(_LocationModel):
    """f(y; x) proportional to exp(-(y - x)^2 / 2); score x - y (unbounded)."""

    family = "gaussian"
    globally_bounded = False

    def score(self, x, y):
        return x - y

    @staticmethod
    def score_scalar(x, y):
        return x - y

    def score_diff(self, x1, x2, y):
        # Linear score: the per-datum difference cancels the datum exactly.
        return np.broadcast_to(np.asarray(x1 - x2, dtype=float), np.broadcast(x1, np.asarray(y)).shape).copy()

    def score_deriv(self, x, y):
        return np.ones_like(np.broadcast_to(y, np.broadcast(x, y).shape), dtype=float)

    def neg_loglik(self, x, y):
        return 0.5 * (y - x) ** 2 + 0.5 * math.log(2.0 * math.pi)

    def lipschitz_max(self, dataset):
        return np.array([1.0])

    def score_envelope_1d(self, dataset, x, v):
        y = dataset.y
        extreme = y.min() if v > 0 else y.max()
        return v * (x - extreme), 1.0


class LaplaceLocation(_LocationModel):
    """f(y; x) proportional to exp(-|y - x|); weak-derivative score sgn(x - y)."""

    family = "laplace"
    globally_bounded = True

    def score(self, x, y):
        return np.sign(x - y)

    @staticmethod
    def score_scalar(x, y):
        if x > y:
            return 1.0
        return -1.0 if x < y else 0.0

    def score_deriv(self, x, y):
        # Weak derivative is zero away from the kink; curvature checks are
        # restricted to smooth models.
        return np.zeros_like(np.broadcast_to(y, np.broadcast(x, y).shape), dtype=float)

    def neg_loglik(self, x, y):
        return np.abs(y - x) + math.log(2.0)

    def per_datum_bound(self, dataset):
        return np.array([1.0])


class CauchyLocation(_LocationModel):
    """f(y; x) proportional to 1 / (1 + (y - x)^2); score 2(x-y)/(1+(x-y)^2)."""

    family = "cauchy"
    globally_bounded = True

    def score(self, x, y):
        u = x - y
        return 2.0 * u / (1.0 + u * u)

    @staticmethod
    def score_scalar(x, y):
        u = x - y
        return 2.0 * u / (1.0 + u * u)

    def score_deriv(self, x, y):
        u = x - y
        return 2.0 * (1.0 - u * u) / (1.0 + u * u) ** 2

    def neg_loglik(self, x, y):
        return np.log1p((y - x) ** 2) + math.log(math.pi)

    def per_datum_bound(self, dataset):
        return np.array([1.0])  # max_u |2u / (1 + u^2)| = 1 at u = +-1

    def lipschitz_max(self, dataset):
        return np.array([2.0])  # |d s / d x| = |2(1-u^2)|/(1+u^2)^2 <= 2 at u = 0


class LogisticRegression(Model):
    """Bayesian logistic regression: s(x; (w, y)) = w (p(x; w) - y)."""

    family = "logistic"
    globally_bounded = True  # given the observed covariates

    def __init__(self, dim: int, prior: Optional[GaussianPrior] = None):
        self.dim = int(dim)
        self.prior = prior

    def _p(self, dataset, x, idx=None):
        w = dataset.w if idx is None else dataset.w[idx]
        return w, _sigmoid(w @ np.asarray(x, dtype=float))

    def grad_terms(self, dataset, x, idx=None):
        w, p = self._p(dataset, x, idx)
        y = dataset.y if idx is None else dataset.y[idx]
        return w * (p - y)[:, None] + self._prior_share(dataset, x)[None, :]

    def hess_terms(self, dataset, x, idx=None):
        w, p = self._p(dataset, x, idx)
        out = (w[:, :, None] * w[:, None, :]) * (p * (1.0 - p))[:, None, None]
        if self.prior is not None:
            out = out + np.eye(self.dim)[None] / (dataset.n * self.prior.sd**2)
        return out

    def loglik_terms(self, dataset, x, idx=None):
        w = dataset.w if idx is None else dataset.w[idx]
        y = dataset.y if idx is None else dataset.y[idx]
        z = w @ np.asarray(x, dtype=float)
        # log f = y z - log(1 + e^z), computed stably.
        return y * z - np.logaddexp(0.0, z)

    def per_datum_bound(self, dataset):
        return np.max(np.abs(dataset.w), axis=0)  # |p - y| <= 1

    def lipschitz_max(self, dataset):
        wnorm = np.linalg.norm(dataset.w, axis=1)
        return np.max(np.abs(dataset.w) * wnorm[:, None], axis=0) / 4.0


# ---------------------------------------------------------------------------
# Operations


def potential_grad(dataset: Dataset, model: Model, x, ledger=None) -> np.ndarray:
    """Full potential gradient ``sum_j s^j(x)`` (prior included when configured)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    g = model.grad_terms(dataset, x if model.dim > 1 else float(x[0])).sum(axis=0)
    if ledger is not None:
        ledger.grad_term_evals += dataset.n
    return g


def observed_information(dataset: Dataset, model: Model, x) -> np.ndarray:
    """Averaged curvature ``n^-1 sum_j s'^j(x)`` as a symmetric (d, d) matrix."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = model.hess_terms(dataset, x if model.dim > 1 else float(x[0])).mean(axis=0)
    return 0.5 * (h + h.T)


def fit_mle(dataset: Dataset, model: Model, max_steps: int = 100, tol_factor: float = 1e-10) -> np.ndarray:
    """Maximum-likelihood estimate solving ``sum_j s^j(x) = 0``.

    Gaussian and Laplace use their closed forms; Cauchy runs Newton from the
    median with a bisection fallback; logistic runs Newton with the analytic
    Hessian and raises ``Separation`` when the iterates diverge.
    """
    n = dataset.n
    tol = tol_factor * n
    if isinstance(model, GaussianLocation):
        xhat = np.array([float(np.mean(dataset.y))])
    elif isinstance(model, LaplaceLocation):
        ys = np.sort(dataset.y)
        if n % 2 == 1:
            xhat = np.array([float(ys[n // 2])])
        else:
            # Midpoint of the median interval: the only deterministic choice
            # with a vanishing sign sum under the s(x; x) = 0 convention.
            xhat = np.array([0.5 * (ys[n // 2 - 1] + ys[n // 2])])
    elif isinstance(model, CauchyLocation):
        xhat = _cauchy_mle(dataset, model, max_steps, tol)
    elif isinstance(model, LogisticRegression):
        xhat = _logistic_mle(dataset, model, max_steps, tol)
    else:
        raise NotImplementedError(f"no MLE routine for {type(model).__name__}")
    # First-order condition check (prior excluded: the estimator is the MLE).
    g = potential_grad(dataset, model, xhat)
    if model.prior is not None:
        g = g - model.prior.grad(xhat)
    resid = np.max(np.abs(g))
    if resid > tol:
        raise NonConvergence(f"score residual {resid:.3g} exceeds {tol:.3g}")
    return xhat


def _cauchy_mle(dataset, model, max_steps, tol):
    y = dataset.y

    def score_sum(x):
        return float(np.sum(model.score(x, y)))

    x = float(np.median(y))
    for _ in range(max_steps):
        g = score_sum(x)
        if abs(g) <= 0.5 * tol:
            return np.array([x])
        h = float(np.sum(model.score_deriv(x, y)))
        if h <= 0:
            break
        step = g / h
        x_new = x - step
        if not np.isfinite(x_new):
            break
        if abs(x_new - x) < 1e-16 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    if abs(score_sum(x)) <= tol:
        return np.array([x])
    # Bisection: the score sum is negative left of all data, positive right.
    lo, hi = float(y.min()) - 1.0, float(y.max()) + 1.0
    glo = score_sum(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gmid = score_sum(mid)
        if abs(gmid) <= tol:
            return np.array([mid])
        if (gmid < 0) == (glo < 0):
            lo, glo = mid, gmid
        else:
            hi = mid
    raise NonConvergence("Cauchy MLE bisection stalled")


def _logistic_mle(dataset, model, max_steps, tol, divergence_norm=50.0):
    # Iterates past ``divergence_norm`` mean fitted probabilities pinned at
    # 0/1 on unit-scale covariates: (quasi-)separation, not a finite MLE.
    x = np.zeros(model.dim)
    for _ in range(max_steps):
        g = model.grad_terms(dataset, x).sum(axis=0)
        h = model.hess_terms(dataset, x).sum(axis=0)
        if model.prior is not None:
            # Newton solves the likelihood equations; strip the prior share.
            g = g - model.prior.grad(x)
            h = h - np.eye(model.dim) / model.prior.sd**2
        if np.max(np.abs(g)) <= tol:
            return x
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError as exc:
            raise Separation("singular Hessian; data look separable") from exc
        x = x - step
        if np.linalg.norm(x) > divergence_norm:
            raise Separation("diverging iterates; data look separable")
    raise NonConvergence(f"logistic Newton did not converge in {max_steps} steps")


@dataclass(frozen=True)
class KLMinimizerResult:
    x0: np.ndarray
    stderr: float
    method: str


def kl_minimizer(truth, model: Model, mc_budget: int = 200_000, rng_seed: int = 0) -> KLMinimizerResult:
    """Minimizer of ``-E_P log f(Y; x)``; stored truth when well-specified."""
    if truth.matches(model) and truth.x0 is not None:
        return KLMinimizerResult(np.atleast_1d(truth.x0), 0.0, "stored")
    if isinstance(model, GaussianLocation) and isinstance(truth, LocationTruth):
        mean = float(truth.frozen().mean())
        if math.isfinite(mean):
            return KLMinimizerResult(np.array([mean]), 0.0, "analytic")
    # Monte Carlo: the MLE of a large synthetic sample minimizes the MC KL.
    rng = np.random.default_rng(rng_seed)
    data = generate_data(truth, mc_budget, rng)
    try:
        xhat = fit_mle(data, model)
    except NonConvergence as exc:
        raise NonConvergence("KL minimizer search failed") from exc
    s = model.grad_terms(data, xhat if model.dim > 1 else float(xhat[0]))
    h = model.hess_terms(data, xhat if model.dim > 1 else float(xhat[0])).mean(axis=0)
    cov = np.linalg.inv(h) @ np.cov(s.T).reshape(model.dim, model.dim) @ np.linalg.inv(h)
    stderr = float(np.sqrt(np.max(np.diag(cov)) / mc_budget))
    return KLMinimizerResult(xhat, stderr, "monte_carlo")


def information(model: Model, truth, mc_budget: int = 1_000_000, rng_seed: int = 1234) -> np.ndarray:
    """Fisher-type information ``I(x0) = E_P s'(x0; Y)`` for the given pair.

    Analytic for the well-specified location families; Monte Carlo otherwise.
    """
    if isinstance(truth, LocationTruth) and truth.matches(model):
        if isinstance(model, GaussianLocation):
            return np.array([[1.0]])
        if isinstance(model, LaplaceLocation):
            return np.array([[1.0]])  # d/dx E[sgn(x - Y)] = 2 f(x0) = 1
        if isinstance(model, CauchyLocation):
            return np.array([[0.5]])
    x0 = kl_minimizer(truth, model).x0
    rng = np.random.default_rng(rng_seed)
    data = generate_data(truth, mc_budget, rng)
    return observed_information(data, model, x0)
