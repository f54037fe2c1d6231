"""Synthetic problem families with exact oracles.

Two families: random quadratic losses f_i(x) = x'A_i x/2 - b_i'x and
l2-regularized logistic regression. Each instance carries its minimizer,
Hessian, the normalized Gram matrix of per-sample gradients at the
minimizer, and smoothness constants, so optimizer trajectories and
confidence procedures can be checked against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rand import RngStream

__all__ = [
    "QuadraticProblem",
    "LogisticProblem",
    "ProblemInstance",
    "generate_quadratic",
    "generate_logistic",
    "minibatch_gradient",
    "full_gradient",
    "hessian_at",
    "save_problem",
    "load_problem",
]


@dataclass
class QuadraticProblem:
    """N random quadratic component losses with a shared exact minimizer.

    a_mats[i] is symmetric positive definite; x_star solves the first-order
    condition sum(A_i) x = sum(b_i). sigma_hat is the mean Hessian. mu/ell
    are the average extreme curvatures across component losses, the values
    the tuning rules (adaptive momentum, optimal hyperparameters) consume;
    the exact spectrum of sigma_hat is available via hessian_spectrum().
    sigma2 is the mean squared norm of per-sample gradients at x_star and
    omega the per-sample gradient Gram matrix normalized by N*sigma2 (so
    trace(omega) = 1).
    """

    a_mats: np.ndarray
    b_vecs: np.ndarray
    x_star: np.ndarray
    sigma_hat: np.ndarray
    mu: float
    ell: float
    sigma2: float
    omega: np.ndarray
    seed: int
    rho: float
    diag_shift: float

    family = "quadratic"

    @property
    def n_samples(self) -> int:
        return self.a_mats.shape[0]

    @property
    def dim(self) -> int:
        return self.a_mats.shape[1]

    def hessian_spectrum(self):
        from .spectrum import HessianSpectrum

        return HessianSpectrum.from_matrix(self.sigma_hat)

    def tuning_spectrum(self):
        from .spectrum import HessianSpectrum

        return HessianSpectrum.from_extremes(self.mu, self.ell)

    def per_sample_gradient(self, x: np.ndarray, i: int) -> np.ndarray:
        return self.a_mats[i] @ x - self.b_vecs[i]

    def minibatch_gradient(self, x: np.ndarray, indices: np.ndarray) -> np.ndarray:
        return self.a_mats[indices].mean(axis=0) @ x - self.b_vecs[indices].mean(axis=0)

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.sigma_hat @ x - self._b_mean

    def hessian_at(self, x: np.ndarray) -> np.ndarray:
        return self.sigma_hat

    def loss(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.sigma_hat @ x - self._b_mean @ x)

    def per_sample_loss(self, x: np.ndarray, i: int) -> float:
        return float(0.5 * x @ self.a_mats[i] @ x - self.b_vecs[i] @ x)

    def __post_init__(self):
        self._b_mean = self.b_vecs.mean(axis=0)


@dataclass
class LogisticProblem:
    """l2-regularized logistic regression on generated (features, labels).

    Per-sample loss: log(1 + exp(x'a_i)) - b_i x'a_i + nu ||x||^2 / 2 with
    labels b_i in {0, 1}. x_star is found by full-batch gradient descent to
    gradient norm <= 1e-10. sigma_at_star is the Hessian there; mu/ell its
    extreme eigenvalues (the tuning values for this family). lbar bounds the
    Hessian's Lipschitz modulus, lf the gradient's.
    """

    features: np.ndarray
    labels: np.ndarray
    nu: float
    x_star: np.ndarray
    sigma_at_star: np.ndarray
    mu: float
    ell: float
    sigma2: float
    omega: np.ndarray
    lbar: float
    lf: float
    seed: int

    family = "logistic"

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def hessian_spectrum(self):
        from .spectrum import HessianSpectrum

        return HessianSpectrum.from_matrix(self.sigma_at_star)

    def tuning_spectrum(self):
        from .spectrum import HessianSpectrum

        return HessianSpectrum.from_extremes(self.mu, self.ell)

    def _probs(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        return _sigmoid(a @ x)

    def per_sample_gradient(self, x: np.ndarray, i: int) -> np.ndarray:
        a = self.features[i]
        return (_sigmoid(a @ x) - self.labels[i]) * a + self.nu * x

    def minibatch_gradient(self, x: np.ndarray, indices: np.ndarray) -> np.ndarray:
        a = self.features[indices]
        p = _sigmoid(a @ x)
        return a.T @ (p - self.labels[indices]) / len(indices) + self.nu * x

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        p = _sigmoid(self.features @ x)
        return self.features.T @ (p - self.labels) / self.n_samples + self.nu * x

    def hessian_at(self, x: np.ndarray) -> np.ndarray:
        a = self.features
        w = _sigmoid(a @ x)
        w = w * (1.0 - w)
        return (a * w[:, None]).T @ a / self.n_samples + self.nu * np.eye(self.dim)

    def loss(self, x: np.ndarray) -> float:
        z = self.features @ x
        return float(
            np.mean(np.logaddexp(0.0, z) - self.labels * z) + 0.5 * self.nu * x @ x
        )

    def per_sample_loss(self, x: np.ndarray, i: int) -> float:
        z = float(self.features[i] @ x)
        return math.log1p(math.exp(-abs(z))) + max(z, 0.0) - self.labels[i] * z + 0.5 * self.nu * float(x @ x)


ProblemInstance = QuadraticProblem | LogisticProblem


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _resolve_stream(seed) -> tuple[RngStream, int]:
    if isinstance(seed, RngStream):
        return seed, seed.seed
    return RngStream(int(seed)), int(seed)


def generate_quadratic(
    n_samples: int, dim: int, rho: float, diag_shift: float, seed
) -> QuadraticProblem:
    """Random quadratic family A_i = rho V_i'V_i + diag_shift I, b_i ~ N(0, I).

    Rows of each V_i are standard normal d-vectors. The minimizer solves
    sum(A_i) x = sum(b_i). mu/ell are the means over i of the extreme
    eigenvalues of A_i.
    """
    if n_samples < dim:
        raise ValueError("n_samples must be >= dim")
    if diag_shift <= 0:
        raise ValueError("diag_shift must be positive")
    stream, seed_val = _resolve_stream(seed)
    v = stream.standard_normal((n_samples, dim, dim))
    a_mats = rho * np.einsum("nij,nik->njk", v, v) + diag_shift * np.eye(dim)
    b_vecs = stream.standard_normal((n_samples, dim))
    try:
        x_star = np.linalg.solve(a_mats.sum(axis=0), b_vecs.sum(axis=0))
    except np.linalg.LinAlgError as exc:  # diag_shift > 0 makes this unreachable
        raise RuntimeError("singular mean Hessian during generation") from exc
    sigma_hat = a_mats.mean(axis=0)
    per_sample_ev = np.linalg.eigvalsh(a_mats)
    grads = np.einsum("nij,j->ni", a_mats, x_star) - b_vecs
    sigma2 = float(np.mean(np.sum(grads * grads, axis=1)))
    omega = grads.T @ grads / (n_samples * sigma2)
    return QuadraticProblem(
        a_mats=a_mats,
        b_vecs=b_vecs,
        x_star=x_star,
        sigma_hat=sigma_hat,
        mu=float(per_sample_ev[:, 0].mean()),
        ell=float(per_sample_ev[:, -1].mean()),
        sigma2=sigma2,
        omega=omega,
        seed=seed_val,
        rho=float(rho),
        diag_shift=float(diag_shift),
    )


class GenerationError(RuntimeError):
    pass


def _minimize_full_batch(features, labels, nu, tol=1e-10, max_iters=100_000):
    """Gradient descent with backtracking to gradient norm <= tol.

    The Armijo test carries a small absolute slack so rounding in the loss
    difference cannot stall the halving loop near machine precision; a step
    floor guards the same way. Any convergent step sequence yields the same
    minimizer by strict convexity.
    """
    n, d = features.shape

    def grad(x):
        p = _sigmoid(features @ x)
        return features.T @ (p - labels) / n + nu * x

    def loss(x):
        z = features @ x
        return float(np.mean(np.logaddexp(0.0, z) - labels * z) + 0.5 * nu * x @ x)

    x = np.zeros(d)
    for it in range(max_iters):
        g = grad(x)
        gn2 = float(g @ g)
        if math.sqrt(gn2) <= tol:
            return x, it
        f0 = loss(x)
        step = 1.0
        slack = 8e-16 * max(1.0, abs(f0))
        while step > 1e-12 and loss(x - step * g) > f0 - 0.5 * step * gn2 + slack:
            step *= 0.5
        x = x - step * g
    gn = float(np.linalg.norm(grad(x)))
    raise GenerationError(
        f"full-batch descent did not reach gradient norm {tol} in {max_iters} "
        f"iterations (final norm {gn:.3e})"
    )


def generate_logistic(
    n_samples: int, dim: int, x_true: np.ndarray, nu: float, seed
) -> LogisticProblem:
    """Logistic family: a_i ~ N(0, I), labels Bernoulli(sigmoid(x_true'a_i)).

    The smoothness constants follow the per-sample curvature bounds:
    lbar = (sqrt(3)/6) mean ||a||^3 + nu, lf = mean ||a||^2 + nu.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if nu < 0:
        raise ValueError("nu must be >= 0")
    x_true = np.asarray(x_true, dtype=float)
    if x_true.shape != (dim,):
        raise ValueError("x_true must have shape (dim,)")
    stream, seed_val = _resolve_stream(seed)
    features = stream.standard_normal((n_samples, dim))
    labels = stream.bernoulli(_sigmoid(features @ x_true))
    x_star, _ = _minimize_full_batch(features, labels, nu)
    p = _sigmoid(features @ x_star)
    w = p * (1.0 - p)
    sigma_at_star = (features * w[:, None]).T @ features / n_samples + nu * np.eye(dim)
    ev = np.linalg.eigvalsh(sigma_at_star)
    if ev[0] <= 0:
        raise GenerationError(
            f"Hessian at the minimizer is not positive definite (lambda_min={ev[0]:.3e}); "
            "increase nu or n_samples"
        )
    grads = (p - labels)[:, None] * features + nu * x_star
    sigma2 = float(np.mean(np.sum(grads * grads, axis=1)))
    omega = grads.T @ grads / (n_samples * sigma2)
    norms = np.linalg.norm(features, axis=1)
    return LogisticProblem(
        features=features,
        labels=labels,
        nu=float(nu),
        x_star=x_star,
        sigma_at_star=sigma_at_star,
        mu=float(ev[0]),
        ell=float(ev[-1]),
        sigma2=sigma2,
        omega=omega,
        lbar=float(math.sqrt(3.0) / 6.0 * np.mean(norms**3) + nu),
        lf=float(np.mean(norms**2) + nu),
        seed=seed_val,
    )


def minibatch_gradient(problem: ProblemInstance, x: np.ndarray, indices) -> np.ndarray:
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() >= problem.n_samples):
        raise IndexError("batch indices out of range")
    return problem.minibatch_gradient(x, indices)


def full_gradient(problem: ProblemInstance, x: np.ndarray) -> np.ndarray:
    return problem.full_gradient(x)


def hessian_at(problem: ProblemInstance, x: np.ndarray) -> np.ndarray:
    return problem.hessian_at(x)


def save_problem(problem: ProblemInstance, path: str) -> None:
    """Binary dump (npz) with enough metadata to reload without regeneration."""
    if problem.family == "quadratic":
        np.savez_compressed(
            path,
            family="quadratic",
            seed=problem.seed,
            rho=problem.rho,
            diag_shift=problem.diag_shift,
            a_mats=problem.a_mats,
            b_vecs=problem.b_vecs,
        )
    else:
        np.savez_compressed(
            path,
            family="logistic",
            seed=problem.seed,
            nu=problem.nu,
            features=problem.features,
            labels=problem.labels,
            x_star=problem.x_star,
        )


def load_problem(path: str) -> ProblemInstance:
    data = np.load(path, allow_pickle=False)
    family = str(data["family"])
    if family == "quadratic":
        a_mats, b_vecs = data["a_mats"], data["b_vecs"]
        n, d = b_vecs.shape
        x_star = np.linalg.solve(a_mats.sum(axis=0), b_vecs.sum(axis=0))
        per_sample_ev = np.linalg.eigvalsh(a_mats)
        grads = np.einsum("nij,j->ni", a_mats, x_star) - b_vecs
        sigma2 = float(np.mean(np.sum(grads * grads, axis=1)))
        return QuadraticProblem(
            a_mats=a_mats,
            b_vecs=b_vecs,
            x_star=x_star,
            sigma_hat=a_mats.mean(axis=0),
            mu=float(per_sample_ev[:, 0].mean()),
            ell=float(per_sample_ev[:, -1].mean()),
            sigma2=sigma2,
            omega=grads.T @ grads / (n * sigma2),
            seed=int(data["seed"]),
            rho=float(data["rho"]),
            diag_shift=float(data["diag_shift"]),
        )
    if family == "logistic":
        features, labels = data["features"], data["labels"]
        n, d = features.shape
        nu = float(data["nu"])
        x_star = data["x_star"]
        p = _sigmoid(features @ x_star)
        w = p * (1.0 - p)
        sigma_at_star = (features * w[:, None]).T @ features / n + nu * np.eye(d)
        ev = np.linalg.eigvalsh(sigma_at_star)
        grads = (p - labels)[:, None] * features + nu * x_star
        sigma2 = float(np.mean(np.sum(grads * grads, axis=1)))
        norms = np.linalg.norm(features, axis=1)
        return LogisticProblem(
            features=features,
            labels=labels,
            nu=nu,
            x_star=x_star,
            sigma_at_star=sigma_at_star,
            mu=float(ev[0]),
            ell=float(ev[-1]),
            sigma2=sigma2,
            omega=grads.T @ grads / (n * sigma2),
            lbar=float(math.sqrt(3.0) / 6.0 * np.mean(norms**3) + nu),
            lf=float(np.mean(norms**2) + nu),
            seed=int(data["seed"]),
        )
    raise ValueError(f"unknown problem family {family!r}")
