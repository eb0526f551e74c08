"""In-context linear regression with a one-layer linear self-attention learner.

A prompt packs n samples of a noiseless linear regression problem into a
(2d+2) x (n+1) matrix; the learner repeatedly appends an updated query
token and the estimate is read out of rows d+2..2d+1 (1-indexed) of the
last token.  Three computational paths produce the same estimate:

  1. attention rollout  -- attn_step applied k times, then extract;
  2. moment recursion   -- w <- w + V (S W w - u) on the empirical moments
                           S = X X^T / n, u = X y / n, starting from 0;
  3. closed form        -- w_k = -(sum_t (I + V S W)^t) V u.

With population moments (S = Sigma, u = Sigma beta) path 3 becomes the
infinite-context limit, for which the in/out-of-distribution losses are
available in closed form when the trainable pair (V, W) shares an
orthogonal eigenbasis and the covariances are isotropic.

Convention: the update adds V (S W w - u).  For (V, W) = (-eta I, I) this
is one gradient-descent step w - eta (S w - u) on the in-context squared
loss, where eta absorbs the factor 2 of the mean-squared-error gradient
2 (S w - u).  All etas in this module follow that absorbed convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class RegressionTask:
    """One regression problem: covariance of x and true coefficients."""

    sigma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("sigma must be square")
        if not np.allclose(s, s.T, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        if np.linalg.eigvalsh(s).min() < -1e-10:
            raise ValueError("sigma must be positive semidefinite")
        if np.asarray(self.beta).shape != (s.shape[0],):
            raise ValueError("beta must be a d-vector")

    @property
    def d(self) -> int:
        return self.beta.shape[0]


def isotropic_task(gamma: float, beta: np.ndarray) -> RegressionTask:
    beta = np.asarray(beta, dtype=float)
    return RegressionTask(gamma * np.eye(beta.shape[0]), beta)


@dataclass(frozen=True)
class SampledDataset:
    """n noiseless samples: X is d x n, y_i = x_i . beta."""

    X: np.ndarray
    y: np.ndarray


def sample_dataset(task: RegressionTask, n: int, rng: np.random.Generator) -> SampledDataset:
    evals, evecs = np.linalg.eigh(task.sigma)
    root = evecs @ np.diag(np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
    X = root @ rng.standard_normal((task.d, n))
    return SampledDataset(X, X.T @ task.beta)


def empirical_moments(dataset: SampledDataset) -> tuple[np.ndarray, np.ndarray]:
    n = dataset.X.shape[1]
    return dataset.X @ dataset.X.T / n, dataset.X @ dataset.y / n


@dataclass
class PromptMatrix:
    """(2d+2) x ell prompt; the last column is the current query token."""

    entries: np.ndarray
    d: int

    def __post_init__(self):
        if self.entries.shape[0] != 2 * self.d + 2 or self.entries.shape[1] < 1:
            raise ValueError("prompt must be (2d+2) x ell with ell >= 1")

    @property
    def ell(self) -> int:
        return self.entries.shape[1]


def build_prompt(dataset: SampledDataset) -> PromptMatrix:
    """Lay out [X/sqrt(n); y^T/sqrt(n); 0; 0] plus a query column (0,...,0,1)."""
    d, n = dataset.X.shape
    if n < 1:
        raise ValueError("need at least one sample")
    entries = np.zeros((2 * d + 2, n + 1))
    entries[:d, :n] = dataset.X / math.sqrt(n)
    entries[d, :n] = dataset.y / math.sqrt(n)
    entries[2 * d + 1, n] = 1.0
    return PromptMatrix(entries, d)


@dataclass(frozen=True)
class AttnParams:
    """Trainable pair (V, W) in a shared orthogonal eigenbasis.

    V = basis diag(v) basis^T premultiplies the moment correction;
    W = basis diag(w) basis^T mixes the running estimate into it.
    Sharing the basis keeps V and W commuting and makes the per-coordinate
    loss decoupling exact.
    """

    basis: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.basis, dtype=float)
        d = u.shape[0]
        if u.shape != (d, d) or self.v.shape != (d,) or self.w.shape != (d,):
            raise ValueError("basis must be d x d and v, w d-vectors")
        if np.abs(u.T @ u - np.eye(d)).max() > ORTHO_TOL:
            raise ValueError("basis must be orthogonal")

    @property
    def d(self) -> int:
        return self.v.shape[0]

    def v_matrix(self) -> np.ndarray:
        return self.basis @ np.diag(self.v) @ self.basis.T

    def w_matrix(self) -> np.ndarray:
        return self.basis @ np.diag(self.w) @ self.basis.T

    @classmethod
    def isotropic(cls, d: int, v_scale: float, w_scale: float) -> "AttnParams":
        return cls(np.eye(d), np.full(d, float(v_scale)), np.full(d, float(w_scale)))


def _tilde_v(params: AttnParams) -> np.ndarray:
    # rows d+2..2d+1 receive V applied to the first d rows
    d = params.d
    out = np.zeros((2 * d + 2, 2 * d + 2))
    out[d + 1 : 2 * d + 1, :d] = params.v_matrix()
    return out


def _tilde_w(params: AttnParams) -> np.ndarray:
    # first d rows read W times rows d+2..2d+1; row d+1 reads -1 times the constant
    d = params.d
    out = np.zeros((2 * d + 2, 2 * d + 2))
    out[:d, d + 1 : 2 * d + 1] = params.w_matrix()
    out[d, 2 * d + 1] = -1.0
    return out


def attn_step(prompt: PromptMatrix, params: AttnParams) -> PromptMatrix:
    """Append the residual-updated last token: M_new_col = M[:,l] + Vt M M^T Wt M[:,l]."""
    if params.d != prompt.d:
        raise DimensionMismatch(f"params d={params.d} vs prompt d={prompt.d}")
    entries = prompt.entries
    last = entries[:, -1]
    update = _tilde_v(params) @ (entries @ (entries.T @ (_tilde_w(params) @ last)))
    return PromptMatrix(np.column_stack([entries, last + update]), prompt.d)


def extract(prompt: PromptMatrix) -> np.ndarray:
    """Rows d+2..2d+1 (1-indexed) of the last token: the current estimate."""
    d = prompt.d
    return prompt.entries[d + 1 : 2 * d + 1, -1].copy()


def moment_recursion(
    sigma_hat: np.ndarray, u_hat: np.ndarray, params: AttnParams, k: int
) -> np.ndarray:
    """Iterate w <- w + V (S W w - u) k times from w = 0."""
    if k < 0:
        raise ValueError("k >= 0 required")
    V, W = params.v_matrix(), params.w_matrix()
    w = np.zeros_like(u_hat, dtype=float)
    for _ in range(k):
        w = w + V @ (sigma_hat @ (W @ w) - u_hat)
    return w


def closed_form_finite(
    sigma_hat: np.ndarray, u_hat: np.ndarray, params: AttnParams, k: int
) -> np.ndarray:
    """Evaluate -(sum_{t<k} (I + V S W)^t) V u by repeated multiplication.

    u_hat may be a (d,) vector or a (d, m) batch of right-hand sides.
    """
    if k < 0:
        raise ValueError("k >= 0 required")
    V, W = params.v_matrix(), params.w_matrix()
    A = np.eye(params.d) + V @ sigma_hat @ W
    total = np.zeros_like(np.asarray(u_hat, dtype=float))
    term = V @ u_hat
    for _ in range(k):
        total = total + term
        term = A @ term
    return -total


def infinite_context_predict(task: RegressionTask, params: AttnParams, k: int) -> np.ndarray:
    """Deterministic large-n limit: the closed form on population moments."""
    return closed_form_finite(task.sigma, task.sigma @ task.beta, params, k)


def infinite_context_error_matrix(sigma: np.ndarray, params: AttnParams, k: int) -> np.ndarray:
    """E with limit(w_k) - beta = E beta, namely -(sum_{t<k} A^t V Sigma + I)."""
    V, W = params.v_matrix(), params.w_matrix()
    d = params.d
    A = np.eye(d) + V @ sigma @ W
    total = np.zeros((d, d))
    term = V @ sigma
    for _ in range(k):
        total = total + term
        term = A @ term
    return -(total + np.eye(d))


@dataclass(frozen=True)
class TwoPointFamily:
    """Training family: isotropic covariance scale drawn uniformly from {gamma1, gamma2}."""

    gamma1: float
    gamma2: float

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("scales must be positive")
        if self.gamma1 == self.gamma2:
            raise ValueError("scales must differ")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.gamma1 + self.gamma2)

    @property
    def half_gap(self) -> float:
        return 0.5 * abs(self.gamma1 - self.gamma2)


def _require_even(k: int):
    if k < 2 or k % 2:
        raise ValueError("this quantity is defined for even k >= 2 only")


def error_coefficients(params: AttnParams, gamma: float, k: int) -> np.ndarray:
    """Per-coordinate scalars A_i with limit(w_k) - beta = -A_i beta_i in the shared basis.

    A_i = 1 + ((1 + g v_i w_i)^k - 1)/w_i for w_i != 0, and 1 + k g v_i at
    the w_i = 0 degeneracy.
    """
    if k < 1:
        raise ValueError("k >= 1 required")
    v, w = params.v, params.w
    out = np.empty_like(v, dtype=float)
    nz = w != 0
    x = 1.0 + gamma * v[nz] * w[nz]
    out[nz] = 1.0 + (x**k - 1.0) / w[nz]
    out[~nz] = 1.0 + k * gamma * v[~nz]
    return out


def id_loss(params: AttnParams, family: TwoPointFamily, k: int) -> float:
    """Infinite-context training loss: average of |A_gamma|^2 over the two scales."""
    a1 = error_coefficients(params, family.gamma1, k)
    a2 = error_coefficients(params, family.gamma2, k)
    return 0.5 * float(a1 @ a1) + 0.5 * float(a2 @ a2)


def id_minimizer_params(family: TwoPointFamily, k: int, d: int = 1) -> AttnParams:
    """The unique training-loss minimizer for even k: isotropic, in closed form.

    W* = (1 - (b/a)^k) I and V* = -1/(a (1 - (b/a)^k)) I, where a is the
    midpoint of the two training scales and b their half-gap.
    """
    _require_even(k)
    a, b = family.midpoint, family.half_gap
    shrink = 1.0 - (b / a) ** k
    return AttnParams.isotropic(d, -1.0 / (a * shrink), shrink)


def ood_loss_formula(family: TwoPointFamily, gamma_q: float, k: int, d: int) -> float:
    """Evaluation loss of the minimizer at a new scale: d ((a-g)^k - b^k)^2 / (a^k - b^k)^2.

    Evaluated through the ratios (a-g)/a and b/a so large k cannot overflow.
    """
    _require_even(k)
    a, b = family.midpoint, family.half_gap
    if not (0 < gamma_q < family.gamma1 + family.gamma2) or gamma_q in (family.gamma1, family.gamma2):
        raise ValueError("gamma_q must lie in (0, gamma1+gamma2) away from the training scales")
    r = (a - gamma_q) / a
    s = b / a
    return d * ((r**k - s**k) / (1.0 - s**k)) ** 2


def ood_loss_of_params(params: AttnParams, gamma_q: float, k: int) -> float:
    """Evaluation loss |A_{gamma_q}|^2 of arbitrary params (point mass at gamma_q)."""
    aq = error_coefficients(params, gamma_q, k)
    return float(aq @ aq)


@dataclass(frozen=True)
class GdDistance:
    """Squared distance to the family {(-eta I, I) : eta > 0}."""

    value: float
    eta: float | None
    attained: bool


def dist_to_gd(params: AttnParams) -> GdDistance:
    """inf over eta > 0 of |V + eta I|_F^2 + |W - I|_F^2, in closed form.

    The optimum over all real eta is eta* = -trace(V)/d; when eta* <= 0 the
    infimum over the open half-line is the eta -> 0+ limit |V|_F^2 + |W-I|_F^2
    and is not attained.
    """
    v, w = params.v, params.w
    w_part = float((w - 1.0) @ (w - 1.0))
    eta_star = -float(v.mean())
    if eta_star > 0:
        return GdDistance(float((v + eta_star) @ (v + eta_star)) + w_part, eta_star, True)
    return GdDistance(float(v @ v) + w_part, None, False)


def gd_step_deviation(
    v_scale: float, w_scale: float, eta: float, trials: int, rng: np.random.Generator
) -> float:
    """Max gap between the one-step update of (v I, w I) and w - eta (S w - u).

    Each trial builds a real prompt, plants a random current iterate in a
    generated token, runs one attention step through the block matrices, and
    compares the extracted estimate with the explicit step on the empirical
    moments.  Exercises the block algebra, not the recursion shortcut.
    """
    worst = 0.0
    for _ in range(trials):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(1, 9))
        params = AttnParams.isotropic(d, v_scale, w_scale)
        task = isotropic_task(float(rng.uniform(0.2, 3.0)), rng.standard_normal(d))
        ds = sample_dataset(task, n, rng)
        prompt = build_prompt(ds)
        w_t = rng.standard_normal(d)
        planted = np.zeros(2 * d + 2)
        planted[d + 1 : 2 * d + 1] = w_t
        planted[2 * d + 1] = 1.0
        prompt = PromptMatrix(np.column_stack([prompt.entries, planted]), d)
        stepped = extract(attn_step(prompt, params))
        s_hat, u_hat = empirical_moments(ds)
        gd = w_t - eta * (s_hat @ w_t - u_hat)
        worst = max(worst, float(np.abs(stepped - gd).max()))
    return worst


def verify_gd_params(eta: float, trials: int = 100, rng_seed: int = 0) -> bool:
    """Check that (-eta I, I) implements the (convention-absorbed) GD step uniformly."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    rng = np.random.default_rng(rng_seed)
    return gd_step_deviation(-eta, 1.0, eta, trials, rng) < 1e-10
