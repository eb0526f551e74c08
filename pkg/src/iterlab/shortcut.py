"""Regularized ERM split into a structured channel and a shortcut channel.

Inputs are sign vectors u in {+-1}^p; the training distribution is uniform
on the half-cube with u_1 = +1 (U_P), evaluation on the opposite half
(U_Q).  The target is linear, z(u) = theta . u with theta >= 0.  The
learner combines

  * a structured channel g(u) = sum_i w_i^k u_i with box-constrained
    per-coordinate rates 0 <= w_i <= tau, penalized by lam * |w|^2, and
  * a shortcut channel h(u) = b(u), a free table on the cube under the
    Kronecker-delta kernel, penalized by lam * sum_u b(u)^2.

Both losses are exact: E[u_i u_j] = delta_ij on either half-cube, so every
quadratic average reduces to a coefficient-space sum (enumeration is kept
as a cross-check path).  Eliminating the shortcut in closed form reduces
the joint problem to p independent one-dimensional minimizations, solved
by dense grid plus local refinement; a joint grid oracle validates the
reduction for small p.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, InvariantViolation

GRID_POINTS = 10_000  # per-coordinate solver grid
ORACLE_GRID = 200  # per-axis joint oracle grid
P_CAP = 20
ORACLE_P_CAP = 3


@dataclass(frozen=True)
class ShortcutConfig:
    """Problem instance: cube dimension, target, rate cap, ridge weight, iteration count."""

    p: int
    theta: tuple[float, ...]
    tau: float
    lam: float
    k: int

    def __post_init__(self):
        if not 1 <= self.p <= P_CAP:
            raise ValueError(f"p must lie in [1, {P_CAP}]")
        if len(self.theta) != self.p or any(t < 0 for t in self.theta):
            raise ValueError("theta must be a nonnegative p-vector")
        if not self.tau > 1:
            raise ValueError("tau must exceed 1")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.k < 1:
            raise ValueError("k must be a positive integer")

    @property
    def m(self) -> int:
        """Half-cube size 2^(p-1)."""
        return 2 ** (self.p - 1)

    @property
    def shrink(self) -> float:
        """lam*M / (1 + lam*M): weight of the residual term after shortcut elimination."""
        lm = self.lam * self.m
        return lm / (1.0 + lm)


def train_vertices(p: int) -> list[tuple[int, ...]]:
    """U_P: sign vectors with first coordinate +1, in a fixed deterministic order."""
    return [(1, *rest) for rest in itertools.product((1, -1), repeat=p - 1)]


def eval_vertices(p: int) -> list[tuple[int, ...]]:
    """U_Q: sign vectors with first coordinate -1."""
    return [(-1, *rest) for rest in itertools.product((1, -1), repeat=p - 1)]


def half_cube_average_identity(c: np.ndarray) -> tuple[float, float]:
    """Enumerated averages of (c . u)^2 over U_P and U_Q; both equal |c|^2 exactly."""
    p = len(c)
    up = np.array(train_vertices(p), dtype=float)
    uq = np.array(eval_vertices(p), dtype=float)
    return float(((up @ c) ** 2).mean()), float(((uq @ c) ** 2).mean())


def epsilon_k(config: ShortcutConfig) -> float:
    """Best training loss of the structured channel alone: sum ((theta_i - tau^k)_+)^2."""
    cap = config.tau**config.k
    return float(sum(max(t - cap, 0.0) ** 2 for t in config.theta))


def rho_k(config: ShortcutConfig) -> float:
    """Penalty of the best structured fit: lam * sum theta_i^(2/k), with 0^(2/k) = 0."""
    return config.lam * float(
        sum(t ** (2.0 / config.k) if t > 0 else 0.0 for t in config.theta)
    )


def delta_k(config: ShortcutConfig) -> float:
    """Best regularized training objective of the shortcut alone: (lam M/(1+lam M)) |theta|^2.

    Independent of k in this instantiation.
    """
    return config.shrink * float(sum(t * t for t in config.theta))


def sandwich_constants(config: ShortcutConfig) -> tuple[float, float]:
    """Sandwich constants (C1, C2) = (1, 4 + 6/(lam M)) for this instantiation."""
    return 1.0, 4.0 + 6.0 / (config.lam * config.m)


@dataclass
class StructuredWeights:
    """Box-constrained per-coordinate rates; the channel realizes alpha_i = w_i^k."""

    w: np.ndarray
    k: int

    @property
    def alpha(self) -> np.ndarray:
        return self.w**self.k


@dataclass
class ShortcutValues:
    """Shortcut table supported on U_P (implicitly 0 elsewhere)."""

    p: int
    values: dict[tuple[int, ...], float]

    def __post_init__(self):
        support = set(train_vertices(self.p))
        bad = set(self.values) - support
        if bad:
            raise ValueError(f"shortcut support must lie in the training half-cube: {sorted(bad)[:3]}")

    def norm_sq(self) -> float:
        return float(sum(v * v for v in self.values.values()))


@dataclass
class BoundsReport:
    """Solver outputs next to the sandwich-bound ingredients."""

    epsilon_k: float
    rho_k: float
    delta_k: float
    c1: float
    c2: float
    id_loss: float
    ood_loss: float

    @property
    def lower(self) -> float:
        return self.c1 * self.epsilon_k

    @property
    def upper(self) -> float:
        return self.c2 * (self.epsilon_k + self.rho_k)


def optimal_shortcut_given_structured(
    residual_on_up: dict[tuple[int, ...], float], config: ShortcutConfig
) -> ShortcutValues:
    """Per-vertex ridge shrinkage b*(u) = r(u) / (1 + lam M).

    Minimizes (1/M)(b - r)^2 + lam b^2 vertex by vertex; the attained
    per-vertex objective contribution is lam r(u)^2 / (1 + lam M).
    """
    expected = set(train_vertices(config.p))
    if set(residual_on_up) != expected:
        raise ValueError("residual must be given on all of the training half-cube")
    denom = 1.0 + config.lam * config.m
    return ShortcutValues(config.p, {u: r / denom for u, r in residual_on_up.items()})


def residual_map(c: np.ndarray, p: int) -> dict[tuple[int, ...], float]:
    """The linear residual u -> c . u tabulated on U_P."""
    return {u: float(np.dot(c, u)) for u in train_vertices(p)}


def objective_value(
    weights: StructuredWeights, shortcut: ShortcutValues, config: ShortcutConfig
) -> float:
    """Joint regularized objective, evaluated by explicit enumeration of U_P."""
    theta = np.array(config.theta)
    alpha = weights.alpha
    total = 0.0
    for u in train_vertices(config.p):
        uvec = np.array(u, dtype=float)
        pred = float(alpha @ uvec) + shortcut.values.get(u, 0.0)
        total += (pred - float(theta @ uvec)) ** 2
    loss = total / config.m
    return loss + config.lam * float(weights.w @ weights.w) + config.lam * shortcut.norm_sq()


def _minimize_coordinate(theta_i: float, config: ShortcutConfig) -> float:
    """Minimize shrink*(w^k - theta_i)^2 + lam*w^2 over [0, tau].

    Non-convex for k >= 2, so: dense grid, then a few rounds of local
    refinement around the incumbent.
    """
    s, lam, k, tau = config.shrink, config.lam, config.k, config.tau

    def phi(w):
        return s * (w**k - theta_i) ** 2 + lam * w * w

    grid = np.linspace(0.0, tau, GRID_POINTS)
    vals = phi(grid)
    best = float(grid[int(np.argmin(vals))])
    h = tau / (GRID_POINTS - 1)
    for _ in range(4):
        local = np.clip(np.linspace(best - h, best + h, 101), 0.0, tau)
        lv = phi(local)
        best = float(local[int(np.argmin(lv))])
        h /= 50.0
    return best


def solve_erm(config: ShortcutConfig) -> tuple[StructuredWeights, ShortcutValues, BoundsReport]:
    """Solve the joint regularized ERM exactly (up to 1-D grid resolution).

    Eliminating the shortcut channel in closed form leaves, per coordinate,
    shrink*(w^k - theta_i)^2 + lam*w^2 on [0, tau]; the shortcut is then
    reconstructed from the residual.  Both reported losses are exact
    coefficient-space sums: the evaluation loss is sum_i (w_i^k - theta_i)^2
    because the shortcut vanishes off its training support.
    """
    w_hat = np.array([_minimize_coordinate(t, config) for t in config.theta])
    weights = StructuredWeights(w_hat, config.k)
    c = np.array(config.theta) - weights.alpha
    shortcut = optimal_shortcut_given_structured(residual_map(c, config.p), config)
    coeff_sq = float(c @ c)
    id_loss = config.shrink**2 * coeff_sq
    ood_loss = coeff_sq
    c1, c2 = sandwich_constants(config)
    report = BoundsReport(
        epsilon_k(config), rho_k(config), delta_k(config), c1, c2, id_loss, ood_loss
    )
    return weights, shortcut, report


def verify_sandwich(config: ShortcutConfig) -> BoundsReport:
    """Solve and assert the sandwich: id <= delta and C1 eps <= ood <= C2 (eps + rho)."""
    _, _, report = solve_erm(config)
    tol = 1e-12 * max(1.0, report.delta_k, report.upper)
    if report.id_loss > report.delta_k + tol:
        raise InvariantViolation(
            "training loss exceeds its bound", lhs=report.id_loss, rhs=report.delta_k
        )
    if report.ood_loss < report.lower - tol:
        raise InvariantViolation(
            "evaluation loss below its lower bound", lhs=report.lower, rhs=report.ood_loss
        )
    if report.ood_loss > report.upper + tol:
        raise InvariantViolation(
            "evaluation loss above its upper bound", lhs=report.ood_loss, rhs=report.upper
        )
    return report


def oracle_grid_slack(config: ShortcutConfig, grid_points: int = ORACLE_GRID) -> float:
    """Worst-case optimality gap of a step-h grid: sum_i Lip(phi_i) * h / 2.

    |phi_i'(w)| <= 2*shrink*(tau^k + theta_i)*k*tau^(k-1) + 2*lam*tau on [0, tau].
    """
    h = config.tau / (grid_points - 1)
    cap = config.tau**config.k
    k_slope = config.k * config.tau ** (config.k - 1)
    total = 0.0
    for t in config.theta:
        lip = 2.0 * config.shrink * (cap + t) * k_slope + 2.0 * config.lam * config.tau
        total += lip * h / 2.0
    return total


def brute_force_oracle(
    config: ShortcutConfig, grid_points: int = ORACLE_GRID
) -> tuple[StructuredWeights, ShortcutValues, float]:
    """Joint grid search over [0, tau]^p with the closed-form shortcut per grid point.

    The objective is evaluated by explicit enumeration (no coefficient-space
    identities), making this an independent check of solve_erm's reduction.
    """
    if config.p > ORACLE_P_CAP:
        raise CapacityError(f"oracle is limited to p <= {ORACLE_P_CAP}")
    theta = np.array(config.theta)
    up = np.array(train_vertices(config.p), dtype=float)  # (m, p)
    z_vals = up @ theta
    denom = 1.0 + config.lam * config.m
    axis = np.linspace(0.0, config.tau, grid_points)

    best_obj = math.inf
    best_w = None
    rest = (
        np.stack(
            np.meshgrid(*([axis] * (config.p - 1)), indexing="ij"), axis=-1
        ).reshape(-1, config.p - 1)
        if config.p > 1
        else np.zeros((1, 0))
    )
    for w0 in axis:
        w_block = np.column_stack([np.full(len(rest), w0), rest])  # (rows, p)
        alpha = w_block**config.k
        g_vals = alpha @ up.T  # (rows, m)
        r_vals = z_vals[None, :] - g_vals
        b_vals = r_vals / denom
        loss = ((g_vals + b_vals - z_vals[None, :]) ** 2).mean(axis=1)
        obj = (
            loss
            + config.lam * (w_block**2).sum(axis=1)
            + config.lam * (b_vals**2).sum(axis=1)
        )
        i = int(np.argmin(obj))
        if obj[i] < best_obj:
            best_obj = float(obj[i])
            best_w = w_block[i].copy()

    weights = StructuredWeights(best_w, config.k)
    c = theta - weights.alpha
    shortcut = optimal_shortcut_given_structured(residual_map(c, config.p), config)
    return weights, shortcut, best_obj


def reference_config(k: int) -> ShortcutConfig:
    """The worked example: p=8, theta=(0,2,0,...), tau=1.1, lam=1e-5."""
    return ShortcutConfig(p=8, theta=(0.0, 2.0) + (0.0,) * 6, tau=1.1, lam=1e-5, k=k)
