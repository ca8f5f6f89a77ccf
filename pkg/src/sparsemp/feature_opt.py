"""Nonlinear refinement of the basis parameters at fixed coefficients.

Minimizes ||Y - Phi(theta) W||_F^2 + lambda2 ||PhiAcc(theta) W||_F^2 over
theta = (centers, log squared widths) with dense BFGS and a strong-Wolfe
line search. The sparsity penalty does not depend on theta and is added
back by the caller when reporting total cost.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import line_search as _wolfe_line_search
from scipy.optimize._linesearch import LineSearchWarning

from .rbf import SIGMA2_MIN, RbfParams, StackedRbfParams

CURVATURE_EPS = 1e-12
LOG_S2_MAX = 50.0  # keeps exp() finite; widths this large are already flat


def _kernel_pieces(t, mu, s2):
    """Raw kernel matrices for one DoF block; s2 floored at SIGMA2_MIN.

    Returns (phi, acc, dphi_dmu, dphi_dlogs, dacc_dmu, dacc_dlogs, mask)
    where mask zeroes the log-width derivative wherever the floor binds.
    """
    s2_raw = s2
    s2 = np.clip(s2, SIGMA2_MIN, np.exp(LOG_S2_MAX))
    mask = (s2_raw == s2).astype(float)
    u = t[:, None] - mu[None, :]
    s2 = s2[None, :]
    phi = np.exp(-(u ** 2) / (2.0 * s2))
    g = u ** 2 / s2 ** 2 - 1.0 / s2
    acc = phi * g
    dphi_dmu = phi * (u / s2)
    dphi_dlogs = phi * (u ** 2 / (2.0 * s2)) * mask[None, :]
    dacc_dmu = phi * (u / s2 * g - 2.0 * u / s2 ** 2)
    dacc_dlogs = (
        phi * (u ** 2 / (2.0 * s2) * g - 2.0 * u ** 2 / s2 ** 2 + 1.0 / s2)
        * mask[None, :]
    )
    return phi, acc, dphi_dmu, dphi_dlogs, dacc_dmu, dacc_dlogs


class FeatureObjective:
    """Smooth part of the training cost as a function of theta.

    Handles both the flat layout (one parameter set shared by all DoFs,
    tasks = DoF columns of Y) and the stacked layout (one set per DoF,
    DoF-major row blocks of Y, tasks = demonstrations).
    """

    def __init__(
        self,
        t: np.ndarray,
        Y: np.ndarray,
        W: np.ndarray,
        lambda2: float,
        n_dof_blocks: int = 1,
    ):
        self.t = np.asarray(t, dtype=float)
        self.Y = np.atleast_2d(np.asarray(Y, dtype=float))
        self.W = np.atleast_2d(np.asarray(W, dtype=float))
        if lambda2 < 0:
            raise ValueError("lambda2 must be nonnegative")
        self.lambda2 = float(lambda2)
        self.n_blocks = n_dof_blocks
        self.N = self.t.size
        if self.Y.shape[0] != self.N * self.n_blocks:
            raise ValueError(
                f"target has {self.Y.shape[0]} rows, expected "
                f"{self.N * self.n_blocks}"
            )
        self.p = self.W.shape[0]

    @property
    def theta_size(self) -> int:
        return 2 * self.n_blocks * self.p

    def split_theta(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(n_blocks x p centers, n_blocks x p squared widths)."""
        nb, p = self.n_blocks, self.p
        mus = theta[: nb * p].reshape(nb, p)
        s2 = np.exp(np.minimum(theta[nb * p:].reshape(nb, p), LOG_S2_MAX))
        return mus, s2

    def decode(self, theta: np.ndarray) -> RbfParams | StackedRbfParams:
        mus, s2 = self.split_theta(theta)
        s2 = np.maximum(s2, SIGMA2_MIN)
        if self.n_blocks == 1:
            return RbfParams(mu=mus[0], sigma2=s2[0])
        return StackedRbfParams(
            per_dof=[RbfParams(mu=mus[i], sigma2=s2[i]) for i in range(self.n_blocks)]
        )

    def cost(self, theta: np.ndarray) -> float:
        return self.cost_grad(theta, need_grad=False)[0]

    def grad(self, theta: np.ndarray) -> np.ndarray:
        return self.cost_grad(theta)[1]

    def cost_grad(self, theta: np.ndarray, need_grad: bool = True):
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.theta_size:
            raise ValueError(f"theta size {theta.size}, expected {self.theta_size}")
        mus, s2 = self.split_theta(theta)
        nb, p, N = self.n_blocks, self.p, self.N
        W, lam2 = self.W, self.lambda2

        f = 0.0
        gmu = np.zeros((nb, p)) if need_grad else None
        glogs = np.zeros((nb, p)) if need_grad else None
        for b in range(nb):
            phi, acc, dpm, dpl, dam, dal = _kernel_pieces(self.t, mus[b], s2[b])
            if not np.all(np.isfinite(phi)):
                raise FloatingPointError("non-finite basis values")
            Yb = self.Y[b * N:(b + 1) * N]
            R = Yb - phi @ W
            A = acc @ W
            f += float(np.sum(R ** 2) + lam2 * np.sum(A ** 2))
            if need_grad:
                gmu[b] = (
                    -2.0 * np.sum((dpm.T @ R) * W, axis=1)
                    + 2.0 * lam2 * np.sum((dam.T @ A) * W, axis=1)
                )
                glogs[b] = (
                    -2.0 * np.sum((dpl.T @ R) * W, axis=1)
                    + 2.0 * lam2 * np.sum((dal.T @ A) * W, axis=1)
                )
        if not need_grad:
            return f, None
        return f, np.concatenate([gmu.reshape(-1), glogs.reshape(-1)])


def cost(theta, W, Y, t, lambda2, n_dof_blocks=1) -> float:
    """Smooth training cost at the given parameters and coefficients."""
    return FeatureObjective(t, Y, W, lambda2, n_dof_blocks).cost(theta)


def grad(theta, W, Y, t, lambda2, n_dof_blocks=1) -> np.ndarray:
    """Analytic gradient of `cost` with respect to theta."""
    return FeatureObjective(t, Y, W, lambda2, n_dof_blocks).grad(theta)


@dataclass
class BfgsResult:
    theta: np.ndarray
    cost: float
    grad_norm: float
    n_iters: int
    converged: bool
    line_search_failed: bool


def bfgs_minimize(
    objective: FeatureObjective,
    theta0: np.ndarray,
    max_iters: int | None = None,
    grad_tol: float | None = None,
    c1: float = 1e-4,
    c2: float = 0.9,
    project=None,
) -> BfgsResult:
    """Dense BFGS with a strong-Wolfe line search.

    Returns the best iterate seen; a line-search failure ends the run with
    the best-so-far, flagged. `project` (if given) is applied to each
    accepted iterate, e.g. to clamp centers back into the data window.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    if not np.all(np.isfinite(theta)):
        raise ValueError("non-finite initial point")
    dim = theta.size
    if max_iters is None:
        max_iters = 100 * max(1, objective.p)

    f, g = objective.cost_grad(theta)
    if not np.isfinite(f):
        raise FloatingPointError("non-finite cost at the initial point")
    if grad_tol is None:
        grad_tol = 1e-6 * (1.0 + abs(f))

    best_theta, best_f = theta.copy(), f
    H = np.eye(dim)
    first_step = True
    ls_failed = False
    converged = np.linalg.norm(g) <= grad_tol
    it = 0
    while not converged and it < max_iters:
        d = -H @ g
        if d @ g >= 0:
            # Safeguard: reset to steepest descent if H lost definiteness.
            H = np.eye(dim)
            d = -g
        with warnings.catch_warnings():
            # A failed line search is an expected terminal state, handled
            # below; scipy's warning would just add noise.
            warnings.simplefilter("ignore", LineSearchWarning)
            alpha, _, _, f_new, _, _ = _wolfe_line_search(
                objective.cost, objective.grad, theta, d, gfk=g, old_fval=f,
                c1=c1, c2=c2, maxiter=50,
            )
        if alpha is None:
            ls_failed = True
            break
        s = alpha * d
        theta_new = theta + s
        if project is not None:
            projected = project(theta_new)
            if not np.array_equal(projected, theta_new):
                theta_new = projected
                s = theta_new - theta
        f_new, g_new = objective.cost_grad(theta_new)
        y = g_new - g
        ys = y @ s
        if ys > CURVATURE_EPS:
            if first_step:
                H = (ys / (y @ y)) * np.eye(dim)
                first_step = False
            rho = 1.0 / ys
            V = np.eye(dim) - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        theta, f, g = theta_new, f_new, g_new
        if f < best_f:
            best_f, best_theta = f, theta.copy()
        it += 1
        converged = np.linalg.norm(g) <= grad_tol
    return BfgsResult(
        theta=best_theta,
        cost=best_f,
        grad_norm=float(np.linalg.norm(g)),
        n_iters=it,
        converged=bool(converged),
        line_search_failed=ls_failed,
    )
