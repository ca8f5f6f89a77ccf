"""Comparison methods: dynamic movement primitives and fixed-basis ridge.

Both use ten basis functions per DoF by default. The DMP learns a forcing
term on top of a critically damped goal attractor; the ridge baseline fits
uniformly spaced time-domain RBFs with an l2 penalty on accelerations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rbf import RbfParams, eval_basis, eval_basis_accel
from .trajectory import JointTrajectory


@dataclass
class DmpModel:
    """Per-DoF attractor dynamics with a phase-gated forcing term."""

    weights: np.ndarray        # n x n_basis
    goal: np.ndarray           # (n,)
    y0: np.ndarray             # (n,)
    tau: float
    alpha_z: float
    beta_z: float
    alpha_x: float
    centers: np.ndarray        # phase-space RBF centers, (n_basis,)
    widths: np.ndarray         # phase-space RBF precisions, (n_basis,)
    dt: float

    @property
    def n_dof(self) -> int:
        return self.weights.shape[0]

    @property
    def n_basis(self) -> int:
        return self.weights.shape[1]

    def params_per_dof(self) -> int:
        # forcing weights plus the goal position
        return self.n_basis + 1


@dataclass
class RidgeModel:
    """Fixed uniform time-domain basis with dense per-DoF coefficients."""

    rbf_params: RbfParams
    W: np.ndarray              # n_basis x n
    intercepts: np.ndarray     # (n,)
    lambda2: float
    t: np.ndarray

    @property
    def n_dof(self) -> int:
        return self.W.shape[1]

    @property
    def n_basis(self) -> int:
        return self.W.shape[0]

    def params_per_dof(self) -> int:
        # basis weights plus the intercept
        return self.n_basis + 1


def _phase_basis(n_basis: int, alpha_x: float, tau: float):
    """Normalized-RBF centers/widths laid out evenly in time, mapped to phase."""
    t_centers = np.linspace(0.0, tau, n_basis)
    centers = np.exp(-alpha_x * t_centers / tau)
    diffs = np.diff(centers)
    widths = np.empty(n_basis)
    widths[:-1] = 1.0 / (2.0 * diffs ** 2)
    widths[-1] = widths[-2]
    return centers, widths


def _forcing_design(x: np.ndarray, centers, widths) -> np.ndarray:
    """Rows are psi_i(x) * x / sum_i psi_i(x)."""
    psi = np.exp(-widths[None, :] * (x[:, None] - centers[None, :]) ** 2)
    return psi * x[:, None] / np.sum(psi, axis=1, keepdims=True)


def train_dmp(
    demo: JointTrajectory,
    n_basis: int = 10,
    alpha_z: float = 25.0,
    beta_z: float | None = None,
    alpha_x: float | None = None,
) -> DmpModel:
    """Fit the forcing weights to the demonstration's attractor residual.

    Velocities and accelerations come from central differences; the target
    forcing is f* = tau^2 ydd - alpha_z (beta_z (g - y) - tau yd), fit per
    DoF by least squares on the phase-gated normalized basis.
    """
    if demo.n_samples < 3:
        raise ValueError("need at least 3 samples to differentiate")
    beta_z = alpha_z / 4.0 if beta_z is None else beta_z
    alpha_x = alpha_z / 3.0 if alpha_x is None else alpha_x
    tau = demo.duration
    dt = demo.dt
    Q = demo.Q
    y0 = Q[0].copy()
    goal = Q[-1].copy()

    yd = np.gradient(Q, dt, axis=0)
    ydd = np.gradient(yd, dt, axis=0)
    f_target = tau ** 2 * ydd - alpha_z * (beta_z * (goal - Q) - tau * yd)

    x = np.exp(-alpha_x * (demo.t - demo.t[0]) / tau)
    centers, widths = _phase_basis(n_basis, alpha_x, tau)
    M = _forcing_design(x, centers, widths)
    weights, *_ = np.linalg.lstsq(M, f_target, rcond=None)
    return DmpModel(
        weights=weights.T,
        goal=goal,
        y0=y0,
        tau=tau,
        alpha_z=alpha_z,
        beta_z=beta_z,
        alpha_x=alpha_x,
        centers=centers,
        widths=widths,
        dt=dt,
    )


def rollout_dmp(
    model: DmpModel,
    duration: float | None = None,
    dt: float | None = None,
    y0_override: np.ndarray | None = None,
    g_override: np.ndarray | None = None,
) -> JointTrajectory:
    """Integrate the canonical and transformation systems (explicit Euler)."""
    dt = model.dt if dt is None else dt
    duration = model.tau if duration is None else duration
    if dt <= 0 or duration <= 0:
        raise ValueError("dt and duration must be positive")
    y = (model.y0 if y0_override is None else np.asarray(y0_override, float)).copy()
    g = model.goal if g_override is None else np.asarray(g_override, float)
    tau = model.tau

    n_steps = int(round(duration / dt))
    t = np.arange(n_steps + 1) * dt
    out = np.empty((n_steps + 1, model.n_dof))
    out[0] = y
    v = np.zeros(model.n_dof)
    x = 1.0
    for k in range(n_steps):
        f = _forcing_design(np.array([x]), model.centers, model.widths)[0] @ model.weights.T
        a = (model.alpha_z * (model.beta_z * (g - y) - tau * v) + f) / tau ** 2
        v = v + dt * a
        y = y + dt * v
        x = x + dt * (-model.alpha_x * x / tau)
        out[k + 1] = y
    return JointTrajectory(t=t, Q=out)


def dmp_initial_acceleration(model: DmpModel, y0: np.ndarray | None = None) -> np.ndarray:
    """|ydd(0)| per DoF; grows when the start is shifted away from training."""
    y = model.y0 if y0 is None else np.asarray(y0, float)
    f0 = _forcing_design(np.array([1.0]), model.centers, model.widths)[0] @ model.weights.T
    return np.abs(
        (model.alpha_z * model.beta_z * (model.goal - y) + f0) / model.tau ** 2
    )


def uniform_ridge_basis(duration: float, n_basis: int = 10) -> RbfParams:
    """Centers spread uniformly; adjacent kernels cross at exp(-1/2)."""
    centers = np.linspace(0.0, duration, n_basis)
    spacing = duration / (n_basis - 1) if n_basis > 1 else duration
    sigma2 = np.full(n_basis, spacing ** 2 / 2.0)
    return RbfParams(mu=centers, sigma2=sigma2)


def train_ridge(
    demo: JointTrajectory, n_basis: int = 10, lambda2: float = 1e-4
) -> RidgeModel:
    """Closed-form fit of (Phi^T Phi + lambda2 Acc^T Acc) W = Phi^T Y."""
    if lambda2 < 0:
        raise ValueError("lambda2 must be nonnegative")
    params = uniform_ridge_basis(demo.duration, n_basis)
    t = demo.t - demo.t[0]
    Phi = eval_basis(t, params)
    Acc = eval_basis_accel(t, params)
    intercepts = demo.Q.mean(axis=0)
    Yc = demo.Q - intercepts

    A = Phi.T @ Phi + lambda2 * (Acc.T @ Acc)
    if lambda2 == 0.0 and np.linalg.matrix_rank(Phi) < n_basis:
        raise np.linalg.LinAlgError("singular normal matrix: rank-deficient basis")
    W = np.linalg.solve(A, Phi.T @ Yc)
    return RidgeModel(
        rbf_params=params, W=W, intercepts=intercepts, lambda2=lambda2, t=t.copy()
    )


def ridge_reconstruct(model: RidgeModel, t: np.ndarray | None = None) -> np.ndarray:
    t = model.t if t is None else np.asarray(t, float)
    return eval_basis(t, model.rbf_params) @ model.W + model.intercepts


def ridge_acc_norm(model: RidgeModel) -> float:
    return float(np.linalg.norm(eval_basis_accel(model.t, model.rbf_params) @ model.W))
