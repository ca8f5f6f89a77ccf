"""Weighted multi-task elastic net via an augmented multi-task lasso.

The objective, in its unscaled form, is

    F(W) = ||Y - Phi W||_F^2 + lambda1 ||W||_21 + lambda2 ||PhiAcc W||_F^2.

Stacking [Phi; sqrt(lambda2) PhiAcc] over [Y; 0] absorbs the acceleration
penalty into the squared loss, leaving a multi-task lasso solved by cyclic
block coordinate descent with the group soft-threshold update. Optimality
is certified through the KKT residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rbf import RbfParams, StackedRbfParams


class ConvergenceError(RuntimeError):
    """Sweep budget exhausted; carries the last iterate and its KKT residual."""

    def __init__(self, message: str, W: np.ndarray, kkt: float):
        super().__init__(message)
        self.W = W
        self.kkt = kkt


class EmptyModelError(RuntimeError):
    """Every feature was pruned away (over-regularization)."""


@dataclass(frozen=True)
class AugmentedProblem:
    """Design [Phi; sqrt(lambda2) PhiAcc] with target [Y; 0]."""

    phi_a: np.ndarray
    y_a: np.ndarray
    n_data_rows: int

    @property
    def n_features(self) -> int:
        return self.phi_a.shape[1]

    @property
    def n_tasks(self) -> int:
        return self.y_a.shape[1]


def to_lasso(
    phi: np.ndarray, phi_acc: np.ndarray, y: np.ndarray, lambda2: float
) -> AugmentedProblem:
    """Augment the design so the acceleration penalty becomes squared loss."""
    if lambda2 < 0:
        raise ValueError("lambda2 must be nonnegative")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[0] == 1 and phi.shape[0] > 1:
        y = y.T
    if phi.shape != phi_acc.shape or phi.shape[0] != y.shape[0]:
        raise ValueError(
            f"incompatible shapes: Phi {phi.shape}, PhiAcc {phi_acc.shape}, Y {y.shape}"
        )
    phi_a = np.vstack([phi, np.sqrt(lambda2) * phi_acc])
    y_a = np.vstack([y, np.zeros((phi_acc.shape[0], y.shape[1]))])
    return AugmentedProblem(phi_a=phi_a, y_a=y_a, n_data_rows=phi.shape[0])


def lambda_max(prob: AugmentedProblem) -> float:
    """Smallest penalty for which the all-zero solution is optimal.

    KKT at W = 0 for the unscaled objective requires
    ||2 phi_j^T Y_a||_2 <= lambda1 for every feature j.
    """
    corr = prob.phi_a.T @ prob.y_a
    return float(2.0 * np.max(np.linalg.norm(corr, axis=1), initial=0.0))


def objective(prob: AugmentedProblem, lambda1: float, W: np.ndarray) -> float:
    """Unscaled elastic-net objective in augmented form."""
    resid = prob.y_a - prob.phi_a @ W
    return float(np.sum(resid ** 2) + lambda1 * np.sum(np.linalg.norm(W, axis=1)))


def _kkt_residuals(
    prob: AugmentedProblem, lambda1: float, W: np.ndarray
) -> np.ndarray:
    """Per-feature blockwise stationarity residuals."""
    G = 2.0 * prob.phi_a.T @ (prob.phi_a @ W - prob.y_a)
    row_norms = np.linalg.norm(W, axis=1)
    active = row_norms > 0
    v = np.maximum(0.0, np.linalg.norm(G, axis=1) - lambda1)
    if np.any(active):
        Ga = G[active] + lambda1 * W[active] / row_norms[active, None]
        v[active] = np.linalg.norm(Ga, axis=1)
    return v


def kkt_violation(prob: AugmentedProblem, lambda1: float, W: np.ndarray) -> float:
    """Max blockwise stationarity residual; 0 at an exact optimum."""
    v = _kkt_residuals(prob, lambda1, W)
    return float(np.max(v, initial=0.0))


def dual_gap(prob: AugmentedProblem, lambda1: float, W: np.ndarray) -> float:
    """Duality gap of the multi-task lasso; upper-bounds F(W) - F(W*).

    The dual point is the scaled residual 2cR with c chosen to make it
    feasible (||phi_j^T (2cR)||_2 <= lambda1 for every j).
    """
    R = prob.y_a - prob.phi_a @ W
    corr = np.linalg.norm(prob.phi_a.T @ R, axis=1)
    top = float(np.max(2.0 * corr, initial=0.0))
    if top <= lambda1:
        c = 1.0
    elif lambda1 == 0.0:
        c = 0.0
    else:
        c = lambda1 / top
    r2 = float(np.sum(R ** 2))
    primal = r2 + lambda1 * float(np.sum(np.linalg.norm(W, axis=1)))
    dual = 2.0 * c * float(np.sum(R * prob.y_a)) - c * c * r2
    return max(0.0, primal - dual)


def solve(
    prob: AugmentedProblem,
    lambda1: float,
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
    warm_start: np.ndarray | None = None,
) -> np.ndarray:
    """Block coordinate descent with group soft-thresholding.

    Blocks are whole coefficient rows (one feature across all tasks).
    Cyclic sweeps run over a working set grown by worst KKT violation, so
    the expensive full-design pass reduces to one vectorized gradient; an
    IRLS jump accelerates near-duplicate designs. Returns once the KKT
    residual certifies the iterate (kkt_violation <= 10 tol) or the
    duality gap drops below tol scale; degenerate designs where neither
    certificate is attainable fall back to a sqrt(tol)-scale gap bound
    late in the sweep budget.
    """
    if lambda1 < 0:
        raise ValueError("lambda1 must be nonnegative")
    phi = prob.phi_a
    p, m = prob.n_features, prob.n_tasks
    if warm_start is not None:
        W = np.array(warm_start, dtype=float)
        if W.shape != (p, m):
            raise ValueError(f"warm start shape {W.shape}, expected {(p, m)}")
    else:
        W = np.zeros((p, m))

    col_sq = np.sum(phi ** 2, axis=0)
    R = prob.y_a - phi @ W

    def sweep(indices) -> float:
        nonlocal R
        max_change = 0.0
        for j in indices:
            if col_sq[j] == 0.0:
                continue
            w_old = W[j].copy()
            z = phi[:, j] @ R + col_sq[j] * w_old
            zn = np.linalg.norm(z)
            if zn > 0.0:
                scale = max(0.0, 1.0 - lambda1 / (2.0 * zn))
            else:
                scale = 0.0
            w_new = (z / col_sq[j]) * scale
            delta = w_new - w_old
            change = np.max(np.abs(delta))
            if change > 0.0:
                R -= np.outer(phi[:, j], delta)
                W[j] = w_new
                max_change = max(max_change, change)
        return max_change

    def irls_refine(max_inner: int = 100) -> None:
        # Near-duplicate basis columns make plain coordinate descent crawl;
        # solving the smooth restricted problem on the current active rows by
        # iteratively reweighted least squares jumps straight to its optimum.
        # Only descent steps are accepted, and the surrounding full sweeps
        # still certify optimality, so the minimizer is unchanged.
        nonlocal R
        for _ in range(max_inner):
            act = np.flatnonzero(np.linalg.norm(W, axis=1) > 0)
            if act.size == 0:
                return
            phi_s = phi[:, act]
            norms = np.linalg.norm(W[act], axis=1)
            A = phi_s.T @ phi_s + np.diag(lambda1 / (2.0 * norms))
            try:
                W_s = np.linalg.solve(A, phi_s.T @ prob.y_a)
            except np.linalg.LinAlgError:
                return
            f_old = np.sum(R ** 2) + lambda1 * np.sum(np.linalg.norm(W, axis=1))
            W_trial = W.copy()
            W_trial[act] = W_s
            R_trial = prob.y_a - phi @ W_trial
            f_new = np.sum(R_trial ** 2) + lambda1 * np.sum(
                np.linalg.norm(W_trial, axis=1)
            )
            if f_new >= f_old - 1e-15 * (1.0 + abs(f_old)):
                return
            step = np.max(np.abs(W_trial[act] - W[act]))
            W[act] = W_s
            R = R_trial
            if step <= tol:
                return

    def certified() -> tuple[bool, float, float]:
        """KKT residual within 10 tol, or duality gap below tol scale.

        The gap exit covers degenerate (near-duplicate column) designs
        where block updates crawl: it bounds the remaining objective
        decrease, which is what callers actually depend on. Returns the
        verdict along with the current gap and primal value.
        """
        corr = np.linalg.norm(phi.T @ R, axis=1)
        row_norms = np.linalg.norm(W, axis=1)
        active = row_norms > 0
        G = -2.0 * (phi.T @ R) if np.any(active) else None
        viol = np.maximum(0.0, 2.0 * corr - lambda1)
        if G is not None:
            Ga = G[active] + lambda1 * W[active] / row_norms[active, None]
            viol[active] = np.linalg.norm(Ga, axis=1)
        top = float(np.max(2.0 * corr, initial=0.0))
        if top <= lambda1:
            c = 1.0
        elif lambda1 == 0.0:
            c = 0.0
        else:
            c = lambda1 / top
        r2 = float(np.sum(R ** 2))
        primal = r2 + lambda1 * float(np.sum(row_norms))
        gap = primal - (2.0 * c * float(np.sum(R * prob.y_a)) - c * c * r2)
        worst = int(np.argmax(viol)) if viol.size else 0
        if viol.size == 0 or viol[worst] <= 10.0 * tol:
            return True, gap, primal
        if gap <= tol * (1.0 + abs(primal)):
            return True, gap, primal
        # Grow the working set by every strong violator (up to 10 per
        # cycle) so entry is not serialized one feature per cycle.
        in_work = set(work)
        candidates = np.argsort(viol)[::-1][:10]
        for j in candidates:
            j = int(j)
            if viol[j] > 0.5 * viol[worst] and j not in in_work:
                work.append(j)
        return False, gap, primal

    work = list(np.flatnonzero(np.linalg.norm(W, axis=1) > 0))
    if not work:
        # Seed with the most correlated feature so the first cycle has
        # something to sweep over.
        corr0 = np.linalg.norm(phi.T @ prob.y_a, axis=1)
        work = [int(np.argmax(corr0))]

    # Near-duplicate columns can make the last feature enter at a
    # geometric crawl that never reaches the strict certificate within any
    # reasonable budget. Once a solve has gone hundreds of sweeps without
    # certifying, a duality gap at the sqrt(tol) scale -- still a hard
    # bound on the remaining objective decrease -- is accepted instead of
    # burning the rest of the budget on negligible progress.
    loose_after = max(50, min(500, max_sweeps // 4))
    sweeps = 0
    while sweeps < max_sweeps:
        for _ in range(50):
            if sweeps >= max_sweeps:
                break
            change = sweep(work)
            sweeps += 1
            if change <= tol:
                break
        irls_refine()
        ok, gap, primal = certified()
        if ok:
            return W
        if sweeps >= loose_after and gap <= np.sqrt(tol) * (1.0 + abs(primal)):
            return W
    ok, gap, primal = certified()
    if ok or gap <= np.sqrt(tol) * (1.0 + abs(primal)):
        return W
    resid = kkt_violation(prob, lambda1, W)
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_sweeps} sweeps "
        f"(KKT violation {resid:.3e})",
        W=W,
        kkt=resid,
    )


def active_set(W: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Indices of rows with nonzero (above-tol) Euclidean norm."""
    return np.flatnonzero(np.linalg.norm(W, axis=1) > tol)


def prune(
    W: np.ndarray,
    params: RbfParams | StackedRbfParams,
    tol_prune: float = 1e-10,
) -> tuple[np.ndarray, RbfParams | StackedRbfParams]:
    """Drop features whose coefficient rows are (numerically) zero.

    Removal is permanent: the matching centers and widths disappear from the
    model, so a pruned feature can never re-enter.
    """
    if W.shape[0] != params.n_features:
        raise ValueError(
            f"coefficients have {W.shape[0]} rows but params hold "
            f"{params.n_features} features"
        )
    keep = np.linalg.norm(W, axis=1) > tol_prune
    if not np.any(keep):
        raise EmptyModelError("empty model: all features pruned")
    return W[keep], params.select(keep)
