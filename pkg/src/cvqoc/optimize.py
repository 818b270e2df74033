"""Nonlinear least-squares and stochastic training loops.

Gauss-Newton with Levenberg-Marquardt damping handles the output-weight
(and morph-rate) coordinates; Adam with finite-difference gradients handles
the circuit parameters; joint training alternates the two.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np


@dataclass
class DecisionVector:
    """Flat decision coordinates with named blocks and a write counter."""

    values: np.ndarray
    blocks: dict   # name -> slice
    version: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).copy()

    def get(self, name: str) -> np.ndarray:
        return self.values[self.blocks[name]].copy()

    def set(self, name: str, vals) -> None:
        self.values[self.blocks[name]] = vals
        self.version += 1

    def replace(self, values: np.ndarray) -> None:
        if values.shape != self.values.shape:
            raise ValueError("decision vector length changed")
        self.values = np.asarray(values, dtype=float).copy()
        self.version += 1


@dataclass
class SolveReport:
    iterations: int
    final_loss: float
    loss_history: list
    converged: bool
    tolerance_used: float
    wall_time: float = 0.0

    def __post_init__(self):
        if not self.loss_history:
            raise ValueError("loss history must not be empty")
        if self.loss_history[-1] != self.final_loss:
            raise ValueError("final loss must equal the last history entry")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_loss": self.final_loss,
            "loss_history": list(self.loss_history),
            "converged": self.converged,
            "tolerance_used": self.tolerance_used,
            "wall_time": self.wall_time,
        }


def fd_step(z: np.ndarray, base: float = 1e-6) -> np.ndarray:
    """Per-coordinate relative step max(base, base * |z_k|)."""
    return np.maximum(base, base * np.abs(z))


def jacobian_fd(res_fn, z: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a residual vector, column per coordinate."""
    if h <= 0:
        raise ValueError("step must be positive")
    z = np.asarray(z, dtype=float)
    steps = fd_step(z, h)
    r0 = np.asarray(res_fn(z))
    jac = np.empty((r0.shape[0], z.shape[0]))
    for k in range(z.shape[0]):
        zp = z.copy()
        zp[k] += steps[k]
        rp = np.asarray(res_fn(zp))
        zm = z.copy()
        zm[k] -= steps[k]
        rm = np.asarray(res_fn(zm))
        if not (np.all(np.isfinite(rp)) and np.all(np.isfinite(rm))):
            raise FloatingPointError(f"non-finite residual while perturbing coordinate {k}")
        jac[:, k] = (rp - rm) / (2.0 * steps[k])
    return jac


def gauss_newton(res_fn, z0: np.ndarray, tol: float = 1e-6, max_iter: int = 50,
                 damping: float = 1e-8, fd_h: float = 1e-6,
                 bounds=None, callback=None):
    """Damped Gauss-Newton iteration on the residual L2 norm.

    Rejected steps are halved up to 8 times while the damping escalates
    tenfold; accepted steps relax it.  bounds, when given, is a list of
    (index, lo, hi) box constraints applied by projection after each step.
    Returns (z, SolveReport).
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    start = time.perf_counter()
    z = np.asarray(z0, dtype=float).copy()
    lam = max(damping, 0.0)
    history = [float(np.linalg.norm(res_fn(z)))]
    converged = history[0] < tol
    iters = 0
    while not converged and iters < max_iter:
        r = np.asarray(res_fn(z))
        try:
            jac = jacobian_fd(res_fn, z, fd_h)
        except FloatingPointError:
            break
        jtj = jac.T @ jac
        jtr = jac.T @ r
        loss = float(np.linalg.norm(r))
        accepted = False
        step_scale = 1.0
        for _ in range(9):
            try:
                delta = np.linalg.solve(jtj + lam * np.eye(jtj.shape[0]), -jtr)
            except np.linalg.LinAlgError:
                break
            z_try = z + step_scale * delta
            if bounds:
                for idx, lo, hi in bounds:
                    z_try[idx] = min(max(z_try[idx], lo), hi)
            loss_try = float(np.linalg.norm(res_fn(z_try)))
            if np.isfinite(loss_try) and loss_try < loss:
                z = z_try
                loss = loss_try
                lam = max(lam / 10.0, 1e-14)
                accepted = True
                break
            step_scale *= 0.5
            lam = min(lam * 10.0, 1e8) if lam > 0 else 1e-8
        iters += 1
        history.append(loss)
        if callback:
            callback(iters, z, loss)
        if loss < tol:
            converged = True
        elif not accepted:
            break  # stalled: singular or no descent found
    report = SolveReport(
        iterations=iters, final_loss=history[-1], loss_history=history,
        converged=bool(converged), tolerance_used=tol,
        wall_time=time.perf_counter() - start,
    )
    return z, report


def adam(loss_fn, z0: np.ndarray, lr: float = 0.01, max_epochs: int = 200,
         tol: float = 0.0, beta1: float = 0.9, beta2: float = 0.999,
         eps: float = 1e-8, fd_h: float = 1e-6, callback=None):
    """Adam with bias correction on a scalar loss; gradients by central
    finite differences.  Returns (z, SolveReport)."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    start = time.perf_counter()
    z = np.asarray(z0, dtype=float).copy()
    m = np.zeros_like(z)
    v = np.zeros_like(z)
    history = [float(loss_fn(z))]
    converged = history[0] < tol
    epoch = 0
    while not converged and epoch < max_epochs:
        steps = fd_step(z, fd_h)
        grad = np.empty_like(z)
        bad = False
        for k in range(z.shape[0]):
            zp = z.copy()
            zp[k] += steps[k]
            zm = z.copy()
            zm[k] -= steps[k]
            lp, lm = loss_fn(zp), loss_fn(zm)
            if not (np.isfinite(lp) and np.isfinite(lm)):
                bad = True
                break
            grad[k] = (lp - lm) / (2.0 * steps[k])
        if bad:
            break
        epoch += 1
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad**2
        m_hat = m / (1 - beta1**epoch)
        v_hat = v / (1 - beta2**epoch)
        z = z - lr * m_hat / (np.sqrt(v_hat) + eps)
        loss = float(loss_fn(z))
        history.append(loss)
        if callback:
            callback(epoch, z, loss)
        if loss < tol:
            converged = True
    report = SolveReport(
        iterations=epoch, final_loss=history[-1], loss_history=history,
        converged=bool(converged), tolerance_used=tol,
        wall_time=time.perf_counter() - start,
    )
    return z, report


@dataclass
class TrainSchedule:
    mode: str = "xi"           # xi | theta | joint
    tolerance: float = 1e-6
    gn_max_iter: int = 50
    gn_damping: float = 1e-8
    adam_lr: float = 0.01
    adam_epochs: int = 200
    joint_rounds: int = 5
    joint_gn_steps: int = 3
    joint_adam_steps: int = 25
    fd_h: float = 1e-6

    def __post_init__(self):
        if self.mode not in ("xi", "theta", "joint"):
            raise ValueError(f"unknown training mode {self.mode!r}")


def _masked(problem, mask):
    """Residual over a subset of coordinates, the rest held at current values."""
    base = problem.decision.values.copy()
    idx = np.flatnonzero(mask)

    def res(sub):
        full = base.copy()
        full[idx] = sub
        return problem.residual(full)

    return res, base[idx], idx


def train(problem, schedule: TrainSchedule, callback=None):
    """Run the selected training mode on a collocation problem.

    The problem must expose: decision (DecisionVector), xi_mask, theta_mask
    (boolean coordinate masks), residual(values) -> array, and bounds()
    giving box constraints as (index, lo, hi) in full coordinates.
    callback, when given, is invoked as callback(epoch, full_values, loss)
    after every accepted optimizer step.
    """
    start = time.perf_counter()
    bounds_full = problem.bounds()

    def sub_bounds(idx):
        pos = {j: i for i, j in enumerate(idx)}
        return [(pos[j], lo, hi) for j, lo, hi in bounds_full if j in pos]

    def lift(idx, offset=0):
        if callback is None:
            return None

        def cb(k, z_sub, loss):
            full = problem.decision.values.copy()
            full[idx] = z_sub
            callback(offset + k, full, loss)

        return cb

    if schedule.mode == "xi":
        res, z0, idx = _masked(problem, problem.xi_mask)
        z, report = gauss_newton(res, z0, tol=schedule.tolerance,
                                 max_iter=schedule.gn_max_iter,
                                 damping=schedule.gn_damping, fd_h=schedule.fd_h,
                                 bounds=sub_bounds(idx), callback=lift(idx))
        full = problem.decision.values.copy()
        full[idx] = z
        problem.decision.replace(full)
        report.wall_time = time.perf_counter() - start
        return report

    if schedule.mode == "theta":
        res, z0, idx = _masked(problem, problem.theta_mask)

        def loss(sub):
            r = res(sub)
            return float(np.mean(r**2))

        z, report = adam(loss, z0, lr=schedule.adam_lr,
                         max_epochs=schedule.adam_epochs,
                         tol=schedule.tolerance**2, fd_h=schedule.fd_h,
                         callback=lift(idx))
        full = problem.decision.values.copy()
        full[idx] = z
        problem.decision.replace(full)
        # report L2 norms for comparability with the least-squares modes
        history = [float(np.linalg.norm(problem.residual(problem.decision.values)))]
        report = SolveReport(
            iterations=report.iterations, final_loss=history[-1],
            loss_history=[np.sqrt(max(h, 0.0) * len(res(z))) for h in report.loss_history[:-1]] + history,
            converged=history[-1] < schedule.tolerance,
            tolerance_used=schedule.tolerance,
            wall_time=time.perf_counter() - start,
        )
        return report

    # joint: alternate short Gauss-Newton bursts on xi with Adam bursts on theta
    if schedule.joint_adam_steps == 0:
        # degenerate schedule is exactly xi-only training
        return train(problem, dataclasses.replace(schedule, mode="xi"), callback)
    history = [float(np.linalg.norm(problem.residual(problem.decision.values)))]
    iters = 0
    converged = history[0] < schedule.tolerance
    for _ in range(schedule.joint_rounds):
        if converged:
            break
        res, z0, idx = _masked(problem, problem.xi_mask)
        z, rep = gauss_newton(res, z0, tol=schedule.tolerance,
                              max_iter=schedule.joint_gn_steps,
                              damping=schedule.gn_damping, fd_h=schedule.fd_h,
                              bounds=sub_bounds(idx), callback=lift(idx, iters))
        full = problem.decision.values.copy()
        full[idx] = z
        problem.decision.replace(full)
        iters += rep.iterations
        history.extend(rep.loss_history[1:])
        if history[-1] < schedule.tolerance:
            converged = True
            break
        if schedule.joint_adam_steps > 0:
            res_t, zt0, idx_t = _masked(problem, problem.theta_mask)

            def loss_t(sub):
                r = res_t(sub)
                return float(np.linalg.norm(r))

            zt, rep_t = adam(loss_t, zt0, lr=schedule.adam_lr,
                             max_epochs=schedule.joint_adam_steps,
                             tol=schedule.tolerance, fd_h=schedule.fd_h,
                             callback=lift(idx_t, iters))
            full = problem.decision.values.copy()
            full[idx_t] = zt
            problem.decision.replace(full)
            iters += rep_t.iterations
            history.extend(rep_t.loss_history[1:])
            if history[-1] < schedule.tolerance:
                converged = True
                break
    final = float(np.linalg.norm(problem.residual(problem.decision.values)))
    history.append(final)
    return SolveReport(
        iterations=iters, final_loss=final, loss_history=history,
        converged=bool(final < schedule.tolerance), tolerance_used=schedule.tolerance,
        wall_time=time.perf_counter() - start,
    )
