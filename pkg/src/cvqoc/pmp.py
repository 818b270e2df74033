"""First-order optimality residuals for the constrained time-energy problem.

The control bound u in [u_min, u_max] is absorbed by a logistic saturation
u = phi(nu) of an unconstrained variable nu, with an equality multiplier
beta.  The residual families per collocation node are the state and costate
dynamics, control stationarity, saturation stationarity, and the equality
constraint; a single terminal row pins the Hamiltonian to minus the
time weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lindblad import SuperOperatorModel
from .tfc import ConstrainedExpression


@dataclass
class OcpConfig:
    time_weight: float          # coefficient of t_f in the cost
    energy_weight: float        # coefficient of the u^2 integral
    reg_weight: float           # coefficient of the nu^2 regularizer
    u_min: float
    u_max: float
    sat_steepness: float
    rho_init: np.ndarray
    rho_target: np.ndarray
    costate_final: np.ndarray = None   # transversality value, zeros
    t0: float = 0.0
    costate_terminal_constraint: bool = True

    def __post_init__(self):
        if min(self.time_weight, self.energy_weight, self.reg_weight) <= 0:
            raise ValueError("cost weights must be positive")
        if self.u_max < self.u_min:
            raise ValueError("u_max must not be below u_min")
        if self.sat_steepness <= 0:
            raise ValueError("saturation steepness must be positive")
        self.rho_init = np.asarray(self.rho_init, dtype=float)
        self.rho_target = np.asarray(self.rho_target, dtype=float)
        if self.costate_final is None:
            self.costate_final = np.zeros_like(self.rho_init)
        self.costate_final = np.asarray(self.costate_final, dtype=float)

    @property
    def u_span(self) -> float:
        return self.u_max - self.u_min


def saturation(nu, cfg: OcpConfig):
    """Logistic map from the unconstrained variable onto (u_min, u_max).

    A collapsed interval (u_min == u_max) pins the control to the constant."""
    nu = np.asarray(nu, dtype=float)
    span = cfg.u_span
    if span == 0.0:
        return np.full_like(nu, cfg.u_min)
    z = np.clip(cfg.sat_steepness * nu / span, -500.0, 500.0)
    return cfg.u_max - span / (1.0 + np.exp(z))


def saturation_dnu(nu, cfg: OcpConfig):
    """Analytic derivative of the saturation; strictly positive for a
    non-degenerate control interval."""
    nu = np.asarray(nu, dtype=float)
    span = cfg.u_span
    if span == 0.0:
        return np.zeros_like(nu)
    z = np.clip(cfg.sat_steepness * nu / span, -500.0, 500.0)
    sig = 1.0 / (1.0 + np.exp(-z))
    return cfg.sat_steepness * sig * (1.0 - sig)


def saturation_inverse(u: float, cfg: OcpConfig) -> float:
    """nu with saturation(nu) = u, for u strictly inside the bounds."""
    if not cfg.u_min < u < cfg.u_max:
        raise ValueError("u must lie strictly inside the control bounds")
    span = cfg.u_span
    return float(span / cfg.sat_steepness * np.log((u - cfg.u_min) / (cfg.u_max - u)))


def hamiltonian(x: np.ndarray, lam: np.ndarray, u, nu, beta,
                cfg: OcpConfig, model: SuperOperatorModel) -> float:
    """Control Hamiltonian including the equality-constraint multiplier."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    gen = model.generator(u)
    value = (cfg.energy_weight * float(u @ u)
             + cfg.reg_weight * float(nu @ nu)
             + float(lam @ (gen @ x))
             + float(beta @ (u - saturation(nu, cfg))))
    return value


@dataclass
class UnknownSet:
    """TFC approximants for every unknown of the boundary value problem.

    expr_state carries two-point constraints, expr_costate a final-point
    constraint (or none when the terminal transversality on the costate is
    disabled), and the control-side unknowns are free functions.  All share
    one TimeMorph whose c_map doubles as the free-final-time decision scalar.
    """

    expr_state: ConstrainedExpression
    expr_costate: ConstrainedExpression
    expr_control: ConstrainedExpression
    expr_sat_input: ConstrainedExpression
    expr_multiplier: ConstrainedExpression

    @property
    def morph(self):
        return self.expr_state.morph

    def refresh(self):
        for e in (self.expr_state, self.expr_costate, self.expr_control,
                  self.expr_sat_input, self.expr_multiplier):
            e.refresh()


@dataclass
class ResidualWeights:
    """Optional per-family scaling hook; all ones leaves the raw residual."""

    state: float = 1.0
    costate: float = 1.0
    control: float = 1.0
    sat_input: float = 1.0
    constraint: float = 1.0
    terminal: float = 1.0


@dataclass
class ResidualVector:
    state: np.ndarray       # (N, dim)
    costate: np.ndarray     # (N, dim)
    control: np.ndarray     # (N, nc)
    sat_input: np.ndarray   # (N, nc)
    constraint: np.ndarray  # (N, nc)
    terminal: float
    weights: ResidualWeights = field(default_factory=ResidualWeights)

    def concat(self) -> np.ndarray:
        w = self.weights
        return np.concatenate([
            (w.state * self.state).ravel(),
            (w.costate * self.costate).ravel(),
            (w.control * self.control).ravel(),
            (w.sat_input * self.sat_input).ravel(),
            (w.constraint * self.constraint).ravel(),
            [w.terminal * self.terminal],
        ])

    def breakdown(self) -> dict:
        def l2(a):
            return float(np.linalg.norm(np.asarray(a).ravel()))
        return {
            "L2_total": l2(self.concat()),
            "L2_rho": l2(self.state),
            "L2_lambda": l2(self.costate),
            "L2_u": l2(self.control),
            "L2_nu": l2(self.sat_input),
            "L2_phi": l2(self.constraint),
            "Xi_H": float(self.terminal),
        }


def residuals(unknowns: UnknownSet, cfg: OcpConfig, model: SuperOperatorModel,
              nodes: np.ndarray, weights: ResidualWeights = None) -> ResidualVector:
    """Evaluate every residual family at the collocation nodes.

    The terminal Hamiltonian row is taken at the last node, which must be
    the final boundary (no extrapolation).
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.shape[0]
    dim = model.dim
    nc = model.n_controls
    r_state = np.empty((n, dim))
    r_costate = np.empty((n, dim))
    r_control = np.empty((n, nc))
    r_sat = np.empty((n, nc))
    r_constraint = np.empty((n, nc))
    last = None
    for i, tau in enumerate(nodes):
        x, xdot = unknowns.expr_state.eval(tau)
        lam, lamdot = unknowns.expr_costate.eval(tau)
        u, _ = unknowns.expr_control.eval(tau)
        nu, _ = unknowns.expr_sat_input.eval(tau)
        beta, _ = unknowns.expr_multiplier.eval(tau)
        gen = model.generator(u)
        r_state[i] = xdot - gen @ x
        r_costate[i] = lamdot + gen.T @ lam
        for c in range(nc):
            r_control[i, c] = (lam @ (model.generator_du[c] @ x)
                               + 2.0 * cfg.energy_weight * u[c] + beta[c])
        phi_d = saturation_dnu(nu, cfg)
        r_sat[i] = 2.0 * cfg.reg_weight * nu - beta * phi_d
        r_constraint[i] = u - saturation(nu, cfg)
        last = (x, lam, u, nu, beta)
    x, lam, u, nu, beta = last
    terminal = hamiltonian(x, lam, u, nu, beta, cfg, model) + cfg.time_weight
    return ResidualVector(
        state=r_state, costate=r_costate, control=r_control,
        sat_input=r_sat, constraint=r_constraint, terminal=terminal,
        weights=weights or ResidualWeights(),
    )
