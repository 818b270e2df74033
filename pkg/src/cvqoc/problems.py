"""Collocation problems wiring circuits, constrained expressions and residuals.

The decision vector concatenates the output weights of every unknown, the
flattened circuit parameters, and (for the free-final-time problem) the
morph rate.  Feature evaluations are cached per circuit and invalidated by
the circuit version counters, so weight-only perturbations never re-run the
quantum simulation.
"""

from __future__ import annotations

import numpy as np

from . import cvqnn, fock, pmp
from .lindblad import SuperOperatorModel, propagate_rk4
from .optimize import DecisionVector
from .tfc import BoundaryConstraint, ConstrainedExpression, TimeMorph, chebyshev_lobatto_nodes


class VersionCounter:
    __slots__ = ("value",)

    def __init__(self):
        self.value = 0

    def bump(self):
        self.value += 1

    def __call__(self):
        return self.value


class FeatureCache:
    """Per-circuit memo of sigma_l(tau); derivative by central difference."""

    def __init__(self, bank: cvqnn.QnnBank, deriv_step: float):
        self.bank = bank
        self.deriv_step = deriv_step
        self._states = {}   # tau -> encoded input amplitudes
        self._x_op = fock.quadrature_x(bank.cutoff)
        self._per_circuit = [{"version": None, "values": {}} for _ in bank.circuits]

    def _encoded(self, tau: float) -> np.ndarray:
        amps = self._states.get(tau)
        if amps is None:
            amps = cvqnn.encode_input(tau, self.bank.cutoff).amplitudes
            self._states[tau] = amps
        return amps

    def _value(self, l: int, tau: float) -> float:
        circ = self.bank.circuits[l]
        slot = self._per_circuit[l]
        if slot["version"] != circ.version:
            slot["values"] = {}
            slot["version"] = circ.version
        val = slot["values"].get(tau)
        if val is None:
            psi = circ.unitary() @ self._encoded(tau)
            val = float(np.vdot(psi, self._x_op.entries @ psi).real)
            slot["values"][tau] = val
        return val

    def features(self, tau: float):
        """(sigma(tau), d sigma / d tau), each of shape (L,)."""
        h = self.deriv_step
        L = self.bank.n_features
        sig = np.empty(L)
        dsig = np.empty(L)
        for l in range(L):
            sig[l] = self._value(l, tau)
            dsig[l] = (self._value(l, tau + h) - self._value(l, tau - h)) / (2.0 * h)
        return sig, dsig


class WeightedFreeFunction:
    """theta(tau) = sigma(tau)^T xi with xi of shape (L, d), written in place."""

    def __init__(self, cache: FeatureCache, xi: np.ndarray):
        self.cache = cache
        self.xi = xi

    def __call__(self, tau: float):
        sig, dsig = self.cache.features(tau)
        return sig @ self.xi, dsig @ self.xi


class OdeBenchmarkProblem:
    """Scalar linear ODE y' = rate * y, y(t0) = y0, on a fixed horizon."""

    def __init__(self, bank: cvqnn.QnnBank, morph: TimeMorph, n_nodes: int,
                 rate: float, y0: float, deriv_step: float = None):
        self.bank = bank
        self.morph = morph
        self.rate = rate
        self.nodes = chebyshev_lobatto_nodes(n_nodes, morph)
        if deriv_step is None:
            deriv_step = 1e-4 * (morph.tauf - morph.tau0)
        self.cache = FeatureCache(bank, deriv_step)
        self.counter = VersionCounter()
        L = bank.n_features
        self._xi = np.zeros((L, 1))
        self.expr = ConstrainedExpression(
            WeightedFreeFunction(self.cache, self._xi),
            [BoundaryConstraint("initial", [y0])], morph, version_fn=self.counter,
        )
        theta_len = bank.get_flat().shape[0]
        self.decision = DecisionVector(
            values=np.concatenate([np.zeros(L), bank.get_flat()]),
            blocks={"xi": slice(0, L), "theta": slice(L, L + theta_len)},
        )
        self.xi_mask = np.zeros(L + theta_len, dtype=bool)
        self.xi_mask[:L] = True
        self.theta_mask = ~self.xi_mask
        self._theta_current = bank.get_flat()

    def bounds(self):
        return []

    def _sync(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        L = self.bank.n_features
        self._xi[:, 0] = values[:L]
        theta = values[L:]
        if not np.array_equal(theta, self._theta_current):
            self.bank.set_flat(theta)
            self._theta_current = theta.copy()
        self.counter.bump()

    def residual(self, values: np.ndarray) -> np.ndarray:
        self._sync(values)
        out = np.empty(self.nodes.shape[0])
        for i, tau in enumerate(self.nodes):
            y, ydot = self.expr.eval(tau)
            out[i] = ydot[0] - self.rate * y[0]
        return out

    def solution(self, t_grid: np.ndarray) -> np.ndarray:
        self._sync(self.decision.values)
        taus = self.morph.to_tau(t_grid)
        return np.array([self.expr.eval(tau)[0][0] for tau in taus])


class QocProblem:
    """PMP collocation problem for a superoperator model with box-bounded
    controls and free final time (decision scalar: morph rate)."""

    def __init__(self, bank: cvqnn.QnnBank, cfg: pmp.OcpConfig,
                 model: SuperOperatorModel, morph: TimeMorph, n_nodes: int,
                 weights: pmp.ResidualWeights = None,
                 c_map_bounds: tuple = (0.05, 20.0), deriv_step: float = None):
        self.bank = bank
        self.cfg = cfg
        self.model = model
        self.morph = morph
        self.weights = weights
        self.c_map_bounds = c_map_bounds
        self.nodes = chebyshev_lobatto_nodes(n_nodes, morph)
        if deriv_step is None:
            deriv_step = 1e-4 * (morph.tauf - morph.tau0)
        self.cache = FeatureCache(bank, deriv_step)
        self.counter = VersionCounter()
        L = bank.n_features
        dim = model.dim
        nc = model.n_controls
        self._xi = {
            "xi_state": np.zeros((L, dim)),
            "xi_costate": np.zeros((L, dim)),
            "xi_u": np.zeros((L, nc)),
            "xi_nu": np.zeros((L, nc)),
            "xi_beta": np.zeros((L, nc)),
        }
        costate_constraints = []
        if cfg.costate_terminal_constraint:
            costate_constraints = [BoundaryConstraint("final", cfg.costate_final)]
        self.unknowns = pmp.UnknownSet(
            expr_state=ConstrainedExpression(
                WeightedFreeFunction(self.cache, self._xi["xi_state"]),
                [BoundaryConstraint("initial", cfg.rho_init),
                 BoundaryConstraint("final", cfg.rho_target)],
                morph, version_fn=self.counter),
            expr_costate=ConstrainedExpression(
                WeightedFreeFunction(self.cache, self._xi["xi_costate"]),
                costate_constraints, morph, version_fn=self.counter),
            expr_control=ConstrainedExpression(
                WeightedFreeFunction(self.cache, self._xi["xi_u"]),
                [], morph, version_fn=self.counter),
            expr_sat_input=ConstrainedExpression(
                WeightedFreeFunction(self.cache, self._xi["xi_nu"]),
                [], morph, version_fn=self.counter),
            expr_multiplier=ConstrainedExpression(
                WeightedFreeFunction(self.cache, self._xi["xi_beta"]),
                [], morph, version_fn=self.counter),
        )
        blocks = {}
        sizes = [("xi_state", L * dim), ("xi_costate", L * dim),
                 ("xi_u", L * nc), ("xi_nu", L * nc), ("xi_beta", L * nc)]
        theta_len = bank.get_flat().shape[0]
        sizes.append(("theta", theta_len))
        sizes.append(("c_map", 1))
        pos = 0
        for name, size in sizes:
            blocks[name] = slice(pos, pos + size)
            pos += size
        init = np.zeros(pos)
        init[blocks["theta"]] = bank.get_flat()
        init[blocks["c_map"]] = morph.c_map
        self.decision = DecisionVector(values=init, blocks=blocks)
        self.xi_mask = np.ones(pos, dtype=bool)
        self.xi_mask[blocks["theta"]] = False
        self.theta_mask = np.zeros(pos, dtype=bool)
        self.theta_mask[blocks["theta"]] = True
        self._theta_current = bank.get_flat()

    def bounds(self):
        return [(self.decision.blocks["c_map"].start, *self.c_map_bounds)]

    def _sync(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        blocks = self.decision.blocks
        for name, arr in self._xi.items():
            arr[...] = values[blocks[name]].reshape(arr.shape)
        theta = values[blocks["theta"]]
        if not np.array_equal(theta, self._theta_current):
            self.bank.set_flat(theta)
            self._theta_current = theta.copy()
        lo, hi = self.c_map_bounds
        self.morph.c_map = float(np.clip(values[blocks["c_map"]][0], lo, hi))
        self.counter.bump()

    def residual_vector(self, values: np.ndarray) -> pmp.ResidualVector:
        self._sync(values)
        return pmp.residuals(self.unknowns, self.cfg, self.model, self.nodes,
                             self.weights)

    def residual(self, values: np.ndarray) -> np.ndarray:
        return self.residual_vector(values).concat()

    # --- trained-solution accessors -------------------------------------

    def _eval_grid(self, expr, t_grid):
        self._sync(self.decision.values)
        taus = self.morph.to_tau(np.asarray(t_grid, dtype=float))
        return np.array([expr.eval(tau)[0] for tau in taus])

    def state_trajectory(self, t_grid):
        return self._eval_grid(self.unknowns.expr_state, t_grid)

    def costate_trajectory(self, t_grid):
        return self._eval_grid(self.unknowns.expr_costate, t_grid)

    def control_trajectory(self, t_grid):
        return self._eval_grid(self.unknowns.expr_control, t_grid)

    def control_function(self):
        """u(t) callable for the RK4 verifier; clamps tau to the domain edge
        to tolerate endpoint rounding."""
        self._sync(self.decision.values)
        morph = self.morph

        def u_of_t(t):
            tau = float(np.clip(morph.to_tau(t), morph.tau0, morph.tauf))
            return self.unknowns.expr_control.eval(tau)[0]

        return u_of_t

    def final_time(self) -> float:
        self._sync(self.decision.values)
        return self.morph.tf

    def terminal_state_error(self) -> float:
        """Distance between the trained state at tf and the target; exact
        zero up to rounding by construction."""
        x_end, _ = self.unknowns.expr_state.eval(self.morph.tauf)
        return float(np.linalg.norm(x_end - self.cfg.rho_target))

    def verify_rk4(self, steps: int = 2000):
        """Propagate the learned control with RK4 and report the endpoint gap."""
        self._sync(self.decision.values)
        ts, xs = propagate_rk4(self.model, self.cfg.rho_init,
                               self.control_function(),
                               self.cfg.t0, self.morph.tf, steps)
        gap = float(np.linalg.norm(xs[-1] - self.cfg.rho_target))
        return ts, xs, gap
