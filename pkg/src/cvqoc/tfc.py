"""Constrained expressions with cubic switching functions.

An approximant y_hat(tau) combines a free function theta(tau) with up to two
boundary constraints so that the boundary values are met exactly no matter
what the free function does.  Physical time t and the internal coordinate
tau are related by tau = tau0 + c_map * (t - t0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

DOMAIN_TOL = 1e-9


@dataclass
class TimeMorph:
    """Affine map between physical time [t0, tf] and the collocation domain."""

    t0: float
    tau0: float
    tauf: float
    c_map: float

    def __post_init__(self):
        if self.tauf <= self.tau0:
            raise ValueError("tauf must exceed tau0")
        if not (np.isfinite(self.c_map) and self.c_map > 0):
            raise ValueError("morph rate must be a positive finite number")

    @classmethod
    def from_times(cls, t0: float, tf: float, tau0: float, tauf: float) -> "TimeMorph":
        if tf <= t0:
            raise ValueError("tf must exceed t0")
        return cls(t0=t0, tau0=tau0, tauf=tauf, c_map=(tauf - tau0) / (tf - t0))

    @property
    def tf(self) -> float:
        return self.t0 + (self.tauf - self.tau0) / self.c_map

    def to_tau(self, t):
        return self.tau0 + self.c_map * (np.asarray(t, dtype=float) - self.t0)

    def to_time(self, tau):
        return self.t0 + (np.asarray(tau, dtype=float) - self.tau0) / self.c_map


def _check_domain(tau, morph: TimeMorph) -> None:
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < morph.tau0 - DOMAIN_TOL) or np.any(tau > morph.tauf + DOMAIN_TOL):
        raise ValueError(
            f"tau={tau} outside morph domain [{morph.tau0}, {morph.tauf}]"
        )


def omega(k: int, tau, morph: TimeMorph):
    """Cubic switching function: omega(1) is 1 at tau0 and 0 at tauf,
    omega(2) the reverse; both have vanishing endpoint slopes."""
    _check_domain(tau, morph)
    dt = np.asarray(tau, dtype=float) - morph.tau0
    dtf = morph.tauf - morph.tau0
    s = dt / dtf
    if k == 1:
        return 1.0 + 2.0 * s**3 - 3.0 * s**2
    if k == 2:
        return -2.0 * s**3 + 3.0 * s**2
    raise ValueError(f"switching index must be 1 or 2, got {k}")


def omega_prime(k: int, tau, morph: TimeMorph):
    """d omega / d tau; zero at both endpoints by construction."""
    _check_domain(tau, morph)
    dt = np.asarray(tau, dtype=float) - morph.tau0
    dtf = morph.tauf - morph.tau0
    s = dt / dtf
    core = (6.0 * s**2 - 6.0 * s) / dtf
    if k == 1:
        return core
    if k == 2:
        return -core
    raise ValueError(f"switching index must be 1 or 2, got {k}")


@dataclass
class BoundaryConstraint:
    location: str  # "initial" or "final"
    value: np.ndarray

    def __post_init__(self):
        if self.location not in ("initial", "final"):
            raise ValueError(f"unknown boundary location {self.location!r}")
        self.value = np.atleast_1d(np.asarray(self.value, dtype=float))
        if not np.all(np.isfinite(self.value)):
            raise ValueError("boundary value must be finite")


class ConstrainedExpression:
    """Boundary-exact approximant built from a free function.

    free_function(tau) must return (theta, dtheta_dtau), each of shape (d,).
    Endpoint values of theta are cached; the cache is tied to version_fn()
    and refreshed automatically whenever the reported version changes.
    """

    def __init__(self, free_function: Callable, constraints: list, morph: TimeMorph,
                 version_fn: Optional[Callable] = None):
        self.free_function = free_function
        self.morph = morph
        self.version_fn = version_fn
        self.initial = None
        self.final = None
        for c in constraints:
            if c.location == "initial":
                if self.initial is not None:
                    raise ValueError("duplicate initial constraint")
                self.initial = c.value
            else:
                if self.final is not None:
                    raise ValueError("duplicate final constraint")
                self.final = c.value
        self._cache_version = None
        self._fresh = False
        self._theta0 = None
        self._thetaf = None

    def refresh(self) -> None:
        """Recompute the cached endpoint values of the free function."""
        if self.initial is not None:
            self._theta0 = np.atleast_1d(self.free_function(self.morph.tau0)[0])
        if self.final is not None:
            self._thetaf = np.atleast_1d(self.free_function(self.morph.tauf)[0])
        self._cache_version = self.version_fn() if self.version_fn else None
        self._fresh = True

    def _ensure_fresh(self) -> None:
        if not self._fresh:
            self.refresh()
            return
        if self.version_fn is not None and self.version_fn() != self._cache_version:
            self.refresh()

    def eval(self, tau: float):
        """(y_hat(tau), d y_hat / dt), with d/dt = c_map * d/dtau."""
        _check_domain(tau, self.morph)
        self._ensure_fresh()
        theta, dtheta = self.free_function(tau)
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        dtheta = np.atleast_1d(np.asarray(dtheta, dtype=float))
        value = theta.copy()
        dvalue = dtheta.copy()
        if self.initial is not None:
            w = omega(1, tau, self.morph)
            wp = omega_prime(1, tau, self.morph)
            value += w * (self.initial - self._theta0)
            dvalue += wp * (self.initial - self._theta0)
        if self.final is not None:
            w = omega(2, tau, self.morph)
            wp = omega_prime(2, tau, self.morph)
            value += w * (self.final - self._thetaf)
            dvalue += wp * (self.final - self._thetaf)
        return value, self.morph.c_map * dvalue


def chebyshev_lobatto_nodes(n: int, morph: TimeMorph) -> np.ndarray:
    """n Chebyshev-Gauss-Lobatto points on [tau0, tauf], endpoints included,
    in increasing order."""
    if n < 2:
        raise ValueError("need at least two collocation nodes")
    k = np.arange(n)
    ref = -np.cos(np.pi * k / (n - 1))  # [-1, 1]
    return morph.tau0 + (ref + 1.0) * 0.5 * (morph.tauf - morph.tau0)
