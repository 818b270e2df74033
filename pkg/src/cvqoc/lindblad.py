"""Real vectorized generators for open-system dynamics, plus an RK4 oracle.

Density operators are mapped to real vectors: first the populations, then
Re/Im of each upper-triangle coherence in lexicographic order.  For a qubit
with basis (|g>, |e>) this is (rho_gg, rho_ee, Re rho_ge, Im rho_ge).
hbar = 1 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TwoLevelParams:
    gamma_eg: float = 0.1   # absorption rate, jump |e><g|
    gamma_ge: float = 0.3   # emission rate, jump |g><e|
    omega_x: float = 1.0
    omega_z: float = 2.0

    def __post_init__(self):
        if self.gamma_eg < 0 or self.gamma_ge < 0:
            raise ValueError("damping rates must be non-negative")


@dataclass
class ThreeLevelParams:
    delta: float = 0.1    # two-photon detuning
    delta1: float = 1.0   # one-photon detuning (no reference value; configurable)

    def __post_init__(self):
        if not (np.isfinite(self.delta) and np.isfinite(self.delta1)):
            raise ValueError("detunings must be finite")


@dataclass
class RealDensityVector:
    """Validated real parameterization of a d-level density operator."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        d = {4: 2, 9: 3}.get(self.x.shape[0])
        if d is None:
            raise ValueError("length must be 4 (qubit) or 9 (qutrit)")
        self._levels = d
        pops = self.x[:d]
        if abs(float(pops.sum()) - 1.0) > 1e-9:
            raise ValueError(f"populations sum to {pops.sum()}, expected 1")
        if np.any(pops < -1e-9) or np.any(pops > 1 + 1e-9):
            raise ValueError("populations outside [0, 1]")

    @property
    def n_levels(self) -> int:
        return self._levels

    def purity_defect(self) -> float:
        """Qubit determinant diagnostic rho_gg*rho_ee - |rho_ge|^2 (>= 0 for
        physical states); reported, not enforced."""
        if self._levels != 2:
            raise ValueError("diagnostic defined for the qubit map only")
        return float(self.x[0] * self.x[1] - self.x[2] ** 2 - self.x[3] ** 2)


@dataclass
class SuperOperatorModel:
    """Affine-in-control real generator x_dot = L(u) x.

    generator(u) accepts a control vector of length n_controls;
    generator_du[c] is the constant derivative with respect to control c.
    """

    dim: int
    n_controls: int
    generator: callable
    generator_du: list

    def __post_init__(self):
        if self.dim not in (4, 9):
            raise ValueError("supported dims are 4 and 9")
        if len(self.generator_du) != self.n_controls:
            raise ValueError("one derivative matrix per control is required")


def real_basis(d: int) -> list:
    """Hermitian basis matrices matching the real coordinate ordering."""
    out = []
    for j in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[j, j] = 1.0
        out.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = 1.0
            m[k, j] = 1.0
            out.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = 1.0j
            m[k, j] = -1.0j
            out.append(m)
    return out


def to_real(rho: np.ndarray) -> np.ndarray:
    """Hermitian matrix -> real coordinate vector."""
    d = rho.shape[0]
    coords = [rho[j, j].real for j in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            coords.append(rho[j, k].real)
            coords.append(rho[j, k].imag)
    return np.asarray(coords)


def from_real(x: np.ndarray) -> np.ndarray:
    """Real coordinate vector -> Hermitian matrix."""
    x = np.asarray(x, dtype=float)
    d = {4: 2, 9: 3}.get(x.shape[0])
    if d is None:
        raise ValueError("length must be 4 or 9")
    rho = np.zeros((d, d), dtype=complex)
    i = d
    for j in range(d):
        rho[j, j] = x[j]
    for j in range(d):
        for k in range(j + 1, d):
            rho[j, k] = x[i] + 1j * x[i + 1]
            rho[k, j] = x[i] - 1j * x[i + 1]
            i += 2
    return rho


def lindblad_rhs(rho: np.ndarray, hamiltonian: np.ndarray, jumps: list) -> np.ndarray:
    out = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for op, rate in jumps:
        opd = op.conj().T
        anti = opd @ op @ rho + rho @ opd @ op
        out += rate * (op @ rho @ opd - 0.5 * anti)
    return out


def lindblad_vectorize(hamiltonian: np.ndarray, jumps: list) -> np.ndarray:
    """Real generator of the master equation in the coordinate basis above.

    jumps is a list of (operator, rate) pairs with rate >= 0.
    """
    hamiltonian = np.asarray(hamiltonian, dtype=complex)
    d = hamiltonian.shape[0]
    if np.max(np.abs(hamiltonian - hamiltonian.conj().T)) > 1e-10:
        raise ValueError("Hamiltonian must be Hermitian")
    for _, rate in jumps:
        if rate < 0:
            raise ValueError("damping rates must be non-negative")
    basis = real_basis(d)
    cols = [to_real(lindblad_rhs(b, hamiltonian, jumps)) for b in basis]
    return np.column_stack(cols)


def two_level_generator(p: TwoLevelParams, u: float) -> np.ndarray:
    """Qubit superoperator for drift (omega_x, omega_z), phase-damping
    control u on |e><e|, and absorption/emission jumps."""
    if not np.isfinite(u):
        raise ValueError("control must be finite")
    geg, gge, wx, wz = p.gamma_eg, p.gamma_ge, p.omega_x, p.omega_z
    gbar = 0.5 * (gge + geg)
    rot = 2.0 * wz + u
    return np.array([
        [-geg,  gge,  0.0,  -2.0 * wx],
        [geg,  -gge,  0.0,   2.0 * wx],
        [0.0,   0.0, -gbar, -rot],
        [wx,   -wx,   rot,  -gbar],
    ])


def two_level_generator_du(p: TwoLevelParams) -> np.ndarray:
    out = np.zeros((4, 4))
    out[2, 3] = -1.0
    out[3, 2] = 1.0
    return out


def two_level_hamiltonian(p: TwoLevelParams, u: float) -> np.ndarray:
    """H = omega_x (sigma_eg + sigma_ge) + omega_z (sigma_ee - sigma_gg)
    + u sigma_ee, in the basis (|g>, |e>)."""
    return np.array([
        [-p.omega_z, p.omega_x],
        [p.omega_x, p.omega_z + u],
    ], dtype=complex)


def two_level_jumps(p: TwoLevelParams) -> list:
    sigma_eg = np.array([[0, 0], [1, 0]], dtype=complex)  # |e><g|
    sigma_ge = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
    return [(sigma_eg, p.gamma_eg), (sigma_ge, p.gamma_ge)]


def two_level_model(p: TwoLevelParams) -> SuperOperatorModel:
    du = two_level_generator_du(p)
    return SuperOperatorModel(
        dim=4, n_controls=1,
        generator=lambda u: two_level_generator(p, float(np.atleast_1d(u)[0])),
        generator_du=[du],
    )


def three_level_generator(p: ThreeLevelParams, u_p: float, u_s: float) -> np.ndarray:
    """Closed lambda-system generator, hand-derived from rho_dot = -i[H, rho].

    Coordinates: (r11, r22, r33, Re r12, Im r12, Re r13, Im r13, Re r23, Im r23).
    H couples 1-3 with u_p/2 and 2-3 with u_s/2; levels 2 and 3 sit at the
    detunings delta and delta1.
    """
    if not (np.isfinite(u_p) and np.isfinite(u_s)):
        raise ValueError("controls must be finite")
    d, d1 = p.delta, p.delta1
    hp, hs = 0.5 * u_p, 0.5 * u_s
    g = np.zeros((9, 9))
    # populations
    g[0, 6] = -2.0 * hp          # r11' = -u_p Im r13
    g[1, 8] = -2.0 * hs          # r22' = -u_s Im r23
    g[2, 6] = 2.0 * hp           # r33' = u_p Im r13 + u_s Im r23
    g[2, 8] = 2.0 * hs
    # r12 = a + ib
    g[3, 4] = -d                 # a' = -delta b - hp Im r23 - hs Im r13
    g[3, 8] = -hp
    g[3, 6] = -hs
    g[4, 3] = d                  # b' = delta a + hs Re r13 - hp Re r23
    g[4, 5] = hs
    g[4, 7] = -hp
    # r13 = c + id
    g[5, 4] = -hs                # c' = -hs Im r12 - delta1 Im r13
    g[5, 6] = -d1
    g[6, 0] = hp                 # d' = hp (r11 - r33) + hs Re r12 + delta1 Re r13
    g[6, 2] = -hp
    g[6, 3] = hs
    g[6, 5] = d1
    # r23 = e + if
    g[7, 8] = d - d1             # e' = (delta - delta1) Im r23 + hp Im r12
    g[7, 4] = hp
    g[8, 7] = d1 - d             # f' = (delta1 - delta) Re r23 + hs (r22 - r33) + hp Re r12
    g[8, 1] = hs
    g[8, 2] = -hs
    g[8, 3] = hp
    return g


def three_level_hamiltonian(p: ThreeLevelParams, u_p: float, u_s: float) -> np.ndarray:
    return np.array([
        [0.0, 0.0, 0.5 * u_p],
        [0.0, p.delta, 0.5 * u_s],
        [0.5 * u_p, 0.5 * u_s, p.delta1],
    ], dtype=complex)


def three_level_model(p: ThreeLevelParams, jumps: list = None) -> SuperOperatorModel:
    """Closed dynamics by default; jump operators (3x3 matrix, rate) may be
    attached, in which case the generic vectorizer supplies the generator."""
    zero = np.zeros((3, 3), dtype=complex)
    base_jumps = jumps or []

    def gen(u):
        u = np.atleast_1d(u)
        if base_jumps:
            h = three_level_hamiltonian(p, float(u[0]), float(u[1]))
            return lindblad_vectorize(h, base_jumps)
        return three_level_generator(p, float(u[0]), float(u[1]))

    if base_jumps:
        drift = lindblad_vectorize(three_level_hamiltonian(p, 0.0, 0.0), base_jumps)
        du_p = lindblad_vectorize(three_level_hamiltonian(p, 1.0, 0.0), base_jumps) - drift
        du_s = lindblad_vectorize(three_level_hamiltonian(p, 0.0, 1.0), base_jumps) - drift
    else:
        drift = three_level_generator(p, 0.0, 0.0)
        du_p = three_level_generator(p, 1.0, 0.0) - drift
        du_s = three_level_generator(p, 0.0, 1.0) - drift
    return SuperOperatorModel(dim=9, n_controls=2, generator=gen,
                              generator_du=[du_p, du_s])


def propagate_rk4(model: SuperOperatorModel, x0: np.ndarray, u_of_t: callable,
                  t0: float, tf: float, steps: int):
    """Fixed-step RK4 on x_dot = L(u(t)) x; returns (times, states) including
    both endpoints.  u_of_t(t) returns the control vector at time t."""
    if steps < 10:
        raise ValueError("use at least 10 steps")
    if not tf > t0:
        raise ValueError("tf must exceed t0")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape[0] != model.dim:
        raise ValueError("initial state has wrong dimension")
    h = (tf - t0) / steps
    ts = np.empty(steps + 1)
    xs = np.empty((steps + 1, model.dim))
    ts[0], xs[0] = t0, x
    for i in range(steps):
        t = t0 + i * h

        def f(ti, xi):
            return model.generator(np.atleast_1d(u_of_t(ti))) @ xi

        k1 = f(t, x)
        k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = f(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ts[i + 1] = t + h
        xs[i + 1] = x
    return ts, xs
