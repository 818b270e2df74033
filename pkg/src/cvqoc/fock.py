"""Truncated Fock-basis linear algebra: states, gate matrices, measurements.

Conventions (fixed once so every oracle value is unambiguous):
  x = (a + a^dag) / sqrt(2),  p = i (a^dag - a) / sqrt(2)
so a coherent state D(alpha)|0> has <x> = sqrt(2) Re(alpha).

Gates with a non-diagonal generator (displacement, squeeze, beam splitter)
are built as the matrix exponential of the truncated generator.  The
truncated generator is exactly anti-Hermitian, so the resulting matrix is
exactly unitary; it differs from the untruncated gate only in its action
on high photon-number sectors.  States are never renormalized after a gate
so truncation loss stays observable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import expm

NORM_TOL = 1e-12


@dataclass
class FockVector:
    """Complex amplitudes over the photon-number basis |0>, ..., |D-1>."""

    amplitudes: np.ndarray
    cutoff: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.cutoff,):
            raise ValueError(
                f"amplitude vector has shape {self.amplitudes.shape}, "
                f"expected ({self.cutoff},)"
            )
        n2 = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if n2 > 1.0 + NORM_TOL:
            raise ValueError(f"squared norm {n2} exceeds 1 (not a truncated state)")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class FockOperator:
    """Dense operator on one mode (D x D) or a two-mode tensor space (D^2 x D^2)."""

    entries: np.ndarray
    cutoff: int

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        d = self.entries.shape[0]
        if self.entries.ndim != 2 or self.entries.shape[1] != d:
            raise ValueError("operator matrix must be square")
        size = self.cutoff
        while size < d:
            size *= self.cutoff
        if size != d:
            raise ValueError(
                f"operator dimension {d} is not a power of cutoff {self.cutoff}"
            )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Displacement:
    alpha: complex


@dataclass(frozen=True)
class Rotation:
    phi: float


@dataclass(frozen=True)
class Squeeze:
    r: float


@dataclass(frozen=True)
class BeamSplitter:
    theta: float
    modes: tuple = (0, 1)


@dataclass(frozen=True)
class Kerr:
    kappa: float


GateSpec = Union[Displacement, Rotation, Squeeze, BeamSplitter, Kerr]


def _check_cutoff(cutoff: int) -> None:
    if not isinstance(cutoff, (int, np.integer)) or cutoff < 2:
        raise ValueError(f"cutoff must be an integer >= 2, got {cutoff!r}")


def ladder(cutoff: int) -> tuple[FockOperator, FockOperator]:
    """Annihilation operator a (a[n-1, n] = sqrt(n)) and its adjoint."""
    _check_cutoff(cutoff)
    a = np.zeros((cutoff, cutoff), dtype=complex)
    ns = np.arange(1, cutoff)
    a[ns - 1, ns] = np.sqrt(ns)
    return FockOperator(a, cutoff), FockOperator(a.conj().T, cutoff)


def quadrature_x(cutoff: int) -> FockOperator:
    a, adag = ladder(cutoff)
    return FockOperator((a.entries + adag.entries) / np.sqrt(2.0), cutoff)


def quadrature_p(cutoff: int) -> FockOperator:
    a, adag = ladder(cutoff)
    return FockOperator(1j * (adag.entries - a.entries) / np.sqrt(2.0), cutoff)


def vacuum(cutoff: int) -> FockVector:
    _check_cutoff(cutoff)
    amps = np.zeros(cutoff, dtype=complex)
    amps[0] = 1.0
    return FockVector(amps, cutoff)


def number_state(n: int, cutoff: int) -> FockVector:
    _check_cutoff(cutoff)
    if not 0 <= n < cutoff:
        raise ValueError(f"photon number {n} outside [0, {cutoff})")
    amps = np.zeros(cutoff, dtype=complex)
    amps[n] = 1.0
    return FockVector(amps, cutoff)


def _finite(*values) -> bool:
    for v in values:
        arr = np.asarray(v, dtype=complex)
        if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
            return False
    return True


def gate_matrix(spec: GateSpec, cutoff: int) -> FockOperator:
    """Gate matrix at the given cutoff.

    Diagonal gates (rotation, Kerr) are exact at any cutoff.  The rest are
    matrix exponentials of the truncated generator.  The beam splitter
    returns a two-mode operator of dimension cutoff^2 with mode ordering
    little-endian (first mode of the pair varies fastest).
    """
    _check_cutoff(cutoff)
    n = np.arange(cutoff)
    if isinstance(spec, Rotation):
        if not _finite(spec.phi):
            raise ValueError("non-finite rotation angle")
        return FockOperator(np.diag(np.exp(1j * spec.phi * n)), cutoff)
    if isinstance(spec, Kerr):
        if not _finite(spec.kappa):
            raise ValueError("non-finite Kerr strength")
        return FockOperator(np.diag(np.exp(1j * spec.kappa * n**2)), cutoff)
    a, adag = ladder(cutoff)
    if isinstance(spec, Displacement):
        if not _finite(spec.alpha):
            raise ValueError("non-finite displacement amplitude")
        alpha = complex(spec.alpha)
        gen = alpha * adag.entries - np.conj(alpha) * a.entries
        return FockOperator(expm(gen), cutoff)
    if isinstance(spec, Squeeze):
        if not _finite(spec.r):
            raise ValueError("non-finite squeeze parameter")
        gen = 0.5 * spec.r * (a.entries @ a.entries - adag.entries @ adag.entries)
        return FockOperator(expm(gen), cutoff)
    if isinstance(spec, BeamSplitter):
        if not _finite(spec.theta):
            raise ValueError("non-finite beam-splitter angle")
        eye = np.eye(cutoff)
        # little-endian: mode 0 of the pair is the fast index
        a1 = np.kron(eye, a.entries)
        a2 = np.kron(a.entries, eye)
        gen = spec.theta * (a1.conj().T @ a2 - a1 @ a2.conj().T)
        return FockOperator(expm(gen), cutoff)
    raise TypeError(f"unknown gate spec {spec!r}")


def apply(op: FockOperator, state: FockVector) -> FockVector:
    """op @ state, without renormalization."""
    if op.dim != state.amplitudes.shape[0]:
        raise ValueError(
            f"operator dimension {op.dim} does not match state length "
            f"{state.amplitudes.shape[0]}"
        )
    return FockVector(op.entries @ state.amplitudes, state.cutoff)


def expectation(op: FockOperator, state: FockVector) -> float:
    """Re <state| op |state> for a Hermitian op."""
    if op.dim != state.amplitudes.shape[0]:
        raise ValueError("operator/state dimension mismatch")
    herm_err = np.max(np.abs(op.entries - op.entries.conj().T))
    if herm_err > 1e-10:
        raise ValueError(f"operator is not Hermitian (deviation {herm_err:.3g})")
    val = np.vdot(state.amplitudes, op.entries @ state.amplitudes)
    return float(val.real)


def tensor_embed(op: FockOperator, mode: int, n_modes: int, cutoff: int) -> FockOperator:
    """Kronecker-embed a one-mode (or adjacent-pair two-mode) operator.

    Mode ordering is little-endian: mode 0 varies fastest in the flattened
    index.  A two-mode operator acts on modes (mode, mode + 1).
    """
    _check_cutoff(cutoff)
    if op.dim == cutoff:
        span = 1
    elif op.dim == cutoff**2:
        span = 2
    else:
        raise ValueError("operator dimension matches neither one nor two modes")
    if mode < 0 or mode + span > n_modes:
        raise ValueError(f"mode {mode} (span {span}) out of range for {n_modes} modes")
    above = cutoff ** (n_modes - mode - span)
    below = cutoff**mode
    out = np.kron(np.kron(np.eye(above), op.entries), np.eye(below))
    return FockOperator(out, cutoff)
