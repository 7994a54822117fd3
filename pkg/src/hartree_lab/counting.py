"""Counting of particles outside a reference orbital.

``P_{N,k}`` projects onto the part of a symmetric state with exactly ``k``
particles outside ``phi``.  After rotating the state into a mode basis whose
first mode is ``phi`` this is just the sector with ``N - k`` particles in
mode 0, so the counting spectrum, the weighted functionals and the powers
of ``nhat = sum_k (k/N) P_{N,k}`` are all diagonal there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InvalidArgumentError
from .fock import (
    ManyBodyState,
    annihilate,
    annihilated_vectors,
    givens_factors,
    rotate_coefficients,
)
from .lattice import GridSpec
from .meanfield import Orbital

WEIGHT_FAMILIES = ("linear", "power", "truncated", "custom")


@dataclass(frozen=True, eq=False)
class AdaptedBasis:
    """Unitary on mode space whose first column is the orbital's mode vector."""

    unitary: np.ndarray
    grid: GridSpec
    _factors: tuple = field(default=None, repr=False)

    def __post_init__(self):
        U = np.asarray(self.unitary, dtype=complex)
        if U.shape != (self.grid.points, self.grid.points):
            raise InvalidArgumentError("adapted basis must be an M x M matrix")
        object.__setattr__(self, "unitary", U)
        if self._factors is None:
            object.__setattr__(self, "_factors", givens_factors(U))

    @property
    def factors(self):
        return self._factors

    @property
    def first_mode(self) -> np.ndarray:
        return self.unitary[:, 0]


def adapted_basis(phi: Orbital) -> AdaptedBasis:
    """Complete ``phi`` to an orthonormal mode basis.

    The completion is a chain of adjacent-mode Givens rotations that carries
    the first unit vector onto ``phi``; it is deterministic and needs only
    ``M - 1`` two-mode rotations to act on Fock states.
    """
    phi.validate()
    c = phi.mode_vector().astype(complex)
    M = c.shape[0]
    A = c.copy()
    rotations = []
    for r in range(M - 1, 0, -1):
        x, y = A[r - 1], A[r]
        if y == 0:
            continue
        rho = math.hypot(abs(x), abs(y))
        G = np.array([[np.conj(x), np.conj(y)], [-y, x]]) / rho
        A[r - 1], A[r] = rho, 0.0
        rotations.append((r - 1, r, G.conj().T))
    phases = np.ones(M, dtype=complex)
    # A[0] has unit modulus up to rounding; keep exactly the phase
    phases[0] = A[0] / abs(A[0])
    U = np.diag(phases)
    for i, j, g in reversed(rotations):
        U[[i, j], :] = g @ U[[i, j], :]
    return AdaptedBasis(U, phi.grid, (rotations, phases))


def _resolve(phi: Union[Orbital, AdaptedBasis]) -> AdaptedBasis:
    return phi if isinstance(phi, AdaptedBasis) else adapted_basis(phi)


def _check(psi: ManyBodyState, basis: AdaptedBasis):
    if basis.grid.points != psi.modes:
        raise InvalidArgumentError(f"orbital has {basis.grid.points} sites, state has {psi.modes} modes")


def adapted_coefficients(psi: ManyBodyState, phi: Union[Orbital, AdaptedBasis]) -> np.ndarray:
    """Coefficients of ``psi`` over occupations of the adapted modes."""
    ab = _resolve(phi)
    _check(psi, ab)
    return rotate_coefficients(psi.coefficients, psi.basis, ab.unitary, ab.factors, adjoint=True)


def outside_count(psi: ManyBodyState) -> np.ndarray:
    """``k = N - n_0`` for every basis state (particles outside mode 0)."""
    return psi.particles - psi.basis.states[:, 0]


@dataclass(frozen=True)
class CountingSpectrum:
    weights: np.ndarray

    @property
    def particles(self) -> int:
        return len(self.weights) - 1

    def total(self) -> float:
        return float(np.sum(self.weights))

    def moment(self, j: float) -> float:
        """``sum_k (k/N)^j w_k``."""
        k = np.arange(self.particles + 1)
        return float(np.sum((k / self.particles) ** j * self.weights))


def counting_spectrum(psi: ManyBodyState, phi: Union[Orbital, AdaptedBasis]) -> CountingSpectrum:
    rotated = adapted_coefficients(psi, phi)
    w = np.bincount(outside_count(psi), weights=np.abs(rotated) ** 2, minlength=psi.particles + 1)
    return CountingSpectrum(w)


@dataclass(frozen=True, eq=False)
class WeightSpec:
    family: str
    particles: int
    table: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in WEIGHT_FAMILIES:
            raise InvalidArgumentError(f"unknown weight family {self.family!r}")
        t = np.asarray(self.table, dtype=float)
        if t.shape != (self.particles + 1,):
            raise InvalidArgumentError(f"weight table needs {self.particles + 1} entries, got {t.shape}")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise InvalidArgumentError("weights must be finite and non-negative")
        object.__setattr__(self, "table", t)

    @property
    def label(self) -> str:
        if self.family == "linear":
            return "linear"
        if self.family == "power":
            return f"power{self.params['exponent']:g}"
        if self.family == "truncated":
            return f"truncated{self.params['gamma']:g}"
        return self.params.get("name", "custom")

    @classmethod
    def linear(cls, N: int) -> "WeightSpec":
        return cls("linear", N, np.arange(N + 1) / N)

    @classmethod
    def power(cls, N: int, exponent: float) -> "WeightSpec":
        if not exponent > 0:
            raise InvalidArgumentError("power weight needs a positive exponent")
        return cls("power", N, (np.arange(N + 1) / N) ** exponent, {"exponent": exponent})

    @classmethod
    def truncated(cls, N: int, gamma: float) -> "WeightSpec":
        """``k / N^gamma`` for ``k <= N^gamma`` and zero above."""
        if not 0 < gamma < 1:
            raise InvalidArgumentError("truncated weight needs 0 < gamma < 1")
        k = np.arange(N + 1)
        cut = float(N) ** gamma
        return cls("truncated", N, np.where(k <= cut, k / cut, 0.0), {"gamma": gamma})

    @classmethod
    def custom(cls, table, name: str = "custom") -> "WeightSpec":
        table = np.asarray(table, dtype=float)
        return cls("custom", len(table) - 1, table, {"name": name})

    @classmethod
    def from_dict(cls, d: dict, N: int) -> "WeightSpec":
        family = d.get("family", "linear")
        if family == "linear":
            return cls.linear(N)
        if family == "power":
            return cls.power(N, float(d["exponent"]))
        if family == "truncated":
            return cls.truncated(N, float(d["gamma"]))
        if family == "custom":
            return cls.custom(d["table"], d.get("name", "custom"))
        raise InvalidArgumentError(f"unknown weight family {family!r}")


def alpha(psi: ManyBodyState, phi: Union[Orbital, AdaptedBasis], weight: WeightSpec) -> float:
    if weight.particles != psi.particles:
        raise InvalidArgumentError(f"weight is for N={weight.particles}, state has N={psi.particles}")
    w = counting_spectrum(psi, phi).weights
    return float(np.dot(weight.table, w))


def _nhat_eigenvalues(N: int, j: float) -> np.ndarray:
    k = np.arange(N + 1) / N
    if j > 0:
        return k**j
    out = np.zeros(N + 1)
    out[1:] = k[1:] ** j
    return out


def nhat_power(psi: ManyBodyState, phi: Union[Orbital, AdaptedBasis], j: float) -> ManyBodyState:
    """``(nhat)^j psi``; for ``j < 0`` the ``k = 0`` sector is annihilated."""
    if j == 0:
        raise InvalidArgumentError("nhat power needs j != 0")
    ab = _resolve(phi)
    rotated = adapted_coefficients(psi, ab)
    rotated *= _nhat_eigenvalues(psi.particles, j)[outside_count(psi)]
    back = rotate_coefficients(rotated, psi.basis, ab.unitary, ab.factors)
    return psi.with_coefficients(back)


def nhat_apply(psi: ManyBodyState, phi: Union[Orbital, AdaptedBasis]) -> ManyBodyState:
    return nhat_power(psi, phi, 1)


def q1_norm_squared(psi: ManyBodyState, phi: Union[Orbital, AdaptedBasis]) -> float:
    """``||q_1 psi||^2 = ||psi||^2 - ||a(phi) psi||^2 / N``."""
    c = _resolve(phi).first_mode
    p1 = annihilate(psi, c).norm() ** 2 / psi.particles
    return float(psi.norm() ** 2 - p1)


@dataclass(frozen=True, eq=False)
class ReducedDensity:
    matrix: np.ndarray

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def expectation(self, f: np.ndarray) -> float:
        return float(np.vdot(f, self.matrix @ f).real)


def reduced_density(psi: ManyBodyState) -> ReducedDensity:
    """One-particle density matrix in mode basis, unit trace for unit ``psi``.

    ``mu[a, b] = <a_b^+ a_a> / N`` so that a condensate gives ``|phi><phi|``.
    """
    X = annihilated_vectors(psi)
    return ReducedDensity(X.T @ X.conj() / psi.particles)


@dataclass(frozen=True, eq=False)
class MuParts:
    pp: np.ndarray
    qp: np.ndarray
    pq: np.ndarray
    qq: np.ndarray

    def total(self) -> np.ndarray:
        return self.pp + self.qp + self.pq + self.qq


def mu_decomposition(psi: ManyBodyState, phi: Union[Orbital, AdaptedBasis]) -> MuParts:
    """Split ``mu`` by ``p = |phi><phi|`` and ``q = 1 - p`` on either side."""
    c = _resolve(phi).first_mode
    mu = reduced_density(psi).matrix
    P = np.outer(c, c.conj())
    Q = np.eye(len(c)) - P
    return MuParts(P @ mu @ P, Q @ mu @ P, P @ mu @ Q, Q @ mu @ Q)


def density_distance(mu: ReducedDensity, phi: Union[Orbital, AdaptedBasis, np.ndarray],
                     norm: str = "operator") -> float:
    if isinstance(phi, np.ndarray):
        c = phi
    else:
        c = _resolve(phi).first_mode if isinstance(phi, AdaptedBasis) else phi.mode_vector()
    sv = np.linalg.svd(mu.matrix - np.outer(c, np.conj(c)), compute_uv=False)
    if norm == "operator":
        return float(sv[0])
    if norm == "trace":
        return float(sv.sum())
    raise InvalidArgumentError(f"unknown norm {norm!r}; use 'operator' or 'trace'")
