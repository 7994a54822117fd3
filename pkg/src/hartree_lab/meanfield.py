"""Hartree propagation ``i d/dt phi = (-Lap + A^t + v * |phi|^2) phi`` on the lattice."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .errors import InstabilityError, InvalidArgumentError
from .lattice import GridSpec, LatticeField, convolve, laplacian, lp_norm

NORM_TOL = 1e-10
STEP_DRIFT_LIMIT = 1e-6

TRAP_KINDS = ("constant", "linear-ramp-off", "quench")
SCHEMES = ("splitting", "explicit-rk4")


@dataclass(frozen=True, eq=False)
class Orbital:
    """Single-particle wave function sampled on the grid.

    The unit-norm invariant is checked by :meth:`validate` rather than on
    construction, so that linear combinations can be propagated as-is.
    """

    field: LatticeField

    @classmethod
    def from_values(cls, grid: GridSpec, values, normalize: bool = False) -> "Orbital":
        values = np.asarray(values, dtype=complex)
        if normalize:
            norm = math.sqrt(grid.spacing * np.sum(np.abs(values) ** 2))
            if norm == 0:
                raise InvalidArgumentError("cannot normalize the zero orbital")
            values = values / norm
        return cls(LatticeField(values, grid))

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def grid(self) -> GridSpec:
        return self.field.grid

    def norm(self) -> float:
        return lp_norm(self.field, 2)

    def mode_vector(self) -> np.ndarray:
        """Coefficients in the orthonormal site-mode basis, ``sqrt(h) * phi``."""
        return math.sqrt(self.grid.spacing) * self.values

    def validate(self, tol: float = NORM_TOL) -> "Orbital":
        if abs(self.norm() - 1.0) > tol:
            raise InvalidArgumentError(f"orbital is not unit norm (norm={self.norm():.3e})")
        return self


@dataclass(frozen=True, eq=False)
class TrapProtocol:
    kind: str
    base_profile: LatticeField
    ramp_time: float = 1.0

    def __post_init__(self):
        if self.kind not in TRAP_KINDS:
            raise InvalidArgumentError(f"unknown trap kind {self.kind!r}, expected one of {TRAP_KINDS}")
        if self.kind != "constant" and not self.ramp_time > 0:
            raise InvalidArgumentError("ramp_time must be positive for ramp and quench traps")

    @classmethod
    def zero(cls, grid: GridSpec) -> "TrapProtocol":
        return cls("constant", LatticeField(np.zeros(grid.points), grid))

    def factor(self, t: float) -> float:
        if self.kind == "constant":
            return 1.0
        if self.kind == "linear-ramp-off":
            return max(0.0, 1.0 - t / self.ramp_time)
        return 1.0 if t < self.ramp_time else 0.0

    def at(self, t: float) -> np.ndarray:
        return self.factor(t) * np.real(self.base_profile.values)

    @property
    def time_independent(self) -> bool:
        return self.kind == "constant" or not np.any(self.base_profile.values)


@dataclass(frozen=True)
class HartreeParams:
    dt: float
    t_final: float
    scheme: str = "splitting"

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if not self.t_final >= 0:
            raise InvalidArgumentError(f"t_final must be >= 0, got {self.t_final}")
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError(f"unknown scheme {self.scheme!r}")
        ratio = self.t_final / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise InvalidArgumentError("t_final must be an integer multiple of dt")

    @property
    def steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass(frozen=True, eq=False)
class OrbitalTrajectory:
    times: np.ndarray
    orbitals: Sequence[Orbital] = dc_field(default_factory=list)

    def __len__(self):
        return len(self.orbitals)

    def __getitem__(self, i) -> Orbital:
        return self.orbitals[i]

    @property
    def final(self) -> Orbital:
        return self.orbitals[-1]


def mean_field_potential(phi: Orbital, v: LatticeField) -> LatticeField:
    """``v * |phi|^2``, real by construction."""
    if phi.grid != v.grid:
        raise InvalidArgumentError("orbital and interaction live on different grids")
    density = phi.field.with_values(np.abs(phi.values) ** 2)
    out = convolve(v.with_values(np.real(v.values)), density)
    return out.with_values(np.real(out.values))


def hartree_energy(phi: Orbital, trap: TrapProtocol, v: LatticeField, t: float = 0.0) -> float:
    """``<phi, (-Lap + A^t) phi> + 1/2 <phi, (v*|phi|^2) phi>``."""
    h = phi.grid.spacing
    psi = phi.values
    one_body = -laplacian(phi.field).values + trap.at(t) * psi
    density = np.abs(psi) ** 2
    e = h * np.vdot(psi, one_body).real
    e += 0.5 * h * np.sum(mean_field_potential(phi, v).values * density)
    return float(e)


def _kinetic_phase(grid: GridSpec, dt: float) -> np.ndarray:
    # -Lap is diagonal in Fourier space with eigenvalues -laplacian_eigenvalues
    return np.exp(-1j * dt * (-grid.laplacian_eigenvalues()))


def _potential(values: np.ndarray, grid: GridSpec, trap: TrapProtocol, v: LatticeField, t: float):
    density = np.abs(values) ** 2
    mf = grid.spacing * np.fft.ifft(np.fft.fft(np.real(v.values)) * np.fft.fft(density)).real
    return trap.at(t) + mf


def _strang(values, potential, kinetic, dt):
    half = np.exp(-0.5j * dt * potential)
    return half * np.fft.ifft(kinetic * np.fft.fft(half * values))


def _split_step(values, grid, trap, v, t, dt):
    pred = _strang(values, _potential(values, grid, trap, v, t), _kinetic_phase(grid, dt / 2), dt / 2)
    mid = _potential(pred, grid, trap, v, t + dt / 2)
    return _strang(values, mid, _kinetic_phase(grid, dt), dt)


def _rk4_step(values, grid, trap, v, t, dt):
    h = grid.spacing

    def rhs(tau, psi):
        lap = (np.roll(psi, -1) - 2 * psi + np.roll(psi, 1)) / h**2
        return -1j * (-lap + _potential(psi, grid, trap, v, tau) * psi)

    k1 = rhs(t, values)
    k2 = rhs(t + dt / 2, values + dt / 2 * k1)
    k3 = rhs(t + dt / 2, values + dt / 2 * k2)
    k4 = rhs(t + dt, values + dt * k3)
    return values + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def hartree_step(phi: Orbital, trap: TrapProtocol, v: LatticeField, t: float, dt: float,
                 scheme: str = "splitting") -> Orbital:
    """Advance ``phi`` from ``t`` to ``t + dt``.

    The splitting scheme is Strang (half potential, full kinetic, half
    potential) with the potential frozen at ``t + dt/2``; the nonlinear part
    there comes from a predictor half-step.  Negative ``dt`` runs backwards.
    """
    if dt == 0:
        return phi
    if phi.grid != v.grid or phi.grid != trap.base_profile.grid:
        raise InvalidArgumentError("orbital, trap and interaction must share a grid")
    if scheme == "splitting":
        out = _split_step(phi.values, phi.grid, trap, v, t, dt)
    elif scheme == "explicit-rk4":
        out = _rk4_step(phi.values, phi.grid, trap, v, t, dt)
    else:
        raise InvalidArgumentError(f"unknown scheme {scheme!r}")
    before = np.linalg.norm(phi.values)
    drift = abs(np.linalg.norm(out) - before) / max(before, 1e-300)
    if not np.isfinite(drift) or drift > STEP_DRIFT_LIMIT:
        raise InstabilityError(
            f"Hartree step changed the norm by {drift:.2e} (scheme={scheme}, dt={dt}); use a smaller dt"
        )
    return Orbital(phi.field.with_values(out))


def evolve_hartree(phi0: Orbital, trap: TrapProtocol, v: LatticeField, params: HartreeParams,
                   t0: float = 0.0, backward: bool = False) -> OrbitalTrajectory:
    """Propagate over ``params.steps`` steps, keeping every sample.

    With ``backward=True`` the steps run from ``t0`` towards ``t0 - t_final``.
    """
    dt = -params.dt if backward else params.dt
    times = t0 + dt * np.arange(params.steps + 1)
    orbitals = [phi0]
    phi = phi0
    for n in range(params.steps):
        phi = hartree_step(phi, trap, v, times[n], dt, params.scheme)
        orbitals.append(phi)
    return OrbitalTrajectory(times, orbitals)


def orbital_norm_series(traj: OrbitalTrajectory, s: float) -> np.ndarray:
    """``||phi^t||_{2s}`` at every sample; ``s = inf`` gives the max norm."""
    p = math.inf if s == math.inf else 2.0 * float(s)
    if p != math.inf and s < 1:
        raise InvalidArgumentError(f"s must be >= 1, got {s}")
    return np.array([lp_norm(phi.field, p) for phi in traj.orbitals])
