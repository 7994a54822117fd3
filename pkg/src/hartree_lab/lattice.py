"""Periodic 1D lattice: grids, sampled fields, discrete operators and norms.

All norms and inner products carry the grid weight ``h`` so that they
approximate their continuum counterparts, e.g. ``||f||_p = (sum h |f|^p)^(1/p)``.
Site ``i`` sits at ``x_i = i * h``; a field used as a pair potential is indexed
by displacement, so ``v.values[i]`` is ``v(i * h)`` with periodic wrap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

EVEN_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    length: float
    points: int

    def __post_init__(self):
        if not (self.length > 0) or not math.isfinite(self.length):
            raise InvalidArgumentError(f"grid length must be positive, got {self.length}")
        if int(self.points) != self.points or self.points < 2:
            raise InvalidArgumentError(f"grid needs at least 2 points, got {self.points}")
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "points", int(self.points))

    @property
    def spacing(self) -> float:
        return self.length / self.points

    def positions(self) -> np.ndarray:
        return np.arange(self.points) * self.spacing

    def displacements(self) -> np.ndarray:
        """Signed displacement for each site index, in ``[-L/2, L/2)``."""
        idx = np.arange(self.points)
        signed = np.where(idx < (self.points + 1) // 2, idx, idx - self.points)
        return signed * self.spacing

    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    def laplacian_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the second-difference operator in FFT ordering."""
        m = np.arange(self.points)
        h = self.spacing
        return -(2.0 / h**2) * (1.0 - np.cos(2 * np.pi * m / self.points))


@dataclass(frozen=True, eq=False)
class LatticeField:
    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1 or values.shape[0] != self.grid.points:
            raise InvalidArgumentError(
                f"field has shape {values.shape}, grid has {self.grid.points} points"
            )
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.grid.points

    def with_values(self, values) -> "LatticeField":
        return LatticeField(np.asarray(values), self.grid)

    def is_even(self, tol: float = EVEN_TOL) -> bool:
        mirrored = self.values[(-np.arange(self.grid.points)) % self.grid.points]
        return bool(np.max(np.abs(self.values - mirrored)) <= tol)


def build_grid(length: float, points: int) -> GridSpec:
    return GridSpec(length, points)


def field(values, grid: GridSpec) -> LatticeField:
    return LatticeField(np.asarray(values), grid)


def _same_grid(f: LatticeField, g: LatticeField):
    if f.grid != g.grid:
        raise InvalidArgumentError(f"grid mismatch: {f.grid} vs {g.grid}")


def laplacian(f: LatticeField) -> LatticeField:
    h = f.grid.spacing
    v = f.values
    return f.with_values((np.roll(v, -1) - 2 * v + np.roll(v, 1)) / h**2)


def laplacian_matrix(grid: GridSpec) -> np.ndarray:
    """Dense periodic second-difference matrix (``M == 2`` folds both neighbours)."""
    M, h = grid.points, grid.spacing
    mat = np.zeros((M, M))
    for i in range(M):
        mat[i, i] -= 2.0
        mat[i, (i + 1) % M] += 1.0
        mat[i, (i - 1) % M] += 1.0
    return mat / h**2


def inner(f: LatticeField, g: LatticeField) -> complex:
    """Discrete inner product ``sum h conj(f) g``."""
    _same_grid(f, g)
    return complex(f.grid.spacing * np.vdot(f.values, g.values))


def lp_norm(f: LatticeField, p: float) -> float:
    if p == math.inf or p == "inf":
        return float(np.max(np.abs(f.values))) if f.values.size else 0.0
    p = float(p)
    if not p >= 1:
        raise InvalidArgumentError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(f.values)
    scale = a.max()
    if scale == 0:
        return 0.0
    # factor out the max so large p does not overflow
    return float(scale * (f.grid.spacing * np.sum((a / scale) ** p)) ** (1.0 / p))


def convolve(f: LatticeField, g: LatticeField) -> LatticeField:
    """Periodic convolution ``(f*g)(x_i) = sum_j h f(x_i - x_j) g(x_j)`` via FFT."""
    _same_grid(f, g)
    out = f.grid.spacing * np.fft.ifft(np.fft.fft(f.values) * np.fft.fft(g.values))
    if np.isrealobj(f.values) and np.isrealobj(g.values):
        out = out.real
    return f.with_values(out)


def sample_interaction(v_base: LatticeField, N: int, beta: float, dim: int = 1) -> LatticeField:
    """Return ``v_N(x) = N^(-1 + dim*beta) v(N^beta x)`` on the grid.

    ``v_base`` is read as a function on ``[-L/2, L/2)`` that vanishes outside
    the box; the stretched argument is rounded to the nearest grid point.
    """
    if N < 1:
        raise InvalidArgumentError(f"particle number must be >= 1, got {N}")
    if not v_base.is_even():
        raise InvalidArgumentError("interaction profile must be even, v(x) = v(-x)")
    amplitude = float(N) ** (-1.0 + dim * beta)
    if beta == 0:
        return v_base.with_values(v_base.values * amplitude)
    M = v_base.grid.points
    signed = np.rint(v_base.grid.displacements() / v_base.grid.spacing)
    stretched = np.rint(signed * float(N) ** beta)
    inside = (stretched >= -(M // 2)) & (stretched <= (M - 1) // 2)
    if M % 2 == 0:
        # -M/2 and +M/2 are the same periodic site; keep both so the result stays even
        inside |= stretched == M // 2
    src = np.mod(stretched, M).astype(int)
    values = np.where(inside, v_base.values[src], 0.0) * amplitude
    return v_base.with_values(values)
