"""Symmetric N-boson sector over lattice modes.

Lattice site ``a`` is the single-particle mode ``e_a = delta_{x, x_a} / sqrt(h)``,
so Fock inner products coincide with the h-weighted discrete ones and an
orbital ``phi`` enters through its mode vector ``sqrt(h) * phi``.

Occupation vectors are enumerated in descending lexicographic order,
``(N, 0, ..., 0)`` first, and ranked with a combinatorial offset table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import CapacityError, InstabilityError, InvalidArgumentError
from .krylov import expm_krylov
from .lattice import GridSpec, LatticeField, laplacian_matrix
from .meanfield import Orbital, TrapProtocol

BASIS_CAP = 200_000
TENSOR_CAP = 1_000_000
DENSE_EXPM_DIM = 512
NORM_TOL = 1e-10


def _count(r: int, R: int) -> int:
    """Number of occupation vectors of length ``r`` with total ``R``."""
    if r == 0:
        return 1 if R == 0 else 0
    return math.comb(R + r - 1, r - 1)


@lru_cache(maxsize=None)
def _states(M: int, N: int) -> np.ndarray:
    if M == 1:
        return np.array([[N]], dtype=np.int64)
    blocks = []
    for first in range(N, -1, -1):
        rest = _states(M - 1, N - first)
        blocks.append(np.hstack([np.full((rest.shape[0], 1), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


class FockBasis:
    """Occupation-number basis for ``particles`` bosons in ``modes`` modes."""

    def __init__(self, modes: int, particles: int):
        self.modes = int(modes)
        self.particles = int(particles)
        self.states = _states(self.modes, self.particles)
        self.states.flags.writeable = False
        M, N = self.modes, self.particles
        off = np.zeros((M, N + 1, N + 1), dtype=np.int64)
        for i in range(M):
            for R in range(N + 1):
                acc = 0
                for n in range(R, -1, -1):
                    off[i, R, n] = acc
                    acc += _count(M - i - 1, R - n)
        self._offsets = off
        self._pair_cache: dict = {}
        self._ladder_cache: dict = {}

    def __repr__(self):
        return f"FockBasis(modes={self.modes}, particles={self.particles}, dim={self.dimension})"

    def __eq__(self, other):
        return isinstance(other, FockBasis) and (self.modes, self.particles) == (other.modes, other.particles)

    def __hash__(self):
        return hash((self.modes, self.particles))

    @property
    def dimension(self) -> int:
        return self.states.shape[0]

    def __len__(self):
        return self.dimension

    def ranks(self, occupations) -> np.ndarray:
        occ = np.atleast_2d(np.asarray(occupations, dtype=np.int64))
        remaining = self.particles - np.cumsum(occ, axis=1) + occ
        cols = np.arange(self.modes)
        return self._offsets[cols, remaining, occ].sum(axis=1)

    def index(self, occupation) -> int:
        occ = np.asarray(occupation, dtype=np.int64)
        if occ.shape != (self.modes,) or occ.min() < 0 or occ.sum() != self.particles:
            raise KeyError(tuple(occupation))
        return int(self.ranks(occ)[0])

    def state(self, index: int) -> tuple:
        return tuple(int(n) for n in self.states[index])

    # --- cached structure -------------------------------------------------

    def annihilator(self, mode: int) -> sp.csr_matrix:
        """Sparse ``a_mode`` mapping this sector to the one with a particle less."""
        key = ("a", mode)
        if key not in self._ladder_cache:
            lower = _basis(self.modes, self.particles - 1)
            occ = self.states
            src = np.nonzero(occ[:, mode] > 0)[0]
            target = occ[src].copy()
            target[:, mode] -= 1
            rows = lower.ranks(target)
            vals = np.sqrt(occ[src, mode].astype(float))
            self._ladder_cache[key] = sp.csr_matrix(
                (vals, (rows, src)), shape=(lower.dimension, self.dimension)
            )
        return self._ladder_cache[key]

    def pair_groups(self, i: int, j: int):
        """Index table for two-mode rotations on modes ``(i, j)``.

        Row ``g`` lists the states sharing all occupations except modes ``i, j``;
        column ``m`` holds the state with ``n_i = m``.  Unused slots point at
        the padding index ``dimension``.
        """
        key = (i, j)
        if key not in self._pair_cache:
            N = self.particles
            reps = self.states[self.states[:, i] == 0]
            s = reps[:, j].copy()
            table = np.full((reps.shape[0], N + 1), self.dimension, dtype=np.int64)
            for m in range(N + 1):
                ok = s >= m
                occ = reps[ok].copy()
                occ[:, i] = m
                occ[:, j] = s[ok] - m
                table[ok, m] = self.ranks(occ)
            self._pair_cache[key] = (table, s)
        return self._pair_cache[key]


@lru_cache(maxsize=64)
def _basis(M: int, N: int) -> FockBasis:
    return FockBasis(M, N)


def enumerate_basis(M: int, N: int, cap: int = BASIS_CAP) -> FockBasis:
    if M < 1 or N < 1:
        raise InvalidArgumentError(f"need M >= 1 modes and N >= 1 particles, got M={M}, N={N}")
    dim = math.comb(M + N - 1, N)
    if dim > cap:
        raise CapacityError(f"Fock dimension C({M + N - 1},{N}) = {dim} exceeds cap {cap}")
    basis = _basis(int(M), int(N))
    assert basis.dimension == dim
    return basis


@dataclass(frozen=True, eq=False)
class ManyBodyState:
    """Coefficients over a :class:`FockBasis`.

    States built by the constructors here are unit norm; operator
    applications such as ``nhat_apply`` return unnormalized ones.
    """

    basis: FockBasis
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.basis.dimension,):
            raise InvalidArgumentError(f"expected {self.basis.dimension} coefficients, got {c.shape}")
        object.__setattr__(self, "coefficients", c)

    @property
    def particles(self) -> int:
        return self.basis.particles

    @property
    def modes(self) -> int:
        return self.basis.modes

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def inner(self, other: "ManyBodyState") -> complex:
        return complex(np.vdot(self.coefficients, other.coefficients))

    def with_coefficients(self, c) -> "ManyBodyState":
        return ManyBodyState(self.basis, c)

    def normalized(self) -> "ManyBodyState":
        return self.with_coefficients(self.coefficients / self.norm())

    def validate(self, tol: float = NORM_TOL) -> "ManyBodyState":
        if abs(self.norm() ** 2 - 1.0) > tol:
            raise InvalidArgumentError(f"state is not unit norm (norm^2 - 1 = {self.norm() ** 2 - 1:.2e})")
        return self


def random_state(basis: FockBasis, rng: np.random.Generator) -> ManyBodyState:
    c = rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension)
    return ManyBodyState(basis, c / np.linalg.norm(c))


# --- ladder operators --------------------------------------------------------


def annihilate(psi: ManyBodyState, f: np.ndarray) -> ManyBodyState:
    """``a(f) psi`` for a mode vector ``f`` (antilinear in ``f``)."""
    f = np.asarray(f, dtype=complex)
    lower = _basis(psi.modes, psi.particles - 1)
    out = np.zeros(lower.dimension, dtype=complex)
    for a in np.nonzero(f)[0]:
        out += np.conj(f[a]) * (psi.basis.annihilator(a) @ psi.coefficients)
    return ManyBodyState(lower, out)


def create(psi: ManyBodyState, f: np.ndarray) -> ManyBodyState:
    """``a^dagger(f) psi``."""
    f = np.asarray(f, dtype=complex)
    upper = _basis(psi.modes, psi.particles + 1)
    out = np.zeros(upper.dimension, dtype=complex)
    for a in np.nonzero(f)[0]:
        out += f[a] * (upper.annihilator(a).conj().T @ psi.coefficients)
    return ManyBodyState(upper, out)


def annihilated_vectors(psi: ManyBodyState) -> np.ndarray:
    """Columns ``a_a psi`` for every mode ``a`` (shape ``dim_{N-1} x M``)."""
    return np.column_stack([psi.basis.annihilator(a) @ psi.coefficients for a in range(psi.modes)])


# --- one-body operators and mode rotations -------------------------------------


def one_body_operator(basis: FockBasis, h1: np.ndarray) -> sp.csr_matrix:
    """Second quantization ``sum_ab h1[a, b] a_a^dagger a_b`` as a sparse matrix."""
    h1 = np.asarray(h1)
    occ = basis.states
    dim = basis.dimension
    rows, cols, vals = [], [], []
    diag = occ @ np.diag(h1)
    rows.append(np.arange(dim))
    cols.append(np.arange(dim))
    vals.append(diag.astype(complex))
    for a, b in zip(*np.nonzero(h1)):
        if a == b:
            continue
        src = np.nonzero(occ[:, b] > 0)[0]
        target = occ[src].copy()
        target[:, b] -= 1
        target[:, a] += 1
        rows.append(basis.ranks(target))
        cols.append(src)
        vals.append(h1[a, b] * np.sqrt(occ[src, b] * target[:, a].astype(float)))
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    mat.sum_duplicates()
    return mat


@lru_cache(maxsize=16)
def _two_mode_tables(N: int):
    """Index and coefficient tables for the s-boson representation of a 2x2 unitary."""
    fact = [math.factorial(k) for k in range(N + 1)]
    S, Mi, Ni, P, K = [], [], [], [], []
    for s in range(N + 1):
        for m in range(s + 1):
            for n in range(s + 1):
                norm = math.sqrt(fact[m] * fact[s - m] / (fact[n] * fact[s - n]))
                for p in range(max(0, m - (s - n)), min(n, m) + 1):
                    S.append(s)
                    Mi.append(m)
                    Ni.append(n)
                    P.append(p)
                    K.append(norm * math.comb(n, p) * math.comb(s - n, m - p))
    S, Mi, Ni, P = (np.array(x) for x in (S, Mi, Ni, P))
    return S, Mi, Ni, P, np.array(K)


def two_mode_representation(g: np.ndarray, N: int) -> np.ndarray:
    """``R[s, m, n] = <m, s-m| Gamma(g) |n, s-n>`` for ``s <= N`` (zero padded).

    ``g`` maps the creation operators as ``a_i^+ -> g[0,0] a_i^+ + g[1,0] a_j^+``
    and ``a_j^+ -> g[0,1] a_i^+ + g[1,1] a_j^+``.
    """
    S, Mi, Ni, P, K = _two_mode_tables(N)
    k = np.arange(N + 1)
    pa, pb, pc, pd = (g[0, 0] ** k, g[1, 0] ** k, g[0, 1] ** k, g[1, 1] ** k)
    terms = K * pa[P] * pb[Ni - P] * pc[Mi - P] * pd[S - Ni - Mi + P]
    R = np.zeros((N + 1, N + 1, N + 1), dtype=complex)
    np.add.at(R, (S, Mi, Ni), terms)
    return R


def givens_factors(U: np.ndarray, tiny: float = 1e-300):
    """Factor a unitary as ``U = T_1 T_2 ... T_L diag(d)``.

    Each ``T_k`` is a 2x2 unitary acting on adjacent modes ``(r-1, r)`` and is
    returned as ``(r-1, r, g)``.  Entries that are already zero are skipped,
    so a unitary built from a Givens chain factors back into that chain.
    """
    A = np.array(U, dtype=complex)
    M = A.shape[0]
    factors = []
    for c in range(M - 1):
        for r in range(M - 1, c, -1):
            x, y = A[r - 1, c], A[r, c]
            if abs(y) <= tiny:
                continue
            rho = math.hypot(abs(x), abs(y))
            G = np.array([[np.conj(x), np.conj(y)], [-y, x]]) / rho
            A[[r - 1, r], :] = G @ A[[r - 1, r], :]
            factors.append((r - 1, r, G.conj().T))
    return factors, np.diag(A).copy()


def _apply_two_mode(coeffs: np.ndarray, basis: FockBasis, i: int, j: int, g: np.ndarray) -> np.ndarray:
    table, s = basis.pair_groups(i, j)
    R = two_mode_representation(g, basis.particles)[s]
    padded = np.concatenate([coeffs, np.zeros((1,) + coeffs.shape[1:], dtype=complex)])
    X = padded[table]
    Y = np.einsum("gmn,gn...->gm...", R, X)
    out = np.zeros_like(padded)
    out[table] = Y
    return out[:-1]


def rotate_coefficients(coeffs: np.ndarray, basis: FockBasis, U: np.ndarray, factors=None,
                        adjoint: bool = False) -> np.ndarray:
    """Apply ``Gamma(U)`` (the N-fold tensor power of a mode unitary), or its adjoint.

    ``coeffs`` may carry trailing batch dimensions.  ``factors`` may be a
    precomputed :func:`givens_factors` result for ``U``.
    """
    if factors is None:
        factors = givens_factors(U)
    rotations, phases = factors
    coeffs = np.asarray(coeffs, dtype=complex)
    shape = (-1,) + (1,) * (coeffs.ndim - 1)
    weight = np.prod(phases[None, :] ** basis.states, axis=1).reshape(shape)
    if adjoint:
        out = coeffs
        for i, j, g in rotations:
            out = _apply_two_mode(out, basis, i, j, g.conj().T)
        return out * np.conj(weight)
    out = coeffs * weight
    for i, j, g in reversed(rotations):
        out = _apply_two_mode(out, basis, i, j, g)
    return out


def rotate_modes(psi: ManyBodyState, U: np.ndarray) -> ManyBodyState:
    return psi.with_coefficients(rotate_coefficients(psi.coefficients, psi.basis, U))


# --- Hamiltonian -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    grid: GridSpec
    v_scaled: LatticeField
    trap: TrapProtocol
    particles: int

    def __post_init__(self):
        if self.particles < 1:
            raise InvalidArgumentError("need at least one particle")
        if not self.v_scaled.is_even():
            raise InvalidArgumentError("interaction must be even")
        if self.v_scaled.grid != self.grid or self.trap.base_profile.grid != self.grid:
            raise InvalidArgumentError("interaction and trap must live on the spec grid")


def pair_matrix(v: LatticeField) -> np.ndarray:
    """``V[a, b] = v(x_a - x_b)`` with periodic wrap."""
    M = v.grid.points
    idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    return np.real(v.values)[idx]


def interaction_diagonal(basis: FockBasis, v: LatticeField) -> np.ndarray:
    """``1/2 sum_ab v(x_a - x_b) (n_a n_b - delta_ab n_a)`` per basis state."""
    occ = basis.states.astype(float)
    V = pair_matrix(v)
    return 0.5 * (np.einsum("ka,ab,kb->k", occ, V, occ) - np.real(v.values[0]) * occ.sum(axis=1))


def single_particle_matrix(grid: GridSpec, potential) -> np.ndarray:
    return -laplacian_matrix(grid) + np.diag(np.real(np.asarray(potential)))


def assemble_hamiltonian(spec: HamiltonianSpec, t: float = 0.0, cap: int = BASIS_CAP) -> sp.csr_matrix:
    basis = enumerate_basis(spec.grid.points, spec.particles, cap)
    return _static_part(spec, basis) + sp.diags(basis.states @ spec.trap.at(t))


def _static_part(spec: HamiltonianSpec, basis: FockBasis) -> sp.csr_matrix:
    kinetic = one_body_operator(basis, -laplacian_matrix(spec.grid))
    return (kinetic + sp.diags(interaction_diagonal(basis, spec.v_scaled))).tocsr()


class SchroedingerPropagator:
    """Step ``i dPsi/dt = H(t) Psi`` with the trap sampled at the step midpoint.

    Below ``DENSE_EXPM_DIM`` the step is a dense matrix exponential (cached
    while the Hamiltonian does not change); above it, Lanczos with local
    tolerance ``tol``.
    """

    def __init__(self, spec: HamiltonianSpec, cap: int = BASIS_CAP, tol: float = 1e-10):
        self.spec = spec
        self.basis = enumerate_basis(spec.grid.points, spec.particles, cap)
        self.tol = tol
        self.static = _static_part(spec, self.basis)
        self._occ = self.basis.states.astype(float)
        self._cache_key = None
        self._cache_val = None

    def hamiltonian(self, t: float) -> sp.csr_matrix:
        return self.static + sp.diags(self._occ @ self.spec.trap.at(t))

    def energy(self, psi: ManyBodyState, t: float) -> float:
        c = psi.coefficients
        return float(np.vdot(c, self.hamiltonian(t) @ c).real)

    def step(self, psi: ManyBodyState, t: float, dt: float) -> ManyBodyState:
        if dt == 0:
            return psi
        trap_diag = self._occ @ self.spec.trap.at(t + dt / 2)
        c = psi.coefficients
        if self.basis.dimension < DENSE_EXPM_DIM:
            key = (dt, trap_diag.tobytes())
            if key != self._cache_key:
                H = (self.static + sp.diags(trap_diag)).toarray()
                self._cache_val = scipy.linalg.expm(-1j * dt * H)
                self._cache_key = key
            out = self._cache_val @ c
        else:
            H = (self.static + sp.diags(trap_diag)).tocsr()
            out = expm_krylov(lambda x: H @ x, c, dt, tol=self.tol)
        drift = abs(np.linalg.norm(out) - np.linalg.norm(c))
        if drift > 1e-10 * max(1.0, np.linalg.norm(c)):
            raise InstabilityError(f"N-body step changed the norm by {drift:.2e}")
        return psi.with_coefficients(out)


def evolve_schroedinger(psi: ManyBodyState, spec: HamiltonianSpec, dt: float, t: float = 0.0) -> ManyBodyState:
    """One step from ``t`` to ``t + dt``; see :class:`SchroedingerPropagator` for runs."""
    return SchroedingerPropagator(spec).step(psi, t, dt)


# --- states ------------------------------------------------------------------------


def _check_grid(phi: Orbital, basis: FockBasis):
    if phi.grid.points != basis.modes:
        raise InvalidArgumentError(f"orbital has {phi.grid.points} sites, basis has {basis.modes} modes")


def _multiplicity(basis: FockBasis) -> np.ndarray:
    """``N! / prod n_a!`` per basis state."""
    lf = np.array([math.lgamma(k + 1) for k in range(basis.particles + 1)])
    return np.exp(lf[basis.particles] - lf[basis.states].sum(axis=1))


def product_state(phi: Orbital, basis: FockBasis) -> ManyBodyState:
    """The condensate ``phi^{tensor N}`` in occupation form."""
    _check_grid(phi, basis)
    c = phi.mode_vector()
    coeffs = np.sqrt(_multiplicity(basis)) * np.prod(c[None, :] ** basis.states, axis=1)
    return ManyBodyState(basis, coeffs)


def one_defect_state(phi: Orbital, phi_perp: Orbital, basis: FockBasis) -> ManyBodyState:
    """Symmetrized, normalized ``phi^{tensor (N-1)} tensor phi_perp``."""
    _check_grid(phi, basis)
    _check_grid(phi_perp, basis)
    c, d = phi.mode_vector(), phi_perp.mode_vector()
    if abs(np.vdot(c, d)) > 1e-10:
        raise InvalidArgumentError("phi_perp is not orthogonal to phi")
    lower = _basis(basis.modes, basis.particles - 1)
    return create(product_state(phi, lower), d)


# --- first-quantized bridge (oracles) --------------------------------------------------


def _tuple_ranks(basis: FockBasis, cap: int):
    M, N = basis.modes, basis.particles
    size = M**N
    if size > cap:
        raise CapacityError(f"first-quantized tensor has {size} entries, cap is {cap}")
    digits = np.indices((M,) * N).reshape(N, -1)
    occ = np.zeros((size, M), dtype=np.int64)
    for k in range(N):
        np.add.at(occ, (np.arange(size), digits[k]), 1)
    return basis.ranks(occ)


def first_quantized_tensor(psi: ManyBodyState, cap: int = TENSOR_CAP) -> np.ndarray:
    """Rank-N symmetric tensor of mode amplitudes, same norm as ``psi``."""
    basis = psi.basis
    ranks = _tuple_ranks(basis, cap)
    scale = 1.0 / np.sqrt(_multiplicity(basis))
    flat = (psi.coefficients * scale)[ranks]
    return flat.reshape((basis.modes,) * basis.particles)


def from_first_quantized(tensor: np.ndarray, basis: FockBasis, cap: int = TENSOR_CAP) -> ManyBodyState:
    """Project a rank-N tensor onto the symmetric sector."""
    ranks = _tuple_ranks(basis, cap)
    flat = np.asarray(tensor, dtype=complex).reshape(-1)
    summed = np.bincount(ranks, weights=flat.real, minlength=basis.dimension) + 1j * np.bincount(
        ranks, weights=flat.imag, minlength=basis.dimension
    )
    return ManyBodyState(basis, summed / np.sqrt(_multiplicity(basis)))


def apply_on_particle(tensor: np.ndarray, op: np.ndarray, particle: int) -> np.ndarray:
    """Apply a single-particle matrix to one tensor slot."""
    moved = np.tensordot(op, tensor, axes=([1], [particle]))
    return np.moveaxis(moved, 0, particle)
