"""Derivative functional gamma, the constants C^phi / C^t, and bound checks.

Conventions: ``v_scaled`` is the pair potential actually used in the N-body
Hamiltonian (``v/N`` in the Hartree regime); the mean field and the
constants are built from the unscaled ``v = N * v_scaled``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .counting import (
    AdaptedBasis,
    CountingSpectrum,
    WeightSpec,
    _resolve,
    alpha,
    counting_spectrum,
    density_distance,
    nhat_apply,
    reduced_density,
)
from .errors import CapacityError, InvalidArgumentError
from .fock import ManyBodyState, annihilated_vectors, interaction_diagonal, pair_matrix, _basis
from .lattice import LatticeField, lp_norm
from .meanfield import Orbital, mean_field_potential

LEMMA2_TOL = 1e-9
GRONWALL_TOL = 1e-6
INTERP_TOL = 1e-10


@dataclass(frozen=True)
class BoundCheck:
    """``lhs <= rhs`` up to ``tolerance``."""

    name: str
    time: float
    lhs: float
    rhs: float
    tolerance: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -self.tolerance)

    def as_dict(self) -> dict:
        return {"name": self.name, "time": self.time, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "tolerance": self.tolerance, "passed": self.passed}


def unscaled_interaction(v_scaled: LatticeField, N: int) -> LatticeField:
    return v_scaled.with_values(N * np.real(v_scaled.values))


def interaction_minus_mean_field(psi: ManyBodyState, phi: Orbital, v_scaled: LatticeField) -> np.ndarray:
    """Diagonal of ``H_N - H^H_N`` in the site occupation basis."""
    v = unscaled_interaction(v_scaled, psi.particles)
    mf = mean_field_potential(phi, v).values
    return interaction_diagonal(psi.basis, v_scaled) - psi.basis.states @ mf


def gamma(psi: ManyBodyState, phi: Union[Orbital, AdaptedBasis], v_scaled: LatticeField,
          orbital: Orbital = None) -> float:
    """Time derivative of ``<psi, nhat psi>``: ``i <psi, [H_N - H^H_N, nhat] psi>``.

    The sign follows from ``i dpsi/dt = H psi`` and ``i dphi/dt = h^H phi``.
    Kinetic and trap terms cancel in the difference, which is therefore
    diagonal in the site basis.  ``phi`` may be a precomputed adapted basis,
    in which case ``orbital`` must be the matching orbital.
    """
    if isinstance(phi, AdaptedBasis):
        if orbital is None:
            raise InvalidArgumentError("pass the orbital alongside a precomputed adapted basis")
        ab = phi
    else:
        orbital, ab = phi, _resolve(phi)
    d = interaction_minus_mean_field(psi, orbital, v_scaled)
    c = psi.coefficients
    n_psi = nhat_apply(psi, ab).coefficients
    d_psi = d * c
    # <psi, D nhat psi> - <psi, nhat D psi>
    forward = np.vdot(d_psi, n_psi)
    backward = np.vdot(c, nhat_apply(psi.with_coefficients(d_psi), ab).coefficients)
    value = 1j * (forward - backward)
    scale = max(1.0, abs(forward), abs(backward))
    if abs(value.imag) > 1e-10 * scale:
        raise ArithmeticError(f"gamma has imaginary residual {value.imag:.2e}")
    return float(value.real)


def gamma_reduced(psi: ManyBodyState, phi: Orbital, v_scaled: LatticeField) -> float:
    """``-2 Im <psi, p_1 V(x_1, x_2) q_1 psi>`` via one- and two-body correlations.

    ``V(x_1, x_2) = (N-1) v_N(x_2 - x_1) - (v * |phi|^2)(x_1)``.  Independent of
    :func:`gamma`; used to cross-check the commutator reduction.
    """
    N = psi.particles
    c = phi.mode_vector()
    P = np.outer(c, c.conj())
    w = mean_field_potential(phi, unscaled_interaction(v_scaled, N)).values
    X = annihilated_vectors(psi)
    rho = X.conj().T @ X  # rho[a, b] = <a_a^+ a_b>
    one_body = np.sum(P * w[None, :] * rho) / N
    two_body = 0.0
    if N >= 2:
        V = pair_matrix(v_scaled)
        lower = _basis(psi.modes, N - 1)
        for m in range(psi.modes):
            Y = lower.annihilator(m) @ X  # columns a_m a_b psi
            G = Y.conj().T @ Y  # <a_a^+ a_m^+ a_m a_b>
            two_body += np.sum(P * V[None, :, m] * G)
        two_body /= N
    return float(-2 * np.imag(two_body - one_body))


def holder_conjugate(r: float) -> float:
    if r < 1:
        raise InvalidArgumentError(f"need r >= 1, got {r}")
    return math.inf if r == 1 else r / (r - 1)


def c_phi(v: LatticeField, phi: Orbital, r: float) -> float:
    """``||v||_{2r} ||phi||_{2s}`` with ``1/r + 1/s = 1``."""
    s = holder_conjugate(r)
    return lp_norm(v, 2 * r) * lp_norm(phi.field, math.inf if s == math.inf else 2 * s)


def lemma2_rhs(c_value: float, alpha_value: float, N: int) -> float:
    return 10.0 * c_value * (alpha_value + 1.0 / N)


def lemma2_check(psi: ManyBodyState, phi: Orbital, v_scaled: LatticeField, r: float,
                 time: float = 0.0, alpha_value: float = None, gamma_value: float = None) -> BoundCheck:
    """``|gamma| <= 10 C^phi (alpha + 1/N)`` for the linear weight."""
    N = psi.particles
    ab = _resolve(phi)
    if alpha_value is None:
        alpha_value = alpha(psi, ab, WeightSpec.linear(N))
    if gamma_value is None:
        gamma_value = gamma(psi, ab, v_scaled, orbital=phi)
    cv = c_phi(unscaled_interaction(v_scaled, N), phi, r)
    return BoundCheck(f"lemma2[r={r:g}]", time, abs(gamma_value), lemma2_rhs(cv, alpha_value, N), LEMMA2_TOL)


def gronwall_bound(alpha0: float, c_t: Sequence[float], times: Sequence[float], N: int) -> np.ndarray:
    """``e^{I(t)} alpha0 + (e^{I(t)} - 1)/N`` with ``I(t)`` the trapezoidal integral of ``C^t``."""
    c_t = np.asarray(c_t, dtype=float)
    times = np.asarray(times, dtype=float)
    if np.any(c_t < 0):
        raise InvalidArgumentError("C^t must be non-negative")
    integral = cumulative_trapezoid(c_t, times, initial=0.0) if len(times) > 1 else np.zeros(len(times))
    growth = np.exp(integral)
    return growth * alpha0 + np.expm1(integral) / N


def theorem1_checks(times, alpha_series, c_t, N: int, label: str = "theorem1") -> list:
    bound = gronwall_bound(alpha_series[0], c_t, times, N)
    return [BoundCheck(label, float(t), float(a), float(b), GRONWALL_TOL)
            for t, a, b in zip(times, alpha_series, bound)]


def central_difference_residuals(times, alpha_series, gamma_series) -> tuple:
    """``(alpha(t+dt) - alpha(t-dt)) / 2dt - gamma(t)`` at interior samples."""
    times = np.asarray(times, dtype=float)
    a = np.asarray(alpha_series, dtype=float)
    g = np.asarray(gamma_series, dtype=float)
    slope = (a[2:] - a[:-2]) / (times[2:] - times[:-2])
    return times[1:-1], slope - g[1:-1]


@dataclass(frozen=True)
class DerivativeCheck:
    dt: float
    residual_coarse: float
    residual_fine: float
    checks: tuple

    @property
    def ratio(self) -> float:
        if self.residual_fine == 0:
            return math.inf if self.residual_coarse > 0 else 4.0
        return self.residual_coarse / self.residual_fine

    @property
    def passed(self) -> bool:
        return 3.2 <= self.ratio <= 4.8 and all(c.passed for c in self.checks)


def alpha_derivative_check(coarse, fine, slack: float = 1.2, floor: float = 1e-12) -> DerivativeCheck:
    """Compare the central-difference slope of alpha with gamma under step halving.

    ``coarse`` and ``fine`` are ``(times, alpha, gamma)`` triples from runs at
    ``dt`` and ``dt/2``.  The error constant ``C`` is estimated on the fine
    run; each coarse residual is then checked against ``slack * C * dt^2``.
    Residuals are compared on the coarse time grid.
    """
    tc, rc = central_difference_residuals(*coarse)
    tf, rf = central_difference_residuals(*fine)
    dt = float(coarse[0][1] - coarse[0][0])
    dt_f = float(fine[0][1] - fine[0][0])
    common = np.isin(np.round(tf / dt_f).astype(np.int64), 2 * np.round(tc / dt).astype(np.int64))
    rf_common = np.abs(rf[common])
    res_c = float(np.max(np.abs(rc))) if rc.size else 0.0
    res_f = float(np.max(rf_common)) if rf_common.size else 0.0
    const = res_f / dt_f**2
    checks = tuple(
        BoundCheck("alpha_derivative", float(t), float(abs(r)), slack * const * dt**2, floor)
        for t, r in zip(tc, rc)
    )
    return DerivativeCheck(dt, res_c, res_f, checks)


def lemma1_interpolation_check(spectrum: CountingSpectrum, j: float, l: float) -> BoundCheck:
    """``sum (k/N)^l w_k <= (sqrt(delta))^{l/j} + sqrt(delta)``, ``delta = sum (k/N)^j w_k``."""
    if not (j > 0 and l > 0):
        raise InvalidArgumentError("interpolation needs j, l > 0")
    delta = max(spectrum.moment(j), 0.0)
    root = math.sqrt(delta)
    return BoundCheck(f"lemma1b[j={j:g},l={l:g}]", 0.0, spectrum.moment(l), root ** (l / j) + root, INTERP_TOL)


@dataclass(frozen=True)
class CondensationReport:
    alpha_linear: float
    p1_overlap: float
    operator_distance: float
    trace_distance: float
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def condensation_equivalence_report(psi: ManyBodyState, phi: Union[Orbital, AdaptedBasis],
                                    time: float = 0.0) -> CondensationReport:
    ab = _resolve(phi)
    a_lin = alpha(psi, ab, WeightSpec.linear(psi.particles))
    mu = reduced_density(psi)
    overlap = mu.expectation(ab.first_mode)
    op = density_distance(mu, ab.first_mode, "operator")
    tr = density_distance(mu, ab.first_mode, "trace")
    checks = (
        BoundCheck("lemma1a_operator", time, op, 2 * math.sqrt(max(a_lin, 0.0)) + 2 * a_lin, 1e-9),
        BoundCheck("lemma1a_identity", time, abs(1 - overlap - a_lin), 0.0, 1e-10),
    )
    return CondensationReport(a_lin, overlap, op, tr, checks)


def _projectors(phi_mode: np.ndarray):
    P = np.outer(phi_mode, phi_mode.conj())
    return P, np.eye(len(phi_mode)) - P


def brute_force_projection(tensor: np.ndarray, phi_mode: np.ndarray, k: int) -> np.ndarray:
    """``P_{N,k} tensor`` as the sum over all 0/1 patterns with ``k`` ones of p/q products."""
    N = tensor.ndim
    p, q = _projectors(np.asarray(phi_mode, dtype=complex))
    out = np.zeros_like(tensor, dtype=complex)
    for ones in itertools.combinations(range(N), k):
        term = tensor
        for axis in range(N):
            op = q if axis in ones else p
            term = np.moveaxis(np.tensordot(op, term, axes=([1], [axis])), 0, axis)
        out += term
    return out


def brute_force_spectrum(tensor: np.ndarray, phi_mode: np.ndarray) -> np.ndarray:
    return np.array([np.linalg.norm(brute_force_projection(tensor, phi_mode, k)) ** 2
                     for k in range(tensor.ndim + 1)])


def brute_force_alpha(tensor: np.ndarray, phi: Union[Orbital, np.ndarray], weight: WeightSpec,
                      cap: int = 1_000_000) -> float:
    """Reference ``alpha`` built directly from the projector definition."""
    if tensor.size > cap:
        raise CapacityError(f"tensor with {tensor.size} entries exceeds oracle cap {cap}")
    mode = phi.mode_vector() if isinstance(phi, Orbital) else np.asarray(phi)
    if weight.particles != tensor.ndim:
        raise InvalidArgumentError("weight and tensor disagree on N")
    return float(np.dot(weight.table, brute_force_spectrum(tensor, mode)))
