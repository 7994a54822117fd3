"""Lanczos approximation of ``exp(-i tau H) v`` for Hermitian ``H``."""
from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg

from .errors import InstabilityError

Operator = Callable[[np.ndarray], np.ndarray]


def _lanczos(apply_h: Operator, v: np.ndarray, m_max: int):
    """Lanczos with full reorthogonalization.

    Returns the basis ``Q`` (n x m), the tridiagonal ``T`` (m x m) and the
    residual coupling ``beta_m`` used in the error estimate.
    """
    n = v.shape[0]
    m_max = min(m_max, n)
    Q = np.zeros((n, m_max + 1), dtype=complex)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    Q[:, 0] = v
    m = m_max
    for k in range(m_max):
        w = apply_h(Q[:, k])
        alpha[k] = np.vdot(Q[:, k], w).real
        w = w - alpha[k] * Q[:, k] - (beta[k - 1] * Q[:, k - 1] if k > 0 else 0)
        # two passes of Gram-Schmidt keep Q orthonormal to rounding
        for _ in range(2):
            w -= Q[:, : k + 1] @ (Q[:, : k + 1].conj().T @ w)
        beta[k] = np.linalg.norm(w)
        if beta[k] < 1e-14 * max(1.0, abs(alpha[k])):
            m = k + 1
            beta[k] = 0.0
            break
        Q[:, k + 1] = w / beta[k]
    T = np.diag(alpha[:m]) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    return Q[:, :m], T, beta[m - 1]


def expm_krylov(apply_h: Operator, v: np.ndarray, tau: float, tol: float = 1e-10,
                m_max: int = 40, max_substeps: int = 4096) -> np.ndarray:
    """``exp(-i tau H) v`` with adaptive substepping.

    Each substep builds a Lanczos basis of size ``m_max`` (or smaller at
    breakdown) and accepts the step when the standard a-posteriori estimate
    ``||v|| beta_m |e_m^T exp(-i tau T) e_1|`` is below ``tol`` times the
    substep fraction, so the total local error stays near ``tol``.
    """
    v = np.asarray(v, dtype=complex)
    norm0 = np.linalg.norm(v)
    if norm0 == 0 or tau == 0:
        return v.copy()
    out = v.copy()
    done = 0.0
    step = tau
    substeps = 0
    while abs(done) < abs(tau) * (1 - 1e-15):
        step = np.sign(tau) * min(abs(step), abs(tau) - abs(done))
        nrm = np.linalg.norm(out)
        Q, T, beta_m = _lanczos(apply_h, out / nrm, m_max)
        while True:
            small = scipy.linalg.expm(-1j * step * T)
            err = nrm * beta_m * abs(small[-1, 0])
            if err <= tol * abs(step) / abs(tau) or beta_m == 0.0:
                break
            step /= 2
            substeps += 1
            if substeps > max_substeps:
                raise InstabilityError("Krylov propagator could not reach the requested accuracy")
        out = nrm * (Q @ small[:, 0])
        done += step
        # grow back after a successful shrink
        step *= 2
    return out
