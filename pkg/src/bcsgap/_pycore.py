"""Pure numpy implementation of the hot numerical kernels.

The compiled ``_ccore`` extension exposes exactly the same functions; this
module is used when the extension is unavailable or disabled.
"""
from __future__ import annotations

import math

import numpy as np

from .quadrature import integrate

NAME = "python"

# below this argument g() switches to its Taylor series
G_TAYLOR_SWITCH = 1e-2


def _tanh_sech2(E, T):
    if T == 0.0:
        return np.ones_like(E), np.zeros_like(E)
    # E / T may overflow for tiny T; tanh and exp then saturate correctly
    with np.errstate(over="ignore"):
        t = np.tanh(E / (2.0 * T))
        # 1 - t^2 cancels once t is close to 1
        q = np.exp(-E / T)
    return t, 4.0 * q / (1.0 + q) ** 2


def gap_phi(xi, u, T):
    """``u tanh(E/2T) / E`` with ``E = sqrt(xi^2 + u^2)``; the tanh factor is 1 at T = 0."""
    xi = np.asarray(xi, float)
    u = np.asarray(u, float)
    E = np.hypot(xi, u)
    t, _ = _tanh_sech2(E, T)
    return u * t / E


def gap_phi_derivs(xi, u, T):
    """``phi``, ``d phi / du`` and ``d phi / dT`` at each node."""
    xi = np.asarray(xi, float)
    u = np.asarray(u, float)
    E = np.hypot(xi, u)
    t, sech2 = _tanh_sech2(E, T)
    phi = u * t / E
    if T == 0.0:
        dphi = xi * xi / E ** 3
        dT = np.zeros_like(E)
    else:
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            # 2 T E can underflow to zero when sech2 already has
            edge = np.where(sech2 == 0.0, 0.0, sech2 / (2.0 * T * E))
            dT = np.where(sech2 == 0.0, 0.0, -u * sech2 / (2.0 * T * T))
        dphi = t / E + (u * u / E) * (edge - t / (E * E))
    return phi, dphi, dT


def nystrom_apply(kmat, weights, xi, u, T):
    """Nystrom image ``(Bu)_i = sum_j U_ij w_j phi(xi_j, u_j)``."""
    return kmat @ (weights * gap_phi(xi, u, T))


def nystrom_system(kmat, weights, xi, u, T):
    """Return ``Bu``, the Jacobian ``dBu/du`` and ``dBu/dT``."""
    phi, dphi, dT = gap_phi_derivs(xi, u, T)
    Bu = kmat @ (weights * phi)
    jac = kmat * (weights * dphi)[None, :]
    dBdT = kmat @ (weights * dT)
    return Bu, jac, dBdT


def gap_integral(T, delta, a, b, tol):
    """``int_a^b tanh(E/2T)/E dxi`` with ``E = sqrt(xi^2 + delta^2)``.

    Integrated in ``s = log(xi)`` where the integrand is smooth.
    Returns ``(value, error_estimate, evaluations)``.
    """
    d2 = delta * delta

    def integrand(s):
        xi = np.exp(s)
        E = np.sqrt(xi * xi + d2)
        t = 1.0 if T == 0.0 else np.tanh(E / (2.0 * T))
        return t * xi / E

    res = integrate(integrand, math.log(a), math.log(b), tol=tol, rtol=0.0)
    return res.value, res.error_estimate, res.evaluations


def g_function(eta):
    """``(sech^2(eta) - tanh(eta)/eta) / eta^2`` with the Taylor branch near 0."""
    eta = np.asarray(eta, float)
    out = np.empty_like(eta)
    small = eta < G_TAYLOR_SWITCH
    e2 = eta[small] ** 2
    out[small] = -2.0 / 3.0 + e2 * (8.0 / 15.0 + e2 * (-34.0 / 105.0 + e2 * (496.0 / 2835.0)))
    big = ~small
    eb = eta[big]
    q = np.exp(-2.0 * eb)
    sech2 = 4.0 * q / (1.0 + q) ** 2
    out[big] = (sech2 - np.tanh(eb) / eb) / (eb * eb)
    return out
