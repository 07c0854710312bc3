"""Adaptive Gauss-Kronrod quadrature and the Fermi tail integral.

All finite integrals in the package that are not evaluated on a fixed
Nystrom grid go through :func:`integrate`, a globally adaptive (7, 15)
Gauss-Kronrod scheme with QUADPACK-style error estimation.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, IntegrationError

# 15-point Kronrod abscissae (non-negative half) and weights; the 7-point
# Gauss rule uses every second abscissa starting at index 1.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-point layout: [-x0..-x6, 0, x6..x0]
KRONROD_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int

    def __float__(self):
        return float(self.value)


def _evaluate(f, x):
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape != x.shape:
            y = np.broadcast_to(y, x.shape).astype(float)
    except (TypeError, ValueError):
        y = np.array([float(f(float(t))) for t in x.ravel()]).reshape(x.shape)
    bad = ~np.isfinite(y)
    if bad.any():
        where = float(x.ravel()[np.argmax(bad.ravel())])
        raise IntegrationError(f"non-finite integrand value at x={where!r}", abscissa=where)
    return y


def _panel_estimates(fv, centre, half):
    """Kronrod value and QUADPACK error estimate for one 15-point panel."""
    resk = np.dot(KRONROD_WEIGHTS, fv) * half
    resg = np.dot(GAUSS_WEIGHTS, fv) * half
    resabs = np.dot(KRONROD_WEIGHTS, np.abs(fv)) * abs(half)
    mean = resk / (2.0 * half) if half else 0.0
    resasc = np.dot(KRONROD_WEIGHTS, np.abs(fv - mean)) * abs(half)
    err = abs(resk - resg)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50.0 * _EPS):
        err = max(50.0 * _EPS * resabs, err)
    return float(resk), float(err)


def integrate(f, a, b, tol=1e-10, rtol=1e-13, max_panels=2000):
    """Integrate ``f`` over ``[a, b]`` adaptively.

    ``f`` is called with a 1-d array of abscissae and should return values of
    the same shape; scalar-only callables are detected and looped over.
    Iteration stops once the summed error estimate is below
    ``max(tol, rtol * |value|)`` or the panel budget is exhausted, in which
    case the returned ``error_estimate`` reports what was achieved.
    """
    a = float(a)
    b = float(b)
    if not (tol > 0):
        raise DomainError("tol must be positive")
    if not a < b:
        raise DomainError(f"integration bounds must satisfy a < b, got [{a}, {b}]")

    def panel(lo, hi):
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        return _panel_estimates(_evaluate(f, c + h * KRONROD_NODES), c, h)

    value, err = panel(a, b)
    evaluations = 15
    heap = [(-err, a, b, value)]
    total, total_err = value, err
    while total_err > max(tol, rtol * abs(total)) and len(heap) < max_panels:
        neg_err, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi) or -neg_err <= 50.0 * _EPS * abs(v):
            # cannot refine further; put it back and stop
            heapq.heappush(heap, (neg_err, lo, hi, v))
            break
        xs = np.concatenate([0.5 * (lo + mid) + 0.5 * (mid - lo) * KRONROD_NODES,
                             0.5 * (mid + hi) + 0.5 * (hi - mid) * KRONROD_NODES])
        fv = _evaluate(f, xs)
        evaluations += 30
        v1, e1 = _panel_estimates(fv[:15], 0.5 * (lo + mid), 0.5 * (mid - lo))
        v2, e2 = _panel_estimates(fv[15:], 0.5 * (mid + hi), 0.5 * (hi - mid))
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        # re-sum to avoid drift from repeated subtraction
        total = math.fsum(p[3] for p in heap)
        total_err = math.fsum(-p[0] for p in heap)
    return QuadratureResult(float(total), float(total_err), evaluations)


def fermi_tail_bound(growth, x, T):
    """Closed form of ``int_x^inf C sqrt(y) exp(-y/T) dy``.

    Dominates the discarded part of :func:`integrate_fermi_tail` because
    ``log(1 + exp(-y/T)) <= exp(-y/T)``.
    """
    if growth == 0.0:
        return 0.0
    return float(growth * T ** 1.5 * special.gamma(1.5) * special.gammaincc(1.5, x / T))


def integrate_fermi_tail(n, a, T, tol=1e-12):
    """``int_a^inf N(x) log(1 + exp(-x/T)) dx`` for a density of states ``n``.

    The upper limit is chosen so that the analytic bound on the discarded
    tail (:func:`fermi_tail_bound`, using the growth constant reported by
    ``n``) is below ``tol / 2``; the finite part gets the other half.
    """
    if not T > 0:
        raise DomainError(f"temperature must be positive, got T={T}")
    if not a > 0:
        raise DomainError(f"lower limit must be positive, got a={a}")
    growth = float(n.growth_constant(a))
    if growth == 0.0:
        return QuadratureResult(0.0, 0.0, 1)

    x_max = a
    for _ in range(2):
        x_max = a + T * math.log(max(growth * math.sqrt(x_max) * T / tol, 1.0))
    while fermi_tail_bound(growth, x_max, T) > 0.5 * tol:
        x_max += T
    discarded = fermi_tail_bound(growth, x_max, T)
    if x_max <= a:
        return QuadratureResult(0.0, discarded, 1)

    def integrand(x):
        return n(x) * np.log1p(np.exp(-x / T))

    res = integrate(integrand, a, x_max, tol=0.5 * tol, rtol=1e-13)
    return QuadratureResult(res.value, res.error_estimate + discarded, res.evaluations)


def panel_gauss(f, a, b, width, order=20):
    """Composite Gauss-Legendre rule with panels no wider than ``width``.

    The nodes depend only on ``(a, b, width)``, so for a family of
    integrands indexed by a parameter the result varies smoothly with that
    parameter.  This matters when the integral is later differenced.
    """
    if not a < b:
        raise DomainError(f"integration bounds must satisfy a < b, got [{a}, {b}]")
    if not width > 0:
        raise DomainError("panel width must be positive")
    panels = max(1, int(math.ceil((b - a) / width)))
    t, wt = _legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    w = (half[:, None] * wt[None, :]).ravel()
    return float(np.dot(w, _evaluate(f, x)))


_LEGENDRE_CACHE = {}


def _legendre(order):
    if order not in _LEGENDRE_CACHE:
        _LEGENDRE_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _LEGENDRE_CACHE[order]
