"""Physical parameters, interaction kernels, energy grids and densities of states."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import BarycentricInterpolator, PchipInterpolator, RectBivariateSpline

from .errors import DomainError, ParameterError

# relative slack when checking that an energy lies in [epsilon, hbar_omega_d]
_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class PhysicalParams:
    """Lower cutoff, Debye energy, chemical potential and Fermi-surface DOS.

    Energies and temperatures share one unit (k_B = 1).
    """

    epsilon: float
    hbar_omega_d: float
    mu: float
    n0: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "hbar_omega_d", "mu", "n0"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if not 0.0 < self.epsilon < self.hbar_omega_d:
            raise ParameterError("need 0 < epsilon < hbar_omega_d")
        if not self.hbar_omega_d < self.mu:
            raise ParameterError("need hbar_omega_d < mu")
        if not self.n0 > 0.0:
            raise ParameterError("need n0 > 0")

    @property
    def domain(self) -> Tuple[float, float]:
        return (self.epsilon, self.hbar_omega_d)

    @property
    def log_ratio(self) -> float:
        return math.log(self.hbar_omega_d / self.epsilon)


def _check_domain(domain, *arrays):
    lo, hi = domain
    pad = _DOMAIN_SLACK * hi
    for arr in arrays:
        a = np.asarray(arr, dtype=float)
        if a.size and (np.min(a) < lo - pad or np.max(a) > hi + pad):
            raise DomainError(f"kernel argument outside [{lo}, {hi}]")


def _sampled_bounds(func, domain, n=401):
    x = np.linspace(domain[0], domain[1], n)
    vals = func(x[:, None], x[None, :])
    return float(np.min(vals)), float(np.max(vals))


class Kernel:
    """Interaction ``U(x, xi)`` on ``[epsilon, hbar_omega_d]^2`` with bounds ``u1 <= U <= u2``.

    Subclasses implement ``_evaluate``; ``__call__`` broadcasts and checks
    the domain.
    """

    form = "abstract"
    domain: Tuple[float, float]
    u1: float
    u2: float

    def __call__(self, x, xi):
        _check_domain(self.domain, x, xi)
        x_arr, xi_arr = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        out = self._evaluate(x_arr, xi_arr)
        return float(out) if out.ndim == 0 else out

    def matrix(self, nodes):
        """Kernel values ``U[i, j] = U(nodes[i], nodes[j])``."""
        nodes = np.asarray(nodes, float)
        return np.ascontiguousarray(self(nodes[:, None], nodes[None, :]), dtype=float)

    @property
    def is_constant(self) -> bool:
        return False

    @property
    def is_symmetric(self) -> bool:
        return False

    def _evaluate(self, x, xi):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    value: float
    domain: Tuple[float, float]
    form = "constant"

    def __post_init__(self):
        if not self.value > 0:
            raise ParameterError("constant coupling must be positive")

    @property
    def u1(self):
        return self.value

    @property
    def u2(self):
        return self.value

    @property
    def is_constant(self):
        return True

    @property
    def is_symmetric(self):
        return True

    def _evaluate(self, x, xi):
        return np.full(x.shape, self.value)


@dataclass(frozen=True)
class SeparableKernel(Kernel):
    """``U(x, xi) = base + sum_k c_k (x xi)^(k+1)``.

    Bounds default to the brute-force min/max over a 401 x 401 sample of the
    domain when not declared.
    """

    base: float
    coefficients: Tuple[float, ...]
    domain: Tuple[float, float]
    u1: Optional[float] = None
    u2: Optional[float] = None
    form = "separable"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        lo, hi = _sampled_bounds(self._evaluate, self.domain)
        if self.u1 is None:
            object.__setattr__(self, "u1", lo)
        if self.u2 is None:
            object.__setattr__(self, "u2", hi)
        if not 0 < self.u1 <= self.u2:
            raise ParameterError("kernel bounds must satisfy 0 < u1 <= u2")

    @property
    def is_symmetric(self):
        return True

    def _evaluate(self, x, xi):
        prod = x * xi
        out = np.full(np.broadcast(x, xi).shape, self.base, dtype=float)
        term = np.ones_like(out)
        for c in self.coefficients:
            term = term * prod
            out = out + c * term
        return out


@dataclass(frozen=True, eq=False)
class TabulatedKernel(Kernel):
    """Kernel given on a rectangular table, interpolated by a bicubic spline."""

    x_coords: np.ndarray
    xi_coords: np.ndarray
    values: np.ndarray
    u1: Optional[float] = None
    u2: Optional[float] = None
    domain: Tuple[float, float] = field(init=False)
    _spline: RectBivariateSpline = field(init=False, repr=False)
    form = "tabulated"

    def __post_init__(self):
        x = np.asarray(self.x_coords, float)
        xi = np.asarray(self.xi_coords, float)
        vals = np.asarray(self.values, float)
        if vals.shape != (x.size, xi.size):
            raise ParameterError("table shape must be (len(x_coords), len(xi_coords))")
        if x.size < 4 or xi.size < 4:
            raise ParameterError("bicubic interpolation needs at least 4 points per axis")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(xi) <= 0):
            raise ParameterError("table coordinates must be strictly increasing")
        object.__setattr__(self, "x_coords", x)
        object.__setattr__(self, "xi_coords", xi)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "domain", (max(x[0], xi[0]), min(x[-1], xi[-1])))
        object.__setattr__(self, "_spline", RectBivariateSpline(x, xi, vals, kx=3, ky=3, s=0))
        lo, hi = _sampled_bounds(self._evaluate, self.domain)
        if self.u1 is None:
            object.__setattr__(self, "u1", lo)
        if self.u2 is None:
            object.__setattr__(self, "u2", hi)
        if not 0 < self.u1 <= self.u2:
            raise ParameterError("kernel bounds must satisfy 0 < u1 <= u2")

    @property
    def is_symmetric(self):
        return bool(np.array_equal(self.x_coords, self.xi_coords)
                    and np.allclose(self.values, self.values.T))

    def _evaluate(self, x, xi):
        return np.asarray(self._spline.ev(x, xi)).reshape(np.broadcast(x, xi).shape)

    @classmethod
    def sample(cls, func, domain, n=33, **kwargs):
        """Tabulate ``func`` on an ``n x n`` uniform grid over ``domain``."""
        pts = np.linspace(domain[0], domain[1], n)
        return cls(pts, pts, func(pts[:, None], pts[None, :]), **kwargs)

    @classmethod
    def from_csv(cls, path, **kwargs):
        """Read a matrix whose first row holds xi and first column holds x."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        xi = np.array([float(v) for v in rows[0][1:]])
        x = np.array([float(r[0]) for r in rows[1:]])
        vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(x, xi, vals, **kwargs)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x\\xi"] + [f"{v:.17g}" for v in self.xi_coords])
            for xv, row in zip(self.x_coords, self.values):
                writer.writerow([f"{xv:.17g}"] + [f"{v:.17g}" for v in row])


def eval_kernel(k: Kernel, x: float, xi: float) -> float:
    return float(k(x, xi))


@dataclass(frozen=True)
class KernelReport:
    minimum: float
    maximum: float
    u1: float
    u2: float
    passed: bool
    message: str


def validate_kernel(k: Kernel, grid: "EnergyGrid") -> KernelReport:
    """Check the declared bounds against ``U`` sampled on ``grid x grid``."""
    vals = k.matrix(grid.nodes)
    lo, hi = float(vals.min()), float(vals.max())
    problems = []
    if not k.u1 > 0:
        problems.append("u1 must be positive")
    if k.u1 > k.u2:
        problems.append("u1 exceeds u2")
    if lo < k.u1:
        problems.append(f"min {lo:.6g} below u1={k.u1:.6g}")
    if hi > k.u2:
        problems.append(f"max {hi:.6g} above u2={k.u2:.6g}")
    return KernelReport(lo, hi, float(k.u1), float(k.u2), not problems,
                        "; ".join(problems) or "ok")


@dataclass(frozen=True, eq=False)
class EnergyGrid:
    """Quadrature nodes and weights on ``[epsilon, hbar_omega_d]``.

    With ``mapping="log"`` Gauss-Legendre nodes are placed in ``log(x)``, which
    makes ``1/x``-type integrands smooth; ``"linear"`` maps them affinely.
    """

    nodes: np.ndarray
    weights: np.ndarray
    lo: float
    hi: float
    mapping: str = "log"

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise ParameterError("grid nodes must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ParameterError("grid weights must be positive")

    @classmethod
    def gauss_legendre(cls, params_or_domain, n=64, mapping="log"):
        lo, hi = getattr(params_or_domain, "domain", params_or_domain)
        if n < 2:
            raise ParameterError("need at least two nodes")
        t, wt = np.polynomial.legendre.leggauss(n)
        if mapping == "log":
            a, b = math.log(lo), math.log(hi)
            s = 0.5 * (b - a) * t + 0.5 * (b + a)
            nodes = np.exp(s)
            weights = wt * 0.5 * (b - a) * nodes
        elif mapping == "linear":
            nodes = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
            weights = wt * 0.5 * (hi - lo)
        else:
            raise ParameterError(f"unknown grid mapping {mapping!r}")
        return cls(np.ascontiguousarray(nodes), np.ascontiguousarray(weights), lo, hi, mapping)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def __len__(self):
        return self.size

    def refined(self, factor=2):
        return EnergyGrid.gauss_legendre((self.lo, self.hi), self.size * factor, self.mapping)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def _coordinate(self, x):
        x = np.asarray(x, float)
        return np.log(x) if self.mapping == "log" else x

    def interpolant(self, values):
        """Polynomial interpolant through the nodes in the grid's own coordinate."""
        interp = BarycentricInterpolator(self._coordinate(self.nodes), np.asarray(values, float))

        def evaluate(x):
            _check_domain((self.lo, self.hi), x)
            return interp(self._coordinate(x))

        return evaluate


class DensityOfStates:
    """``N(x)`` on ``[-mu, inf)`` with a growth bound ``N(x) <= C sqrt(x)``."""

    form = "abstract"

    def __call__(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def growth_constant(self, a: float) -> float:
        """A constant ``C`` with ``N(x) <= C sqrt(x)`` for all ``x >= a > 0``."""
        raise NotImplementedError  # pragma: no cover


@dataclass(frozen=True)
class ZeroDOS(DensityOfStates):
    form = "zero"

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, float))

    def growth_constant(self, a):
        return 0.0


@dataclass(frozen=True)
class ConstantDOS(DensityOfStates):
    n0: float
    form = "constant"

    def __post_init__(self):
        if self.n0 < 0:
            raise ParameterError("density of states must be non-negative")

    def __call__(self, x):
        return np.full_like(np.asarray(x, float), self.n0)

    def growth_constant(self, a):
        return self.n0 / math.sqrt(a)


@dataclass(frozen=True)
class FreeElectronDOS(DensityOfStates):
    """``N(x) = c sqrt(x + mu)``, the three-dimensional free-electron form."""

    c: float
    mu: float
    form = "free_electron"

    def __post_init__(self):
        if self.c < 0 or self.mu <= 0:
            raise ParameterError("need c >= 0 and mu > 0")

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.c * np.sqrt(np.maximum(x + self.mu, 0.0))

    def growth_constant(self, a):
        return self.c * math.sqrt(1.0 + self.mu / a)


@dataclass(frozen=True, eq=False)
class TabulatedDOS(DensityOfStates):
    """Monotone-cubic interpolation of tabulated values, ``C sqrt(x)`` beyond the table.

    The tail coefficient is fixed by continuity at the last tabulated point.
    """

    x: np.ndarray
    values: np.ndarray
    form = "tabulated"

    def __post_init__(self):
        x = np.asarray(self.x, float)
        v = np.asarray(self.values, float)
        if x.size < 2 or np.any(np.diff(x) <= 0):
            raise ParameterError("tabulated DOS needs increasing abscissae")
        if np.any(v < 0):
            raise ParameterError("density of states must be non-negative")
        if x[-1] <= 0:
            raise ParameterError("table must extend to positive energies")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    @property
    def tail_coefficient(self):
        return float(self.values[-1] / math.sqrt(self.x[-1]))

    def __call__(self, x):
        x = np.asarray(x, float)
        inside = PchipInterpolator(self.x, self.values, extrapolate=False)(np.clip(x, self.x[0], self.x[-1]))
        tail = self.tail_coefficient * np.sqrt(np.maximum(x, 0.0))
        out = np.where(x > self.x[-1], tail, inside)
        return np.where(x < self.x[0], self.values[0], out)

    def growth_constant(self, a):
        c = self.tail_coefficient
        mask = self.x >= a
        if mask.any():
            c = max(c, float(np.max(self.values[mask] / np.sqrt(self.x[mask]))))
        # monotone interpolation never exceeds neighbouring table values
        idx = np.searchsorted(self.x, a)
        if 0 < idx < self.x.size:
            c = max(c, float(max(self.values[idx - 1], self.values[idx]) / math.sqrt(a)))
        return c
