"""Closed-form fundamental solution of the two-phase heat operator.

The operator is ``L = (1 / 2 rho) d/dx (rho A d/dx)`` with ``A`` and ``rho``
piecewise constant, switching at the interface ``x = 0``.  Points with
``x <= 0`` belong to the left phase ``(a1, rho1)``; points with ``x > 0`` to
the right phase ``(a2, rho2)``.

All kernel functions broadcast over numpy arrays and return a plain ``float``
when every argument is scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .quadrature import DEFAULT_QUAD, QuadratureSpec, integrate

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SIDES = ("left", "right")


@dataclass(frozen=True)
class Coefficients:
    """Diffusivities ``a1, a2`` and density weights ``rho1, rho2`` of the two phases."""

    a1: float
    a2: float
    rho1: float
    rho2: float

    def __post_init__(self):
        for name in ("a1", "a2", "rho1", "rho2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a finite positive number, got {value!r}")
            object.__setattr__(self, name, float(value))

    @classmethod
    def homogeneous(cls, a: float = 1.0, rho: float = 1.0) -> "Coefficients":
        return cls(a, a, rho, rho)

    @property
    def alpha(self) -> float:
        return alpha(self)

    @property
    def beta(self) -> float:
        return beta(self)

    def A(self, x):
        return np.where(np.asarray(x) > 0, self.a2, self.a1)

    def rho(self, x):
        return np.where(np.asarray(x) > 0, self.rho2, self.rho1)

    def flux_jump_coefficient(self) -> float:
        """``rho2 a2 - rho1 a1``, the weight of the interface term in the weak form."""
        return self.rho2 * self.a2 - self.rho1 * self.a1

    def to_dict(self) -> dict:
        return {"a1": self.a1, "a2": self.a2, "rho1": self.rho1, "rho2": self.rho2}

    @classmethod
    def from_dict(cls, data: dict) -> "Coefficients":
        return cls(data["a1"], data["a2"], data["rho1"], data["rho2"])


def alpha(c: Coefficients) -> float:
    return 1.0 - (c.rho1 * c.a1) / (c.rho2 * c.a2)


def beta(c: Coefficients) -> float:
    """Reflection weight of the image term; lies in (-1, 1) for positive coefficients."""
    am1 = alpha(c) - 1.0
    s1, s2 = math.sqrt(c.a1), math.sqrt(c.a2)
    den = s1 - s2 * am1
    if not den > 0:
        raise ArithmeticError(f"degenerate beta denominator {den!r} for {c}")
    return (s1 + s2 * am1) / den


def _scalar_out(value: np.ndarray, *args):
    if all(np.ndim(a) == 0 for a in args):
        return float(value)
    return value


def f_transform(y, c: Coefficients):
    """Piecewise-linear change of variable ``y / sqrt(a_i)`` on each phase."""
    y_arr = np.asarray(y, dtype=float)
    out = np.where(y_arr > 0, y_arr / math.sqrt(c.a2), y_arr / math.sqrt(c.a1))
    return _scalar_out(out, y)


def _branch_mask(x: np.ndarray, side: Optional[str]) -> np.ndarray:
    """True where ``x`` is treated as a right-phase point."""
    right = x > 0
    if side is None:
        return right
    if side not in _SIDES:
        raise ValueError(f"side must be one of {_SIDES}, got {side!r}")
    if side == "right" and np.any(x < 0) or side == "left" and np.any(x > 0):
        raise ValueError(f"side={side!r} contradicts the sign of a nonzero x")
    return np.full(x.shape, side == "right") | right


def _prepare(t, x, y):
    t_arr, x_arr, y_arr = np.broadcast_arrays(
        np.asarray(t, dtype=float), np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    )
    if np.any(~(t_arr > 0)):
        raise ValueError("kernel evaluation requires t > 0")
    return t_arr, x_arr, y_arr


def _exponents(t, x, y, xr, c: Coefficients):
    """Return ``(e1, e2)``: the two Gaussian exponents, both >= 0."""
    yr = y > 0
    ax = np.where(xr, c.a2, c.a1)
    ay = np.where(yr, c.a2, c.a1)
    # With one diffusivity (or both points on one side) the exponents are written
    # without the change of variable: rounding in sqrt(a) would otherwise cost
    # about exponent * eps of relative accuracy against the textbook heat kernel.
    same = (xr == yr) | (c.a1 == c.a2)
    d = x / np.sqrt(ax) - y / np.sqrt(ay)
    e1 = np.where(same, (x - y) ** 2 / (2.0 * ax * t), d * d / (2.0 * t))
    e2 = np.where(same, (np.abs(x) + np.abs(y)) ** 2 / (2.0 * ax * t), e1)
    return e1, e2, ax, ay


def kernel_G(t, x, y, c: Coefficients, side: Optional[str] = None):
    """Fundamental solution ``G(t, x, y)``.

    ``side`` selects the branch used for ``x = 0``; by default ``x = 0`` is a
    left-phase point.  The kernel is continuous in ``x`` so both choices agree
    up to rounding.
    """
    t_arr, x_arr, y_arr = _prepare(t, x, y)
    xr = _branch_mask(x_arr, side)
    e1, e2, _, ay = _exponents(t_arr, x_arr, y_arr, xr, c)
    # sign(0) = -1 groups y = 0 with the 1{y <= 0} prefactor
    sgn = np.where(y_arr > 0, 1.0, -1.0)
    pref = 1.0 / (np.sqrt(2.0 * np.pi * t_arr) * np.sqrt(ay))
    out = pref * (np.exp(-e1) + beta(c) * sgn * np.exp(-e2))
    return _scalar_out(out, t, x, y)


def kernel_dGdx(t, x, y, c: Coefficients, side: Optional[str] = None):
    """Spatial derivative ``dG/dx``.

    ``G`` has a kink at ``x = 0``, so evaluating there requires ``side``
    ("left" for the limit from x < 0, "right" for x > 0).
    """
    t_arr, x_arr, y_arr = _prepare(t, x, y)
    if side is None and np.any(x_arr == 0):
        raise ValueError("dG/dx is two-valued at x = 0; pass side='left' or side='right'")
    xr = _branch_mask(x_arr, side)
    e1, e2, ax, ay = _exponents(t_arr, x_arr, y_arr, xr, c)
    sqrt_ax = np.sqrt(ax)
    fx = x_arr / sqrt_ax
    fy = y_arr / np.sqrt(ay)
    sgn_y = np.where(y_arr > 0, 1.0, -1.0)
    sgn_x = np.where(xr, 1.0, -1.0)
    pref = 1.0 / (np.sqrt(2.0 * np.pi * t_arr) * np.sqrt(ay))
    direct = -(fx - fy) / t_arr / sqrt_ax * np.exp(-e1)
    image = -beta(c) * sgn_y * (np.abs(fx) + np.abs(fy)) / t_arr * sgn_x / sqrt_ax * np.exp(-e2)
    out = pref * (direct + image)
    return _scalar_out(out, t, x, y)


def support_window(t: float, x: float, c: Coefficients, cutoff: float) -> tuple[float, float]:
    """Interval in ``y`` outside which ``G(t, x, y)`` is below ``exp(-cutoff)`` times its scale."""
    reach = math.sqrt(2.0 * cutoff * t)
    fx = float(f_transform(x, c))

    def inverse(w):
        return w * math.sqrt(c.a2) if w > 0 else w * math.sqrt(c.a1)

    return inverse(fx - reach), inverse(fx + reach)


def apply_semigroup(
    t: float,
    u0: Callable[[np.ndarray], np.ndarray],
    x: float,
    c: Coefficients,
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> float:
    """``integral G(t, x, y) u0(y) dy`` by composite Gauss-Legendre on the kernel's support.

    ``u0`` must accept a numpy array.  Raises :class:`QuadratureError` if the
    panel doubling does not settle.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    lo, hi = support_window(t, x, c, quad.exponent_cutoff)

    def integrand(y):
        return kernel_G(t, x, y, c) * np.asarray(u0(y), dtype=float)

    return integrate(integrand, lo, hi, quad, breakpoints=(0.0,))
