"""Deterministic checks of the kernel identities.

Each check returns a scalar error; :func:`scan_identity` folds a check over a
seeded random point cloud into an :class:`IdentityReport`.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .kernel import Coefficients, kernel_dGdx, kernel_G, support_window
from .quadrature import DEFAULT_QUAD, QuadratureSpec, UnderResolvedError, integrate

DEFAULT_SEED = 2024

IDENTITIES = ("flux_jump", "pde_residual", "semigroup", "normalization", "rho_symmetry")

REPORT_COLUMNS = ["identity_name", "max_abs_error", "sample_count", "worst_t", "worst_x", "worst_y", "seed"]


@dataclass(frozen=True)
class IdentityReport:
    identity_name: str
    max_abs_error: float
    sample_count: int
    worst_point: tuple[float, float, float]
    seed: int

    def __post_init__(self):
        if self.identity_name not in IDENTITIES:
            raise ValueError(f"unknown identity {self.identity_name!r}")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if not self.max_abs_error >= 0:
            raise ValueError("max_abs_error must be non-negative")

    def csv_row(self) -> list[str]:
        t, x, y = self.worst_point
        return [
            self.identity_name,
            f"{self.max_abs_error:.17g}",
            str(self.sample_count),
            f"{t:.17g}",
            f"{x:.17g}",
            f"{y:.17g}",
            str(self.seed),
        ]


def reports_csv(reports: Iterable[IdentityReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def flux_jump(t, y, c: Coefficients):
    """``a1 rho1 dG/dx(t, 0-, y) - a2 rho2 dG/dx(t, 0+, y)``; vanishes for a transmission kernel."""
    if np.any(np.asarray(y) == 0):
        raise ValueError("flux_jump requires y != 0")
    left = kernel_dGdx(t, 0.0, y, c, side="left")
    right = kernel_dGdx(t, 0.0, y, c, side="right")
    return c.a1 * c.rho1 * left - c.a2 * c.rho2 * right


def pde_residual(t, x, y, c: Coefficients, h_t: float, h_x: float):
    """Central-difference estimate of ``dG/dt - (A(x)/2) d2G/dx2`` away from the interface.

    On each half-line ``rho A`` is constant, so the operator reduces to the
    plain second derivative scaled by ``A(x)/2``.
    """
    t, x, y = (np.asarray(v, dtype=float) for v in (t, x, y))
    if np.any(x == 0) or np.any(x == y):
        raise ValueError("pde_residual requires x != 0 and x != y")
    if np.any(t - h_t <= 0):
        raise ValueError("need t - h_t > 0")
    if np.any(np.minimum(np.abs(x), np.abs(x - y)) <= 10 * h_x):
        raise ValueError("x must stay more than 10*h_x away from 0 and from y")
    dt = (kernel_G(t + h_t, x, y, c) - kernel_G(t - h_t, x, y, c)) / (2 * h_t)
    dxx = (kernel_G(t, x + h_x, y, c) - 2 * kernel_G(t, x, y, c) + kernel_G(t, x - h_x, y, c)) / (h_x * h_x)
    out = dt - 0.5 * c.A(x) * dxx
    return float(out) if out.ndim == 0 else out


def _product_window(t1: float, t2: float, x: float, y: float, c: Coefficients, cutoff: float):
    lo1, hi1 = support_window(t1, x, c, cutoff)
    lo2, hi2 = support_window(t2, y, c, cutoff)
    return min(lo1, lo2), max(hi1, hi2)


def semigroup_residual(
    t1: float, t2: float, x: float, y: float, c: Coefficients, quad: QuadratureSpec = DEFAULT_QUAD
) -> float:
    """``|G(t1+t2, x, y) - int G(t1, x, z) G(t2, z, y) dz|``.

    The ``z`` range covers both factors' supports with uniform panels; when the
    narrower factor is thinner than ``quad.min_panels_per_width`` of the finest
    allowed panels an :class:`UnderResolvedError` is raised instead of
    returning an unreliable number.
    """
    if not (t1 > 0 and t2 > 0):
        raise ValueError("t1 and t2 must be positive")
    lo, hi = _product_window(t1, t2, x, y, c, quad.exponent_cutoff)
    width = math.sqrt(min(c.a1, c.a2) * min(t1, t2))
    finest = (hi - lo) / quad.max_panels
    if width < quad.min_panels_per_width * finest:
        raise UnderResolvedError(
            f"kernel width {width:.3g} spans fewer than {quad.min_panels_per_width} panels of {finest:.3g}",
            width / finest,
        )

    def integrand(z):
        return kernel_G(t1, x, z, c) * kernel_G(t2, z, y, c)

    conv = integrate(integrand, lo, hi, quad, breakpoints=(0.0,))
    return abs(kernel_G(t1 + t2, x, y, c) - conv)


def kernel_mass(t: float, x: float, c: Coefficients, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``int G(t, x, y) dy`` over the kernel's support."""
    if not t > 0:
        raise ValueError("t must be positive")
    lo, hi = support_window(t, x, c, quad.exponent_cutoff)
    return integrate(lambda y: kernel_G(t, x, y, c), lo, hi, quad, breakpoints=(0.0,))


def normalization_gap(t: float, x: float, c: Coefficients, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    return abs(kernel_mass(t, x, c, quad) - 1.0)


def integral_bound(c: Coefficients, ts: Iterable[float], xs: Iterable[float], quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Empirical ``sup int |G(t, x, y)| dy`` over the given ``(t, x)`` grid.

    ``G`` is positive, so this is the largest mass found.
    """
    return max(kernel_mass(t, x, c, quad) for t in ts for x in xs)


@dataclass(frozen=True)
class SampleSpec:
    """Seeded random point cloud for identity scans.

    Times are drawn uniformly from ``[t_min, t_max]`` and positions from
    ``[-x_max, x_max]``; points closer than ``exclusion`` to the interface or
    to each other are redrawn.
    """

    n: int = 1000
    t_min: float = 0.1
    t_max: float = 2.0
    x_max: float = 3.0
    exclusion: float = 0.1
    seed: int = DEFAULT_SEED

    def points(self) -> np.ndarray:
        if self.n < 1:
            raise ValueError("point cloud is empty")
        rng = np.random.default_rng(self.seed)
        out = np.empty((0, 3))
        while len(out) < self.n:
            t = rng.uniform(self.t_min, self.t_max, self.n)
            x = rng.uniform(-self.x_max, self.x_max, self.n)
            y = rng.uniform(-self.x_max, self.x_max, self.n)
            ok = (np.abs(x) > self.exclusion) & (np.abs(y) > self.exclusion) & (np.abs(x - y) > self.exclusion)
            out = np.vstack([out, np.column_stack([t, x, y])[ok]])
        return out[: self.n]


class ScanError(RuntimeError):
    def __init__(self, identity: str, point, cause: Exception):
        super().__init__(f"{identity} failed at (t, x, y) = {tuple(point)}: {cause}")
        self.point = tuple(point)
        self.__cause__ = cause


def _pointwise(identity: str, c: Coefficients, quad: QuadratureSpec, h_x: float):
    if identity == "flux_jump":
        return lambda t, x, y: abs(flux_jump(t, y, c))
    if identity == "pde_residual":
        return lambda t, x, y: abs(pde_residual(t, x, y, c, h_x * h_x, h_x))
    if identity == "semigroup":
        return lambda t, x, y: semigroup_residual(t / 2, t / 2, x, y, c, quad)
    if identity == "normalization":
        return lambda t, x, y: normalization_gap(t, x, c, quad)
    if identity == "rho_symmetry":
        def sym(t, x, y):
            lhs = float(c.rho(x)) * kernel_G(t, x, y, c)
            rhs = float(c.rho(y)) * kernel_G(t, y, x, c)
            return abs(lhs - rhs) / max(abs(lhs), abs(rhs), np.finfo(float).tiny)
        return sym
    raise ValueError(f"unknown identity {identity!r}; expected one of {IDENTITIES}")


def scan_identity(
    identity: str,
    sample_spec: SampleSpec,
    c: Coefficients,
    quad: QuadratureSpec = DEFAULT_QUAD,
    h_x: float = 1e-3,
    workers: int = 1,
) -> IdentityReport:
    """Worst-case error of ``identity`` over the sample cloud.

    Errors are absolute except ``rho_symmetry``, which is relative.  The semigroup check splits each sampled
    ``t`` as ``t/2 + t/2``.
    """
    func = _pointwise(identity, c, quad, h_x)
    points = sample_spec.points()

    def evaluate(p):
        try:
            return float(func(*p))
        except Exception as exc:
            raise ScanError(identity, p, exc) from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = np.array(list(pool.map(evaluate, points)))
    else:
        errors = np.array([evaluate(p) for p in points])
    # first index of the max: independent of how the cloud was partitioned
    worst = int(np.argmax(errors))
    return IdentityReport(
        identity, float(errors[worst]), len(points), tuple(float(v) for v in points[worst]), sample_spec.seed
    )


def observed_order(errors, steps) -> float:
    """Least-squares slope of ``log|error|`` against ``log(step)``."""
    e = np.log(np.abs(np.asarray(errors, dtype=float)))
    h = np.log(np.asarray(steps, dtype=float))
    return float(np.polyfit(h, e, 1)[0])
