"""Weak-form residual of the mild solution.

Both sides of the integrated-by-parts identity

    - int u (d_s phi + L phi) rho dx ds
        = int phi rho dW + 1/2 (rho2 a2 - rho1 a1) int u(s, 0) d_x phi(s, 0) ds

are assembled on a single noise realisation, with ``u`` taken from the
discretised mild formula.  The left side uses the noise cell centres inside
the support of ``phi`` as quadrature nodes, so the deterministic and
stochastic discretisations share one grid.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .kernel import Coefficients
from .stochastic import (
    NoiseField,
    SpaceTimeGrid,
    lag_kernels,
    mild_field_on_centers,
    sample_noise,
)

RESIDUAL_COLUMNS = ["seed", "n_t", "n_x", "lhs", "rhs_noise", "rhs_interface", "residual", "field_rms"]

# floor for the relative residual denominator (zero-noise fields)
RMS_FLOOR = 1e-12


def _bump(z: np.ndarray):
    """``b(z) = exp(-1/(1-z^2))`` on |z| < 1 with its first two derivatives."""
    inside = np.abs(z) < 1
    q = np.where(inside, 1.0 - z * z, 1.0)
    b = np.where(inside, np.exp(-1.0 / q), 0.0)
    db = b * (-2.0 * z / q**2)
    d2b = b * (6.0 * z**4 - 2.0) / q**4
    return b, db, d2b


@dataclass(frozen=True)
class TestFunction:
    """Product bump ``amplitude * b((s - s0)/r_s) * b((x - x0)/r_x)``."""

    __test__ = False  # keep pytest from collecting this class

    s0: float
    x0: float
    r_s: float
    r_x: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not (self.r_s > 0 and self.r_x > 0):
            raise ValueError("bump radii must be positive")
        if not self.s0 - self.r_s > 0:
            raise ValueError("bump support must start after s = 0")
        for name in ("s0", "x0", "r_s", "r_x", "amplitude"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def straddling(cls, T: float) -> "TestFunction":
        """Default bump straddling the interface.

        The centre is offset from 0 because a bump centred on the interface has
        ``d_x phi(s, 0) = 0``, which would switch the interface term off.
        """
        return cls(s0=T / 2, x0=0.3, r_s=T / 3, r_x=1.0)

    @classmethod
    def interface_free(cls, T: float) -> "TestFunction":
        """Default bump lying entirely in x > 0 (support touches 0 only at its edge)."""
        return cls(s0=T / 2, x0=2.0, r_s=T / 3, r_x=1.0)

    def check_inside(self, grid: SpaceTimeGrid) -> None:
        if not self.s0 + self.r_s < grid.T:
            raise ValueError(f"bump support must end before T = {grid.T}")
        if not (self.x0 - self.r_x > -grid.L and self.x0 + self.r_x < grid.L):
            raise ValueError(f"bump support must lie inside (-{grid.L}, {grid.L})")

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(self.s0, self.x0, self.r_s, self.r_x, self.amplitude * factor)

    def to_dict(self) -> dict:
        return asdict(self)


def eval_test_fn(phi: TestFunction, s, x):
    """Return ``(phi, d_s phi, d_x phi, d_xx phi)`` at ``(s, x)``, all zero off the support."""
    s, x = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(x, dtype=float))
    bs, dbs, _ = _bump((s - phi.s0) / phi.r_s)
    bx, dbx, d2bx = _bump((x - phi.x0) / phi.r_x)
    a = phi.amplitude
    value = a * bs * bx
    ds = a * dbs / phi.r_s * bx
    dx = a * bs * dbx / phi.r_x
    dxx = a * bs * d2bx / phi.r_x**2
    if s.ndim == 0:
        return float(value), float(ds), float(dx), float(dxx)
    return value, ds, dx, dxx


@dataclass
class NodalField:
    """Field values on a tensor grid of quadrature nodes with uniform cell sizes."""

    s: np.ndarray
    x: np.ndarray
    values: np.ndarray
    ds: float
    dx: float

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.s), len(self.x)):
            raise ValueError("values must have shape (len(s), len(x))")

    def rms(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.values**2)))


def weak_lhs(u: NodalField, phi: TestFunction, c: Coefficients) -> float:
    """Midpoint value of ``-int u (d_s phi + (A/2) d_xx phi) rho dx ds``.

    ``rho A`` is constant on each half-line, so ``L phi`` is ``(A/2) d_xx phi``
    there.  A node on the interface is rejected.
    """
    if np.any(u.x == 0):
        raise ValueError("quadrature nodes must avoid the interface x = 0")
    _, ds, _, dxx = eval_test_fn(phi, u.s[:, None], u.x[None, :])
    a = c.A(u.x)[None, :]
    rho = c.rho(u.x)[None, :]
    return -float(np.sum(u.values * (ds + 0.5 * a * dxx) * rho)) * u.ds * u.dx


InterfaceField = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


def weak_rhs(
    noise: NoiseField,
    phi: TestFunction,
    u_at_interface: InterfaceField,
    c: Coefficients,
    grid: Optional[SpaceTimeGrid] = None,
) -> tuple[float, float]:
    """Return ``(rhs_noise, rhs_interface)``.

    ``rhs_noise`` pairs ``phi rho`` at cell centres with the increments;
    ``rhs_interface`` applies the midpoint rule in time at the cell-centre
    times.  ``u_at_interface`` is either a callable ``s -> u(s, 0)`` or its
    values at every cell-centre time.
    """
    if grid is not None and noise.grid != grid:
        raise ValueError("noise and grid do not match")
    g = noise.grid
    phi.check_inside(g)
    s, y = g.s_centers, g.y_centers
    value, _, _, _ = eval_test_fn(phi, s[:, None], y[None, :])
    rhs_noise = float(np.sum(value * c.rho(y)[None, :] * noise.increments))

    jump = c.flux_jump_coefficient()
    if jump == 0.0:
        return rhs_noise, 0.0
    _, _, dphi0, _ = eval_test_fn(phi, s, np.zeros_like(s))
    active = dphi0 != 0
    if callable(u_at_interface):
        u0 = np.zeros_like(s)
        if np.any(active):
            u0[active] = np.asarray(u_at_interface(s[active]), dtype=float)
    else:
        u0 = np.asarray(u_at_interface, dtype=float)
        if u0.shape != s.shape:
            raise ValueError("interface values must be given at every cell-centre time")
    rhs_interface = 0.5 * jump * float(np.sum(u0 * dphi0)) * g.dt
    return rhs_noise, rhs_interface


@dataclass(frozen=True)
class WeakResidualReport:
    lhs: float
    rhs_noise: float
    rhs_interface: float
    residual: float
    field_rms: float
    grid: SpaceTimeGrid
    seed: int

    def __post_init__(self):
        for name in ("lhs", "rhs_noise", "rhs_interface", "residual", "field_rms"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / max(self.field_rms, RMS_FLOOR)

    def csv_row(self) -> list[str]:
        return [
            str(self.seed),
            str(self.grid.n_t),
            str(self.grid.n_x),
            *(f"{v:.17g}" for v in (self.lhs, self.rhs_noise, self.rhs_interface, self.residual, self.field_rms)),
        ]


class _Assembler:
    """Per-grid precomputation shared by every noise realisation on that grid."""

    def __init__(self, grid: SpaceTimeGrid, phi: TestFunction, c: Coefficients):
        phi.check_inside(grid)
        self.grid, self.phi, self.c = grid, phi, c
        s, y = grid.s_centers, grid.y_centers
        self.k_nodes = np.flatnonzero(np.abs(s - phi.s0) < phi.r_s)
        self.x_nodes = y[np.abs(y - phi.x0) < phi.r_x]
        self.k_all = np.arange(grid.n_t)
        self.need_interface = c.flux_jump_coefficient() != 0.0
        xs = np.append(self.x_nodes, 0.0) if self.need_interface else self.x_nodes
        max_k = int(self.k_all.max() if self.need_interface else self.k_nodes.max(initial=0))
        self.kernels = lag_kernels(grid, c, xs, max_k)

    def report(self, noise: NoiseField) -> WeakResidualReport:
        grid = self.grid
        k = self.k_all if self.need_interface else self.k_nodes
        u = mild_field_on_centers(noise, self.kernels, k)
        if self.need_interface:
            interior = u[self.k_nodes, :-1]
            u0 = u[:, -1]
        else:
            interior = u
            u0 = np.zeros(grid.n_t)
        field = NodalField(grid.s_centers[self.k_nodes], self.x_nodes, interior, grid.dt, grid.dx)
        lhs = weak_lhs(field, self.phi, self.c)
        rhs_noise, rhs_interface = weak_rhs(noise, self.phi, u0, self.c)
        return WeakResidualReport(
            lhs, rhs_noise, rhs_interface, lhs - rhs_noise - rhs_interface, field.rms(), grid, noise.seed
        )


def equivalence_residual(
    grid: SpaceTimeGrid,
    seed: int,
    phi: TestFunction,
    c: Coefficients,
    noise: Optional[NoiseField] = None,
) -> WeakResidualReport:
    """Assemble both sides of the weak identity on one realisation.

    The noise is drawn from ``seed`` unless an explicit ``noise`` on ``grid``
    is supplied (used for coupled refinement and for the zero-noise check).
    """
    if noise is None:
        noise = sample_noise(grid, seed)
    elif noise.grid != grid:
        raise ValueError("noise was sampled on a different grid")
    return _Assembler(grid, phi, c).report(noise)


@dataclass
class RefinementTable:
    rows: list[WeakResidualReport]
    levels: list[SpaceTimeGrid]
    median_relative: list[float] = field(default_factory=list)

    def csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RESIDUAL_COLUMNS)
        for r in self.rows:
            writer.writerow(r.csv_row())
        return buf.getvalue()


def refinement_study(
    phi: TestFunction,
    c: Coefficients,
    seeds: Sequence[int],
    ladder: Sequence[SpaceTimeGrid],
    workers: int = 1,
) -> RefinementTable:
    """Weak residual for every (seed, level) with noise coupled across levels.

    Noise is drawn once per seed on the finest grid and summed onto each
    coarser level, so all levels see the same underlying white noise.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    if not ladder:
        raise ValueError("the ladder needs at least one grid")
    finest = ladder[-1]
    for coarse, fine in zip(ladder[:-1], ladder[1:]):
        if not (coarse.nests_in(fine) and fine.n_t > coarse.n_t):
            raise ValueError(f"ladder is not nested: {coarse} -> {fine}")
    assemblers = [_Assembler(g, phi, c) for g in ladder]

    def per_seed(seed: int) -> list[WeakResidualReport]:
        fine_noise = sample_noise(finest, seed)
        return [a.report(fine_noise.coarsen(a.grid)) for a in assemblers]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per = list(pool.map(per_seed, seeds))
    else:
        per = [per_seed(s) for s in seeds]
    rows = [per[i][lvl] for i in range(len(seeds)) for lvl in range(len(ladder))]
    medians = [statistics.median(per[i][lvl].relative_residual for i in range(len(seeds))) for lvl in range(len(ladder))]
    return RefinementTable(rows, list(ladder), medians)


def decreasing_with_one_inversion(values: Sequence[float]) -> bool:
    """True if ``values`` decrease step to step with at most one increase."""
    return sum(b >= a for a, b in zip(values[:-1], values[1:])) <= 1
