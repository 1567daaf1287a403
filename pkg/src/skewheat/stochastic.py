"""White-noise sampling and the discretised mild solution.

The noise lives on a uniform cell grid over ``[0, T] x [-L, L]``.  Each cell
carries an independent ``N(0, dt * dx)`` increment, the discrete version of a
white noise whose covariance is time overlap times Lebesgue measure.  The mild
field is the sum of kernel-weighted increments, with the kernel evaluated at
the cell centres.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .kernel import Coefficients, kernel_G, support_window
from .quadrature import DEFAULT_QUAD, QuadratureSpec, integrate

_MASK64 = (1 << 64) - 1

# elements per chunk of the (time, eval-x, y) weight tensor in mild_field
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class SpaceTimeGrid:
    T: float
    L: float
    n_t: int
    n_x: int

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be positive, got {self.T!r}")
        if not (math.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be positive, got {self.L!r}")
        if int(self.n_t) != self.n_t or self.n_t < 1:
            raise ValueError(f"n_t must be a positive integer, got {self.n_t!r}")
        if int(self.n_x) != self.n_x or self.n_x < 2 or self.n_x % 2:
            # even n_x keeps every cell centre off the interface y = 0
            raise ValueError(f"n_x must be a positive even integer, got {self.n_x!r}")

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n_x

    @property
    def s_centers(self) -> np.ndarray:
        return (np.arange(self.n_t) + 0.5) * self.dt

    @property
    def y_centers(self) -> np.ndarray:
        return -self.L + (np.arange(self.n_x) + 0.5) * self.dx

    def refined(self, factor: int = 2) -> "SpaceTimeGrid":
        return SpaceTimeGrid(self.T, self.L, self.n_t * factor, self.n_x * factor)

    def nests_in(self, fine: "SpaceTimeGrid") -> bool:
        """True if every cell of this grid is a union of cells of ``fine``."""
        return (
            self.T == fine.T
            and self.L == fine.L
            and fine.n_t % self.n_t == 0
            and fine.n_x % self.n_x == 0
        )

    def truncation_margin_ok(self, c: Coefficients, x_extent: float) -> bool:
        """Whether the noise support clears ``|x| <= x_extent`` by 6 diffusion lengths."""
        return self.L >= x_extent + 6.0 * math.sqrt(max(c.a1, c.a2) * self.T)

    def to_dict(self) -> dict:
        return {"T": self.T, "L": self.L, "n_t": self.n_t, "n_x": self.n_x}


@dataclass(frozen=True)
class NoiseField:
    grid: SpaceTimeGrid
    seed: int
    increments: np.ndarray = field(repr=False)
    replicate: int = 0

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.shape != (self.grid.n_t, self.grid.n_x):
            raise ValueError(f"increments shape {inc.shape} does not match grid")
        inc = inc.copy()
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    def scaled(self, factor: float) -> "NoiseField":
        return NoiseField(self.grid, self.seed, self.increments * factor, self.replicate)

    def coarsen(self, coarse: SpaceTimeGrid) -> "NoiseField":
        """Aggregate increments onto a nested coarser grid (sums over child cells)."""
        if not coarse.nests_in(self.grid):
            raise ValueError(f"{coarse} is not nested in {self.grid}")
        ft = self.grid.n_t // coarse.n_t
        fx = self.grid.n_x // coarse.n_x
        inc = self.increments.reshape(coarse.n_t, ft, coarse.n_x, fx).sum(axis=(1, 3))
        return NoiseField(coarse, self.seed, inc, self.replicate)


@dataclass
class FieldSample:
    eval_points: np.ndarray
    values: np.ndarray
    grid: SpaceTimeGrid
    seed: int
    replicate: int = 0

    def __post_init__(self):
        self.eval_points = np.asarray(self.eval_points, dtype=float).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.eval_points),):
            raise ValueError("values must have one entry per eval point")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def csv_rows(self) -> list[list]:
        return [
            [self.replicate, t, x, v]
            for (t, x), v in zip(self.eval_points.tolist(), self.values.tolist())
        ]


def generator(seed: int, replicate: int = 0) -> np.random.Generator:
    """Philox stream keyed by ``(seed, replicate)``.

    Different keys give statistically independent streams, so replicates can be
    drawn in any order or on any worker and still reproduce bit-for-bit.
    """
    key = (int(seed) & _MASK64) | ((int(replicate) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_noise(grid: SpaceTimeGrid, seed: int, replicate: int = 0) -> NoiseField:
    """Draw i.i.d. ``N(0, dt*dx)`` cell increments, deterministic in ``(grid, seed, replicate)``.

    Cells are filled in row-major (time, space) order from the keyed stream.
    """
    rng = generator(seed, replicate)
    z = rng.standard_normal((grid.n_t, grid.n_x))
    return NoiseField(grid, int(seed), z * math.sqrt(grid.dt * grid.dx), int(replicate))


def _check_eval_points(grid: SpaceTimeGrid, points: np.ndarray) -> None:
    t = points[:, 0]
    if np.any(~np.isfinite(points)):
        raise ValueError("eval points must be finite")
    if np.any(t <= 0) or np.any(t > grid.T * (1 + 1e-12)):
        raise ValueError(f"eval times must lie in (0, {grid.T}]")


def mild_weights(grid: SpaceTimeGrid, c: Coefficients, t: float, x: float) -> np.ndarray:
    """Weights ``w`` with ``u(t, x) = sum(w * increments)`` (zero rows for cells with s_i >= t)."""
    s = grid.s_centers
    w = np.zeros((grid.n_t, grid.n_x))
    active = s < t
    if np.any(active):
        w[active] = kernel_G((t - s[active])[:, None], x, grid.y_centers[None, :], c)
    return w


def mild_field(
    grid: SpaceTimeGrid,
    noise: NoiseField,
    c: Coefficients,
    eval_points: Sequence[Sequence[float]],
) -> FieldSample:
    """Midpoint discretisation of the mild solution at arbitrary ``(t, x)`` points."""
    if noise.grid != grid:
        raise ValueError("noise was sampled on a different grid")
    points = np.asarray(eval_points, dtype=float).reshape(-1, 2)
    _check_eval_points(grid, points)
    s = grid.s_centers
    y = grid.y_centers
    inc = noise.increments
    values = np.zeros(len(points))
    for t in np.unique(points[:, 0]):
        idx = np.flatnonzero(points[:, 0] == t)
        n_active = int(np.searchsorted(s, t, side="left"))
        if n_active == 0:
            continue
        xs = points[idx, 1]
        rows = max(1, _CHUNK_ELEMENTS // (len(xs) * grid.n_x))
        acc = np.zeros(len(xs))
        for start in range(0, n_active, rows):
            stop = min(n_active, start + rows)
            lag = (t - s[start:stop])[:, None, None]
            w = kernel_G(lag, xs[None, :, None], y[None, None, :], c)
            acc += np.einsum("ilj,ij->l", w, inc[start:stop])
        values[idx] = acc
    return FieldSample(points, values, grid, noise.seed, noise.replicate)


def lag_kernels(grid: SpaceTimeGrid, c: Coefficients, xs: np.ndarray, max_lag: int) -> np.ndarray:
    """``K[m-1, l, j] = G(m dt, xs[l], y_j)`` for lags ``m = 1..max_lag``."""
    lags = np.arange(1, max_lag + 1) * grid.dt
    return kernel_G(lags[:, None, None], np.asarray(xs)[None, :, None], grid.y_centers[None, None, :], c)


def mild_field_on_centers(
    noise: NoiseField,
    kernels: np.ndarray,
    time_indices: np.ndarray,
) -> np.ndarray:
    """Mild field at ``(s_k, xs[l])`` for grid time centres ``s_k``.

    Uses time homogeneity of the kernel: ``s_k - s_i = (k - i) dt``, so the
    field is a discrete convolution in time with the precomputed lag kernels
    (see :func:`lag_kernels`).  Returns an array of shape ``(len(time_indices), n_xs)``.
    """
    k = np.asarray(time_indices, dtype=int)
    inc = noise.increments
    out = np.zeros((len(k), kernels.shape[1]))
    max_lag = int(k.max(initial=0))
    if max_lag > kernels.shape[0]:
        raise ValueError("not enough lag kernels for the requested time indices")
    for m in range(1, max_lag + 1):
        sel = k >= m
        if not np.any(sel):
            continue
        out[sel] += inc[k[sel] - m] @ kernels[m - 1].T
    return out


def _square_kernel_mass(s: float, x1: float, x2: float, c: Coefficients, quad: QuadratureSpec) -> float:
    lo1, hi1 = support_window(s, x1, c, quad.exponent_cutoff)
    lo2, hi2 = support_window(s, x2, c, quad.exponent_cutoff)
    lo, hi = max(lo1, lo2), min(hi1, hi2)
    if lo >= hi:
        return 0.0

    def integrand(y):
        return kernel_G(s, x1, y, c) * kernel_G(s, x2, y, c)

    return integrate(integrand, lo, hi, quad, breakpoints=(0.0,))


def covariance_quadrature(
    t: float, x1: float, x2: float, c: Coefficients, quad: QuadratureSpec = DEFAULT_QUAD
) -> float:
    """``int_0^t int G(s, x1, y) G(s, x2, y) dy ds``.

    The substitution ``s = r^2`` removes the ``s^{-1/2}`` singularity at ``s = 0``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    inner = QuadratureSpec(
        order=quad.order,
        tol=quad.tol / 10,
        initial_panels=quad.initial_panels,
        max_panels=quad.max_panels,
        exponent_cutoff=quad.exponent_cutoff,
    )

    def integrand(r):
        return np.array(
            [2.0 * ri * _square_kernel_mass(ri * ri, x1, x2, c, inner) if ri > 0 else 0.0 for ri in np.atleast_1d(r)]
        )

    return integrate(integrand, 0.0, math.sqrt(t), quad)


def variance_quadrature(t: float, x: float, c: Coefficients, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Second moment of the mild solution, ``int_0^t int G(s, x, y)^2 dy ds``."""
    return covariance_quadrature(t, x, x, c, quad)


def homogeneous_variance(t: float, a: float) -> float:
    """Closed form ``sqrt(t / (pi a))`` of the variance when both phases coincide."""
    return math.sqrt(t / (math.pi * a))


@dataclass
class MonteCarloVariance:
    t: float
    x: float
    n: int
    mean: float
    variance: float
    standard_error: float
    values: np.ndarray = field(repr=False)


def monte_carlo_variance(
    grid: SpaceTimeGrid,
    c: Coefficients,
    t: float,
    x: float,
    n_replicates: int,
    seed: int,
    workers: int = 1,
) -> MonteCarloVariance:
    """Sample variance of ``u(t, x)`` over independent replicates ``0..n-1`` of ``seed``.

    The standard error is that of a Gaussian variance estimator,
    ``var * sqrt(2 / (n - 1))``.
    """
    if n_replicates < 2:
        raise ValueError("need at least two replicates")
    _check_eval_points(grid, np.array([[t, x]]))
    w = mild_weights(grid, c, t, x)

    def one(rep: int) -> float:
        return float(np.vdot(w, sample_noise(grid, seed, rep).increments))

    values = _map_ordered(one, range(n_replicates), workers)
    var = float(np.var(values, ddof=1))
    return MonteCarloVariance(
        t, x, n_replicates, float(np.mean(values)), var, var * math.sqrt(2.0 / (n_replicates - 1)), values
    )


def _map_ordered(func, items: Iterable, workers: int) -> np.ndarray:
    items = list(items)
    if workers <= 1:
        return np.array([func(i) for i in items])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(func, items)))


def field_samples_csv(samples: Iterable[FieldSample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["replicate", "t", "x", "value"])
    for sample in samples:
        for rep, t, x, v in sample.csv_rows():
            writer.writerow([rep, f"{t:.17g}", f"{x:.17g}", f"{v:.17g}"])
    return buf.getvalue()
