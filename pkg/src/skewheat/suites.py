"""Verification suites driven by a :class:`RunConfig`.

Each suite returns the CSV files it produced (name -> text) and a list of
:class:`Criterion` records for the run summary.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import detcheck
from .config import RunConfig
from .kernel import Coefficients, kernel_dGdx, kernel_G
from .stochastic import (
    FieldSample,
    SpaceTimeGrid,
    field_samples_csv,
    homogeneous_variance,
    monte_carlo_variance,
    variance_quadrature,
)
from .weakform import (
    RESIDUAL_COLUMNS,
    equivalence_residual,
    refinement_study,
)

log = logging.getLogger(__name__)

PDE_LADDER = (1e-2, 5e-3, 2.5e-3)


@dataclass(frozen=True)
class Criterion:
    suite: str
    criterion: str
    measured: float
    threshold: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "criterion": self.criterion,
            "measured": self.measured,
            "threshold": self.threshold,
            "pass": self.passed,
        }


def _at_most(suite, name, measured, threshold) -> Criterion:
    return Criterion(suite, name, float(measured), float(threshold), bool(measured <= threshold))


def _at_least(suite, name, measured, threshold) -> Criterion:
    return Criterion(suite, name, float(measured), float(threshold), bool(measured >= threshold))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _g17(v: float) -> str:
    return f"{v:.17g}"


def random_coefficients(rng: np.random.Generator, n: int, low: float = 0.2, high: float = 5.0) -> list[Coefficients]:
    return [Coefficients(*rng.uniform(low, high, 4)) for _ in range(n)]


# -- kernel checks -----------------------------------------------------------


def gaussian_reduction_error(a: float, rho: float, n: int, seed: int) -> float:
    """Max relative deviation of the homogeneous kernel from the textbook heat kernel."""
    rng = np.random.default_rng(seed)
    c = Coefficients.homogeneous(a, rho)
    t = rng.uniform(0.1, 2.0, n)
    x = rng.uniform(-3.0, 3.0, n)
    y = rng.uniform(-3.0, 3.0, n)
    ref = np.exp(-((x - y) ** 2) / (2.0 * a * t)) / np.sqrt(2.0 * np.pi * t * a)
    return float(np.max(np.abs(kernel_G(t, x, y, c) - ref) / ref))


def kernel_checks(cfg: RunConfig) -> tuple[dict, list[Criterion]]:
    suite = "kernel-checks"
    tol = cfg.tolerances
    c = cfg.coefficients.build()
    n, seed = cfg.scan.samples, cfg.scan.seed
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.1, 2.0, n)
    x = rng.uniform(-3.0, 3.0, n)
    y = rng.uniform(-3.0, 3.0, n)

    gauss = gaussian_reduction_error(c.a1, c.rho1, n, seed)
    positivity = float(np.min(kernel_G(t, x, y, c)))
    left = kernel_G(t, 0.0, y, c, side="left")
    right = kernel_G(t, 0.0, y, c, side="right")
    continuity = float(np.max(np.abs(left - right) / np.maximum(np.abs(left), 1e-300)))

    h = 1e-4
    xf = np.where(np.abs(x) < 20 * h, x + np.copysign(20 * h, x), x)
    fd = (kernel_G(t, xf + h, y, c) - kernel_G(t, xf - h, y, c)) / (2 * h)
    exact = kernel_dGdx(t, xf, y, c)
    deriv = float(np.max(np.abs(fd - exact) / np.maximum(np.abs(exact), 1.0)))

    sym = detcheck.scan_identity(
        "rho_symmetry", detcheck.SampleSpec(n=n, seed=seed), c
    ).max_abs_error

    rows = [
        ("gaussian_reduction", gauss, tol.gaussian_reduction),
        ("positivity_min", positivity, tol.positivity),
        ("continuity_at_interface", continuity, tol.continuity),
        ("derivative_fd", deriv, tol.derivative_fd),
        ("rho_symmetry", sym, tol.rho_symmetry),
    ]
    criteria = [
        _at_most(suite, "gaussian_reduction", gauss, tol.gaussian_reduction),
        Criterion(suite, "positivity_min", positivity, tol.positivity, positivity > tol.positivity),
        _at_most(suite, "continuity_at_interface", continuity, tol.continuity),
        _at_most(suite, "derivative_fd", deriv, tol.derivative_fd),
        _at_most(suite, "rho_symmetry", sym, tol.rho_symmetry),
    ]
    text = _csv(["check", "measured", "threshold", "sample_count", "seed"], [(k, _g17(m), _g17(th), n, seed) for k, m, th in rows])
    return {"kernel_checks.csv": text}, criteria


# -- identity scan -------------------------------------------------------------


def pde_orders(c_list: list[Coefficients], n: int, seed: int) -> np.ndarray:
    """Observed order of the finite-difference PDE residual at random points.

    Points keep ``|x|`` and ``|x - y|`` above ``20 * max(PDE_LADDER)``.
    """
    rng = np.random.default_rng(seed)
    margin = 20 * max(PDE_LADDER)
    orders = []
    while len(orders) < n:
        c = c_list[len(orders) % len(c_list)]
        t = rng.uniform(0.2, 1.5)
        x, y = rng.uniform(-3.0, 3.0, 2)
        if min(abs(x), abs(x - y)) <= margin:
            continue
        errs = [detcheck.pde_residual(t, x, y, c, h * h, h) for h in PDE_LADDER]
        orders.append(detcheck.observed_order(errs, PDE_LADDER))
    return np.array(orders)


def identity_scan(cfg: RunConfig) -> tuple[dict, list[Criterion]]:
    suite = "identity-scan"
    tol = cfg.tolerances
    c = cfg.coefficients.build()
    quad = cfg.quad()
    seed = cfg.scan.seed
    big = detcheck.SampleSpec(n=cfg.scan.samples, seed=seed)
    small = detcheck.SampleSpec(n=cfg.scan.quadrature_samples, seed=seed)
    specs = {
        "flux_jump": big,
        "pde_residual": big,
        "semigroup": detcheck.SampleSpec(n=small.n, seed=seed, t_min=0.2),
        "normalization": small,
        "rho_symmetry": big,
    }
    thresholds = {
        "flux_jump": tol.flux_jump,
        "pde_residual": tol.pde_residual,
        "semigroup": tol.semigroup,
        "normalization": tol.normalization,
        "rho_symmetry": tol.rho_symmetry,
    }
    reports = [detcheck.scan_identity(name, spec, c, quad, workers=cfg.workers) for name, spec in specs.items()]
    criteria = [_at_most(suite, r.identity_name, r.max_abs_error, thresholds[r.identity_name]) for r in reports]
    orders = pde_orders([c], cfg.scan.order_samples, seed)
    criteria.append(_at_least(suite, "pde_residual_order_min", float(orders.min()), tol.pde_order))
    return {"identity_scan.csv": detcheck.reports_csv(reports)}, criteria


# -- Monte Carlo variance ------------------------------------------------------


def mc_variance(cfg: RunConfig) -> tuple[dict, list[Criterion]]:
    suite = "mc-variance"
    tol = cfg.tolerances
    c = cfg.coefficients.build()
    grid = cfg.grid.build()
    seed = cfg.seed_list()[0]
    points = cfg.monte_carlo.eval_points or [[grid.T, 0.0]]
    homogeneous = c.a1 == c.a2 and c.rho1 == c.rho2
    k_se = tol.mc_se_homogeneous if homogeneous else tol.mc_se_heterogeneous
    samples, criteria = [], []
    for t, x in points:
        if not grid.truncation_margin_ok(c, abs(x)):
            log.warning("L = %g leaves less than 6 diffusion lengths around x = %g", grid.L, x)
        mc = monte_carlo_variance(grid, c, t, x, cfg.monte_carlo.replicates, seed, cfg.workers)
        reference = homogeneous_variance(t, c.a1) if homogeneous else variance_quadrature(t, x, c, cfg.quad())
        z = abs(mc.variance - reference) / mc.standard_error
        criteria.append(_at_most(suite, f"variance_z(t={t:g},x={x:g})", z, k_se))
        for rep, value in enumerate(mc.values):
            samples.append(FieldSample([[t, x]], [value], grid, seed, rep))
    return {"mc_variance.csv": field_samples_csv(samples)}, criteria


# -- weak-form suites -----------------------------------------------------------


def _suffix(i: int, n: int) -> str:
    return "" if n == 1 else f"_phi{i}"


def weak_equivalence(cfg: RunConfig) -> tuple[dict, list[Criterion]]:
    suite = "weak-equivalence"
    tol = cfg.tolerances
    c = cfg.coefficients.build()
    grid = cfg.grid.build()
    bumps = cfg.bumps()
    files, criteria = {}, []
    zero_interface = c.rho1 * c.a1 == c.rho2 * c.a2
    for i, phi in enumerate(bumps):
        reports = [equivalence_residual(grid, s, phi, c) for s in cfg.seed_list()]
        files[f"weak_equivalence{_suffix(i, len(bumps))}.csv"] = _csv(RESIDUAL_COLUMNS, [r.csv_row() for r in reports])
        med = float(np.median([r.relative_residual for r in reports]))
        criteria.append(_at_most(suite, f"median_relative_residual[phi{i}]", med, tol.weak_relative))
        if zero_interface:
            worst = max(abs(r.rhs_interface) for r in reports)
            criteria.append(_at_most(suite, f"interface_term_zero[phi{i}]", worst, 0.0))
    return files, criteria


def refinement(cfg: RunConfig) -> tuple[dict, list[Criterion]]:
    suite = "refinement"
    tol = cfg.tolerances
    c = cfg.coefficients.build()
    T, L = cfg.grid.T, cfg.grid.L
    ladder = [SpaceTimeGrid(T, L, n, n) for n in cfg.ladder]
    bumps = cfg.bumps()
    files, criteria = {}, []
    for i, phi in enumerate(bumps):
        table = refinement_study(phi, c, cfg.seed_list(), ladder, workers=cfg.workers)
        files[f"refinement{_suffix(i, len(bumps))}.csv"] = table.csv()
        meds = table.median_relative
        increases = sum(b >= a for a, b in zip(meds[:-1], meds[1:]))
        criteria.append(_at_most(suite, f"median_increases[phi{i}]", increases, tol.weak_inversions))
        criteria.append(_at_most(suite, f"finest_median_relative_residual[phi{i}]", meds[-1], tol.weak_relative))
        if c.rho1 * c.a1 == c.rho2 * c.a2:
            worst = max(abs(r.rhs_interface) for r in table.rows)
            criteria.append(_at_most(suite, f"interface_term_zero[phi{i}]", worst, 0.0))
    return files, criteria


SUITE_RUNNERS: dict[str, Callable[[RunConfig], tuple[dict, list[Criterion]]]] = {
    "kernel-checks": kernel_checks,
    "identity-scan": identity_scan,
    "mc-variance": mc_variance,
    "weak-equivalence": weak_equivalence,
    "refinement": refinement,
}


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_suites(cfg: RunConfig, output_dir: Path) -> list[Criterion]:
    """Run the configured suites in order, writing CSVs and ``summary.json``."""
    criteria: list[Criterion] = []
    for name in cfg.suites:
        log.info("running suite %s", name)
        files, found = SUITE_RUNNERS[name](cfg)
        for fname, text in files.items():
            write_atomic(output_dir / fname, text)
        criteria.extend(found)
    summary = json.dumps([c.to_json() for c in criteria], indent=2) + "\n"
    write_atomic(output_dir / "summary.json", summary)
    return criteria
