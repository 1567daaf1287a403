import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from skewheat.detcheck import (
    IdentityReport,
    SampleSpec,
    ScanError,
    flux_jump,
    integral_bound,
    kernel_mass,
    normalization_gap,
    observed_order,
    pde_residual,
    reports_csv,
    scan_identity,
    semigroup_residual,
)
from skewheat.kernel import Coefficients, kernel_G
from skewheat.quadrature import UnderResolvedError

positive = st.floats(min_value=0.2, max_value=5.0)
coeffs = st.builds(Coefficients, positive, positive, positive, positive)
HET = Coefficients(1.0, 2.0, 1.0, 1.0)


@pytest.mark.parametrize(
    "t,y,c",
    [
        (0.7, 1.3, HET),
        (0.7, 1.3, Coefficients(3.0, 0.5, 2.0, 0.25)),
        (1.0, 0.4, Coefficients.homogeneous(2.0, 3.0)),
        (1.0, -0.5, Coefficients(2.0, 1.0, 1.0, 3.0)),
    ],
)
def test_flux_jump_examples(t, y, c):
    assert abs(flux_jump(t, y, c)) < 1e-12


def test_flux_jump_rejects_interface_source():
    with pytest.raises(ValueError):
        flux_jump(1.0, 0.0, HET)


@settings(max_examples=300)
@given(c=coeffs, t=st.floats(0.05, 5.0), y=st.floats(-4.0, 4.0).filter(lambda v: abs(v) > 1e-6))
def test_flux_is_continuous_across_interface(c, t, y):
    assert abs(flux_jump(t, y, c)) < 1e-12 * max(1.0, c.a1 * c.rho1 / t, c.a2 * c.rho2 / t)


def test_pde_residual_example_matches_oracle():
    got = pde_residual(0.5, 0.8, -0.3, HET, 1e-6, 1e-3)
    assert abs(got) < 1e-4
    # the same difference quotient evaluated in 40-digit arithmetic
    assert got == pytest.approx(float(oracles.fd_pde_residual(0.5, 0.8, -0.3, (1, 2, 1, 1), 1e-6, 1e-3)), abs=1e-8)


def test_pde_residual_homogeneous_heat_kernel():
    c = Coefficients.homogeneous(1.5, 0.4)
    assert abs(pde_residual(1.0, 0.7, -0.4, c, 1e-6, 1e-3)) < 1e-6


def test_pde_residual_decreases_quadratically():
    # Points where the h^2 term dominates: skip far tails (tiny G) and pairs
    # whose finer residual is already at the roundoff floor.
    rng = np.random.default_rng(11)
    h = 1e-2
    checked = 0
    for _ in range(20000):
        c = Coefficients(*rng.uniform(0.2, 5.0, 4))
        t = rng.uniform(0.2, 2.0)
        x, y = rng.uniform(-3.0, 3.0, 2)
        if min(abs(x), abs(x - y)) <= 10 * h:
            continue
        g = kernel_G(t, x, y, c)
        if g < 1e-8:
            continue
        coarse = pde_residual(t, x, y, c, h * h, h)
        fine = pde_residual(t, x, y, c, h * h / 4, h / 2)
        if abs(fine) < 1e3 * 1e-12 * g / (h / 2) ** 2:
            continue
        checked += 1
        assert abs(coarse) / abs(fine) >= 3.5, (t, x, y, c)
    assert checked > 1000


def test_observed_order_of_pde_residual():
    steps = (1e-2, 5e-3, 2.5e-3)
    errs = [pde_residual(0.6, 0.9, -0.4, HET, h * h, h) for h in steps]
    assert observed_order(errs, steps) == pytest.approx(2.0, abs=0.1)


def test_observed_order_exact_power():
    steps = np.array([0.1, 0.05, 0.025])
    assert observed_order(3 * steps**2, steps) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize(
    "args",
    [
        (1.0, 0.0, 0.5),  # on the interface
        (1.0, 0.5, 0.5),  # on the source
        (1.0, 0.005, 0.5),  # stencil crosses the interface
        (1e-7, 0.5, -0.5),  # t - h_t <= 0
    ],
)
def test_pde_residual_preconditions(args):
    with pytest.raises(ValueError):
        pde_residual(*args, HET, 1e-6, 1e-3)


def test_semigroup_homogeneous():
    c = Coefficients.homogeneous(1.3, 2.0)
    assert semigroup_residual(0.4, 0.6, 0.2, -0.5, c) < 1e-12


def test_semigroup_example():
    assert semigroup_residual(0.5, 0.5, -0.2, 0.4, Coefficients(1.0, 3.0, 2.0, 1.0)) < 1e-8


def test_semigroup_refuses_underresolved_factor():
    with pytest.raises(UnderResolvedError) as info:
        semigroup_residual(1e-6, 1.0, 0.3, -0.4, HET)
    assert info.value.achieved < 5


@settings(max_examples=40)
@given(c=coeffs, t1=st.floats(0.1, 1.0), t2=st.floats(0.1, 1.0), x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_semigroup_invariant(c, t1, t2, x, y):
    assert semigroup_residual(t1, t2, x, y, c) < 1e-9


def test_normalization_examples():
    assert normalization_gap(1.0, 0.0, HET) < 1e-10
    assert normalization_gap(0.7, -1.2, Coefficients.homogeneous(2.0, 5.0)) < 1e-12
    assert normalization_gap(1.0, 0.5, Coefficients(4.0, 1.0, 1.0, 2.0)) < 1e-8


@settings(max_examples=40)
@given(c=coeffs, t=st.floats(0.01, 3.0), x=st.floats(-3, 3))
def test_normalization_invariant(c, t, x):
    assert kernel_mass(t, x, c) == pytest.approx(1.0, abs=1e-8)


def test_integral_bound_is_one():
    bound = integral_bound(HET, [0.05, 0.5, 2.0], [-1.0, 0.0, 0.4, 2.0])
    assert bound == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("identity", ["flux_jump", "rho_symmetry"])
@pytest.mark.parametrize("c", [HET, Coefficients(0.3, 4.0, 2.5, 0.4)])
def test_cheap_scans_over_thousand_points(identity, c):
    report = scan_identity(identity, SampleSpec(n=1000), c)
    assert report.sample_count == 1000
    assert report.max_abs_error < 1e-12


def test_scan_report_row_carries_seed_and_worst_point():
    report = scan_identity("normalization", SampleSpec(n=5, seed=9), HET)
    row = report.csv_row()
    assert row[0] == "normalization"
    assert row[-1] == "9"
    assert len(row) == 7
    text = reports_csv([report])
    assert text.splitlines()[0].startswith("identity_name,max_abs_error")


def test_scan_is_worker_independent():
    spec = SampleSpec(n=30, seed=3)
    serial = scan_identity("semigroup", spec, HET)
    threaded = scan_identity("semigroup", spec, HET, workers=3)
    assert serial == threaded


def test_scan_rejects_empty_cloud():
    with pytest.raises(ValueError, match="empty"):
        scan_identity("flux_jump", SampleSpec(n=0), HET)


def test_scan_rejects_unknown_identity():
    with pytest.raises(ValueError, match="unknown identity"):
        scan_identity("energy", SampleSpec(n=3), HET)


def test_scan_error_names_point():
    # a pde stencil wider than the exclusion zone trips the precondition
    with pytest.raises(ScanError) as info:
        scan_identity("pde_residual", SampleSpec(n=5, exclusion=0.1), HET, h_x=0.05)
    assert len(info.value.point) == 3


def test_sample_points_respect_exclusion():
    pts = SampleSpec(n=500, exclusion=0.2, seed=1).points()
    t, x, y = pts.T
    assert pts.shape == (500, 3)
    assert np.all(np.abs(x) > 0.2) and np.all(np.abs(y) > 0.2) and np.all(np.abs(x - y) > 0.2)
    assert np.all((t >= 0.1) & (t <= 2.0))


def test_identity_report_validation():
    with pytest.raises(ValueError):
        IdentityReport("nope", 0.0, 1, (1.0, 0.0, 0.0), 0)
    with pytest.raises(ValueError):
        IdentityReport("flux_jump", -1.0, 1, (1.0, 0.0, 0.0), 0)


def test_mass_at_interface_matches_split():
    # left and right masses at x = 0 are (1 -+ beta)/2 and sum to one
    assert kernel_mass(0.3, 0.0, Coefficients(5.0, 0.2, 1.0, 1.0)) == pytest.approx(1.0, abs=1e-10)
    assert math.isfinite(kernel_mass(2.0, 3.0, HET))
