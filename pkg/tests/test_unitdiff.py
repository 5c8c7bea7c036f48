import math

import numpy as np
import pytest

from optretire.errors import CertificateError, DomainError, TransformError
from optretire.gsolve import GFunction
from optretire.params import ModelParams
from optretire.sde import SimConfig, simulate_sqrt_diffusion
from optretire.unitdiff import (
    BoundaryClass,
    DiffusionSpec,
    build_transform,
    classify_sqrt_boundary,
    nonnegativity_certificate,
    simulate_mapped,
    sqrt_closed_forms,
    sqrt_spec,
)


def test_unit_diffusion_is_its_own_transform():
    mu = 0.7
    tr = build_transform(DiffusionSpec(lambda y: mu, lambda y: 1.0, (-3.0, 5.0)))
    for y in np.linspace(-2.9, 4.9, 9):
        assert tr.B(y) == pytest.approx(y - 1.0, abs=1e-13)  # anchored at the midpoint 1
        assert tr.A_drift(y - 1.0) == pytest.approx(mu, abs=1e-12)


@pytest.mark.parametrize("c", [1.0, 2.0, 3.0])
def test_sqrt_family_matches_closed_forms(c):
    tr = build_transform(sqrt_spec(c), origin=0.0)
    B, G, A = sqrt_closed_forms(c)
    for x in np.linspace(0.1, 3.0, 30):
        y = G(x)
        assert abs(tr.B(y) - B(y)) < 1e-8
        assert abs(tr.g_map(x) - y) < 1e-8
        assert abs(tr.A_drift(x) - A(x)) < 1e-8


@pytest.mark.parametrize("c", [1.0, 2.0, 3.0])
def test_numeric_derivative_path(c):
    spec = sqrt_spec(c)
    plain = DiffusionSpec(spec.a, spec.b, spec.domain)
    tr = build_transform(plain, origin=0.0)
    _, _, A = sqrt_closed_forms(c)
    for x in np.linspace(0.5, 3.0, 6):
        assert tr.A_drift(x) == pytest.approx(A(x), abs=1e-5)


def test_closed_forms_are_odd():
    B, G, A = sqrt_closed_forms(1.5)
    assert B(-4.0) == -B(4.0)
    assert G(-1.0) == -G(1.0)
    assert G(B(2.0)) == pytest.approx(2.0, rel=1e-15)


SPECS = {
    "sqrt": sqrt_spec(1.0),
    "linear": DiffusionSpec(lambda y: 1.0, lambda y: 0.5 + y, (0.0, 4.0)),
    "gbm-like": DiffusionSpec(lambda y: 0.1 * y, lambda y: 0.3 * y, (0.5, 20.0)),
    "sine": DiffusionSpec(lambda y: 0.0, lambda y: 2.0 + math.sin(y), (-5.0, 5.0)),
}


@pytest.mark.parametrize("name", list(SPECS))
def test_round_trip_and_monotone(name):
    spec = SPECS[name]
    tr = build_transform(spec)
    ys = np.linspace(tr.y_lo, tr.y_hi, 102)[1:-1]
    xs = [tr.B(float(y)) for y in ys]
    assert all(a < b for a, b in zip(xs, xs[1:]))
    for y, x in zip(ys, xs):
        assert abs(tr.g_map(x) - y) < 1e-9


def test_anchor_and_origin():
    spec = SPECS["linear"]
    tr = build_transform(spec, anchor=1.0)
    assert tr.B(1.0) == 0.0
    tr0 = build_transform(spec, origin=2.0)
    assert abs(tr0.B(2.0)) < 1e-14
    with pytest.raises(DomainError):
        build_transform(spec, anchor=4.0)


def test_non_integrable_endpoint_is_named():
    spec = DiffusionSpec(lambda y: 1.0, lambda y: y, (0.0, 5.0))
    with pytest.raises(TransformError, match="endpoint 0.0"):
        build_transform(spec, origin=0.0)
    spec_hi = DiffusionSpec(lambda y: 1.0, lambda y: 5.0 - y, (0.0, 5.0))
    with pytest.raises(TransformError, match="endpoint 5.0"):
        build_transform(spec_hi, origin=5.0)
    # without an origin at the singular end the truncated interior is fine
    tr = build_transform(spec)
    assert tr.y_lo == pytest.approx(5e-6)


def test_nonpositive_b_rejected():
    with pytest.raises(TransformError):
        build_transform(DiffusionSpec(lambda y: 1.0, lambda y: y, (-1.0, 1.0)))
    with pytest.raises(DomainError):
        DiffusionSpec(lambda y: 1.0, lambda y: 1.0, (0.0, math.inf))


def test_out_of_range_queries():
    tr = build_transform(sqrt_spec(2.0), origin=0.0)
    with pytest.raises(DomainError):
        tr.g_map(-1.0)
    with pytest.raises(DomainError):
        tr.B(30.0)


def test_classify_trichotomy():
    assert classify_sqrt_boundary(2.0) is BoundaryClass.SOFT_REFLECTION
    assert classify_sqrt_boundary(1.0) is BoundaryClass.NEVER_HITS_ZERO
    assert classify_sqrt_boundary(3.0) is BoundaryClass.UNDEFINED_AFTER_ZERO
    assert classify_sqrt_boundary(2.0 + 1e-12) is BoundaryClass.UNDEFINED_AFTER_ZERO
    assert classify_sqrt_boundary(2.0 + 1e-12, rtol=1e-9) is BoundaryClass.SOFT_REFLECTION
    for c in (0.0, -1.0, math.nan):
        with pytest.raises(DomainError):
            classify_sqrt_boundary(c)


def test_tabulation_csv():
    tr = build_transform(sqrt_spec(2.0), origin=0.0)
    text = tr.to_csv()
    lines = text.splitlines()
    assert lines[0] == "x,g_map,A_drift"
    rows = [list(map(float, ln.split(","))) for ln in lines[1:]]
    x, y, a = np.array(rows).T
    assert np.all(np.diff(x) > 0) and np.all(np.diff(y) > 0)
    assert x[0] == 0.0 and y[0] == 0.0
    # c = 2: the transformed drift vanishes identically away from 0
    assert np.max(np.abs(a[1:])) < 1e-9


def test_certificate_classic():
    cert = nonnegativity_certificate(GFunction.build(ModelParams(), n=2001))
    assert cert.nonnegative and cert.lower_bound >= -1e-10
    assert cert.upper_bound <= 10.0
    assert cert.sqrt_coefficient == pytest.approx(2.0, rel=1e-6)
    assert cert.boundary_class is BoundaryClass.SOFT_REFLECTION
    assert cert.truncation > 0


def test_certificate_power_regular():
    alpha = 0.75
    cert = nonnegativity_certificate(GFunction.build(ModelParams(1.0, alpha, 10.0), n=1001))
    assert cert.nonnegative
    assert cert.sqrt_coefficient == pytest.approx(math.sqrt(2.0 / (1.0 - 0.5 / alpha)), rel=1e-4)


def test_certificate_refusals():
    const = DiffusionSpec(lambda y: 1.0 + 5.0, lambda y: 5.0, (-1.0, 10.0))
    with pytest.raises(CertificateError):
        nonnegativity_certificate(const)
    const_pos = DiffusionSpec(lambda y: 6.0, lambda y: 5.0, (0.0, 10.0))
    with pytest.raises(CertificateError):
        nonnegativity_certificate(const_pos)
    with pytest.raises(CertificateError):
        nonnegativity_certificate(GFunction.build(ModelParams(1.0, 0.5), n=51))
    with pytest.raises(TypeError):
        nonnegativity_certificate("optimal")


def test_mapped_simulation_matches_direct():
    # unit diffusion with the c = 2 drift, reflected at 0 and mapped back
    tr = build_transform(sqrt_spec(2.0), origin=0.0)
    y_map = simulate_mapped(tr, 0.0, 1.0, 1e-3, 20000, seed=3)
    y_dir = simulate_sqrt_diffusion(1.0, SimConfig(dt=1e-3, paths=20000, seed=4))
    for k in (1, 2):
        a, b = y_map**k, y_dir**k
        joint = math.hypot(a.std(ddof=1) / math.sqrt(a.size), b.std(ddof=1) / math.sqrt(b.size))
        assert abs(a.mean() - b.mean()) < 3 * joint
