import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rddi.kernel import (
    SERIES_THRESHOLD,
    DipoleGeometry,
    _near_field_terms,
    build_kernel,
    decay_matrix,
    noninteracting_baseline,
    pairwise_rates,
    to_image,
)

spacings = st.floats(min_value=0.05, max_value=3.0, allow_nan=False)
sizes = st.integers(min_value=1, max_value=12)


def unit(v):
    v = np.asarray(v, float)
    return tuple(v / np.linalg.norm(v))


def test_small_xi_limit_converges_to_gamma():
    errs = [abs(pairwise_rates(x, 0.0).f - 1.0) for x in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-7


@pytest.mark.parametrize("c", np.linspace(-1, 1, 11))
def test_small_xi_limit_any_orientation(c):
    assert abs(pairwise_rates(1e-4, c).f - 1.0) < 1e-6


def test_values_at_one_wavelength():
    # sin(2pi) = 0, cos(2pi) = 1
    pair = pairwise_rates(2 * math.pi, 0.0)
    assert pair.f == pytest.approx(3 / (8 * math.pi**2), abs=1e-14)
    assert pair.g == pytest.approx(0.75 * (-1 / (2 * math.pi) + 1 / (8 * math.pi**3)), abs=1e-14)
    assert pair.f == pytest.approx(0.03800, abs=5e-6)
    assert pair.g == pytest.approx(-0.11634, abs=5e-6)


def test_gamma_scales_both_rates():
    a = pairwise_rates(1.3, 0.4, gamma=1.0)
    b = pairwise_rates(1.3, 0.4, gamma=2.5)
    assert b.f == pytest.approx(2.5 * a.f) and b.g == pytest.approx(2.5 * a.g)


@pytest.mark.parametrize("xi", [0.0, -1.0])
def test_nonpositive_xi_rejected(xi):
    with pytest.raises(ValueError):
        pairwise_rates(xi, 0.0)


def test_series_branch_agrees_with_direct_formula_at_seam():
    x = SERIES_THRESHOLD
    s, c = math.sin(x), math.cos(x)
    direct = (c / x**2 - s / x**3, s / x**2 + c / x**3)
    series = _near_field_terms(np.nextafter(x, 0))
    assert abs(series[0] - direct[0]) < 1e-12
    assert abs(series[1] - direct[1]) < 1e-12 * abs(direct[1])


@given(xi=st.floats(min_value=1.0, max_value=500.0), c=st.floats(min_value=-1.0, max_value=1.0))
def test_far_field_bound(xi, c):
    bound = 1.5 / xi * (1 + 3 / xi + 3 / xi**2)
    assert abs(pairwise_rates(xi, c).f) <= bound


def test_single_atom_kernel():
    k = build_kernel(DipoleGeometry(1, 0.3))
    assert k.matrix.shape == (1, 1)
    assert k.matrix[0, 0] == -0.5 + 0j


def test_two_atom_offdiagonal_quarter_wavelength():
    k = build_kernel(DipoleGeometry(2, 0.25))
    # xi = pi/2: sin = 1, cos = 0
    f = 1.5 * (2 / math.pi - 8 / math.pi**3)
    g = 3 / math.pi**2
    assert k.matrix[0, 1] == pytest.approx(complex(-f / 2, g), abs=1e-14)


@settings(max_examples=50)
@given(n=sizes, d=spacings)
def test_kernel_structure(n, d):
    geom = DipoleGeometry(n, d)
    m = build_kernel(geom).matrix
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == -0.5 + 0j)
    assert np.trace(m) == pytest.approx(-n / 2)
    for mu in range(n):
        for nu in range(n):
            if mu != nu:
                f, g = pairwise_rates(geom.xi(abs(mu - nu)), geom.cos_theta)
                assert m[mu, nu].real == -f / 2 and m[mu, nu].imag == g


@settings(max_examples=30)
@given(n=sizes, d=spacings)
def test_reciprocity_depends_on_separation_only(n, d):
    m = build_kernel(DipoleGeometry(n, d)).matrix
    for k in range(1, n):
        diag = np.diagonal(m, offset=k)
        assert np.all(diag == diag[0])


@settings(max_examples=40)
@given(
    n=st.integers(2, 16),
    d=st.floats(0.02, 2.0),
    dipole=st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1),
)
def test_decay_matrix_positive_semidefinite(n, d, dipole):
    F = decay_matrix(DipoleGeometry(n, d, dipole=unit(dipole)))
    assert np.linalg.eigvalsh(F).min() >= -1e-8


def test_image_channels_and_round_trip():
    img = to_image(build_kernel(DipoleGeometry(1, 0.5)))
    assert img.channels.tolist() == [[[-0.5]], [[0.0]]]
    k = build_kernel(DipoleGeometry(7, 0.37, dipole=unit([1, 1, 0])))
    img = to_image(k)
    assert img.channels.shape == (2, 7, 7)
    assert np.all(np.diag(img.channels[1]) == 0)
    assert np.array_equal(img.reassemble(), k.matrix)


def test_baseline():
    b = noninteracting_baseline(2)
    assert np.array_equal(b.matrix, np.array([[-0.5, 0], [0, -0.5]], dtype=complex))
    far = build_kernel(DipoleGeometry(6, 1e4)).matrix
    assert np.max(np.abs(far - noninteracting_baseline(6).matrix)) < 1e-4


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_atoms=0, spacing=0.2),
        dict(n_atoms=3, spacing=0.0),
        dict(n_atoms=3, spacing=0.2, axis=(1, 1, 0)),
        dict(n_atoms=3, spacing=0.2, dipole=(0, 0, 0.5)),
        dict(n_atoms=3, spacing=0.2, gamma=-1),
    ],
)
def test_invalid_geometry(kwargs):
    with pytest.raises(ValueError):
        DipoleGeometry(**kwargs)
