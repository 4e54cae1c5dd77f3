import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from progdg import law
from progdg.errors import NonPhysicalStateError, UsageError

SOD_LEFT_CONS = np.array([1.0, 0.0, 2.5])


def test_burgers_flux_zero():
    assert law.physical_flux(law.burgers(), 0.0) == 0.0


def test_burgers_flux_two():
    assert law.physical_flux(law.burgers(), 2.0) == 2.0


def test_euler_flux_sod_left():
    # p = (gamma-1)*E = 1 at rest
    f = law.physical_flux(law.euler(), SOD_LEFT_CONS)
    assert np.allclose(f, [0.0, 1.0, 0.0], atol=1e-15)


def test_advection_flux_uses_speed():
    assert law.physical_flux(law.advection(-1.0), 3.0) == -3.0


def test_euler_rejects_nonphysical():
    with pytest.raises(NonPhysicalStateError):
        law.physical_flux(law.euler(), np.array([-1.0, 0.0, 1.0]))
    with pytest.raises(NonPhysicalStateError):
        law.physical_flux(law.euler(), np.array([1.0, 10.0, 1.0]))  # p < 0


def test_euler_gamma_validation():
    with pytest.raises(UsageError):
        law.euler(gamma=1.0)


def test_max_wave_speed_burgers():
    assert law.max_wave_speed(law.burgers(), [-2.0, 1.0]) == 2.0


def test_max_wave_speed_advection_constant():
    assert law.max_wave_speed(law.advection(-1.0), [5.0, -3.0, 0.0]) == 1.0


def test_max_wave_speed_sod_left():
    got = law.max_wave_speed(law.euler(), SOD_LEFT_CONS[None, :])
    assert got == pytest.approx(np.sqrt(1.4), rel=1e-14)


def test_max_wave_speed_empty():
    with pytest.raises(UsageError):
        law.max_wave_speed(law.burgers(), [])


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8), st.randoms())
@settings(max_examples=40, deadline=None)
def test_max_wave_speed_permutation_invariant(vals, rnd):
    perm = list(vals)
    rnd.shuffle(perm)
    l = law.burgers()
    assert law.max_wave_speed(l, vals) == law.max_wave_speed(l, perm)


def test_lf_consistency_burgers():
    assert law.lf_flux(law.burgers(), 1.0, 1.0, 1.0) == 0.5


def test_lf_derived_value():
    assert law.lf_flux(law.burgers(), 1.0, 0.0, 1.0) == pytest.approx(0.75, abs=1e-15)


def test_lf_consistency_euler_reduces_to_flux():
    f = law.lf_flux(law.euler(), SOD_LEFT_CONS, SOD_LEFT_CONS, 1.19)
    assert np.allclose(f, law.physical_flux(law.euler(), SOD_LEFT_CONS), atol=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=60, deadline=None)
def test_lf_consistency_property(u, alpha):
    l = law.burgers()
    assert law.lf_flux(l, u, u, abs(alpha)) == pytest.approx(law.physical_flux(l, u), abs=1e-12)


def test_lf_monotonicity_on_grid():
    # With alpha fixed above max|f'| over the grid, the LF flux must be
    # non-decreasing in the left state and non-increasing in the right.
    l = law.burgers()
    grid = np.linspace(-2.0, 2.0, 41)
    alpha = 2.0
    for b in grid:
        f = law.lf_flux(l, grid, b, alpha)
        assert np.all(np.diff(f) >= -1e-14)
    for a in grid:
        f = law.lf_flux(l, a, grid, alpha)
        assert np.all(np.diff(f) <= 1e-14)


def test_primitive_conversion_roundtrip():
    e = law.euler()
    prim = np.array([[1.0, 0.5, 0.8], [0.125, 0.0, 0.1]])
    cons = law.primitive_to_conserved(e, prim)
    back = law.conserved_to_primitive(e, cons)
    assert np.allclose(back, prim, atol=1e-14)


def test_n_comp():
    assert law.burgers().n_comp == 1
    assert law.advection().n_comp == 1
    assert law.euler().n_comp == 3
