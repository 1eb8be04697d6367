import math

import numpy as np
import pytest

from data_model import CurrentField, DomainError, Vortex
from ocean import (advance_field, current_at, random_field, relative_velocity, vortex_horizontal, vortex_vertical,
                   vorticity_at)


def make_vortex(**kwargs):
    values = dict(center=(0.0, 0.0), core_radius=1.0, strength_beta=1.0, circulation_delta=1.0)
    values.update(kwargs)
    return Vortex(**values)


def test_horizontal_velocity_reference_point():
    vx, vy = vortex_horizontal(make_vortex(), (1.0, 0.0))
    assert vx == pytest.approx(0.0)
    assert vy == pytest.approx(-(1.0 - math.exp(-1.0)) / (2.0 * math.pi))
    assert vy == pytest.approx(-0.1006, abs=1e-4)


def test_horizontal_velocity_at_center_is_zero():
    assert vortex_horizontal(make_vortex(center=(3.0, 4.0)), (3.0, 4.0)) == (0.0, 0.0)


def test_far_field_decays_like_an_ideal_vortex():
    vortex = make_vortex(circulation_delta=5.0, core_radius=2.0)
    for d in (50.0, 200.0):
        vx, vy = vortex_horizontal(vortex, (d / math.sqrt(2), d / math.sqrt(2)))
        assert math.hypot(vx, vy) == pytest.approx(5.0 / (2.0 * math.pi * d), rel=1e-9)


def test_vertical_gaussian_bump():
    vortex = make_vortex(core_radius=4.0, circulation_delta=2.0, vertical_factor_rho=0.05)
    peak = vortex_vertical(vortex, (0.0, 0.0))
    assert peak == pytest.approx(0.05 * 2.0 / (2.0 * math.pi * 4.0))
    assert vortex_vertical(vortex, (math.sqrt(8.0), 0.0)) == pytest.approx(peak * math.exp(-1.0))
    assert vortex_vertical(make_vortex(vertical_factor_rho=0.0), (0.3, 0.2)) == 0.0


def test_current_is_background_without_vortices():
    field = CurrentField(vortices=(), background=(0.1, 0.05, 0.0))
    np.testing.assert_allclose(current_at(field, (10.0, 20.0, -5.0)), [0.1, 0.05, 0.0])


def test_superposition_is_linear():
    a = make_vortex(center=(10.0, 5.0), core_radius=3.0, circulation_delta=2.0)
    b = make_vortex(center=(-4.0, 2.0), core_radius=6.0, circulation_delta=7.0)
    point = (1.5, -2.0, -10.0)
    both = current_at(CurrentField(vortices=(a, b), max_speed=None), point)
    alone = (current_at(CurrentField(vortices=(a,), max_speed=None), point)
             + current_at(CurrentField(vortices=(b,), max_speed=None), point))
    np.testing.assert_allclose(both, alone, atol=1e-12)

    doubled = current_at(CurrentField(vortices=(a, a), max_speed=None), point)
    np.testing.assert_allclose(doubled, 2.0 * current_at(CurrentField(vortices=(a,), max_speed=None), point))


def test_far_from_vortices_bound():
    vortices = (make_vortex(center=(0.0, 0.0), circulation_delta=4.0, core_radius=2.0),
                make_vortex(center=(5.0, 0.0), circulation_delta=6.0, core_radius=3.0))
    field = CurrentField(vortices=vortices, background=(0.1, 0.0, 0.0), max_speed=None)
    point = np.array([300.0, 400.0, 0.0])
    d_min = min(np.linalg.norm(point[:2] - np.array(v.center)) for v in vortices)
    deviation = current_at(field, point) - np.array(field.background)
    assert np.linalg.norm(deviation[:2]) < 10.0 / (2.0 * math.pi * d_min)


def test_current_is_continuous_through_a_center():
    vortex = make_vortex(core_radius=2.0, circulation_delta=3.0, strength_beta=3.0)
    field = CurrentField(vortices=(vortex,), max_speed=None)
    xs = np.arange(-0.05, 0.05, 1e-3)
    values = np.array([current_at(field, (x, 0.0, 0.0)) for x in xs])
    assert np.all(np.isfinite(values))
    # horizontal gradient is bounded by the peak vorticity near the core
    bound = 10.0 * 1e-3 * vortex.peak_vorticity
    assert np.max(np.abs(np.diff(values, axis=0))) < bound


def test_current_speed_clamp():
    strong = make_vortex(core_radius=1.0, circulation_delta=200.0)
    field = CurrentField(vortices=(strong,), max_speed=1.5)
    assert np.linalg.norm(current_at(field, (1.0, 0.0, 0.0))) == pytest.approx(1.5)
    assert np.linalg.norm(current_at(field, (1.0, 0.0, 0.0), clamp=False)) > 1.5


def test_advance_without_viscosity_or_flow_is_steady():
    field = CurrentField(vortices=(make_vortex(viscosity_h=0.0),), background=(0.0, 0.0, 0.0))
    advanced = advance_field(field, 2.0)
    assert advanced.vortices == field.vortices
    assert advanced.time == pytest.approx(2.0)


def test_advance_advects_centers():
    field = CurrentField(vortices=(make_vortex(center=(1.0, 1.0), viscosity_h=0.0),
                                   make_vortex(center=(5.0, -2.0), viscosity_h=0.0)),
                         background=(1.0, 0.0, 0.0))
    advanced = advance_field(field, 2.0)
    assert [v.center for v in advanced.vortices] == [(3.0, 1.0), (7.0, -2.0)]


def test_advance_grows_the_core_and_keeps_circulation():
    field = CurrentField(vortices=(make_vortex(viscosity_h=0.25, circulation_delta=3.0, strength_beta=3.0),))
    advanced = advance_field(field, 1.0)
    vortex = advanced.vortices[0]
    assert vortex.core_radius == pytest.approx(math.sqrt(2.0))
    assert vortex.circulation_delta == 3.0
    assert len(advanced.vortices) == 1
    # the Gaussian core integrates to the circulation
    grid = np.linspace(-12.0, 12.0, 241)
    cell = (grid[1] - grid[0]) ** 2
    total = sum(vorticity_at(vortex, (x, y)) for x in grid for y in grid) * cell
    assert total == pytest.approx(3.0, rel=1e-3)


def test_advance_rejects_non_positive_step():
    with pytest.raises(DomainError):
        advance_field(CurrentField(), 0.0)


def test_relative_velocity():
    np.testing.assert_allclose(relative_velocity((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)), [1.0, -1.0, 0.0])
    np.testing.assert_allclose(relative_velocity((1.0, 2.0, 3.0), (1.0, 2.0, 3.0)), [0.0, 0.0, 0.0])


def test_random_field_population(rng):
    field = random_field(rng, (200.0, 200.0))
    assert len(field.vortices) == 3
    for vortex in field.vortices:
        assert 0.0 <= vortex.center[0] <= 200.0
        assert 20.0 <= vortex.core_radius <= 40.0
        assert 5.0 <= vortex.circulation_delta <= 20.0
        assert vortex.strength_beta == vortex.circulation_delta


def test_vortex_validation():
    with pytest.raises(DomainError):
        make_vortex(core_radius=0.0)
    with pytest.raises(DomainError):
        make_vortex(viscosity_h=-1.0)
