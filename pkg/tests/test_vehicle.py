import math

import numpy as np
import pytest

from data_model import AuvState, DomainError, EnergyParams, MotionLimits, StalledUploadError
from ocean import relative_velocity
from vehicle import apply_energy, integrate_position, mission_energy, project_action, propulsion_energy

LOWER = (0.0, 0.0, -100.0)
UPPER = (200.0, 200.0, 0.0)


def make_auv(velocity=(0.0, 0.0, 0.0), energy=15000.0, radius=9.0, power=0.0):
    return AuvState(index=0, position=np.array([50.0, 50.0, -20.0]), thrust_velocity=np.array(velocity, dtype=float),
                    energy=energy, detection_radius=radius, compute_C_m=5.0, transmit_power=power)


def test_integrate_position():
    np.testing.assert_allclose(integrate_position((0.0, 0.0, -10.0), (1.0, 2.0, 0.0), 2.0, LOWER, UPPER),
                               [2.0, 4.0, -10.0])
    np.testing.assert_allclose(integrate_position((5.0, 5.0, -5.0), (0.0, 0.0, 0.0), 2.0, LOWER, UPPER),
                               [5.0, 5.0, -5.0])


def test_integrate_position_clamps_to_the_arena():
    np.testing.assert_allclose(integrate_position((199.0, 1.0, -1.0), (5.0, -5.0, 5.0), 2.0, LOWER, UPPER),
                               [200.0, 0.0, 0.0])


def test_integrate_position_with_drift():
    moved = integrate_position((10.0, 10.0, -10.0), (1.0, 0.0, 0.0), 2.0, LOWER, UPPER, drift=(0.5, 0.5, 0.0))
    np.testing.assert_allclose(moved, [13.0, 11.0, -10.0])
    with pytest.raises(DomainError):
        integrate_position((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0, LOWER, UPPER)


def test_hover_horizontal_energy():
    params = EnergyParams(weight=150.0, slot_dt=2.0)
    costs = propulsion_energy(make_auv(), np.zeros(3), params)
    assert costs.horizontal == pytest.approx(150.0 * 2.0 / math.sqrt(2.0), abs=1e-9)
    assert costs.drag == 0.0
    assert costs.descent == 0.0


def test_vertical_energy_modes():
    params = EnergyParams(weight=100.0, slot_dt=2.0)
    assert propulsion_energy(make_auv((0.0, 0.0, -1.0)), np.zeros(3), params).descent == pytest.approx(200.0)
    assert propulsion_energy(make_auv((0.0, 0.0, 1.0)), np.zeros(3), params).descent == 0.0
    absolute = EnergyParams(weight=100.0, slot_dt=2.0, vertical_mode="absolute")
    assert propulsion_energy(make_auv((0.0, 0.0, 1.0)), np.zeros(3), absolute).descent == pytest.approx(200.0)


def test_drag_energy_is_cubic_in_relative_speed():
    params = EnergyParams()
    auv = make_auv((1.0, 0.5, 0.0))
    slow = propulsion_energy(auv, relative_velocity(auv.thrust_velocity, (0.2, 0.0, 0.0)), params)
    fast = propulsion_energy(auv, 2.0 * relative_velocity(auv.thrust_velocity, (0.2, 0.0, 0.0)), params)
    assert fast.drag == pytest.approx(8.0 * slow.drag, rel=1e-12)
    v_rel = np.linalg.norm(relative_velocity(auv.thrust_velocity, (0.2, 0.0, 0.0)))
    assert slow.drag == pytest.approx(0.5 * 1025.0 * 0.1 * 0.8 * 2.0 * v_rel ** 3)


def test_horizontal_energy_decreases_with_speed():
    params = EnergyParams()
    hover = propulsion_energy(make_auv(), np.zeros(3), params).horizontal
    cruise = propulsion_energy(make_auv((3.0, 0.0, 0.0)), np.zeros(3), params).horizontal
    assert cruise < hover


def test_mission_energy():
    params = EnergyParams(acoustic_efficiency=1.0)
    assert mission_energy(make_auv(radius=0.0), params, 0.0, 0.0).detection == 0.0
    full = mission_energy(make_auv(power=2.0), params, upload_bits=1e4, upload_rate=1e3)
    assert full.transmission == pytest.approx(20.0)
    half = mission_energy(make_auv(power=2.0), EnergyParams(acoustic_efficiency=0.5), 1e4, 1e3)
    assert half.transmission == pytest.approx(40.0)
    assert full.detection == pytest.approx(0.5 * math.pi * 81.0)


def test_mission_energy_stalled_upload():
    with pytest.raises(StalledUploadError):
        mission_energy(make_auv(power=0.0), EnergyParams(), upload_bits=100.0, upload_rate=0.0)


def test_apply_energy():
    assert apply_energy(100.0, []) == 100.0
    assert apply_energy(100.0, [60.0, 50.0]) == -10.0
    with pytest.raises(DomainError):
        apply_energy(100.0, [-1.0])


def test_projection_limits_velocity_change():
    limits = MotionLimits(max_delta_v=1.0, max_speed=5.0)
    action, delta_active, speed_active = project_action(1.0, (3.0, 0.0, 0.0), (0.0, 0.0, 0.0), limits)
    assert np.linalg.norm(action.velocity) == pytest.approx(1.0)
    assert delta_active and not speed_active


def test_projection_limits_speed_and_power():
    limits = MotionLimits(power_min=0.0, power_max=2.0, max_delta_v=1.0, max_speed=5.0)
    previous = np.array([4.9, 0.0, 0.0])
    action, _, speed_active = project_action(3.0, (5.5, 0.5, 0.0), previous, limits)
    assert speed_active
    assert np.linalg.norm(action.velocity) == pytest.approx(5.0)
    assert np.linalg.norm(action.velocity - previous) <= 1.0 + 1e-12
    assert action.power == 2.0
    assert project_action(-1.0, previous, previous, limits)[0].power == 0.0


def test_random_micro_steps_keep_the_ledger(rng):
    params = EnergyParams()
    limits = MotionLimits()
    auv = make_auv(energy=1e9)
    hover_cost = params.weight * params.slot_dt / math.sqrt(2.0)
    for _ in range(1000):
        command = rng.normal(0.0, 4.0, size=3)
        power = rng.uniform(-1.0, 3.0)
        previous = auv.thrust_velocity.copy()
        action, _, _ = project_action(power, command, previous, limits)
        assert limits.power_min <= action.power <= limits.power_max
        assert np.linalg.norm(action.velocity) <= limits.max_speed + 1e-9
        assert np.linalg.norm(action.velocity - previous) <= limits.max_delta_v + 1e-9
        auv.thrust_velocity = action.velocity

        current = rng.normal(0.0, 0.5, size=3)
        v_rel = relative_velocity(auv.thrust_velocity, current)
        costs = propulsion_energy(auv, v_rel, params)
        doubled = propulsion_energy(auv, 2.0 * v_rel, params)
        assert doubled.drag == pytest.approx(8.0 * costs.drag, rel=1e-9)
        assert 0.0 < costs.horizontal <= hover_cost + 1e-9

        before = auv.energy
        auv.energy = apply_energy(auv.energy, [costs.total])
        assert auv.energy <= before
        auv.position = integrate_position(auv.position, auv.thrust_velocity, params.slot_dt, LOWER, UPPER)
        assert np.all(auv.position >= LOWER) and np.all(auv.position <= UPPER)


def test_energy_params_validation():
    with pytest.raises(DomainError):
        EnergyParams(acoustic_efficiency=1.5)
    with pytest.raises(DomainError):
        EnergyParams(vertical_mode="sideways")
    with pytest.raises(DomainError):
        MotionLimits(power_min=3.0, power_max=2.0)
