#!/usr/bin/env python3
"""
Tests for the lattice device model, heater powers and the detector model.
"""

import json
import os
import sys
import tempfile

import numpy as np
import pytest

import config
from errors import ConfigError, InvalidPower, InvalidShape, InvalidSubset, ShapeMismatch
from lattice_device import (DetectorMap, NoiseModel, apply_detector_model, build_hamiltonian,
                            default_device_dict, device_from_dict, evolve, load_device,
                            power_sweep, random_power_vector, save_device)
from sampling import FockState


def small_device(**overrides):
    """2 x 4 lattice with four heaters, fast enough for unit tests."""
    description = {
        "geometry": {"n_rows": 2, "n_cols": 4, "n_segments": 8, "n_sections": 4, "seed": 1},
        "heaters": {"count": 4, "rows": 2},
    }
    description.update(overrides)
    return device_from_dict(description)


def test_default_device_layout():
    device, noise = device_from_dict(default_device_dict())
    assert device.m == 128
    assert len(device.input_ports) == config.N_INPUT_PORTS
    assert len(device.measured_modes) == config.N_MEASURED_MODES
    assert device.detectors.n_detectors == config.N_DETECTORS
    assert len(device.heaters.active) == config.N_USABLE_HEATERS
    assert device.heaters.count == config.N_HEATERS
    assert noise.indistinguishability == config.HOM_VISIBILITY
    print("✓ Default device: 128 modes, 20 inputs, 108 measured modes on 54 detectors")


def test_zero_coupling_gives_diagonal_phases():
    detunings = [0.01 * j for j in range(8)]
    device, _ = small_device(coupling={"c0": 0.0}, detunings=detunings)
    u = evolve(device, np.zeros(device.heaters.count))
    expected = np.diag(np.exp(-1j * np.array(detunings) * device.geometry.chip_length_mm))
    assert np.allclose(u.matrix, expected, atol=1e-12)

    powers = np.array([0.0, 3.0, 0.0, 0.0])
    shifted = evolve(device, powers)
    total = np.array(detunings) + powers @ device.heaters.influence
    assert np.allclose(shifted.matrix, np.diag(np.exp(-1j * total * device.geometry.chip_length_mm)), atol=1e-12)
    print("✓ Zero coupling yields exp(-i (beta + heater shift) L) on the diagonal")


def test_hamiltonian_is_real_symmetric():
    device, _ = small_device()
    h = build_hamiltonian(device, 3, np.full(device.heaters.count, 10.0))
    assert np.allclose(h, h.conj().T)
    assert np.allclose(h.imag, 0.0)
    off_diagonal = h - np.diag(np.diag(h))
    assert np.count_nonzero(off_diagonal) > 0
    with pytest.raises(InvalidShape):
        build_hamiltonian(device, device.geometry.n_segments, np.zeros(device.heaters.count))
    print("✓ Slice Hamiltonian is real symmetric with nearest-neighbour couplings")


def test_evolve_unitary_and_deterministic():
    device, _ = device_from_dict(default_device_dict())
    powers = random_power_vector(device, 17, 50.0, seed=3)
    a = evolve(device, powers)
    b = evolve(device, powers)
    assert a.defect <= 1e-10
    assert np.array_equal(a.matrix, b.matrix)
    assert a.provenance == "device"
    print(f"✓ 128-mode device unitary (defect {a.defect:.1e}) is reproducible")


def test_heater_powers_change_unitary():
    device, _ = small_device()
    base = evolve(device, np.zeros(4))
    heated = evolve(device, np.array([0.0, 0.0, 80.0, 0.0]))
    assert np.max(np.abs(base.matrix - heated.matrix)) > 1e-3
    print("✓ Driving one heater reconfigures the unitary")


def test_power_vector_validation():
    device, _ = small_device()
    with pytest.raises(ShapeMismatch):
        evolve(device, np.zeros(3))
    with pytest.raises(InvalidPower):
        evolve(device, np.array([0.0, -1.0, 0.0, 0.0]))
    print("✓ Wrong-length and negative power vectors rejected")


def test_random_power_vector():
    device, _ = device_from_dict(default_device_dict())
    powers = random_power_vector(device, 5, 20.0, seed=1)
    driven = np.flatnonzero(powers)
    assert driven.size == 5
    assert set(driven) <= set(device.heaters.active)
    assert np.all((powers >= 0) & (powers <= 20.0))
    assert np.array_equal(powers, random_power_vector(device, 5, 20.0, seed=1))
    assert not np.any(random_power_vector(device, 0, 20.0, seed=1))
    with pytest.raises(InvalidSubset):
        random_power_vector(device, 18, 20.0, seed=1)
    with pytest.raises(InvalidPower):
        random_power_vector(device, 2, -1.0, seed=1)
    print("✓ Random powers drive the requested number of usable heaters")


def test_power_sweep_nested_heater_sets():
    device, _ = small_device()
    sweep = power_sweep(device, [0, 1, 3, 4], 5, p_max=30.0, seed=2)
    assert not np.any(sweep[0])
    for count, powers in sweep.items():
        assert powers.shape == (5, 4)
        assert np.all(np.count_nonzero(powers, axis=1) == count)
        # one heater set per count, shared by every setting
        assert len({tuple(np.flatnonzero(row)) for row in powers}) == 1
        assert np.all((powers >= 0) & (powers <= 30.0))
    for smaller, larger in ((1, 3), (3, 4)):
        driven = sweep[smaller] > 0
        assert np.array_equal(sweep[larger][driven], sweep[smaller][driven])
    assert np.array_equal(power_sweep(device, [3], 5, p_max=30.0, seed=2)[3], sweep[3])
    with pytest.raises(InvalidSubset):
        power_sweep(device, [5], 2, seed=0)
    with pytest.raises(InvalidPower):
        power_sweep(device, [1], 2, p_max=-1.0, seed=0)
    print("✓ Power sweep drives nested heater sets with shared draws")


def test_evolution_converges_with_segment_count():
    description = default_device_dict()
    device, _ = device_from_dict(description)
    powers = random_power_vector(device, config.N_USABLE_HEATERS, seed=5)
    coarse = evolve(device, powers).matrix
    description["geometry"]["n_segments"] *= 2
    refined, _ = device_from_dict(description)
    assert refined.geometry.n_segments == 2 * config.N_SEGMENTS
    assert np.max(np.abs(evolve(refined, powers).matrix - coarse)) <= 1e-6
    print("✓ Doubling the segment count leaves the unitary unchanged")


def test_heater_locality():
    description = default_device_dict()
    description["coupling"]["c0"] = 0.0
    device, _ = device_from_dict(description)
    heater = device.heaters.active[0]
    cold = np.zeros(device.heaters.count)
    hot = cold.copy()
    hot[heater] = 10.0

    change = build_hamiltonian(device, 0, hot) - build_hamiltonian(device, 0, cold)
    assert np.allclose(change - np.diag(np.diag(change)), 0.0)
    shift = np.real(np.diag(change))
    nearest = int(np.argmax(device.heaters.influence[heater]))
    coordinates = device.geometry.base_coordinates
    far = np.linalg.norm(coordinates - coordinates[nearest], axis=1) > 7 * device.geometry.pitch_um
    assert far.any()
    assert shift[nearest] > 0
    assert np.all(shift[far] < 1e-6 * shift[nearest])

    # uncoupled guides: the heater only rotates phases of nearby modes
    before, after = evolve(device, cold).matrix, evolve(device, hot).matrix
    assert np.allclose(np.abs(after), np.abs(before))
    assert np.allclose(np.diag(after)[far], np.diag(before)[far], atol=1e-6)
    assert abs(np.angle(after[nearest, nearest] / before[nearest, nearest])) > 1e-3

    coupled, _ = device_from_dict(default_device_dict())
    mass = np.sum(np.abs(evolve(coupled, hot).matrix) ** 2, axis=0)
    assert np.allclose(mass, 1.0, atol=1e-10)
    print("✓ A heater detunes only nearby guides and conserves single-input mass")


def test_detector_map_pairs():
    detectors = DetectorMap.pairs(6, [0, 1, 3, 4])
    assert detectors.measured == (0, 1, 3, 4)
    assert detectors.n_detectors == 2
    assert detectors.assignments[3] == (1, 0)
    with pytest.raises(InvalidShape):
        DetectorMap(4, {0: (0, 0), 1: (0, 0)})
    with pytest.raises(InvalidShape):
        DetectorMap.pairs(4, [1, 1])
    print("✓ Measured modes paired onto detectors in two time bins")


def test_detector_model_losses_and_fold():
    device, _ = small_device(measured_modes=[0, 1, 2, 3, 4, 5])
    ideal = NoiseModel(indistinguishability=1.0, efficiency=1.0)

    clicks = apply_detector_model(device, ideal, FockState.from_modes(8, [0, 4]), seed=0)
    assert clicks is not None and clicks.modes == (0, 4)
    assert clicks.surviving_photons == 2

    # mode 7 is not measured
    assert apply_detector_model(device, ideal, FockState.from_modes(8, [0, 7]), seed=0) is None
    # two photons in one mode give one click
    assert apply_detector_model(device, ideal, FockState.from_modes(8, [2, 2]), seed=0) is None
    bunched = apply_detector_model(device, ideal, FockState.from_modes(8, [2, 2]), seed=0, fold=1)
    assert bunched.modes == (2,) and bunched.surviving_photons == 2

    blind = NoiseModel(efficiency=0.0)
    assert apply_detector_model(device, blind, FockState.from_modes(8, [1]), seed=0) is None

    lossy = NoiseModel(efficiency=0.5)
    kept = sum(apply_detector_model(device, lossy, FockState.from_modes(8, [1]), seed=s) is not None
               for s in range(2000))
    assert 0.45 < kept / 2000 < 0.55
    print(f"✓ Losses, threshold clicks and fold discard behave (eta=0.5 keeps {kept / 2000:.3f})")


def test_noise_model_validation():
    assert NoiseModel.from_hom_visibility(0.9).indistinguishability == 0.9
    with pytest.raises(ValueError):
        NoiseModel(indistinguishability=1.5)
    with pytest.raises(ValueError):
        NoiseModel(g2=1.0)
    with pytest.raises(ShapeMismatch):
        NoiseModel(efficiency=(0.9, 0.8)).efficiencies(3)
    print("✓ Noise model parameters validated")


def test_device_files():
    with tempfile.TemporaryDirectory() as tmp:
        with pytest.raises(ConfigError):
            load_device(os.path.join(tmp, "missing.json"))

        broken = os.path.join(tmp, "broken.json")
        with open(broken, "w") as file:
            file.write("{not json")
        with pytest.raises(ConfigError):
            load_device(broken)

        bad_ports = os.path.join(tmp, "bad_ports.json")
        with open(bad_ports, "w") as file:
            json.dump({"geometry": {"n_rows": 1, "n_cols": 4}, "input_ports": [0, 9]}, file)
        with pytest.raises(ConfigError):
            load_device(bad_ports)

        device, noise = small_device()
        path = os.path.join(tmp, "device.json")
        save_device(device, path, noise)
        reloaded, reloaded_noise = load_device(path)
        powers = np.array([5.0, 0.0, 12.0, 1.0])
        assert np.allclose(evolve(device, powers).matrix, evolve(reloaded, powers).matrix, atol=1e-13)
        assert reloaded_noise == noise
    print("✓ Device files: missing/malformed rejected, saved description rebuilds the device")


def test_bundled_device_file():
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), config.DEFAULT_DEVICE_FILE)
    device, _ = load_device(path)
    assert device.m == 128
    assert len(device.measured_modes) == config.N_MEASURED_MODES
    print("✓ Bundled default_device.json loads")


def run_all_tests():
    """
    Run all tests and provide a summary.
    """
    tests = [
        ("Default layout", test_default_device_layout),
        ("Zero coupling", test_zero_coupling_gives_diagonal_phases),
        ("Hamiltonian", test_hamiltonian_is_real_symmetric),
        ("Evolve", test_evolve_unitary_and_deterministic),
        ("Heater effect", test_heater_powers_change_unitary),
        ("Power validation", test_power_vector_validation),
        ("Random powers", test_random_power_vector),
        ("Power sweep", test_power_sweep_nested_heater_sets),
        ("Segment convergence", test_evolution_converges_with_segment_count),
        ("Heater locality", test_heater_locality),
        ("Detector map", test_detector_map_pairs),
        ("Detector model", test_detector_model_losses_and_fold),
        ("Noise model", test_noise_model_validation),
        ("Device files", test_device_files),
        ("Bundled device", test_bundled_device_file),
    ]

    print("=" * 60)
    print("LATTICEBS - LATTICE DEVICE TESTS")
    print("=" * 60)
    passed_tests = 0
    for test_name, test_function in tests:
        print(f"\n{'=' * 20} {test_name} {'=' * 20}")
        try:
            test_function()
            passed_tests += 1
            print(f"✓ {test_name} PASSED")
        except Exception as e:
            print(f"✗ {test_name} FAILED with exception: {e!r}")
    print("\n" + "=" * 60)
    print(f"Tests passed: {passed_tests}/{len(tests)}")
    print("=" * 60)
    return passed_tests == len(tests)


if __name__ == "__main__":
    sys.exit(0 if run_all_tests() else 1)
