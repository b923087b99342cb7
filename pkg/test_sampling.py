#!/usr/bin/env python3
"""
Tests for the samplers, the exact output distribution and sample files.
"""

import os
import sys
import tempfile

import numpy as np
import pytest

from errors import DataError, EnumerationTooLarge, InvalidShape, SizeLimit
from lattice_device import NoiseModel, default_device_dict, device_from_dict
from sampling import (SCOPE_COLLISION_FREE, FockState, InputConfig, SampleRecord, detect,
                      empirical_distribution, exact_distribution, filter_collision_free, filter_fold,
                      kept, read_samples, run_sampler, sample_bs, sample_distinguishable,
                      sample_mixture, sample_uniform, total_variation_distance, write_samples)
from unitary_core import UnitaryMatrix, haar_unitary

BEAM_SPLITTER = UnitaryMatrix(np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0), "file")
HOM_INPUT = InputConfig((0, 1))


def test_hong_ou_mandel_exact():
    bosons = exact_distribution(BEAM_SPLITTER, HOM_INPUT)
    assert abs(bosons[(0, 1)]) < 1e-15
    assert abs(bosons[(0, 0)] - 0.5) < 1e-12
    assert abs(bosons[(1, 1)] - 0.5) < 1e-12

    classical = exact_distribution(BEAM_SPLITTER, HOM_INPUT, particles="distinguishable")
    assert abs(classical[(0, 1)] - 0.5) < 1e-12
    assert abs(classical[(0, 0)] - 0.25) < 1e-12
    print("✓ HOM dip: P(1,1) = 0 for bosons, 0.5 for distinguishable photons")


def test_hong_ou_mandel_sampled():
    records = sample_bs(BEAM_SPLITTER, HOM_INPUT, 4000, seed=1)
    coincidences = sum(r.output.occupations == (1, 1) for r in records)
    assert coincidences == 0
    bunched = sum(r.output.occupations == (2, 0) for r in records) / len(records)
    assert abs(bunched - 0.5) < 0.04

    classical = sample_distinguishable(BEAM_SPLITTER, HOM_INPUT, 4000, seed=1)
    rate = sum(r.output.occupations == (1, 1) for r in classical) / len(classical)
    assert abs(rate - 0.5) < 0.04
    print(f"✓ Sampled HOM: no boson coincidences, distinguishable coincidence rate {rate:.3f}")


def test_exact_distribution_normalized():
    u = haar_unitary(6, seed=2)
    table = exact_distribution(u, InputConfig((0, 2, 4)))
    assert len(table) == 56
    assert abs(sum(table.values()) - 1.0) < 1e-12
    free = exact_distribution(u, InputConfig((0, 2, 4)), scope=SCOPE_COLLISION_FREE)
    assert len(free) == 20
    assert abs(sum(free.values()) - 1.0) < 1e-12
    classical = exact_distribution(u, InputConfig((0, 2, 4)), particles="distinguishable")
    assert abs(sum(classical.values()) - 1.0) < 1e-12
    print("✓ Exact boson and distinguishable distributions sum to one")


def test_exact_distribution_limits():
    u = haar_unitary(8, seed=0)
    with pytest.raises(SizeLimit):
        exact_distribution(u, InputConfig(tuple(range(5))))
    with pytest.raises(InvalidShape):
        exact_distribution(u, InputConfig((0, 9)))
    with pytest.raises(EnumerationTooLarge):
        exact_distribution(haar_unitary(200, seed=0), InputConfig((0, 1, 2, 3)))
    print("✓ Photon-number, mode-range and enumeration limits enforced")


def test_boson_sampler_matches_exact_law():
    u = haar_unitary(6, seed=5)
    input_config = InputConfig((0, 1, 3))
    records = sample_bs(u, input_config, 10000, seed=7)
    distance = total_variation_distance(empirical_distribution(records), exact_distribution(u, input_config))
    assert distance < 0.06
    print(f"✓ Boson sampler TVD to exact law: {distance:.4f}")


def test_distinguishable_sampler_matches_exact_law():
    u = haar_unitary(6, seed=5)
    input_config = InputConfig((0, 1, 3))
    records = sample_distinguishable(u, input_config, 10000, seed=7)
    exact = exact_distribution(u, input_config, particles="distinguishable")
    distance = total_variation_distance(empirical_distribution(records), exact)
    assert distance < 0.06
    print(f"✓ Distinguishable sampler TVD to exact law: {distance:.4f}")


def test_uniform_sampler():
    records = sample_uniform(5, 2, 5000, seed=3)
    assert all(r.output.collision_free and r.output.n == 2 for r in records)
    frequencies = empirical_distribution(records)
    assert len(frequencies) == 10
    assert max(abs(p - 0.1) for p in frequencies.values()) < 0.03
    with pytest.raises(InvalidShape):
        sample_uniform(3, 4, 1, seed=0)
    print("✓ Uniform sampler covers the C(5,2) collision-free outputs evenly")


def test_mixture_sampler():
    pure = sample_mixture(BEAM_SPLITTER, HOM_INPUT, NoiseModel(indistinguishability=1.0), 2000, seed=4)
    assert sum(r.output.occupations == (1, 1) for r in pure) == 0
    assert all(r.tag == "mixture" for r in pure)

    partial = sample_mixture(BEAM_SPLITTER, HOM_INPUT, NoiseModel(indistinguishability=0.8), 8000, seed=4)
    rate = sum(r.output.occupations == (1, 1) for r in partial) / len(partial)
    assert abs(rate - 0.1) < 0.02

    multiphoton = sample_mixture(BEAM_SPLITTER, HOM_INPUT, NoiseModel(g2=0.5), 2000, seed=4)
    extra = sum(r.output.n == 3 for r in multiphoton) / len(multiphoton)
    assert 0.45 < extra < 0.55
    print(f"✓ Mixture: coincidence rate {rate:.3f} at x=0.8, extra photon rate {extra:.3f} at g2=0.5")


def test_sampling_reproducible_across_threads():
    u = haar_unitary(8, seed=1)
    input_config = InputConfig((0, 3, 5))
    single = sample_bs(u, input_config, 5000, seed=11, threads=1)
    pooled = sample_bs(u, input_config, 5000, seed=11, threads=4)
    assert single == pooled
    assert [r.t for r in single] == list(range(5000))
    assert sample_bs(u, input_config, 50, seed=12) != single[:50]
    print("✓ Same seed gives identical records with 1 and 4 threads")


def test_run_sampler_dispatch():
    u = haar_unitary(5, seed=0)
    input_config = InputConfig((0, 1))
    for tag in ("bs", "dist", "uniform", "mixture"):
        records = run_sampler(tag, u, input_config, 10, seed=0)
        assert len(records) == 10 and all(r.tag == tag for r in records)
    with pytest.raises(ValueError):
        run_sampler("gaussian", u, input_config, 10, seed=0)
    with pytest.raises(InvalidShape):
        InputConfig((1, 1))
    print("✓ Sampler tags dispatch, duplicate inputs rejected")


def test_post_selection_filters():
    records = [
        SampleRecord(0, FockState((1, 1, 0)), "bs"),
        SampleRecord(1, FockState((2, 0, 0)), "bs"),
        SampleRecord(2, FockState((1, 0, 0)), "bs"),
    ]
    free = filter_collision_free(records)
    assert [r.kept for r in free] == [True, False, True]
    folded = filter_fold(free, 2)
    assert [r.kept for r in folded] == [True, False, False]
    assert [r.t for r in kept(folded)] == [0]
    assert len(folded) == len(records)
    print("✓ Filters clear 'kept' without dropping records")


def test_detect_post_selection():
    device, noise = device_from_dict(default_device_dict())
    u = haar_unitary(device.m, seed=1)
    input_config = InputConfig(device.input_ports[:3])
    records = sample_bs(u, input_config, 500, seed=2)
    detected = detect(records, device, noise, fold=3, seed=3)
    assert len(detected) == len(records)
    measured = set(device.measured_modes)
    for record in detected:
        if record.kept:
            assert record.output.n == 3 and record.output.collision_free
            assert set(record.output.modes) <= measured
        else:
            assert record.output.n == 0
    assert 0 < len(kept(detected)) < len(records)
    assert detected == detect(records, device, noise, fold=3, seed=3)
    print(f"✓ Detector model kept {len(kept(detected))}/{len(detected)} three-fold events")


def test_sample_files():
    u = haar_unitary(6, seed=0)
    records = filter_collision_free(sample_bs(u, InputConfig((0, 1, 2)), 200, seed=1))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "samples.jsonl")
        write_samples(records, path, 6, seed=1)
        loaded, m = read_samples(path)
        assert m == 6 and loaded == records

        with pytest.raises(DataError):
            read_samples(os.path.join(tmp, "missing.jsonl"), m=6)
        bare = os.path.join(tmp, "bare.jsonl")
        with open(bare, "w") as file:
            file.write('{"t": 0, "occ": {"9": 1}, "tag": "bs", "kept": true}\n')
        with pytest.raises(DataError):
            read_samples(bare)
        with pytest.raises(DataError):
            read_samples(bare, m=6)
    print("✓ JSONL samples written and read back; malformed files raise DataError")


def run_all_tests():
    """
    Run all tests and provide a summary.
    """
    tests = [
        ("HOM exact", test_hong_ou_mandel_exact),
        ("HOM sampled", test_hong_ou_mandel_sampled),
        ("Exact normalization", test_exact_distribution_normalized),
        ("Exact limits", test_exact_distribution_limits),
        ("Boson sampler law", test_boson_sampler_matches_exact_law),
        ("Distinguishable law", test_distinguishable_sampler_matches_exact_law),
        ("Uniform sampler", test_uniform_sampler),
        ("Mixture sampler", test_mixture_sampler),
        ("Thread reproducibility", test_sampling_reproducible_across_threads),
        ("Dispatch", test_run_sampler_dispatch),
        ("Filters", test_post_selection_filters),
        ("Detector", test_detect_post_selection),
        ("Sample files", test_sample_files),
    ]

    print("=" * 60)
    print("LATTICEBS - SAMPLING TESTS")
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
