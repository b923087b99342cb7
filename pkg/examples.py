#!/usr/bin/env python3
"""
Example usage scenarios for LatticeBS, the continuously-coupled Boson Sampling simulator

This file demonstrates the library layer directly: device evolution, sampling,
validation counters, reconstruction and random-bit extraction.
"""

import numpy as np

import config
from lattice_device import NoiseModel, default_device_dict, device_from_dict, evolve, random_power_vector
from randomness import pipeline
from reconstruction import gauge_distance, reconstruct, simulate_counts
from sampling import (InputConfig, detect, exact_distribution, kept, sample_bs, sample_distinguishable,
                      sample_mixture, sample_uniform)
from unitary_core import UnitaryMatrix, haar_unitary, permanent
from validation import BENCHMARK_COLUMN, ck_counter, haar_benchmark, wk_counter


def example_hong_ou_mandel():
    """
    Example: Two photons on a balanced beam splitter never leave in different ports.
    """
    print("=" * 60)
    print("EXAMPLE 1: Hong-Ou-Mandel Interference")
    print("=" * 60)

    beam_splitter = UnitaryMatrix(np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0), "file")
    hom = InputConfig((0, 1))
    for particles in ("bosons", "distinguishable"):
        table = exact_distribution(beam_splitter, hom, particles=particles)
        print(f"{particles:<16} P(2,0) = {table[(0, 0)]:.3f}   P(1,1) = {table[(0, 1)]:.3f}")

    for x in (1.0, config.HOM_VISIBILITY, 0.0):
        records = sample_mixture(beam_splitter, hom, NoiseModel(indistinguishability=x), 4000, seed=1)
        rate = sum(r.output.occupations == (1, 1) for r in records) / len(records)
        print(f"Indistinguishability {x:.2f}: coincidence rate {rate:.3f}")
    print("\n")


def example_device_unitary():
    """
    Example: Evolve the default 128-mode lattice at random heater powers.
    """
    print("=" * 60)
    print("EXAMPLE 2: Device Unitary at Random Heater Powers")
    print("=" * 60)

    device, _ = device_from_dict(default_device_dict())
    for setting in range(3):
        powers = random_power_vector(device, config.N_USABLE_HEATERS, config.P_MAX_MW, seed=setting)
        u = evolve(device, powers)
        column = u.column_distribution(device.input_ports[0])
        print(f"Setting {setting}: {np.count_nonzero(powers)} heaters, defect {u.defect:.1e}, "
              f"largest output probability from port {device.input_ports[0]}: {column.max():.3f}")
    print("\n")


def example_permanents():
    """
    Example: Ryser and Glynn permanents on a Haar submatrix.
    """
    print("=" * 60)
    print("EXAMPLE 3: Permanents")
    print("=" * 60)

    u = haar_unitary(32, seed=7)
    block = u.submatrix(range(12), range(12))
    for algo in ("ryser", "glynn"):
        value = permanent(block, algo).value
        print(f"{algo:<6} perm = {value.real:+.6e} {value.imag:+.6e}i")
    print("\n")


def example_validation_counters():
    """
    Example: W_k and C_k on boson, uniform and distinguishable samples.
    """
    print("=" * 60)
    print("EXAMPLE 4: Validation Counters")
    print("=" * 60)

    u = haar_unitary(16, seed=21)
    input_config = InputConfig((0, 5, 10))
    samplers = {
        "bs": sample_bs(u, input_config, 3000, seed=1),
        "uniform": sample_uniform(16, 3, 3000, seed=2),
        "dist": sample_distinguishable(u, input_config, 3000, seed=3),
    }
    print(f"{'Sampler':<10} {'W_k':<8} {'Uniform null':<14} {'C_k':<8} {'Distinguishable null':<20}")
    print("-" * 60)
    for tag, records in samplers.items():
        collision_free = [r.output for r in records if r.output.collision_free]
        wk = wk_counter(u, input_config, collision_free)
        ck = ck_counter(u, input_config, records)
        print(f"{tag:<10} {wk.final:<8} {'rejected' if wk.rejected else 'kept':<14} "
              f"{ck.final:<8} {'rejected' if ck.rejected else 'kept':<20}")
    print("\n")


def example_detector_model():
    """
    Example: Post-select three-fold events through the detector model of the default device.
    """
    print("=" * 60)
    print("EXAMPLE 5: Detector Model")
    print("=" * 60)

    device, noise = device_from_dict(default_device_dict())
    u = haar_unitary(device.m, seed=4)
    records = sample_bs(u, InputConfig(device.input_ports[:3]), 2000, seed=5)
    detected = detect(records, device, noise, fold=3, seed=6)
    print(f"{device.detectors.n_detectors} detectors over {len(device.measured_modes)} measured modes")
    print(f"Kept {len(kept(detected))} of {len(detected)} three-fold events")
    print("\n")


def example_reconstruction():
    """
    Example: Reconstruct a submatrix from simulated single and coincidence counts.
    """
    print("=" * 60)
    print("EXAMPLE 6: Unitary Reconstruction")
    print("=" * 60)

    u = haar_unitary(12, seed=8)
    inputs, outputs = [0, 3, 6, 9], list(range(8))
    truth = u.submatrix(outputs, inputs)
    truth = truth / np.linalg.norm(truth, axis=0)
    for shots in (10**4, 10**5, 10**6):
        result = reconstruct(simulate_counts(u, inputs, outputs, shots, seed=shots))
        print(f"{shots:>8} shots: gauge distance {gauge_distance(result, truth, conjugate=True):.4f}, "
              f"{int(result.resolved.sum())}/{result.resolved.size} phases resolved")
    print("\n")


def example_random_bits():
    """
    Example: Random bits from boson samples with the full extraction pipeline.
    """
    print("=" * 60)
    print("EXAMPLE 7: Random-Bit Extraction")
    print("=" * 60)

    u = haar_unitary(16, seed=9)
    records = sample_bs(u, InputConfig((0, 5, 10)), 20000, seed=10, threads=2)
    report, _, _ = pipeline(records, 16, block_size=config.DEFAULT_BLOCK_SIZE, threads=2)
    print(f"{report.trials} trials -> {report.vn_bits} VN bits -> {report.hashed_bits} hashed bits")
    print(f"H_min {report.h_min:.4f} per bit, hash block length {report.block_length}")
    for test in report.tests:
        result = "skipped" if test.skipped else ("pass" if test.passed else "FAIL")
        print(f"  {test.test:<28} {result}")
    print("\n")


def example_haar_similarity():
    """
    Example: Column similarity among Haar-random matrices.
    """
    print("=" * 60)
    print("EXAMPLE 8: Haar Similarity Benchmark")
    print("=" * 60)

    report = haar_benchmark(BENCHMARK_COLUMN, 32, 50, seed=11)
    print(f"Column similarity over 50 Haar matrices: {report.mean:.4f} +/- {report.std:.4f}")
    print("\n")


def main():
    """
    Run all example scenarios.
    """
    print("LATTICEBS - USAGE EXAMPLES")
    print("=" * 80)
    print("This script demonstrates the simulator and analysis toolkit.")
    print("=" * 80)
    print()

    try:
        example_hong_ou_mandel()
        example_device_unitary()
        example_permanents()
        example_validation_counters()
        example_detector_model()
        example_reconstruction()
        example_random_bits()
        example_haar_similarity()

        print("=" * 80)
        print("All examples completed successfully!")
        print("=" * 80)

    except Exception as e:
        print(f"Error running examples: {e}")
        print("Make sure you have installed the required dependencies:")
        print("pip install -r requirements.txt")


if __name__ == "__main__":
    main()
