#!/usr/bin/env python3
"""
Tests for the unitary core: Haar sampling, Hermitian exponentials and permanents.
"""

import json
import os
import sys
import tempfile
import time

import numpy as np
import pytest
from scipy import stats

from errors import HermiticityViolation, InvalidMultiset, InvalidShape, SizeLimit, UnitarityViolation
from unitary_core import (UnitaryMatrix, batch_permanent, expand_multiplicity, expm_hermitian, glynn,
                          haar_unitaries, haar_unitary, load_unitary, naive_permanent, permanent,
                          permanent_with_multiplicity, ryser, save_unitary, unitarity_defect)


def _random_complex(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def test_haar_single_mode_is_a_phase():
    """U(1) is a phase: one entry of modulus one."""
    u = haar_unitary(1, seed=7)
    assert u.m == 1
    assert abs(abs(u.matrix[0, 0]) - 1.0) < 1e-12
    print("✓ m=1 Haar draw is a pure phase")


def test_haar_unitarity_and_reproducibility():
    a = haar_unitary(12, seed=3)
    b = haar_unitary(12, seed=3)
    c = haar_unitary(12, seed=4)
    assert a.defect <= 1e-10
    assert np.array_equal(a.matrix, b.matrix)
    assert not np.allclose(a.matrix, c.matrix)
    assert a.provenance == "haar"
    print(f"✓ Haar draws unitary (defect {a.defect:.1e}) and reproducible per seed")


def test_haar_mean_squared_modulus():
    """Mean of |U_ij|^2 over many m=8 draws is 1/m."""
    values = np.concatenate([u.moduli.ravel() ** 2 for u in haar_unitaries(8, 1000, seed=11)])
    standard_error = values.std() / np.sqrt(values.size)
    assert abs(values.mean() - 1 / 8) < 3 * standard_error + 1e-12
    print(f"✓ mean |U_ij|^2 = {values.mean():.5f} (1/8 = 0.125)")


def test_haar_moduli_follow_beta_marginal():
    """Pooled |U_ij|^2 follow Beta(1, m-1)."""
    m = 32
    values = np.concatenate([u.moduli.ravel() ** 2 for u in haar_unitaries(m, 50, seed=5)])
    ks = stats.kstest(values, stats.beta(1, m - 1).cdf)
    assert ks.statistic < 0.015
    print(f"✓ KS statistic {ks.statistic:.4f} against Beta(1, {m - 1})")


def test_unitary_matrix_rejects_non_unitary():
    with pytest.raises(UnitarityViolation):
        UnitaryMatrix(np.array([[1.0, 0.0], [0.0, 2.0]]), "file")
    with pytest.raises(InvalidShape):
        UnitaryMatrix(np.ones((2, 3)), "file")
    noisy = haar_unitary(6, seed=1).matrix + 1e-6
    fixed = UnitaryMatrix.from_array(noisy, "file", reproject=True)
    assert fixed.defect <= 1e-10
    print("✓ Non-unitary input rejected, noisy input re-projected")


def test_unitary_matrix_accessors():
    u = haar_unitary(5, seed=2)
    assert np.allclose(u.moduli * np.exp(1j * u.phases), u.matrix)
    assert np.all(u.phases > -np.pi) and np.all(u.phases <= np.pi)
    column = u.column_distribution(2)
    assert abs(column.sum() - 1.0) < 1e-12
    restricted = u.column_distribution(2, restricted=[0, 3])
    assert restricted.shape == (2,) and abs(restricted.sum() - 1.0) < 1e-12
    assert u.submatrix([1, 1], [0, 4]).shape == (2, 2)
    with pytest.raises(ValueError):
        u.matrix[0, 0] = 0
    print("✓ Polar accessors, column distributions and read-only storage")


def test_expm_hermitian_zero_and_diagonal():
    identity = expm_hermitian(np.zeros((4, 4)), 0.5)
    assert np.allclose(identity.matrix, np.eye(4), atol=1e-14)
    betas = np.array([0.3, -1.2])
    u = expm_hermitian(np.diag(betas), 1.0)
    assert np.allclose(u.matrix, np.diag(np.exp(-1j * betas)), atol=1e-14)
    print("✓ exp(-i 0) = I and diagonal generators give diagonal phases")


def test_expm_hermitian_inverse_product():
    rng = np.random.default_rng(0)
    a = _random_complex(rng, 6)
    h = (a + a.conj().T) / 2
    forward = expm_hermitian(h, 1.0).matrix
    backward = expm_hermitian(-h, 1.0).matrix
    assert np.max(np.abs(forward @ backward - np.eye(6))) < 1e-12
    print("✓ expm(-ih) expm(+ih) = I within 1e-12")


def test_expm_hermitian_errors():
    with pytest.raises(HermiticityViolation):
        expm_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        expm_hermitian(np.eye(2), 0.0)
    print("✓ Non-Hermitian generator and non-positive step rejected")


def test_permanent_known_values():
    assert abs(permanent(np.eye(3)).value - 1.0) < 1e-12
    for algo in ("naive", "ryser", "glynn"):
        result = permanent(np.ones((4, 4)), algo)
        assert abs(result.value - 24.0) < 1e-10
        assert result.algorithm == algo
    assert permanent(np.zeros((0, 0))).value == 1.0
    print("✓ perm(I_3) = 1, perm(J_4) = 24 for every algorithm")


def test_permanent_algorithms_agree():
    rng = np.random.default_rng(42)
    for trial in range(200):
        n = 1 + trial % 7
        a = _random_complex(rng, n)
        reference = naive_permanent(a)
        scale = np.prod(np.abs(a).sum(axis=1))
        assert abs(ryser(a) - reference) / scale < 1e-11
        assert abs(glynn(a) - reference) / scale < 1e-11
    print("✓ Ryser and Glynn match the n! expansion on 200 matrices, n <= 7")


def test_permanent_gray_blocks_agree():
    """Sizes above the vectorized block exercise the Gray-code walk."""
    rng = np.random.default_rng(9)
    a = _random_complex(rng, 16) / 4
    r, g = ryser(a), glynn(a)
    assert abs(r - g) / abs(r) < 1e-9
    print(f"✓ Ryser and Glynn agree at n=16 (|perm| = {abs(r):.3e})")


def test_permanent_row_multilinearity_and_transpose():
    rng = np.random.default_rng(17)
    for n in (3, 5, 8):
        a = _random_complex(rng, n)
        x, y = _random_complex(rng, 1)[0, 0], _random_complex(rng, 1)[0, 0]
        row_a, row_b = _random_complex(rng, n)[0], _random_complex(rng, n)[0]
        row = n // 2
        mixed, first, second = a.copy(), a.copy(), a.copy()
        mixed[row] = x * row_a + y * row_b
        first[row], second[row] = row_a, row_b
        expected = x * ryser(first) + y * ryser(second)
        assert abs(ryser(mixed) - expected) <= 1e-10 * max(1.0, abs(expected))
        for algo in ("ryser", "glynn"):
            value = permanent(a, algo).value
            assert abs(permanent(a.T, algo).value - value) <= 1e-10 * max(1.0, abs(value))
    print("✓ Permanent is linear in each row and invariant under transpose")


def test_permanent_twenty_photons_runtime():
    a = haar_unitary(40, seed=20).matrix[:20, :20]
    start = time.perf_counter()
    value = permanent(a, "ryser").value
    elapsed = time.perf_counter() - start
    assert np.isfinite(value)
    assert elapsed < 5.0
    print(f"✓ 20 x 20 permanent in {elapsed:.2f} s")


def test_permanent_limits():
    with pytest.raises(SizeLimit):
        naive_permanent(np.eye(10))
    with pytest.raises(SizeLimit):
        ryser(np.eye(31))
    with pytest.raises(InvalidShape):
        ryser(np.ones((2, 3)))
    with pytest.raises(ValueError):
        permanent(np.eye(2), "laplace")
    print("✓ Size limits and shape checks enforced")


def test_permanent_with_multiplicity():
    a = 0.7 - 0.2j
    value = permanent_with_multiplicity(np.array([[a]]), [2], [2]).value
    assert abs(value - 2 * a ** 2) < 1e-12

    rng = np.random.default_rng(1)
    b = _random_complex(rng, 3)
    plain = permanent(b).value
    assert abs(permanent_with_multiplicity(b, [1, 1, 1], [1, 1, 1]).value - plain) < 1e-12

    expanded = expand_multiplicity(b, [1, 2, 0], [1, 1, 1])
    assert expanded.shape == (3, 3)
    assert abs(permanent_with_multiplicity(b, [1, 2, 0], [1, 1, 1]).value - naive_permanent(expanded)) < 1e-12

    with pytest.raises(InvalidMultiset):
        expand_multiplicity(b, [1, 1, 0], [1, 1, 1])
    print("✓ Multiplicity expansion matches explicit repetition")


def test_batch_permanent():
    rng = np.random.default_rng(4)
    for n in range(0, 5):
        stack = np.stack([_random_complex(rng, n) for _ in range(20)]) if n else np.zeros((20, 0, 0))
        values = batch_permanent(stack)
        expected = [naive_permanent(a) for a in stack] if n else np.ones(20)
        assert np.allclose(values, expected, rtol=1e-12, atol=1e-12)
    with pytest.raises(SizeLimit):
        batch_permanent(np.zeros((1, 7, 7)))
    print("✓ batch_permanent matches the reference for n = 0..4")


def test_unitary_file_io():
    u = haar_unitary(4, seed=8)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "u.json")
        save_unitary(u, path)
        loaded = load_unitary(path)
        assert np.allclose(loaded.matrix, u.matrix, atol=1e-15)
        assert loaded.provenance == "file"

        bad = os.path.join(tmp, "bad.json")
        with open(bad, "w") as file:
            json.dump({"m": 2, "entries": [[1, 0], [0, 0], [0, 0]]}, file)
        with pytest.raises(InvalidShape):
            load_unitary(bad)

        skewed = os.path.join(tmp, "skewed.json")
        entries = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.001, 0.0]]
        with open(skewed, "w") as file:
            json.dump({"m": 2, "entries": entries}, file)
        with pytest.raises(UnitarityViolation):
            load_unitary(skewed)
        assert unitarity_defect(load_unitary(skewed, reproject=True).matrix) <= 1e-10
    print("✓ Unitary JSON saved, reloaded and validated")


def run_all_tests():
    """
    Run all tests and provide a summary.
    """
    tests = [
        ("Haar m=1", test_haar_single_mode_is_a_phase),
        ("Haar unitarity", test_haar_unitarity_and_reproducibility),
        ("Haar mean modulus", test_haar_mean_squared_modulus),
        ("Haar Beta marginal", test_haar_moduli_follow_beta_marginal),
        ("UnitaryMatrix validation", test_unitary_matrix_rejects_non_unitary),
        ("UnitaryMatrix accessors", test_unitary_matrix_accessors),
        ("expm zero/diagonal", test_expm_hermitian_zero_and_diagonal),
        ("expm inverse", test_expm_hermitian_inverse_product),
        ("expm errors", test_expm_hermitian_errors),
        ("Permanent values", test_permanent_known_values),
        ("Permanent agreement", test_permanent_algorithms_agree),
        ("Permanent Gray blocks", test_permanent_gray_blocks_agree),
        ("Multilinearity and transpose", test_permanent_row_multilinearity_and_transpose),
        ("Permanent n=20 runtime", test_permanent_twenty_photons_runtime),
        ("Permanent limits", test_permanent_limits),
        ("Multiplicity", test_permanent_with_multiplicity),
        ("Batch permanent", test_batch_permanent),
        ("Unitary file I/O", test_unitary_file_io),
    ]

    print("=" * 60)
    print("LATTICEBS - UNITARY CORE TESTS")
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
