#!/usr/bin/env python3
"""
Unitary core - dense complex linear algebra for the simulator

Unitary matrices and their JSON file format, Haar-random sampling, exponentials
of Hermitian generators and matrix permanents (Ryser, Glynn and the n! oracle).
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy import linalg

import config
import seeding
from errors import (
    HermiticityViolation,
    InvalidDimension,
    InvalidMultiset,
    InvalidShape,
    SizeLimit,
    UnitarityViolation,
)

logger = logging.getLogger(__name__)

PERMANENT_ALGORITHMS = ("naive", "ryser", "glynn")
PROVENANCES = ("haar", "device", "file")


def as_complex_matrix(a) -> np.ndarray:
    """
    Coerce input into a finite 2-D complex128 array.

    Args:
        a: Array-like matrix

    Returns:
        np.ndarray: Complex matrix (a copy when conversion was needed)
    """
    matrix = np.asarray(a, dtype=np.complex128)
    if matrix.ndim != 2:
        raise InvalidShape(f"Expected a 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidShape("Matrix contains NaN or infinite entries")
    return matrix


def unitarity_defect(u: np.ndarray) -> float:
    """Max-norm of U^dagger U - I."""
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """
    Square unitary matrix U with U[j, i] the amplitude from input i to output j.

    The unitarity invariant is checked at construction; the stored array is
    read-only.
    """

    matrix: np.ndarray
    provenance: str = "haar"
    defect: float = field(init=False)

    def __post_init__(self):
        u = as_complex_matrix(self.matrix)
        if u.shape[0] != u.shape[1] or u.shape[0] == 0:
            raise InvalidShape(f"Unitary must be square and non-empty, got {u.shape}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"Unknown provenance '{self.provenance}'")
        defect = unitarity_defect(u)
        if defect > config.UNITARITY_TOLERANCE:
            raise UnitarityViolation(f"Unitarity defect {defect:.3e} exceeds {config.UNITARITY_TOLERANCE:.0e}")
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "matrix", u)
        object.__setattr__(self, "defect", defect)

    @classmethod
    def from_array(cls, a, provenance: str = "file", reproject: bool = False) -> "UnitaryMatrix":
        """
        Build a UnitaryMatrix, optionally re-projecting a noisy matrix onto the
        unitary group through the polar decomposition.

        Args:
            a: Square complex matrix
            provenance (str): haar, device or file
            reproject (bool): Replace ``a`` by the unitary factor of its polar decomposition

        Returns:
            UnitaryMatrix: Validated unitary
        """
        matrix = as_complex_matrix(a)
        if reproject:
            before = unitarity_defect(matrix)
            matrix, _ = linalg.polar(matrix)
            logger.info(f"Re-projected matrix onto the unitary group (defect {before:.3e} -> {unitarity_defect(matrix):.3e})")
        return cls(matrix, provenance)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def moduli(self) -> np.ndarray:
        """rho_ij = |U_ij|."""
        return np.abs(self.matrix)

    @property
    def phases(self) -> np.ndarray:
        """theta_ij in (-pi, pi]."""
        theta = np.angle(self.matrix)
        theta[theta <= -np.pi] = np.pi
        return theta

    def column_distribution(self, column: int, restricted: Optional[Sequence[int]] = None) -> np.ndarray:
        """
        Single-photon output distribution for a photon entering ``column``.

        Args:
            column (int): Input mode
            restricted (Sequence[int], optional): Output modes kept; the result is renormalized over them

        Returns:
            np.ndarray: Probability vector
        """
        probabilities = np.abs(self.matrix[:, column]) ** 2
        if restricted is not None:
            probabilities = probabilities[np.asarray(restricted, dtype=int)]
            probabilities = probabilities / probabilities.sum()
        return probabilities

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        """Rows (outputs) and columns (inputs) with repetition allowed."""
        return self.matrix[np.ix_(np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))]


@dataclass(frozen=True)
class PermanentValue:
    value: complex
    algorithm: str


def haar_unitary(m: int, seed=None) -> UnitaryMatrix:
    """
    Draw an m x m unitary from the Haar measure.

    A complex Ginibre matrix is QR-decomposed and each column of Q is divided by
    the phase of the matching diagonal entry of R, which makes the result
    exactly Haar distributed.

    Args:
        m (int): Dimension
        seed: Seed or numpy Generator

    Returns:
        UnitaryMatrix: Haar-random unitary (provenance 'haar')
    """
    if m < 1:
        raise InvalidDimension(f"Haar unitary needs m >= 1, got {m}")
    rng = seeding.as_generator(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
    q, r = linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return UnitaryMatrix(q, "haar")


def expm_hermitian(h, dz: float) -> UnitaryMatrix:
    """
    Compute exp(-i * h * dz) through the Hermitian eigendecomposition.

    Args:
        h: Hermitian matrix
        dz (float): Positive step length

    Returns:
        UnitaryMatrix: The propagator (provenance 'device')
    """
    h = as_complex_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise InvalidShape(f"Generator must be square, got {h.shape}")
    if not dz > 0:
        raise InvalidDimension(f"Step length must be positive, got {dz}")
    asymmetry = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if asymmetry > config.HERMITICITY_TOLERANCE:
        raise HermiticityViolation(f"Generator deviates from Hermitian by {asymmetry:.3e}")
    eigenvalues, vectors = linalg.eigh(h)
    propagator = (vectors * np.exp(-1j * eigenvalues * dz)) @ vectors.conj().T
    return UnitaryMatrix(propagator, "device")


def _check_square(a) -> np.ndarray:
    matrix = as_complex_matrix(a)
    if matrix.shape[0] != matrix.shape[1]:
        raise InvalidShape(f"Permanent needs a square matrix, got {matrix.shape}")
    return matrix


def _low_subsets(bits: int) -> np.ndarray:
    """0/1 membership table of all subsets of ``bits`` elements, one row per subset."""
    index = np.arange(1 << bits, dtype=np.int64)
    return ((index[:, None] >> np.arange(bits)) & 1).astype(np.float64)


def _popcount_signs(table: np.ndarray) -> np.ndarray:
    return np.where(table.sum(axis=1) % 2 == 0, 1.0, -1.0)


def _gray_sum(low_table: np.ndarray, low_signs: np.ndarray, base: np.ndarray,
              high_vectors: np.ndarray, step: float) -> complex:
    """
    Sum of sign * prod(base + low) over a Gray-code walk of the high subsets.

    The high part changes one vector per step (added with +step when its bit
    turns on, -step when it turns off); every low subset is evaluated in one
    vectorized block per high subset. Block sums use numpy's pairwise
    summation, the outer sum is compensated and the running base vector is
    Kahan-corrected once matrices reach config sizes where drift matters.
    """
    n_high = high_vectors.shape[0]
    compensate = base.shape[0] >= 16
    carry = np.zeros_like(base)
    real_parts: List[float] = []
    imag_parts: List[float] = []
    gray = 0
    for k in range(1 << n_high):
        if k:
            new_gray = k ^ (k >> 1)
            flipped = (gray ^ new_gray).bit_length() - 1
            delta = high_vectors[flipped] * (step if new_gray >> flipped & 1 else -step)
            if compensate:
                y = delta - carry
                t = base + y
                carry = (t - base) - y
                base = t
            else:
                base = base + delta
            gray = new_gray
        block = np.prod(base[None, :] + low_table, axis=1) @ low_signs
        sign = -1.0 if bin(gray).count("1") % 2 else 1.0
        real_parts.append(sign * block.real)
        imag_parts.append(sign * block.imag)
    return complex(math.fsum(real_parts), math.fsum(imag_parts))


def ryser(a) -> complex:
    """
    Permanent by Ryser's inclusion-exclusion formula over column subsets,
    enumerated in Gray-code order, O(2^n n).
    """
    a = _check_square(a)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n > config.PERMANENT_MAX_SIZE:
        raise SizeLimit(f"ryser supports n <= {config.PERMANENT_MAX_SIZE}, got {n}")
    low_bits = min(n, config.GRAY_BLOCK_BITS)
    table = _low_subsets(low_bits)
    low_table = table @ a[:, :low_bits].T
    total = _gray_sum(low_table, _popcount_signs(table), np.zeros(n, dtype=np.complex128),
                      a[:, low_bits:].T, 1.0)
    return total if n % 2 == 0 else -total


def glynn(a) -> complex:
    """
    Permanent by Glynn's formula over +-1 row-sign vectors with the first sign
    fixed, enumerated in Gray-code order, O(2^(n-1) n).
    """
    a = _check_square(a)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n > config.PERMANENT_MAX_SIZE:
        raise SizeLimit(f"glynn supports n <= {config.PERMANENT_MAX_SIZE}, got {n}")
    free = n - 1
    low_bits = min(free, config.GRAY_BLOCK_BITS)
    table = _low_subsets(low_bits)
    low_table = (1.0 - 2.0 * table) @ a[1:low_bits + 1, :]
    high_rows = a[low_bits + 1:, :]
    base = a[0, :] + high_rows.sum(axis=0)
    # flipping a high sign to -1 removes twice its row
    total = _gray_sum(low_table, _popcount_signs(table), base, high_rows, -2.0)
    return total / float(1 << free)


def naive_permanent(a) -> complex:
    """Reference n! expansion."""
    a = _check_square(a)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n > config.NAIVE_PERMANENT_MAX_SIZE:
        raise SizeLimit(f"naive permanent supports n <= {config.NAIVE_PERMANENT_MAX_SIZE}, got {n}")
    permutations = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    terms = a[np.arange(n)[None, :], permutations].prod(axis=1)
    return complex(np.sum(terms))


_ALGORITHMS = {"naive": naive_permanent, "ryser": ryser, "glynn": glynn}


def permanent(a, algo: str = "ryser") -> PermanentValue:
    """
    Permanent of a square complex matrix.

    Args:
        a: Square matrix
        algo (str): naive, ryser or glynn

    Returns:
        PermanentValue: Value and algorithm tag
    """
    if algo not in _ALGORITHMS:
        raise ValueError(f"Unknown permanent algorithm '{algo}'")
    return PermanentValue(_ALGORITHMS[algo](a), algo)


def expand_multiplicity(a, row_mult: Sequence[int], col_mult: Sequence[int]) -> np.ndarray:
    """Repeat row i row_mult[i] times and column j col_mult[j] times."""
    a = as_complex_matrix(a)
    rows = np.asarray(row_mult, dtype=int)
    cols = np.asarray(col_mult, dtype=int)
    if rows.shape != (a.shape[0],) or cols.shape != (a.shape[1],):
        raise InvalidShape(f"Multiplicities {rows.shape}/{cols.shape} do not match matrix {a.shape}")
    if np.any(rows < 0) or np.any(cols < 0):
        raise InvalidMultiset("Multiplicities must be non-negative")
    if rows.sum() != cols.sum():
        raise InvalidMultiset(f"Row multiplicities sum to {rows.sum()}, columns to {cols.sum()}")
    return np.repeat(np.repeat(a, rows, axis=0), cols, axis=1)


def permanent_with_multiplicity(a, row_mult: Sequence[int], col_mult: Sequence[int],
                                algo: str = "ryser") -> PermanentValue:
    """
    Permanent of ``a`` expanded by row and column repetition, as needed for
    outputs with several photons in one mode.

    Args:
        a: Matrix (need not be square)
        row_mult: Repetition count per row
        col_mult: Repetition count per column
        algo (str): Permanent algorithm applied to the expanded matrix

    Returns:
        PermanentValue: Permanent of the expanded matrix
    """
    if sum(int(r) for r in row_mult) > config.PERMANENT_MAX_SIZE:
        raise SizeLimit(f"Expanded size exceeds {config.PERMANENT_MAX_SIZE}")
    return permanent(expand_multiplicity(a, row_mult, col_mult), algo)


_PERMUTATION_CACHE = {}


def _permutation_table(n: int) -> np.ndarray:
    if n not in _PERMUTATION_CACHE:
        _PERMUTATION_CACHE[n] = np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)
    return _PERMUTATION_CACHE[n]


def batch_permanent(matrices) -> np.ndarray:
    """
    Permanents of a stack of small square matrices, shape (K, n, n) -> (K,).

    Used where thousands of 2x2 to 4x4 permanents are needed at once
    (enumeration of output spaces, per-event likelihood ratios).
    """
    stack = np.asarray(matrices, dtype=np.complex128)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise InvalidShape(f"Expected a (K, n, n) stack, got {stack.shape}")
    n = stack.shape[1]
    if n > config.BATCH_PERMANENT_MAX_SIZE:
        raise SizeLimit(f"batch_permanent supports n <= {config.BATCH_PERMANENT_MAX_SIZE}, got {n}")
    if n == 0:
        return np.ones(stack.shape[0], dtype=np.complex128)
    rows = np.arange(n)
    total = np.zeros(stack.shape[0], dtype=np.complex128)
    for sigma in _permutation_table(n):
        total += stack[:, rows, sigma].prod(axis=1)
    return total


def save_unitary(u: UnitaryMatrix, path: str) -> None:
    """
    Write a unitary as JSON {"m": int, "entries": [[re, im], ...] row-major}.

    Args:
        u (UnitaryMatrix): Matrix to save
        path (str): Destination file
    """
    entries = [[float(z.real), float(z.imag)] for z in u.matrix.ravel()]
    with open(path, "w") as file:
        json.dump({"m": u.m, "entries": entries, "provenance": u.provenance}, file)


def load_unitary(path: str, reproject: bool = False) -> UnitaryMatrix:
    """
    Read a unitary JSON file and validate it.

    Args:
        path (str): Source file
        reproject (bool): Project a slightly non-unitary matrix onto the unitary group

    Returns:
        UnitaryMatrix: Loaded matrix (provenance 'file')
    """
    with open(path, "r") as file:
        payload = json.load(file)
    try:
        m = int(payload["m"])
        entries = np.asarray(payload["entries"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidShape(f"{path}: malformed unitary file ({e})")
    if m < 1 or entries.shape != (m * m, 2):
        raise InvalidShape(f"{path}: expected {m * m} [re, im] pairs, got {entries.shape}")
    matrix = (entries[:, 0] + 1j * entries[:, 1]).reshape(m, m)
    defect = unitarity_defect(matrix)
    logger.info(f"Loaded {m}x{m} matrix from {path}, unitarity defect {defect:.3e}")
    if defect > config.UNITARITY_TOLERANCE and not reproject:
        raise UnitarityViolation(f"{path}: unitarity defect {defect:.3e} exceeds {config.UNITARITY_TOLERANCE:.0e}")
    return UnitaryMatrix.from_array(matrix, "file", reproject=reproject and defect > config.UNITARITY_TOLERANCE)


def haar_unitaries(m: int, count: int, seed) -> Iterable[UnitaryMatrix]:
    """Yield ``count`` independent Haar unitaries from per-draw sub-streams."""
    for index in range(count):
        yield haar_unitary(m, seeding.generator(seed, index))
