#!/usr/bin/env python3
"""
Reconstruction - device submatrix from single-photon counts and two-photon coincidences

Moduli follow from single-photon output frequencies of each input. Phases
follow from two-photon coincidences: for inputs (i1, i2) and outputs (j1, j2)
the normalized coincidence rate fixes the cosine of the closure
theta[j1,i1] + theta[j2,i2] - theta[j2,i1] - theta[j1,i2]. With the phases of
the first output row and first input column set to zero, the closures through
that row and column give each remaining phase up to sign; the signs are fixed
greedily and refined by a least-squares fit over every available closure.

Matrices are indexed like the unitary: rows are outputs, columns are inputs.
"""

import itertools
import json
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

import config
import seeding
from errors import DataError, InconsistentCounts, InsufficientData, InvalidShape, ShapeMismatch
from unitary_core import UnitaryMatrix, as_complex_matrix

logger = logging.getLogger(__name__)

GAUGE_FIRST_ROW_COLUMN = "first-row-column"
SIGN_TOLERANCE = 1e-6


@dataclass(eq=False)
class CountTable:
    """
    Calibration counts.

    singles[j, a]: detections in output outputs[j] with one photon in inputs[a].
    pairs[(a, b)][j1, j2]: coincidences in outputs (j1, j2), j1 != j2, with
    photons in inputs[a] and inputs[b] (a < b); symmetric, zero diagonal.
    shots: trials per configuration.
    """

    inputs: Tuple[int, ...]
    outputs: Tuple[int, ...]
    singles: np.ndarray
    pairs: Dict[Tuple[int, int], np.ndarray]
    shots: int
    seed: Optional[int] = None

    def __post_init__(self):
        self.inputs = tuple(int(i) for i in self.inputs)
        self.outputs = tuple(int(j) for j in self.outputs)
        self.singles = np.asarray(self.singles, dtype=float)
        n_out, n_in = len(self.outputs), len(self.inputs)
        if self.singles.shape != (n_out, n_in):
            raise ShapeMismatch(f"Singles table has shape {self.singles.shape}, expected ({n_out}, {n_in})")
        if self.shots < 1:
            raise InsufficientData(f"Shots per configuration must be positive, got {self.shots}")
        if np.any(self.singles < 0):
            raise InvalidShape("Counts must be non-negative")
        pairs = {}
        for (a, b), table in self.pairs.items():
            a, b = sorted((int(a), int(b)))
            table = np.asarray(table, dtype=float)
            if a == b or not 0 <= a < n_in or not 0 <= b < n_in:
                raise InvalidShape(f"Invalid input pair ({a}, {b})")
            if table.shape != (n_out, n_out):
                raise ShapeMismatch(f"Pair ({a}, {b}) table has shape {table.shape}")
            if np.any(table < 0):
                raise InvalidShape("Counts must be non-negative")
            if not np.allclose(table, table.T):
                raise InvalidShape(f"Coincidence table of pair ({a}, {b}) is not symmetric")
            pairs[(a, b)] = table
        self.pairs = pairs

    @property
    def transmissions(self) -> np.ndarray:
        """Fraction of single-photon shots detected in the recorded outputs, per input."""
        return self.singles.sum(axis=0) / self.shots


@dataclass
class ModuliEstimate:
    rho: np.ndarray
    sigma: np.ndarray


@dataclass
class PhaseEstimate:
    theta: np.ndarray
    sigma: np.ndarray
    resolved: np.ndarray
    closures: int = 0
    rms_residual: float = 0.0


@dataclass
class ReconstructedMatrix:
    """Gauge-fixed submatrix over (inputs, outputs); unresolved phases are NaN."""

    inputs: Tuple[int, ...]
    outputs: Tuple[int, ...]
    moduli: np.ndarray
    phases: np.ndarray
    resolved: np.ndarray
    moduli_sigma: np.ndarray
    phases_sigma: np.ndarray
    gauge: str = GAUGE_FIRST_ROW_COLUMN
    rms_residual: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        return np.where(self.resolved, self.moduli * np.exp(1j * np.nan_to_num(self.phases)), np.nan)

    def to_dict(self) -> dict:
        def table(a):
            return [[None if np.isnan(x) else float(x) for x in row] for row in a]

        return {
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "gauge": self.gauge,
            "moduli": table(self.moduli),
            "moduli_sigma": table(self.moduli_sigma),
            "phases": table(self.phases),
            "phases_sigma": table(self.phases_sigma),
            "resolved": self.resolved.tolist(),
            "rms_residual": self.rms_residual,
        }


def _multinomial(rng: np.random.Generator, shots: int, p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    p = p / max(1.0, p.sum())
    return rng.multinomial(shots, np.append(p, max(0.0, 1.0 - p.sum())))[:-1]


def simulate_counts(u, inputs: Sequence[int], outputs: Sequence[int], shots: int, seed=None,
                    expected: bool = False, pairs: Optional[Sequence[Tuple[int, int]]] = None) -> CountTable:
    """
    Calibration counts of a known matrix.

    Single photons enter each input in turn; pairs of indistinguishable photons
    enter each input pair. Only the listed outputs are recorded, everything else
    counts as lost. Coincidences are collision-free (two distinct outputs).

    Args:
        u: UnitaryMatrix or square complex array (rows outputs, columns inputs)
        inputs: Input modes
        outputs: Recorded output modes
        shots (int): Trials per configuration
        seed: Seed; configuration k draws from its own sub-stream
        expected (bool): Return expected counts instead of multinomial draws
        pairs: Input pairs (positions in ``inputs``) to simulate; default all

    Returns:
        CountTable: Simulated counts
    """
    matrix = u.matrix if isinstance(u, UnitaryMatrix) else as_complex_matrix(u)
    inputs, outputs = list(inputs), list(outputs)
    a = matrix[np.ix_(outputs, inputs)]
    n_out, n_in = a.shape
    if pairs is None:
        pairs = list(itertools.combinations(range(n_in), 2))

    singles = np.zeros((n_out, n_in))
    for k in range(n_in):
        p = np.abs(a[:, k]) ** 2
        singles[:, k] = shots * p if expected else _multinomial(seeding.generator(seed, k), shots, p)

    j1, j2 = np.triu_indices(n_out, k=1)
    pair_tables = {}
    for index, (s, t) in enumerate(pairs):
        s, t = sorted((int(s), int(t)))
        p = np.abs(a[j1, s] * a[j2, t] + a[j2, s] * a[j1, t]) ** 2
        values = shots * p if expected else _multinomial(seeding.generator(seed, n_in + index), shots, p)
        table = np.zeros((n_out, n_out))
        table[j1, j2] = values
        pair_tables[(s, t)] = table + table.T
    return CountTable(tuple(inputs), tuple(outputs), singles, pair_tables, shots,
                      seed if isinstance(seed, int) else None)


def estimate_moduli(counts: CountTable) -> ModuliEstimate:
    """
    rho[j, a] = sqrt(N1[j | a] / sum_j N1[j | a]); the per-input normalization
    absorbs input coupling and propagation loss.

    Args:
        counts (CountTable): Calibration counts

    Returns:
        ModuliEstimate: Moduli and binomial standard errors
    """
    totals = counts.singles.sum(axis=0)
    empty = np.flatnonzero(totals <= 0)
    if empty.size:
        raise InsufficientData(f"No single-photon counts for inputs {[counts.inputs[a] for a in empty]}")
    p = counts.singles / totals
    rho = np.sqrt(p)
    sigma_p = np.sqrt(p * (1.0 - p) / totals)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(rho > 0, sigma_p / (2.0 * rho), np.sqrt(1.0 / totals) * np.ones_like(rho))
    return ModuliEstimate(rho, sigma)


@dataclass
class _Closures:
    """Vectorized closures: index arrays into theta plus measured values."""

    j1: np.ndarray
    j2: np.ndarray
    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    sigma: np.ndarray
    big_a: np.ndarray
    big_b: np.ndarray

    def predicted(self, theta: np.ndarray) -> np.ndarray:
        phi = theta[self.j1, self.a] + theta[self.j2, self.b] - theta[self.j2, self.a] - theta[self.j1, self.b]
        return self.big_a + self.big_b + 2.0 * np.sqrt(self.big_a * self.big_b) * np.cos(phi)

    def residual(self, theta: np.ndarray) -> np.ndarray:
        return (self.predicted(theta) - self.q) / self.sigma

    def subset(self, mask: np.ndarray) -> "_Closures":
        return _Closures(*(getattr(self, name)[mask] for name in
                           ("j1", "j2", "a", "b", "q", "sigma", "big_a", "big_b")))


def _closures(counts: CountTable, rho: np.ndarray, usable: np.ndarray) -> _Closures:
    eta = counts.transmissions
    n_out = rho.shape[0]
    j1, j2 = np.triu_indices(n_out, k=1)
    parts: List[Tuple[np.ndarray, ...]] = []
    for (a, b), table in sorted(counts.pairs.items()):
        keep = usable[j1, a] & usable[j2, b] & usable[j2, a] & usable[j1, b]
        if not np.any(keep):
            continue
        s, t = j1[keep], j2[keep]
        p = table[s, t] / counts.shots
        norm = eta[a] * eta[b]
        q = p / norm
        sigma = np.sqrt(np.maximum(p * (1.0 - p), 1.0 / counts.shots) / counts.shots) / norm
        big_a = (rho[s, a] * rho[t, b]) ** 2
        big_b = (rho[t, a] * rho[s, b]) ** 2
        parts.append((s, t, np.full(s.size, a), np.full(s.size, b), q, sigma, big_a, big_b))
    if not parts:
        empty = np.zeros(0, dtype=int)
        return _Closures(empty, empty, empty, empty, *(np.zeros(0) for _ in range(4)))
    return _Closures(*(np.concatenate(column) for column in zip(*parts)))


def estimate_phases(counts: CountTable, moduli: ModuliEstimate) -> PhaseEstimate:
    """
    Phases from two-photon closures under the first-row/first-column gauge.

    Entries whose own modulus, or a modulus of their gauge closure, falls below
    config.MODULUS_FLOOR are unresolved, as are columns whose pair with the
    first input was not measured. Of the two mirror-image solutions the one
    whose first non-trivial phase is positive is returned.

    Args:
        counts (CountTable): Calibration counts
        moduli (ModuliEstimate): Output of estimate_moduli

    Returns:
        PhaseEstimate: Phases (NaN where unresolved), errors and fit summary
    """
    rho = moduli.rho
    n_out, n_in = rho.shape
    eta = counts.transmissions
    if np.any(eta <= 0):
        raise InsufficientData("An input has no detected single photons")
    usable = rho >= config.MODULUS_FLOOR

    resolved = usable.copy()
    resolved[:, 0] &= usable[0, 0]
    resolved[0, :] &= usable[0, 0]
    for i in range(1, n_in):
        if (0, i) not in counts.pairs:
            resolved[1:, i] = False
        resolved[1:, i] &= usable[1:, 0] & usable[0, i]

    theta = np.zeros((n_out, n_in))
    sigma = np.zeros((n_out, n_in))
    magnitude = {}
    j_grid, i_grid = np.nonzero(resolved[1:, 1:])
    for j, i in zip(j_grid + 1, i_grid + 1):
        table = counts.pairs[(0, i)]
        p = table[0, j] / counts.shots
        norm = eta[0] * eta[i]
        q = p / norm
        big_a = (rho[0, 0] * rho[j, i]) ** 2
        big_b = (rho[j, 0] * rho[0, i]) ** 2
        scale = 2.0 * np.sqrt(big_a * big_b)
        cos_phi = (q - big_a - big_b) / scale
        sigma_cos = np.sqrt(max(p * (1.0 - p), 1.0 / counts.shots) / counts.shots) / norm / scale
        if abs(cos_phi) > 1.0 + config.COS_SLACK_SIGMAS * sigma_cos:
            raise InconsistentCounts(
                f"Closure for output {counts.outputs[j]}, input {counts.inputs[i]}: cos = {cos_phi:.4f} "
                f"exceeds 1 by more than {config.COS_SLACK_SIGMAS} standard errors ({sigma_cos:.2e})")
        cos_phi = float(np.clip(cos_phi, -1.0, 1.0))
        magnitude[(j, i)] = np.arccos(cos_phi)
        sin_phi = np.sqrt(max(1.0 - cos_phi ** 2, 0.0))
        sigma[j, i] = min(np.pi, sigma_cos / sin_phi) if sin_phi > 0 else min(np.pi, np.sqrt(2.0 * sigma_cos))

    closures = _closures(counts, rho, resolved)
    order = sorted(magnitude, key=lambda e: (e[1], e[0]))
    assigned = np.zeros_like(resolved)
    assigned[0, :] = resolved[0, :]
    assigned[:, 0] = resolved[:, 0]
    conjugation_fixed = False
    for j, i in order:
        g = magnitude[(j, i)]
        assigned[j, i] = True
        if SIGN_TOLERANCE < g < np.pi - SIGN_TOLERANCE:
            mask = (assigned[closures.j1, closures.a] & assigned[closures.j2, closures.b]
                    & assigned[closures.j2, closures.a] & assigned[closures.j1, closures.b])
            involved = mask & (((closures.j1 == j) | (closures.j2 == j)) & ((closures.a == i) | (closures.b == i)))
            local = closures.subset(involved)
            costs = []
            for sign in (1.0, -1.0):
                theta[j, i] = sign * g
                costs.append(float(np.sum(local.residual(theta) ** 2)))
            theta[j, i] = g if not conjugation_fixed or costs[0] <= costs[1] else -g
            conjugation_fixed = True
        else:
            theta[j, i] = g

    free = order
    rms = 0.0
    if free and closures.q.size:
        rows = np.array([e[0] for e in free])
        cols = np.array([e[1] for e in free])

        def residual(x: np.ndarray) -> np.ndarray:
            trial = theta.copy()
            trial[rows, cols] = x
            return closures.residual(trial)

        fit = optimize.least_squares(residual, theta[rows, cols], method="trf")
        theta[rows, cols] = fit.x
        rms = float(np.sqrt(np.mean(fit.fun ** 2)))
        first = next((k for k, (j, i) in enumerate(free) if abs(np.sin(fit.x[k])) > SIGN_TOLERANCE), None)
        if first is not None and np.sin(fit.x[first]) < 0:
            theta = -theta
        logger.info(f"Phase fit: {len(free)} phases from {closures.q.size} closures, rms residual {rms:.3f} sigma")

    theta = np.angle(np.exp(1j * theta))
    theta[theta <= -np.pi] = np.pi
    theta = np.where(resolved, theta, np.nan)
    sigma = np.where(resolved, sigma, np.nan)
    unresolved = int((~resolved).sum())
    if unresolved:
        logger.warning(f"{unresolved} of {resolved.size} phases unresolved (modulus floor or missing input pairs)")
    return PhaseEstimate(theta, sigma, resolved, int(closures.q.size), rms)


def reconstruct(counts: CountTable) -> ReconstructedMatrix:
    """
    Reconstruct the accessible submatrix from calibration counts.

    Args:
        counts (CountTable): Singles for every input and coincidences for input pairs

    Returns:
        ReconstructedMatrix: Moduli, gauge-fixed phases and their uncertainties
    """
    moduli = estimate_moduli(counts)
    phases = estimate_phases(counts, moduli)
    missing = [pair for pair in itertools.combinations(range(len(counts.inputs)), 2) if pair not in counts.pairs]
    if missing:
        logger.warning(f"Input pairs without coincidence data: {[(counts.inputs[a], counts.inputs[b]) for a, b in missing]}")
    return ReconstructedMatrix(
        inputs=counts.inputs,
        outputs=counts.outputs,
        moduli=moduli.rho,
        phases=phases.theta,
        resolved=phases.resolved,
        moduli_sigma=moduli.sigma,
        phases_sigma=phases.sigma,
        rms_residual=phases.rms_residual,
    )


def _align_frobenius(a: np.ndarray, b: np.ndarray, valid: np.ndarray, iterations: int = 50) -> Tuple[np.ndarray, np.ndarray]:
    """Alternating least-squares phases so that diag(e^ia) @ a @ diag(e^ib) ~ b."""
    a0 = np.where(valid, a, 0.0)
    b0 = np.where(valid, b, 0.0)
    alpha = np.zeros(a.shape[0])
    beta = np.zeros(a.shape[1])
    for _ in range(iterations):
        alpha = np.angle(np.sum(b0 * np.conj(a0 * np.exp(1j * beta)[None, :]), axis=1))
        beta = np.angle(np.sum(b0 * np.conj(a0 * np.exp(1j * alpha)[:, None]), axis=0))
    return alpha, beta


def gauge_distance(a, b, max_free: int = 40, conjugate: bool = False) -> float:
    """
    Smallest max-entry distance between ``a`` and ``b`` over diagonal phase
    matrices on both sides.

    Coincidence counts fix a matrix only up to complex conjugation, so a
    reconstruction is compared with its truth using ``conjugate=True``, which
    also tries the conjugate of ``a``.

    Args:
        a: ReconstructedMatrix or complex array (NaN entries are ignored)
        b: Complex array of the same shape (e.g. UnitaryMatrix.submatrix)
        max_free (int): Largest number of phases refined by Nelder-Mead
        conjugate (bool): Also minimize over complex conjugation of ``a``

    Returns:
        float: Minimized max |D_out a D_in - b| over entries
    """
    a = a.matrix if isinstance(a, ReconstructedMatrix) else np.asarray(a, dtype=np.complex128)
    b = b.matrix if isinstance(b, UnitaryMatrix) else np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ShapeMismatch(f"Cannot compare shapes {a.shape} and {b.shape}")
    valid = np.isfinite(a) & np.isfinite(b)
    if not np.any(valid):
        return float("nan")
    best = np.inf
    for candidate in ((a, np.conj(a)) if conjugate else (a,)):
        alpha, beta = _align_frobenius(candidate, b, valid)

        def distance(x: np.ndarray) -> float:
            al = np.concatenate([[alpha[0]], x[:a.shape[0] - 1]])
            be = x[a.shape[0] - 1:]
            aligned = np.exp(1j * al)[:, None] * candidate * np.exp(1j * be)[None, :]
            return float(np.max(np.abs(aligned - b)[valid]))

        x0 = np.concatenate([alpha[1:], beta])
        value = distance(x0)
        if 0 < x0.size <= max_free and value > 0:
            fit = optimize.minimize(distance, x0, method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
            value = min(value, float(fit.fun))
        best = min(best, value)
    return best


def save_counts(counts: CountTable, path: str) -> None:
    """
    Write counts as JSON {"singles": {"i": [..]}, "pairs": {"i1,i2": {"j1,j2": n}}, "shots": n}
    keyed by input and output mode labels.
    """
    singles = {str(mode): [float(c) for c in counts.singles[:, a]] for a, mode in enumerate(counts.inputs)}
    pairs = {}
    for (a, b), table in sorted(counts.pairs.items()):
        j1, j2 = np.nonzero(np.triu(table, k=1))
        pairs[f"{counts.inputs[a]},{counts.inputs[b]}"] = {
            f"{counts.outputs[s]},{counts.outputs[t]}": float(table[s, t]) for s, t in zip(j1, j2)
        }
    payload = {
        "inputs": list(counts.inputs),
        "outputs": list(counts.outputs),
        "singles": singles,
        "pairs": pairs,
        "shots": counts.shots,
        "seed": counts.seed,
    }
    with open(path, "w") as file:
        json.dump(payload, file, indent=2)


def load_counts(path: str) -> CountTable:
    """Read a counts JSON file written by save_counts."""
    try:
        with open(path, "r") as file:
            payload = json.load(file)
        inputs = [int(i) for i in payload.get("inputs", payload["singles"].keys())]
        first = payload["singles"][str(inputs[0])]
        outputs = [int(j) for j in payload.get("outputs", range(len(first)))]
        singles = np.column_stack([payload["singles"][str(i)] for i in inputs])
        input_index = {mode: a for a, mode in enumerate(inputs)}
        output_index = {mode: j for j, mode in enumerate(outputs)}
        pairs = {}
        for key, entries in payload.get("pairs", {}).items():
            i1, i2 = (int(x) for x in key.split(","))
            table = np.zeros((len(outputs), len(outputs)))
            for out_key, count in entries.items():
                j1, j2 = (output_index[int(x)] for x in out_key.split(","))
                table[j1, j2] = table[j2, j1] = float(count)
            pairs[tuple(sorted((input_index[i1], input_index[i2])))] = table
        return CountTable(tuple(inputs), tuple(outputs), singles, pairs, int(payload["shots"]), payload.get("seed"))
    except FileNotFoundError:
        raise DataError(f"Counts file not found: {path}")
    except (KeyError, ValueError, IndexError, TypeError) as e:
        raise DataError(f"{path}: malformed counts file ({e})")
