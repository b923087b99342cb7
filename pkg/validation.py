#!/usr/bin/env python3
"""
Validation - statistical discrimination of sample origin and Haar benchmarks

Two sequential counters test recorded events against rival hypotheses:
W_k against the uniform sampler (row-norm discriminator) and C_k against
fully distinguishable photons (likelihood ratio of the two permanent laws).
Similarity statistics compare output distributions of random unitaries and
of the device under random heater settings.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

import config
import seeding
from errors import InvalidDistribution, InvalidFold, InvalidShape, ShapeMismatch, SizeLimit
from lattice_device import DeviceModel, evolve, power_sweep
from sampling import FockState, InputConfig, SampleRecord
from unitary_core import UnitaryMatrix, batch_permanent, haar_unitaries

logger = logging.getLogger(__name__)

NULL_UNIFORM = "uniform"
NULL_DISTINGUISHABLE = "distinguishable"

BENCHMARK_MODULI = "moduli"
BENCHMARK_COLUMN = "column-sim"
BENCHMARK_TWO_PHOTON = "two-photon-sim"
BENCHMARK_MODES = (BENCHMARK_MODULI, BENCHMARK_COLUMN, BENCHMARK_TWO_PHOTON)

TIE_TOLERANCE = 1e-12


@dataclass
class ValidationTrace:
    """
    Counter values after each scored event together with the acceptance band.

    counter[k-1] is the counter after k events; band[k-1] = BAND_Z * sqrt(k).
    """

    counter: np.ndarray
    band: np.ndarray
    null: str
    skipped: int = 0
    seed: Optional[int] = None

    @property
    def k(self) -> np.ndarray:
        return np.arange(1, len(self.counter) + 1)

    @property
    def final(self) -> int:
        return int(self.counter[-1]) if len(self.counter) else 0

    @property
    def rejected(self) -> bool:
        """Null rejected when every event in the final tail sits above the band."""
        if not len(self.counter):
            return False
        tail = max(1, int(math.ceil(config.REJECTION_TAIL * len(self.counter))))
        return bool(np.all(self.counter[-tail:] > self.band[-tail:]))

    @property
    def exits_upward(self) -> bool:
        return bool(np.any(self.counter > self.band))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "k": self.k,
            "counter": self.counter.astype(int),
            "band": self.band,
            "seed": self.seed,
        })


@dataclass
class SimilarityReport:
    """Pairwise similarities with their summary and an optional Haar reference band."""

    similarities: np.ndarray
    label: str = ""
    haar_band: Optional[Tuple[float, float]] = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.similarities)) if len(self.similarities) else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.similarities)) if len(self.similarities) else float("nan")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "count": int(len(self.similarities)),
            "mean": self.mean,
            "sd": self.std,
            "haar_band": list(self.haar_band) if self.haar_band is not None else None,
            "similarities": [float(s) for s in self.similarities],
        }


@dataclass
class ModuliHistogram:
    """Pooled |U_ij|^2 values (renormalized over the kept modes) with a KS test
    against the Haar marginal Beta(1, m_eff - 1)."""

    m_eff: int
    edges: np.ndarray
    counts: np.ndarray
    expected: np.ndarray
    ks_statistic: float
    ks_pvalue: float
    n_values: int

    def to_dict(self) -> dict:
        return {
            "m_eff": self.m_eff,
            "n_values": self.n_values,
            "ks_statistic": self.ks_statistic,
            "ks_pvalue": self.ks_pvalue,
            "edges": [float(e) for e in self.edges],
            "counts": [int(c) for c in self.counts],
            "expected": [float(e) for e in self.expected],
        }


def _event_modes(samples: Sequence, n: int, collision_free: bool) -> np.ndarray:
    """Output modes of kept samples as a (K, n) array."""
    events = []
    for sample in samples:
        if isinstance(sample, SampleRecord):
            if not sample.kept:
                continue
            sample = sample.output
        state = sample if isinstance(sample, FockState) else FockState(tuple(sample))
        if state.n != n:
            raise InvalidFold(f"Event with {state.n} photons in a {n}-photon validation")
        if collision_free and not state.collision_free:
            raise InvalidFold(f"Event {state.modes} is not collision-free")
        events.append(state.modes)
    return np.asarray(events, dtype=int).reshape(len(events), n)


def _fold_steps(score: np.ndarray, null: str, seed, skipped: int = 0) -> ValidationTrace:
    """Turn per-event scores (compared to 1) into a +/-1 random walk."""
    steps = np.where(score > 1.0, 1, -1)
    ties = np.flatnonzero(np.abs(score - 1.0) <= TIE_TOLERANCE)
    for k in ties:
        steps[k] = 1 if seeding.trial_generator(seed, int(k)).random() < 0.5 else -1
    counter = np.cumsum(steps)
    band = config.BAND_Z * np.sqrt(np.arange(1, len(steps) + 1))
    return ValidationTrace(counter, band, null, skipped, seed if isinstance(seed, int) else None)


def wk_counter(u: UnitaryMatrix, input_config: InputConfig, samples: Sequence,
               modes: Optional[Sequence[int]] = None, seed=0) -> ValidationTrace:
    """
    Counter W_k against the uniform-sampler null.

    Each event S scores R(S) = prod_i (m_eff / n) * sum_{j in S} |u_ji|^2, where
    the columns are renormalized over ``modes`` (all modes by default). W steps
    +1 when R > 1 and -1 otherwise; exact ties are broken by a fair coin.

    Args:
        u (UnitaryMatrix): Interferometer
        input_config (InputConfig): Input modes (fold n)
        samples: SampleRecords (only kept ones are scored) or FockStates
        modes (Sequence[int], optional): Measured output modes
        seed: Seed of the tie-breaking coins

    Returns:
        ValidationTrace: W_k with its +/-3 sqrt(k) band
    """
    input_config.check(u.m)
    n = input_config.n
    events = _event_modes(samples, n, collision_free=True)
    weights = np.abs(u.matrix[:, list(input_config.modes)]) ** 2
    m_eff = u.m
    if modes is not None:
        modes = np.asarray(sorted(modes), dtype=int)
        if modes.size == 0:
            raise InvalidShape("Empty measured-mode set")
        restricted = np.zeros_like(weights)
        restricted[modes] = weights[modes] / weights[modes].sum(axis=0)
        weights, m_eff = restricted, modes.size
    if events.size == 0 and n:
        return _fold_steps(np.zeros(0), NULL_UNIFORM, seed)
    ratio = np.prod((m_eff / n) * weights[events].sum(axis=1), axis=1) if n else np.ones(len(events))
    trace = _fold_steps(ratio, NULL_UNIFORM, seed)
    logger.info(f"W_k over {len(ratio)} events: final {trace.final}, band {trace.band[-1] if len(ratio) else 0:.1f}, "
                f"uniform null {'rejected' if trace.rejected else 'not rejected'}")
    return trace


def ck_counter(u: UnitaryMatrix, input_config: InputConfig, samples: Sequence, seed=0) -> ValidationTrace:
    """
    Counter C_k against the distinguishable-photon null.

    Each event scores L = |perm(U_S)|^2 / perm(|U_S|^2); events with a
    vanishing distinguishable probability are skipped and counted.

    Args:
        u (UnitaryMatrix): Interferometer
        input_config (InputConfig): Input modes, at most config.CK_MAX_PHOTONS
        samples: SampleRecords (only kept ones are scored) or FockStates
        seed: Seed of the tie-breaking coins

    Returns:
        ValidationTrace: C_k with its +/-3 sqrt(k) band
    """
    input_config.check(u.m)
    n = input_config.n
    if n > config.CK_MAX_PHOTONS:
        raise SizeLimit(f"C_k supports up to {config.CK_MAX_PHOTONS} photons, got {n}")
    events = _event_modes(samples, n, collision_free=False)
    stack = u.matrix[:, list(input_config.modes)][events]
    p_ind = np.abs(batch_permanent(stack)) ** 2
    p_dist = batch_permanent(np.abs(stack) ** 2).real
    degenerate = p_dist <= np.finfo(float).tiny
    if np.any(degenerate):
        logger.warning(f"C_k: skipped {int(degenerate.sum())} events with zero distinguishable probability")
    ratio = p_ind[~degenerate] / p_dist[~degenerate]
    trace = _fold_steps(ratio, NULL_DISTINGUISHABLE, seed, skipped=int(degenerate.sum()))
    logger.info(f"C_k over {len(ratio)} events: final {trace.final}, "
                f"distinguishable null {'rejected' if trace.rejected else 'not rejected'}")
    return trace


def _normalized(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 1:
        raise InvalidShape(f"Probability vector must be 1-D, got shape {d.shape}")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise InvalidDistribution("Probability vectors must be finite and non-negative")
    total = d.sum()
    if total <= 0:
        raise InvalidDistribution("Probability vector sums to zero")
    return d / total


def similarity(d1, d2) -> float:
    """
    Bhattacharyya-type similarity S = (sum_i sqrt(d1_i d2_i))^2.

    Args:
        d1: Probability vector (renormalized if needed)
        d2: Probability vector over the same outcomes

    Returns:
        float: S in [0, 1]
    """
    p, q = _normalized(d1), _normalized(d2)
    if p.shape != q.shape:
        raise ShapeMismatch(f"Distributions over {p.size} and {q.size} outcomes")
    return float(min(1.0, math.fsum(np.sqrt(p * q)) ** 2))


def two_photon_distribution(u: UnitaryMatrix, inputs: Tuple[int, int],
                            restricted: Optional[Sequence[int]] = None) -> np.ndarray:
    """Collision-free two-photon output distribution over the kept modes, renormalized."""
    modes = np.arange(u.m) if restricted is None else np.asarray(sorted(restricted), dtype=int)
    j1, j2 = np.triu_indices(modes.size, k=1)
    a = u.matrix[np.ix_(modes, list(inputs))]
    amplitude = a[j1, 0] * a[j2, 1] + a[j2, 0] * a[j1, 1]
    return _normalized(np.abs(amplitude) ** 2)


def _distribution(u: UnitaryMatrix, kind: str, inputs, restricted) -> np.ndarray:
    if kind == BENCHMARK_COLUMN:
        return u.column_distribution(inputs, restricted)
    return two_photon_distribution(u, inputs, restricted)


def similarity_report(unitaries: Sequence[UnitaryMatrix], kind: str = BENCHMARK_COLUMN,
                      inputs: Sequence = (0,), restricted: Optional[Sequence[int]] = None,
                      label: str = "", haar_band: Optional[Tuple[float, float]] = None) -> SimilarityReport:
    """
    Similarities of the same input column (or input pair) over all pairs of matrices.

    Args:
        unitaries: At least two matrices
        kind (str): 'column-sim' or 'two-photon-sim'
        inputs: Input columns (column-sim) or input pairs (two-photon-sim)
        restricted: Output modes kept, renormalized
        label (str): Report label
        haar_band: Reference band copied into the report

    Returns:
        SimilarityReport: One similarity per matrix pair and input
    """
    if len(unitaries) < 2:
        raise InvalidShape("Similarity statistics need at least two matrices")
    if kind not in (BENCHMARK_COLUMN, BENCHMARK_TWO_PHOTON):
        raise ValueError(f"Unknown similarity kind '{kind}'")
    if restricted is not None and len(restricted) == 0:
        raise InvalidShape("Empty restriction set")
    distributions = [[_distribution(u, kind, i, restricted) for i in inputs] for u in unitaries]
    values = [
        similarity(distributions[a][k], distributions[b][k])
        for a, b in itertools.combinations(range(len(unitaries)), 2)
        for k in range(len(inputs))
    ]
    return SimilarityReport(np.asarray(values), label, haar_band)


def moduli_histogram(unitaries: Sequence[UnitaryMatrix], restricted_modes: Optional[Sequence[int]] = None,
                     columns: Optional[Sequence[int]] = None, bins: int = 50) -> ModuliHistogram:
    """
    Pool |U_ij|^2 over the kept output modes and columns, each column
    renormalized over the kept modes, and compare with Beta(1, m_eff - 1).

    Args:
        unitaries: Matrices pooled together
        restricted_modes: Output modes kept (default: all)
        columns: Input columns pooled (default: all)
        bins (int): Histogram bins between 0 and the largest value

    Returns:
        ModuliHistogram: Counts, expected counts and KS statistic
    """
    if not len(unitaries):
        raise InvalidShape("Moduli histogram needs at least one matrix")
    m = unitaries[0].m
    kept_rows = np.arange(m) if restricted_modes is None else np.asarray(sorted(int(j) for j in restricted_modes))
    kept_columns = np.arange(m) if columns is None else np.asarray([int(i) for i in columns])
    if not kept_rows.size or not kept_columns.size:
        raise InvalidShape("Empty restriction set")
    pooled = []
    for u in unitaries:
        block = u.moduli[np.ix_(kept_rows, kept_columns)] ** 2
        pooled.append((block / block.sum(axis=0)).ravel())
    values = np.concatenate(pooled)
    m_eff = len(kept_rows)
    edges = np.linspace(0.0, float(values.max()) if values.size else 1.0, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    if m_eff < 2:
        return ModuliHistogram(m_eff, edges, counts, counts.astype(float), 0.0, 1.0, values.size)
    reference = stats.beta(1, m_eff - 1)
    expected = values.size * np.diff(reference.cdf(edges))
    ks = stats.kstest(values, reference.cdf)
    return ModuliHistogram(m_eff, edges, counts, expected, float(ks.statistic), float(ks.pvalue), values.size)


def haar_benchmark(mode: str, m: int, n_matrices: int, seed=None, restricted_modes: Optional[Sequence[int]] = None,
                   inputs: Optional[Sequence] = None, bins: int = 50):
    """
    Monte Carlo statistics over Haar-random unitaries.

    Args:
        mode (str): 'moduli', 'column-sim' or 'two-photon-sim'
        m (int): Dimension
        n_matrices (int): Number of matrices (>= 2)
        seed: Seed of the Haar draws
        restricted_modes: Output modes kept (renormalized)
        inputs: Columns or column pairs compared (default: column 0 / pair (0, 1);
            all columns for 'moduli')
        bins (int): Histogram bins for 'moduli'

    Returns:
        ModuliHistogram or SimilarityReport: The band of a similarity report is
        its own mean +/- one standard deviation
    """
    if mode not in BENCHMARK_MODES:
        raise ValueError(f"Unknown benchmark mode '{mode}', expected one of {BENCHMARK_MODES}")
    if n_matrices < 2:
        raise InvalidShape(f"Benchmark needs at least two matrices, got {n_matrices}")
    if restricted_modes is not None:
        restricted_modes = sorted(int(j) for j in restricted_modes)
        if not restricted_modes:
            raise InvalidShape("Empty restriction set")
        if restricted_modes[-1] >= m or restricted_modes[0] < 0:
            raise InvalidShape(f"Restricted modes outside 0..{m - 1}")
    unitaries = list(haar_unitaries(m, n_matrices, seed))
    logger.info(f"Haar benchmark '{mode}': {n_matrices} matrices, m={m}, "
                f"{len(restricted_modes) if restricted_modes else m} output modes")

    if mode == BENCHMARK_MODULI:
        return moduli_histogram(unitaries, restricted_modes, inputs, bins)

    if inputs is None:
        inputs = (0,) if mode == BENCHMARK_COLUMN else ((0, 1),)
    report = similarity_report(unitaries, mode, inputs, restricted_modes, label=f"haar m={m}")
    report.haar_band = (report.mean - report.std, report.mean + report.std)
    return report


def device_benchmark(device: DeviceModel, heater_counts: Sequence[int], n_powers: int,
                     p_max: float = config.P_MAX_MW, seed=None, kind: str = BENCHMARK_COLUMN,
                     inputs: Optional[Sequence] = None, haar_matrices: int = 0) -> Dict[int, object]:
    """
    Reconfigurability study: for each number of driven heaters, draw ``n_powers``
    random power settings (nested heater sets, see power_sweep) and compare the
    same device input column (or pair) across every pair of settings, or pool
    the device moduli, over the measured output modes.

    Args:
        device (DeviceModel): Device
        heater_counts: Active-heater counts to scan
        n_powers (int): Random power settings per count (>= 2 for similarities)
        p_max (float): Power bound in mW
        seed: Master seed (powers use the 'powers' sub-stream)
        kind (str): 'column-sim', 'two-photon-sim' or 'moduli'
        inputs: Device modes (or mode pairs) compared; default first input port(s),
            every input port for 'moduli'
        haar_matrices (int): If >= 2, attach a Haar reference band from that many
            matrices (similarity kinds only)

    Returns:
        Dict[int, SimilarityReport] or Dict[int, ModuliHistogram]: Report per heater count
    """
    if kind not in BENCHMARK_MODES:
        raise ValueError(f"Unknown benchmark mode '{kind}', expected one of {BENCHMARK_MODES}")
    ports = device.input_ports
    if inputs is None:
        if kind == BENCHMARK_MODULI:
            inputs = tuple(ports)
        else:
            inputs = (ports[0],) if kind == BENCHMARK_COLUMN else ((ports[0], ports[1]),)
    measured = list(device.measured_modes)
    band = None
    if haar_matrices >= 2 and kind != BENCHMARK_MODULI:
        haar = haar_benchmark(kind, device.m, haar_matrices, seeding.stream(seed, "haar"), measured,
                              inputs=inputs)
        band = haar.haar_band
    sweep = power_sweep(device, heater_counts, n_powers, p_max, seeding.stream(seed, "powers"))
    reports = {}
    for count, settings in sweep.items():
        unitaries = [evolve(device, powers) for powers in settings]
        if kind == BENCHMARK_MODULI:
            reports[count] = moduli_histogram(unitaries, measured, inputs)
            logger.info(f"Device benchmark: {count} heaters, moduli KS {reports[count].ks_statistic:.4f}")
            continue
        reports[count] = similarity_report(unitaries, kind, inputs, measured,
                                           label=f"{count} heaters", haar_band=band)
        logger.info(f"Device benchmark: {count} heaters, mean similarity {reports[count].mean:.4f} "
                    f"(sd {reports[count].std:.4f})")
    return reports


def save_trace(trace: ValidationTrace, path: str) -> None:
    """Write a trace as CSV (k, counter, band, seed)."""
    trace.to_frame().to_csv(path, index=False)


def load_trace(path: str, null: str = "") -> ValidationTrace:
    frame = pd.read_csv(path)
    seed = frame["seed"].iloc[0] if "seed" in frame and len(frame) and not pd.isna(frame["seed"].iloc[0]) else None
    return ValidationTrace(frame["counter"].to_numpy(), frame["band"].to_numpy(), null,
                           seed=int(seed) if seed is not None else None)


def save_report(report, path: str, seed=None) -> None:
    """Write a report object (anything with to_dict, or a plain dict) as JSON."""
    payload = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    payload["seed"] = seed
    with open(path, "w") as file:
        json.dump(payload, file, indent=2)
