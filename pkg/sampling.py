#!/usr/bin/env python3
"""
Sampling - exact and rival samplers over Fock-state outputs of a unitary

Provides the brute-force output distribution, the exact sequential boson
sampler (mode-by-mode conditional marginals from sub-permanents), the
distinguishable-particle sampler, the uniform collision-free sampler and the
partial-distinguishability mixture. Every trial draws from its own generator
derived from (seed, trial index), so results never depend on the number of
worker threads.
"""

import itertools
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

import config
import seeding
from errors import DataError, EnumerationTooLarge, InvalidShape, SizeLimit
from lattice_device import DeviceModel, NoiseModel, apply_detector_model
from unitary_core import UnitaryMatrix, batch_permanent, permanent

logger = logging.getLogger(__name__)

TAG_BS = "bs"
TAG_DIST = "dist"
TAG_UNIFORM = "uniform"
TAG_MIXTURE = "mixture"
SAMPLER_TAGS = (TAG_BS, TAG_DIST, TAG_UNIFORM, TAG_MIXTURE)

SCOPE_ALL = "all"
SCOPE_COLLISION_FREE = "collision-free"

# Probability tables are keyed by the sorted tuple of occupied output modes,
# one entry per photon (so (2, 2, 5) is two photons in mode 2, one in mode 5).
ProbabilityTable = Dict[Tuple[int, ...], float]


@dataclass(frozen=True)
class FockState:
    """Photon-number occupations over m modes."""

    occupations: Tuple[int, ...]

    def __post_init__(self):
        occupations = tuple(int(t) for t in self.occupations)
        if any(t < 0 for t in occupations):
            raise InvalidShape(f"Occupations must be non-negative, got {occupations}")
        object.__setattr__(self, "occupations", occupations)

    @classmethod
    def from_modes(cls, m: int, modes: Iterable[int]) -> "FockState":
        counts = np.bincount(np.asarray(list(modes), dtype=int), minlength=m)
        if counts.size != m:
            raise InvalidShape(f"Mode index outside 0..{m - 1}")
        return cls(tuple(counts))

    @property
    def m(self) -> int:
        return len(self.occupations)

    @property
    def n(self) -> int:
        return sum(self.occupations)

    @property
    def collision_free(self) -> bool:
        return all(t <= 1 for t in self.occupations)

    @property
    def modes(self) -> Tuple[int, ...]:
        """Occupied modes repeated by occupation, ascending."""
        return tuple(j for j, t in enumerate(self.occupations) for _ in range(t))

    def sparse(self) -> Dict[int, int]:
        return {j: t for j, t in enumerate(self.occupations) if t}


@dataclass(frozen=True)
class InputConfig:
    """Distinct input modes, one photon each."""

    modes: Tuple[int, ...]

    def __post_init__(self):
        modes = tuple(int(j) for j in self.modes)
        if len(set(modes)) != len(modes):
            raise InvalidShape(f"Input modes must be distinct, got {modes}")
        if any(j < 0 for j in modes):
            raise InvalidShape(f"Negative input mode in {modes}")
        object.__setattr__(self, "modes", modes)

    @property
    def n(self) -> int:
        return len(self.modes)

    @classmethod
    def from_ports(cls, device: DeviceModel, ports: Sequence[int]) -> "InputConfig":
        """Select input ports by position in the device's port map."""
        ports = [int(p) for p in ports]
        if any(not 0 <= p < len(device.input_ports) for p in ports):
            raise InvalidShape(f"Ports {ports} outside the {len(device.input_ports)} available input ports")
        return cls(tuple(device.input_ports[p] for p in ports))

    def check(self, m: int, device: Optional[DeviceModel] = None) -> None:
        if any(j >= m for j in self.modes):
            raise InvalidShape(f"Input modes {self.modes} outside 0..{m - 1}")
        if device is not None and not set(self.modes) <= set(device.input_ports):
            raise InvalidShape(f"Input modes {self.modes} are not all in the device input-port map")


@dataclass(frozen=True)
class SampleRecord:
    """One trial: its index, output state, sampler tag and post-selection flag."""

    t: int
    output: FockState
    tag: str
    kept: bool = True


def _check_sampler_input(u: UnitaryMatrix, input_config: InputConfig) -> None:
    input_config.check(u.m)
    if input_config.n > config.SAMPLER_MAX_PHOTONS:
        raise SizeLimit(f"Samplers support up to {config.SAMPLER_MAX_PHOTONS} photons, got {input_config.n}")


def _run_trials(count: int, trial: Callable[[int, np.random.Generator], SampleRecord], seed,
                threads: int = 1) -> List[SampleRecord]:
    """Evaluate ``trial`` for t = 0..count-1, each with its own generator."""
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")

    def run_chunk(start: int) -> List[SampleRecord]:
        stop = min(start + config.SAMPLE_CHUNK_SIZE, count)
        return [trial(t, seeding.trial_generator(seed, t)) for t in range(start, stop)]

    starts = range(0, count, config.SAMPLE_CHUNK_SIZE)
    if threads <= 1 or count <= config.SAMPLE_CHUNK_SIZE:
        chunks = [run_chunk(start) for start in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            chunks = list(executor.map(run_chunk, starts))
    return [record for chunk in chunks for record in chunk]


def _draw(weights: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(weights)
    index = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(index, len(weights) - 1)


def _sub_permanents(block: np.ndarray) -> np.ndarray:
    """Permanents of ``block`` (k x (k-1)) with each row removed in turn."""
    k = block.shape[0]
    minors = np.stack([np.delete(block, row, axis=0) for row in range(k)])
    if k - 1 <= config.BATCH_PERMANENT_MAX_SIZE:
        return batch_permanent(minors)
    return np.array([permanent(minor).value for minor in minors])


def _boson_modes(a: np.ndarray, rng: np.random.Generator) -> List[int]:
    """
    Sequential exact sampler.

    ``a`` holds one row per photon (the input columns of U, transposed). After
    a random relabelling of the photons, the k-th output mode is drawn from
    |sum_l perm(A[:k] minus row l, sampled modes) * A[l, j]|^2, which is the
    conditional marginal of the permanent law.
    """
    n = a.shape[0]
    if n == 0:
        return []
    if n > 1:
        a = a[rng.permutation(n)]
    modes = [_draw(np.abs(a[0]) ** 2, rng)]
    for k in range(2, n + 1):
        sub = _sub_permanents(a[:k][:, modes])
        scale = np.max(np.abs(sub))
        if scale > 0:
            sub = sub / scale
        weights = np.abs(sub @ a[:k]) ** 2
        modes.append(_draw(weights, rng))
    return modes


def sample_bs(u: UnitaryMatrix, input_config: InputConfig, count: int, seed=None,
              threads: int = 1) -> List[SampleRecord]:
    """
    Exact boson sampling draws, collision outputs included.

    Args:
        u (UnitaryMatrix): Interferometer
        input_config (InputConfig): Input modes
        count (int): Number of trials
        seed: Sampler seed (int or SeedSequence)
        threads (int): Worker threads (affects speed only)

    Returns:
        List[SampleRecord]: One record per trial, tag 'bs'
    """
    _check_sampler_input(u, input_config)
    a = np.ascontiguousarray(u.matrix[:, list(input_config.modes)].T)

    def trial(t: int, rng: np.random.Generator) -> SampleRecord:
        return SampleRecord(t, FockState.from_modes(u.m, _boson_modes(a, rng)), TAG_BS)

    return _run_trials(count, trial, seed, threads)


def _distinguishable_modes(cdfs: np.ndarray, rng: np.random.Generator) -> List[int]:
    draws = rng.random(cdfs.shape[0]) * cdfs[:, -1]
    return [min(int(np.searchsorted(cdf, x, side="right")), cdfs.shape[1] - 1) for cdf, x in zip(cdfs, draws)]


def sample_distinguishable(u: UnitaryMatrix, input_config: InputConfig, count: int, seed=None,
                           threads: int = 1) -> List[SampleRecord]:
    """Each photon independently lands in mode j with probability |u[j, i]|^2."""
    _check_sampler_input(u, input_config)
    cdfs = np.cumsum(np.abs(u.matrix[:, list(input_config.modes)].T) ** 2, axis=1)

    def trial(t: int, rng: np.random.Generator) -> SampleRecord:
        return SampleRecord(t, FockState.from_modes(u.m, _distinguishable_modes(cdfs, rng)), TAG_DIST)

    return _run_trials(count, trial, seed, threads)


def sample_uniform(m: int, n: int, count: int, seed=None, threads: int = 1) -> List[SampleRecord]:
    """Uniform draws over the C(m, n) collision-free outputs."""
    if n < 0 or m < 1 or n > m:
        raise InvalidShape(f"Uniform sampler needs 0 <= n <= m, got n={n}, m={m}")

    def trial(t: int, rng: np.random.Generator) -> SampleRecord:
        return SampleRecord(t, FockState.from_modes(m, rng.choice(m, size=n, replace=False)), TAG_UNIFORM)

    return _run_trials(count, trial, seed, threads)


def sample_mixture(u: UnitaryMatrix, input_config: InputConfig, noise: NoiseModel, count: int,
                   seed=None, threads: int = 1) -> List[SampleRecord]:
    """
    Partial distinguishability as a linear mixture: with probability
    noise.indistinguishability a trial follows the boson law, otherwise the
    distinguishable law. With noise.g2 > 0 a trial receives, with that
    probability, one extra distinguishable photon from a random input mode.
    """
    _check_sampler_input(u, input_config)
    x = noise.indistinguishability
    a = np.ascontiguousarray(u.matrix[:, list(input_config.modes)].T)
    cdfs = np.cumsum(np.abs(a) ** 2, axis=1)

    def trial(t: int, rng: np.random.Generator) -> SampleRecord:
        if rng.random() < x:
            modes = _boson_modes(a, rng)
        else:
            modes = _distinguishable_modes(cdfs, rng)
        if noise.g2 > 0 and input_config.n and rng.random() < noise.g2:
            extra = int(rng.integers(input_config.n))
            modes = modes + _distinguishable_modes(cdfs[extra:extra + 1], rng)
        return SampleRecord(t, FockState.from_modes(u.m, modes), TAG_MIXTURE)

    return _run_trials(count, trial, seed, threads)


def run_sampler(tag: str, u: UnitaryMatrix, input_config: InputConfig, count: int, seed=None,
                noise: Optional[NoiseModel] = None, threads: int = 1) -> List[SampleRecord]:
    """Dispatch by sampler tag."""
    if tag == TAG_BS:
        return sample_bs(u, input_config, count, seed, threads)
    if tag == TAG_DIST:
        return sample_distinguishable(u, input_config, count, seed, threads)
    if tag == TAG_UNIFORM:
        input_config.check(u.m)
        return sample_uniform(u.m, input_config.n, count, seed, threads)
    if tag == TAG_MIXTURE:
        return sample_mixture(u, input_config, noise or NoiseModel(), count, seed, threads)
    raise ValueError(f"Unknown sampler '{tag}', expected one of {SAMPLER_TAGS}")


def exact_distribution(u: UnitaryMatrix, input_config: InputConfig, scope: str = SCOPE_ALL,
                       particles: str = "bosons") -> ProbabilityTable:
    """
    Brute-force output distribution.

    Args:
        u (UnitaryMatrix): Interferometer
        input_config (InputConfig): Input modes (n <= config.EXACT_MAX_PHOTONS)
        scope (str): 'all' outputs, or 'collision-free' (renormalized)
        particles (str): 'bosons' (|perm|^2) or 'distinguishable' (perm of |.|^2)

    Returns:
        ProbabilityTable: Probability per output, keyed by sorted output modes
    """
    input_config.check(u.m)
    n, m = input_config.n, u.m
    if n > config.EXACT_MAX_PHOTONS:
        raise SizeLimit(f"exact_distribution supports up to {config.EXACT_MAX_PHOTONS} photons, got {n}")
    if scope not in (SCOPE_ALL, SCOPE_COLLISION_FREE):
        raise ValueError(f"Unknown scope '{scope}'")
    if particles not in ("bosons", "distinguishable"):
        raise ValueError(f"Unknown particle type '{particles}'")
    size = math.comb(m + n - 1, n) if scope == SCOPE_ALL else math.comb(m, n)
    if size > config.ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{size} outputs exceed the enumeration limit {config.ENUMERATION_LIMIT}")

    if scope == SCOPE_ALL:
        outputs = itertools.combinations_with_replacement(range(m), n)
    else:
        outputs = itertools.combinations(range(m), n)
    columns = u.matrix[:, list(input_config.modes)]
    if particles == "distinguishable":
        columns = np.abs(columns) ** 2

    table: ProbabilityTable = {}
    block = 100_000
    while True:
        keys = list(itertools.islice(outputs, block))
        if not keys:
            break
        rows = np.asarray(keys, dtype=int).reshape(len(keys), n)
        values = batch_permanent(columns[rows])
        weights = np.abs(values) ** 2 if particles == "bosons" else values.real
        factorials = np.array([math.prod(math.factorial(c) for c in np.unique(r, return_counts=True)[1])
                               for r in rows]) if scope == SCOPE_ALL else 1.0
        for key, p in zip(keys, weights / factorials):
            table[key] = float(p)

    if scope == SCOPE_COLLISION_FREE:
        total = math.fsum(table.values())
        if total > 0:
            table = {key: p / total for key, p in table.items()}
    logger.debug(f"Enumerated {len(table)} outputs ({scope}, {particles})")
    return table


def empirical_distribution(records: Sequence[SampleRecord], kept_only: bool = True) -> ProbabilityTable:
    """Relative frequencies of the recorded outputs."""
    pool = [r for r in records if r.kept or not kept_only]
    if not pool:
        return {}
    counts: Dict[Tuple[int, ...], int] = {}
    for record in pool:
        key = record.output.modes
        counts[key] = counts.get(key, 0) + 1
    return {key: c / len(pool) for key, c in counts.items()}


def total_variation_distance(p: ProbabilityTable, q: ProbabilityTable) -> float:
    """Half the L1 distance over the union of supports."""
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def filter_collision_free(records: Sequence[SampleRecord]) -> List[SampleRecord]:
    """Clear ``kept`` on records whose output has a multiply occupied mode."""
    return [r if r.output.collision_free else replace(r, kept=False) for r in records]


def filter_fold(records: Sequence[SampleRecord], fold: int) -> List[SampleRecord]:
    """Clear ``kept`` on records whose photon number differs from ``fold``."""
    return [r if r.output.n == fold else replace(r, kept=False) for r in records]


def kept(records: Sequence[SampleRecord]) -> List[SampleRecord]:
    return [r for r in records if r.kept]


def detect(records: Sequence[SampleRecord], device: DeviceModel, noise: NoiseModel, fold: int,
           seed=None) -> List[SampleRecord]:
    """
    Pass every record through the device measurement model.

    The output becomes the click pattern (0/1 per mode, unmeasured modes
    empty). Trials whose click count differs from ``fold`` are discarded:
    ``kept`` is cleared and the output left empty.
    """
    if fold < 0:
        raise ValueError(f"fold must be non-negative, got {fold}")
    empty = FockState((0,) * device.m)
    detected = []
    for record in records:
        clicks = apply_detector_model(device, noise, record.output, seeding.trial_generator(seed, record.t), fold=fold)
        if clicks is None:
            detected.append(replace(record, output=empty, kept=False))
        else:
            detected.append(replace(record, output=FockState.from_modes(device.m, clicks.modes)))
    n_kept = sum(r.kept for r in detected)
    logger.info(f"Detector model: {n_kept}/{len(detected)} trials kept at fold {fold}")
    return detected


def _sidecar(path: str) -> str:
    return f"{path}.meta.json"


def write_samples(records: Sequence[SampleRecord], path: str, m: int, seed=None) -> None:
    """
    Write records as JSONL with a JSON sidecar carrying m and the seed.

    Args:
        records: Records to write
        path (str): Destination .jsonl file
        m (int): Number of modes
        seed: Seed recorded in the sidecar
    """
    with open(path, "w") as file:
        for record in records:
            occupied = record.output.sparse()
            line = {
                "t": record.t,
                "modes": sorted(occupied),
                "occ": {str(j): c for j, c in sorted(occupied.items())},
                "tag": record.tag,
                "kept": record.kept,
            }
            file.write(json.dumps(line) + "\n")
    with open(_sidecar(path), "w") as file:
        json.dump({"m": m, "count": len(records), "seed": seed}, file, indent=2)


def read_samples(path: str, m: Optional[int] = None) -> Tuple[List[SampleRecord], int]:
    """
    Read a JSONL sample file.

    Args:
        path (str): Source file
        m (int, optional): Number of modes when the sidecar is missing

    Returns:
        Tuple[List[SampleRecord], int]: Records and number of modes
    """
    if m is None:
        if not os.path.exists(_sidecar(path)):
            raise DataError(f"{path}: number of modes unknown (no sidecar, no m given)")
        with open(_sidecar(path), "r") as file:
            m = int(json.load(file)["m"])
    records = []
    try:
        with open(path, "r") as file:
            for number, line in enumerate(file, start=1):
                if not line.strip():
                    continue
                data = json.loads(line)
                occupations = [0] * m
                for mode, count in data["occ"].items():
                    occupations[int(mode)] = int(count)
                records.append(SampleRecord(int(data["t"]), FockState(tuple(occupations)), data["tag"],
                                            bool(data["kept"])))
    except FileNotFoundError:
        raise DataError(f"Sample file not found: {path}")
    except (KeyError, ValueError, IndexError) as e:
        raise DataError(f"{path}: malformed sample record near line {number}: {e}")
    logger.info(f"Read {len(records)} samples over {m} modes from {path}")
    return records, m
