#!/usr/bin/env python3
"""
Randomness extraction from boson sampling events

Occupancy bits per output mode are unbiased mode by mode with the Von Neumann
extractor, concatenated in ascending mode order, rated by their plug-in
min-entropy and conditioned with SHA-256 over blocks of L = ceil(256 / H_min)
bits. The final stream is checked with the NIST SP 800-22 battery.
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

import config
import nist_tests
from errors import InsufficientData, InvalidEntropy, InvalidShape, ShapeMismatch
from nist_tests import TestResult
from sampling import SampleRecord

logger = logging.getLogger(__name__)

STAGE_RAW = "raw"
STAGE_VN = "vn"
STAGE_HASHED = "hashed"
STAGES = (STAGE_RAW, STAGE_VN, STAGE_HASHED)


@dataclass(eq=False)
class BitMatrix:
    """T trials x m mode-occupancy bits; row t is trial ``trials[t]``."""

    bits: np.ndarray
    trials: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise InvalidShape(f"Bit matrix must be 2-D, got shape {self.bits.shape}")
        if np.any(self.bits > 1):
            raise InvalidShape("Bit matrix holds values other than 0/1")
        self.trials = np.asarray(self.trials, dtype=np.int64)
        if self.trials.shape != (self.bits.shape[0],):
            raise ShapeMismatch("One trial index per row required")

    @property
    def m(self) -> int:
        return self.bits.shape[1]

    def column(self, mode: int) -> "BitStream":
        return BitStream(self.bits[:, mode], STAGE_RAW, mode=mode)


@dataclass(eq=False)
class BitStream:
    """Ordered bits with their processing stage and optional annotations."""

    bits: np.ndarray
    stage: str
    mode: Optional[int] = None
    h_min: Optional[float] = None
    block_size: Optional[int] = None

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8).ravel()
        if self.stage not in STAGES:
            raise ValueError(f"Unknown stream stage '{self.stage}'")
        if np.any(self.bits > 1):
            raise InvalidShape("Bit stream holds values other than 0/1")
        if self.stage == STAGE_HASHED and self.bits.size % config.HASH_OUTPUT_BITS:
            raise InvalidShape(f"Hashed stream length {self.bits.size} is not a multiple of {config.HASH_OUTPUT_BITS}")

    def __len__(self) -> int:
        return int(self.bits.size)


@dataclass
class RandomnessReport:
    trials: int
    kept_trials: int
    raw_bits: int
    vn_lengths: Dict[int, int]
    vn_bits: int
    h_min: float
    block_size: int
    block_length: int
    hashed_bits: int
    bits_per_trial: float
    tests: List[TestResult] = field(default_factory=list)
    h_min_profile: Dict[int, float] = field(default_factory=dict)

    @property
    def tests_passed(self) -> bool:
        """Every computed test passed (skipped tests do not count)."""
        computed = [t for t in self.tests if not t.skipped]
        return bool(computed) and all(t.passed for t in computed)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "kept_trials": self.kept_trials,
            "raw_bits": self.raw_bits,
            "vn_bits": self.vn_bits,
            "vn_lengths": {str(mode): length for mode, length in sorted(self.vn_lengths.items())},
            "h_min": self.h_min,
            "block_size": self.block_size,
            "block_length": self.block_length,
            "hashed_bits": self.hashed_bits,
            "bits_per_trial": self.bits_per_trial,
            "h_min_profile": {str(b): h for b, h in sorted(self.h_min_profile.items())},
            "tests": [t.to_dict() for t in self.tests],
            "tests_passed": self.tests_passed,
        }


def encode_occupancy(samples: Sequence[SampleRecord], m: int, kept_only: bool = True) -> BitMatrix:
    """
    Threshold occupancy bits: b[t, j] = 1 iff mode j clicked in trial t.

    Args:
        samples: Sample records in trial order
        m (int): Number of modes
        kept_only (bool): Encode only post-selected records

    Returns:
        BitMatrix: One row per encoded trial
    """
    pool = [s for s in samples if s.kept or not kept_only]
    bits = np.zeros((len(pool), m), dtype=np.uint8)
    for row, sample in enumerate(pool):
        if sample.output.m != m:
            raise ShapeMismatch(f"Trial {sample.t} has {sample.output.m} modes, expected {m}")
        bits[row] = np.asarray(sample.output.occupations) > 0
    return BitMatrix(bits, np.array([s.t for s in pool], dtype=np.int64))


def von_neumann(stream: BitStream) -> BitStream:
    """
    Von Neumann unbiasing over non-overlapping pairs: (0,1) -> 0, (1,0) -> 1,
    equal pairs and a trailing odd bit are dropped.
    """
    pairs = stream.bits[: 2 * (stream.bits.size // 2)].reshape(-1, 2)
    differ = pairs[:, 0] != pairs[:, 1]
    return BitStream(pairs[differ, 0], STAGE_VN, mode=stream.mode)


def min_entropy(stream: BitStream, block_size: int = config.DEFAULT_BLOCK_SIZE) -> float:
    """
    Plug-in min-entropy per bit: -log2(max block frequency) / block_size over
    non-overlapping blocks.

    Args:
        stream (BitStream): Bits to rate
        block_size (int): Block size in bits, 1..config.MAX_BLOCK_SIZE

    Returns:
        float: H_min in bits per bit, within [0, 1]
    """
    if not 1 <= block_size <= config.MAX_BLOCK_SIZE:
        raise InvalidShape(f"Block size must lie in 1..{config.MAX_BLOCK_SIZE}, got {block_size}")
    n_blocks = stream.bits.size // block_size
    if n_blocks == 0:
        raise InsufficientData(f"Stream of {stream.bits.size} bits has no complete {block_size}-bit block")
    if stream.bits.size < 100 * 2 ** block_size:
        logger.warning(f"Min-entropy at block size {block_size} from only {stream.bits.size} bits "
                       f"(recommended {100 * 2 ** block_size})")
    weights = 1 << np.arange(block_size - 1, -1, -1, dtype=np.int64)
    values = stream.bits[: n_blocks * block_size].reshape(n_blocks, block_size).astype(np.int64) @ weights
    p_max = np.bincount(values, minlength=2 ** block_size).max() / n_blocks
    return float(min(1.0, max(0.0, -math.log2(p_max) / block_size)))


def min_entropy_profile(stream: BitStream, block_sizes: Sequence[int] = range(1, config.MAX_BLOCK_SIZE + 1)) -> Dict[int, float]:
    """H_min for each block size with at least one complete block."""
    return {b: min_entropy(stream, b) for b in block_sizes if stream.bits.size >= b}


def block_length(h_min: float) -> int:
    """Input bits per SHA-256 block, L = ceil(256 / H_min)."""
    if not 0.0 < h_min <= 1.0:
        raise InvalidEntropy(f"Min-entropy must lie in (0, 1], got {h_min}")
    return int(math.ceil(config.HASH_OUTPUT_BITS / h_min - 1e-9))


def condition_hash(stream: BitStream, h_min: float) -> BitStream:
    """
    Compress blocks of L = ceil(256 / H_min) bits with SHA-256.

    Each block is packed big-endian into bytes (zero padded to a byte boundary)
    and hashed; the 256-bit digests are concatenated in block order and a
    trailing partial block is discarded.

    Args:
        stream (BitStream): Unbiased bits
        h_min (float): Min-entropy per bit, in (0, 1]

    Returns:
        BitStream: Hashed stream, a multiple of 256 bits long
    """
    length = block_length(h_min)
    n_blocks = stream.bits.size // length
    blocks = stream.bits[: n_blocks * length].reshape(n_blocks, length)
    digests = [hashlib.sha256(np.packbits(block).tobytes()).digest() for block in blocks]
    bits = np.unpackbits(np.frombuffer(b"".join(digests), dtype=np.uint8)) if digests else np.zeros(0, np.uint8)
    logger.info(f"Hashed {n_blocks} blocks of {length} bits into {bits.size} bits "
                f"({stream.bits.size - n_blocks * length} trailing bits dropped)")
    return BitStream(bits, STAGE_HASHED, h_min=h_min)


def nist_suite(stream: BitStream, p_th: float = config.P_THRESHOLD) -> List[TestResult]:
    """Run the fifteen SP 800-22 tests; short streams yield skipped results."""
    return nist_tests.run_suite(stream.bits, p_th)


def per_mode_von_neumann(matrix: BitMatrix, threads: int = 1) -> List[BitStream]:
    """Von Neumann extraction of every mode's time-ordered column."""
    columns = [matrix.column(mode) for mode in range(matrix.m)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(von_neumann, columns))
    return [von_neumann(column) for column in columns]


def concatenate(streams: Sequence[BitStream], stage: str = STAGE_VN) -> BitStream:
    """Concatenate per-mode streams in ascending mode order."""
    ordered = sorted(streams, key=lambda s: -1 if s.mode is None else s.mode)
    bits = np.concatenate([s.bits for s in ordered]) if ordered else np.zeros(0, np.uint8)
    return BitStream(bits, stage)


def pipeline(samples: Sequence[SampleRecord], m: int, block_size: int = config.DEFAULT_BLOCK_SIZE,
             p_th: float = config.P_THRESHOLD, threads: int = 1, profile: bool = False,
             run_tests: bool = True):
    """
    Samples to conditioned random bits.

    Args:
        samples: Sample records (post-selected ones are used)
        m (int): Number of modes
        block_size (int): Min-entropy block size
        p_th (float): Test threshold
        threads (int): Worker threads for per-mode extraction
        profile (bool): Also record H_min for block sizes 1..16
        run_tests (bool): Run the statistical suite on the hashed stream

    Returns:
        Tuple[RandomnessReport, BitStream, BitStream]: Report, VN stream, hashed stream
    """
    matrix = encode_occupancy(samples, m)
    per_mode = per_mode_von_neumann(matrix, threads)
    vn = concatenate(per_mode)
    if len(vn) == 0:
        raise InsufficientData("Von Neumann extraction produced no bits")
    h_min = min_entropy(vn, block_size)
    vn.h_min, vn.block_size = h_min, block_size
    hashed = condition_hash(vn, h_min)
    hashed.block_size = block_size
    tests = nist_suite(hashed, p_th) if run_tests else []
    report = summarize(len(samples), matrix, per_mode, vn, hashed, tests, profile)
    return report, vn, hashed


def summarize(trials: int, matrix: BitMatrix, per_mode: Sequence[BitStream], vn: BitStream,
              hashed: BitStream, tests: List[TestResult], profile: bool = False) -> RandomnessReport:
    """Collect the per-stage lengths of one extraction into a report."""
    report = RandomnessReport(
        trials=trials,
        kept_trials=matrix.bits.shape[0],
        raw_bits=int(matrix.bits.size),
        vn_lengths={s.mode: len(s) for s in per_mode},
        vn_bits=len(vn),
        h_min=vn.h_min,
        block_size=vn.block_size,
        block_length=block_length(vn.h_min),
        hashed_bits=len(hashed),
        bits_per_trial=len(hashed) / trials if trials else 0.0,
        tests=list(tests),
        h_min_profile=min_entropy_profile(vn) if profile else {},
    )
    logger.info(f"Extraction: {report.kept_trials} trials -> {report.raw_bits} raw, {report.vn_bits} VN, "
                f"{report.hashed_bits} hashed bits (H_min {report.h_min:.4f}, L {report.block_length})")
    return report


def save_bitstream(stream: BitStream, path: str, seed=None) -> None:
    """Write packed bits to ``path`` and a JSON sidecar next to it."""
    with open(path, "wb") as file:
        file.write(np.packbits(stream.bits).tobytes())
    sidecar = {
        "stage": stream.stage,
        "length": len(stream),
        "h_min": stream.h_min,
        "block_size": stream.block_size,
        "mode": stream.mode,
        "seed": seed,
    }
    with open(f"{path}.json", "w") as file:
        json.dump(sidecar, file, indent=2)


def load_bitstream(path: str) -> BitStream:
    """Read a stream written by save_bitstream."""
    with open(f"{path}.json", "r") as file:
        meta = json.load(file)
    with open(path, "rb") as file:
        packed = np.frombuffer(file.read(), dtype=np.uint8)
    bits = np.unpackbits(packed)[: int(meta["length"])]
    return BitStream(bits, meta["stage"], mode=meta.get("mode"), h_min=meta.get("h_min"),
                     block_size=meta.get("block_size"))
