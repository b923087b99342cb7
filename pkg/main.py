#!/usr/bin/env python3
"""
LatticeBS - Boson Sampling simulator, validator and random bit generator

Command-line front end. Every subcommand fronts one module operation (or a
fixed composition of them), writes its artifacts into the output directory
next to a manifest of content hashes, and records the run in the run registry.

    python main.py pipeline --config demo_experiment.json --out output
    python main.py figure validation --config demo_experiment.json
    python main.py history
"""

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
import uuid
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy

import config
import randomness
import seeding
from database import RunDatabase
from errors import ConfigError, DataError, LatticeBSError, StageError, ValidationFailed
from lattice_device import DeviceModel, NoiseModel, evolve, load_device, random_power_vector, save_device
from reconstruction import gauge_distance, load_counts, reconstruct, save_counts, simulate_counts
from sampling import (SAMPLER_TAGS, TAG_BS, TAG_DIST, TAG_UNIFORM, InputConfig, SampleRecord, detect,
                      filter_collision_free, filter_fold, kept, read_samples, run_sampler, write_samples)
from unitary_core import UnitaryMatrix, haar_unitaries, haar_unitary, load_unitary, save_unitary
from validation import (BENCHMARK_COLUMN, BENCHMARK_MODES, BENCHMARK_MODULI, BENCHMARK_TWO_PHOTON, ValidationTrace,
                        ck_counter, device_benchmark, haar_benchmark, save_report, save_trace, wk_counter)

logger = logging.getLogger(__name__)

BUNDLE_DIR = os.path.dirname(os.path.abspath(__file__))

SOURCE_DEVICE = "device"
SOURCE_HAAR = "haar"
NOISE_FIELDS = ("indistinguishability", "g2", "efficiency")
FIGURE_TARGETS = ("haar", "device", "validation", "randomness")


def configure_logging() -> None:
    """basicConfig with the project format; the level comes from the environment."""
    level = os.environ.get(config.LOG_LEVEL_ENV, config.DEFAULT_LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=config.LOG_FORMAT)


def _resolve(path: str, base: str) -> str:
    """Absolute paths stay; relative ones are tried under ``base``, then the bundle directory."""
    if os.path.isabs(path):
        return path
    candidate = os.path.join(base, path)
    if os.path.exists(candidate):
        return candidate
    bundled = os.path.join(BUNDLE_DIR, path)
    return bundled if os.path.exists(bundled) else candidate


@dataclass
class ExperimentConfig:
    """
    One reproducible experiment.

    ``unitary`` selects the interferometer: 'device' evolves the lattice device
    described by ``device`` at random heater powers, 'haar' draws Haar-random
    m x m matrices, anything else is the path of a stored unitary. One matrix
    is drawn per power setting.
    """

    device: str = config.DEFAULT_DEVICE_FILE
    unitary: str = SOURCE_DEVICE
    m: int = 16
    seed: int = 0
    n: int = 3
    inputs: Optional[List[int]] = None
    active_heaters: int = config.N_USABLE_HEATERS
    p_max: float = config.P_MAX_MW
    draws: int = 20000
    power_settings: int = 1
    sampler: str = TAG_BS
    noise: Dict[str, float] = field(default_factory=dict)
    block_size: int = config.DEFAULT_BLOCK_SIZE
    p_th: float = config.P_THRESHOLD
    validation_events: Optional[int] = None
    output_dir: str = config.DEFAULT_OUTPUT_DIR

    def check(self) -> "ExperimentConfig":
        """
        Coerce field types and validate ranges.

        Returns:
            ExperimentConfig: self

        Raises:
            ConfigError: On any invalid field
        """
        try:
            for name in ("m", "seed", "n", "active_heaters", "draws", "power_settings", "block_size"):
                setattr(self, name, int(getattr(self, name)))
            self.p_max, self.p_th = float(self.p_max), float(self.p_th)
            if self.inputs is not None:
                self.inputs = [int(j) for j in self.inputs]
            if self.validation_events is not None:
                self.validation_events = int(self.validation_events)
            self.noise = dict(self.noise or {})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid experiment field: {e}")

        if not 1 <= self.n <= config.CK_MAX_PHOTONS:
            raise ConfigError(f"Photon number must lie in 1..{config.CK_MAX_PHOTONS}, got {self.n}")
        if self.inputs is not None:
            if len(self.inputs) < self.n:
                raise ConfigError(f"{self.n} photons need at least {self.n} input modes, got {self.inputs}")
            if len(set(self.inputs[:self.n])) != self.n:
                raise ConfigError(f"Input modes must be distinct, got {self.inputs[:self.n]}")
        if self.seed < 0:
            raise ConfigError(f"Seed must be non-negative, got {self.seed}")
        if self.sampler not in SAMPLER_TAGS:
            raise ConfigError(f"Unknown sampler '{self.sampler}', expected one of {SAMPLER_TAGS}")
        if self.draws < 1 or self.power_settings < 1:
            raise ConfigError("draws and power_settings must be positive")
        if self.validation_events is not None and self.validation_events < 1:
            raise ConfigError("validation_events must be positive")
        if not 1 <= self.block_size <= config.MAX_BLOCK_SIZE:
            raise ConfigError(f"block_size must lie in 1..{config.MAX_BLOCK_SIZE}, got {self.block_size}")
        if not 0.0 < self.p_th < 1.0:
            raise ConfigError(f"p_th must lie in (0, 1), got {self.p_th}")
        unknown = set(self.noise) - set(NOISE_FIELDS)
        if unknown:
            raise ConfigError(f"Unknown noise fields {sorted(unknown)}, expected {NOISE_FIELDS}")
        if self.unitary == SOURCE_HAAR and self.m < self.n:
            raise ConfigError(f"Haar dimension {self.m} is smaller than the photon number {self.n}")
        if self.unitary == SOURCE_DEVICE and not os.path.exists(self.device):
            raise ConfigError(f"Device file not found: {self.device}")
        if self.unitary not in (SOURCE_DEVICE, SOURCE_HAAR) and not os.path.exists(self.unitary):
            raise ConfigError(f"Unitary file not found: {self.unitary}")
        return self

    def file_fields(self) -> List[str]:
        """Fields holding file paths: the device always, the unitary unless it names a source."""
        return [name for name in ("device", "unitary")
                if name == "device" or self.unitary not in (SOURCE_DEVICE, SOURCE_HAAR)]

    def snapshot(self, artifact: bool = False, relative_to: Optional[str] = None) -> dict:
        """
        Field values. ``artifact`` drops the output directory so reports do not
        depend on it; ``relative_to`` records file paths relative to that directory.
        """
        values = asdict(self)
        if artifact:
            values.pop("output_dir")
        if relative_to is not None:
            base = os.path.abspath(relative_to)
            for name in self.file_fields():
                values[name] = os.path.relpath(os.path.abspath(values[name]), base)
            if "output_dir" in values:
                values["output_dir"] = os.curdir
        return values

    def config_hash(self) -> str:
        """SHA-256 of the artifact snapshot with referenced files identified by their content."""
        values = self.snapshot(artifact=True)
        for name in self.file_fields():
            path = values[name]
            values[name] = sha256_file(path) if os.path.isfile(path) else os.path.basename(path)
        return hashlib.sha256(json.dumps(values, sort_keys=True).encode()).hexdigest()


def load_experiment_config(path: str) -> ExperimentConfig:
    """
    Load an experiment configuration file.

    Relative device and unitary paths are resolved against the directory of
    the configuration file.

    Args:
        path (str): JSON experiment configuration

    Returns:
        ExperimentConfig: Validated configuration

    Raises:
        ConfigError: Missing file, malformed JSON, unknown or invalid fields
    """
    if not os.path.exists(path):
        raise ConfigError(f"Experiment file not found: {path}")
    try:
        with open(path, 'r') as file:
            data = json.load(file)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Error parsing {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")

    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")

    cfg = ExperimentConfig(**data)
    base = os.path.dirname(os.path.abspath(path))
    cfg.device = _resolve(cfg.device, base)
    if cfg.unitary not in (SOURCE_DEVICE, SOURCE_HAAR):
        cfg.unitary = _resolve(cfg.unitary, base)
    return cfg.check()


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Experiment file (or defaults) overridden by the command-line flags."""
    if args.config:
        cfg = load_experiment_config(args.config)
    else:
        cfg = ExperimentConfig()
        cfg.device = _resolve(cfg.device, os.getcwd())
    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)
                 if getattr(args, f.name, None) is not None}
    return replace(cfg, **overrides).check()


@dataclass
class RunManifest:
    """Everything needed to audit one run: configuration, artifact hashes, timings, versions."""

    run_id: str
    command: str
    seed: int
    config: dict
    config_hash: str
    status: str = "ok"
    artifacts: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    metrics: Dict[str, float] = field(default_factory=dict)
    versions: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as file:
        for chunk in iter(lambda: file.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _list_files(directory: str) -> List[str]:
    found = []
    for root, _, names in os.walk(directory):
        for name in names:
            found.append(os.path.relpath(os.path.join(root, name), directory))
    return sorted(found)


def _versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        config.PROJECT_NAME: config.VERSION,
    }


class Run:
    """
    Output directory of one command: stage timing, manifest writing and removal
    of partial outputs on failure.
    """

    def __init__(self, command: str, cfg: ExperimentConfig, threads: int = 1):
        self.cfg = cfg
        self.threads = max(1, int(threads))
        self.out_dir = cfg.output_dir
        self.created_dir = not os.path.isdir(self.out_dir)
        os.makedirs(self.out_dir, exist_ok=True)
        self.existing = set(_list_files(self.out_dir))
        run_id = f"{command}-{datetime.now().strftime('%Y%m%d-%H%M%S')}-{uuid.uuid4().hex[:8]}"
        self.manifest = RunManifest(run_id, command, cfg.seed, cfg.snapshot(relative_to=self.out_dir),
                                    cfg.config_hash(), versions=_versions())

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    @contextmanager
    def stage(self, name: str, tagged: bool = False):
        """
        Time a stage. With ``tagged``, unexpected failures become StageError(name);
        configuration errors, data errors and validation outcomes pass through.
        """
        start = time.perf_counter()
        logger.info(f"Stage {name} started")
        try:
            yield
        except (ConfigError, DataError, ValidationFailed, StageError):
            raise
        except Exception as e:
            if tagged:
                raise StageError(name, str(e)) from e
            raise
        finally:
            elapsed = time.perf_counter() - start
            self.manifest.timings[name] = self.manifest.timings.get(name, 0.0) + elapsed
            logger.info(f"Stage {name} finished in {elapsed:.3f} s")

    def finish(self, status: str) -> dict:
        """Hash every file in the output directory and write the manifest."""
        self.manifest.status = status
        self.manifest.artifacts = {
            name: sha256_file(self.path(name)) for name in _list_files(self.out_dir)
            if name != config.MANIFEST_FILE
        }
        payload = self.manifest.to_dict()
        with open(self.path(config.MANIFEST_FILE), 'w') as file:
            json.dump(payload, file, indent=2)
        return payload

    def discard(self) -> None:
        """Remove every file this run created, and the directory if it created it."""
        for name in _list_files(self.out_dir):
            if name not in self.existing:
                try:
                    os.remove(self.path(name))
                except OSError as e:
                    logger.error(f"Could not remove partial output {name}: {e}")
        if self.created_dir:
            for root, _, _ in sorted(os.walk(self.out_dir), key=lambda entry: -len(entry[0])):
                try:
                    os.rmdir(root)
                except OSError:
                    pass


class Experiment:
    """
    A configuration resolved into objects: the device (if any), the noise
    model, the input modes and the measured output modes.
    """

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.device: Optional[DeviceModel] = None
        self.fixed: Optional[UnitaryMatrix] = None
        noise = NoiseModel()
        if cfg.unitary == SOURCE_DEVICE:
            self.device, noise = load_device(cfg.device)
            self.m = self.device.m
        elif cfg.unitary == SOURCE_HAAR:
            self.m = cfg.m
        else:
            self.fixed = _load_unitary_file(cfg.unitary)
            self.m = self.fixed.m
        try:
            self.noise = replace(noise, **cfg.noise)
        except ValueError as e:
            raise ConfigError(f"Invalid noise override: {e}")

        try:
            if cfg.inputs is not None:
                self.inputs = InputConfig(tuple(cfg.inputs[:cfg.n]))
            elif self.device is not None:
                self.inputs = InputConfig.from_ports(self.device, range(cfg.n))
            else:
                self.inputs = InputConfig(tuple(range(cfg.n)))
            self.inputs.check(self.m, self.device)
        except ValueError as e:
            raise ConfigError(f"Invalid input modes: {e}")

    @property
    def measured(self) -> Optional[List[int]]:
        return list(self.device.measured_modes) if self.device is not None else None

    def unitary(self, setting: int) -> Tuple[UnitaryMatrix, Optional[np.ndarray]]:
        """Interferometer of one power setting, with its heater powers when a device is used."""
        if self.device is not None:
            powers = random_power_vector(self.device, self.cfg.active_heaters, self.cfg.p_max,
                                         seeding.stream(self.cfg.seed, "powers", setting))
            return evolve(self.device, powers), powers
        if self.fixed is not None:
            return self.fixed, None
        return haar_unitary(self.m, seeding.stream(self.cfg.seed, "haar", setting)), None

    def sample(self, u: UnitaryMatrix, setting: int, tag: Optional[str] = None,
               threads: int = 1) -> List[SampleRecord]:
        """Draws of one setting; trial indices continue across settings."""
        records = run_sampler(tag or self.cfg.sampler, u, self.inputs, self.cfg.draws,
                              seeding.stream(self.cfg.seed, "sampler", setting), self.noise, threads)
        offset = setting * self.cfg.draws
        return [replace(r, t=r.t + offset) for r in records] if offset else records

    def post_select(self, records: List[SampleRecord]) -> List[SampleRecord]:
        """Device measurement model, or plain n-fold collision-free post-selection without a device."""
        if self.device is not None:
            return detect(records, self.device, self.noise, self.cfg.n, seeding.stream(self.cfg.seed, "detector"))
        return filter_collision_free(filter_fold(records, self.cfg.n))

    def validate(self, u: UnitaryMatrix, records: List[SampleRecord]) -> Tuple[ValidationTrace, ValidationTrace]:
        """W_k on collision-free n-fold events, C_k on all n-fold events."""
        budget = self.cfg.validation_events
        n_fold = kept(filter_fold(records, self.cfg.n))
        collision_free = kept(filter_collision_free(n_fold))
        wk = wk_counter(u, self.inputs, collision_free[:budget], modes=self.measured, seed=self.cfg.seed)
        ck = ck_counter(u, self.inputs, n_fold[:budget], seed=self.cfg.seed)
        return wk, ck


def _load_unitary_file(path: str) -> UnitaryMatrix:
    try:
        return load_unitary(path)
    except FileNotFoundError:
        raise DataError(f"Unitary file not found: {path}")
    except (json.JSONDecodeError, ValueError) as e:
        raise DataError(f"{path}: {e}")


def _read_samples(path: str, m: int) -> List[SampleRecord]:
    records, m_file = read_samples(path, m if not os.path.exists(f"{path}.meta.json") else None)
    if m_file != m:
        raise DataError(f"{path} holds {m_file}-mode samples, the experiment has {m} modes")
    return records


def _write_json(path: str, payload: dict) -> None:
    with open(path, 'w') as file:
        json.dump(payload, file, indent=2)


def _trace_summary(trace: ValidationTrace) -> dict:
    return {
        "events": int(len(trace.counter)),
        "final": trace.final,
        "band": float(trace.band[-1]) if len(trace.band) else 0.0,
        "rejected": trace.rejected,
        "exits_upward": trace.exits_upward,
        "skipped": trace.skipped,
    }


def print_header(title: str, cfg: ExperimentConfig) -> None:
    print("=" * 70)
    print(f"LATTICEBS - {title}")
    print("=" * 70)
    source = cfg.unitary if cfg.unitary in (SOURCE_DEVICE, SOURCE_HAAR) else os.path.basename(cfg.unitary)
    print(f"Unitary source: {source}   Photons: {cfg.n}   Sampler: {cfg.sampler}   Seed: {cfg.seed}")
    print(f"Output directory: {cfg.output_dir}")
    print("=" * 70)


def print_validation_table(rows: List[dict]) -> None:
    print("\nVALIDATION:")
    print("-" * 90)
    print(f"{'Setting':<9} {'Kept':<8} {'W_k':<8} {'Band':<9} {'Uniform':<10} {'C_k':<8} {'Skipped':<8} {'Distinguishable':<15}")
    print("-" * 90)
    for row in rows:
        wk, ck = row["wk"], row["ck"]
        print(f"{row['setting']:<9} {row['kept']:<8} {wk['final']:<8} {wk['band']:<9.1f} "
              f"{'✓ rejected' if wk['rejected'] else '✗ kept':<10} {ck['final']:<8} {ck['skipped']:<8} "
              f"{'✓ rejected' if ck['rejected'] else '✗ kept':<15}")


def print_nist_table(tests: List[dict]) -> None:
    print("\nSTATISTICAL TESTS:")
    print("-" * 70)
    print(f"{'Test':<28} {'p-value(s)':<30} {'Result':<10}")
    print("-" * 70)
    for test in tests:
        if test["skipped"]:
            values, result = "-", "- skipped"
        else:
            values = ", ".join(f"{p:.{config.P_VALUE_DECIMAL_PLACES}f}" for p in test["p_values"][:3])
            if len(test["p_values"]) > 3:
                values += ", ..."
            result = "✓ pass" if test["pass"] else "✗ fail"
        print(f"{test['test']:<28} {values:<30} {result:<10}")


def cmd_haar(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    """Haar-random unitaries: unitary.json, or unitary_000.json ... for several."""
    with run.stage("haar"):
        unitaries = list(haar_unitaries(cfg.m, args.count, seeding.stream(cfg.seed, "haar")))
        for index, u in enumerate(unitaries):
            name = "unitary.json" if args.count == 1 else f"unitary_{index:03d}.json"
            save_unitary(u, run.path(name))
    print(f"✓ {len(unitaries)} Haar-random {cfg.m}x{cfg.m} unitaries written to {cfg.output_dir}")


def cmd_evolve(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    """Device unitary at given (or random) heater powers."""
    device, noise = load_device(cfg.device)
    if args.powers:
        try:
            with open(args.powers, 'r') as file:
                powers = np.asarray(json.load(file)["powers"], dtype=float)
        except FileNotFoundError:
            raise DataError(f"Power file not found: {args.powers}")
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{args.powers}: malformed power file ({e})")
    else:
        powers = random_power_vector(device, cfg.active_heaters, cfg.p_max, seeding.stream(cfg.seed, "powers", 0))
    with run.stage("evolve"):
        u = evolve(device, powers)
    save_unitary(u, run.path("unitary.json"))
    save_device(device, run.path("device.json"), noise)
    _write_json(run.path("powers.json"), {"powers": [float(p) for p in powers],
                                          "active_heaters": int(np.count_nonzero(powers)), "seed": cfg.seed})
    print(f"✓ Device unitary ({u.m} modes, defect {u.defect:.2e}) written to {cfg.output_dir}")


def cmd_sample(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    """Draws from the first setting of the configured source, optionally through the detector model."""
    exp = Experiment(cfg)
    u, _ = exp.unitary(0)
    with run.stage("sample"):
        records = exp.sample(u, 0, threads=run.threads)
    if args.detect:
        with run.stage("detector"):
            records = exp.post_select(records)
    save_unitary(u, run.path("unitary.json"))
    write_samples(records, run.path("samples.jsonl"), exp.m, cfg.seed)
    print(f"✓ {len(records)} '{cfg.sampler}' samples ({len(kept(records))} kept) written to {cfg.output_dir}")


def cmd_validate(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    """W_k and C_k traces of a sample file; fails unless both nulls are rejected."""
    exp = Experiment(cfg)
    u, _ = exp.unitary(0)
    records = _read_samples(args.samples, exp.m)
    with run.stage("validate"):
        wk, ck = exp.validate(u, records)
    save_trace(wk, run.path("wk_trace.csv"))
    save_trace(ck, run.path("ck_trace.csv"))
    row = {"setting": 0, "kept": len(kept(records)), "wk": _trace_summary(wk), "ck": _trace_summary(ck)}
    _write_json(run.path("validation.json"), {**row, "seed": cfg.seed})
    print_validation_table([row])
    if not (wk.rejected and ck.rejected):
        raise ValidationFailed("Samples do not reject both the uniform and the distinguishable null")


def cmd_reconstruct(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    """Reconstruct a submatrix from a counts file, or from counts simulated on the configured unitary."""
    truth = None
    if args.counts:
        try:
            counts = load_counts(args.counts)
        except FileNotFoundError:
            raise DataError(f"Counts file not found: {args.counts}")
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise DataError(f"{args.counts}: {e}")
    else:
        exp = Experiment(cfg)
        u, _ = exp.unitary(0)
        inputs = args.rec_inputs or list(exp.inputs.modes)
        outputs = args.rec_outputs or (exp.measured or list(range(exp.m)))[:8]
        with run.stage("simulate"):
            counts = simulate_counts(u, inputs, outputs, args.shots, seeding.stream(cfg.seed, "counts"),
                                     expected=args.expected)
        counts.seed = cfg.seed
        save_counts(counts, run.path("counts.json"))
        # Singles are normalized per input over the recorded outputs
        truth = u.submatrix(outputs, inputs)
        truth = truth / np.linalg.norm(truth, axis=0)
    with run.stage("reconstruct"):
        result = reconstruct(counts)
    payload = {**result.to_dict(), "seed": cfg.seed}
    if truth is not None:
        payload["gauge_distance"] = gauge_distance(result, truth, conjugate=True)
    _write_json(run.path("reconstruction.json"), payload)

    print(f"✓ Reconstructed {len(result.outputs)}x{len(result.inputs)} submatrix, "
          f"{int(result.resolved.sum())} phases resolved, rms closure residual {result.rms_residual:.2e}")
    if truth is not None:
        print(f"  Gauge distance to the simulated matrix: {payload['gauge_distance']:.2e}")


def cmd_extract(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    """Sample file to Von Neumann and hashed bit streams."""
    records, m = read_samples(args.samples)
    with run.stage("extract"):
        report, vn, hashed = randomness.pipeline(records, m, cfg.block_size, cfg.p_th, run.threads,
                                                 profile=args.profile, run_tests=False)
    randomness.save_bitstream(vn, run.path("vn.bin"), cfg.seed)
    randomness.save_bitstream(hashed, run.path("hashed.bin"), cfg.seed)
    save_report(report, run.path("extraction.json"), cfg.seed)
    print(f"✓ {report.kept_trials} trials -> {report.vn_bits} VN bits -> {report.hashed_bits} hashed bits "
          f"(H_min {report.h_min:.4f}, {report.bits_per_trial:.3f} bits/trial)")


def cmd_nist(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    """Statistical test battery on a stored bit stream."""
    try:
        stream = randomness.load_bitstream(args.bits)
    except FileNotFoundError as e:
        raise DataError(f"Bit stream not found: {e.filename}")
    except (json.JSONDecodeError, KeyError, ValueError) as e:
        raise DataError(f"{args.bits}: {e}")
    with run.stage("nist"):
        tests = randomness.nist_suite(stream, cfg.p_th)
    results = [t.to_dict() for t in tests]
    _write_json(run.path("nist.json"), {"bits": len(stream), "p_th": cfg.p_th, "tests": results, "seed": cfg.seed})
    print_nist_table(results)
    failed = [t.test for t in tests if not t.skipped and not t.passed]
    if failed:
        raise ValidationFailed(f"Statistical tests failed: {failed}")


def _figure_haar(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    exp = Experiment(cfg)
    m, restricted = exp.m, exp.measured
    seed = seeding.stream(cfg.seed, "haar")
    histogram = haar_benchmark(BENCHMARK_MODULI, m, args.matrices, seed, restricted)
    pd.DataFrame({
        "bin_low": histogram.edges[:-1],
        "bin_high": histogram.edges[1:],
        "count": histogram.counts,
        "expected": histogram.expected,
        "seed": cfg.seed,
    }).to_csv(run.path("figure_haar_moduli.csv"), index=False)
    save_report(histogram, run.path("figure_haar_moduli.json"), cfg.seed)
    column = haar_benchmark(BENCHMARK_COLUMN, m, args.matrices, seed, restricted)
    save_report(column, run.path("figure_haar_column.json"), cfg.seed)
    pair = haar_benchmark(BENCHMARK_TWO_PHOTON, m, args.matrices, seed, restricted)
    save_report(pair, run.path("figure_haar_two_photon.json"), cfg.seed)

    print(f"{'Series':<22} {'Matrices':<10} {'Mean':<10} {'SD':<10} {'KS p-value':<10}")
    print("-" * 70)
    print(f"{'|U_ij|^2 histogram':<22} {args.matrices:<10} {'-':<10} {'-':<10} {histogram.ks_pvalue:<10.4f}")
    print(f"{'column similarity':<22} {args.matrices:<10} {column.mean:<10.4f} {column.std:<10.4f} {'-':<10}")
    print(f"{'two-photon similarity':<22} {args.matrices:<10} {pair.mean:<10.4f} {pair.std:<10.4f} {'-':<10}")


DEVICE_FIGURE_SUFFIX = {
    BENCHMARK_COLUMN: "column",
    BENCHMARK_TWO_PHOTON: "two_photon",
    BENCHMARK_MODULI: "moduli",
}


def _figure_device(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    device, _ = load_device(cfg.device)
    heaters = args.heaters or [2, 5, 8, 11, 14, config.N_USABLE_HEATERS]
    kinds = args.benchmark or [BENCHMARK_COLUMN, BENCHMARK_TWO_PHOTON, BENCHMARK_MODULI]
    for kind in dict.fromkeys(kinds):
        suffix = DEVICE_FIGURE_SUFFIX[kind]
        reports = device_benchmark(device, heaters, args.benchmark_settings, cfg.p_max, cfg.seed, kind,
                                   haar_matrices=args.matrices)
        _write_json(run.path(f"figure_device_{suffix}.json"),
                    {"benchmark": kind, "reports": {str(count): report.to_dict() for count, report in reports.items()},
                     "seed": cfg.seed})

        if kind == BENCHMARK_MODULI:
            pd.DataFrame([{
                "heaters": count,
                "bin_low": low,
                "bin_high": high,
                "count": int(observed),
                "expected": expected,
                "seed": cfg.seed,
            } for count, histogram in reports.items()
                for low, high, observed, expected in zip(histogram.edges[:-1], histogram.edges[1:],
                                                         histogram.counts, histogram.expected)
            ]).to_csv(run.path(f"figure_device_{suffix}.csv"), index=False)

            print(f"\n{'Heaters':<10} {'|U_ij|^2 values':<18} {'KS statistic':<14} {'KS p-value':<10}")
            print("-" * 70)
            for count, histogram in reports.items():
                print(f"{count:<10} {histogram.n_values:<18} {histogram.ks_statistic:<14.4f} "
                      f"{histogram.ks_pvalue:<10.4f}")
            continue

        rows = [{
            "heaters": count,
            "mean": report.mean,
            "sd": report.std,
            "haar_low": report.haar_band[0] if report.haar_band else np.nan,
            "haar_high": report.haar_band[1] if report.haar_band else np.nan,
            "seed": cfg.seed,
        } for count, report in reports.items()]
        pd.DataFrame(rows).to_csv(run.path(f"figure_device_{suffix}.csv"), index=False)

        print(f"\n{'Heaters':<10} {kind + ' mean':<18} {'SD':<10} {'Haar band':<20}")
        print("-" * 70)
        for row in rows:
            band = f"{row['haar_low']:.4f}-{row['haar_high']:.4f}" if not np.isnan(row["haar_low"]) else "-"
            print(f"{row['heaters']:<10} {row['mean']:<18.4f} {row['sd']:<10.4f} {band:<20}")


def _figure_validation(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    exp = Experiment(cfg)
    u, _ = exp.unitary(0)
    summary = {}
    for tag in (TAG_BS, TAG_UNIFORM, TAG_DIST):
        records = exp.post_select(exp.sample(u, 0, tag, run.threads))
        wk, ck = exp.validate(u, records)
        save_trace(wk, run.path(f"figure_validation_wk_{tag}.csv"))
        save_trace(ck, run.path(f"figure_validation_ck_{tag}.csv"))
        summary[tag] = {"wk": _trace_summary(wk), "ck": _trace_summary(ck)}
    _write_json(run.path("figure_validation.json"), {"samplers": summary, "seed": cfg.seed})

    print(f"{'Sampler':<10} {'W_k':<8} {'Uniform null':<14} {'C_k':<8} {'Distinguishable null':<20}")
    print("-" * 70)
    for tag, row in summary.items():
        print(f"{tag:<10} {row['wk']['final']:<8} {'✓ rejected' if row['wk']['rejected'] else '✗ kept':<14} "
              f"{row['ck']['final']:<8} {'✓ rejected' if row['ck']['rejected'] else '✗ kept':<20}")


def _figure_randomness(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    exp = Experiment(cfg)
    records = []
    for setting in range(cfg.power_settings):
        u, _ = exp.unitary(setting)
        records.extend(exp.post_select(exp.sample(u, setting, threads=run.threads)))
    report, _, _ = randomness.pipeline(records, exp.m, cfg.block_size, cfg.p_th, run.threads, profile=True)
    save_report(report, run.path("figure_randomness.json"), cfg.seed)
    pd.DataFrame({"mode": list(report.vn_lengths), "vn_bits": list(report.vn_lengths.values()), "seed": cfg.seed}
                 ).to_csv(run.path("figure_randomness_vn.csv"), index=False)
    pd.DataFrame({"block_size": list(report.h_min_profile), "h_min": list(report.h_min_profile.values()),
                  "seed": cfg.seed}).to_csv(run.path("figure_randomness_h_min.csv"), index=False)
    print(f"✓ {report.hashed_bits} hashed bits, H_min {report.h_min:.4f} at block size {report.block_size}")
    print_nist_table([t.to_dict() for t in report.tests])


FIGURES = {
    "haar": _figure_haar,
    "device": _figure_device,
    "validation": _figure_validation,
    "randomness": _figure_randomness,
}


def cmd_figure(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> None:
    """Plot-ready CSV/JSON series; no plotting."""
    print(f"\nFIGURE DATA: {args.target}")
    with run.stage(f"figure-{args.target}"):
        FIGURES[args.target](args, cfg, run)


def cmd_pipeline(args: argparse.Namespace, cfg: ExperimentConfig, run: Run) -> dict:
    """
    evolve -> sample -> detector -> validate -> encode -> extract -> hash -> nist.

    Random bits are written only when, for every power setting, W_k rejects
    the uniform null and C_k rejects the distinguishable null.

    Returns:
        dict: Consolidated report (also written to pipeline_report.json)
    """
    with run.stage("evolve", tagged=True):
        exp = Experiment(cfg)
    rows, records = [], []
    for setting in range(cfg.power_settings):
        with run.stage("evolve", tagged=True):
            u, powers = exp.unitary(setting)
            save_unitary(u, run.path(f"unitary_{setting:03d}.json"))
            if powers is not None:
                _write_json(run.path(f"powers_{setting:03d}.json"),
                            {"powers": [float(p) for p in powers], "seed": cfg.seed})
        with run.stage("sample", tagged=True):
            drawn = exp.sample(u, setting, threads=run.threads)
        with run.stage("detector", tagged=True):
            drawn = exp.post_select(drawn)
        with run.stage("validate", tagged=True):
            wk, ck = exp.validate(u, drawn)
            save_trace(wk, run.path(f"wk_trace_{setting:03d}.csv"))
            save_trace(ck, run.path(f"ck_trace_{setting:03d}.csv"))
        rows.append({"setting": setting, "kept": len(kept(drawn)),
                     "wk": _trace_summary(wk), "ck": _trace_summary(ck)})
        records.extend(drawn)
    write_samples(records, run.path("samples.jsonl"), exp.m, cfg.seed)

    gate = all(row["wk"]["rejected"] and row["ck"]["rejected"] for row in rows)
    report = {"seed": cfg.seed, "config": cfg.snapshot(artifact=True, relative_to=run.out_dir), "settings": rows,
              "gate": {"passed": gate}, "randomness": None}
    print_validation_table(rows)
    if not gate:
        _write_json(run.path("pipeline_report.json"), report)
        print("\n✗ Validation gate closed: no random bits emitted")
        raise ValidationFailed("A validation counter did not reject its null; refusing to emit random bits")

    with run.stage("encode", tagged=True):
        matrix = randomness.encode_occupancy(records, exp.m)
    with run.stage("extract", tagged=True):
        per_mode = randomness.per_mode_von_neumann(matrix, run.threads)
        vn = randomness.concatenate(per_mode)
        vn.h_min, vn.block_size = randomness.min_entropy(vn, cfg.block_size), cfg.block_size
    with run.stage("hash", tagged=True):
        hashed = randomness.condition_hash(vn, vn.h_min)
        hashed.block_size = cfg.block_size
    with run.stage("nist", tagged=True):
        tests = randomness.nist_suite(hashed, cfg.p_th)
        summary = randomness.summarize(len(records), matrix, per_mode, vn, hashed, tests)

    randomness.save_bitstream(vn, run.path("vn.bin"), cfg.seed)
    randomness.save_bitstream(hashed, run.path("hashed.bin"), cfg.seed)
    report["randomness"] = summary.to_dict()
    _write_json(run.path("pipeline_report.json"), report)

    generation = sum(run.manifest.timings.get(s, 0.0) for s in ("sample", "detector", "encode", "extract", "hash"))
    if generation > 0:
        run.manifest.metrics["bits_per_second"] = summary.hashed_bits / generation
        logger.info(f"Generation rate {summary.hashed_bits / generation:.1f} hashed bits/s")
    print(f"\n✓ Validation gate open: {summary.hashed_bits} hashed bits "
          f"(H_min {summary.h_min:.4f}, L {summary.block_length}, {summary.bits_per_trial:.3f} bits/trial)")
    print_nist_table(report["randomness"]["tests"])
    print("\nLegend:")
    print("  W_k     - counter against uniform sampling, band +/-3 sqrt(k)")
    print("  C_k     - counter against distinguishable photons, band +/-3 sqrt(k)")
    print("  ✓ rejected - counter above the band over the final 10% of events")
    print("  - skipped  - stream shorter than the test's minimum length")
    if not summary.tests_passed:
        raise ValidationFailed("Hashed bits failed a statistical test")
    return report


def cmd_history(args: argparse.Namespace) -> int:
    """Recent runs from the registry."""
    db = RunDatabase(args.db)
    runs = db.get_recent_runs(args.limit)
    stats = db.get_database_stats()
    print(f"Total runs: {stats['total_runs']} ({stats['failed_runs']} failed), "
          f"{stats['unique_configs']} configurations, {stats['runs_today']} today")
    print("-" * 110)
    print(f"{'Run':<40} {'Command':<12} {'Seed':<8} {'Status':<20} {'Exit':<6} {'Created':<20}")
    print("-" * 110)
    for record in runs:
        marker = "✓" if record['exit_code'] == config.EXIT_OK else "✗"
        print(f"{record['run_id']:<40} {record['command']:<12} {str(record['seed']):<8} "
              f"{marker} {record['status']:<18} {record['exit_code']:<6} {str(record['created_at']):<20}")
    return config.EXIT_OK


COMMANDS = {
    "haar": cmd_haar,
    "evolve": cmd_evolve,
    "sample": cmd_sample,
    "validate": cmd_validate,
    "reconstruct": cmd_reconstruct,
    "extract": cmd_extract,
    "nist": cmd_nist,
    "figure": cmd_figure,
    "pipeline": cmd_pipeline,
}


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (JSON)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads (never changes results)")
    common.add_argument("--db", default=config.RUN_DATABASE_PATH, help="run registry (SQLite)")

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument("--unitary", help="'device', 'haar' or a unitary JSON file")
    experiment.add_argument("--device", help="device configuration (JSON)")
    experiment.add_argument("--m", type=int, help="Haar dimension")
    experiment.add_argument("--n", type=int, help="photon number")
    experiment.add_argument("--inputs", type=_int_list, help="input modes, e.g. 3,9,15")
    experiment.add_argument("--sampler", choices=SAMPLER_TAGS)
    experiment.add_argument("--draws", type=int, help="draws per power setting")
    experiment.add_argument("--settings", dest="power_settings", type=int, help="power settings")
    experiment.add_argument("--active-heaters", dest="active_heaters", type=int)
    experiment.add_argument("--p-max", dest="p_max", type=float, help="heater power bound in mW")
    experiment.add_argument("--events", dest="validation_events", type=int, help="events scored per counter")
    experiment.add_argument("--block-size", dest="block_size", type=int)
    experiment.add_argument("--p-th", dest="p_th", type=float, help="statistical test threshold")

    parser = argparse.ArgumentParser(prog=config.PROJECT_NAME,
                                     description="Continuously-coupled Boson Sampling simulator and analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    parents = [common, experiment]

    p = sub.add_parser("haar", parents=parents, help="Haar-random unitaries")
    p.add_argument("--count", type=int, default=1)

    p = sub.add_parser("evolve", parents=parents, help="device unitary at heater powers")
    p.add_argument("--powers", help="JSON file {\"powers\": [...]} (default: random)")

    p = sub.add_parser("sample", parents=parents, help="draw samples")
    p.add_argument("--detect", action="store_true", help="apply the device measurement model")

    p = sub.add_parser("validate", parents=parents, help="W_k and C_k counters of a sample file")
    p.add_argument("--samples", required=True)

    p = sub.add_parser("reconstruct", parents=parents, help="submatrix from calibration counts")
    p.add_argument("--counts", help="counts JSON (default: simulate from the configured unitary)")
    p.add_argument("--rec-inputs", dest="rec_inputs", type=_int_list)
    p.add_argument("--rec-outputs", dest="rec_outputs", type=_int_list)
    p.add_argument("--shots", type=int, default=10**6)
    p.add_argument("--expected", action="store_true", help="noiseless expected counts")

    p = sub.add_parser("extract", parents=parents, help="random bits from a sample file")
    p.add_argument("--samples", required=True)
    p.add_argument("--profile", action="store_true", help="min-entropy for block sizes 1..16")

    p = sub.add_parser("nist", parents=parents, help="statistical tests on a bit stream")
    p.add_argument("--bits", required=True)

    p = sub.add_parser("figure", parents=parents, help="plot-ready data series")
    p.add_argument("target", choices=FIGURE_TARGETS)
    p.add_argument("--matrices", type=int, default=100, help="Haar matrices")
    p.add_argument("--heaters", type=_int_list, help="active-heater counts for the device trend")
    p.add_argument("--benchmark", action="append", choices=BENCHMARK_MODES,
                   help="device series to compute (repeatable; default: all)")
    p.add_argument("--benchmark-settings", dest="benchmark_settings", type=int, default=10,
                   help="random power settings per heater count")

    sub.add_parser("pipeline", parents=parents, help="evolve, sample, validate and extract random bits")

    p = sub.add_parser("history", parents=[common], help="recent runs")
    p.add_argument("--limit", type=int, default=20)
    return parser


def _exit_code(error: Exception) -> Tuple[str, int]:
    if isinstance(error, ValidationFailed):
        return "validation-failed", config.EXIT_VALIDATION_FAILED
    if isinstance(error, StageError):
        return f"stage-error:{error.stage}", config.EXIT_STAGE_BASE + config.PIPELINE_STAGES.index(error.stage)
    if isinstance(error, (DataError, FileNotFoundError, json.JSONDecodeError)):
        return "data-error", config.EXIT_DATA_ERROR
    return "config-error", config.EXIT_CONFIG_ERROR


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse the command line, run one command and return its exit code.

    Args:
        argv (List[str], optional): Arguments without the program name

    Returns:
        int: config.EXIT_* code
    """
    configure_logging()
    args = build_parser().parse_args(argv)
    if args.command == "history":
        return cmd_history(args)

    db = RunDatabase(args.db)
    try:
        cfg = build_config(args)
    except ConfigError as e:
        logger.error(str(e))
        print(f"✗ {e}")
        db.save_run(f"{args.command}-{uuid.uuid4().hex[:8]}", args.command, args.seed, None,
                    "config-error", config.EXIT_CONFIG_ERROR)
        return config.EXIT_CONFIG_ERROR

    print_header(args.command.upper(), cfg)
    run = Run(args.command, cfg, args.threads)
    try:
        COMMANDS[args.command](args, cfg, run)
        status, code = "ok", config.EXIT_OK
    except (LatticeBSError, ValueError, OSError, json.JSONDecodeError) as e:
        status, code = _exit_code(e)
        logger.error(f"{args.command} failed ({status}): {e}")
        print(f"✗ {e}")

    manifest = None
    if code in (config.EXIT_OK, config.EXIT_VALIDATION_FAILED):
        manifest = run.finish(status)
    else:
        run.discard()
    db.save_run(run.manifest.run_id, args.command, cfg.seed, cfg.config_hash(), status, code,
                cfg.output_dir, manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
