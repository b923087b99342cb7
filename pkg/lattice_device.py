#!/usr/bin/env python3
"""
Lattice device - phenomenological model of the continuously coupled 3D waveguide array

The array is an 8 x 16 triangular lattice whose transverse site positions are
randomly modulated along z. Evanescent coupling between close sites plus
heater-driven detunings define a piecewise-constant Hamiltonian H(z; P); the
device unitary is the z-ordered product of its slice propagators. The output
side carries the measurement model: 108 measured modes read by 54 detectors,
two modes per detector in separate time bins.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

import config
import seeding
from errors import ConfigError, InvalidPower, InvalidShape, InvalidSubset, ShapeMismatch
from unitary_core import UnitaryMatrix, expm_hermitian

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LatticeGeometry:
    """
    Transverse lattice and its z-discretization.

    Modes are numbered row-major (mode = row * n_cols + col). Odd rows are
    shifted by half a pitch and rows are sqrt(3)/2 pitch apart, so nearest
    neighbours sit exactly one pitch apart before modulation. Positions are
    constant within each of ``n_sections`` sections; the ``n_segments``
    z-slices subdivide the chip uniformly.
    """

    n_rows: int = config.LATTICE_ROWS
    n_cols: int = config.LATTICE_COLS
    pitch_um: float = config.PITCH_UM
    chip_length_mm: float = config.CHIP_LENGTH_MM
    n_segments: int = config.N_SEGMENTS
    n_sections: int = config.N_SECTIONS
    modulation_um: float = config.MODULATION_FRACTION * config.PITCH_UM
    seed: int = config.DEVICE_SEED
    base_coordinates: np.ndarray = field(init=False, repr=False)
    section_coordinates: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise InvalidShape(f"Lattice needs at least one row and column, got {self.n_rows}x{self.n_cols}")
        if self.n_segments < 1 or self.n_sections < 1:
            raise InvalidShape("Segment and section counts must be >= 1")
        if not self.pitch_um > 0 or not self.chip_length_mm > 0:
            raise InvalidShape("Pitch and chip length must be positive")
        rows, cols = np.divmod(np.arange(self.n_rows * self.n_cols), self.n_cols)
        base = np.column_stack([
            (cols + 0.5 * (rows % 2)) * self.pitch_um,
            rows * self.pitch_um * np.sqrt(3.0) / 2.0,
        ])
        rng = seeding.generator(self.seed, 0)
        offsets = rng.uniform(-self.modulation_um, self.modulation_um, size=(self.n_sections,) + base.shape)
        sections = base[None, :, :] + offsets
        if not np.all(np.isfinite(sections)):
            raise InvalidShape("Non-finite site coordinates")
        base.setflags(write=False)
        sections.setflags(write=False)
        object.__setattr__(self, "base_coordinates", base)
        object.__setattr__(self, "section_coordinates", sections)

    @property
    def m(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def dz(self) -> float:
        return self.chip_length_mm / self.n_segments

    def section_of(self, segment: int) -> int:
        """Section containing the midpoint of z-slice ``segment``."""
        return min(int((segment + 0.5) * self.n_sections / self.n_segments), self.n_sections - 1)

    def segment_coordinates(self, segment: int) -> np.ndarray:
        return self.section_coordinates[self.section_of(segment)]


@dataclass(frozen=True, eq=False)
class HeaterBank:
    """
    Thermo-optic heaters; influence[h, i] is the detuning of mode i per mW of
    heater h (rad per mW per mm). Only heaters in ``active`` may be driven.
    """

    influence: np.ndarray
    active: Tuple[int, ...]

    def __post_init__(self):
        influence = np.asarray(self.influence, dtype=float)
        if influence.ndim != 2:
            raise InvalidShape(f"Heater influence must be (heaters, modes), got {influence.shape}")
        if not np.all(np.isfinite(influence)) or np.any(influence < 0):
            raise InvalidShape("Heater influence entries must be finite and non-negative")
        active = tuple(sorted(int(h) for h in self.active))
        if len(set(active)) != len(active) or any(h < 0 or h >= influence.shape[0] for h in active):
            raise InvalidSubset(f"Active heaters {active} are not a subset of {influence.shape[0]} heaters")
        influence = influence.copy()
        influence.setflags(write=False)
        object.__setattr__(self, "influence", influence)
        object.__setattr__(self, "active", active)

    @property
    def count(self) -> int:
        return self.influence.shape[0]

    @classmethod
    def gaussian(cls, geometry: LatticeGeometry, count: int = config.N_HEATERS,
                 rows: int = config.HEATER_ROWS, strength: float = config.HEATER_STRENGTH,
                 width_pitches: float = config.HEATER_WIDTH_PITCHES,
                 active: Optional[Sequence[int]] = None) -> "HeaterBank":
        """
        Heaters on a regular grid over the lattice cross-section with a Gaussian
        influence kernel in transverse distance.

        Args:
            geometry (LatticeGeometry): Lattice the heaters act on
            count (int): Number of heaters
            rows (int): Rows of the heater grid (count must be divisible by rows)
            strength (float): Peak influence, rad / (mW mm)
            width_pitches (float): Kernel width in pitches
            active (Sequence[int], optional): Usable heaters (default: config.N_USABLE_HEATERS spread evenly)

        Returns:
            HeaterBank: Heater bank for the geometry
        """
        if count < 1 or rows < 1 or count % rows:
            raise InvalidShape(f"Cannot lay out {count} heaters on {rows} rows")
        coordinates = geometry.base_coordinates
        xs = np.linspace(coordinates[:, 0].min(), coordinates[:, 0].max(), count // rows)
        ys = np.linspace(coordinates[:, 1].min(), coordinates[:, 1].max(), rows)
        centers = np.array([(x, y) for y in ys for x in xs])
        width = width_pitches * geometry.pitch_um
        distance = cdist(centers, coordinates)
        influence = strength * np.exp(-distance ** 2 / (2.0 * width ** 2))
        if active is None:
            usable = min(config.N_USABLE_HEATERS, count)
            active = np.unique(np.round(np.linspace(0, count - 1, usable)).astype(int))
        return cls(influence, tuple(active))


@dataclass(frozen=True)
class NoiseModel:
    """
    Source and detector imperfections.

    indistinguishability: weight of the ideal bosonic law in the linear mixture
    (equals the two-photon HOM visibility); g2: probability of one extra,
    distinguishable photon per trial; efficiency: detection efficiency, scalar
    or one value per mode.
    """

    indistinguishability: float = config.HOM_VISIBILITY
    g2: float = 0.0
    efficiency: Union[float, Tuple[float, ...]] = config.DETECTION_EFFICIENCY

    def __post_init__(self):
        if not 0.0 <= self.indistinguishability <= 1.0:
            raise ValueError(f"indistinguishability must lie in [0, 1], got {self.indistinguishability}")
        if not 0.0 <= self.g2 < 1.0:
            raise ValueError(f"g2 must lie in [0, 1), got {self.g2}")
        eta = np.atleast_1d(np.asarray(self.efficiency, dtype=float))
        if np.any(eta < 0) or np.any(eta > 1):
            raise ValueError("Detection efficiencies must lie in [0, 1]")
        if not np.isscalar(self.efficiency):
            object.__setattr__(self, "efficiency", tuple(float(e) for e in eta))

    @classmethod
    def from_hom_visibility(cls, visibility: float, g2: float = 0.0, efficiency=1.0) -> "NoiseModel":
        return cls(indistinguishability=visibility, g2=g2, efficiency=efficiency)

    def efficiencies(self, m: int) -> np.ndarray:
        eta = np.atleast_1d(np.asarray(self.efficiency, dtype=float))
        if eta.size == 1:
            return np.full(m, float(eta[0]))
        if eta.size != m:
            raise ShapeMismatch(f"{eta.size} efficiencies for {m} modes")
        return eta


@dataclass(frozen=True)
class ClickRecord:
    """Threshold clicks of one trial after the measurement model."""

    modes: Tuple[int, ...]
    clicks: Tuple[Tuple[int, int], ...]
    surviving_photons: int


@dataclass(frozen=True, eq=False)
class DetectorMap:
    """
    Output multiplexing: mode -> (detector, time bin). Modes absent from the
    map are not measured.
    """

    m: int
    assignments: Dict[int, Tuple[int, int]]

    def __post_init__(self):
        per_detector: Dict[int, set] = {}
        for mode, (detector, time_bin) in self.assignments.items():
            if not 0 <= mode < self.m:
                raise InvalidShape(f"Detector map references mode {mode} outside 0..{self.m - 1}")
            if time_bin not in (0, 1) or detector < 0:
                raise InvalidShape(f"Invalid detector slot ({detector}, {time_bin}) for mode {mode}")
            slots = per_detector.setdefault(detector, set())
            if time_bin in slots:
                raise InvalidShape(f"Detector {detector} time bin {time_bin} assigned twice")
            slots.add(time_bin)
        lookup = np.full((self.m, 2), -1, dtype=int)
        for mode, slot in self.assignments.items():
            lookup[mode] = slot
        object.__setattr__(self, "_lookup", lookup)

    @classmethod
    def pairs(cls, m: int, measured: Sequence[int]) -> "DetectorMap":
        """Consecutive measured modes share a detector, first in bin 0, second in bin 1."""
        ordered = sorted(int(j) for j in measured)
        if len(set(ordered)) != len(ordered):
            raise InvalidShape("Measured modes must be distinct")
        return cls(m, {mode: (k // 2, k % 2) for k, mode in enumerate(ordered)})

    @classmethod
    def full(cls, m: int) -> "DetectorMap":
        return cls.pairs(m, range(m))

    @property
    def measured(self) -> Tuple[int, ...]:
        return tuple(sorted(self.assignments))

    @property
    def n_detectors(self) -> int:
        return len({detector for detector, _ in self.assignments.values()})

    def apply(self, noise: NoiseModel, occupations: Sequence[int], fold: Optional[int],
              rng: np.random.Generator) -> Optional[ClickRecord]:
        """
        Measure one output Fock state.

        Photons in unmeasured modes are lost; each remaining photon survives
        with the efficiency of its mode; a mode with at least one surviving
        photon yields one click. The trial is discarded (None) when the number
        of clicked modes differs from ``fold``.
        """
        occupations = np.asarray(occupations, dtype=int)
        if occupations.shape != (self.m,):
            raise ShapeMismatch(f"Output has {occupations.shape[0]} modes, detector map expects {self.m}")
        measured = self._lookup[:, 0] >= 0
        counts = np.where(measured, occupations, 0)
        eta = noise.efficiencies(self.m)
        occupied = np.flatnonzero(counts)
        surviving = counts.copy()
        if occupied.size and np.any(eta[occupied] < 1.0):
            surviving[occupied] = rng.binomial(counts[occupied], eta[occupied])
        clicked = np.flatnonzero(surviving)
        if fold is not None and clicked.size != fold:
            return None
        return ClickRecord(
            modes=tuple(int(j) for j in clicked),
            clicks=tuple(sorted((int(self._lookup[j, 0]), int(self._lookup[j, 1])) for j in clicked)),
            surviving_photons=int(surviving.sum()),
        )


@dataclass(frozen=True, eq=False)
class DeviceModel:
    """
    Complete device: geometry, heaters, coupling law, base detunings, input
    fan-in and output detection.
    """

    geometry: LatticeGeometry
    heaters: HeaterBank
    detunings: np.ndarray
    input_ports: Tuple[int, ...]
    detectors: DetectorMap
    c0: float = config.COUPLING_C0
    decay_um: float = config.COUPLING_DECAY_UM
    cutoff_um: float = config.COUPLING_CUTOFF_PITCHES * config.PITCH_UM
    couplings: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.geometry.m
        detunings = np.asarray(self.detunings, dtype=float)
        if detunings.shape != (m,):
            raise ShapeMismatch(f"{detunings.shape[0]} detunings for {m} modes")
        if self.heaters.influence.shape[1] != m:
            raise ShapeMismatch(f"Heater influence covers {self.heaters.influence.shape[1]} modes, lattice has {m}")
        ports = tuple(int(j) for j in self.input_ports)
        if len(set(ports)) != len(ports) or len(ports) > config.N_INPUT_PORTS:
            raise InvalidShape(f"Input port map must be injective with at most {config.N_INPUT_PORTS} ports")
        if any(not 0 <= j < m for j in ports):
            raise InvalidShape("Input port map references modes outside the lattice")
        if self.detectors.m != m:
            raise ShapeMismatch(f"Detector map built for {self.detectors.m} modes, lattice has {m}")
        couplings = np.stack([self._coupling_matrix(coords) for coords in self.geometry.section_coordinates])
        detunings = detunings.copy()
        detunings.setflags(write=False)
        couplings.setflags(write=False)
        object.__setattr__(self, "detunings", detunings)
        object.__setattr__(self, "input_ports", ports)
        object.__setattr__(self, "couplings", couplings)

    def _coupling_matrix(self, coordinates: np.ndarray) -> np.ndarray:
        distance = cdist(coordinates, coordinates)
        coupled = (distance <= self.cutoff_um) & ~np.eye(len(coordinates), dtype=bool)
        return np.where(coupled, self.c0 * np.exp(-(distance - self.geometry.pitch_um) / self.decay_um), 0.0)

    @property
    def m(self) -> int:
        return self.geometry.m

    @property
    def measured_modes(self) -> Tuple[int, ...]:
        return self.detectors.measured


def _check_powers(device: DeviceModel, p) -> np.ndarray:
    powers = np.asarray(p, dtype=float)
    if powers.shape != (device.heaters.count,):
        raise ShapeMismatch(f"Power vector has shape {powers.shape}, expected ({device.heaters.count},)")
    if np.any(powers < 0) or not np.all(np.isfinite(powers)):
        raise InvalidPower("Heater powers must be finite and non-negative")
    return powers


def build_hamiltonian(device: DeviceModel, segment: int, p) -> np.ndarray:
    """
    Coupling Hamiltonian of one z-slice.

    Args:
        device (DeviceModel): Device
        segment (int): z-slice index, 0 at the input facet
        p: Heater powers in mW

    Returns:
        np.ndarray: Real-symmetric m x m matrix (complex dtype), units 1/mm
    """
    if not 0 <= segment < device.geometry.n_segments:
        raise InvalidShape(f"Segment {segment} outside 0..{device.geometry.n_segments - 1}")
    powers = _check_powers(device, p)
    h = device.couplings[device.geometry.section_of(segment)].astype(np.complex128)
    h[np.diag_indices(device.m)] = device.detunings + powers @ device.heaters.influence
    return h


def evolve(device: DeviceModel, p) -> UnitaryMatrix:
    """
    Device unitary U(P) as the ordered product of slice propagators, later
    slices applied on the left.

    Args:
        device (DeviceModel): Device
        p: Heater powers in mW

    Returns:
        UnitaryMatrix: U(P) with provenance 'device'
    """
    _check_powers(device, p)
    dz = device.geometry.dz
    propagators: Dict[int, np.ndarray] = {}
    u = np.eye(device.m, dtype=np.complex128)
    for segment in range(device.geometry.n_segments):
        section = device.geometry.section_of(segment)
        if section not in propagators:
            propagators[section] = expm_hermitian(build_hamiltonian(device, segment, p), dz).matrix
        u = propagators[section] @ u
    return UnitaryMatrix(u, "device")


def random_power_vector(device: DeviceModel, n_active: int, p_max: float = config.P_MAX_MW, seed=None) -> np.ndarray:
    """
    Uniform random powers in [0, p_max] on a random subset of the usable heaters.

    Args:
        device (DeviceModel): Device
        n_active (int): Number of heaters driven
        p_max (float): Upper power bound in mW
        seed: Seed or numpy Generator

    Returns:
        np.ndarray: Power vector over all heaters, zero off the subset
    """
    if n_active < 0 or n_active > device.heaters.count:
        raise InvalidSubset(f"Cannot drive {n_active} of {device.heaters.count} heaters")
    if n_active > len(device.heaters.active):
        raise InvalidSubset(f"Only {len(device.heaters.active)} heaters are usable, {n_active} requested")
    if p_max < 0:
        raise InvalidPower(f"p_max must be non-negative, got {p_max}")
    rng = seeding.as_generator(seed)
    powers = np.zeros(device.heaters.count)
    if n_active:
        chosen = rng.choice(np.asarray(device.heaters.active), size=n_active, replace=False)
        powers[np.sort(chosen)] = rng.uniform(0.0, p_max, size=n_active)
    return powers


def power_sweep(device: DeviceModel, heater_counts: Sequence[int], n_powers: int,
                p_max: float = config.P_MAX_MW, seed=None) -> Dict[int, np.ndarray]:
    """
    Random power settings for a growing number of active heaters.

    The usable heaters are put in one seeded order and a count k drives the
    first k of them, so each active set contains the smaller ones. Setting i
    keeps the same power on a heater for every count in which it is driven.

    Args:
        device (DeviceModel): Device
        heater_counts: Numbers of heaters driven
        n_powers (int): Power settings per count
        p_max (float): Upper power bound in mW
        seed: Seed or numpy Generator

    Returns:
        Dict[int, np.ndarray]: (n_powers, heaters) power matrix per count
    """
    usable = np.asarray(device.heaters.active)
    counts = [int(k) for k in heater_counts]
    for k in counts:
        if k < 0 or k > usable.size:
            raise InvalidSubset(f"Cannot drive {k} heaters, {usable.size} are usable")
    if p_max < 0:
        raise InvalidPower(f"p_max must be non-negative, got {p_max}")
    rng = seeding.as_generator(seed)
    order = rng.permutation(usable)
    draws = rng.uniform(0.0, p_max, size=(n_powers, usable.size))
    sweep = {}
    for k in counts:
        powers = np.zeros((n_powers, device.heaters.count))
        powers[:, order[:k]] = draws[:, :k]
        sweep[k] = powers
    return sweep


def apply_detector_model(device: DeviceModel, noise: NoiseModel, output, seed=None,
                         fold: Optional[int] = None) -> Optional[ClickRecord]:
    """
    Run one output state through losses, efficiencies and the multiplexed detectors.

    Args:
        device (DeviceModel): Device whose detector map is used
        noise (NoiseModel): Efficiencies
        output: FockState or occupation sequence over the device modes
        seed: Seed or numpy Generator
        fold (int, optional): Required number of clicks (default: photons in ``output``)

    Returns:
        ClickRecord or None: None when the trial is discarded
    """
    occupations = getattr(output, "occupations", output)
    if fold is None:
        fold = int(np.sum(occupations))
    return device.detectors.apply(noise, occupations, fold, seeding.as_generator(seed))


def default_device_dict() -> dict:
    """Device description matching the bundled default configuration."""
    m = config.LATTICE_ROWS * config.LATTICE_COLS
    unmeasured = set(range(5, m, 6)[:m - config.N_MEASURED_MODES])
    return {
        "geometry": {
            "n_rows": config.LATTICE_ROWS,
            "n_cols": config.LATTICE_COLS,
            "pitch_um": config.PITCH_UM,
            "chip_length_mm": config.CHIP_LENGTH_MM,
            "n_segments": config.N_SEGMENTS,
            "n_sections": config.N_SECTIONS,
            "modulation_um": config.MODULATION_FRACTION * config.PITCH_UM,
            "seed": config.DEVICE_SEED,
        },
        "coupling": {
            "c0": config.COUPLING_C0,
            "decay_um": config.COUPLING_DECAY_UM,
            "cutoff_um": config.COUPLING_CUTOFF_PITCHES * config.PITCH_UM,
        },
        "detuning_spread": config.DETUNING_SPREAD,
        "heaters": {
            "count": config.N_HEATERS,
            "rows": config.HEATER_ROWS,
            "strength": config.HEATER_STRENGTH,
            "width_pitches": config.HEATER_WIDTH_PITCHES,
        },
        "input_ports": list(range(3, m, 6))[:config.N_INPUT_PORTS],
        "measured_modes": [j for j in range(m) if j not in unmeasured],
        "noise": {
            "indistinguishability": config.HOM_VISIBILITY,
            "g2": 0.0,
            "efficiency": config.DETECTION_EFFICIENCY,
        },
    }


def device_from_dict(description: dict) -> Tuple[DeviceModel, NoiseModel]:
    """
    Build a device and its noise model from a (possibly partial) description;
    missing fields take the defaults of config.py.

    Args:
        description (dict): Parsed device configuration

    Returns:
        Tuple[DeviceModel, NoiseModel]: Device and noise model
    """
    defaults = default_device_dict()
    try:
        geometry_fields = {**defaults["geometry"], **description.get("geometry", {})}
        if "geometry" in description and "modulation_um" not in description["geometry"]:
            geometry_fields["modulation_um"] = config.MODULATION_FRACTION * geometry_fields["pitch_um"]
        geometry = LatticeGeometry(**geometry_fields)
        m = geometry.m

        coupling = {**defaults["coupling"], **description.get("coupling", {})}
        if "coupling" not in description or "cutoff_um" not in description["coupling"]:
            coupling["cutoff_um"] = config.COUPLING_CUTOFF_PITCHES * geometry.pitch_um

        heater_fields = {**defaults["heaters"], **description.get("heaters", {})}
        if "influence" in heater_fields:
            heaters = HeaterBank(np.asarray(heater_fields["influence"], dtype=float), tuple(heater_fields["active"]))
        else:
            heaters = HeaterBank.gaussian(
                geometry,
                count=int(heater_fields["count"]),
                rows=int(heater_fields["rows"]),
                strength=float(heater_fields["strength"]),
                width_pitches=float(heater_fields["width_pitches"]),
                active=heater_fields.get("active"),
            )

        if "detunings" in description:
            detunings = np.asarray(description["detunings"], dtype=float)
        else:
            spread = float(description.get("detuning_spread", defaults["detuning_spread"]))
            detunings = seeding.generator(geometry.seed, 1).uniform(-spread, spread, size=m)

        default_ports = defaults["input_ports"] if m == 128 else list(range(min(m, config.N_INPUT_PORTS)))
        ports = description.get("input_ports", default_ports)

        if "detector_map" in description:
            detectors = DetectorMap(m, {int(k): (int(v[0]), int(v[1])) for k, v in description["detector_map"].items()})
        elif "measured_modes" in description:
            detectors = DetectorMap.pairs(m, description["measured_modes"])
        elif m == 128:
            detectors = DetectorMap.pairs(m, defaults["measured_modes"])
        else:
            detectors = DetectorMap.full(m)

        noise = NoiseModel(**{**defaults["noise"], **description.get("noise", {})})
        device = DeviceModel(
            geometry=geometry,
            heaters=heaters,
            detunings=detunings,
            input_ports=tuple(ports),
            detectors=detectors,
            c0=float(coupling["c0"]),
            decay_um=float(coupling["decay_um"]),
            cutoff_um=float(coupling["cutoff_um"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed device description: {e}")
    logger.info(f"Device built: {m} modes, {heaters.count} heaters ({len(heaters.active)} usable), "
                f"{len(device.input_ports)} inputs, {len(device.measured_modes)} measured modes, "
                f"{detectors.n_detectors} detectors")
    return device, noise


def device_to_dict(device: DeviceModel, noise: Optional[NoiseModel] = None) -> dict:
    """Serializable description that rebuilds ``device`` exactly."""
    g = device.geometry
    description = {
        "geometry": {
            "n_rows": g.n_rows, "n_cols": g.n_cols, "pitch_um": g.pitch_um,
            "chip_length_mm": g.chip_length_mm, "n_segments": g.n_segments,
            "n_sections": g.n_sections, "modulation_um": g.modulation_um, "seed": g.seed,
        },
        "coupling": {"c0": device.c0, "decay_um": device.decay_um, "cutoff_um": device.cutoff_um},
        "heaters": {"influence": device.heaters.influence.tolist(), "active": list(device.heaters.active)},
        "detunings": [float(b) for b in device.detunings],
        "input_ports": list(device.input_ports),
        "detector_map": {str(k): list(v) for k, v in sorted(device.detectors.assignments.items())},
    }
    if noise is not None:
        efficiency = noise.efficiency if np.isscalar(noise.efficiency) else list(noise.efficiency)
        description["noise"] = {"indistinguishability": noise.indistinguishability, "g2": noise.g2,
                                "efficiency": efficiency}
    return description


def save_device(device: DeviceModel, path: str, noise: Optional[NoiseModel] = None) -> None:
    """
    Write the full device description (explicit detunings, heater influence
    and detector map) so that ``load_device`` rebuilds the same unitaries.

    Args:
        device (DeviceModel): Device to save
        path (str): Destination JSON file
        noise (NoiseModel, optional): Noise model stored alongside
    """
    with open(path, "w") as file:
        json.dump(device_to_dict(device, noise), file)
    logger.info(f"Device description written to {path}")


def load_device(path: str) -> Tuple[DeviceModel, NoiseModel]:
    """
    Load a device configuration file.

    Args:
        path (str): JSON device configuration

    Returns:
        Tuple[DeviceModel, NoiseModel]: Device and noise model
    """
    try:
        with open(path, "r") as file:
            description = json.load(file)
    except FileNotFoundError:
        raise ConfigError(f"Device file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Error parsing {path}: {e}")
    return device_from_dict(description)
