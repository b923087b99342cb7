#!/usr/bin/env python3
"""
Configuration file for LatticeBS - Boson Sampling simulator and randomness toolkit

This file contains all configurable parameters for the simulator.
Modify these values to customize the behavior of the application.
"""

# Project identification
PROJECT_NAME = "latticebs"
VERSION = "1.0.0"

# Logging
LOG_LEVEL_ENV = "LATTICEBS_LOG_LEVEL"  # Environment variable read for the log level
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
DEFAULT_LOG_LEVEL = "INFO"

# Linear algebra tolerances
UNITARITY_TOLERANCE = 1e-10    # max |U^dagger U - I| accepted for a UnitaryMatrix
HERMITICITY_TOLERANCE = 1e-12  # max |H - H^dagger| accepted by expm_hermitian

# Permanent limits
PERMANENT_MAX_SIZE = 30        # ryser / glynn ceiling (2^30 terms)
NAIVE_PERMANENT_MAX_SIZE = 9   # n! reference oracle ceiling
GRAY_BLOCK_BITS = 14           # low subset bits enumerated per vectorized block
BATCH_PERMANENT_MAX_SIZE = 6   # batch_permanent expands all n! permutations

# Device model defaults (8 x 16 triangular lattice, 24 heaters)
LATTICE_ROWS = 8
LATTICE_COLS = 16
PITCH_UM = 15.0                # waveguide pitch in micrometres
CHIP_LENGTH_MM = 20.0          # interaction length
N_SEGMENTS = 64                # z-slices of the ordered product
N_SECTIONS = 16                # sections of constant position modulation
MODULATION_FRACTION = 0.1      # modulation amplitude as a fraction of the pitch
COUPLING_C0 = 1.0              # coupling at one pitch distance, 1/mm (c0 * L = 20 rad)
COUPLING_DECAY_UM = 5.0        # decay length of the evanescent coupling law
COUPLING_CUTOFF_PITCHES = 1.5  # cutoff radius in units of pitch
DETUNING_SPREAD = 0.05         # base detunings drawn uniformly in [-spread, spread], 1/mm
N_HEATERS = 24
N_USABLE_HEATERS = 17          # heaters that can be actuated simultaneously
HEATER_ROWS = 3                # heaters laid out on a 3 x 8 grid over the cross-section
HEATER_STRENGTH = 0.01         # peak influence, rad / (mW * mm)
HEATER_WIDTH_PITCHES = 1.0     # Gaussian kernel width in units of pitch
P_MAX_MW = 50.0                # default upper bound of random heater powers
N_INPUT_PORTS = 20
N_MEASURED_MODES = 108
N_DETECTORS = 54
DEVICE_SEED = 2024

# Source and detection defaults
HOM_VISIBILITY = 0.83          # photon indistinguishability of the linear mixture model
SOURCE_G2 = 0.04               # measured g2(0); extra-photon injection stays off unless set
DETECTION_EFFICIENCY = 1.0

# Sampling
SAMPLER_MAX_PHOTONS = 20
EXACT_MAX_PHOTONS = 4          # exact_distribution brute-force ceiling
ENUMERATION_LIMIT = 10**7      # largest output space exact_distribution will enumerate
SAMPLE_CHUNK_SIZE = 2048       # trials handed to one worker at a time

# Validation counters
BAND_Z = 3.0                   # acceptance band half-width is BAND_Z * sqrt(k)
REJECTION_TAIL = 0.1           # fraction of final events that must sit above the band
CK_MAX_PHOTONS = 4

# Reconstruction
MODULUS_FLOOR = 0.02           # entries below this modulus are left unresolved
COS_SLACK_SIGMAS = 5.0         # |cos phi| may exceed 1 by this many standard errors

# Randomness extraction
HASH_OUTPUT_BITS = 256
DEFAULT_BLOCK_SIZE = 8         # min-entropy block size in bits
MAX_BLOCK_SIZE = 16
P_THRESHOLD = 0.01             # NIST pass threshold

# NIST SP 800-22 parameters
NIST_BLOCK_FREQUENCY_M = 128
NIST_TEMPLATE_LENGTH = 9
NIST_NON_OVERLAPPING_BLOCKS = 8
NIST_NON_OVERLAPPING_TEMPLATE = "000000001"
NIST_OVERLAPPING_BLOCK = 1032
NIST_SERIAL_M = 16
NIST_APEN_M = 10
NIST_LINEAR_COMPLEXITY_M = 500
NIST_RANK_ROWS = 32
NIST_DFT_THRESHOLD_FRACTION = 0.95

# Minimum stream lengths (bits) below which a test is reported skipped
NIST_MIN_LENGTH = {
    "monobit": 100,
    "block_frequency": 100,
    "runs": 100,
    "longest_run": 128,
    "matrix_rank": 38912,
    "dft": 1000,
    "non_overlapping_template": 4096,
    "overlapping_template": 1000000,
    "universal": 387840,
    "linear_complexity": 1000000,
    "serial_1": 524288,               # NIST_SERIAL_M < floor(log2 n) - 2
    "serial_2": 524288,
    "approximate_entropy": 65536,     # NIST_APEN_M < floor(log2 n) - 5
    "cumulative_sums_forward": 100,
    "cumulative_sums_backward": 100,
}

# Named random sub-streams derived from the master seed
SEED_STREAMS = {
    "device": 1,
    "powers": 2,
    "sampler": 3,
    "detector": 4,
    "haar": 5,
    "counts": 6,
}

# Files
DEFAULT_DEVICE_FILE = "default_device.json"
DEMO_EXPERIMENT_FILE = "demo_experiment.json"
RUN_DATABASE_PATH = "runs.db"
MANIFEST_FILE = "manifest.json"
DEFAULT_OUTPUT_DIR = "output"

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_VALIDATION_FAILED = 4
EXIT_STAGE_BASE = 10           # pipeline stage failures exit with EXIT_STAGE_BASE + stage index

PIPELINE_STAGES = [
    "evolve", "sample", "detector", "validate", "encode", "extract", "hash", "nist",
]

# Output formatting
PROBABILITY_DECIMAL_PLACES = 6
P_VALUE_DECIMAL_PLACES = 4
