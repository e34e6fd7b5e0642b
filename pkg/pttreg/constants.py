"""pttreg constants."""

from pathlib import Path

WEIGHTS_MAGIC = b"PTTW1"

# Scores are kept this far from exact 0/1 so the overlap loss stays finite.
PROBABILITY_EPS = 1e-7

JACOBI_MAX_SWEEPS = 64
JACOBI_TOLERANCE = 1e-14

# Relative singular-value floor below which a weighted covariance is treated as rank-deficient.
DEGENERATE_RANK_TOL = 1e-12

# Queries processed per block in ragged attention.
ATTENTION_QUERY_BLOCK = 2048

# Pairs per block in exhaustive nearest-neighbour search.
NN_BLOCK_PAIRS = 4_000_000

EXIT_OK = 0
EXIT_SELFTEST_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERICAL_ERROR = 4

SCHEMA_PATH = Path(__file__).parent / "schemas" / "report.schema.json"

# Registration stages, in execution order.
PIPELINE_STAGES = [
    "load",
    "embed",
    "tree",
    "encode",
    "decode",
    "estimate",
    "metrics",
]

# Random stream identifiers passed to make_rng() after the seed.
STREAM_WEIGHTS = 1
STREAM_CLOUD = 2
STREAM_TRANSFORM = 3
STREAM_JITTER = 4
STREAM_BENCH = 5
STREAM_SELFTEST = 6
