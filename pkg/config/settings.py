"""Application settings and configuration."""

from pathlib import Path

# Application settings
APP_TITLE = "Covariate SBM Toolkit"
APP_PROG = "covariate-sbm"
APP_VERSION = "1.0.0"
APP_DESCRIPTION = "Localized spectral estimation of stochastic block models with covariates"

# Paths
BASE_DIR = Path(__file__).parent.parent

# Logging
LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
LOG_LEVEL = "INFO"

# Numeric tolerances
SIMPLEX_TOLERANCE = 1e-12
PROBABILITY_TOLERANCE = 1e-12
NORM_TOLERANCE = 1e-9
ZERO_SINGULAR_VALUE = 1e-12
EIGENGAP_TOLERANCE = 1e-10
SIGN_TOLERANCE = 1e-12

# Generation
ADJACENCY_BLOCK_ROWS = 1024

# Stream purposes for splittable random streams (seed, replication, purpose)
STREAM_PURPOSES = {
    'covariates': 1,
    'communities': 2,
    'adjacency': 3,
    'kmeans': 4,
    'tests': 99,
}

# Clustering defaults
KMEANS_RESTARTS = 10
KMEANS_MAX_ITERS = 100
KMEANS_EPSILON = 0.05

# Laplacian regularization default: 'mean-degree' or a float
DEFAULT_TAU = 'mean-degree'

# Alignment
MAX_EXACT_PERMUTATION_G = 8

# Monte Carlo defaults
GRID_RESOLUTION = 50
DEFAULT_DELTA = 0.1
COVERAGE_SE_MULTIPLIER = 3.0
MIN_SLOPE_POINTS = 4
SLOPE_CONFIDENCE = 0.95

# Output formats
CSV_FLOAT_FORMAT = "%.17g"
JSON_INDENT = 2

# Names of bounds tracked by the harness, with the metric each one controls
BOUND_METRICS = {
    'boundLaplacians': 'laplacian_deviation',
    'integr': 'laplacian_deviation',
    'clustRate': 'misclustering_x',
    'rate_BHat_g': 'B_error',
    'rate_BHat': 'B_error',
    'rate_piHat': 'pi_error',
}

RECORD_METRICS = [
    'laplacian_deviation',
    'laplacian_deviation_xg',
    'misclassification_x',
    'misclassification_xp',
    'misclustering_x',
    'misclustering_xp',
    'B_error',
    'pi_error',
    'sup_radius',
    'inf_radius',
]
