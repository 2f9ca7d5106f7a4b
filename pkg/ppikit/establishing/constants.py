"""Module of constants used to configure estimation, diagnostics and simulation."""

from pathlib import Path

_cache_folder = Path.home() / ".cache" / "ppikit/"
DEFAULT_LOG = _cache_folder / "ppikit.log"

SCHEMA_VERSION = "1.0"
SEED_ENV_VAR = "PPIKIT_SEED"

# Estimation
DEFAULT_LEVEL = 0.90
LAMBDA_GRID_STEP = 0.01
CONDITION_LIMIT = 1e12
COVARIANCE_TOL = 1e-10

# Cross-fitting and bootstrap
DEFAULT_FOLDS = 5
DEFAULT_BOOT_REPLICATES = 1000
MIN_BOOT_REPLICATES = 100
BOOT_BATCH_SIZE = 50

# Diagnostics
SMD_THRESHOLD = 0.1
PVALUE_THRESHOLD = 0.01
ENERGY_MAX_ROWS = 1000

METHODS = ("Classical", "PPI", "PPIpp", "CrossPPI", "CrossPPBoot")
REFERENCE_METHODS = ("Oracle",)
FLAGS = ("A1_suspect", "A2_suspect", "A3_violated")
VARIANTS = ("PPI_or_PPIpp", "MAR_robust_variant", "CrossFit_variant",
            "Imputation_variant", "Combined")
