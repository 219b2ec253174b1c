"""
Solver defaults and environment variables
"""
import os
from pathlib import Path

# Output directory configuration
OUTPUT_DIR = Path(os.environ.get('NEPMRI_OUTPUT_DIR', './runs'))

# Worker threads for validation sweeps (None lets the executor decide)
_max_workers = os.environ.get('NEPMRI_MAX_WORKERS')
MAX_WORKERS = int(_max_workers) if _max_workers else None

# Operator cache configuration
OPERATOR_CACHE_SIZE = int(os.environ.get('NEPMRI_CACHE_SIZE', '64'))

# Greedy sampling
DEFAULT_CANDIDATE_COUNT = 501
DEFAULT_BUDGET = 20
DEFAULT_VALIDATION_POINTS = 101
INDICATOR_CAP = 1e300
SOLVE_BLOWUP_FACTOR = 1e14

# Surrogate construction
NODE_COINCIDENCE_RTOL = 1e-14
ACTIVE_WEIGHT_RTOL = 1e-14
SINGULAR_RCOND = 1e-13
WEIGHT_GAP_RTOL = 1e-12
SUM_DEGENERATE_TOL = 1e-10

# Pole and residue extraction
DEFAULT_TOL_CLUSTER = 1e-7
DEFAULT_NEWTON_TOL = 1e-13
DEFAULT_NEWTON_MAX_ITER = 50
AT_INFINITY_FACTOR = 1e8
LAURENT_POINTS = 64
RESIDUE_RTOL = 1e-12

# Eigenpair recovery
REGION_RTOL = 1e-8

# CSV output
FLOAT_FORMAT = '.17g'
