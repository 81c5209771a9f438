"""
Configuration constants for gyrosym.

Tolerances are module-level constants; every operation that uses one takes it
as a keyword argument defaulting to the value defined here.
"""
import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

# Scenario library location (overridable through the environment)
SCENARIO_DIR_ENV = "GYROSYM_SCENARIO_DIR"
SCENARIO_DIR = Path(os.environ.get(SCENARIO_DIR_ENV, BASE_DIR / "scenarios"))

# Validation tolerances
TAU_ORTH = 1e-9      # rotation matrix orthonormality / determinant
TAU_SKEW = 1e-9      # skew-symmetry of so(3) elements
TAU_SPHERE = 1e-9    # |alpha| = 1 for sphere points
TAU_CLOSED = 1e-8    # closedness residual of the gyroscopic form
TAU_CIRC = 1e-7      # cell circulation per unit area
TAU_INV = 1e-9       # invariance under the symmetry action
TAU_DEC = 1e-6       # pointwise check (k - grad f) x alpha = 0

# Numerical parameters
POLAR_MAX_ITER = 50
FD_STEP = 1e-6               # ambient finite differences of sphere fields
FLOW_STEP = 1e-5             # finite differences along flows on SO(3)
DEFAULT_GRID = (180, 360)    # latitude x longitude cells
GAUSS_NODES = 8              # Gauss-Legendre nodes per mesh edge
LEMMA1_MIN_ORDER = 1.9
NOISE_FLOOR = 1e-9           # residuals below this count as converged

# Output
CSV_FLOAT_FORMAT = "%.17g"

# Lemma 1 harness
LEMMA1_HORIZON = 10.0        # integration time used by the lemma1 command
LEMMA1_BASE_STRIDE = 40      # coarsest output stride in steps (h); h/2 and h/4 follow

# Exit codes
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_STEP_REJECTED = 3
