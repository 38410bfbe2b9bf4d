"""
Configuration settings for the frequency-secured market clearing engine
"""

from pathlib import Path

# Interior-point solver
GAP_TOL = 1e-8                # relative complementarity gap
FEAS_TOL = 1e-8               # relative primal/dual residual
INFEASIBILITY_TOL = 1e-8      # certificate acceptance
MAX_ITERATIONS = 200
KKT_REGULARIZATION = 1e-10    # static, both diagonal blocks
STEP_FRACTION = 0.99          # fraction of the distance to the cone boundary
REFINEMENT_STEPS = 3          # iterative refinement passes per KKT solve
EQUILIBRATION_PASSES = 8      # Ruiz passes
PRESOLVE_TOL = 1e-9
DIVERGENCE_LIMIT = 1e13
MIN_STEP = 1e-12
PHASE_ONE_TOL = 1e-6          # residual that proves infeasibility of a stalled solve
PHASE_ONE_WEIGHT = 1e-10      # weight of the cone identity in the phase-one cost

# Branch-and-bound
MIP_GAP = 1e-6
INTEGRALITY_TOL = 1e-6
BOUND_MONOTONE_TOL = 1e-6     # relative slack allowed on child >= parent
MAX_NODES = 20000
ORACLE_MAX_ASSIGNMENTS = 2 ** 20
CONE_CHECK_TOL = 1e-7         # acceptance of a nadir alternative at a node

# Pricing and settlement
PRICE_AGREEMENT_TOL = 1e-6
FR_TIE_BREAK_COST = 1e-3      # GBP/MW per rank step, Step 1 only
PRICE_DECIMALS = 2

# Frequency security screening
SECURITY_TOL = 1e-6           # Hz, Hz/s and MW
DEFAULT_TRAJECTORY_STEP = 0.01  # s
TRAJECTORY_HORIZON_FACTOR = 1.5

# Output
CSV_FLOAT_FORMAT = "%.10g"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_MISMATCH = 3

# Bundled scenario files
SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
