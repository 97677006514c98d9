import os

from dotenv import load_dotenv

load_dotenv()

# Thread count is the only value read from the environment
NUM_THREADS = max(1, int(os.getenv("SPARSEFRONT_THREADS", "1")))

# Tolerances
SUPPORT_TOL = 1e-7
FEASIBILITY_TOL = 1e-8
THETA_TOL = -1e-7

# Enumeration caps
SUPER_SUPPORT_CAP = 10_000
ENUMERATION_BUDGET = 5000
SCALARIZATION_BUDGET = 2000

# QP engine
QP_TOL = 1e-9
QP_MAX_ITER = 200

# Dense coskewness tensors are only materialised up to this many assets
COSKEW_DENSE_MAX = 128

# Objective scales used when ingesting market data
DEFAULT_SCALES = {
    "ER": 1e2,
    "V": 1e2,
    "ESG": 1e-2,
    "SR": 1.0,
    "SW": 1e-1,
}

# Desk-scale budgets (seconds)
PHASE1_BUDGET = 10.0
SFSD_BUDGET = 5.0
