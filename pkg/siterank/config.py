import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent
OUTPUT_DIR = Path(os.getenv("SITERANK_OUTPUT_DIR", str(BASE_DIR / "data")))

LOG_LEVEL = os.getenv("SITERANK_LOG_LEVEL", "INFO")

HOME_LABEL = os.getenv("SITERANK_HOME_LABEL", "HP")
TOP_K = int(os.getenv("SITERANK_TOP_K", "10"))
DROP_FIRST = int(os.getenv("SITERANK_DROP_FIRST", "0"))

# Random walks: length = WALK_FACTOR * (N + L), aborted past WALK_CAP_FACTOR * length
WALK_FACTOR = int(os.getenv("SITERANK_WALK_FACTOR", "10"))
WALK_CAP_FACTOR = int(os.getenv("SITERANK_WALK_CAP_FACTOR", "100"))

TOLERANCE = float(os.getenv("SITERANK_TOLERANCE", "1e-10"))
MAX_ITERS = int(os.getenv("SITERANK_MAX_ITERS", "10000"))

SESSION_TIMEOUT_MINUTES = int(os.getenv("SITERANK_SESSION_TIMEOUT_MINUTES", "30"))

# Synthetic sites
TERMINATION_PROB = float(os.getenv("SITERANK_TERMINATION_PROB", "0.15"))
IN_EXPONENT = float(os.getenv("SITERANK_IN_EXPONENT", "2.1"))
OUT_EXPONENT = float(os.getenv("SITERANK_OUT_EXPONENT", "2.72"))
LENGTH_EXPONENT = float(os.getenv("SITERANK_LENGTH_EXPONENT", "2.0"))
SESSIONS_PER_PAGE = float(os.getenv("SITERANK_SESSIONS_PER_PAGE", "1.2"))

MAX_CONCURRENT = int(os.getenv("SITERANK_MAX_CONCURRENT", "4"))  # parallel experiment cells
