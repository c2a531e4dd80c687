# app/config.py
import os
from dotenv import load_dotenv

# Load environment variables from a .env file in the project root
load_dotenv()


def _float(name, default):
    return float(os.getenv(name, default))


class Config:
    # Flask configuration
    DEBUG = os.getenv("FLASK_DEBUG", "False").lower() in ["true", "1", "t"]
    LOG_LEVEL = os.getenv("AC_MINMAX_LOG_LEVEL", "INFO").upper()

    # Run layout
    OUTPUT_DIR = os.getenv("AC_MINMAX_OUTPUT", "out")
    SCENARIO_DIR = os.getenv(
        "AC_MINMAX_SCENARIOS",
        os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios"),
    )
    THREADS = max(1, int(os.getenv("AC_MINMAX_THREADS", "1")))
    SEED = int(os.getenv("AC_MINMAX_SEED", "7"))

    # Tolerances, scaled by 1/eps where they are used
    TOL_EIG_SCALE = _float("AC_MINMAX_TOL_EIG", "1e-6")
    TOL_RES_SCALE = _float("AC_MINMAX_TOL_RES", "1e-8")

    # Gradient flows
    DT_FRACTION = _float("AC_MINMAX_DT_FRACTION", "0.125")
    MAX_FLOW_STEPS = int(os.getenv("AC_MINMAX_MAX_STEPS", "20000"))
    MONITOR_EVERY = int(os.getenv("AC_MINMAX_MONITOR_EVERY", "25"))

    # Mountain pass
    STRING_NODES = int(os.getenv("AC_MINMAX_STRING_NODES", "33"))
    STRING_MAX_ITER = int(os.getenv("AC_MINMAX_STRING_MAX_ITER", "4000"))
    STRING_PERTURBATION = _float("AC_MINMAX_STRING_PERTURBATION", "0.05")
    DEDUP_TOL = _float("AC_MINMAX_DEDUP_TOL", "1e-3")

    # Paths and bounds
    ERR_CONSTANT = _float("AC_MINMAX_ERR_CONSTANT", "1.0")
    PATH_MAX_SAMPLES = int(os.getenv("AC_MINMAX_PATH_MAX_SAMPLES", "48"))
    MULTIPLICITY_CLUSTER_FACTOR = _float("AC_MINMAX_CLUSTER_FACTOR", "12")
