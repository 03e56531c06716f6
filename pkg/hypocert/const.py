import json
from pathlib import Path

DOMAIN = "hypocert"
MANIFEST = json.loads((Path(__file__).parent / "manifest.json").read_text(encoding="utf-8"))
VERSION = MANIFEST["version"]

# Linear algebra tolerances
RANK_TOL = 1e-10
SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
ROUNDING_SLACK = 1e-12

# Cutoff defaults: psi == 1 on |x| <= 1/2, supp psi in |x| <= 1; w == 1 on |x| >= 1/2, supp w in |x| >= 1/4
PSI_INNER = 0.5
PSI_OUTER = 1.0
W_INNER = 0.25
W_OUTER = 0.5

# Pointwise verification
R_MIN = 1.0
R_MAX = 1e4
N_RADIAL = 24
N_ANGULAR = 64
GAMMA_START = 2.0
GAMMA_CAP = 2.0 ** 20
PASS_MARGIN = 0.1
DEFAULT_EPS = 0.1
CONSTANT_CAP = 1e8
DRIFT_LIMIT = 0.2
FD_BAND = 1e-3
FD_TOLERANCE = 1e-6
TOP_POINTS = 32
WEIGHT_LATTICE = tuple(2.0 ** k for k in range(-6, 11))

# Spectral verification
BOX_LENGTH = 16.0
ENVELOPE_WIDTH = 1.5
TAIL_LIMIT = 1e-9
TAIL_BAND = 7.0 / 16.0
PAD_FACTOR = 16
PADDED_POINTS_LIMIT = 2 ** 21
COMMUTATOR_TOLERANCE = 1e-6
TIME_CONTRIBUTION_TOLERANCE = 1e-10

TASKS = ("kalman", "exponents", "build", "verify-pointwise", "verify-spectral")
TASK_DEPENDENCIES = {
    "kalman": (),
    "exponents": ("kalman",),
    "build": ("kalman", "exponents"),
    "verify-pointwise": ("kalman", "exponents", "build"),
    "verify-spectral": ("kalman", "exponents"),
}
ESTIMATES = (
    "theorem-main",
    "theorem-anisotropic",
    "conjectured-strong",
    "prop-particular-1",
    "prop-particular-2",
    "kinetic-example",
)
ENSEMBLE_KINDS = ("gaussian-hermite", "band-limited-gaussian")

EXIT_OK = 0
EXIT_CERTIFICATE = 1
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_SEARCH = 4
EXIT_NUMERICAL = 5

ENV_MAX_WORKERS = "HYPOCERT_MAX_WORKERS"
ENV_LOG_LEVEL = "HYPOCERT_LOG_LEVEL"

FREQUENCY_CONVENTION = "D_x acts on the grid frequency xi = k/L through the symbol value at 2*pi*xi"
ESTIMATE_DISCLAIMER = (
    "Ensemble ratios are empirical lower bounds on the best constant of the estimate; "
    "they do not certify the estimate."
)
