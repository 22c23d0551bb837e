import pathlib

DEBUG = False

PROGNAME = "penaltylearn"
VERSION = "0.1.0"
CONFIG_SCHEMA_VERSION = 1
DESCRIPTION = (
    """Learn the penalty parameter of optimal partitioning changepoint detection """
    """from labeled sequences: segmentation, exact target intervals, features, """
    """interval regression models (BIC, linear, MMIT, MLP) and cross-validation."""
)
HOME = pathlib.Path("").home()
PKG_PATH = pathlib.Path(__file__).absolute().parent
TEMPLATE_PATH = pathlib.Path(PKG_PATH) / "templates"
TEMPLATE_CONFIG = TEMPLATE_PATH / "penaltylearn.ini"
CONFIG_FILEPATH = HOME / ".penaltylearn.ini"

LOG_DEFAULT_FORMAT = "{time:YYYY/MM/DD - HH:mm:ss} [{level}] {message}"

#
# Segmentation
#
BRUTE_FORCE_MAX_LENGTH: int = 16
TIE_RELATIVE_TOLERANCE: float = 1e-12
DEFAULT_KMAX: int = 25

#
# Training
#
DEFAULT_MARGIN: float = 1.0
DEFAULT_LEARNING_RATE: float = 0.001
DEFAULT_MAX_ITERATIONS: int = 12000
DEFAULT_PATIENCE: int = 20
DEFAULT_MIN_IMPROVEMENT: float = 1e-9
ADAM_BETA1: float = 0.9
ADAM_BETA2: float = 0.999
ADAM_EPSILON: float = 1e-8

MLP_MIN_LAYERS: int = 1
MLP_MAX_LAYERS: int = 4
MLP_LAYERS: tuple[int, ...] = (1, 2, 3, 4)
MLP_WIDTHS: tuple[int, ...] = (2, 4, 8, 16, 32, 64, 128, 256, 512)

MMIT_MAX_DEPTHS: tuple[int, ...] = (1, 2, 4, 8)
MMIT_MIN_SAMPLES_SPLITS: tuple[int, ...] = (2, 8, 32)
MMIT_MARGINS: tuple[float, ...] = (0.0, 1.0, 2.0)

L1_GRID: tuple[float, ...] = (1e-3, 1e-2, 1e-1, 1.0, 10.0)

#
# Cross-validation
#
DEFAULT_FOLDS: int = 6
INNER_FOLDS: int = 2
DEFAULT_SEED: int = 1

MODEL_NAMES: tuple[str, ...] = (
    "BIC.1",
    "linear.1",
    "linear.2",
    "linear.4",
    "linear.full",
    "mmit.1",
    "mmit.2",
    "mmit.4",
    "mmit.full",
    "mlp.1",
    "mlp.2",
    "mlp.4",
    "mlp.full",
)

#
# File formats
#
SEQUENCES_COLUMNS: tuple[str, ...] = ("sequenceID", "position", "value")
LABELS_COLUMNS: tuple[str, ...] = ("sequenceID", "start", "end", "changes")
FOLDS_COLUMNS: tuple[str, ...] = ("sequenceID", "fold")
SEGMENTS_COLUMNS: tuple[str, ...] = ("sequenceID", "changepoint_index", "changepoint_position")
PATH_COLUMNS: tuple[str, ...] = ("sequenceID", "segments", "min_lambda", "max_lambda", "data_cost")
TARGETS_COLUMNS: tuple[str, ...] = ("sequenceID", "min_log_lambda", "max_log_lambda")
ERRFUN_COLUMNS: tuple[str, ...] = (
    "min_log_lambda",
    "max_log_lambda",
    "fp",
    "fn",
    "segments",
    "labels",
    "k_max",
    "labels_key",
    "kmax_warning",
)
PREDICTIONS_COLUMNS: tuple[str, ...] = ("sequenceID", "pred_log_lambda")
RESULTS_COLUMNS: tuple[str, ...] = (
    "model",
    "fold",
    "accuracy",
    "fp",
    "fn",
    "labels",
    "chosen_config",
    "seconds",
)
SUMMARY_COLUMNS: tuple[str, ...] = ("model", "median", "q25", "q75")

CSV_FLOAT_FORMAT: str = "%.17g"
