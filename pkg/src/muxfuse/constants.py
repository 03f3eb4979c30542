APP_NAME: str = "muxfuse"

CONFIG_FILE_NAME = "config.yaml"
TEMPLATE_CONFIG_FILE_NAME = "default_config.yaml"

CONFIG_SUFFIXES = frozenset([".yaml", ".yml"])

MANIFEST_FILE_NAME = "manifest.json"
FEATURES_FILE_NAME = "features.tsv"
LABELS_FILE_NAME = "labels.tsv"
SPLITS_FILE_NAME = "splits.json"
KNN_LAYER_NAME = "KNN"

METRICS_CSV_NAME = "metrics.csv"
CSV_COLUMNS = ("dataset", "method", "seed", "maf1", "maf1_std", "nmi", "nmi_std", "sim5", "wall_s")

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSUPPORTED = 2
EXIT_NUMERIC = 3

# Numerics
LOG_CLAMP = 1e-7
STANDARDIZE_EPS = 1e-5
PRELU_INIT_SLOPE = 0.25
KMEANS_SEEDS = 10
KMEANS_MAX_ITER = 300
KMEANS_TOL = 1e-6
SIM_AT_K = 5

ENV_SEED = "MUXFUSE_SEED"
ENV_LOG_DIR = "MUXFUSE_LOG_DIR"
ENV_WORKING_DIR = "MUXFUSE_DIR"
