# app/utils/constants.py

# --- Application Information ---
APP_NAME_DEFAULT = "heatcast"
VERSION = "1.0.0"

# --- Forecast geometry ---
HORIZON = 24            # hours forecast per origin
WINDOW_HOURS = 24       # h: time positions per scalogram
N_SCALES = 24           # s: scales per scalogram
MORLET_OMEGA0 = 6.0
HOURS_PER_WEEK = 168

# --- CLI exit codes ---
EXIT_OK = 0
EXIT_USAGE_ERROR = 1
EXIT_DATA_ERROR = 2

# --- CSV schemas ---
METER_CSV_HEADER = ["timestamp", "meter_id", "dma_id", "consumption_kwh"]
WEATHER_CSV_HEADER = ["timestamp", "max_temp_c", "feels_like_c"]
DEMAND_CSV_HEADER = ["timestamp", "dma_id", "demand_kwh"]
FORECAST_CSV_HEADER = ["timestamp", "dma_id", "model", "forecast_kwh", "actual_kwh"]
DECOMPOSITION_CSV_HEADER = ["timestamp", "series", "observed", "trend", "seasonal", "residual"]
HISTORY_CSV_HEADER = ["epoch", "train_loss", "val_loss"]
DMA_METRICS_CSV_HEADER = ["dma_id", "model", "mae_mean", "mae_std", "mape_mean", "mape_std", "windows"]

# --- Default file names inside the work directory ---
DEFAULT_METER_CSV = "meters.csv"
DEFAULT_WEATHER_CSV = "weather.csv"
DEFAULT_DEMAND_CLEAN_CSV = "demand_clean.csv"
DEFAULT_WEATHER_CLEAN_CSV = "weather_clean.csv"
CHECKPOINT_TEMPLATE = "model_{kind}.ckpt"
HISTORY_TEMPLATE = "history_{kind}.csv"
METRICS_TEMPLATE = "metrics_{kind}.json"
FORECASTS_TEMPLATE = "forecasts_{kind}.csv"

# --- Checkpoint format ---
CHECKPOINT_MAGIC = b"HEATCKPT"
CHECKPOINT_VERSION = 1

# --- Standard Date/Time Formats ---
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

# --- Number formatting ---
FLOAT_FORMAT_EXACT = "%.17g"    # round-trips a float64 bitwise
FLOAT_FORMAT_EXPORT = "%.9g"    # forecast export precision

# --- Model kinds ---
MODEL_KINDS = ("lstm", "f", "fprime")
PERSISTENCE_KIND = "persistence"

# Default log format and level (can be overridden by config or logger_config.py)
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - [%(module)s.%(funcName)s:%(lineno)d] - %(message)s'
LOG_LEVEL = "INFO"

# Built-in settings; lowest precedence layer of app.core.config.Config.
DEFAULT_SETTINGS = {
    "LOG_LEVEL": LOG_LEVEL,
    "LOG_FORMAT": LOG_FORMAT,
    "DATA_PATH": "data",
    # synthetic benchmark
    "SEED": 42,
    "N_DAYS": 365,
    "DMA_COUNT": 3,
    "NOISE_LEVEL": 1.0,
    "SYNTH_START": "2018-07-01",
    # preprocessing / features
    "OUTLIER_Z": 5.0,
    "OUTLIER_WINDOW": 169,
    "MAX_INTERP_GAP": 6,
    "LAGS": "24,168",
    "USE_DECOMPOSITION": True,
    "DECOMPOSITION_PERIOD": 24,
    "DEMAND_CWT_MODE": "difference",
    "TEMPERATURE_CWT_MODE": "raw",
    "TARGET_MODE": "diff24",
    # splits
    "TEST_YEAR": 2019,
    "TRAIN_FRACTION": 0.8,
    # training
    "BATCH_SIZE": 256,
    "LEARNING_RATE": 0.01,
    "MAX_EPOCHS": 150,
    "PATIENCE": 10,
    "MODEL_SCALE": "desk",
    "POSITIONAL_ENCODING": "learned",
    "GRID_WORKERS": 1,
}
