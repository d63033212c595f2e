import os
import json
import tempfile
import numpy as np
from autocal_tools.exceptions import UsageError, DomainError

ENV_PREFIX = "AUTOCAL_"
FLOAT_FORMAT = "%.17g"


def read_config(config_path):
    """
    Read a JSON run configuration. A missing path returns an empty dict.
    """
    if config_path is None:
        return {}
    if not os.path.exists(config_path):
        raise UsageError(f"Config file not found: {config_path}")
    with open(config_path, 'r') as file:
        try:
            config = json.load(file)
        except json.JSONDecodeError as e:
            raise UsageError(f"Config file {config_path} is not valid JSON: {e}")
    if not isinstance(config, dict):
        raise UsageError(f"Config file {config_path} must hold a JSON object")
    return config


def get_setting(key, config=None, default=None, cast=None):
    """
    Look a setting up: environment (AUTOCAL_<KEY>) first, then the config dict, then the default.

    Args:
        key (str): Setting name, e.g. "seed".
        config (dict): Parsed config file, optional.
        default: Fallback value.
        cast (callable): Applied to values coming from the environment or the config.
    """
    value = os.getenv(ENV_PREFIX + key.upper())

    if value is None and config is not None:
        value = config.get(key)

    if value is None:
        return default

    if cast is not None:
        try:
            value = cast(value)
        except (TypeError, ValueError):
            raise UsageError(f"Setting '{key}' has invalid value {value!r}")
    return value


def atomic_write(fp_out, text):
    """
    Write text to fp_out through a temp file in the same directory and a rename.
    """
    directory = os.path.dirname(os.path.abspath(fp_out))
    os.makedirs(directory, exist_ok=True)
    fd, fp_tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=os.path.basename(fp_out))
    try:
        with os.fdopen(fd, 'w', newline='') as file:
            file.write(text)
        os.replace(fp_tmp, fp_out)
    except BaseException:
        if os.path.exists(fp_tmp):
            os.remove(fp_tmp)
        raise


def write_frame(df, fp_out):
    """Atomically write a DataFrame as CSV with 17 significant digits."""
    atomic_write(fp_out, df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))


def write_json(payload, fp_out):
    atomic_write(fp_out, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def as_vector(values, name="values"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise UsageError(f"{name} must be one dimensional, got shape {arr.shape}")
    return arr


def check_same_length(**arrays):
    lengths = {name: len(arr) for name, arr in arrays.items()}
    if len(set(lengths.values())) > 1:
        raise UsageError(f"length mismatch: {lengths}")


def check_positive(arr, name):
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and strictly positive")
