import warnings
from dataclasses import fields
from pathlib import Path
from typing import Dict, List, Union

import pandas as pd

from ..blocking import BlockingParams
from ..model import ModelParams

_PRESET_KEYS = {"name", "tau_a", "tau_b", "peak_gflops", "bandwidth_gbs", "lambda", "channel_factor", "cores"}

_BLOCKING_KEYS = {"mc": "m_c", "nc": "n_c", "kc": "k_c", "mr": "m_r", "nr": "n_r"}


def read_preset_file(file_path: Union[str, Path]) -> Dict[str, str]:
    """
    Reads a plain-text ``key=value`` hardware preset into a dictionary of strings.

    Lines starting with '#' are comments. Unknown keys are kept but trigger a warning.

    Parameters
    ----------
    file_path : str or Path
        The path to the preset file.

    Returns
    -------
    dict
        The raw key/value pairs, in file order.
    """
    df = pd.read_csv(
        file_path,
        sep="=",
        comment="#",
        header=None,
        names=["key", "value"],
        dtype=str,
        skip_blank_lines=True,
        engine="python",
    )
    assert not df.empty, f"The preset file '{file_path}' does not define any parameters."
    assert df["value"].notna().all(), f"Every line of '{file_path}' must have the form key=value."
    preset = dict(zip(df["key"].str.strip(), df["value"].str.strip()))
    unknown = sorted(set(preset) - _PRESET_KEYS)
    if unknown:
        warnings.warn(f"Ignoring unknown preset keys {unknown} in '{file_path}'.")
    return preset


def read_model_params(file_path: Union[str, Path]) -> ModelParams:
    """
    Loads model parameters from a preset file.

    Either ``tau_a`` or ``peak_gflops`` (per-core GFLOPS) must be given, and either ``tau_b`` or
    ``bandwidth_gbs``. ``lambda``, ``channel_factor`` and ``cores`` fall back to the ModelParams defaults.
    """
    preset = read_preset_file(file_path)
    assert "tau_a" in preset or "peak_gflops" in preset, "Either 'tau_a' or 'peak_gflops' is required."
    assert "tau_b" in preset or "bandwidth_gbs" in preset, "Either 'tau_b' or 'bandwidth_gbs' is required."

    tau_a = float(preset["tau_a"]) if "tau_a" in preset else 1.0 / (float(preset["peak_gflops"]) * 1e9)
    tau_b = float(preset["tau_b"]) if "tau_b" in preset else 8.0 / float(preset["bandwidth_gbs"]) * 1e-9
    return ModelParams(
        tau_a=tau_a,
        tau_b=tau_b,
        prefetch_efficiency=float(preset.get("lambda", 0.7)),
        channel_factor=float(preset.get("channel_factor", 1.0)),
        cores=int(preset.get("cores", 1)),
        name=preset.get("name", Path(file_path).stem),
    )


def parse_blocking(text: str) -> BlockingParams:
    """Parses 'mC=96,nC=4096,kC=256,mR=8,nR=4'; omitted keys keep their defaults."""
    overrides = {}
    for key, value in _split_assignments(text).items():
        name = _BLOCKING_KEYS.get(key.lower())
        if name is None:
            raise ValueError(f"Unknown blocking parameter '{key}'; expected one of mC, nC, kC, mR, nR.")
        overrides[name] = int(value)
    defaults = {f.name: f.default for f in fields(BlockingParams)}
    return BlockingParams(**{**defaults, **overrides})


def parse_range(text: str) -> List[int]:
    """Parses 'start:stop:step' (stop inclusive) into the list of sizes."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"Expected a range of the form start:stop[:step], got '{text}'.")
    start, stop = int(parts[0]), int(parts[1])
    step = int(parts[2]) if len(parts) == 3 else 1
    if start < 1 or step < 1 or start > stop:
        raise ValueError(f"A range needs 1 <= start <= stop and a positive step, got '{text}'.")
    return list(range(start, stop + 1, step))


def parse_fixed(text: str) -> Dict[str, int]:
    """Parses 'm=..,n=..,k=..' (any subset) into positive integer dimensions."""
    dims = {}
    for key, value in _split_assignments(text).items():
        if key not in ("m", "n", "k"):
            raise ValueError(f"Unknown fixed dimension '{key}'; expected m, n or k.")
        dims[key] = int(value)
        if dims[key] < 1:
            raise ValueError(f"Fixed dimension {key} must be positive, got {value}.")
    return dims


def _split_assignments(text: str) -> Dict[str, str]:
    pairs = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or not value.strip():
            raise ValueError(f"Expected key=value, got '{item}'.")
        pairs[key.strip()] = value.strip()
    return pairs
