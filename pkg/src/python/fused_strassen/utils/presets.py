import warnings
from pathlib import Path
from typing import List, Optional, Union

from natsort import natsorted

from ..model import ModelParams
from .settings import read_model_params

PRESET_SUFFIX = ".cfg"


def bundled_presets_dir() -> Path:
    """
    The directory holding the presets shipped with the package.

    Installed builds carry a copy inside the package; a source checkout falls back to the top-level
    'presets' folder.
    """
    package_dir = Path(__file__).parent.parent / "presets"
    if package_dir.is_dir():
        return package_dir
    return Path(__file__).parents[4] / "presets"


def list_presets(folder_path: Optional[Union[str, Path]] = None) -> List[Path]:
    """Returns the preset files of a folder (the bundled presets by default) in natural order."""
    folder_path = Path(folder_path) if folder_path is not None else bundled_presets_dir()
    presets = natsorted(folder_path.glob(f"*{PRESET_SUFFIX}"))
    if not presets:
        warnings.warn(f"No '{PRESET_SUFFIX}' presets found in '{folder_path}'.")
    return presets


def load_preset(name: str, folder_path: Optional[Union[str, Path]] = None) -> ModelParams:
    """
    Loads a preset by file stem (e.g. 'ivybridge-1core') or by path.

    Raises
    ------
    FileNotFoundError
        If no preset with that name exists.
    """
    candidate = Path(name)
    if candidate.suffix == PRESET_SUFFIX and candidate.is_file():
        return read_model_params(candidate)
    for file_path in list_presets(folder_path):
        if file_path.stem == name:
            return read_model_params(file_path)
    raise FileNotFoundError(f"No preset named '{name}'.")
