from .presets import bundled_presets_dir, list_presets, load_preset
from .records import CSV_COLUMNS, read_rows, write_rows
from .settings import (
    parse_blocking,
    parse_fixed,
    parse_range,
    read_model_params,
    read_preset_file,
)
