from pathlib import Path
from typing import IO, Iterable, Mapping, Union

import pandas as pd

CSV_COLUMNS = ["m", "n", "k", "variant", "level", "threads", "reps", "time_s", "egf_measured", "egf_modeled", "rel_err"]


def write_rows(rows: Iterable[Mapping], stream: IO[str]):
    """Writes rows as CSV with the fixed column order; missing measurements become empty cells."""
    df = pd.DataFrame(list(rows), columns=CSV_COLUMNS)
    df.to_csv(stream, index=False, float_format="%.17g", lineterminator="\n")


def read_rows(file_path: Union[str, Path, IO[str]]) -> pd.DataFrame:
    """Reads a CSV written by :func:`write_rows`; empty cells come back as NaN."""
    df = pd.read_csv(file_path, dtype={"variant": str}, float_precision="round_trip")
    assert list(df.columns) == CSV_COLUMNS, f"Unexpected columns {list(df.columns)}."
    return df
