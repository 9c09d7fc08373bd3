"""CSV report writers.  Every data row carries provenance columns
(config hash, seed, epoch) so files can be traced back to their run."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])
    return path


def fmt_value(v: float | None) -> str:
    return "undefined" if v is None else f"{v:.6f}"
