import json
import math
from collections.abc import Iterable, Sequence
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any


def round_half_up(value: float) -> int:
    """Round to the nearest integer, .5 going up (2.5 -> 3, not banker's 2)."""
    return int(Decimal(repr(value)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def format_float(value: float) -> str:
    """Shortest round-trippable text for a float; stable across runs."""
    if not math.isfinite(value):
        return str(value)
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def write_tsv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> None:
    """Write UTF-8, LF-terminated TSV. Floats are written with `format_float`."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("\t".join(header) + "\n")
        for row in rows:
            cells = [
                format_float(cell) if isinstance(cell, float) else str(cell)
                for cell in row
            ]
            handle.write("\t".join(cells) + "\n")


def write_json(path: Path, payload: Any) -> None:
    """Write sorted-key, indented JSON with a trailing newline."""
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")
