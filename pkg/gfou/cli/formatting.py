"""Rendering of results for the terminal: 6 significant digits, rich tables, error JSON."""

import json
import math
from collections.abc import Iterable, Mapping, Sequence
from typing import Any

import numpy as np
from rich.table import Table

SIGNIFICANT_DIGITS = 6

STATUS_STYLES = {
    "pass": "green",
    "fail": "red",
    "inconclusive": "yellow",
    "skipped": "dim",
    "error": "bold red",
}


def fmt(value: Any) -> str:
    """Numbers with 6 significant digits; None and NaN as '-'."""
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return "-" if math.isnan(value) else f"{value:.{SIGNIFICANT_DIGITS}g}"
    if isinstance(value, list | tuple):
        return ", ".join(fmt(v) for v in value)
    return str(value)


def significant(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    """Round every float in a nested structure to the given significant digits.

    Used for stdout; files written with --out keep full precision.
    """
    if isinstance(value, dict):
        return {k: significant(v, digits) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [significant(v, digits) for v in value]
    if isinstance(value, np.ndarray):
        return [significant(v, digits) for v in value.tolist()]
    if isinstance(value, float | np.floating):
        value = float(value)
        return value if not math.isfinite(value) else float(f"{value:.{digits}g}")
    return value


def key_value_table(title: str, values: Mapping[str, Any]) -> Table:
    """Two-column table of a flat mapping."""
    table = Table(title=title, show_header=False, title_justify="left")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="white")
    for key, value in values.items():
        table.add_row(key, fmt(value))
    return table


def rows_table(title: str, rows: Sequence[Mapping[str, Any]], columns: Iterable[str]) -> Table:
    """One row per mapping, restricted to the given columns."""
    table = Table(title=title, title_justify="left")
    columns = list(columns)
    for column in columns:
        table.add_column(column, style="cyan" if column == columns[0] else "white")
    for row in rows:
        cells = []
        for column in columns:
            text = fmt(row.get(column))
            if column == "status" and text in STATUS_STYLES:
                text = f"[{STATUS_STYLES[text]}]{text}[/{STATUS_STYLES[text]}]"
            cells.append(text)
        table.add_row(*cells)
    return table


def error_json(error: BaseException, exit_code: int) -> str:
    """{"error": <class>, "message": <text>, "exit_code": <code>}."""
    return json.dumps(
        {"error": type(error).__name__, "message": str(error), "exit_code": exit_code}
    )
